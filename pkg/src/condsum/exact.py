"""Exact ground truth: displacement laws, convolutions, conditional laws.

All probabilities here come from integer counting or dense dynamic
programming, never from sampling; these are the oracles the rest of the
package is tested against.

Displacement enumeration walks address multisets (order invariance makes
sequences with equal counts interchangeable) and weights each multiset by its
multinomial coefficient.  Counts, weights and their bucket sums are integers
below 2**53 throughout the feasible range, so the float64 arithmetic is
exact; the only rounding is the final division by m**n.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .distributions import Pmf
from .probing import totals_from_counts

if TYPE_CHECKING:  # pragma: no cover
    from .models import ModelSpec

__all__ = [
    "ConditioningSpec",
    "FeasibilityError",
    "ConditioningError",
    "exact_displacement_pmf",
    "exact_displacement_fractions",
    "displacement_law",
    "DISPLACEMENT_ENUM_CAP",
    "exact_sum_pmf",
    "exact_conditional_law",
    "occupancy_exact_pmf",
]

MAX_MULTISETS = 10**8
DISPLACEMENT_ENUM_CAP = 12  # largest block size with a cached exact law
_CHUNK = 1 << 18


class FeasibilityError(ValueError):
    """Requested size is too large for the exact oracle."""


class ConditioningError(ValueError):
    """The conditioning event has zero probability."""


@dataclass(frozen=True)
class ConditioningSpec:
    """Condition the sum of N i.i.d. integer variables to equal m."""

    N: int
    m: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError(f"need at least one summand, got N={self.N}")


def _displacement_bucket_counts(m: int, n: int) -> np.ndarray:
    """Number of address sequences per total displacement, exactly.

    Entry [d] counts the hash sequences of length m and size n with total
    displacement d; the entries sum to m**n.
    """
    if n > m:
        raise ValueError(f"need n <= m, got n={n}, m={m}")
    multisets = math.comb(m + n - 1, n)
    if multisets > MAX_MULTISETS:
        raise FeasibilityError(
            f"({m}, {n}) needs {multisets} multisets; too large for exact oracle"
        )
    max_d = n * (n - 1) // 2
    buckets = np.zeros(max_d + 1, dtype=np.float64)
    if n == 0:
        buckets[0] = 1.0
        return buckets
    fact = np.array([math.factorial(k) for k in range(n + 1)], dtype=np.float64)
    combos = itertools.combinations_with_replacement(range(m), n)
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            break
        addr = np.asarray(chunk, dtype=np.int64)
        rows = addr.shape[0]
        flat = addr + m * np.arange(rows, dtype=np.int64)[:, None]
        counts = np.bincount(flat.ravel(), minlength=rows * m).reshape(rows, m)
        totals = totals_from_counts(counts)
        # n! / prod(c_j!): factorials up to 12! are exact in float64, and so
        # are their products and the division, because every intermediate
        # value is an integer below 2**53.
        weights = fact[n] / np.prod(fact[counts], axis=1)
        buckets += np.bincount(totals, weights=weights, minlength=max_d + 1)
    total = math.fsum(buckets.tolist())
    expected = float(m) ** n
    if m**n < 2**53:
        if total != expected:
            raise AssertionError(
                f"enumeration mass {total} != {m}^{n}; counting bug"
            )
    elif abs(total - expected) > 1e-9 * expected:
        raise AssertionError("enumeration mass drifted beyond float tolerance")
    return buckets


def exact_displacement_pmf(m: int, n: int) -> Pmf:
    """Exact law of the total displacement of n uniform balls in m urns."""
    buckets = _displacement_bucket_counts(m, n)
    denom = float(m) ** n
    support = np.flatnonzero(buckets).astype(np.int64)
    probs = buckets[support] / denom
    return Pmf(support=support, probs=probs, truncation_mass=0.0)


def exact_displacement_fractions(m: int, n: int) -> dict[int, Fraction]:
    """Same law as ``exact_displacement_pmf`` but with exact rationals."""
    buckets = _displacement_bucket_counts(m, n)
    denom = m**n
    return {
        int(d): Fraction(int(buckets[d]), denom)
        for d in np.flatnonzero(buckets)
    }


@lru_cache(maxsize=32)
def displacement_law(l: int) -> Pmf:
    """Cached law of d_{l, l-1}: l-1 uniform balls in l urns."""
    if l < 1:
        raise ValueError(f"block size must be >= 1, got {l}")
    if l > DISPLACEMENT_ENUM_CAP:
        raise FeasibilityError(
            f"block size {l} beyond enumeration cap {DISPLACEMENT_ENUM_CAP}"
        )
    return exact_displacement_pmf(l, l - 1)


def _clip_edges_1d(arr: np.ndarray, lo: int, clip_tol: float) -> tuple[np.ndarray, int, float]:
    """Drop leading/trailing entries with cumulative mass below clip_tol."""
    left = np.cumsum(arr)
    i0 = int(np.searchsorted(left, clip_tol))
    right = np.cumsum(arr[::-1])
    i1 = len(arr) - int(np.searchsorted(right, clip_tol))
    if i0 >= i1:  # degenerate: keep the peak cell
        peak = int(np.argmax(arr))
        i0, i1 = peak, peak + 1
    dropped = float(left[i0 - 1] if i0 > 0 else 0.0)
    dropped += float(right[len(arr) - i1 - 1] if i1 < len(arr) else 0.0)
    return arr[i0:i1], lo + i0, dropped


def exact_sum_pmf(
    x_law: Pmf,
    N: int,
    value_range: tuple[int, int] | None = None,
    *,
    clip_tol: float = 1e-17,
) -> Pmf:
    """Law of the sum of N i.i.d. copies of an integer law, by iterated DP.

    Mass falling outside ``value_range`` (when given) or below the per-step
    edge clip is dropped and shows up in the result's ``truncation_mass``.
    """
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    support = np.asarray(x_law.support)
    if not np.issubdtype(support.dtype, np.integer):
        ints = np.round(support).astype(np.int64)
        if np.any(np.abs(support - ints) > 0):
            raise ValueError("exact_sum_pmf needs an integer-lattice law")
        support = ints
    lo = int(support[0])
    span = int(support[-1]) - lo
    kernel = np.zeros(span + 1, dtype=float)
    kernel[support - lo] = x_law.probs
    cur = kernel.copy()
    cur_lo = lo
    for _ in range(N - 1):
        cur = np.convolve(cur, kernel)
        cur_lo += lo
        cur, cur_lo, _ = _clip_edges_1d(cur, cur_lo, clip_tol)
        if value_range is not None:
            cur, cur_lo = _window_1d(cur, cur_lo, value_range)
    if value_range is not None:
        cur, cur_lo = _window_1d(cur, cur_lo, value_range)
    vals = np.arange(cur_lo, cur_lo + len(cur), dtype=np.int64)
    keep = cur > 0.0
    vals, cur = vals[keep], cur[keep]
    trunc = max(0.0, 1.0 - math.fsum(cur.tolist()))
    return Pmf(support=vals, probs=cur, truncation_mass=trunc)


def _window_1d(arr: np.ndarray, lo: int, value_range: tuple[int, int]) -> tuple[np.ndarray, int]:
    vlo, vhi = value_range
    i0 = max(0, vlo - lo)
    i1 = min(len(arr), vhi - lo + 1)
    if i0 >= i1:
        return np.zeros(1, dtype=float), lo + i0
    return arr[i0:i1], lo + i0


def _conditional_atoms(model: "ModelSpec", cond: ConditioningSpec):
    """Joint atoms (x, y, p) reachable under the conditioning event."""
    xs = model.x_law.support.astype(np.int64)
    ps = model.x_law.probs
    x_min = int(xs.min())
    x_cap = cond.m - (cond.N - 1) * x_min  # larger x can never reach S = m
    atoms = []
    for x, px in zip(xs.tolist(), ps.tolist()):
        if x > x_cap or px == 0.0:
            continue
        ytab = model.y_given_x(x)
        ys = np.asarray(ytab.support)
        if not np.issubdtype(ys.dtype, np.integer):
            ints = np.round(ys).astype(np.int64)
            if np.any(np.abs(ys - ints) > 0):
                raise ValueError("conditional DP needs integer-lattice Y")
            ys = ints
        for y, py in zip(ys.tolist(), ytab.probs.tolist()):
            if py > 0.0:
                atoms.append((int(x), int(y), px * py))
    if not atoms:
        raise ConditioningError(f"P(S={cond.m}) = 0: no reachable atoms")
    return atoms


def exact_conditional_law(
    model: "ModelSpec",
    cond: ConditioningSpec,
    *,
    clip_tol: float = 1e-18,
    return_event_prob: bool = False,
):
    """Exact law of T_N = sum(Y_i) given S_N = sum(X_i) = m.

    Dense DP over (summand count, partial S, partial T) with reachability
    windows and edge clipping; the clipped mass, divided by P(S = m), bounds
    the distance to the untruncated conditional law and is recorded in
    ``truncation_mass``.
    """
    N, m = cond.N, cond.m
    atoms = _conditional_atoms(model, cond)
    x_min = min(a[0] for a in atoms)
    x_max = max(a[0] for a in atoms)
    y_min = min(a[1] for a in atoms)
    y_max = max(a[1] for a in atoms)

    def s_bounds(i: int) -> tuple[int, int]:
        # S_i must stay reachable from both ends of the chain
        lo = max(i * x_min, m - (N - i) * x_max)
        hi = min(i * x_max, m - (N - i) * x_min)
        return lo, hi

    s_lo, s_hi = s_bounds(1)
    t_lo, t_hi = y_min, y_max
    grid = np.zeros((s_hi - s_lo + 1, t_hi - t_lo + 1), dtype=float)
    for x, y, p in atoms:
        if s_lo <= x <= s_hi:
            grid[x - s_lo, y - t_lo] += p
    clipped = 0.0
    for i in range(2, N + 1):
        new_s_lo, new_s_hi = s_bounds(i)
        new_t_lo, new_t_hi = t_lo + y_min, t_hi + y_max
        new = np.zeros((new_s_hi - new_s_lo + 1, new_t_hi - new_t_lo + 1), dtype=float)
        for x, y, p in atoms:
            src_s0 = max(s_lo, new_s_lo - x)
            src_s1 = min(s_hi, new_s_hi - x)
            if src_s0 > src_s1:
                continue
            rs = slice(src_s0 - s_lo, src_s1 - s_lo + 1)
            rd = slice(src_s0 + x - new_s_lo, src_s1 + x - new_s_lo + 1)
            cs = slice(0, t_hi - t_lo + 1)
            cdst = slice(t_lo + y - new_t_lo, t_hi + y - new_t_lo + 1)
            new[rd, cdst] += p * grid[rs, cs]
        # clip empty edges in both axes, tracking the dropped mass
        row_mass = new.sum(axis=1)
        rows, new_s_lo, d1 = _clip_edges_2d(new, row_mass, new_s_lo, clip_tol, axis=0)
        col_mass = rows.sum(axis=0)
        grid, new_t_lo, d2 = _clip_edges_2d(rows, col_mass, new_t_lo, clip_tol, axis=1)
        clipped += d1 + d2
        s_lo, s_hi = new_s_lo, new_s_lo + grid.shape[0] - 1
        t_lo, t_hi = new_t_lo, new_t_lo + grid.shape[1] - 1
    if not s_lo <= m <= s_hi:
        raise ConditioningError(f"P(S={m}) = 0 under the model")
    row = grid[m - s_lo, :]
    p_event = math.fsum(row.tolist())
    if p_event <= 0.0 or p_event <= 10.0 * clipped:
        raise ConditioningError(f"P(S={m}) = 0 under the model")
    vals = np.arange(t_lo, t_lo + len(row), dtype=np.int64)
    keep = row > 0.0
    law = Pmf(
        support=vals[keep],
        probs=row[keep] / p_event,
        truncation_mass=clipped / p_event,
    )
    if return_event_prob:
        return law, p_event
    return law


def _clip_edges_2d(arr, margin, lo, clip_tol, axis):
    left = np.cumsum(margin)
    i0 = int(np.searchsorted(left, clip_tol))
    right = np.cumsum(margin[::-1])
    i1 = len(margin) - int(np.searchsorted(right, clip_tol))
    if i0 >= i1:
        peak = int(np.argmax(margin))
        i0, i1 = peak, peak + 1
    dropped = float(left[i0 - 1] if i0 > 0 else 0.0)
    dropped += float(right[len(margin) - i1 - 1] if i1 < len(margin) else 0.0)
    sl = (slice(i0, i1), slice(None)) if axis == 0 else (slice(None), slice(i0, i1))
    return arr[sl], lo + i0, dropped


def occupancy_exact_pmf(m_balls: int, n_urns: int) -> Pmf:
    """Law of the number of empty urns when m balls land uniformly in N urns.

    Inclusion-exclusion, P(E = j) = C(N,j) sum_i (-1)^i C(N-j,i) (1-(j+i)/N)^m,
    summed with compensated arithmetic; raises when cancellation could eat the
    requested accuracy.
    """
    if m_balls < 0 or n_urns < 0:
        raise ValueError("counts must be non-negative")
    if n_urns == 0:
        if m_balls > 0:
            raise ValueError("balls but no urns")
        return Pmf(support=np.array([0]), probs=np.array([1.0]))
    probs = []
    for j in range(n_urns + 1):
        terms = []
        for i in range(n_urns - j + 1):
            frac = 1.0 - (j + i) / n_urns
            if frac == 0.0 and m_balls == 0:
                base = 1.0
            else:
                base = frac**m_balls
            terms.append((-1.0) ** i * math.comb(n_urns - j, i) * base)
        inner = math.fsum(terms)
        scale = math.comb(n_urns, j)
        magnitude = scale * math.fsum(abs(t) for t in terms)
        if magnitude * 2.0**-52 > 1e-12:
            raise FeasibilityError(
                f"inclusion-exclusion for ({m_balls}, {n_urns}) loses too much precision"
            )
        probs.append(max(0.0, scale * inner))
    support = np.arange(n_urns + 1, dtype=np.int64)
    arr = np.asarray(probs)
    keep = arr > 0.0
    return Pmf(support=support[keep], probs=arr[keep], truncation_mass=0.0)
