"""Pmf tables with explicit truncation bookkeeping, and exact samplers.

All infinite-support laws are materialised as finite tables whose missing
mass is bounded analytically and recorded in ``Pmf.truncation_mass``:
Borel via the tail exponent kappa = mu - log(mu) - 1, Poisson via a
Chernoff bound, geometric exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .probing import totals_from_counts

__all__ = [
    "Pmf",
    "RngStream",
    "borel_pmf",
    "borel_log_pmf",
    "borel_tail_bound",
    "borel_pmf_table",
    "poisson_pmf",
    "poisson_pmf_table",
    "geometric_pmf",
    "geometric_pmf_table",
    "standard_pmf",
    "borel_sample",
    "displacement_sample",
]


@dataclass
class Pmf:
    """Finite-support probability table.

    ``truncation_mass`` is an upper bound on the probability mass outside the
    listed support; a full law satisfies sum(probs) + truncation_mass = 1 up
    to rounding, a sub-probability table just satisfies sum(probs) <= 1.
    """

    support: np.ndarray
    probs: np.ndarray
    truncation_mass: float = 0.0

    def __post_init__(self) -> None:
        self.support = np.asarray(self.support)
        self.probs = np.asarray(self.probs, dtype=float)
        if self.support.shape != self.probs.shape or self.support.ndim != 1:
            raise ValueError("support and probs must be 1-d arrays of equal length")
        if np.any(np.diff(self.support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(self.probs < 0):
            raise ValueError("negative probability entry")
        if self.truncation_mass < 0:
            raise ValueError("negative truncation_mass")

    def total_mass(self) -> float:
        return math.fsum(self.probs.tolist())

    def is_full(self, atol: float = 1e-12) -> bool:
        return abs(self.total_mass() + self.truncation_mass - 1.0) <= atol

    def at(self, value) -> float:
        idx = np.searchsorted(self.support, value)
        if idx < len(self.support) and self.support[idx] == value:
            return float(self.probs[idx])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def var(self) -> float:
        mu = self.mean()
        return float(np.dot((self.support - mu) ** 2, self.probs))

    def std(self) -> float:
        return math.sqrt(self.var())

    def abs_central_moment(self, order: int) -> float:
        mu = self.mean()
        return float(np.dot(np.abs(self.support - mu) ** order, self.probs))

    def tail_ge(self, value) -> float:
        """P(X >= value) over the listed support (excludes truncated mass)."""
        idx = np.searchsorted(self.support, value, side="left")
        return math.fsum(self.probs[idx:].tolist())

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self) -> str:
        lines = ["value,prob"]
        for v, p in zip(self.support, self.probs):
            vtxt = str(int(v)) if float(v).is_integer() else format(float(v), ".17g")
            lines.append(f"{vtxt},{format(float(p), '.17g')}")
        lines.append(f"# truncation_mass={format(float(self.truncation_mass), '.17g')}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path) -> "Pmf":
        values, probs, trunc = [], [], 0.0
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "value,prob":
                raise ValueError(f"unexpected header {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line.lstrip("# ").partition("=")
                    if key.strip() == "truncation_mass":
                        trunc = float(val)
                    continue
                v, _, p = line.partition(",")
                values.append(float(v))
                probs.append(float(p))
        support = np.asarray(values)
        if np.allclose(support, np.round(support)):
            support = np.round(support).astype(np.int64)
        return cls(support=support, probs=np.asarray(probs), truncation_mass=trunc)


_SUBSTREAM_STRIDE = 1 << 32


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream: Philox keyed by (master_seed, stream_index).

    Identical (master_seed, stream_index) pairs reproduce identical draws on
    any platform.  ``chunk_stream`` derives per-chunk substreams by packing the
    chunk number into the low 32 bits of the stream index.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.master_seed % (1 << 64), self.stream_index % (1 << 64)],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index + index)

    def chunk_stream(self, chunk: int) -> "RngStream":
        if chunk >= _SUBSTREAM_STRIDE:
            raise ValueError("chunk index too large")
        return RngStream(self.master_seed, self.stream_index * _SUBSTREAM_STRIDE + chunk)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def _check_mu(mu: float) -> None:
    if not 0.0 < mu < 1.0:
        raise ValueError(f"Borel parameter must lie in (0, 1), got {mu}")


def borel_log_pmf(mu: float, l) -> np.ndarray:
    """log P(X = l) for the Borel law, P(l) = exp(-mu*l) (mu*l)^(l-1) / l!."""
    _check_mu(mu)
    larr = np.asarray(l, dtype=np.int64)
    if np.any(larr < 1):
        raise ValueError("Borel support starts at 1")
    lf = larr.astype(float)
    out = -mu * lf + (lf - 1.0) * np.log(mu * lf) - gammaln(lf + 1.0)
    return out if np.ndim(l) else float(out)


def borel_pmf(mu: float, l) -> np.ndarray:
    return np.exp(borel_log_pmf(mu, l))


def borel_tail_bound(mu: float, l: int) -> float:
    """Analytic upper bound on P(X >= l), valid for every l >= 1.

    Stirling's lower bound l! >= sqrt(2 pi l) (l/e)^l gives
    P(X = j) <= exp(-kappa j) / (mu j sqrt(2 pi j)) with
    kappa = mu - log(mu) - 1, and the geometric series in exp(-kappa) caps
    the tail.
    """
    _check_mu(mu)
    if l < 1:
        return 1.0
    kappa = mu - math.log(mu) - 1.0
    log_first = -kappa * l - math.log(mu * l * math.sqrt(2.0 * math.pi * l))
    return math.exp(log_first) / (1.0 - math.exp(-kappa))


def borel_pmf_table(mu: float, tol: float = 1e-12) -> Pmf:
    """Borel pmf truncated where the analytic tail bound drops below tol."""
    _check_mu(mu)
    last = 2
    while borel_tail_bound(mu, last + 1) > tol:
        last += 1 + last // 8
    # trim back to the tight truncation point
    while last > 2 and borel_tail_bound(mu, last) <= tol:
        last -= 1
    last += 1
    support = np.arange(1, last + 1, dtype=np.int64)
    probs = borel_pmf(mu, support)
    trunc = max(0.0, 1.0 - math.fsum(probs.tolist()))
    return Pmf(support=support, probs=probs, truncation_mass=trunc)


def poisson_pmf(lam: float, k) -> np.ndarray:
    if lam <= 0:
        raise ValueError(f"Poisson rate must be positive, got {lam}")
    karr = np.asarray(k, dtype=np.int64)
    if np.any(karr < 0):
        raise ValueError("Poisson support starts at 0")
    kf = karr.astype(float)
    out = np.exp(-lam + kf * math.log(lam) - gammaln(kf + 1.0))
    return out if np.ndim(k) else float(out)


def poisson_pmf_table(lam: float, tol: float = 1e-12) -> Pmf:
    if lam <= 0:
        raise ValueError(f"Poisson rate must be positive, got {lam}")
    k = max(3, int(math.ceil(lam)) + 1)
    # Chernoff: P(X >= k) <= exp(-lam) (e lam / k)^k for k > lam
    while -lam + k * (1.0 + math.log(lam) - math.log(k)) > math.log(tol):
        k += 1
    support = np.arange(0, k + 1, dtype=np.int64)
    probs = poisson_pmf(lam, support)
    trunc = max(0.0, 1.0 - math.fsum(probs.tolist()))
    return Pmf(support=support, probs=probs, truncation_mass=trunc)


def geometric_pmf(p: float, k) -> np.ndarray:
    """P(X = k) = p (1-p)^k on k = 0, 1, 2, ..."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"geometric parameter must lie in (0, 1), got {p}")
    karr = np.asarray(k, dtype=np.int64)
    if np.any(karr < 0):
        raise ValueError("geometric support starts at 0")
    out = p * np.power(1.0 - p, karr.astype(float))
    return out if np.ndim(k) else float(out)


def geometric_pmf_table(p: float, tol: float = 1e-12) -> Pmf:
    if not 0.0 < p < 1.0:
        raise ValueError(f"geometric parameter must lie in (0, 1), got {p}")
    # exact tail: P(X > K) = (1-p)^(K+1)
    last = max(1, int(math.ceil(math.log(tol) / math.log1p(-p))) - 1)
    while (1.0 - p) ** (last + 1) > tol:
        last += 1
    support = np.arange(0, last + 1, dtype=np.int64)
    probs = geometric_pmf(p, support)
    trunc = max(0.0, 1.0 - math.fsum(probs.tolist()))
    return Pmf(support=support, probs=probs, truncation_mass=trunc)


def standard_pmf(kind: str, param: float, k) -> np.ndarray:
    """Pmf of a named standard law; kind is 'poisson' or 'geometric'."""
    if kind == "poisson":
        return poisson_pmf(param, k)
    if kind == "geometric":
        return geometric_pmf(param, k)
    raise ValueError(f"unknown law kind {kind!r}")


@lru_cache(maxsize=64)
def _borel_sampling_cdf(mu: float, tol: float) -> tuple[np.ndarray, np.ndarray]:
    table = borel_pmf_table(mu, tol=tol)
    probs = table.probs.copy()
    probs[-1] += table.truncation_mass  # fold the residual into the last atom
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return table.support, cdf


def borel_sample(mu: float, rng, size=None, tol: float = 1e-12):
    """Inversion sampling of the Borel law on its tail-bounded truncation."""
    support, cdf = _borel_sampling_cdf(mu, tol)
    gen = _as_generator(rng)
    u = gen.random(size=size)
    idx = np.searchsorted(cdf, u, side="right")
    out = support[idx]
    return out if size is not None else int(out)


def displacement_sample(l: int, rng, size=None):
    """Exact draw of the total displacement of l-1 uniform balls in l urns."""
    if l < 1:
        raise ValueError(f"block size must be >= 1, got {l}")
    gen = _as_generator(rng)
    rows = 1 if size is None else int(size)
    if l == 1:
        totals = np.zeros(rows, dtype=np.int64)
    else:
        addresses = gen.integers(0, l, size=(rows, l - 1))
        counts = np.zeros((rows, l), dtype=np.int64)
        flat = addresses + l * np.arange(rows)[:, None]
        counts = np.bincount(flat.ravel(), minlength=rows * l).reshape(rows, l)
        totals = totals_from_counts(counts)
    return totals if size is not None else int(totals[0])
