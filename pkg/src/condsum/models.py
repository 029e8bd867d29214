"""Model factory: the (X, Y) pair laws behind each conditioned-sum example.

Every model is a ``ModelSpec``: an integer-valued X law, a conditional Y law
per X value, a flattened joint table for characteristic-function work, and
cached moments.  The factory wires the standard parametrisations:

  hashing        X ~ Borel(mu_n = n/m), Y | X=l ~ total displacement of l-1
                 balls in l urns, N = m - n
  occupancy      X ~ Poisson(lambda_n = m/N), Y = 1{X = 0}
  bose_einstein  X ~ geometric on {0,1,...}, Y = 1{X = k}
  branching      X ~ offspring law with mean 1, Y = 1{X = k}, N = n, m = n-1
  random_forest  X ~ Borel via the tree-parameter inversion, Y = 1{X = K}

For hashing, the conditional displacement laws are enumerable only up to
block size ``y_table_cap``; the joint table (hence the Y moments) describes
the law with X capped there, renormalised, with the capped mass recorded in
``joint_truncation``.  The X marginal itself is kept at full depth, and the
Y sampler works for every block size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import distributions as dist
from .distributions import Pmf, borel_pmf_table, geometric_pmf_table, poisson_pmf_table
from .exact import ConditioningSpec, displacement_law, DISPLACEMENT_ENUM_CAP

__all__ = [
    "Moments",
    "ModelSpec",
    "ModelConfig",
    "ConditioningSpec",
    "from_tables",
    "transform_y",
    "hashing_model",
    "occupancy_model",
    "bose_einstein_model",
    "branching_model",
    "random_forest_model",
    "build_model",
    "mu_from_tree_parameter",
    "branching_total_progeny_check",
]

DEFAULT_TABLE_TOL = 1e-14


@dataclass(frozen=True)
class Moments:
    mean_x: float
    sigma_x: float
    rho_x: float  # E|X - EX|^3
    mean_y: float
    sigma_y: float
    rho_y: float
    cov_xy: float

    @property
    def corr(self) -> float:
        if self.sigma_x == 0.0 or self.sigma_y == 0.0:
            return 0.0
        return self.cov_xy / (self.sigma_x * self.sigma_y)

    @property
    def tau_sq(self) -> float:
        return self.sigma_y**2 * (1.0 - self.corr**2)

    @property
    def tau(self) -> float:
        return math.sqrt(max(0.0, self.tau_sq))


@dataclass(frozen=True)
class ModelSpec:
    """A pair law (X integer-valued, Y lattice or real) with cached moments."""

    label: str
    x_law: Pmf
    y_given_x: Callable[[int], Pmf]
    joint_x: np.ndarray
    joint_y: np.ndarray
    joint_p: np.ndarray  # renormalised to sum to 1
    joint_truncation: float
    moments: Moments
    y_sampler: Callable[[int, np.random.Generator, int], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def sample_y(self, x_value: int, gen: np.random.Generator, size: int) -> np.ndarray:
        """Draw Y | X = x_value, via the table when available."""
        try:
            tab = self.y_given_x(int(x_value))
        except (KeyError, ValueError):
            tab = None
        if tab is not None:
            cdf = np.cumsum(tab.probs)
            cdf[-1] = 1.0
            idx = np.searchsorted(cdf, gen.random(size=size), side="right")
            return tab.support[idx]
        if self.y_sampler is None:
            raise ValueError(
                f"no conditional law or sampler for X={x_value} in model {self.label}"
            )
        return self.y_sampler(int(x_value), gen, size)


def _moments_from_joint(x_law: Pmf, jx, jy, jp) -> Moments:
    mean_x = x_law.mean()
    sigma_x = x_law.std()
    rho_x = x_law.abs_central_moment(3)
    mean_y = float(np.dot(jy, jp))
    var_y = float(np.dot((jy - mean_y) ** 2, jp))
    rho_y = float(np.dot(np.abs(jy - mean_y) ** 3, jp))
    cov = float(np.dot((jx - mean_x) * (jy - mean_y), jp))
    return Moments(
        mean_x=mean_x,
        sigma_x=sigma_x,
        rho_x=rho_x,
        mean_y=mean_y,
        sigma_y=math.sqrt(max(0.0, var_y)),
        rho_y=rho_y,
        cov_xy=cov,
    )


def from_tables(
    label: str,
    x_law: Pmf,
    y_given_x: Callable[[int], Pmf],
    *,
    y_sampler=None,
    x_cap: int | None = None,
    params: dict | None = None,
) -> ModelSpec:
    """Assemble a ModelSpec from an X table and conditional Y tables.

    ``x_cap`` limits the joint table to X <= x_cap (needed when conditional
    laws are enumerable only up to a point); the skipped mass is recorded in
    ``joint_truncation`` and the joint table is renormalised.
    """
    jx, jy, jp = [], [], []
    skipped = x_law.truncation_mass
    for x, px in zip(x_law.support.tolist(), x_law.probs.tolist()):
        if x_cap is not None and x > x_cap:
            skipped += px
            continue
        ytab = y_given_x(int(x))
        for y, py in zip(ytab.support.tolist(), ytab.probs.tolist()):
            jx.append(float(x))
            jy.append(float(y))
            jp.append(px * py)
        skipped += px * ytab.truncation_mass
    jx = np.asarray(jx)
    jy = np.asarray(jy)
    jp = np.asarray(jp)
    jp = jp / jp.sum()
    return ModelSpec(
        label=label,
        x_law=x_law,
        y_given_x=y_given_x,
        joint_x=jx,
        joint_y=jy,
        joint_p=jp,
        joint_truncation=skipped,
        moments=_moments_from_joint(x_law, jx, jy, jp),
        y_sampler=y_sampler,
        params=dict(params or {}),
    )


def transform_y(model: ModelSpec, fn: Callable[[float, float], float], suffix: str) -> ModelSpec:
    """Replace Y by fn(x, y) atom-wise, rebuilding tables and moments."""
    tables: dict[int, Pmf] = {}
    for x in model.x_law.support.tolist():
        try:
            tab = model.y_given_x(int(x))
        except (KeyError, ValueError):
            continue
        new_vals = np.asarray([fn(float(x), float(y)) for y in tab.support])
        order = np.argsort(new_vals)
        vals, probs = new_vals[order], tab.probs[order]
        # merge equal atoms produced by the transform
        uniq, inv = np.unique(vals, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inv, probs)
        tables[int(x)] = Pmf(support=uniq, probs=merged, truncation_mass=tab.truncation_mass)

    def lookup(x: int) -> Pmf:
        return tables[int(x)]

    jy = np.asarray([fn(x, y) for x, y in zip(model.joint_x, model.joint_y)])
    spec = ModelSpec(
        label=model.label + suffix,
        x_law=model.x_law,
        y_given_x=lookup,
        joint_x=model.joint_x,
        joint_y=jy,
        joint_p=model.joint_p,
        joint_truncation=model.joint_truncation,
        moments=_moments_from_joint(model.x_law, model.joint_x, jy, model.joint_p),
        y_sampler=None,
        params=dict(model.params),
    )
    return spec


def _point_mass(value) -> Pmf:
    return Pmf(support=np.asarray([value]), probs=np.asarray([1.0]))


def _indicator_tables(indicator_value: int) -> Callable[[int], Pmf]:
    def lookup(x: int) -> Pmf:
        return _point_mass(1 if x == indicator_value else 0)

    return lookup


def hashing_model(
    n: int | None = None,
    m: int | None = None,
    mu: float | None = None,
    N: int | None = None,
    *,
    table_tol: float = DEFAULT_TABLE_TOL,
    y_table_cap: int = DISPLACEMENT_ENUM_CAP,
) -> tuple[ModelSpec, ConditioningSpec]:
    """Hashing with linear probing: n balls in m circular urns.

    Accepts (n, m) directly, or (mu, N) with n, m back-solved so that
    mu = n/m and N = m - n.  The scheme makes m = N * E[X] exact.
    """
    if n is not None and m is not None:
        if not 0 < n < m:
            raise ValueError(f"need 0 < n < m, got n={n}, m={m}")
        N = m - n
        mu = n / m
    elif mu is not None and N is not None:
        if not 0.0 < mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {mu}")
        m = round(N / (1.0 - mu))
        n = m - N
        mu = n / m  # realisable load factor closest to the request
    else:
        raise ValueError("hashing model needs (n, m) or (mu, N)")
    x_law = borel_pmf_table(mu, tol=table_tol)

    def y_sampler(l: int, gen: np.random.Generator, size: int) -> np.ndarray:
        return dist.displacement_sample(l, gen, size=size)

    spec = from_tables(
        f"hashing(mu={mu:g})",
        x_law,
        displacement_law,
        y_sampler=y_sampler,
        x_cap=y_table_cap,
        params={"mu": mu, "n": n, "m": m, "N": N, "y_table_cap": y_table_cap},
    )
    return spec, ConditioningSpec(N=N, m=m)


def occupancy_model(
    m: int,
    N: int,
    *,
    lam: float | None = None,
    table_tol: float = DEFAULT_TABLE_TOL,
) -> tuple[ModelSpec, ConditioningSpec]:
    """m balls in N urns; Y flags an empty urn.  lam defaults to m/N."""
    if lam is None:
        lam = m / N
    x_law = poisson_pmf_table(lam, tol=table_tol)
    spec = from_tables(
        f"occupancy(lambda={lam:g})",
        x_law,
        _indicator_tables(0),
        params={"lambda": lam, "m": m, "N": N},
    )
    return spec, ConditioningSpec(N=N, m=m)


def bose_einstein_model(
    n_balls: int,
    N: int,
    *,
    indicator: int = 0,
    p: float | None = None,
    table_tol: float = DEFAULT_TABLE_TOL,
) -> tuple[ModelSpec, ConditioningSpec]:
    """n indistinguishable balls in N urns, every arrangement equally likely.

    Urn counts live on {0, 1, ...}, so the conditioning value is the ball
    count itself (m = n).  The default parameter p = N/(n+N) makes
    N * E[X] = n exact; any p in (0, 1) yields the same conditional law.
    """
    if p is None:
        p = N / (n_balls + N)
    x_law = geometric_pmf_table(p, tol=table_tol)
    spec = from_tables(
        f"bose_einstein(p={p:g})",
        x_law,
        _indicator_tables(indicator),
        params={"p": p, "n": n_balls, "N": N, "indicator": indicator},
    )
    return spec, ConditioningSpec(N=N, m=n_balls)


def branching_model(
    n: int,
    *,
    offspring: Pmf | str = "poisson",
    indicator: int = 3,
    table_tol: float = DEFAULT_TABLE_TOL,
) -> tuple[ModelSpec, ConditioningSpec]:
    """Critical branching process with total progeny n.

    Conditioning on the total progeny is equivalent (up to order) to
    conditioning the n offspring counts on summing to n - 1.  Y defaults to
    the indicator of a family with three children.
    """
    if isinstance(offspring, str):
        if offspring != "poisson":
            raise ValueError(f"unknown offspring law {offspring!r}")
        x_law = poisson_pmf_table(1.0, tol=table_tol)
    else:
        x_law = offspring
        mean = x_law.mean()
        if abs(mean - 1.0) > 1e-9:
            raise ValueError(f"offspring law must have mean 1, got {mean}")
    spec = from_tables(
        "branching(poisson)" if isinstance(offspring, str) else "branching(custom)",
        x_law,
        _indicator_tables(indicator),
        params={"n": n, "indicator": indicator},
    )
    return spec, ConditioningSpec(N=n, m=n - 1)


def mu_from_tree_parameter(lam: float, tol: float = 1e-12) -> float:
    """Invert lam = mu * exp(-mu) on (0, 1) by bisection."""
    if not 0.0 < lam < math.exp(-1.0):
        raise ValueError(
            f"tree parameter must lie in (0, exp(-1)); got {lam}"
        )
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid * math.exp(-mid) < lam:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_forest_model(
    m: int | None = None,
    N: int | None = None,
    *,
    lam: float | None = None,
    size_of_interest: int = 1,
    table_tol: float = DEFAULT_TABLE_TOL,
) -> tuple[ModelSpec, ConditioningSpec]:
    """Uniform rooted labeled forest with m vertices and N trees.

    Tree sizes are i.i.d. Borel conditioned to sum to m; Y flags trees of a
    given size.  With (m, N) the load mu = 1 - N/m makes N * E[X] = m exact;
    alternatively lam (the tree-function parameter) fixes mu by inversion.
    """
    if lam is not None:
        mu = mu_from_tree_parameter(lam)
        if m is None or N is None:
            raise ValueError("random forest with lam still needs (m, N)")
    elif m is not None and N is not None:
        if not 0 < N < m:
            raise ValueError(f"need 0 < N < m, got N={N}, m={m}")
        mu = 1.0 - N / m
    else:
        raise ValueError("random forest needs (m, N), optionally lam")
    x_law = borel_pmf_table(mu, tol=table_tol)
    spec = from_tables(
        f"random_forest(mu={mu:g})",
        x_law,
        _indicator_tables(size_of_interest),
        params={"mu": mu, "m": m, "N": N, "K": size_of_interest},
    )
    return spec, ConditioningSpec(N=N, m=m)


@dataclass(frozen=True)
class ModelConfig:
    """JSON-friendly model description: {kind, params{}, N, m}."""

    kind: str
    params: dict = field(default_factory=dict)
    N: int | None = None
    m: int | None = None


def build_model(config: ModelConfig | dict) -> tuple[ModelSpec, ConditioningSpec]:
    """Build (ModelSpec, ConditioningSpec) from a config object or dict."""
    if isinstance(config, dict):
        config = ModelConfig(
            kind=config["kind"],
            params=dict(config.get("params", {})),
            N=config.get("N"),
            m=config.get("m"),
        )
    kind = config.kind
    p = config.params
    if kind == "hashing":
        return hashing_model(
            n=p.get("n"),
            m=p.get("m", config.m),
            mu=p.get("mu"),
            N=p.get("N", config.N),
        )
    if kind == "occupancy":
        m = p.get("m", config.m)
        N = p.get("N", config.N)
        return occupancy_model(m, N, lam=p.get("lambda"))
    if kind == "bose_einstein":
        return bose_einstein_model(
            p.get("n", config.m),
            p.get("N", config.N),
            indicator=p.get("indicator", 0),
            p=p.get("p"),
        )
    if kind == "branching":
        return branching_model(
            p.get("n", config.N),
            indicator=p.get("indicator", 3),
        )
    if kind == "random_forest":
        return random_forest_model(
            m=p.get("m", config.m),
            N=p.get("N", config.N),
            lam=p.get("lambda"),
            size_of_interest=p.get("K", 1),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def branching_total_progeny_check(
    offspring_law: Pmf,
    n: int,
    rng,
    samples: int = 100_000,
) -> dict:
    """Consistency of the ballot-style event with direct branching simulation.

    Estimates, over i.i.d. offspring vectors (X_1, ..., X_n), the probability
    of {S_k >= k for k < n, S_n = n - 1}, and compares it with the total
    progeny of a simulated branching process hitting n exactly.
    """
    if n > 12:
        raise ValueError("keep n <= 12 for this diagnostic")
    gen = dist._as_generator(rng)
    cdf = np.cumsum(offspring_law.probs)
    cdf[-1] = 1.0
    support = offspring_law.support

    draws = support[np.searchsorted(cdf, gen.random(size=(samples, n)), side="right")]
    partial = np.cumsum(draws, axis=1)
    ge = np.ones(samples, dtype=bool)
    for k in range(1, n):
        ge &= partial[:, k - 1] >= k
    event = ge & (partial[:, n - 1] == n - 1)
    p_event = event.mean()

    hits = 0
    for _ in range(samples):
        alive, total = 1, 1
        while alive > 0 and total <= n:
            children = int(
                support[np.searchsorted(cdf, gen.random(), side="right")]
            )
            alive += children - 1
            total += children
        if alive == 0 and total == n:
            hits += 1
    p_progeny = hits / samples

    se = math.sqrt(max(p_event * (1 - p_event), p_progeny * (1 - p_progeny)) / samples)
    return {
        "n": n,
        "p_event": float(p_event),
        "p_progeny": float(p_progeny),
        "gap": float(abs(p_event - p_progeny)),
        "se": float(se),
    }
