"""Heavy-tail numerics: tail exponents, bracketing bounds, single-big-jump MC.

The block-size law has log P(X >= l) ~ -kappa l with kappa = mu - log(mu) - 1,
so the displacement tail P(Y >= u) inherits the square-root exponent
kappa*sqrt(2) through the threshold n_u ~ sqrt(2u) at which a block can reach
displacement u.  The printed closed forms for the upper and lower rates are
kept verbatim in reports (the printed alpha is negative on (0,1); the
operative upper rate is kappa*sqrt(2), flagged as the sign-corrected value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .distributions import RngStream, borel_log_pmf, borel_tail_bound
from .exact import DISPLACEMENT_ENUM_CAP, ConditioningSpec, displacement_law
from .models import ModelSpec
from .rejection import rejection_sample
from .statutil import wilson_interval

__all__ = [
    "ExponentSet",
    "exponents",
    "XTailReport",
    "x_tail_check",
    "HashBound",
    "hash_lower_bound",
    "displacement_threshold",
    "YTailReport",
    "y_tail_bracket",
    "TailMcReport",
    "tail_mc_decomposition",
]


@dataclass(frozen=True)
class ExponentSet:
    mu: float
    kappa: float  # mu - log(mu) - 1
    alpha_proof: float  # kappa * sqrt(2): the upper rate the argument yields
    alpha_paper: float  # printed closed form, negative on (0, 1)
    beta_paper: float
    alpha_paper_sign_warning: bool

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


def exponents(mu: float) -> ExponentSet:
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    kappa = mu - math.log(mu) - 1.0
    alpha_paper = (1.0 + math.log(mu) - mu) * math.sqrt(2.0)
    beta_paper = 4.0 + math.log(2.0) + 2.0 * math.log(mu) - 2.0 * mu
    return ExponentSet(
        mu=mu,
        kappa=kappa,
        alpha_proof=kappa * math.sqrt(2.0),
        alpha_paper=alpha_paper,
        beta_paper=beta_paper,
        alpha_paper_sign_warning=alpha_paper < 0.0,
    )


def borel_log_tail(mu: float, l: int) -> float:
    """log P(X >= l), exact up to a relatively negligible remainder.

    Sums the log pmf from l until the analytic tail bound is below
    exp(-120) times the partial sum.
    """
    if l < 1:
        return 0.0
    kappa = mu - math.log(mu) - 1.0
    span = int(math.ceil(140.0 / kappa)) + 10
    ls = np.arange(l, l + span, dtype=np.int64)
    return float(logsumexp(borel_log_pmf(mu, ls)))


@dataclass
class XTailReport:
    mu: float
    kappa: float
    l_grid: list
    log_tail: list  # log P(X >= l)
    exponent: list  # -log P(X >= l) / l

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)

    def rows(self):
        return zip(self.l_grid, self.log_tail, self.exponent)


def x_tail_check(mu: float, l_grid) -> XTailReport:
    """Normalised tail exponents of the block-size law along a grid."""
    grid = sorted(int(l) for l in l_grid)
    if any(l < 1 for l in grid):
        raise ValueError("grid entries must be >= 1")
    kappa = mu - math.log(mu) - 1.0
    logs = [borel_log_tail(mu, l) for l in grid]
    expo = [-lt / l for l, lt in zip(grid, logs)]
    return XTailReport(mu=mu, kappa=kappa, l_grid=grid, log_tail=logs, exponent=expo)


@dataclass(frozen=True)
class HashBound:
    """Permutation-counting lower bound on a one-block displacement tail."""

    a: float
    l: int
    k: int
    log_bound: float
    bound: float
    achieved_threshold: int  # k (l - 1 - k): the displacement the construction reaches
    stated_threshold_ok: bool  # whether that is >= the requested a
    construction_valid: bool  # k <= (l - 1) / 2, i.e. the sequence exists

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


def hash_lower_bound(a: float) -> HashBound:
    """l = 1 + ceil(sqrt(a)), k = floor(sqrt(a)), bound = (l-1)! / (2^k l^(l-1)).

    The witness sequence (1,1,2,2,...,k,k,k+1,...,l-1-k) reaches total
    displacement k(l-1-k), which for small a falls short of a itself; the
    achieved threshold is reported so callers can test the bound at the
    displacement actually constructed.
    """
    if a <= 0:
        raise ValueError("need a > 0")
    root = math.sqrt(a)
    l = 1 + math.ceil(root)
    k = math.floor(root)
    log_bound = gammaln(l) - k * math.log(2.0) - (l - 1) * math.log(l)
    achieved = k * (l - 1 - k)
    return HashBound(
        a=a,
        l=l,
        k=k,
        log_bound=float(log_bound),
        bound=float(math.exp(log_bound)),
        achieved_threshold=achieved,
        stated_threshold_ok=achieved >= a,
        construction_valid=2 * k <= l - 1,
    )


def displacement_threshold(u: float) -> int:
    """Smallest block size whose maximal displacement can reach u."""
    return math.ceil(math.sqrt(2.0 * u + 0.25) + 1.5)


def _best_single_term(mu: float, u: float, l_max: int) -> tuple[float, int, int]:
    """Best certified single-block lower bound on log P(Y >= u).

    Scans valid constructions (k <= (l-1)/2 with k(l-1-k) >= u) and returns
    max over l <= l_max of log [P(X = l) (l-1)!/(2^k l^(l-1))].
    """
    best = -math.inf
    best_l = best_k = 0
    for l in range(2, l_max + 1):
        # displacement k(l-1-k) is maximised at k = (l-1)/2
        k_lo, k_hi = 1, (l - 1) // 2
        if k_hi < k_lo:
            continue
        for k in range(k_lo, k_hi + 1):
            if k * (l - 1 - k) < u:
                continue
            val = (
                borel_log_pmf(mu, l)
                + float(gammaln(l))
                - k * math.log(2.0)
                - (l - 1) * math.log(l)
            )
            if val > best:
                best, best_l, best_k = val, l, k
            break  # larger k only shrinks 2^-k once the threshold is met
    return best, best_l, best_k


@dataclass
class YTailReport:
    """Bracketed displacement-tail probabilities along a grid of levels u.

    p_exact is the partial sum over enumerable block sizes (l <= cap); it is a
    certified lower estimate of the true tail and p_exact_err bounds the
    unaccounted remainder, so the truth lies in
    [p_exact, p_exact + p_exact_err].
    """

    mu: float
    cap: int
    kappa_sqrt2: float
    u_grid: list
    n_u: list
    log_upper: list
    log_lower: list
    p_exact: list  # None when some contributing block size exceeds the cap
    p_exact_err: list
    exp_upper: list  # -log(upper) / sqrt(u)
    exp_lower: list
    exp_exact: list

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


def y_tail_bracket(mu: float, u_grid, *, cap: int = DISPLACEMENT_ENUM_CAP) -> YTailReport:
    """Upper/lower brackets (and partial exact values) for P(Y >= u).

    Upper: P(Y >= u) <= P(X >= n_u), the exact block-size tail at the
    threshold n_u = ceil(sqrt(2u + 1/4) + 3/2).  Lower: the best certified
    single-block permutation-count bound.  Exact: sum over enumerable block
    sizes of P(X = l) P(d_{l,l-1} >= u), with the remainder beyond the cap
    bounded by the block-size tail.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    kappa = mu - math.log(mu) - 1.0
    us = [float(u) for u in u_grid]
    if any(u <= 0 for u in us):
        raise ValueError("grid entries must be positive")
    n_us, log_up, log_lo = [], [], []
    p_ex, p_err, e_up, e_lo, e_ex = [], [], [], [], []
    for u in us:
        nu = displacement_threshold(u)
        lu = borel_log_tail(mu, nu)
        search_cap = max(cap, nu + 64, int(3 * math.sqrt(u)) + 8)
        ll, _, _ = _best_single_term(mu, u, search_cap)
        n_us.append(nu)
        log_up.append(lu)
        log_lo.append(ll)
        e_up.append(-lu / math.sqrt(u))
        e_lo.append(-ll / math.sqrt(u) if math.isfinite(ll) else math.inf)
        if nu <= cap:
            partial = 0.0
            for l in range(nu, cap + 1):
                law = displacement_law(l)
                partial += math.exp(borel_log_pmf(mu, l)) * law.tail_ge(u)
            # blocks beyond the cap contribute at most the whole size tail
            err = math.exp(borel_log_tail(mu, cap + 1))
            p_ex.append(partial)
            p_err.append(err)
            e_ex.append(-math.log(partial) / math.sqrt(u) if partial > 0 else math.inf)
        else:
            p_ex.append(None)
            p_err.append(None)
            e_ex.append(None)
    return YTailReport(
        mu=mu,
        cap=cap,
        kappa_sqrt2=kappa * math.sqrt(2.0),
        u_grid=us,
        n_u=n_us,
        log_upper=log_up,
        log_lower=log_lo,
        p_exact=p_ex,
        p_exact_err=p_err,
        exp_upper=e_up,
        exp_lower=e_lo,
        exp_exact=e_ex,
    )


@dataclass
class TailMcReport:
    """Monte-Carlo conditional tail estimate with the big-jump diagnostic."""

    N: int
    m: int
    y: float
    attempts: int
    accepted: int
    exceedances: int
    p_hat: float
    p_ci: tuple[float, float]
    norm_log_p: float | None  # (1/sqrt(N)) log p_hat
    norm_log_p_ci: tuple[float, float] | None
    upper_rate: float  # -alpha_proof * sqrt(y)
    lower_rate: float  # -beta_paper * sqrt(y)
    big_jump_fraction: float | None
    big_jump_ci: tuple[float, float] | None
    conditional_mean_hat: float

    def to_json_dict(self) -> dict:
        d = dict(self.__dict__)
        for key in ("p_ci", "norm_log_p_ci", "big_jump_ci"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


def tail_mc_decomposition(
    model: ModelSpec,
    cond: ConditioningSpec,
    y: float,
    rng: RngStream,
    attempts: int = 10**7,
    *,
    threads: int = 1,
) -> TailMcReport:
    """Estimate P(T - mean_hat >= N y | S = m) and the single-big-jump share.

    The exceedance threshold is centred at the batch's own conditional-mean
    estimate.  An exceedance is attributed to a single big jump when the
    largest Y_i in the vector already reaches N y on its own.
    """
    if y <= 0:
        raise ValueError("need y > 0")
    mu = model.params.get("mu")
    if mu is None:
        raise ValueError("tail decomposition expects a hashing-style model with mu")
    exps = exponents(mu)
    # target == budget makes the sampler exhaust the whole attempt budget
    batch = rejection_sample(
        model,
        cond,
        target_accepted=attempts,
        rng=rng,
        budget=attempts,
        threads=threads,
        record_max=True,
    )
    values = batch.values.astype(float)
    accepted = len(values)
    if accepted == 0:
        raise RuntimeError("no accepted vectors; raise the attempt budget")
    mean_hat = float(values.mean())
    threshold = mean_hat + cond.N * y
    exceed = values >= threshold
    k = int(exceed.sum())
    p_hat = k / accepted
    p_ci = wilson_interval(k, accepted)
    root_n = math.sqrt(cond.N)
    if k > 0:
        norm = math.log(p_hat) / root_n
        norm_ci = (
            math.log(p_ci[0]) / root_n if p_ci[0] > 0 else -math.inf,
            math.log(p_ci[1]) / root_n,
        )
        big = batch.max_y[exceed] >= cond.N * y
        bj = int(big.sum())
        big_frac = bj / k
        big_ci = wilson_interval(bj, k)
    else:
        norm = None
        norm_ci = (-math.inf, math.log(p_ci[1]) / root_n)
        big_frac = None
        big_ci = None
    return TailMcReport(
        N=cond.N,
        m=cond.m,
        y=y,
        attempts=batch.attempts,
        accepted=accepted,
        exceedances=k,
        p_hat=p_hat,
        p_ci=p_ci,
        norm_log_p=norm,
        norm_log_p_ci=norm_ci,
        upper_rate=-exps.alpha_proof * math.sqrt(y),
        lower_rate=-exps.beta_paper * math.sqrt(y),
        big_jump_fraction=big_frac,
        big_jump_ci=big_ci,
        conditional_mean_hat=mean_hat,
    )
