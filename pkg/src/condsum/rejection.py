"""Rejection sampler for the conditional law of T given S = m.

Draws i.i.d. (X_1, ..., X_N) vectors, keeps those summing to m, and only then
draws the Y coordinates for the kept vectors (the acceptance event does not
look at Y, so this is an unbiased sampler of the conditional law).

Work is split into fixed-size chunks; chunk c always uses the substream
derived from (master_seed, chunk c), so the output is identical for any
thread count, and merging happens in chunk order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import RngStream
from .exact import ConditioningSpec, exact_sum_pmf
from .models import ModelSpec
from .statutil import wilson_interval

__all__ = ["SampleBatch", "AcceptanceAudit", "rejection_sample", "acceptance_audit"]

DEFAULT_CHUNK_ROWS = 1 << 16
BUDGET_FACTOR = 10_000  # default attempts allowed per requested acceptance


@dataclass
class SampleBatch:
    """Accepted conditional draws plus the bookkeeping needed to audit them."""

    values: np.ndarray  # T realisations, one per accepted vector
    attempts: int
    accepted: int
    master_seed: int
    stream_index: int
    chunk_rows: int
    complete: bool  # False when the budget ran out before the target
    max_y: np.ndarray | None = None  # per-vector max Y_i, when recorded

    def __post_init__(self) -> None:
        if self.accepted != len(self.values):
            raise ValueError("accepted count out of sync with values")
        if self.accepted > self.attempts:
            raise ValueError("accepted exceeds attempts")

    def to_csv_text(self) -> str:
        lines = ["value"]
        lines += [str(int(v)) if float(v).is_integer() else format(float(v), ".17g")
                  for v in self.values]
        return "\n".join(lines) + "\n"

    def meta(self) -> dict:
        return {
            "attempts": self.attempts,
            "accepted": self.accepted,
            "master_seed": self.master_seed,
            "stream_index": self.stream_index,
            "chunk_rows": self.chunk_rows,
            "complete": self.complete,
        }


def _sample_x_chunk(model: ModelSpec, rows: int, N: int, gen) -> np.ndarray:
    cdf = np.cumsum(model.x_law.probs)
    cdf[-1] = 1.0
    u = gen.random(size=(rows, N))
    return model.x_law.support[np.searchsorted(cdf, u, side="right")]


def _sample_y_matrix(model: ModelSpec, x_matrix: np.ndarray, gen) -> np.ndarray:
    """Elementwise Y | X draw, grouped by X value for vectorised table lookups."""
    flat_x = x_matrix.ravel()
    out = np.zeros(flat_x.shape, dtype=np.int64)
    for x in np.unique(flat_x):
        mask = flat_x == x
        out[mask] = model.sample_y(int(x), gen, int(mask.sum()))
    return out.reshape(x_matrix.shape)


def _run_chunk(model, cond, stream, chunk_index, rows, record_max):
    gen = stream.chunk_stream(chunk_index).generator()
    x = _sample_x_chunk(model, rows, cond.N, gen)
    keep = x.sum(axis=1) == cond.m
    xa = x[keep]
    if xa.shape[0] == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, (empty if record_max else None)
    y = _sample_y_matrix(model, xa, gen)
    totals = y.sum(axis=1)
    return totals, (y.max(axis=1) if record_max else None)


def rejection_sample(
    model: ModelSpec,
    cond: ConditioningSpec,
    target_accepted: int,
    rng: RngStream,
    *,
    budget: int | None = None,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
    threads: int = 1,
    record_max: bool = False,
) -> SampleBatch:
    """Accepted-vector batch for T | S = m; unbiased but O(sqrt(N)) rejection.

    Stops after the first chunk boundary at which ``target_accepted`` values
    have been gathered, or once ``budget`` attempts are exhausted (the batch
    is then flagged incomplete).
    """
    if target_accepted < 1:
        raise ValueError("need target_accepted >= 1")
    if budget is None:
        budget = BUDGET_FACTOR * target_accepted
    values: list[np.ndarray] = []
    maxima: list[np.ndarray] = []
    attempts = 0
    accepted = 0
    chunk_index = 0
    done = False
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while not done and accepted < target_accepted and attempts < budget:
            # chunk c always has size min(chunk_rows, budget - c*chunk_rows),
            # so the chunk layout is independent of the thread count
            remaining = budget - attempts
            sizes = []
            for _ in range(max(1, threads)):
                take = min(chunk_rows, remaining)
                if take <= 0:
                    break
                sizes.append(take)
                remaining -= take
            args = [
                (model, cond, rng, chunk_index + k, sizes[k], record_max)
                for k in range(len(sizes))
            ]
            if pool is not None:
                results = list(pool.map(lambda a: _run_chunk(*a), args))
            else:
                results = [_run_chunk(*a) for a in args]
            # consume the wave in chunk order; once the target is reached the
            # remaining chunks are discarded so the output is the same for
            # every thread count
            for (totals, mx), rows in zip(results, sizes):
                attempts += rows
                accepted += len(totals)
                values.append(totals)
                if record_max:
                    maxima.append(mx)
                if accepted >= target_accepted:
                    done = True
                    break
            chunk_index += len(sizes)
    finally:
        if pool is not None:
            pool.shutdown()
    all_values = np.concatenate(values) if values else np.zeros(0, dtype=np.int64)
    all_max = (
        np.concatenate(maxima) if (record_max and maxima) else None
    )
    return SampleBatch(
        values=all_values,
        attempts=attempts,
        accepted=len(all_values),
        master_seed=rng.master_seed,
        stream_index=rng.stream_index,
        chunk_rows=chunk_rows,
        complete=accepted >= target_accepted,
        max_y=all_max,
    )


@dataclass
class AcceptanceAudit:
    """Acceptance rate versus the local-limit floor and Gaussian local value."""

    rate: float
    rate_ci: tuple[float, float]
    attempts: int
    accepted: int
    sigma_x: float
    N: int
    p_exact: float | None
    rate_x_2pi_sigma_sqrtN: float  # compare against the local-limit floor
    rate_x_sigma_sqrt2piN: float  # ~1 when the Gaussian local value is exact
    exact_x_sigma_sqrt2piN: float | None

    def to_json_dict(self) -> dict:
        d = dict(self.__dict__)
        d["rate_ci"] = list(self.rate_ci)
        return d


def acceptance_audit(
    batch: SampleBatch,
    model: ModelSpec,
    cond: ConditioningSpec,
    *,
    compute_exact: bool = True,
) -> AcceptanceAudit:
    if batch.attempts == 0:
        raise ValueError("empty batch")
    rate = batch.accepted / batch.attempts
    sigma_x = model.moments.sigma_x
    p_exact = None
    if compute_exact:
        law = exact_sum_pmf(model.x_law, cond.N)
        p_exact = law.at(cond.m)
    scale_floor = 2.0 * math.pi * sigma_x * math.sqrt(cond.N)
    scale_gauss = sigma_x * math.sqrt(2.0 * math.pi * cond.N)
    return AcceptanceAudit(
        rate=rate,
        rate_ci=wilson_interval(batch.accepted, batch.attempts),
        attempts=batch.attempts,
        accepted=batch.accepted,
        sigma_x=sigma_x,
        N=cond.N,
        p_exact=p_exact,
        rate_x_2pi_sigma_sqrtN=rate * scale_floor,
        rate_x_sigma_sqrt2piN=rate * scale_gauss,
        exact_x_sigma_sqrt2piN=(p_exact * scale_gauss if p_exact is not None else None),
    )
