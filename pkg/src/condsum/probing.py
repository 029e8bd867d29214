"""Linear probing on a circular table: per-ball displacements, totals, blocks.

Urns are numbered 1..m clockwise.  Each ball probes clockwise from its home
urn to the first empty urn; the displacement of a ball is the number of urns
it skipped.  When n < m, the empty urns split the occupied urns into blocks
of consecutive urns; by convention a block also owns the empty urn that
follows it clockwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "CapacityError",
    "HashSequence",
    "InsertTrace",
    "Block",
    "BlockDecomposition",
    "insert_trace",
    "total_displacement",
    "block_decomposition",
    "totals_from_counts",
]


class CapacityError(ValueError):
    """More balls than urns."""


@dataclass(frozen=True)
class HashSequence:
    """Home addresses (1-based) of n balls thrown into m circular urns."""

    m: int
    addresses: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"table size must be >= 1, got {self.m}")
        object.__setattr__(self, "addresses", tuple(int(h) for h in self.addresses))
        for h in self.addresses:
            if not 1 <= h <= self.m:
                raise ValueError(f"address {h} outside [1, {self.m}]")
        if len(self.addresses) > self.m:
            raise CapacityError(
                f"{len(self.addresses)} balls do not fit in {self.m} urns"
            )

    @property
    def n(self) -> int:
        return len(self.addresses)


@dataclass(frozen=True)
class InsertTrace:
    """Outcome of inserting a hash sequence: one displacement per ball."""

    displacements: tuple[int, ...]
    positions: tuple[int, ...]  # final urn of each ball, 1-based
    total: int

    @property
    def occupied(self) -> frozenset[int]:
        return frozenset(self.positions)


class Block(NamedTuple):
    length: int  # occupied run plus its trailing empty urn
    disp_sum: int  # displacements of the balls that ended up inside the run


@dataclass(frozen=True)
class BlockDecomposition:
    blocks: tuple[Block, ...]

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(b.length for b in self.blocks)

    @property
    def disp_sums(self) -> tuple[int, ...]:
        return tuple(b.disp_sum for b in self.blocks)


def insert_trace(seq: HashSequence) -> InsertTrace:
    """Insert the balls in order, probing clockwise with wraparound."""
    m = seq.m
    occupied = [False] * m  # 0-based internally
    displacements = []
    positions = []
    for h in seq.addresses:
        i = h - 1
        steps = 0
        while occupied[i]:
            i = (i + 1) % m
            steps += 1
        occupied[i] = True
        displacements.append(steps)
        positions.append(i + 1)
    return InsertTrace(
        displacements=tuple(displacements),
        positions=tuple(positions),
        total=sum(displacements),
    )


def total_displacement(seq: HashSequence) -> int:
    """Total displacement of a hash sequence (order-invariant)."""
    return insert_trace(seq).total


def block_decomposition(seq: HashSequence) -> BlockDecomposition:
    """Blocks in clockwise order, starting at the smallest empty-urn index.

    Each block is a maximal run of occupied urns together with the empty urn
    that follows it; an isolated empty urn is a block of length 1.  A ball is
    attributed to the block containing its final urn.
    """
    if seq.n >= seq.m:
        raise ValueError("block decomposition needs at least one empty urn (n < m)")
    m = seq.m
    trace = insert_trace(seq)
    occupied = [False] * (m + 1)  # 1-based
    disp_at = [0] * (m + 1)
    for pos, d in zip(trace.positions, trace.displacements):
        occupied[pos] = True
        disp_at[pos] = d
    blocks = []
    for e in range(1, m + 1):
        if occupied[e]:
            continue
        length = 1
        disp_sum = 0
        u = e - 1 if e > 1 else m
        while occupied[u]:
            length += 1
            disp_sum += disp_at[u]
            u = u - 1 if u > 1 else m
        blocks.append(Block(length, disp_sum))
    return BlockDecomposition(tuple(blocks))


def totals_from_counts(counts: np.ndarray) -> np.ndarray:
    """Total displacement from per-urn address counts, vectorised.

    ``counts`` has shape (rows, m) (or (m,)), entry [r, j] being the number of
    balls whose home urn is j+1.  Requires at least one empty urn per row.

    The total displacement equals the number of ball moves across each urn
    boundary, summed over boundaries.  Walking clockwise, the number of balls
    queued past urn j satisfies q_j = max(q_{j-1} + c_j - 1, 0); starting the
    walk just after an urn where the prefix sum of (c_i - 1) is minimal makes
    the circular recursion exact.
    """
    c = np.atleast_2d(np.asarray(counts, dtype=np.int64))
    rows, m = c.shape
    prefix = np.cumsum(c - 1, axis=1)
    start = np.argmin(prefix, axis=1)  # first global minimum per row
    cols = (start[:, None] + 1 + np.arange(m)[None, :]) % m
    rolled = np.take_along_axis(c, cols, axis=1)
    q = np.zeros(rows, dtype=np.int64)
    total = np.zeros(rows, dtype=np.int64)
    for j in range(m):
        q = np.maximum(q + rolled[:, j] - 1, 0)
        total += q
    if np.ndim(counts) == 1:
        return total[0]
    return total
