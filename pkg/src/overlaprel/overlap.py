"""Pairwise Dice and Jaccard overlap between activation masks."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError
from .volume import StudySet, VoxelMask

__all__ = [
    "EMPTY_POLICIES",
    "KINDS",
    "PairCounts",
    "OverlapMatrix",
    "pair_counts",
    "dice",
    "jaccard",
    "dice_to_jaccard",
    "coefficient",
    "overlap_matrix",
    "thread_count",
]

KINDS = ("dice", "jaccard")
EMPTY_POLICIES = ("error", "zero", "one")


@dataclass(frozen=True)
class PairCounts:
    """Active voxel counts of two masks and of their intersection."""

    Vj: int
    Vl: int
    Vjl: int

    def __post_init__(self):
        if min(self.Vj, self.Vl, self.Vjl) < 0:
            raise ValueError(f"counts must be nonnegative: {self}")
        if self.Vjl > min(self.Vj, self.Vl):
            raise ValueError(f"intersection exceeds a marginal count: {self}")

    @property
    def union(self) -> int:
        return self.Vj + self.Vl - self.Vjl


def pair_counts(a: VoxelMask, b: VoxelMask) -> PairCounts:
    """Count ``|a|``, ``|b|`` and ``|a & b|`` by word-wise popcount."""
    if a.dims != b.dims:
        raise DimensionMismatchError(f"{a.label!r} is {a.dims} but {b.label!r} is {b.dims}")
    return PairCounts(a.count(), b.count(), a.intersection_count(b))


def _empty_value(policy: str) -> float:
    if policy == "zero":
        return 0.0
    if policy == "one":
        return 1.0
    if policy == "error":
        raise DegenerateInputError("overlap of two empty masks is undefined")
    raise ValueError(f"unknown empty policy {policy!r}; expected one of {EMPTY_POLICIES}")


def dice(c: PairCounts, empty_policy: str = "error") -> float:
    """Dice coefficient ``2 Vjl / (Vj + Vl)``."""
    if c.Vj + c.Vl == 0:
        return _empty_value(empty_policy)
    return 2.0 * c.Vjl / (c.Vj + c.Vl)


def jaccard(c: PairCounts, empty_policy: str = "error") -> float:
    """Jaccard coefficient ``Vjl / (Vj + Vl - Vjl)``."""
    if c.union == 0:
        return _empty_value(empty_policy)
    return c.Vjl / c.union


def dice_to_jaccard(w: float) -> float:
    """Convert a Dice value to the matching Jaccard value, ``w / (2 - w)``."""
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"Dice coefficient must lie in [0, 1], got {w}")
    return w / (2.0 - w)


def coefficient(c: PairCounts, kind: str = "jaccard", empty_policy: str = "error") -> float:
    if kind == "jaccard":
        return jaccard(c, empty_policy)
    if kind == "dice":
        return dice(c, empty_policy)
    raise ValueError(f"unknown overlap kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    """Symmetric ``M x M`` matrix of pairwise overlaps with unit diagonal.

    ``counts`` (optional) keeps the raw :class:`PairCounts` keyed by ``(j, l)``
    with ``j < l`` so both kinds can be derived without re-reading masks.
    """

    kind: str
    entries: np.ndarray
    labels: tuple
    counts: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown overlap kind {self.kind!r}")
        e = np.array(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"overlap matrix must be square, got shape {e.shape}")
        if e.shape[0] < 1:
            raise ValueError("overlap matrix is empty")
        if not np.array_equal(e, e.T):
            raise ValueError("overlap matrix must be symmetric")
        if not np.all(np.diag(e) == 1.0):
            raise ValueError("overlap matrix must have a unit diagonal")
        if not np.all(np.isfinite(e)) or e.min() < 0.0 or e.max() > 1.0:
            raise ValueError("overlap entries must lie in [0, 1]")
        labels = tuple(self.labels) if self.labels else tuple(f"study{j + 1:02d}" for j in range(e.shape[0]))
        if len(labels) != e.shape[0]:
            raise ValueError("one label per row is required")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "labels", labels)

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    def submatrix(self, keep: Sequence[int]) -> "OverlapMatrix":
        """Matrix restricted to the studies at positions ``keep`` (in that order)."""
        keep = list(keep)
        e = self.entries[np.ix_(keep, keep)]
        return OverlapMatrix(self.kind, e, tuple(self.labels[k] for k in keep))

    def delete(self, *drop: int) -> "OverlapMatrix":
        """Matrix with the given study positions removed."""
        dropped = set(drop)
        return self.submatrix([k for k in range(self.M) if k not in dropped])

    def as_kind(self, kind: str, empty_policy: str = "error") -> "OverlapMatrix":
        """Recompute the matrix for another coefficient from cached counts."""
        if kind == self.kind:
            return self
        if self.counts is None:
            raise ValueError("no pair counts cached; rebuild from the masks")
        return _assemble(self.counts, self.M, kind, self.labels, empty_policy)


def thread_count() -> int:
    """Worker cap from ``OVERLAPREL_THREADS`` (default: CPU count, at most 8)."""
    raw = os.environ.get("OVERLAPREL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def _assemble(counts: dict, M: int, kind: str, labels, empty_policy: str) -> OverlapMatrix:
    e = np.eye(M)
    for (j, l), c in counts.items():
        try:
            value = coefficient(c, kind, empty_policy)
        except DegenerateInputError as exc:
            raise DegenerateInputError(f"studies {labels[j]!r} and {labels[l]!r}: {exc}") from None
        e[j, l] = e[l, j] = value
    return OverlapMatrix(kind, e, tuple(labels), counts)


def overlap_matrix(
    studies: StudySet, kind: str = "jaccard", empty_policy: str = "error", threads: int | None = None
) -> OverlapMatrix:
    """Pairwise overlap matrix of a study set.

    Parameters
    ----------
    studies : StudySet
    kind : {"jaccard", "dice"}
    empty_policy : {"error", "zero", "one"}
        What to report for a pair of two empty masks.
    threads : int, optional
        Parallel workers for the pair counts; defaults to :func:`thread_count`.
        The result does not depend on it.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown overlap kind {kind!r}; expected one of {KINDS}")
    if empty_policy not in EMPTY_POLICIES:
        raise ValueError(f"unknown empty policy {empty_policy!r}")
    masks = list(studies)
    M = len(masks)
    sizes = [m.count() for m in masks]
    pairs = list(combinations(range(M), 2))

    def count(pair):
        j, l = pair
        return pair, PairCounts(sizes[j], sizes[l], masks[j].intersection_count(masks[l]))

    workers = thread_count() if threads is None else max(1, int(threads))
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = dict(pool.map(count, pairs))
    else:
        counts = dict(map(count, pairs))
    return _assemble(counts, M, kind, studies.labels, empty_policy)
