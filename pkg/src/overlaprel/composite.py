"""Composite statistic maps and differences between activation masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError
from .volume import GridDims, StatMap, VoxelMask, threshold_statmap

__all__ = ["DiffMap", "composite_map", "diff_masks", "composite_difference"]


@dataclass(frozen=True)
class DiffMap:
    """Voxels gained (active in ``b`` only) and lost (active in ``a`` only)."""

    dims: GridDims
    gained: VoxelMask
    lost: VoxelMask


def composite_map(maps: Sequence[StatMap], include: Sequence[int] | None = None, label: str = "composite") -> StatMap:
    """Voxel-wise mean of the maps at positions ``include`` (all maps by default)."""
    maps = list(maps)
    if include is None:
        include = range(len(maps))
    include = sorted(set(int(i) for i in include))
    if not include:
        raise ValueError("composite needs at least one included map")
    for i in include:
        if not 0 <= i < len(maps):
            raise IndexError(f"map index {i} out of range for {len(maps)} maps")
    dims = maps[include[0]].dims
    for i in include:
        if maps[i].dims != dims:
            raise DimensionMismatchError(f"map {maps[i].label!r} is {maps[i].dims}, expected {dims}")
    total = np.zeros(dims.n_voxels, dtype=np.float64)
    for i in include:
        total += maps[i].values
    return StatMap(dims, total / len(include), label)


def diff_masks(a: VoxelMask, b: VoxelMask) -> DiffMap:
    """Split the symmetric difference of two masks into gained and lost voxels."""
    if a.dims != b.dims:
        raise DimensionMismatchError(f"{a.label!r} is {a.dims} but {b.label!r} is {b.dims}")
    gained = (b - a).with_label(f"{b.label or 'b'}.gained")
    lost = (a - b).with_label(f"{a.label or 'a'}.lost")
    return DiffMap(a.dims, gained, lost)


def composite_difference(
    maps: Sequence[StatMap], exclude: Sequence[int], critical: float, side: str = "greater"
):
    """Composite of all maps vs. composite without ``exclude``, thresholded and differenced.

    Returns ``(all_map, kept_map, all_mask, kept_mask, diff)``; ``diff.gained``
    holds voxels active only once the excluded studies are dropped.
    """
    excluded = set(int(i) for i in exclude)
    keep = [i for i in range(len(maps)) if i not in excluded]
    all_map = composite_map(maps, label="composite_all")
    kept_map = composite_map(maps, keep, label="composite_kept")
    all_mask = threshold_statmap(all_map, critical, side)
    kept_mask = threshold_statmap(kept_map, critical, side)
    return all_map, kept_map, all_mask, kept_mask, diff_masks(all_mask, kept_mask)
