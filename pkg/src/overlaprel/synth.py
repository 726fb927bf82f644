"""Synthetic families of activation maps and brute-force oracles.

A study set shares a random *core* of voxels.  Each ordinary study keeps
every core voxel with probability ``1 - dropout`` and adds independent
Bernoulli(``noise_rate``) activations anywhere on the grid.  Planted studies
replace the core:

``disjoint``
    a core of the same size drawn from the complement of the true core;
    noise is also restricted to that complement.
``shifted``
    the true core translated by ``nx // 2`` along x with wrap-around, a
    crude stand-in for activation in the mirrored hemisphere.
``empty``
    no active voxels.

Random numbers come from numpy's counter-based Philox bit generator seeded
with ``config.seed``; draws are made in a fixed order so the same config
always yields bit-identical masks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .overlap import PairCounts
from .volume import GridDims, StatMap, StudySet, VoxelMask

__all__ = [
    "PLANT_MODES",
    "SynthConfig",
    "make_rng",
    "generate",
    "generate_statmaps",
    "oracle_pair_counts",
    "oracle_jaccard",
]

PLANT_MODES = ("disjoint", "shifted", "empty")


@dataclass(frozen=True)
class SynthConfig:
    dims: GridDims
    M: int
    core_rate: float
    noise_rate: float
    dropout: float = 0.0
    planted_outliers: tuple = ()
    seed: int = 0
    labels: tuple = field(default=())

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be at least 2, got {self.M}")
        for name in ("core_rate", "noise_rate", "dropout"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.core_rate + self.noise_rate > 1.0:
            raise ValueError("core_rate + noise_rate exceeds the grid capacity")
        plants = tuple((int(j), str(mode)) for j, mode in self.planted_outliers)
        seen = set()
        for j, mode in plants:
            if not 0 <= j < self.M:
                raise ValueError(f"planted index {j} outside 0..{self.M - 1}")
            if mode not in PLANT_MODES:
                raise ValueError(f"unknown plant mode {mode!r}; expected one of {PLANT_MODES}")
            if j in seen:
                raise ValueError(f"study {j} planted twice")
            seen.add(j)
        if any(mode == "disjoint" for _, mode in plants) and 2 * self.n_core > self.dims.n_voxels:
            raise ValueError("a disjoint plant needs the core to fit in its own complement (core_rate <= 0.5)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "planted_outliers", plants)
        labels = tuple(self.labels) or tuple(f"study{j + 1:02d}" for j in range(self.M))
        if len(labels) != self.M:
            raise ValueError("one label per study is required")
        object.__setattr__(self, "labels", labels)

    @property
    def n_core(self) -> int:
        return int(round(self.core_rate * self.dims.n_voxels))

    def plant_mode(self, j: int):
        return dict(self.planted_outliers).get(j)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = [self.dims.nx, self.dims.ny, self.dims.nz]
        d["planted_outliers"] = [[j, mode] for j, mode in self.planted_outliers]
        d["labels"] = list(self.labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        d["dims"] = GridDims(*d["dims"])
        d["planted_outliers"] = tuple(tuple(p) for p in d.get("planted_outliers", ()))
        d["labels"] = tuple(d.get("labels", ()))
        return cls(**d)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _supports(config: SynthConfig, rng: np.random.Generator):
    """Signal support per study plus the voxels its noise may occupy."""
    N = config.dims.n_voxels
    core_idx = np.sort(rng.choice(N, size=config.n_core, replace=False))
    core = np.zeros(N, dtype=bool)
    core[core_idx] = True
    out = []
    for j in range(config.M):
        mode = config.plant_mode(j)
        if mode == "empty":
            out.append((np.zeros(N, dtype=bool), None))
            continue
        if mode == "disjoint":
            complement = np.flatnonzero(~core)
            idx = np.sort(rng.choice(complement, size=config.n_core, replace=False))
            allowed = ~core
        elif mode == "shifted":
            x, y, z = config.dims.unravel(core_idx)
            idx = config.dims.linear_index((x + config.dims.nx // 2) % config.dims.nx, y, z)
            allowed = np.ones(N, dtype=bool)
        else:
            idx = core_idx
            allowed = np.ones(N, dtype=bool)
        keep = rng.random(idx.size) >= config.dropout
        support = np.zeros(N, dtype=bool)
        support[idx[keep]] = True
        out.append((support, allowed))
    return out


def generate(config: SynthConfig) -> StudySet:
    """Draw a study set of binary masks from ``config``."""
    rng = make_rng(config.seed)
    N = config.dims.n_voxels
    masks = []
    for label, (support, allowed) in zip(config.labels, _supports(config, rng)):
        if allowed is not None:
            noise = rng.random(N) < config.noise_rate
            support = support | (noise & allowed)
        masks.append(VoxelMask.from_array(support, config.dims, label))
    return StudySet(tuple(masks))


def generate_statmaps(config: SynthConfig, effect: float = 5.0) -> list:
    """Draw per-study t-like maps: unit Gaussian noise plus ``effect`` on the signal support.

    ``noise_rate`` is not used here; thresholding the Gaussian background
    produces the scattered false activations instead.
    """
    rng = make_rng(config.seed)
    N = config.dims.n_voxels
    maps = []
    for label, (support, _) in zip(config.labels, _supports(config, rng)):
        values = rng.standard_normal(N) + effect * support
        maps.append(StatMap(config.dims, values, label))
    return maps


# oracles -----------------------------------------------------------------


def _active_set(mask: VoxelMask) -> set:
    arr = mask.to_array()
    nx, ny, nz = mask.dims.shape
    active = set()
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if arr[x, y, z]:
                    active.add((x, y, z))
    return active


def oracle_pair_counts(a: VoxelMask, b: VoxelMask) -> PairCounts:
    """Pair counts by explicit voxel enumeration and Python set algebra."""
    if a.dims != b.dims:
        raise ValueError("masks are on different grids")
    sa, sb = _active_set(a), _active_set(b)
    return PairCounts(len(sa), len(sb), len(sa & sb))


def oracle_jaccard(a: VoxelMask, b: VoxelMask) -> float:
    """Jaccard coefficient ``|A & B| / |A | B|`` from explicit voxel sets."""
    if a.dims != b.dims:
        raise ValueError("masks are on different grids")
    sa, sb = _active_set(a), _active_set(b)
    union = sa | sb
    if not union:
        raise ValueError("Jaccard of two empty masks is undefined")
    return len(sa & sb) / len(union)
