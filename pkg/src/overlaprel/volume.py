"""Voxel-grid data model and on-disk volume formats.

All volumes share one linearization: ``index = x + nx * (y + ny * z)``
(x fastest).  Arrays handed to or returned from this module are shaped
``(nx, ny, nz)`` and flattened in Fortran order, which yields exactly that
index.

Supported formats
-----------------
MSK1
    ``b"MSK1"``, little-endian ``u32`` nx, ny, nz, then ``ceil(N / 8)``
    bytes of bit-packed occupancy, LSB first within each byte.  Padding bits
    in the final byte must be zero.
COORDS
    UTF-8 text.  First line ``dims nx ny nz``, then one 0-based ``x y z``
    triple per line.  Duplicates are rejected.
NIFTI1
    Single-file ``.nii``, uncompressed, datatypes uint8/int16/int32/float32.
    Only ``dim[1..3]``, ``datatype``, ``bitpix`` and ``vox_offset`` are
    honoured; orientation and intensity scaling are ignored.
F32RAW
    Headerless little-endian float32 payload; dims come from the caller.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, FormatError

__all__ = [
    "Format",
    "GridDims",
    "VoxelMask",
    "StatMap",
    "StudySet",
    "load_mask",
    "save_mask",
    "load_statmap",
    "save_statmap",
    "write_nifti1",
    "threshold_statmap",
    "infer_format",
]

MSK1_MAGIC = b"MSK1"
MSK1_HEADER = struct.Struct("<4s3I")
NIFTI1_HEADER_SIZE = 348
_U64_MAX = 2**64 - 1

# NIfTI-1 datatype code -> (numpy dtype string without byte order, bitpix)
_NIFTI_DTYPES = {
    2: ("u1", 8),
    4: ("i2", 16),
    8: ("i4", 32),
    16: ("f4", 32),
}


class Format(str, enum.Enum):
    MSK1 = "MSK1"
    COORDS = "COORDS"
    NIFTI1 = "NIFTI1"
    F32RAW = "F32RAW"


_SUFFIXES = {
    ".msk": Format.MSK1,
    ".msk1": Format.MSK1,
    ".coords": Format.COORDS,
    ".txt": Format.COORDS,
    ".nii": Format.NIFTI1,
    ".f32": Format.F32RAW,
    ".raw": Format.F32RAW,
}


def infer_format(path) -> Format:
    """Guess a format from the file name suffix."""
    name = str(path).lower()
    if name.endswith(".nii.gz") or name.endswith(".gz"):
        raise FormatError("compressed volumes are not supported", path=path, field="suffix")
    suffix = Path(name).suffix
    try:
        return _SUFFIXES[suffix]
    except KeyError:
        raise FormatError(f"cannot infer volume format from suffix {suffix!r}", path=path) from None


def _as_format(fmt, path) -> Format:
    if fmt is None:
        return infer_format(path)
    if isinstance(fmt, Format):
        return fmt
    try:
        return Format(str(fmt).upper())
    except ValueError:
        raise FormatError(f"unknown format {fmt!r}", path=path) from None


@dataclass(frozen=True)
class GridDims:
    """Voxel counts along x, y and z."""

    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, int(value))
        if self.nx * self.ny * self.nz > _U64_MAX:
            raise OverflowError(f"grid {self} has more than 2**64 - 1 voxels")

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    def linear_index(self, x, y, z):
        return x + self.nx * (y + self.ny * z)

    def unravel(self, index):
        """Inverse of :meth:`linear_index`; works on scalars and arrays."""
        index = np.asarray(index)
        x = index % self.nx
        y = (index // self.nx) % self.ny
        z = index // (self.nx * self.ny)
        return x, y, z

    def __str__(self):
        return f"{self.nx}x{self.ny}x{self.nz}"


def _n_bytes(n_voxels: int) -> int:
    return (n_voxels + 7) // 8


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class VoxelMask:
    """Bit-packed binary activation map.

    Masks are immutable.  Equality compares ``dims`` and the bit pattern;
    ``label`` is metadata and does not take part.

    Parameters
    ----------
    dims : GridDims
    packed : np.ndarray of uint8
        ``ceil(N / 8)`` bytes, LSB-first, x-fastest.  Padding bits must be 0.
    label : str
    """

    dims: GridDims
    packed: np.ndarray
    label: str = ""
    _words: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8).ravel()
        expected = _n_bytes(self.dims.n_voxels)
        if packed.size != expected:
            raise ValueError(f"packed payload has {packed.size} bytes, expected {expected}")
        tail = self.dims.n_voxels % 8
        if tail and packed[-1] >> tail:
            raise ValueError("padding bits beyond the last voxel must be zero")
        padded = np.zeros(-(-expected // 8) * 8, dtype=np.uint8)
        padded[:expected] = packed
        object.__setattr__(self, "packed", _readonly(packed.copy()))
        object.__setattr__(self, "_words", _readonly(padded.view("<u8")))

    # construction -------------------------------------------------------

    @classmethod
    def from_array(cls, array, dims: GridDims | None = None, label: str = "") -> "VoxelMask":
        """Build a mask from a boolean-like array.

        A 3-D array is read as ``(nx, ny, nz)``; a 1-D array must already be
        x-fastest and requires ``dims``.
        """
        arr = np.asarray(array)
        if arr.ndim == 3:
            if dims is None:
                dims = GridDims(*arr.shape)
            elif arr.shape != dims.shape:
                raise DimensionMismatchError(f"array shape {arr.shape} does not match {dims}")
            flat = arr.ravel(order="F")
        elif arr.ndim == 1:
            if dims is None:
                raise ValueError("dims are required for a flat array")
            if arr.size != dims.n_voxels:
                raise DimensionMismatchError(f"{arr.size} values for grid {dims}")
            flat = arr
        else:
            raise ValueError(f"expected a 1-D or 3-D array, got {arr.ndim}-D")
        packed = np.packbits(flat.astype(bool), bitorder="little")
        return cls(dims, packed, label)

    @classmethod
    def from_indices(cls, dims: GridDims, indices, label: str = "") -> "VoxelMask":
        """Build a mask with the given linear indices set."""
        flat = np.zeros(dims.n_voxels, dtype=bool)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= dims.n_voxels):
            raise IndexError(f"linear index out of range for grid {dims}")
        flat[idx] = True
        return cls.from_array(flat, dims, label)

    @classmethod
    def empty(cls, dims: GridDims, label: str = "") -> "VoxelMask":
        return cls(dims, np.zeros(_n_bytes(dims.n_voxels), dtype=np.uint8), label)

    # views --------------------------------------------------------------

    @property
    def words(self) -> np.ndarray:
        """Read-only little-endian uint64 view of the payload (zero padded)."""
        return self._words

    def count(self) -> int:
        """Number of active voxels."""
        return int(np.bitwise_count(self._words).sum(dtype=np.int64))

    def to_flat(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.dims.n_voxels, bitorder="little").astype(bool)

    def to_array(self) -> np.ndarray:
        """Boolean array shaped ``(nx, ny, nz)``."""
        return self.to_flat().reshape(self.dims.shape, order="F")

    def indices(self) -> np.ndarray:
        """Sorted linear indices of active voxels."""
        return np.flatnonzero(self.to_flat())

    def coords(self) -> np.ndarray:
        """``(V, 3)`` array of active ``(x, y, z)`` triples in linear order."""
        return np.stack(self.dims.unravel(self.indices()), axis=1)

    def with_label(self, label: str) -> "VoxelMask":
        return VoxelMask(self.dims, self.packed, label)

    # set algebra ----------------------------------------------------------

    def _check(self, other: "VoxelMask"):
        if not isinstance(other, VoxelMask):
            raise TypeError(f"expected VoxelMask, got {type(other).__name__}")
        if self.dims != other.dims:
            raise DimensionMismatchError(
                f"masks {self.label!r} ({self.dims}) and {other.label!r} ({other.dims}) "
                "are on different grids"
            )

    def intersection_count(self, other: "VoxelMask") -> int:
        self._check(other)
        return int(np.bitwise_count(self._words & other._words).sum(dtype=np.int64))

    def _combine(self, words: np.ndarray) -> "VoxelMask":
        packed = words.view(np.uint8)[: self.packed.size]
        return VoxelMask(self.dims, packed)

    def __and__(self, other):
        self._check(other)
        return self._combine(self._words & other._words)

    def __or__(self, other):
        self._check(other)
        return self._combine(self._words | other._words)

    def __xor__(self, other):
        self._check(other)
        return self._combine(self._words ^ other._words)

    def __sub__(self, other):
        self._check(other)
        return self._combine(self._words & ~other._words)

    def __eq__(self, other):
        if not isinstance(other, VoxelMask):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.packed, other.packed)

    def __hash__(self):
        return hash((self.dims, self.packed.tobytes()))

    def __repr__(self):
        return f"VoxelMask(label={self.label!r}, dims={self.dims}, V={self.count()})"


@dataclass(frozen=True, eq=False)
class StatMap:
    """Real-valued statistic map (for example voxel-wise t statistics).

    ``values`` is stored flat, x-fastest, as float64 regardless of the
    precision it was loaded from.
    """

    dims: GridDims
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 3:
            if values.shape != self.dims.shape:
                raise DimensionMismatchError(f"array shape {values.shape} does not match {self.dims}")
            values = values.ravel(order="F")
        values = values.ravel()
        if values.size != self.dims.n_voxels:
            raise DimensionMismatchError(f"{values.size} values for grid {self.dims}")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ValueError(f"non-finite statistic at linear index {int(bad[0])}")
        object.__setattr__(self, "values", _readonly(values))

    def to_array(self) -> np.ndarray:
        return self.values.reshape(self.dims.shape, order="F")

    def __eq__(self, other):
        if not isinstance(other, StatMap):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class StudySet:
    """Ordered collection of ``M >= 2`` masks on one grid with unique labels."""

    masks: tuple

    def __post_init__(self):
        masks = tuple(self.masks)
        if len(masks) < 2:
            raise ValueError(f"a study set needs at least 2 masks, got {len(masks)}")
        dims = masks[0].dims
        for m in masks[1:]:
            if m.dims != dims:
                raise DimensionMismatchError(
                    f"mask {m.label!r} is {m.dims}, expected {dims} like {masks[0].label!r}"
                )
        labels = [m.label for m in masks]
        if len(set(labels)) != len(labels):
            dup = sorted({lab for lab in labels if labels.count(lab) > 1})
            raise ValueError(f"duplicate study labels: {dup}")
        object.__setattr__(self, "masks", masks)

    @classmethod
    def from_masks(cls, masks: Iterable[VoxelMask], labels: Sequence[str] | None = None) -> "StudySet":
        """Wrap masks, relabelling them (or filling in ``study01``...) as needed."""
        masks = list(masks)
        if labels is None:
            labels = [m.label or f"study{j + 1:02d}" for j, m in enumerate(masks)]
        if len(labels) != len(masks):
            raise ValueError("labels and masks differ in length")
        return cls(tuple(m.with_label(lab) for m, lab in zip(masks, labels)))

    @property
    def M(self) -> int:
        return len(self.masks)

    @property
    def dims(self) -> GridDims:
        return self.masks[0].dims

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.masks]

    def __len__(self):
        return len(self.masks)

    def __getitem__(self, j):
        return self.masks[j]

    def __iter__(self):
        return iter(self.masks)


# MSK1 --------------------------------------------------------------------


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _parse_msk1(data: bytes, path, label) -> VoxelMask:
    if len(data) < MSK1_HEADER.size:
        raise FormatError("truncated MSK1 header", path=path, offset=len(data), field="header")
    magic, nx, ny, nz = MSK1_HEADER.unpack_from(data)
    if magic != MSK1_MAGIC:
        raise FormatError(f"bad magic {magic!r}", path=path, offset=0, field="magic")
    for off, name, value in ((4, "nx", nx), (8, "ny", ny), (12, "nz", nz)):
        if value == 0:
            raise FormatError("dimension must be positive", path=path, offset=off, field=name)
    if nx * ny * nz > _U64_MAX:
        raise FormatError("voxel count overflows 64 bits", path=path, offset=4, field="dims")
    dims = GridDims(nx, ny, nz)
    n_bytes = _n_bytes(dims.n_voxels)
    start = MSK1_HEADER.size
    payload = data[start:]
    if len(payload) < n_bytes:
        raise FormatError(
            f"truncated payload: {len(payload)} of {n_bytes} bytes",
            path=path, offset=len(data), field="payload",
        )
    if len(payload) > n_bytes:
        raise FormatError("trailing bytes after payload", path=path, offset=start + n_bytes, field="payload")
    packed = np.frombuffer(payload, dtype=np.uint8)
    tail = dims.n_voxels % 8
    if tail and packed[-1] >> tail:
        raise FormatError("nonzero padding bits", path=path, offset=start + n_bytes - 1, field="payload")
    return VoxelMask(dims, packed, label)


def _write_msk1(mask: VoxelMask, fh):
    d = mask.dims
    for name, value in (("nx", d.nx), ("ny", d.ny), ("nz", d.nz)):
        if value > 0xFFFFFFFF:
            raise OverflowError(f"{name}={value} does not fit the MSK1 u32 header")
    fh.write(MSK1_HEADER.pack(MSK1_MAGIC, d.nx, d.ny, d.nz))
    fh.write(mask.packed.tobytes())


# COORDS ------------------------------------------------------------------


def _parse_coords(text: str, path, label) -> VoxelMask:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty COORDS file", path=path, offset=1, field="dims")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "dims":
        raise FormatError("first line must be 'dims nx ny nz'", path=path, offset=1, field="dims")
    try:
        nx, ny, nz = (int(t) for t in head[1:])
        dims = GridDims(nx, ny, nz)
    except (ValueError, OverflowError) as exc:
        raise FormatError(f"invalid dims: {exc}", path=path, offset=1, field="dims") from None
    flat = np.zeros(dims.n_voxels, dtype=bool)
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise FormatError("expected 'x y z'", path=path, offset=lineno, field=f"line {lineno}")
        try:
            x, y, z = (int(t) for t in parts)
        except ValueError:
            raise FormatError("non-integer coordinate", path=path, offset=lineno, field=f"line {lineno}") from None
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            raise FormatError(
                f"coordinate ({x}, {y}, {z}) outside grid {dims}",
                path=path, offset=lineno, field=f"line {lineno}",
            )
        idx = dims.linear_index(x, y, z)
        if flat[idx]:
            raise FormatError(
                f"duplicate coordinate ({x}, {y}, {z})", path=path, offset=lineno, field=f"line {lineno}"
            )
        flat[idx] = True
    return VoxelMask.from_array(flat, dims, label)


def _write_coords(mask: VoxelMask, fh):
    d = mask.dims
    out = [f"dims {d.nx} {d.ny} {d.nz}\n"]
    out.extend(f"{x} {y} {z}\n" for x, y, z in mask.coords().tolist())
    fh.write("".join(out).encode("utf-8"))


# NIfTI-1 -----------------------------------------------------------------


def _parse_nifti1(data: bytes, path):
    """Return ``(dims, flat ndarray)`` from a single-file NIfTI-1 image."""
    if data[:2] == b"\x1f\x8b":
        raise FormatError("gzip-compressed NIfTI is not supported", path=path, offset=0, field="compression")
    if len(data) < NIFTI1_HEADER_SIZE:
        raise FormatError("truncated NIfTI-1 header", path=path, offset=len(data), field="header")
    if struct.unpack_from("<i", data, 0)[0] == NIFTI1_HEADER_SIZE:
        bo = "<"
    elif struct.unpack_from(">i", data, 0)[0] == NIFTI1_HEADER_SIZE:
        bo = ">"
    else:
        raise FormatError("sizeof_hdr is not 348", path=path, offset=0, field="sizeof_hdr")
    magic = data[344:348]
    if magic == b"ni1\x00":
        raise FormatError("two-file NIfTI (.hdr/.img) is not supported", path=path, offset=344, field="magic")
    if magic != b"n+1\x00":
        raise FormatError(f"bad magic {magic!r}", path=path, offset=344, field="magic")
    dim = struct.unpack_from(bo + "8h", data, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise FormatError(f"dim[0]={ndim} out of range", path=path, offset=40, field="dim[0]")
    for i in range(1, 4):
        if i <= ndim and dim[i] < 1:
            raise FormatError(f"dim[{i}]={dim[i]} must be positive", path=path, offset=40 + 2 * i, field=f"dim[{i}]")
    for i in range(4, ndim + 1):
        if dim[i] != 1:
            raise FormatError(
                f"dim[{i}]={dim[i]}: only 3-D volumes are supported", path=path, offset=40 + 2 * i, field=f"dim[{i}]"
            )
    nx, ny, nz = (dim[i] if i <= ndim else 1 for i in (1, 2, 3))
    dims = GridDims(nx, ny, nz)
    datatype, bitpix = struct.unpack_from(bo + "2h", data, 70)
    if datatype not in _NIFTI_DTYPES:
        raise FormatError(f"unsupported datatype {datatype}", path=path, offset=70, field="datatype")
    code, expected_bitpix = _NIFTI_DTYPES[datatype]
    if bitpix != expected_bitpix:
        raise FormatError(
            f"bitpix {bitpix} inconsistent with datatype {datatype}", path=path, offset=72, field="bitpix"
        )
    vox_offset = struct.unpack_from(bo + "f", data, 108)[0]
    if not np.isfinite(vox_offset) or vox_offset < NIFTI1_HEADER_SIZE or vox_offset != int(vox_offset):
        raise FormatError(f"invalid vox_offset {vox_offset}", path=path, offset=108, field="vox_offset")
    start = int(vox_offset)
    dtype = np.dtype(bo + code)
    n_bytes = dims.n_voxels * dtype.itemsize
    if len(data) < start + n_bytes:
        raise FormatError(
            f"truncated payload: need {n_bytes} bytes from offset {start}, file has {len(data)}",
            path=path, offset=len(data), field="payload",
        )
    values = np.frombuffer(data, dtype=dtype, count=dims.n_voxels, offset=start)
    return dims, values


def write_nifti1(path, array, datatype: int = 16) -> None:
    """Write a minimal single-file little-endian NIfTI-1 image.

    ``array`` is shaped ``(nx, ny, nz)``.  Only the fields this package reads
    back are meaningful; ``pixdim`` is unit and no orientation is stored.
    """
    if datatype not in _NIFTI_DTYPES:
        raise ValueError(f"unsupported datatype {datatype}")
    code, bitpix = _NIFTI_DTYPES[datatype]
    arr = np.asarray(array)
    if arr.ndim != 3:
        raise ValueError("expected a 3-D array")
    hdr = bytearray(NIFTI1_HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, NIFTI1_HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *arr.shape, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, datatype, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, 352.0)
    hdr[344:348] = b"n+1\x00"
    payload = arr.astype("<" + code).ravel(order="F").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(hdr))
        fh.write(b"\x00" * 4)  # empty extension flag
        fh.write(payload)


# public loaders ----------------------------------------------------------


def _default_label(path) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".msk1", ".msk", ".coords", ".txt", ".nii", ".f32", ".raw"):
        if name.lower().endswith(suffix):
            return name[: -len(suffix)]
    return name


def load_mask(path, format=None, label: str | None = None) -> VoxelMask:
    """Read a binary mask.

    Parameters
    ----------
    path : path-like
    format : {"MSK1", "COORDS", "NIFTI1"}, optional
        Inferred from the suffix when omitted.
    label : str, optional
        Defaults to the file name without its suffix.

    Raises
    ------
    FormatError
        Malformed header, overflowing dims, truncated payload, unsupported
        NIfTI datatype or compression.
    OSError
        The file cannot be read.
    """
    fmt = _as_format(format, path)
    label = _default_label(path) if label is None else label
    data = _read_bytes(path)
    if fmt is Format.MSK1:
        return _parse_msk1(data, path, label)
    if fmt is Format.COORDS:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("COORDS file is not UTF-8", path=path, offset=exc.start) from None
        return _parse_coords(text, path, label)
    if fmt is Format.NIFTI1:
        dims, values = _parse_nifti1(data, path)
        return VoxelMask.from_array(values != 0, dims, label)
    raise FormatError(f"{fmt.value} cannot hold a mask", path=path, field="format")


def save_mask(mask: VoxelMask, path, format=None) -> None:
    """Write ``mask`` as MSK1 or COORDS (byte-exact, deterministic)."""
    fmt = _as_format(format, path)
    writers = {Format.MSK1: _write_msk1, Format.COORDS: _write_coords}
    if fmt not in writers:
        raise ValueError(f"masks can only be saved as MSK1 or COORDS, not {fmt.value}")
    with open(path, "wb") as fh:
        writers[fmt](mask, fh)


def load_statmap(path, format=None, dims: GridDims | None = None, label: str | None = None) -> StatMap:
    """Read a statistic map from F32RAW (needs ``dims``) or NIfTI-1."""
    fmt = _as_format(format, path)
    label = _default_label(path) if label is None else label
    data = _read_bytes(path)
    if fmt is Format.F32RAW:
        if dims is None:
            raise ValueError("F32RAW maps are headerless; dims must be given")
        expected = dims.n_voxels * 4
        if len(data) != expected:
            raise FormatError(
                f"payload is {len(data)} bytes, expected {expected} for grid {dims}",
                path=path, offset=min(len(data), expected), field="payload",
            )
        values = np.frombuffer(data, dtype="<f4")
    elif fmt is Format.NIFTI1:
        dims, values = _parse_nifti1(data, path)
    else:
        raise FormatError(f"{fmt.value} cannot hold a statistic map", path=path, field="format")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FormatError(f"non-finite value at linear index {int(bad[0])}", path=path, field="values")
    return StatMap(dims, values.astype(np.float64), label)


def save_statmap(smap: StatMap, path, format=None) -> None:
    """Write a statistic map as float32 F32RAW or NIfTI-1."""
    fmt = _as_format(format, path)
    if fmt is Format.F32RAW:
        with open(path, "wb") as fh:
            fh.write(smap.values.astype("<f4").tobytes())
    elif fmt is Format.NIFTI1:
        write_nifti1(path, smap.to_array(), datatype=16)
    else:
        raise ValueError(f"statistic maps can only be saved as F32RAW or NIFTI1, not {fmt.value}")


def threshold_statmap(smap: StatMap, critical: float, side: str = "greater", label: str | None = None) -> VoxelMask:
    """Binarize a statistic map against a critical value.

    ``greater`` keeps ``v >= critical``, ``less`` keeps ``v <= critical`` and
    ``two-sided`` keeps ``|v| >= critical``.
    """
    critical = float(critical)
    if not np.isfinite(critical):
        raise ValueError("critical value must be finite")
    v = smap.values
    if side == "greater":
        flat = v >= critical
    elif side == "less":
        flat = v <= critical
    elif side in ("two-sided", "two_sided", "both"):
        flat = np.abs(v) >= critical
    else:
        raise ValueError(f"unknown side {side!r}")
    return VoxelMask.from_array(flat, smap.dims, smap.label if label is None else label)
