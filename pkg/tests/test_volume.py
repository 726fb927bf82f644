import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlaprel import (
    FormatError,
    GridDims,
    StatMap,
    StudySet,
    VoxelMask,
    load_mask,
    load_statmap,
    save_mask,
    save_statmap,
    threshold_statmap,
)
from overlaprel.errors import DimensionMismatchError
from overlaprel.volume import write_nifti1

from oracles import random_mask


def test_griddims_validation():
    assert GridDims(128, 128, 22).n_voxels == 360448
    with pytest.raises(ValueError):
        GridDims(0, 1, 1)
    with pytest.raises(TypeError):
        GridDims(1.5, 1, 1)
    with pytest.raises(OverflowError):
        GridDims(2**32, 2**32, 2)


def test_linearization_is_x_fastest():
    d = GridDims(3, 4, 5)
    assert d.linear_index(1, 0, 0) == 1
    assert d.linear_index(0, 1, 0) == 3
    assert d.linear_index(0, 0, 1) == 12
    arr = np.zeros(d.shape, dtype=bool)
    arr[2, 3, 4] = True
    m = VoxelMask.from_array(arr)
    assert m.indices().tolist() == [d.linear_index(2, 3, 4)]
    assert m.coords().tolist() == [[2, 3, 4]]


def test_msk1_golden_bytes(tmp_path):
    d = GridDims(2, 2, 1)
    m = VoxelMask.from_indices(d, [d.linear_index(0, 0, 0), d.linear_index(1, 1, 0)])
    path = tmp_path / "m.msk"
    save_mask(m, path, "MSK1")
    raw = path.read_bytes()
    assert raw == b"MSK1" + struct.pack("<3I", 2, 2, 1) + bytes([0b1001])
    back = load_mask(path, "MSK1")
    assert back == m
    assert back.count() == 2


def test_empty_mask_msk1_is_header_plus_zeros(tmp_path):
    d = GridDims(5, 3, 2)
    path = tmp_path / "e.msk"
    save_mask(VoxelMask.empty(d), path)
    raw = path.read_bytes()
    assert raw[:16] == b"MSK1" + struct.pack("<3I", 5, 3, 2)
    assert raw[16:] == bytes(4)


def test_coords_line_counts(tmp_path, session_grid, rng):
    idx = rng.choice(session_grid.n_voxels, 1081, replace=False)
    x, y, z = session_grid.unravel(idx)
    path = tmp_path / "common.coords"
    path.write_text("dims 128 128 22\n" + "".join(f"{a} {b} {c}\n" for a, b, c in zip(x, y, z)))
    assert load_mask(path).count() == 1081

    m = VoxelMask.from_indices(session_grid, rng.choice(session_grid.n_voxels, 3604, replace=False))
    out = tmp_path / "a.coords"
    save_mask(m, out, "COORDS")
    lines = out.read_text().splitlines()
    assert lines[0] == "dims 128 128 22"
    assert len(lines[1:]) == 3604
    assert load_mask(out) == m


@pytest.mark.parametrize(
    "text, field",
    [
        ("dims 2 2\n", "dims"),
        ("dims 2 2 1\n0 0\n", "line 2"),
        ("dims 2 2 1\n0 0 0\n0 0 0\n", "line 3"),
        ("dims 2 2 1\n2 0 0\n", "line 2"),
        ("dims 2 2 1\na 0 0\n", "line 2"),
    ],
)
def test_coords_errors(tmp_path, text, field):
    path = tmp_path / "bad.coords"
    path.write_text(text)
    with pytest.raises(FormatError) as info:
        load_mask(path)
    assert info.value.field == field


def test_msk1_errors(tmp_path):
    path = tmp_path / "bad.msk"
    path.write_bytes(b"MSK2" + struct.pack("<3I", 2, 2, 2) + b"\x00")
    with pytest.raises(FormatError, match="magic") as info:
        load_mask(path)
    assert info.value.offset == 0

    path.write_bytes(b"MSK1" + struct.pack("<3I", 4, 4, 4))
    with pytest.raises(FormatError, match="truncated payload") as info:
        load_mask(path)
    assert info.value.field == "payload"

    path.write_bytes(b"MSK1" + struct.pack("<3I", 0xFFFFFFFF, 0xFFFFFFFF, 0xFFFFFFFF))
    with pytest.raises(FormatError, match="overflow"):
        load_mask(path)

    path.write_bytes(b"MSK1" + struct.pack("<3I", 3, 1, 1) + bytes([0b1000]))
    with pytest.raises(FormatError, match="padding"):
        load_mask(path)

    path.write_bytes(b"MSK1\x00")
    with pytest.raises(FormatError, match="header"):
        load_mask(path)


@settings(max_examples=100, deadline=None)
@given(
    nx=st.integers(1, 9),
    ny=st.integers(1, 9),
    nz=st.integers(1, 5),
    seed=st.integers(0, 2**32 - 1),
    p=st.floats(0, 1),
    fmt=st.sampled_from(["MSK1", "COORDS"]),
)
def test_roundtrip_property(tmp_path_factory, nx, ny, nz, seed, p, fmt):
    d = GridDims(nx, ny, nz)
    m = random_mask(np.random.default_rng(seed), d, p)
    path = tmp_path_factory.mktemp("rt") / "m"
    save_mask(m, path, fmt)
    assert load_mask(path, fmt) == m


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1))
def test_count_matches_bruteforce(seed, p):
    d = GridDims(7, 5, 3)
    flat = np.random.default_rng(seed).random(d.n_voxels) < p
    m = VoxelMask.from_array(flat, d)
    assert m.count() == sum(1 for v in flat if v)
    np.testing.assert_array_equal(m.to_flat(), flat)


def test_set_algebra(rng, small_grid):
    a = random_mask(rng, small_grid)
    b = random_mask(rng, small_grid)
    fa, fb = a.to_flat(), b.to_flat()
    np.testing.assert_array_equal((a & b).to_flat(), fa & fb)
    np.testing.assert_array_equal((a | b).to_flat(), fa | fb)
    np.testing.assert_array_equal((a - b).to_flat(), fa & ~fb)
    np.testing.assert_array_equal((a ^ b).to_flat(), fa ^ fb)
    with pytest.raises(DimensionMismatchError):
        a & VoxelMask.empty(GridDims(8, 8, 5))


def test_mask_is_immutable(small_grid):
    m = VoxelMask.empty(small_grid)
    with pytest.raises(ValueError):
        m.packed[0] = 1


def test_studyset_invariants(small_grid):
    a = VoxelMask.empty(small_grid, "a")
    with pytest.raises(ValueError):
        StudySet((a,))
    with pytest.raises(ValueError, match="duplicate"):
        StudySet((a, a))
    with pytest.raises(DimensionMismatchError):
        StudySet((a, VoxelMask.empty(GridDims(1, 1, 1), "b")))
    with pytest.raises(ValueError, match="duplicate"):
        StudySet.from_masks([a, a])
    s = StudySet.from_masks([VoxelMask.empty(small_grid)] * 3)
    assert s.labels == ["study01", "study02", "study03"]


# NIfTI -------------------------------------------------------------------


def _nifti_header(dims, datatype, bitpix, vox_offset=352.0, byteorder="<", magic=b"n+1\x00"):
    hdr = bytearray(348)
    struct.pack_into(byteorder + "i", hdr, 0, 348)
    struct.pack_into(byteorder + "8h", hdr, 40, 3, *dims, 1, 1, 1, 1)
    struct.pack_into(byteorder + "2h", hdr, 70, datatype, bitpix)
    struct.pack_into(byteorder + "f", hdr, 108, vox_offset)
    hdr[344:348] = magic
    return bytes(hdr) + b"\x00" * 4


def test_nifti_hand_built_uint8(tmp_path):
    path = tmp_path / "m.nii"
    data = np.zeros((3, 2, 2), dtype=np.uint8)
    data[1, 0, 0] = 7
    data[2, 1, 1] = 1
    path.write_bytes(_nifti_header((3, 2, 2), 2, 8) + data.ravel(order="F").tobytes())
    m = load_mask(path)
    assert m.dims == GridDims(3, 2, 2)
    assert m.coords().tolist() == [[1, 0, 0], [2, 1, 1]]


def test_nifti_all_zero_mask(tmp_path):
    path = tmp_path / "z.nii"
    path.write_bytes(_nifti_header((4, 4, 2), 2, 8) + bytes(32))
    assert load_mask(path, "NIFTI1").count() == 0


@pytest.mark.parametrize("dtype, code, bitpix", [("<i2", 4, 16), ("<i4", 8, 32), ("<f4", 16, 32)])
def test_nifti_datatypes(tmp_path, dtype, code, bitpix):
    vals = np.array([0, -3, 0, 2, 0, 0, 5, 0], dtype=dtype)
    path = tmp_path / "m.nii"
    path.write_bytes(_nifti_header((2, 2, 2), code, bitpix) + vals.tobytes())
    assert load_mask(path).indices().tolist() == [1, 3, 6]


def test_nifti_big_endian(tmp_path):
    vals = np.array([0, 1, 0, 2], dtype=">i2")
    path = tmp_path / "be.nii"
    path.write_bytes(_nifti_header((2, 2, 1), 4, 16, byteorder=">") + vals.tobytes())
    assert load_mask(path).indices().tolist() == [1, 3]


def test_nifti_errors(tmp_path):
    path = tmp_path / "bad.nii"
    path.write_bytes(_nifti_header((2, 2, 1), 64, 64) + bytes(32))
    with pytest.raises(FormatError, match="datatype") as info:
        load_mask(path)
    assert info.value.offset == 70

    path.write_bytes(_nifti_header((2, 2, 1), 2, 8) + bytes(2))
    with pytest.raises(FormatError, match="truncated payload"):
        load_mask(path)

    path.write_bytes(b"\x1f\x8b" + bytes(400))
    with pytest.raises(FormatError, match="compress"):
        load_mask(path)

    path.write_bytes(bytes(100))
    with pytest.raises(FormatError, match="header"):
        load_mask(path)

    path.write_bytes(_nifti_header((2, 2, 1), 2, 16) + bytes(4))
    with pytest.raises(FormatError, match="bitpix"):
        load_mask(path)

    path.write_bytes(_nifti_header((2, 2, 1), 2, 8, magic=b"ni1\x00") + bytes(4))
    with pytest.raises(FormatError, match="two-file"):
        load_mask(path)

    with pytest.raises(FormatError, match="compressed"):
        load_mask(tmp_path / "x.nii.gz")


# stat maps ----------------------------------------------------------------


def test_f32raw_roundtrip(tmp_path):
    d = GridDims(2, 2, 2)
    path = tmp_path / "s.f32"
    path.write_bytes(np.arange(8, dtype="<f4").tobytes())
    smap = load_statmap(path, dims=d)
    np.testing.assert_array_equal(smap.values, np.arange(8.0))
    save_statmap(smap, tmp_path / "t.f32")
    assert (tmp_path / "t.f32").read_bytes() == path.read_bytes()


def test_f32raw_errors(tmp_path):
    d = GridDims(2, 2, 2)
    path = tmp_path / "s.f32"
    path.write_bytes(np.arange(7, dtype="<f4").tobytes())
    with pytest.raises(FormatError, match="expected 32"):
        load_statmap(path, dims=d)
    vals = np.arange(8, dtype="<f4")
    vals[5] = np.nan
    path.write_bytes(vals.tobytes())
    with pytest.raises(FormatError, match="linear index 5"):
        load_statmap(path, dims=d)


def test_nifti_float32_statmap_fidelity(tmp_path, rng):
    arr = rng.normal(size=(4, 3, 2)).astype(np.float32)
    path = tmp_path / "t.nii"
    write_nifti1(path, arr, datatype=16)
    smap = load_statmap(path)
    assert smap.dims == GridDims(4, 3, 2)
    np.testing.assert_array_equal(smap.to_array(), arr.astype(np.float64))


def test_statmap_rejects_nonfinite():
    with pytest.raises(ValueError, match="linear index 1"):
        StatMap(GridDims(3, 1, 1), [0.0, np.inf, 1.0])


def test_threshold_examples():
    smap = StatMap(GridDims(3, 1, 1), [1.0, 3.0, -2.5])
    assert threshold_statmap(smap, 2.0, "greater").to_flat().tolist() == [False, True, False]
    assert threshold_statmap(smap, 2.0, "two-sided").to_flat().tolist() == [False, True, True]
    assert threshold_statmap(smap, -2.0, "less").to_flat().tolist() == [False, False, True]
    assert threshold_statmap(smap, -10.0, "greater").count() == 3
    with pytest.raises(ValueError):
        threshold_statmap(smap, np.nan)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c1=st.floats(-3, 3), c2=st.floats(-3, 3))
def test_threshold_monotone(seed, c1, c2):
    lo, hi = sorted((c1, c2))
    d = GridDims(6, 5, 4)
    smap = StatMap(d, np.random.default_rng(seed).normal(size=d.n_voxels))
    low = threshold_statmap(smap, lo)
    high = threshold_statmap(smap, hi)
    assert (high - low).count() == 0
    assert high.count() == int(np.sum(smap.values >= hi))
