import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlaprel import (
    DegenerateInputError,
    GridDims,
    OverlapMatrix,
    PairCounts,
    StudySet,
    VoxelMask,
    dice,
    dice_to_jaccard,
    jaccard,
    overlap_matrix,
    pair_counts,
)
from overlaprel.errors import DimensionMismatchError
from overlaprel.synth import oracle_jaccard, oracle_pair_counts

from oracles import pair_fixture, random_mask


def test_pair_counts_identical_and_disjoint(rng, small_grid):
    a = random_mask(rng, small_grid, 0.4)
    assert pair_counts(a, a) == PairCounts(a.count(), a.count(), a.count())
    flat = a.to_flat()
    b = VoxelMask.from_array(~flat, small_grid)
    assert pair_counts(a, b).Vjl == 0


def test_pair_counts_worked_example(rng, session_grid):
    a, b = pair_fixture(rng, session_grid, 3604, 10813, 1081)
    c = pair_counts(VoxelMask.from_array(a, session_grid), VoxelMask.from_array(b, session_grid))
    assert c == PairCounts(3604, 10813, 1081)
    assert c.union == 13336


def test_pair_counts_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        pair_counts(VoxelMask.empty(GridDims(2, 2, 2)), VoxelMask.empty(GridDims(2, 2, 3)))


@pytest.mark.parametrize(
    "Vjl, expected_dice, expected_jaccard, tol",
    [(1081, 0.150, 0.081, 5e-4), (3243, 0.45, 0.29, 5e-3)],
)
def test_illustrative_examples(Vjl, expected_dice, expected_jaccard, tol):
    c = PairCounts(3604, 10813, Vjl)
    assert dice(c) == pytest.approx(expected_dice, abs=tol)
    assert jaccard(c) == pytest.approx(expected_jaccard, abs=tol)


def test_example_one_exact_ratio():
    assert jaccard(PairCounts(3604, 10813, 1081)) == 1081 / 13336


def test_endpoints():
    assert dice(PairCounts(5, 5, 5)) == 1.0
    assert jaccard(PairCounts(5, 5, 5)) == 1.0
    assert jaccard(PairCounts(5, 9, 0)) == 0.0
    assert dice(PairCounts(5, 9, 0)) == 0.0


def test_empty_pair_policy():
    c = PairCounts(0, 0, 0)
    with pytest.raises(DegenerateInputError):
        jaccard(c)
    with pytest.raises(DegenerateInputError):
        dice(c)
    assert jaccard(c, "zero") == 0.0
    assert dice(c, "one") == 1.0
    with pytest.raises(ValueError):
        jaccard(c, "nan")


def test_pair_counts_invariant():
    with pytest.raises(ValueError):
        PairCounts(3, 4, 5)


@pytest.mark.parametrize("w, expected", [(0.688, 0.524), (0.531, 0.361), (0.004, 0.002)])
def test_dice_to_jaccard_published_pairs(w, expected):
    assert dice_to_jaccard(w) == pytest.approx(expected, abs=5e-4)


def test_dice_to_jaccard_domain():
    assert dice_to_jaccard(0.0) == 0.0
    assert dice_to_jaccard(1.0) == 1.0
    with pytest.raises(ValueError):
        dice_to_jaccard(1.2)


@given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
def test_relation_and_ordering(Vj, Vl, Vjl):
    Vjl = min(Vjl, Vj, Vl)
    if Vj + Vl == 0:
        return
    c = PairCounts(Vj, Vl, Vjl)
    d, j = dice(c), jaccard(c)
    assert abs(j - dice_to_jaccard(d)) <= 1e-12
    assert j <= d
    if j == d:
        assert d in (0.0, 1.0)
    swapped = PairCounts(Vl, Vj, Vjl)
    assert jaccard(swapped) == j and dice(swapped) == d


def test_matrix_extremes(rng, small_grid):
    a = random_mask(rng, small_grid, 0.5)
    m = overlap_matrix(StudySet.from_masks([a, a]))
    np.testing.assert_array_equal(m.entries, np.ones((2, 2)))

    idx = rng.permutation(small_grid.n_voxels)
    disjoint = [VoxelMask.from_indices(small_grid, idx[k * 20 : (k + 1) * 20]) for k in range(3)]
    m = overlap_matrix(StudySet.from_masks(disjoint))
    np.testing.assert_array_equal(m.entries, np.eye(3))


def test_matrix_matches_set_oracle(rng, small_grid):
    studies = StudySet.from_masks([random_mask(rng, small_grid, p) for p in (0.2, 0.3, 0.4, 0.5)])
    m = overlap_matrix(studies, "jaccard")
    for j in range(4):
        for l in range(4):
            if j != l:
                assert m.entries[j, l] == oracle_jaccard(studies[j], studies[l])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(2, 5), nx=st.integers(1, 8), ny=st.integers(1, 8),
       nz=st.integers(1, 4))
def test_matrix_oracle_property(seed, M, nx, ny, nz):
    rng = np.random.default_rng(seed)
    d = GridDims(nx, ny, nz)
    masks = [random_mask(rng, d, rng.uniform(0.05, 0.9)) for _ in range(M)]
    studies = StudySet.from_masks(masks)
    m = overlap_matrix(studies, "jaccard", empty_policy="zero", threads=1)
    dm = m.as_kind("dice", "zero")
    for j in range(M):
        for l in range(j + 1, M):
            c = oracle_pair_counts(masks[j], masks[l])
            expected = 0.0 if c.union == 0 else c.Vjl / c.union
            assert m.entries[j, l] == expected
            assert dm.entries[j, l] >= m.entries[j, l]
    np.testing.assert_array_equal(m.entries, m.entries.T)


def test_matrix_independent_of_threads(rng, small_grid):
    studies = StudySet.from_masks([random_mask(rng, small_grid) for _ in range(7)])
    serial = overlap_matrix(studies, threads=1)
    parallel = overlap_matrix(studies, threads=4)
    np.testing.assert_array_equal(serial.entries, parallel.entries)


def test_matrix_error_names_pair(small_grid, rng):
    studies = StudySet.from_masks(
        [VoxelMask.empty(small_grid), VoxelMask.empty(small_grid), random_mask(rng, small_grid)],
        ["s1", "s2", "s3"],
    )
    with pytest.raises(DegenerateInputError, match="'s1' and 's2'"):
        overlap_matrix(studies)
    assert overlap_matrix(studies, empty_policy="zero").entries[0, 1] == 0.0


def test_overlap_matrix_validation():
    with pytest.raises(ValueError, match="symmetric"):
        OverlapMatrix("jaccard", [[1, 0.2], [0.3, 1]], ())
    with pytest.raises(ValueError, match="diagonal"):
        OverlapMatrix("jaccard", [[1, 0.2], [0.2, 0.9]], ())
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        OverlapMatrix("jaccard", [[1, 1.2], [1.2, 1]], ())
    m = OverlapMatrix("jaccard", np.eye(4), ())
    assert m.labels == ("study01", "study02", "study03", "study04")
    assert m.delete(1, 3).labels == ("study01", "study03")
