import numpy as np
import pytest

from overlaprel import GridDims, jaccard, overlap_matrix, pair_counts
from overlaprel.synth import SynthConfig, generate, generate_statmaps, oracle_jaccard, oracle_pair_counts

from oracles import random_mask

D = GridDims(16, 16, 8)


def test_reproducible():
    cfg = SynthConfig(D, 5, 0.05, 0.01, 0.2, ((1, "shifted"), (3, "disjoint")), seed=99)
    a, b = generate(cfg), generate(cfg)
    assert [m.packed.tobytes() for m in a] == [m.packed.tobytes() for m in b]
    c = generate(SynthConfig(D, 5, 0.05, 0.01, 0.2, ((1, "shifted"), (3, "disjoint")), seed=100))
    assert any(x != y for x, y in zip(a, c))
    for x, y in zip(generate_statmaps(cfg), generate_statmaps(cfg)):
        assert x == y


def test_noise_free_sets_are_identical():
    studies = generate(SynthConfig(D, 4, 0.1, 0.0, 0.0, seed=1))
    np.testing.assert_array_equal(overlap_matrix(studies).entries, np.ones((4, 4)))
    assert studies[0].count() == round(0.1 * D.n_voxels)


def test_independent_noise_expectation():
    # independent Bernoulli(p) masks: E|A & B| / E|A | B| = p / (2 - p)
    p = 0.1
    values = []
    for seed in range(100):
        studies = generate(SynthConfig(GridDims(16, 16, 4), 2, 0.0, p, 0.0, seed=seed))
        values.append(jaccard(pair_counts(studies[0], studies[1])))
    assert np.mean(values) == pytest.approx(p / (2 - p), abs=0.005)


def test_plant_modes():
    cfg = SynthConfig(GridDims(32, 32, 8), 12, 0.02, 0.005, 0.2, ((7, "disjoint"), (2, "empty")), seed=3)
    studies = generate(cfg)
    assert studies[2].count() == 0
    m = overlap_matrix(studies, empty_policy="zero")
    others = [j for j in range(12) if j not in (2, 7)]
    assert np.mean(m.entries[7, others]) < 0.02
    assert np.mean(m.entries[np.ix_(others, others)][np.triu_indices(len(others), 1)]) > 0.3


def test_shifted_plant_translates_core():
    cfg = SynthConfig(GridDims(8, 4, 2), 2, 0.25, 0.0, 0.0, ((1, "shifted"),), seed=4)
    a, b = generate(cfg)
    x, y, z = a.coords().T
    shifted = set(zip(((x + 4) % 8).tolist(), y.tolist(), z.tolist()))
    assert set(map(tuple, b.coords().tolist())) == shifted


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(D, 1, 0.1, 0.1)
    with pytest.raises(ValueError):
        SynthConfig(D, 4, 0.8, 0.3)
    with pytest.raises(ValueError):
        SynthConfig(D, 4, 0.6, 0.0, planted_outliers=((0, "disjoint"),))
    with pytest.raises(ValueError):
        SynthConfig(D, 4, 0.1, 0.0, planted_outliers=((4, "empty"),))
    with pytest.raises(ValueError):
        SynthConfig(D, 4, 0.1, 0.0, planted_outliers=((0, "sideways"),))
    with pytest.raises(ValueError):
        SynthConfig(D, 4, 0.1, 0.0, seed=-1)


def test_config_dict_roundtrip():
    cfg = SynthConfig(D, 4, 0.1, 0.01, 0.2, ((1, "empty"),), seed=7)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg


def test_oracle_basics(rng):
    a = random_mask(rng, GridDims(4, 4, 2), 0.5)
    assert oracle_jaccard(a, a) == 1.0
    b = a.__class__.from_array(~a.to_flat(), a.dims)
    assert oracle_jaccard(a, b) == 0.0
    assert oracle_pair_counts(a, b).Vjl == 0


def test_oracle_agrees_on_generated_sets():
    studies = generate(SynthConfig(GridDims(16, 16, 8), 6, 0.05, 0.02, 0.3, ((5, "shifted"),), seed=8))
    m = overlap_matrix(studies)
    for j in range(6):
        for l in range(j + 1, 6):
            assert m.entries[j, l] == oracle_jaccard(studies[j], studies[l])
