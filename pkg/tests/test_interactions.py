import numpy as np
import pytest

from fairmi.dataset import Dataset
from fairmi.errors import AuditError
from fairmi.interactions import interaction_heatmap, pair_interaction
from fairmi.nn import ModelConfig, forward, init_model, predict_proba
from fairmi.schema import FeatureSchema, FeatureSpec


def _dataset(rows):
    schema = FeatureSchema(
        [
            FeatureSpec("g", "categorical", ("a", "b"), protected=True),
            FeatureSpec("u", "continuous"),
            FeatureSpec("v", "continuous"),
        ]
    )
    rows = np.asarray(rows, dtype=float)
    labels = np.ones(rows.shape[0], dtype=int)
    labels[0] = 2
    return Dataset(rows, labels, schema, C=2, label_values=("0", "1"))


def additive(rows):
    rows = np.asarray(rows)
    return 0.1 * rows[:, 0] + 0.3 * np.tanh(rows[:, 1]) - 0.2 * rows[:, 2] ** 2


def bilinear(rows):
    rows = np.asarray(rows)
    return rows[:, 1] * rows[:, 2]


def test_additive_model_zero_interaction():
    x = np.array([0.7, -1.3, 2.1])
    baseline = np.array([-1.0, -2.0, -2.0])
    for i in range(3):
        for j in range(3):
            if i != j:
                assert pair_interaction(additive, x, baseline, i, j) == pytest.approx(0.0, abs=1e-12)


def test_bilinear_closed_form():
    x = np.array([0.0, 1.7, -0.9])
    baseline = np.array([-1.0, -2.0, -2.0])
    got = pair_interaction(bilinear, x, baseline, 1, 2)
    assert got == pytest.approx(abs((1.7 - -2.0) * (-0.9 - -2.0)))


def test_pair_interaction_rejects_same_feature():
    with pytest.raises(ValueError):
        pair_interaction(additive, np.zeros(3), np.zeros(3), 1, 1)


def test_pair_interaction_matches_four_forward_calls():
    model = init_model(ModelConfig([3, 6, 4, 1], init_seed=5))
    forward(model, np.random.default_rng(0).normal(size=(8, 3)))  # settle stats
    x = np.array([0.6, -0.2, 1.4])
    baseline = np.array([-1.0, -2.0, -2.0])
    got = pair_interaction(model, x, baseline, 0, 2)

    def f(row):
        return float(predict_proba(model, np.asarray(row)[None, :])[0])

    x_i = x.copy(); x_i[0] = baseline[0]
    x_j = x.copy(); x_j[2] = baseline[2]
    x_ij = x_i.copy(); x_ij[2] = baseline[2]
    expected = abs(f(x) - f(x_i) - f(x_j) + f(x_ij))
    assert got == pytest.approx(expected, abs=1e-12)


def test_baseline_row_scores_zero():
    model = init_model(ModelConfig([3, 6, 4, 1], init_seed=7))
    baseline = np.array([-1.0, -2.0, -2.0])
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert pair_interaction(model, baseline, baseline, i, j) == pytest.approx(0.0, abs=1e-15)


def test_heatmap_symmetric_zero_diagonal_nonnegative():
    ds = _dataset(np.random.default_rng(1).normal(size=(12, 3)))
    model = init_model(ModelConfig([3, 8, 5, 1], init_seed=9))
    forward(model, ds.rows)
    hm = interaction_heatmap(model, ds)
    assert np.array_equal(hm.matrix, hm.matrix.T)
    assert np.all(np.diag(hm.matrix) == 0.0)
    assert np.all(hm.matrix >= 0.0)
    assert hm.sample_count == 12
    assert hm.feature_names == ["g", "u", "v"]


def test_heatmap_additive_model_zero():
    ds = _dataset(np.random.default_rng(2).normal(size=(9, 3)))
    hm = interaction_heatmap(additive, ds)
    assert np.allclose(hm.matrix, 0.0, atol=1e-12)


def test_heatmap_single_row_equals_pair_scores():
    row = np.array([[1.0, 0.5, -0.7]])
    ds = _dataset(row)
    hm = interaction_heatmap(bilinear, ds)
    baseline = ds.schema.baseline_vector()
    expected = pair_interaction(bilinear, row[0], baseline, 1, 2)
    assert hm.matrix[1, 2] == pytest.approx(expected)
    assert hm.sample_count == 1


def test_heatmap_group_filter():
    rows = np.array([[0, 1.0, 1.0], [0, 2.0, 2.0], [1, 3.0, 3.0]])
    ds = _dataset(rows)
    hm = interaction_heatmap(bilinear, ds, group_by=[0], group_key=(0.0,), group_label="a")
    assert hm.sample_count == 2
    assert hm.group_label == "a"
    with pytest.raises(AuditError):
        interaction_heatmap(bilinear, ds, group_by=[0], group_key=(9.0,))


def test_heatmap_protected_mass():
    ds = _dataset(np.random.default_rng(3).normal(size=(6, 3)))
    hm = interaction_heatmap(bilinear, ds)
    mass = hm.protected_mass([0])
    off_diag = [hm.matrix[0, 1], hm.matrix[0, 2]]
    assert mass == pytest.approx(np.mean(off_diag + off_diag))
