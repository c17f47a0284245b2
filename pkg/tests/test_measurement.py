import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalscope.data import Dataset, categorical
from causalscope.errors import DataError, DimensionMismatch, NegativeMassWarning, SingularMatrix
from causalscope.measurement import (
    MisclassificationMatrix,
    corrected_effect,
    corrected_joint,
    corrupt_joint,
    invert_misclassification,
    load_matrix,
    proxy_adjusted_effect,
)
from causalscope.scm import JointTable, exact_joint, fixture, sample, true_counterfactual_mean
from oracles import inverse_2x2

# frozen from exact enumeration of the s2 fixture
S2_Y1 = 0.55            # 0.1 + 0.2 + 0.5 * 0.5
S2_PROXY_ADJUSTED = 0.6418


def test_flip_inverse_matches_closed_form():
    mat = MisclassificationMatrix.flip(0.1)
    M = invert_misclassification(mat)
    assert np.allclose(M, [[1.125, -0.125], [-0.125, 1.125]], atol=1e-12)
    assert np.allclose(M, inverse_2x2(mat.columns), atol=1e-12)


def test_flip_half_is_singular():
    with pytest.raises(SingularMatrix):
        MisclassificationMatrix.flip(0.5)


def test_matrix_validation():
    with pytest.raises(DataError):
        MisclassificationMatrix(np.array([[0.9, 0.2], [0.2, 0.8]]))
    with pytest.raises(DimensionMismatch):
        MisclassificationMatrix(np.array([[0.5, 0.3, 0.2]]))
    with pytest.raises(DataError):
        MisclassificationMatrix.from_dict({"proxy_levels": 2, "true_levels": 2, "columns": [[1, 0], [0, 1]],
                                           "note": "x"})


def test_matrix_file_round_trip(tmp_path):
    mat = MisclassificationMatrix(np.array([[0.8, 0.1], [0.15, 0.1], [0.05, 0.8]]))
    path = tmp_path / "m.json"
    path.write_text(json.dumps(mat.to_dict()))
    again = load_matrix(path)
    assert np.array_equal(again.columns, mat.columns)
    assert (again.proxy_levels, again.true_levels) == (3, 2)


def test_identity_matrix_reduces_to_proxy_adjustment():
    d = sample(fixture("s2"), 20_000, seed=2)
    got = corrected_effect(d, "Cstar", MisclassificationMatrix(np.eye(2)), "A", "Y").point
    assert got == pytest.approx(proxy_adjusted_effect(d, "Cstar", "A", "Y"), abs=1e-12)


def test_single_level_degenerate():
    d = Dataset({"A": [0, 1, 1, 0], "C": [0, 0, 0, 0], "Y": [0, 1, 1, 1]},
                {"A": categorical(2), "C": categorical(1), "Y": categorical(2)})
    got = corrected_effect(d, "C", MisclassificationMatrix(np.ones((1, 1))), "A", "Y").point
    assert got == pytest.approx(1.0)


def test_dimension_mismatch_against_data():
    d = sample(fixture("s2"), 100, seed=0)
    mat = MisclassificationMatrix(np.array([[0.8, 0.1], [0.15, 0.1], [0.05, 0.8]]))
    with pytest.raises(DimensionMismatch):
        corrected_effect(d, "Cstar", mat, "A", "Y")


def test_negative_mass_warning():
    # an observed table the matrix could not have produced
    obs = JointTable(["Y", "A", "Cs"], np.array([[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.5]]]))
    with pytest.warns(NegativeMassWarning):
        fixed = corrected_joint(obs, MisclassificationMatrix.flip(0.3), "Cs")
    assert fixed.deficit > 0.01
    assert fixed.joint.probs.min() >= 0
    assert fixed.joint.probs.sum() == pytest.approx(1.0, abs=1e-12)


def _random_joint(rng, k_true):
    probs = rng.dirichlet(np.ones(2 * 2 * k_true)).reshape(2, 2, k_true)
    return JointTable(["Y", "A", "C"], probs)


def _random_matrix(rng, k_proxy, k_true):
    while True:
        cols = rng.dirichlet(np.ones(k_proxy), size=k_true).T + 0.0
        cols[:k_true, :k_true] += 2 * np.eye(k_true)
        cols /= cols.sum(axis=0)
        try:
            return MisclassificationMatrix(cols)
        except SingularMatrix:
            continue


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3), st.integers(0, 2))
def test_round_trip_recovers_joint(seed, k_true, extra):
    rng = np.random.default_rng(seed)
    j = _random_joint(rng, k_true)
    mat = _random_matrix(rng, k_true + extra, k_true)
    M = invert_misclassification(mat)
    assert np.allclose(M @ mat.columns, np.eye(k_true), atol=1e-10)
    observed = corrupt_joint(j, mat, "C", "Cs")
    assert observed.probs.sum() == pytest.approx(1.0, abs=1e-12)
    back = corrected_joint(observed, mat, "Cs", "C")
    assert back.deficit < 1e-12
    assert np.abs(back.joint.probs - j.probs).max() < 1e-10
    assert back.raw_total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_correction_preserves_mass_on_samples(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 400))
    d = Dataset({"Y": rng.integers(0, 2, n), "A": rng.integers(0, 2, n), "Cs": rng.integers(0, 2, n)},
                {"Y": categorical(2), "A": categorical(2), "Cs": categorical(2)})
    obs = JointTable.from_dataset(d, ["Y", "A", "Cs"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NegativeMassWarning)
        fixed = corrected_joint(obs, MisclassificationMatrix.flip(0.1), "Cs")
    assert fixed.raw_total == pytest.approx(1.0, abs=1e-12)
    assert abs(fixed.joint.probs.sum() - 1) < 1e-12


def test_s2_fixture_values():
    m = fixture("s2")
    assert true_counterfactual_mean(m, {"A": 1}, "Y") == pytest.approx(S2_Y1, abs=1e-12)
    j = exact_joint(m).marginal(["Y", "A", "Cstar"])
    assert corrected_joint(j, MisclassificationMatrix.flip(0.1), "Cstar").deficit < 1e-12
    pc = j.marginal(["Cstar"]).probs
    by_hand = sum(j.mean("Y", {"A": 1, "Cstar": c}) * pc[c] for c in range(2))
    assert by_hand == pytest.approx(S2_PROXY_ADJUSTED, abs=1e-4)


@pytest.fixture(scope="module")
def s2_data():
    return sample(fixture("s2"), 100_000, seed=5)


def test_corrected_joint_close_to_truth(s2_data):
    truth = exact_joint(fixture("s2")).marginal(["Y", "A", "C"])
    obs = JointTable.from_dataset(s2_data, ["Y", "A", "Cstar"])
    fixed = corrected_joint(obs, MisclassificationMatrix.flip(0.1), "Cstar", "C")
    assert fixed.joint.total_variation(truth) < 0.02


def test_correction_beats_proxy_adjustment(s2_data):
    mat = MisclassificationMatrix.flip(0.1)
    got = corrected_effect(s2_data, "Cstar", mat, "A", "Y")
    assert abs(got.point - S2_Y1) < 0.02
    assert got.diagnostics["corrected"] is True
    naive = proxy_adjusted_effect(s2_data, "Cstar", "A", "Y")
    assert abs(naive - S2_PROXY_ADJUSTED) < 0.01
    assert abs(naive - S2_Y1) > 0.05
