import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalscope.errors import DataError, StateSpaceTooLarge, UnknownVariable, ValueOutOfDomain
from causalscope.graph import parse_graph, random_dag
from causalscope.scm import (
    FIXTURES,
    JointTable,
    Mechanism,
    StructuralModel,
    exact_joint,
    fixture,
    intervene,
    random_model,
    sample,
    true_counterfactual_mean,
)
from oracles import loop_joint


def coin(name, p, parents=(), cpt=None):
    return Mechanism(name, 2, tuple(parents), np.array([1 - p, p]) if cpt is None else np.asarray(cpt))


def test_cpt_validation():
    with pytest.raises(DataError):
        StructuralModel([Mechanism("A", 2, (), np.array([0.5, 0.6]))])
    with pytest.raises(DataError):
        StructuralModel([Mechanism("A", 2, (), np.array([0.5, 0.25, 0.25]))])
    with pytest.raises(UnknownVariable):
        StructuralModel([coin("A", 0.5, ["B"], [[0.5, 0.5], [0.5, 0.5]])])


def test_deterministic_sampling():
    m = StructuralModel([coin("A", 1.0), coin("B", 0.0, ["A"], [[0, 1], [1, 0]])])
    d = sample(m, 50, seed=0)
    assert (d["A"] == 1).all() and (d["B"] == 0).all()


def test_bernoulli_frequency_bound():
    d = sample(StructuralModel([coin("A", 0.3)]), 100_000, seed=1)
    assert abs(d["A"].mean() - 0.3) < 3 * np.sqrt(0.3 * 0.7 / 100_000)


def test_mask_hides_unobserved():
    m = StructuralModel([coin("U", 0.5), coin("A", 0.5, ["U"], [[0.9, 0.1], [0.1, 0.9]])], observed=["A"])
    assert sample(m, 10, 0).names == ("A",)
    assert m.graph.unobserved == ("U",)


def test_sampling_is_seeded():
    m = fixture("s3")
    assert sample(m, 500, 4).to_csv() == sample(m, 500, 4).to_csv()
    assert sample(m, 500, 4).to_csv() != sample(m, 500, 5).to_csv()


def test_exact_joint_examples():
    assert np.allclose(exact_joint(StructuralModel([coin("A", 0.4)])).probs, [0.6, 0.4])
    m = StructuralModel([coin("A", 0.5), coin("B", 0.5), coin("C", 0.5)])
    assert np.allclose(exact_joint(m).probs, np.full((2, 2, 2), 0.125))
    s1 = fixture("s1")
    pc = [0.5, 0.3, 0.2]
    pa = [0.2, 0.5, 0.8]
    by_hand = sum(p * q for p, q in zip(pc, pa))  # 0.41
    assert exact_joint(s1).prob({"A": 1}) == pytest.approx(by_hand, abs=1e-12)
    assert by_hand == pytest.approx(0.41)


def test_exact_joint_matches_loop_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        g = random_dag(rng, 5, edge_prob=0.5)
        m = random_model(rng, g, max_levels=3)
        names, probs = loop_joint(m)
        j = exact_joint(m)
        assert np.allclose(j.marginal(names).probs, probs, atol=1e-14)
        assert abs(j.probs.sum() - 1) < 1e-12


def test_state_space_guard():
    mechs = [Mechanism(f"V{i}", 10, (), np.full(10, 0.1)) for i in range(7)]
    with pytest.raises(StateSpaceTooLarge):
        exact_joint(StructuralModel(mechs))


def test_intervene_examples():
    m = StructuralModel([coin("A", 1.0), coin("Y", 0.5, ["A"], [[0.9, 0.1], [0.2, 0.8]])])
    assert np.allclose(exact_joint(intervene(m, {"A": 1})).probs, exact_joint(m).probs)
    s1 = fixture("s1")
    j = exact_joint(intervene(s1, {"A": 1}))
    assert j.conditional_mutual_information(["A"], ["C"]) < 1e-12
    with pytest.raises(ValueOutOfDomain):
        intervene(s1, {"A": 2})
    with pytest.raises(UnknownVariable):
        intervene(s1, {"Q": 0})


def test_s4_null_effect():
    m = fixture("s4")
    y11 = true_counterfactual_mean(m, {"A0": 1, "A1": 1}, "Y")
    y00 = true_counterfactual_mean(m, {"A0": 0, "A1": 0}, "Y")
    assert y11 == y00 == pytest.approx(0.5)


def test_true_counterfactual_mean_examples():
    m = StructuralModel([coin("A", 0.5), coin("Y", 1.0, ["A"], [[0, 1], [0, 1]])])
    assert true_counterfactual_mean(m, {"A": 0}, "Y") == 1.0
    # s1: sum_c E[Y|A=1,c] p(c) = 0.5*0.3 + 0.3*0.5 + 0.2*0.7
    s1 = fixture("s1")
    assert true_counterfactual_mean(s1, {"A": 1}, "Y") == pytest.approx(0.44, abs=1e-12)
    j = exact_joint(s1)
    pc = j.marginal(["C"]).probs
    adjusted = sum(j.mean("Y", {"A": 1, "C": c}) * pc[c] for c in range(3))
    assert true_counterfactual_mean(s1, {"A": 1}, "Y") == pytest.approx(adjusted, abs=1e-12)


def test_intervention_locality():
    m = fixture("s3")
    out = intervene(m, {"A0": 1, "A1": 0})
    for name in m.names:
        if name not in ("A0", "A1"):
            assert np.array_equal(out.mechanism(name).cpt, m.mechanism(name).cpt)
            assert out.mechanism(name).parents == m.mechanism(name).parents


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_randomization_identity(seed):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, 5, edge_prob=0.5)
    roots = [n for n in g.names if not g.parents(n)]
    a = roots[0]
    y = g.topological_order()[-1]
    if y == a:
        return
    m = random_model(rng, g, max_levels=2)
    j = exact_joint(m)
    for v in range(m.levels(a)):
        assert true_counterfactual_mean(m, {a: v}, y) == pytest.approx(j.mean(y, {a: v}), abs=1e-12)


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_sampling_converges(name):
    m = fixture(name)
    d = sample(m, 100_000, seed=21)
    exact = exact_joint(m).marginal(m.observed)
    emp = JointTable.from_dataset(d, m.observed)
    assert emp.total_variation(exact) < 0.02


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_json_round_trip(name):
    m = fixture(name)
    again = StructuralModel.from_dict(m.to_dict())
    assert again.graph == m.graph
    for n in m.names:
        assert np.array_equal(again.mechanism(n).cpt, m.mechanism(n).cpt)


def test_fixture_graph_structures():
    assert set(fixture("s1").graph.directed_edges) == set(parse_graph("C->A, C->Y, A->Y").directed_edges)
    assert fixture("s4").graph.unobserved == ("U",)
    with pytest.raises(UnknownVariable):
        fixture("s9")
