import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from causalscope.data import Dataset, categorical
from causalscope.discovery import ChiSquareCi, Cpdag, OracleCi, ci_query, ci_test, cpdag_of, pc_learn
from causalscope.errors import InsufficientDataWarning, OverlappingSets, UnsupportedGraph
from causalscope.graph import parse_graph, random_dag
from causalscope.scm import Mechanism, StructuralModel, fixture, random_model, sample
from conftest import graph
from oracles import equivalence_class_cpdag


def undirected(*pairs):
    return frozenset(frozenset(p) for p in pairs)


def test_chain_and_fork_share_an_undirected_class():
    chain = pc_learn(OracleCi(graph("chain")))
    fork = pc_learn(OracleCi(graph("fork")))
    assert chain == fork
    assert chain.directed == frozenset()
    assert chain.undirected == undirected(("A", "Z"), ("Z", "Y"))


def test_collider_is_fully_directed():
    got = pc_learn(OracleCi(parse_graph("A->Z, Y->Z")))
    assert got.directed == {("A", "Z"), ("Y", "Z")} and not got.undirected
    # the child of a collider inherits an orientation through Meek R1
    got = pc_learn(OracleCi(graph("collider")))
    assert ("Z", "Zp") in got.directed


def test_worked_oracle_pc_matches_equivalence_class():
    g = graph("worked")
    got = pc_learn(OracleCi(g))
    assert got == cpdag_of(g)
    directed, undir = equivalence_class_cpdag(list(g.names), list(g.directed_edges))
    assert got.directed == directed and got.undirected == undir


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_oracle_pc_recovers_cpdag(seed):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, int(rng.integers(2, 8)), edge_prob=0.4)
    got = pc_learn(OracleCi(g))
    assert got == cpdag_of(g)
    assert got.skeleton == frozenset(frozenset(e) for e in g.directed_edges)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_cpdag_of_matches_enumerated_class(seed):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, int(rng.integers(2, 6)), edge_prob=0.5)
    directed, undir = equivalence_class_cpdag(list(g.names), list(g.directed_edges))
    c = cpdag_of(g)
    assert c.directed == directed and c.undirected == undir


def test_oracle_rejects_latent_graphs():
    with pytest.raises(UnsupportedGraph):
        OracleCi(graph("bow_arc"))
    with pytest.raises(UnsupportedGraph):
        cpdag_of(graph("bow_arc"))


def test_ci_query_checks_sets():
    src = OracleCi(graph("chain"))
    assert ci_query(src, "A", "Y", ["Z"])
    assert not ci_query(src, "A", "Y")
    with pytest.raises(OverlappingSets):
        ci_query(src, "A", "A")
    with pytest.raises(OverlappingSets):
        ci_query(src, "A", "Y", ["A"])


def _chain_model():
    return StructuralModel([
        Mechanism("A", 2, (), np.array([0.5, 0.5])),
        Mechanism("Z", 2, ("A",), np.array([[0.8, 0.2], [0.2, 0.8]])),
        Mechanism("Y", 2, ("Z",), np.array([[0.8, 0.2], [0.2, 0.8]])),
    ])


def test_chi_square_on_chain_samples():
    d = sample(_chain_model(), 100_000, seed=1)
    src = ChiSquareCi(d)
    assert not ci_query(src, "A", "Y")
    res = ci_test(src, "A", "Y", ["Z"])
    assert res.independent and res.dof == 2 and not res.low_power
    # against scipy's contingency test, stratum by stratum
    m = d["Z"] == 0
    table = np.histogram2d(d["A"][m], d["Y"][m], bins=2)[0]
    stat = chi2_contingency(table, correction=False)[0]
    m = d["Z"] == 1
    table = np.histogram2d(d["A"][m], d["Y"][m], bins=2)[0]
    stat += chi2_contingency(table, correction=False)[0]
    assert res.statistic == pytest.approx(stat, rel=1e-9)


def test_data_pc_on_collider():
    m = StructuralModel([
        Mechanism("A", 2, (), np.array([0.5, 0.5])),
        Mechanism("Y", 2, (), np.array([0.5, 0.5])),
        Mechanism("Z", 2, ("A", "Y"), np.array([[[0.9, 0.1], [0.4, 0.6]], [[0.4, 0.6], [0.1, 0.9]]])),
    ])
    d = sample(m, 100_000, seed=4)
    got = pc_learn(ChiSquareCi(d))
    assert got.directed == {("A", "Z"), ("Y", "Z")} and not got.undirected
    assert got.report["separating_sets"] == {"A|Y": []}


def test_data_pc_is_deterministic():
    d = sample(fixture("s1"), 5_000, seed=9)
    first = pc_learn(ChiSquareCi(d))
    again = pc_learn(ChiSquareCi(d))
    assert first == again and first.report == again.report
    assert str(first) == str(again)


def test_low_power_flag():
    rng = np.random.default_rng(0)
    d = Dataset({v: rng.integers(0, 4, 30) for v in ("A", "B", "C")}, {v: categorical(4) for v in ("A", "B", "C")})
    with pytest.warns(InsufficientDataWarning):
        res = ci_test(ChiSquareCi(d), "A", "B", ["C"])
    assert res.low_power
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InsufficientDataWarning)
        got = pc_learn(ChiSquareCi(d))
    assert got.report["low_power"]


def test_cpdag_serialisation():
    c = cpdag_of(parse_graph("A->Z, Y->Z, Z->W"))
    doc = c.to_dict()
    kinds = {e["kind"] for e in doc["edges"]}
    assert kinds == {"directed"}
    c = cpdag_of(graph("chain"))
    assert {e["kind"] for e in c.to_dict()["edges"]} == {"undirected"}
    assert str(c) == "A--Z, Y--Z"
    assert isinstance(c, Cpdag)


def test_chi_square_level_is_calibrated():
    # A _||_ D | B holds in A->B->D<-C; the rejection rate should sit near alpha
    rng = np.random.default_rng(17)
    m = random_model(rng, parse_graph("A->B, B->D, C->D"), max_levels=2, concentration=0.5)
    rejected = [not ChiSquareCi(sample(m, 5_000, seed=s)).test("A", "D", ("B",)).independent for s in range(300)]
    assert 0.02 < np.mean(rejected) < 0.09
