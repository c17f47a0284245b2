"""Constraint-based structure learning (PC) and Markov equivalence classes.

Conditional-independence answers come from either a graph oracle
(d-separation) or a pooled Pearson chi-squared test on categorical data.
Processing order is fixed: pairs and conditioning sets are visited
lexicographically, and the first separating set found is kept.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import chi2

from .data import Dataset, strata
from .errors import GraphError, InsufficientDataWarning, OverlappingSets, UnsupportedGraph
from .graph import CausalGraph, d_separated

UNDIRECTED = "undirected"


@dataclass(frozen=True)
class Cpdag:
    variables: tuple[str, ...]
    directed: frozenset            # (u, v) meaning u -> v
    undirected: frozenset          # frozenset({u, v})
    report: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for u, v in self.directed:
            if frozenset((u, v)) in self.undirected or (v, u) in self.directed:
                raise GraphError(f"pair {u},{v} carries more than one edge")

    def adjacent(self, u: str, v: str) -> bool:
        return (u, v) in self.directed or (v, u) in self.directed or frozenset((u, v)) in self.undirected

    @property
    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.directed) | self.undirected

    def to_dict(self) -> dict:
        nodes = [{"name": v, "kind": "observed"} for v in self.variables]
        edges = [{"kind": "directed", "from": u, "to": v} for u, v in sorted(self.directed)]
        edges += [{"kind": UNDIRECTED, "between": sorted(e)} for e in sorted(self.undirected, key=sorted)]
        return {"nodes": nodes, "edges": edges}

    def __str__(self) -> str:
        parts = [f"{u}->{v}" for u, v in sorted(self.directed)]
        parts += ["{}--{}".format(*sorted(e)) for e in sorted(self.undirected, key=sorted)]
        return ", ".join(parts)


# -- CI sources ---------------------------------------------------------------

@dataclass(frozen=True)
class CiResult:
    independent: bool
    p_value: float = float("nan")
    statistic: float = float("nan")
    dof: int = 0
    low_power: bool = False


class OracleCi:
    """Answers CI queries by d-separation on a fully observed DAG."""

    def __init__(self, graph: CausalGraph):
        if graph.unobserved or graph.bidirected_edges:
            raise UnsupportedGraph("oracle discovery assumes no latent variables or bidirected edges")
        self.graph = graph

    @property
    def variables(self) -> tuple[str, ...]:
        return self.graph.names

    def test(self, x: str, y: str, z: Sequence[str]) -> CiResult:
        return CiResult(d_separated(self.graph, {x}, {y}, set(z)))


class ChiSquareCi:
    """Pearson chi-squared test of X _||_ Y within each observed Z stratum, statistics pooled.

    Zero rows and columns of a stratum's table are dropped; remaining empty
    cells get a 0.5 pseudo-count.  A query is flagged low-power when more
    than 20% of cells have expected count below 5.
    """

    def __init__(self, data: Dataset, alpha: float = 0.05):
        for v in data.names:
            data.levels(v)
        self.data = data
        self.alpha = alpha

    @property
    def variables(self) -> tuple[str, ...]:
        return self.data.names

    def test(self, x: str, y: str, z: Sequence[str]) -> CiResult:
        d = self.data
        kx, ky = d.levels(x), d.levels(y)
        xv, yv = d[x], d[y]
        stat, dof, cells, sparse = 0.0, 0, 0, 0
        for _, mask in strata(d, list(z)):
            table = np.bincount(xv[mask] * ky + yv[mask], minlength=kx * ky).reshape(kx, ky).astype(float)
            table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
            r, c = table.shape
            if r < 2 or c < 2:
                continue
            table[table == 0] = 0.5
            expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
            stat += float(((table - expected) ** 2 / expected).sum())
            dof += (r - 1) * (c - 1)
            cells += table.size
            sparse += int((expected < 5).sum())
        p = float(chi2.sf(stat, dof)) if dof > 0 else 1.0
        low = cells > 0 and sparse / cells > 0.2
        return CiResult(p > self.alpha, p, stat, dof, low)


def ci_test(src, x: str, y: str, z: Iterable[str] = ()) -> CiResult:
    z = tuple(sorted(set(z)))
    if x == y or x in z or y in z:
        raise OverlappingSets("X, Y and Z must be distinct")
    res = src.test(x, y, z)
    if res.low_power:
        warnings.warn(f"sparse table for {x} _||_ {y} | {{{','.join(z)}}}: test has low power",
                      InsufficientDataWarning, stacklevel=2)
    return res


def ci_query(src, x: str, y: str, z: Iterable[str] = ()) -> bool:
    """True when ``x`` and ``y`` are judged independent given ``z``."""
    return ci_test(src, x, y, z).independent


# -- orientation ----------------------------------------------------------------

class _Pdag:
    def __init__(self, variables, skeleton):
        self.variables = tuple(sorted(variables))
        self.directed: set = set()
        self.undirected: set = {frozenset(e) for e in skeleton}

    def adjacent(self, u, v):
        return (u, v) in self.directed or (v, u) in self.directed or frozenset((u, v)) in self.undirected

    def is_undirected(self, u, v):
        return frozenset((u, v)) in self.undirected

    def orient(self, u, v) -> bool:
        e = frozenset((u, v))
        if e not in self.undirected:
            return False
        self.undirected.discard(e)
        self.directed.add((u, v))
        return True

    def neighbours(self, v):
        return sorted(u for u in self.variables if u != v and self.adjacent(u, v))

    def meek(self):
        """Apply rules R1-R3 until nothing changes."""
        changed = True
        while changed:
            changed = False
            for e in sorted(self.undirected, key=sorted):
                if e not in self.undirected:
                    continue
                u, v = sorted(e)
                for a, b in ((u, v), (v, u)):
                    if self._r1(a, b) or self._r2(a, b) or self._r3(a, b):
                        self.orient(a, b)
                        changed = True
                        break

    def _r1(self, a, b):
        # c -> a, a - b, c and b not adjacent  =>  a -> b
        return any((c, a) in self.directed and not self.adjacent(c, b) for c in self.variables if c not in (a, b))

    def _r2(self, a, b):
        # a -> c -> b and a - b  =>  a -> b
        return any((a, c) in self.directed and (c, b) in self.directed for c in self.variables)

    def _r3(self, a, b):
        # a - c1 -> b, a - c2 -> b, c1 and c2 not adjacent  =>  a -> b
        cs = [c for c in self.variables if self.is_undirected(a, c) and (c, b) in self.directed]
        return any(not self.adjacent(c1, c2) for c1, c2 in itertools.combinations(cs, 2))

    def freeze(self, report=None) -> Cpdag:
        return Cpdag(self.variables, frozenset(self.directed), frozenset(self.undirected), report or {})


def cpdag_of(g: CausalGraph) -> Cpdag:
    """Skeleton plus the v-structures of ``g``, closed under the Meek rules."""
    if g.unobserved or g.bidirected_edges:
        raise UnsupportedGraph("equivalence classes are defined here for fully observed DAGs only")
    p = _Pdag(g.names, g.directed_edges)
    for c in g.names:
        for a, b in itertools.combinations(sorted(g.parents(c)), 2):
            if not g.adjacent(a, b):
                p.orient(a, c)
                p.orient(b, c)
    p.meek()
    return p.freeze()


def pc_learn(src, variables: Sequence[str] | None = None, max_cond: int | None = None) -> Cpdag:
    """PC: skeleton by growing conditioning sets, v-structures from separating sets, Meek closure.

    The returned Cpdag's ``report`` lists the number of tests, the separating
    sets and the queries answered with a low-power flag.
    """
    variables = tuple(sorted(variables if variables is not None else src.variables))
    adj = {v: set(variables) - {v} for v in variables}
    sepset: dict[frozenset, tuple[str, ...]] = {}
    low_power: list[dict] = []
    n_tests = 0
    size = 0
    while True:
        if max_cond is not None and size > max_cond:
            break
        if not any(len(adj[x]) - 1 >= size for x in variables):
            break
        for x in variables:
            for y in sorted(adj[x]):
                if y not in adj[x]:
                    continue
                candidates = sorted(adj[x] - {y})
                if len(candidates) < size:
                    continue
                for z in itertools.combinations(candidates, size):
                    n_tests += 1
                    res = src.test(x, y, z)
                    if res.low_power:
                        low_power.append({"x": x, "y": y, "given": list(z)})
                    if res.independent:
                        adj[x].discard(y)
                        adj[y].discard(x)
                        sepset[frozenset((x, y))] = z
                        break
        size += 1

    skeleton = {frozenset((x, y)) for x in variables for y in adj[x]}
    p = _Pdag(variables, skeleton)
    for z in variables:
        for x, y in itertools.combinations(sorted(adj[z]), 2):
            if y in adj[x]:
                continue
            if z not in sepset.get(frozenset((x, y)), ()):
                # a conflicting earlier orientation wins; orient() is a no-op on directed edges
                p.orient(x, z)
                p.orient(y, z)
    p.meek()
    report = {
        "tests": n_tests,
        "separating_sets": {"{}|{}".format(*sorted(k)): list(v) for k, v in sorted(sepset.items(), key=lambda kv: sorted(kv[0]))},
        "low_power": low_power,
    }
    if low_power:
        warnings.warn(f"{len(low_power)} CI test(s) had sparse tables", InsufficientDataWarning, stacklevel=2)
    return p.freeze(report)
