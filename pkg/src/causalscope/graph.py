"""Mixed causal graphs, reachability, d-separation and SWIG construction.

A :class:`CausalGraph` holds observed and unobserved variables connected by
directed (``A -> Y``) and bidirected (``A <-> Y``) edges.  The directed part
must be acyclic.  Bidirected edges place an arrowhead at both endpoints, so a
node entered by two arrowheads on a path is a collider whatever the mix of
edge kinds (m-separation).
"""

from __future__ import annotations

import heapq
import itertools
import json
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    CycleDetected,
    DanglingEdge,
    DuplicateName,
    GraphError,
    InterveningOnUnobserved,
    OverlappingSets,
    SelfLoop,
    UnknownVariable,
)

OBSERVED = "observed"
UNOBSERVED = "unobserved"
DIRECTED = "directed"
BIDIRECTED = "bidirected"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = OBSERVED

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise GraphError(f"invalid variable name {self.name!r}")
        if self.kind not in (OBSERVED, UNOBSERVED):
            raise GraphError(f"invalid variable kind {self.kind!r}")


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    kind: str = DIRECTED

    def __post_init__(self):
        if self.kind not in (DIRECTED, BIDIRECTED):
            raise GraphError(f"invalid edge kind {self.kind!r}")

    def key(self):
        if self.kind == DIRECTED:
            return (DIRECTED, self.source, self.target)
        return (BIDIRECTED, frozenset((self.source, self.target)))


class CausalGraph:
    """Immutable mixed graph; construct through :func:`build_graph`."""

    def __init__(self, variables: Mapping[str, Variable], directed, bidirected, order):
        self._variables = dict(variables)
        self._directed = frozenset(directed)
        self._bidirected = frozenset(bidirected)
        self._order = tuple(order)
        self._parents = {v: set() for v in self._variables}
        self._children = {v: set() for v in self._variables}
        self._spouses = {v: set() for v in self._variables}
        for u, v in self._directed:
            self._children[u].add(v)
            self._parents[v].add(u)
        for pair in self._bidirected:
            u, v = sorted(pair)
            self._spouses[u].add(v)
            self._spouses[v].add(u)

    # -- basic accessors ----------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._variables))

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(self._variables[n] for n in self.names)

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if self._variables[n].kind == OBSERVED)

    @property
    def unobserved(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if self._variables[n].kind == UNOBSERVED)

    @property
    def directed_edges(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted(self._directed))

    @property
    def bidirected_edges(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted(tuple(sorted(p)) for p in self._bidirected))

    @property
    def edges(self) -> tuple[Edge, ...]:
        out = [Edge(u, v, DIRECTED) for u, v in self.directed_edges]
        out += [Edge(u, v, BIDIRECTED) for u, v in self.bidirected_edges]
        return tuple(out)

    def __contains__(self, name) -> bool:
        return name in self._variables

    def __len__(self) -> int:
        return len(self._variables)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return (
            self._variables == other._variables
            and self._directed == other._directed
            and self._bidirected == other._bidirected
        )

    def __hash__(self):
        return hash((frozenset(self._variables.values()), self._directed, self._bidirected))

    def __repr__(self) -> str:
        parts = [f"{u}->{v}" for u, v in self.directed_edges]
        parts += [f"{u}<->{v}" for u, v in self.bidirected_edges]
        hidden = ",".join(self.unobserved)
        return f"CausalGraph({', '.join(parts)}; unobserved={{{hidden}}})"

    def kind(self, name: str) -> str:
        return self._variable(name).kind

    def is_observed(self, name: str) -> bool:
        return self._variable(name).kind == OBSERVED

    def _variable(self, name: str) -> Variable:
        try:
            return self._variables[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def check(self, names: Iterable[str]) -> frozenset[str]:
        out = frozenset(names)
        for n in sorted(out):
            self._variable(n)
        return out

    def parents(self, name: str) -> frozenset[str]:
        self._variable(name)
        return frozenset(self._parents[name])

    def children(self, name: str) -> frozenset[str]:
        self._variable(name)
        return frozenset(self._children[name])

    def spouses(self, name: str) -> frozenset[str]:
        self._variable(name)
        return frozenset(self._spouses[name])

    def has_edge(self, u: str, v: str, kind: str = DIRECTED) -> bool:
        if kind == DIRECTED:
            return (u, v) in self._directed
        return frozenset((u, v)) in self._bidirected

    def adjacent(self, u: str, v: str) -> bool:
        return (u, v) in self._directed or (v, u) in self._directed or frozenset((u, v)) in self._bidirected

    # -- reachability -------------------------------------------------------

    def _closure(self, start, step) -> frozenset[str]:
        seen = set(start)
        queue = deque(start)
        while queue:
            node = queue.popleft()
            for nxt in step[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return frozenset(seen)

    def ancestors(self, names: Iterable[str]) -> frozenset[str]:
        """Reflexive-transitive closure along directed edges, backwards."""
        return self._closure(self.check(names), self._parents)

    def descendants(self, names: Iterable[str]) -> frozenset[str]:
        return self._closure(self.check(names), self._children)

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    # -- derived graphs -----------------------------------------------------

    def without_edges_out_of(self, names: Iterable[str]) -> "CausalGraph":
        drop = self.check(names)
        directed = [(u, v) for u, v in self._directed if u not in drop]
        return CausalGraph(self._variables, directed, self._bidirected, self._order)

    def with_edges(self, directed=(), bidirected=()) -> "CausalGraph":
        edges = list(self.edges)
        edges += [Edge(u, v, DIRECTED) for u, v in directed]
        edges += [Edge(u, v, BIDIRECTED) for u, v in bidirected]
        return build_graph(self.variables, edges)

    def d_separated(self, x, y, z=()) -> bool:
        return d_separated(self, x, y, z)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = [{"name": v.name, "kind": v.kind} for v in self.variables]
        edges = [{"kind": DIRECTED, "from": u, "to": v} for u, v in self.directed_edges]
        edges += [{"kind": BIDIRECTED, "between": [u, v]} for u, v in self.bidirected_edges]
        return {"nodes": nodes, "edges": edges}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def build_graph(variables: Iterable[Variable], edges: Iterable[Edge]) -> CausalGraph:
    """Validate variables and edges and return an immutable graph.

    Raises DuplicateName, DanglingEdge, SelfLoop or CycleDetected.
    """
    table: dict[str, Variable] = {}
    for var in variables:
        if var.name in table:
            raise DuplicateName(f"duplicate variable name '{var.name}'")
        table[var.name] = var

    directed, bidirected = set(), set()
    for e in edges:
        for end in (e.source, e.target):
            if end not in table:
                raise DanglingEdge(f"edge {e.source}-{e.target} refers to unknown variable '{end}'")
        if e.source == e.target:
            raise SelfLoop(f"self-loop on '{e.source}'")
        if e.kind == DIRECTED:
            if (e.source, e.target) in directed:
                raise GraphError(f"duplicate directed edge {e.source}->{e.target}")
            directed.add((e.source, e.target))
        else:
            pair = frozenset((e.source, e.target))
            if pair in bidirected:
                raise GraphError(f"duplicate bidirected edge {e.source}<->{e.target}")
            bidirected.add(pair)

    order = _kahn(table, directed)
    return CausalGraph(table, directed, bidirected, order)


def _kahn(table, directed) -> list[str]:
    indegree = {v: 0 for v in table}
    children = {v: [] for v in table}
    for u, v in directed:
        indegree[v] += 1
        children[u].append(v)
    heap = [v for v, d in indegree.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        node = heapq.heappop(heap)
        order.append(node)
        for c in children[node]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != len(table):
        stuck = sorted(v for v, d in indegree.items() if d > 0)
        raise CycleDetected(f"directed cycle among {stuck}")
    return order


_EDGE_RE = re.compile(r"^\s*([^\s<>-]+)\s*(<->|->|<-)\s*([^\s<>-]+)\s*$")


def parse_graph(spec: str, unobserved: Iterable[str] = (), nodes: Iterable[str] = ()) -> CausalGraph:
    """Build a graph from a compact edge list such as ``"C->A, C->Y, A->Y, C<->Y"``.

    Chains are allowed (``"A->Z->Y"``).  Isolated nodes go in ``nodes``.
    """
    hidden = set(unobserved)
    names: list[str] = []
    edges: list[Edge] = []

    def note(n):
        if n not in names:
            names.append(n)

    for n in nodes:
        note(n)
    for chunk in filter(None, (c.strip() for c in spec.split(","))):
        tokens = re.split(r"\s*(<->|->|<-)\s*", chunk)
        if len(tokens) == 1:
            note(tokens[0])
            continue
        for i in range(0, len(tokens) - 2, 2):
            a, op, b = tokens[i], tokens[i + 1], tokens[i + 2]
            if not _EDGE_RE.match(f"{a}{op}{b}"):
                raise GraphError(f"cannot parse edge '{a}{op}{b}'")
            note(a)
            note(b)
            if op == "->":
                edges.append(Edge(a, b))
            elif op == "<-":
                edges.append(Edge(b, a))
            else:
                edges.append(Edge(a, b, BIDIRECTED))
    for n in hidden:
        note(n)
    variables = [Variable(n, UNOBSERVED if n in hidden else OBSERVED) for n in names]
    return build_graph(variables, edges)


_NODE_KEYS = {"name", "kind"}
_GRAPH_KEYS = {"nodes", "edges"}


def graph_from_dict(doc: Mapping) -> CausalGraph:
    """Parse the JSON graph document; unknown keys are rejected."""
    if not isinstance(doc, Mapping):
        raise GraphError("graph document must be a JSON object")
    extra = set(doc) - _GRAPH_KEYS
    if extra:
        raise GraphError(f"unknown graph keys: {sorted(extra)}")
    variables = []
    for node in doc.get("nodes", []):
        extra = set(node) - _NODE_KEYS
        if extra:
            raise GraphError(f"unknown node keys: {sorted(extra)}")
        if "name" not in node:
            raise GraphError("node without name")
        variables.append(Variable(node["name"], node.get("kind", OBSERVED)))
    edges = []
    for e in doc.get("edges", []):
        kind = e.get("kind", DIRECTED)
        if kind == DIRECTED:
            if set(e) - {"kind", "from", "to"} or not {"from", "to"} <= set(e):
                raise GraphError(f"malformed directed edge {dict(e)}")
            edges.append(Edge(e["from"], e["to"], DIRECTED))
        elif kind == BIDIRECTED:
            if set(e) - {"kind", "between"} or len(e.get("between", ())) != 2:
                raise GraphError(f"malformed bidirected edge {dict(e)}")
            u, v = e["between"]
            edges.append(Edge(u, v, BIDIRECTED))
        else:
            raise GraphError(f"unknown edge kind {kind!r}")
    return build_graph(variables, edges)


def load_graph(path) -> CausalGraph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: invalid JSON ({exc})") from None
    return graph_from_dict(doc)


# -- free-function interface ------------------------------------------------

def ancestors(g: CausalGraph, names: Iterable[str]) -> frozenset[str]:
    return g.ancestors(names)


def descendants(g: CausalGraph, names: Iterable[str]) -> frozenset[str]:
    return g.descendants(names)


def topological_order(g: CausalGraph) -> tuple[str, ...]:
    return g.topological_order()


def _as_set(x) -> frozenset[str]:
    if isinstance(x, str):
        return frozenset([x])
    return frozenset(x)


def d_separated(g: CausalGraph, x, y, z=()) -> bool:
    """True iff every path between ``x`` and ``y`` is blocked given ``z``.

    Reachability search over (node, entered-with-arrowhead) states, linear in
    the number of edges.
    """
    xs, ys, zs = _as_set(x), _as_set(y), _as_set(z)
    for s in (xs, ys, zs):
        g.check(s)
    if not xs or not ys:
        raise GraphError("d-separation needs non-empty X and Y")
    if xs & ys or xs & zs or ys & zs:
        raise OverlappingSets("X, Y and Z must be pairwise disjoint")

    opens_collider = g.ancestors(zs)
    # state: (node, arrowhead_at_node)
    queue = deque((node, False) for node in xs)
    seen = set(queue)
    while queue:
        node, head = queue.popleft()
        if node in ys:
            return False
        conditioned = node in zs
        moves = []
        if not head:
            # tail at node: non-collider whichever way we leave
            if not conditioned:
                moves += [(p, False) for p in g._parents[node]]
                moves += [(c, True) for c in g._children[node]]
                moves += [(s, True) for s in g._spouses[node]]
        else:
            if not conditioned:
                moves += [(c, True) for c in g._children[node]]
            if node in opens_collider:
                moves += [(p, False) for p in g._parents[node]]
                moves += [(s, True) for s in g._spouses[node]]
        for state in moves:
            if state not in seen:
                seen.add(state)
                queue.append(state)
    return True


# -- SWIGs --------------------------------------------------------------------

def fixed_node(name: str) -> str:
    """Identifier of the fixed (intervention) half of a split node."""
    return f"{name}:="


@dataclass(frozen=True)
class Swig:
    """Node-split graph for a set of interventions.

    ``graph`` keeps the base names for the random halves and uses
    :func:`fixed_node` identifiers for the fixed halves; ``labels`` maps every
    identifier to its display form, e.g. ``Y(a)`` or ``a``.
    """

    base: CausalGraph
    interventions: Mapping[str, str]
    graph: CausalGraph
    labels: Mapping[str, str]
    fixed: frozenset = field(default_factory=frozenset)

    @property
    def node_labels(self) -> frozenset[str]:
        return frozenset(self.labels.values())

    @property
    def counterfactual_nodes(self) -> frozenset[str]:
        """Random nodes whose label carries at least one intervention."""
        return frozenset(n for n, lab in self.labels.items() if n not in self.fixed and lab != n)

    def label(self, name: str) -> str:
        return self.labels[name]

    def d_separated(self, x, y, z=()) -> bool:
        return d_separated(self.graph, x, y, z)

    def labelled_edges(self) -> list[tuple[str, str, str]]:
        out = [(self.labels[u], self.labels[v], DIRECTED) for u, v in self.graph.directed_edges]
        out += [(self.labels[u], self.labels[v], BIDIRECTED) for u, v in self.graph.bidirected_edges]
        return out

    def to_dict(self) -> dict:
        nodes = [
            {"id": n, "label": self.labels[n], "fixed": n in self.fixed}
            for n in self.graph.names
        ]
        edges = [{"kind": DIRECTED, "from": self.labels[u], "to": self.labels[v]}
                 for u, v in self.graph.directed_edges]
        edges += [{"kind": BIDIRECTED, "between": [self.labels[u], self.labels[v]]}
                  for u, v in self.graph.bidirected_edges]
        return {"interventions": dict(self.interventions), "nodes": nodes, "edges": edges}


def construct_swig(g: CausalGraph, interventions: Mapping[str, str]) -> Swig:
    """Split each intervened node and relabel the descendants.

    The random half keeps every incoming edge (bidirected ones included), the
    fixed half takes every outgoing directed edge.  A node is labelled with
    the values of the intervened variables that are its proper ancestors.
    """
    interventions = {k: str(v) for k, v in interventions.items()}
    for name in sorted(interventions):
        if not g.is_observed(name):
            raise InterveningOnUnobserved(f"cannot intervene on unobserved variable '{name}'")

    rank = {n: i for i, n in enumerate(g.topological_order())}
    inherited: dict[str, list[str]] = {n: [] for n in g.names}
    for a in sorted(interventions, key=rank.__getitem__):
        for d in g.descendants([a]) - {a}:
            inherited[d].append(a)

    labels = {}
    for n in g.names:
        vals = [interventions[a] for a in inherited[n]]
        labels[n] = f"{n}({','.join(vals)})" if vals else n
    fixed = set()
    for a, val in interventions.items():
        fid = fixed_node(a)
        if fid in g:
            raise GraphError(f"node name '{fid}' collides with SWIG fixed node")
        labels[fid] = val
        fixed.add(fid)

    variables = list(g.variables) + [Variable(fixed_node(a)) for a in sorted(interventions)]
    edges = []
    for u, v in g.directed_edges:
        src = fixed_node(u) if u in interventions else u
        edges.append(Edge(src, v))
    edges += [Edge(u, v, BIDIRECTED) for u, v in g.bidirected_edges]
    graph = build_graph(variables, edges)
    return Swig(g, dict(interventions), graph, labels, frozenset(fixed))


# -- random graphs for property tests ---------------------------------------

def random_dag(rng: np.random.Generator, n_nodes: int, edge_prob: float = 0.4,
               bidirected_prob: float = 0.0, unobserved_prob: float = 0.0,
               prefix: str = "V") -> CausalGraph:
    """Random graph whose directed part respects the index order ``V0 < V1 < ...``."""
    names = [f"{prefix}{i}" for i in range(n_nodes)]
    kinds = [UNOBSERVED if rng.random() < unobserved_prob else OBSERVED for _ in names]
    edges = []
    for i, j in itertools.combinations(range(n_nodes), 2):
        if rng.random() < edge_prob:
            edges.append(Edge(names[i], names[j]))
        if bidirected_prob and rng.random() < bidirected_prob:
            edges.append(Edge(names[i], names[j], BIDIRECTED))
    return build_graph([Variable(n, k) for n, k in zip(names, kinds)], edges)
