"""Discrete structural causal models: sampling, graph surgery and exact enumeration.

Sampling uses numpy's ``default_rng`` (PCG64).  Each variable consumes one
uniform draw per row, variables in topological order, so a seed pins the
output exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import Dataset, categorical
from .errors import DataError, StateSpaceTooLarge, UnknownVariable, ValueOutOfDomain
from .graph import OBSERVED, UNOBSERVED, CausalGraph, Edge, Variable, build_graph

MAX_STATES = 10**6


@dataclass(frozen=True)
class Mechanism:
    """``cpt[p_1, ..., p_m, v]`` is p(variable = v | parents = p)."""

    name: str
    levels: int
    parents: tuple[str, ...]
    cpt: np.ndarray

    def to_dict(self) -> dict:
        return {"name": self.name, "domain": self.levels, "parents": list(self.parents),
                "cpt": self.cpt.tolist()}


class StructuralModel:
    def __init__(self, mechanisms: Iterable[Mechanism], observed: Iterable[str] | None = None):
        mechs = {}
        for m in mechanisms:
            if m.name in mechs:
                raise DataError(f"duplicate variable '{m.name}'")
            mechs[m.name] = m
        for m in mechs.values():
            for p in m.parents:
                if p not in mechs:
                    raise UnknownVariable(p)
            expect = tuple(mechs[p].levels for p in m.parents) + (m.levels,)
            cpt = np.asarray(m.cpt, dtype=float)
            if cpt.shape != expect:
                raise DataError(f"CPT of '{m.name}' has shape {cpt.shape}, expected {expect}")
            if (cpt < 0).any() or np.abs(cpt.sum(axis=-1) - 1.0).max() > 1e-12:
                raise DataError(f"CPT slices of '{m.name}' must be non-negative and sum to 1")
        self._mech = mechs
        self.observed = tuple(sorted(mechs if observed is None else observed))
        for n in self.observed:
            if n not in mechs:
                raise UnknownVariable(n)
        variables = [Variable(n, OBSERVED if n in self.observed else UNOBSERVED) for n in mechs]
        edges = [Edge(p, m.name) for m in mechs.values() for p in m.parents]
        self.graph: CausalGraph = build_graph(variables, edges)
        self.order = self.graph.topological_order()

    @property
    def names(self) -> tuple[str, ...]:
        return self.order

    def mechanism(self, name: str) -> Mechanism:
        try:
            return self._mech[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def levels(self, name: str) -> int:
        return self.mechanism(name).levels

    @property
    def state_space(self) -> int:
        return math.prod(m.levels for m in self._mech.values())

    def replace(self, name: str, parents: Sequence[str], cpt) -> "StructuralModel":
        """Copy of the model with one mechanism swapped out; the others are shared."""
        old = self.mechanism(name)
        new = Mechanism(name, old.levels, tuple(parents), np.asarray(cpt, dtype=float))
        mechs = [new if n == name else self._mech[n] for n in self._mech]
        return StructuralModel(mechs, self.observed)

    def with_observed(self, observed: Iterable[str]) -> "StructuralModel":
        return StructuralModel(self._mech.values(), observed)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {"variables": [self._mech[n].to_dict() for n in self.order],
                "observed": list(self.observed)}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "StructuralModel":
        extra = set(doc) - {"variables", "observed", "description"}
        if extra:
            raise DataError(f"unknown model keys: {sorted(extra)}")
        mechs = []
        for v in doc["variables"]:
            extra = set(v) - {"name", "domain", "parents", "cpt"}
            if extra:
                raise DataError(f"unknown keys for variable {v.get('name')!r}: {sorted(extra)}")
            mechs.append(Mechanism(v["name"], int(v["domain"]), tuple(v.get("parents", ())),
                                   np.asarray(v["cpt"], dtype=float)))
        return cls(mechs, doc.get("observed"))


def load_model(path) -> StructuralModel:
    with open(path) as fh:
        try:
            return StructuralModel.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None


FIXTURES = ("s1", "s1_target", "s2", "s3", "s4", "s4_l0")


def fixture(name: str) -> StructuralModel:
    """One of the bundled models, e.g. ``fixture("s1")``."""
    if name not in FIXTURES:
        raise UnknownVariable(name)
    text = resources.files("causalscope.fixtures").joinpath(f"{name}.json").read_text()
    return StructuralModel.from_dict(json.loads(text))


# -- sampling ---------------------------------------------------------------

def sample(m: StructuralModel, n: int, seed: int = 0) -> Dataset:
    """Draw ``n`` i.i.d. rows; only the model's observed columns are returned."""
    if n < 1:
        raise DataError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for name in m.order:
        mech = m.mechanism(name)
        u = rng.random(n)
        if mech.parents:
            idx = tuple(values[p] for p in mech.parents)
            cum = np.cumsum(mech.cpt, axis=-1)[idx]
        else:
            cum = np.broadcast_to(np.cumsum(mech.cpt), (n, mech.levels))
        draw = (u[:, None] >= cum[:, :-1]).sum(axis=1)
        values[name] = np.minimum(draw, mech.levels - 1)
    cols = {v: values[v] for v in m.observed}
    schema = {v: categorical(m.levels(v)) for v in m.observed}
    return Dataset(cols, schema)


# -- surgery ----------------------------------------------------------------

def intervene(m: StructuralModel, settings: Mapping[str, int]) -> StructuralModel:
    """Replace each set variable's mechanism by a point mass with no parents."""
    out = m
    for name, value in settings.items():
        levels = m.levels(name)
        if not (isinstance(value, (int, np.integer)) and 0 <= value < levels):
            raise ValueOutOfDomain(f"value {value!r} outside the domain of '{name}' (0..{levels - 1})")
        out = out.replace(name, (), np.eye(levels)[int(value)])
    return out


# -- exact distributions ------------------------------------------------------

class JointTable:
    """Probability table over categorical variables; ``probs`` has one axis per name."""

    def __init__(self, names: Sequence[str], probs):
        self.names = tuple(names)
        self.probs = np.asarray(probs, dtype=float)
        if self.probs.ndim != len(self.names):
            raise DataError("table rank does not match variable count")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariable(name) from None

    def levels(self, name: str) -> int:
        return self.probs.shape[self.axis(name)]

    def marginal(self, names: Sequence[str]) -> "JointTable":
        names = tuple(names)
        keep = [self.axis(n) for n in names]
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        p = self.probs.sum(axis=drop) if drop else self.probs
        # sum keeps remaining axes in original order; reorder to ``names``
        remaining = [self.names[i] for i in range(len(self.names)) if i in keep]
        p = np.transpose(p, [remaining.index(n) for n in names])
        return JointTable(names, p)

    def prob(self, assignment: Mapping[str, int]) -> float:
        sub = self.marginal(tuple(assignment))
        return float(sub.probs[tuple(int(assignment[n]) for n in sub.names)])

    def mean(self, name: str, given: Mapping[str, int] | None = None) -> float:
        given = dict(given or {})
        sub = self.marginal((name, *given))
        idx = (slice(None),) + tuple(int(given[n]) for n in sub.names[1:])
        vec = sub.probs[idx]
        total = vec.sum()
        if total <= 0:
            raise ZeroDivisionError(f"conditioning event {given} has probability 0")
        return float(np.arange(len(vec)) @ vec / total)

    def relabel(self, mapping: Mapping[str, str]) -> "JointTable":
        return JointTable([mapping.get(n, n) for n in self.names], self.probs)

    def total_variation(self, other: "JointTable") -> float:
        other = other.marginal(self.names)
        return 0.5 * float(np.abs(self.probs - other.probs).sum())

    def conditional_mutual_information(self, x: Sequence[str], y: Sequence[str],
                                       z: Sequence[str] = ()) -> float:
        x, y, z = tuple(x), tuple(y), tuple(z)
        pxyz = self.marginal(x + y + z).probs
        nx, ny = len(x), len(y)
        pxz = pxyz.sum(axis=tuple(range(nx, nx + ny)), keepdims=True)
        pyz = pxyz.sum(axis=tuple(range(nx)), keepdims=True)
        pz = pxyz.sum(axis=tuple(range(nx + ny)), keepdims=True)
        mask = pxyz > 0
        ratio = np.ones_like(pxyz)
        num = pxyz * pz
        den = pxz * pyz
        ratio[mask] = num[mask] / den[mask]
        return float(max((pxyz[mask] * np.log(ratio[mask])).sum(), 0.0))

    @classmethod
    def from_dataset(cls, data: Dataset, names: Sequence[str]) -> "JointTable":
        from .data import joint_counts

        counts = joint_counts(data, names)
        return cls(names, counts / data.n)


def exact_joint(m: StructuralModel) -> JointTable:
    """Product of all CPTs over the full state space."""
    if m.state_space > MAX_STATES:
        raise StateSpaceTooLarge(f"state space {m.state_space} exceeds {MAX_STATES}")
    names = m.order
    axis = {n: i for i, n in enumerate(names)}
    probs = np.ones(tuple(m.levels(n) for n in names))
    for n in names:
        mech = m.mechanism(n)
        scope = (*mech.parents, n)
        shape = [1] * len(names)
        for v in scope:
            shape[axis[v]] = m.levels(v)
        # move CPT axes into the joint's axis order before broadcasting
        perm = sorted(range(len(scope)), key=lambda i: axis[scope[i]])
        probs = probs * np.transpose(mech.cpt, perm).reshape(shape)
    return JointTable(names, probs)


def true_counterfactual_mean(m: StructuralModel, settings: Mapping[str, int], outcome: str) -> float:
    """E[outcome] under the intervened model, computed by enumeration."""
    return exact_joint(intervene(m, settings)).mean(outcome)


# -- random models for property tests --------------------------------------

def random_model(rng: np.random.Generator, graph: CausalGraph, max_levels: int = 2,
                 concentration: float = 1.0) -> StructuralModel:
    """Dirichlet-random CPTs over ``graph``'s directed part (bidirected edges ignored)."""
    levels = {n: int(rng.integers(2, max_levels + 1)) for n in graph.names}
    mechs = []
    for n in graph.topological_order():
        parents = tuple(sorted(graph.parents(n)))
        shape = tuple(levels[p] for p in parents)
        cpt = rng.dirichlet(np.full(levels[n], concentration), size=shape) if shape else \
            rng.dirichlet(np.full(levels[n], concentration))
        mechs.append(Mechanism(n, levels[n], parents, cpt))
    observed = [n for n in graph.names if graph.is_observed(n)]
    return StructuralModel(mechs, observed)
