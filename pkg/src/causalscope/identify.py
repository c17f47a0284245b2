"""Turn a causal query on a graph into an adjustment functional, or say why not.

Coverage is backdoor adjustment (single treatment), transport of a backdoor
functional to a target population, and the sequential g-formula for
time-ordered treatments.  Anything else is reported as not identified.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    BackdoorViolation,
    GraphError,
    OrderViolation,
    SequentialIgnorabilityFails,
    UnobservedInW,
)
from .graph import CausalGraph, construct_swig, d_separated, fixed_node

RANDOMIZED = "randomized"
BACKDOOR = "backdoor"
TRANSPORT = "transport"
SEQUENTIAL = "sequential"
NOT_IDENTIFIED = "not_identified"

LATENT_BACKDOOR = "latent backdoor path, backdoor criterion inapplicable"


def value_label(name: str) -> str:
    return name.lower()


@dataclass(frozen=True)
class Factor:
    """``p(target | given)``; ``fixed`` entries appear as ``name=value``."""

    target: tuple[str, ...]
    given: tuple[str, ...] = ()
    fixed: tuple[tuple[str, str], ...] = ()
    population: str = ""

    def text(self) -> str:
        cond = [f"{n}={v}" for n, v in self.fixed] + list(self.given)
        star = "*" if self.population == "target" else ""
        head = ",".join(self.target)
        return f"p{star}({head}|{','.join(cond)})" if cond else f"p{star}({head})"


@dataclass(frozen=True)
class Estimand:
    kind: str
    treatments: tuple[str, ...] = ()
    values: tuple[str, ...] = ()
    outcome: str = ""
    adjustment: tuple[str, ...] = ()
    phases: tuple[tuple[str, tuple[str, ...]], ...] = ()
    reason: str = ""
    assumptions: tuple[str, ...] = field(default=())

    @property
    def identified(self) -> bool:
        return self.kind != NOT_IDENTIFIED

    @property
    def treatment(self) -> str:
        return self.treatments[0]

    def summed(self) -> tuple[str, ...]:
        if self.kind == SEQUENTIAL:
            return tuple(v for _, block in self.phases for v in block)
        return self.adjustment

    def factors(self) -> tuple[Factor, ...]:
        """Structural form of the functional: the outcome factor first, then the weights."""
        if self.kind == NOT_IDENTIFIED:
            return ()
        fixed = tuple(zip(self.treatments, self.values))
        if self.kind == SEQUENTIAL:
            covs = self.summed()
            out = [Factor((self.outcome,), covs, fixed)]
            for t, (_, block) in enumerate(self.phases):
                if not block:
                    continue
                past_fixed = fixed[:t]
                past_covs = tuple(v for _, b in self.phases[:t] for v in b)
                out.append(Factor(block, past_covs, past_fixed))
            return tuple(out)
        source = "source" if self.kind == TRANSPORT else ""
        target = "target" if self.kind == TRANSPORT else ""
        out = [Factor((self.outcome,), self.adjustment, fixed, source)]
        if self.adjustment:
            out.append(Factor(self.adjustment, (), (), target))
        return tuple(out)

    def functional(self):
        """Population-free structure used to compare estimands of different kinds."""
        return (self.summed(), tuple(
            Factor(f.target, f.given, f.fixed) for f in self.factors()))

    def text(self) -> str:
        if self.kind == NOT_IDENTIFIED:
            return f"not identified: {self.reason}"
        body = " ".join(f.text() for f in self.factors())
        summed = self.summed()
        return f"sum_{{{','.join(summed)}}} {body}" if summed else body

    def as_single_population(self) -> "Estimand":
        """A transport estimand read with p* = p is the plain backdoor estimand."""
        if self.kind != TRANSPORT:
            return self
        return Estimand(BACKDOOR, self.treatments, self.values, self.outcome, self.adjustment)

    def __str__(self) -> str:
        return self.text()


def _observed_endpoints(g: CausalGraph, a: str, y: str):
    for v in (a, y):
        if not g.is_observed(v):
            raise UnobservedInW(f"'{v}' is unobserved")
    if a == y:
        raise GraphError("treatment and outcome must differ")


def verify_backdoor(g: CausalGraph, a: str, y: str, w: Iterable[str]) -> bool:
    """Backdoor criterion: no member of ``w`` descends from ``a`` and ``w``
    blocks every path into ``a`` that ends at ``y``."""
    w = g.check(w)
    g.check([a, y])
    _observed_endpoints(g, a, y)
    for v in sorted(w):
        if not g.is_observed(v):
            raise UnobservedInW(f"adjustment set contains unobserved '{v}'")
    if a in w or y in w:
        raise GraphError("adjustment set must exclude treatment and outcome")
    if w & g.descendants([a]):
        return False
    return d_separated(g.without_edges_out_of([a]), {a}, {y}, w)


def backdoor_paths_blocked(g: CausalGraph, a: str, y: str, w: Iterable[str]) -> bool:
    """Independent check of the blocking half of the criterion by path enumeration.

    Walks every simple path from ``a`` to ``y`` whose first edge points into
    ``a`` and applies the chain / fork / collider rules triple by triple.
    Exponential; intended for small graphs and tests.
    """
    w = frozenset(w)
    open_colliders = g.ancestors(w) if w else frozenset()

    # edges are described from the current node: (nxt, head_at_nxt, head_at_cur)
    def steps(node):
        for p in g.parents(node):
            yield p, False, True
        for c in g.children(node):
            yield c, True, False
        for s in g.spouses(node):
            yield s, True, True

    def walk(node, head_in, visited):
        if node == y:
            return True
        for nxt, head_nxt, head_cur in steps(node):
            if nxt in visited:
                continue
            collider = head_in and head_cur
            if collider and node not in open_colliders:
                continue
            if not collider and node in w:
                continue
            if walk(nxt, head_nxt, visited | {nxt}):
                return True
        return False

    for first, head_nxt, head_cur in steps(a):
        if not head_cur:
            continue  # not an arrow into a
        if first == y:
            return False
        if walk(first, head_nxt, frozenset({a, first})):
            return False
    return True


def find_backdoor_set(g: CausalGraph, a: str, y: str) -> tuple[str, ...] | None:
    """Smallest observed backdoor set, ties broken lexicographically; None if none exists."""
    g.check([a, y])
    _observed_endpoints(g, a, y)
    banned = g.descendants([a]) | {y}
    candidates = sorted(v for v in g.observed if v not in banned)
    for size in range(len(candidates) + 1):
        for subset in itertools.combinations(candidates, size):
            if verify_backdoor(g, a, y, subset):
                return subset
    return None


def identify_effect(g: CausalGraph, a: str, y: str, value: str | None = None) -> Estimand:
    g.check([a, y])
    _observed_endpoints(g, a, y)
    value = value_label(a) if value is None else str(value)
    if not g.parents(a) and not g.spouses(a):
        return Estimand(RANDOMIZED, (a,), (value,), y)
    w = find_backdoor_set(g, a, y)
    if w is None:
        return Estimand(NOT_IDENTIFIED, (a,), (value,), y, reason=LATENT_BACKDOOR)
    return Estimand(BACKDOOR, (a,), (value,), y, tuple(w))


def identify_transport(g: CausalGraph, a: str, y: str, w: Iterable[str], value: str | None = None,
                       shared_mechanism: bool = True) -> Estimand:
    """Target-population functional: sum_W p(Y | A=a, W) p*(W).

    ``shared_mechanism`` records the untestable assumption that
    p(Y | A, W) is the same in both populations.
    """
    w = tuple(sorted(w))
    value = value_label(a) if value is None else str(value)
    if not verify_backdoor(g, a, y, w):
        raise BackdoorViolation(f"{{{','.join(w)}}} is not a backdoor set for {a} -> {y}")
    if not shared_mechanism:
        return Estimand(NOT_IDENTIFIED, (a,), (value,), y, w,
                        reason="transport needs p(Y|A,W) shared across populations")
    return Estimand(TRANSPORT, (a,), (value,), y, w,
                    assumptions=("p(Y|A,W) = p*(Y|A,W)",))


def identify_sequential(g: CausalGraph, phases: Sequence[tuple[str, Iterable[str]]], y: str,
                        values: Sequence[str] | None = None) -> Estimand:
    """Sequential g-formula for phases ``[(A_0, L_0), (A_1, L_1), ...]``.

    ``L_t`` is the covariate block recorded before ``A_t``.  Sequential
    ignorability is checked on the SWIG that intervenes on every treatment:
    the random half of each ``A_t`` must be d-separated from the outcome given
    the covariates and treatments recorded before it (fixed halves count as
    constants).
    """
    phases = tuple((a, tuple(block)) for a, block in phases)
    treatments = tuple(a for a, _ in phases)
    values = tuple(value_label(a) for a in treatments) if values is None else tuple(map(str, values))
    if len(values) != len(treatments):
        raise GraphError("one value label per treatment phase")
    sequence = []
    for a, block in phases:
        sequence += list(block) + [a]
    sequence.append(y)
    g.check(sequence)
    if len(set(sequence)) != len(sequence):
        raise GraphError("a variable appears twice in the phase list")
    for v in sequence:
        if not g.is_observed(v):
            raise UnobservedInW(f"phase variable '{v}' is unobserved")

    for i, v in enumerate(sequence):
        clash = g.ancestors([v]) & set(sequence[i + 1:])
        if clash:
            raise OrderViolation(f"'{v}' is caused by later phase variable(s) {sorted(clash)}")

    swig = construct_swig(g, dict(zip(treatments, values)))
    constants = {fixed_node(a) for a in treatments}
    past: list[str] = []
    for a, block in phases:
        past += list(block)
        if not swig.d_separated({a}, {y}, set(past) | constants):
            raise SequentialIgnorabilityFails(
                f"{a} is not independent of {swig.label(y)} given its recorded past "
                f"{{{','.join(past)}}}")
        past.append(a)

    return Estimand(SEQUENTIAL, treatments, values, y, phases=phases)
