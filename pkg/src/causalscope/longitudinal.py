"""Sequential g-formula and policy values for time-ordered treatments.

A sequential estimand has phases ``(A_0, L_0), (A_1, L_1), ...`` where the
block ``L_t`` is recorded before ``A_t``.  The history before ``A_t`` is
``L_0, A_0, ..., A_{t-1}, L_t``.  A policy assigns each ``A_t`` a
distribution given its history; a static regime is the point-mass policy.

Both estimators share one recursion over histories.  Covariate blocks are
averaged over their empirical conditional distributions given the history,
so only histories seen in the data are visited.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, all_levels, fit_cpt, fit_linear, fit_logistic
from .errors import ContinuousVariable, DataError, PositivityViolation, UnknownVariable, ValueOutOfDomain
from .estimate import EffectEstimate
from .identify import SEQUENTIAL, Estimand
from .scm import JointTable, StructuralModel


@dataclass(frozen=True)
class Regime:
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    @classmethod
    def parse(cls, text: str) -> "Regime":
        try:
            return cls(tuple(int(v) for v in text.split(",")))
        except ValueError:
            raise DataError(f"regime must be comma-separated integers, got {text!r}") from None


@dataclass(frozen=True)
class PhasePolicy:
    """``table[h_1, ..., h_m, a]`` is g(A_t = a | given = h)."""

    given: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != len(self.given) + 1:
            raise DataError(f"policy table rank {t.ndim} does not match {len(self.given)} conditioning variables")
        if (t < 0).any() or np.abs(t.sum(axis=-1) - 1.0).max() > 1e-12:
            raise DataError("policy slices must be non-negative and sum to 1")
        object.__setattr__(self, "given", tuple(self.given))
        object.__setattr__(self, "table", t)

    def probs(self, history: Mapping[str, int]) -> np.ndarray:
        return self.table[tuple(history[g] for g in self.given)]

    def to_dict(self) -> dict:
        table = {",".join(map(str, key)): self.table[key].tolist()
                 for key in all_levels(self.table.shape[:-1])}
        return {"given": list(self.given), "table": table}

    @classmethod
    def from_dict(cls, doc: Mapping, levels: Mapping[str, int], k: int) -> "PhasePolicy":
        extra = set(doc) - {"given", "table"}
        if extra:
            raise DataError(f"unknown policy keys: {sorted(extra)}")
        given = tuple(doc.get("given", ()))
        for v in given:
            if v not in levels:
                raise UnknownVariable(v)
        shape = tuple(levels[v] for v in given)
        table = np.full(shape + (k,), np.nan)
        for key, row in doc["table"].items():
            idx = tuple(int(x) for x in key.split(",")) if key.strip() else ()
            if len(idx) != len(given) or any(not 0 <= i < s for i, s in zip(idx, shape)):
                raise ValueOutOfDomain(f"policy key {key!r} does not index {list(given)}")
            if len(row) != k:
                raise DataError(f"policy row {key!r} has {len(row)} entries, expected {k}")
            table[idx] = row
        if np.isnan(table).any():
            raise DataError("policy table does not cover every conditioning level")
        return cls(given, table)


@dataclass(frozen=True)
class PolicySpec:
    phases: tuple[PhasePolicy, ...]

    @classmethod
    def point_mass(cls, regime: Regime, levels: Sequence[int]) -> "PolicySpec":
        phases = []
        for v, k in zip(regime.values, levels):
            if not 0 <= v < k:
                raise ValueOutOfDomain(f"regime value {v} outside 0..{k - 1}")
            phases.append(PhasePolicy((), np.eye(k)[v]))
        return cls(tuple(phases))

    def to_dict(self) -> dict:
        return {"phases": [p.to_dict() for p in self.phases]}

    @classmethod
    def from_dict(cls, doc, levels: Mapping[str, int], treatments: Sequence[str]) -> "PolicySpec":
        phases = doc["phases"] if isinstance(doc, Mapping) else doc
        if len(phases) != len(treatments):
            raise DataError(f"policy has {len(phases)} phases, estimand has {len(treatments)}")
        return cls(tuple(PhasePolicy.from_dict(p, levels, levels[a]) for p, a in zip(phases, treatments)))


def load_policy(path, levels: Mapping[str, int], treatments: Sequence[str]) -> PolicySpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
    return PolicySpec.from_dict(doc, levels, treatments)


# -- scope checks -------------------------------------------------------------

def histories(est: Estimand) -> list[tuple[str, ...]]:
    """Variables available before each treatment: L_0, A_0, ..., L_t."""
    out, past = [], []
    for a, block in est.phases:
        past += list(block)
        out.append(tuple(past))
        past.append(a)
    return out


def _require_sequential(est: Estimand):
    if est.kind != SEQUENTIAL:
        raise DataError(f"longitudinal estimators need a sequential estimand, got {est.kind}")


def check_policy(policy: PolicySpec, est: Estimand, levels: Mapping[str, int]) -> None:
    """Each g_t may only look at the history before A_t and must match the treatment's domain."""
    _require_sequential(est)
    if len(policy.phases) != len(est.treatments):
        raise DataError(f"policy has {len(policy.phases)} phases, estimand has {len(est.treatments)}")
    for (a, _), hist, g in zip(est.phases, histories(est), policy.phases):
        outside = set(g.given) - set(hist)
        if outside:
            raise DataError(f"policy for {a} conditions on {sorted(outside)}, outside its history {list(hist)}")
        expect = tuple(levels[v] for v in g.given) + (levels[a],)
        if g.table.shape != expect:
            raise DataError(f"policy table for {a} has shape {g.table.shape}, expected {expect}")


# -- the shared recursion -----------------------------------------------------

def _outcome_predictor(data: Dataset, est: Estimand, outcome_model):
    """Returns f(mask, assignment) -> E-hat[Y | full history]."""
    y = est.outcome
    yv = data[y].astype(float)
    if outcome_model == "saturated":
        return lambda mask, assign: float(np.mean(yv[mask]))
    predictors = [v for hist in histories(est) for v in hist] + list(est.treatments)
    predictors = list(dict.fromkeys(predictors))
    if outcome_model == "linear":
        reg = fit_linear(data, y, predictors)
    elif outcome_model == "logistic":
        reg = fit_logistic(data, y, predictors)
    elif callable(outcome_model):
        return lambda mask, assign: float(outcome_model(dict(assign)))
    else:
        raise DataError(f"unknown outcome model {outcome_model!r}")

    def predict(mask, assign):
        cols = {v: np.asarray([assign[v]]) for v in predictors}
        return float(reg.predict_columns(cols, 1)[0])
    return predict


def _evaluate(data: Dataset, est: Estimand, policy: PolicySpec, outcome_model) -> tuple[float, dict]:
    _require_sequential(est)
    for _, block in est.phases:
        for v in block:
            if not data.domain(v).categorical:
                raise ContinuousVariable(f"covariate '{v}' is continuous; discretize it for the sequential g-formula")
    levels = {v: data.levels(v) for v in [*est.summed(), *est.treatments]}
    check_policy(policy, est, levels)
    data.require([est.outcome])
    predict = _outcome_predictor(data, est, outcome_model)
    cols = {v: data[v] for v in levels}
    visited = [0]

    def recurse(t: int, mask: np.ndarray, assign: dict) -> float:
        if t == len(est.phases):
            visited[0] += 1
            return predict(mask, assign)
        a, block = est.phases[t]
        total = 0.0
        for lv, sub in _substrata(cols, block, levels, mask):
            weight = sub.sum() / mask.sum()
            here = {**assign, **dict(zip(block, lv))}
            probs = policy.phases[t].probs(here)
            inner = 0.0
            for av in np.flatnonzero(probs > 0):
                cell = sub & (cols[a] == av)
                if not cell.any():
                    shown = ", ".join(f"{k}={v}" for k, v in here.items())
                    raise PositivityViolation(
                        f"policy gives {a}={av} positive probability after history ({shown}) never seen with it")
                inner += probs[av] * recurse(t + 1, cell, {**here, a: int(av)})
            total += weight * inner
        return total

    point = recurse(0, np.ones(data.n, dtype=bool), {})
    return point, {"histories": visited[0],
                   "outcome_model": outcome_model if isinstance(outcome_model, str) else "custom"}


def _substrata(cols, block, levels, mask):
    if not block:
        yield (), mask
        return
    shape = tuple(levels[v] for v in block)
    flat = np.ravel_multi_index(tuple(cols[v] for v in block), shape)
    for code in np.unique(flat[mask]):
        yield tuple(int(i) for i in np.unravel_index(code, shape)), mask & (flat == code)


def policy_value(data: Dataset, est: Estimand, policy: PolicySpec, outcome_model="saturated") -> EffectEstimate:
    """Plug-in value of ``policy``: covariate blocks from empirical conditionals, treatments from the policy."""
    point, diag = _evaluate(data, est, policy, outcome_model)
    return EffectEstimate(point, "gformula", data.n, diagnostics={**diag, "estimand": "policy"})


def sequential_gformula(data: Dataset, est: Estimand, regime: Regime, outcome_model="saturated") -> EffectEstimate:
    """Plug-in E[Y(a_0, ..., a_K)] for a static regime."""
    _require_sequential(est)
    if len(regime.values) != len(est.treatments):
        raise DataError(f"regime has {len(regime.values)} values for {len(est.treatments)} treatments")
    policy = PolicySpec.point_mass(regime, [data.levels(a) for a in est.treatments])
    point, diag = _evaluate(data, est, policy, outcome_model)
    return EffectEstimate(point, "gformula", data.n,
                          diagnostics={**diag, "regime": list(regime.values)})


def observational_policy(data: Dataset, est: Estimand) -> PolicySpec:
    """Empirical p-hat(A_t | history); histories never observed get a uniform row."""
    _require_sequential(est)
    phases = []
    for (a, _), hist in zip(est.phases, histories(est)):
        cpt = fit_cpt(data, a, hist, alpha=0.0)
        phases.append(PhasePolicy(hist, cpt.table))
    return PolicySpec(tuple(phases))


def naive_regression_contrast(data: Dataset, treatments: Sequence[str], y: str) -> float:
    """E-hat[Y | all treatments 1] - E-hat[Y | all treatments 0] from a linear regression on the treatments alone.

    Deliberately ignores covariates; kept as the biased comparator.
    """
    treatments = list(treatments)
    for a in treatments:
        if data.levels(a) != 2:
            raise DataError(f"'{a}' must be binary")
    for v in (0, 1):
        if not np.all([data[a] == v for a in treatments], axis=0).any():
            raise PositivityViolation(f"no rows with every treatment at {v}")
    reg = fit_linear(data, y, treatments)
    ones = reg.predict_columns({a: np.ones(1) for a in treatments}, 1)[0]
    zeros = reg.predict_columns({a: np.zeros(1) for a in treatments}, 1)[0]
    return float(ones - zeros)


# -- exact functionals and the rewired model -------------------------------------

def _sequence(est: Estimand) -> list[str]:
    seq = []
    for a, block in est.phases:
        seq += [*block, a]
    return seq


def policy_weights(joint: JointTable, est: Estimand, policy: PolicySpec) -> tuple[list[str], np.ndarray]:
    """p_g over the history variables: product of p(l_t | past) and g_t(a_t | past)."""
    _require_sequential(est)
    seq = _sequence(est)
    levels = {v: joint.levels(v) for v in seq}
    check_policy(policy, est, levels)
    P = joint.marginal(seq).probs
    prefix = [P.sum(axis=tuple(range(j, len(seq)))) if j < len(seq) else P for j in range(len(seq) + 1)]
    phase_of = {a: t for t, (a, _) in enumerate(est.phases)}
    weights = np.zeros(P.shape)
    for idx in all_levels(P.shape):
        w = 1.0
        assign = {}
        for j, v in enumerate(seq):
            assign[v] = idx[j]
            if v in phase_of:
                w *= policy.phases[phase_of[v]].probs(assign)[idx[j]]
            else:
                denom = prefix[j][idx[:j]]
                w *= prefix[j + 1][idx[:j + 1]] / denom if denom > 0 else 0.0
            if w == 0.0:
                break
        weights[idx] = w
    return seq, weights


def policy_functional(joint: JointTable, est: Estimand, policy: PolicySpec) -> float:
    """Exact-table version of the policy value: sum over histories of p_g times E[Y | history]."""
    seq, weights = policy_weights(joint, est, policy)
    full = joint.marginal((*seq, est.outcome)).probs
    p_hist = full.sum(axis=-1)
    support = weights > 0
    if (p_hist[support] <= 0).any():
        raise PositivityViolation("policy puts mass on a history with zero probability")
    ey = np.zeros(p_hist.shape)
    ey[support] = (full @ np.arange(full.shape[-1]))[support] / p_hist[support]
    return float(np.sum(weights * ey))


def regime_functional(joint: JointTable, est: Estimand, regime: Regime) -> float:
    levels = [joint.levels(a) for a in est.treatments]
    return policy_functional(joint, est, PolicySpec.point_mass(regime, levels))


def rewire(m: StructuralModel, est: Estimand, policy: PolicySpec) -> StructuralModel:
    """The model in which each treatment is drawn from its policy instead of its own mechanism."""
    _require_sequential(est)
    levels = {v: m.levels(v) for v in _sequence(est)}
    check_policy(policy, est, levels)
    out = m
    for (a, _), g in zip(est.phases, policy.phases):
        out = out.replace(a, g.given, g.table)
    return out
