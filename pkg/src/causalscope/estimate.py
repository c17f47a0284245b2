"""Point estimates and bootstrap intervals for identified single-treatment estimands."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import Dataset, fit_cpt, fit_linear, fit_logistic, strata
from .errors import (
    ContinuousVariable,
    DataError,
    EstimatorFailedOnResample,
    PositivityViolation,
    SchemaMismatch,
)
from .identify import BACKDOOR, RANDOMIZED, TRANSPORT, Estimand
from .scm import JointTable


@dataclass
class EffectEstimate:
    point: float
    method: str
    n: int
    ci: tuple[float, float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ci is not None:
            lo, hi, _ = self.ci
            if not lo <= self.point <= hi:
                # percentile intervals can miss a skewed point estimate; widen to cover it
                self.ci = (min(lo, self.point), max(hi, self.point), self.ci[2])

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "ci": None if self.ci is None else [self.ci[0], self.ci[1]],
            "level": None if self.ci is None else self.ci[2],
            "method": self.method,
            "n": self.n,
            "diagnostics": self.diagnostics,
        }


# -- helpers ----------------------------------------------------------------

def _adjustment(est: Estimand) -> tuple[str, ...]:
    if est.kind not in (BACKDOOR, RANDOMIZED, TRANSPORT):
        raise DataError(f"estimator needs a backdoor-type estimand, got {est.kind}")
    return est.adjustment


def _all_categorical(data: Dataset, names) -> bool:
    return all(data.domain(n).categorical for n in names)


@dataclass(frozen=True)
class PositivityEntry:
    stratum: dict
    level: int
    frequency: float


def check_positivity(data: Dataset, a: str, w: Sequence[str], eps: float = 0.05) -> list[PositivityEntry]:
    """Observed strata of ``w`` in which some level of ``a`` has empirical frequency below ``eps``."""
    for v in w:
        if not data.domain(v).categorical:
            raise ContinuousVariable(f"positivity check needs categorical covariates; '{v}' is continuous")
    k = data.levels(a)
    col = data[a]
    report = []
    for levels, mask in strata(data, w):
        counts = np.bincount(col[mask], minlength=k)
        freq = counts / mask.sum()
        for lev in range(k):
            if freq[lev] < eps:
                report.append(PositivityEntry(dict(zip(w, levels)), lev, float(freq[lev])))
    return report


def diff_in_means(data: Dataset, a: str, y: str) -> EffectEstimate:
    """mean(Y | A=1) - mean(Y | A=0)."""
    col = data[a]
    if data.levels(a) != 2:
        raise DataError(f"'{a}' must be binary")
    treated, control = col == 1, col == 0
    if not treated.any() or not control.any():
        raise PositivityViolation(f"'{a}' takes only one level in the data")
    yv = data[y]
    point = float(np.mean(yv[treated]) - np.mean(yv[control]))
    return EffectEstimate(point, "diff-in-means", data.n,
                          diagnostics={"n_treated": int(treated.sum()), "n_control": int(control.sum())})


# -- outcome models -----------------------------------------------------------

OutcomeModel = Callable[[Mapping[str, np.ndarray]], np.ndarray]


def _stratum_means(fit: Dataset, a: str, y: str, w: Sequence[str], value: int):
    """Mean of ``y`` among rows with ``a == value`` within every observed ``w`` stratum."""
    treated = fit[a] == value
    yv = fit[y]
    means = {}
    for levels, mask in strata(fit, w):
        cell = mask & treated
        if cell.any():
            means[levels] = float(np.mean(yv[cell]))
    return means


def _plugin(fit: Dataset, evaluate: Dataset, a: str, y: str, w: Sequence[str], value: int,
            model, waive_positivity: bool) -> tuple[float, dict]:
    """Average of E-hat[Y | A=value, W_i] over the rows of ``evaluate``."""
    if model == "auto":
        model = "saturated" if _all_categorical(fit, (a, *w)) else "linear"
    diag = {"outcome_model": model if isinstance(model, str) else "custom"}

    if callable(model):
        cols = {n: evaluate[n] for n in w}
        cols[a] = np.full(evaluate.n, value)
        preds = np.asarray(model(cols), dtype=float)
        return float(np.mean(np.broadcast_to(preds, (evaluate.n,)))), diag

    if model == "saturated":
        means = _stratum_means(fit, a, y, w, value)
        total, missing = 0.0, []
        for levels, mask in strata(evaluate, w):
            if levels not in means:
                missing.append(dict(zip(w, levels)))
                continue
            total += (mask.sum() / evaluate.n) * means[levels]
        if missing:
            raise PositivityViolation(
                f"no rows with {a}={value} in stratum/strata {missing[:5]}"
                + (" ..." if len(missing) > 5 else ""))
        return total, diag

    if model in ("linear", "logistic"):
        if not waive_positivity and _all_categorical(fit, w):
            seen = set(_stratum_means(fit, a, y, w, value))
            missing = [dict(zip(w, lv)) for lv, _ in strata(evaluate, w) if lv not in seen]
            if missing:
                raise PositivityViolation(f"no rows with {a}={value} in strata {missing[:5]}")
        fitter = fit_linear if model == "linear" else fit_logistic
        reg = fitter(fit, y, [a, *w])
        cols = {n: evaluate[n] for n in w}
        cols[a] = np.full(evaluate.n, value)
        preds = reg.predict_columns(cols, evaluate.n)
        diag["fit"] = reg.report()
        return float(np.mean(preds)), diag

    raise DataError(f"unknown outcome model {model!r}")


def gformula_mean(data: Dataset, est: Estimand, value: int = 1, outcome_model="auto",
                  waive_positivity: bool = False) -> EffectEstimate:
    """(1/n) sum_i E-hat[Y | A=value, W_i].

    ``outcome_model`` is ``"auto"`` (stratum means when A and W are all
    categorical, linear regression otherwise), ``"saturated"``, ``"linear"``,
    ``"logistic"`` or a callable mapping a column dict to predictions.
    """
    w = _adjustment(est)
    a, y = est.treatment, est.outcome
    data.require([a, y, *w])
    point, diag = _plugin(data, data, a, y, w, value, outcome_model, waive_positivity)
    return EffectEstimate(point, "gformula", data.n, diagnostics=diag)


def transport_mean(source: Dataset, target: Dataset, est: Estimand, value: int = 1,
                   outcome_model="auto", waive_positivity: bool = False) -> EffectEstimate:
    """(1/n_target) sum over target rows of E-hat_source[Y | A=value, W_i]."""
    w = _adjustment(est)
    a, y = est.treatment, est.outcome
    source.require([a, y, *w])
    for v in w:
        if v not in target:
            raise SchemaMismatch(f"target data lacks adjustment variable '{v}'")
        if target.domain(v) != source.domain(v):
            raise SchemaMismatch(f"'{v}' has domain {target.domain(v)} in target, {source.domain(v)} in source")
    point, diag = _plugin(source, target, a, y, w, value, outcome_model, waive_positivity)
    diag["n_source"] = source.n
    return EffectEstimate(point, "transport", target.n, diagnostics=diag)


def _propensity(data: Dataset, a: str, w: Sequence[str], value: int, spec):
    """Returns (p-hat(A=value | W_i) per row, fitted?)."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.full(data.n, float(spec)), False
    if isinstance(spec, np.ndarray):
        return np.asarray(spec, dtype=float), False
    if callable(spec):
        return np.asarray(spec({n: data[n] for n in w}), dtype=float), False
    if spec == "auto":
        spec = "saturated" if _all_categorical(data, w) else "logistic"
    if spec == "saturated":
        cpt = fit_cpt(data, a, w, alpha=0.0)
        return cpt.lookup({n: data[n] for n in w}, value), True
    if spec == "logistic":
        if data.levels(a) != 2:
            raise DataError("logistic propensity needs a binary treatment")
        binary = Dataset({**{n: data[n] for n in w}, a: (data[a] == 1).astype(int)},
                         {**{n: data.domain(n) for n in w}, a: data.domain(a)})
        reg = fit_logistic(binary, a, list(w))
        p1 = reg.predict_columns({n: data[n] for n in w}, data.n)
        return (p1 if value == 1 else 1.0 - p1), True
    raise DataError(f"unknown propensity model {spec!r}")


def ipw_mean(data: Dataset, est: Estimand, value: int = 1, propensity="auto", clip: float = 0.01,
             stabilized: bool = False) -> EffectEstimate:
    """(1/n) sum_i Y_i 1[A_i = value] / p-hat(A=value | W_i).

    Fitted propensities are clipped to ``[clip, 1 - clip]``; more than 5% of
    rows below ``clip`` is a positivity violation.  Supplied propensities
    (a number, an array or a callable) are used as given.  ``stabilized``
    multiplies the weights by the marginal p-hat(A=value) and divides by
    their sum instead of n.
    """
    w = _adjustment(est)
    a, y = est.treatment, est.outcome
    data.require([a, y, *w])
    p, fitted = _propensity(data, a, w, value, propensity)
    diag = {"propensity": propensity if isinstance(propensity, str) else "supplied"}
    if fitted:
        low = p < clip
        diag["clipped_low"] = int(low.sum())
        diag["clipped_high"] = int((p > 1 - clip).sum())
        if low.mean() > 0.05:
            raise PositivityViolation(
                f"estimated p({a}={value}|{','.join(w)}) below {clip} for {low.mean():.1%} of rows")
        p = np.clip(p, clip, 1 - clip)
    if (p <= 0).any() or (p > 1).any():
        raise PositivityViolation("propensities must lie in (0, 1]")

    hit = data[a] == value
    weights = np.where(hit, 1.0 / p, 0.0)
    yv = data[y].astype(float)
    if stabilized:
        marginal = hit.mean()
        sw = weights * marginal
        point = float(np.sum(sw * yv) / np.sum(sw))
    else:
        point = float(np.sum(weights * yv) / data.n)
    wt = weights[hit]
    diag["weights"] = {
        "sum": float(wt.sum()),
        "stabilized_sum": float(wt.sum() * hit.mean()),
        "n_level": int(hit.sum()),
        "min": float(wt.min()) if wt.size else None,
        "max": float(wt.max()) if wt.size else None,
        "mean": float(wt.mean()) if wt.size else None,
    }
    return EffectEstimate(point, "ipw", data.n, diagnostics=diag)


def average_causal_effect(estimator: Callable[..., EffectEstimate], *args, **kwargs) -> float:
    """estimate(value=1) - estimate(value=0) for any of the single-treatment estimators."""
    return estimator(*args, value=1, **kwargs).point - estimator(*args, value=0, **kwargs).point


# -- functionals on exact distributions ------------------------------------

def gformula_functional(joint: JointTable, a: str, y: str, w: Sequence[str], value: int) -> float:
    """sum_w E[Y | A=value, w] p(w) on an exact table."""
    w = tuple(w)
    sub = joint.marginal((y, a, *w)).probs
    yvals = np.arange(sub.shape[0]).reshape((-1,) + (1,) * (sub.ndim - 1))
    at = sub[:, value]                                  # p(y, a, w)
    p_aw = at.sum(axis=0)                               # p(a, w)
    p_w = sub.sum(axis=(0, 1))                          # p(w)
    ey = (yvals[:, 0] * at).sum(axis=0) / p_aw
    return float(np.sum(ey * p_w))


def ipw_functional(joint: JointTable, a: str, y: str, w: Sequence[str], value: int) -> float:
    """sum_{y,w} y p(y, A=value, w) / p(A=value | w) on an exact table."""
    w = tuple(w)
    sub = joint.marginal((y, a, *w)).probs
    p_aw = sub.sum(axis=0)                              # p(a, w)
    p_w = p_aw.sum(axis=0)                              # p(w)
    prop = p_aw[value] / p_w                            # p(A=value | w)
    yvals = np.arange(sub.shape[0]).reshape((-1,) + (1,) * len(w))
    return float(np.sum(yvals * sub[:, value] / prop))


# -- bootstrap ----------------------------------------------------------------

def bootstrap_ci(estimator: Callable[..., float], data, B: int = 1000, level: float = 0.95,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile interval from ``B`` row resamples.

    ``data`` is a Dataset or a tuple of Datasets (each resampled on its own);
    ``estimator`` receives the resampled dataset(s) positionally and returns a
    float or an EffectEstimate.
    """
    if B < 100:
        raise DataError("bootstrap needs at least 100 resamples")
    if not 0 < level < 1:
        raise DataError("level must lie in (0, 1)")
    datasets = (data,) if isinstance(data, Dataset) else tuple(data)
    rng = np.random.default_rng(seed)
    stats = np.empty(B)
    for b in range(B):
        resampled = [d.take(rng.integers(0, d.n, d.n)) for d in datasets]
        try:
            out = estimator(*resampled)
        except Exception as exc:
            raise EstimatorFailedOnResample(b, exc) from exc
        stats[b] = out.point if isinstance(out, EffectEstimate) else float(out)
    tail = (1 - level) / 2
    lo, hi = np.quantile(stats, [tail, 1 - tail])
    return float(lo), float(hi)
