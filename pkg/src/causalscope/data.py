"""Tabular data and the regression / probability-table models used by the estimators."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ContinuousVariable,
    DataError,
    InsufficientRows,
    MissingPredictor,
    NoConvergence,
    RankDeficient,
    SchemaMismatch,
    Separation,
    UnknownVariable,
)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Domain:
    kind: str
    levels: int | None = None

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if not isinstance(self.levels, int) or self.levels < 1:
                raise DataError(f"categorical domain needs a positive level count, got {self.levels!r}")
        elif self.kind == CONTINUOUS:
            if self.levels is not None:
                raise DataError("continuous domain takes no level count")
        else:
            raise DataError(f"unknown domain type {self.kind!r}")

    @property
    def categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def to_dict(self) -> dict:
        if self.categorical:
            return {"type": CATEGORICAL, "levels": self.levels}
        return {"type": CONTINUOUS}


def categorical(levels: int) -> Domain:
    return Domain(CATEGORICAL, levels)


def continuous() -> Domain:
    return Domain(CONTINUOUS)


class Dataset:
    """Column-oriented samples with a per-column domain.

    Columns are stored as read-only numpy arrays; categorical columns hold
    integer codes ``0..k-1``.
    """

    def __init__(self, columns: Mapping[str, Sequence], schema: Mapping[str, Domain],
                 population: str = "source"):
        if set(columns) != set(schema):
            missing = set(columns) ^ set(schema)
            raise SchemaMismatch(f"columns and schema disagree on {sorted(missing)}")
        n = None
        cols = {}
        for name in columns:
            dom = schema[name]
            raw = np.asarray(columns[name], dtype=float)
            if raw.ndim != 1:
                raise DataError(f"column '{name}' must be one-dimensional")
            if n is None:
                n = len(raw)
            elif len(raw) != n:
                raise DataError(f"column '{name}' has {len(raw)} rows, expected {n}")
            if np.isnan(raw).any():
                raise DataError(f"column '{name}' has missing values")
            if dom.categorical:
                if (raw != np.round(raw)).any() or (raw < 0).any() or (raw >= dom.levels).any():
                    raise DataError(f"column '{name}' has values outside 0..{dom.levels - 1}")
                arr = raw.astype(np.int64)
            else:
                arr = raw
            arr.flags.writeable = False
            cols[name] = arr
        self._columns = cols
        self._schema = dict(schema)
        self._n = 0 if n is None else n
        self.population = population

    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._columns)

    @property
    def schema(self) -> dict[str, Domain]:
        return dict(self._schema)

    @property
    def columns(self) -> dict[str, np.ndarray]:
        return dict(self._columns)

    def __contains__(self, name) -> bool:
        return name in self._columns

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def domain(self, name: str) -> Domain:
        try:
            return self._schema[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def levels(self, name: str) -> int:
        dom = self.domain(name)
        if not dom.categorical:
            raise ContinuousVariable(f"variable '{name}' is continuous")
        return dom.levels

    def require(self, names) -> None:
        for n in names:
            self.domain(n)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset({k: v[rows] for k, v in self._columns.items()}, self._schema, self.population)

    def select(self, names) -> "Dataset":
        return Dataset({n: self[n] for n in names}, {n: self.domain(n) for n in names}, self.population)

    def with_population(self, tag: str) -> "Dataset":
        return Dataset(self._columns, self._schema, tag)

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, columns={list(self.names)}, population={self.population!r})"

    # -- CSV / schema io ------------------------------------------------------

    def to_csv(self, path_or_buf=None) -> str | None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        cols = [self._columns[n] for n in self.names]
        cat = [self._schema[n].categorical for n in self.names]
        for i in range(self.n):
            writer.writerow(str(int(c[i])) if k else repr(float(c[i])) for c, k in zip(cols, cat))
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return None

    def schema_dict(self) -> dict:
        return {n: self._schema[n].to_dict() for n in self.names}


def schema_from_dict(doc: Mapping) -> dict[str, Domain]:
    out = {}
    for name, spec in doc.items():
        if not isinstance(spec, Mapping):
            raise DataError(f"schema entry for '{name}' must be an object")
        extra = set(spec) - {"type", "levels"}
        if extra:
            raise DataError(f"unknown schema keys for '{name}': {sorted(extra)}")
        kind = spec.get("type")
        out[name] = Domain(kind, spec.get("levels")) if kind == CATEGORICAL else Domain(kind)
    return out


def load_schema(path) -> dict[str, Domain]:
    with open(path) as fh:
        try:
            return schema_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None


def read_csv(path_or_buf, schema: Mapping[str, Domain], population: str = "source") -> Dataset:
    """Read a CSV whose first row names the variables; every cell must be a number."""
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("empty CSV")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in CSV header")
    values = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        for h, cell in zip(header, row):
            cell = cell.strip()
            if cell == "":
                raise DataError(f"line {lineno}: missing value for '{h}'")
            try:
                values[h].append(float(cell))
            except ValueError:
                raise DataError(f"line {lineno}: '{cell}' is not a number") from None
    if set(header) != set(schema):
        raise SchemaMismatch(f"CSV header {sorted(header)} does not match schema {sorted(schema)}")
    return Dataset(values, {h: schema[h] for h in header}, population)


# -- design matrices --------------------------------------------------------

INTERCEPT = "(intercept)"


@dataclass(frozen=True)
class Term:
    """One design column: a continuous variable or one non-reference level."""

    variable: str | None
    level: int | None = None

    @property
    def label(self) -> str:
        if self.variable is None:
            return INTERCEPT
        if self.level is None:
            return self.variable
        return f"{self.variable}={self.level}"


def design_terms(schema: Mapping[str, Domain], predictors: Sequence[str], intercept: bool = True) -> list[Term]:
    terms = [Term(None)] if intercept else []
    for p in predictors:
        dom = schema[p]
        if dom.categorical:
            terms += [Term(p, lev) for lev in range(1, dom.levels)]
        else:
            terms.append(Term(p))
    return terms


def design_matrix(terms: Sequence[Term], columns: Mapping[str, np.ndarray], n: int) -> np.ndarray:
    X = np.empty((n, len(terms)))
    for j, t in enumerate(terms):
        if t.variable is None:
            X[:, j] = 1.0
            continue
        try:
            col = np.asarray(columns[t.variable])
        except KeyError:
            raise MissingPredictor(f"missing predictor '{t.variable}'") from None
        X[:, j] = (col == t.level) if t.level is not None else col
    return X


@dataclass(frozen=True)
class FittedRegression:
    kind: str
    outcome: str
    terms: tuple[Term, ...]
    coef: np.ndarray
    n_iter: int
    grad_norm: float
    ridge: float = 0.0

    @property
    def predictors(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(t.variable for t in self.terms if t.variable is not None))

    def linear_predictor(self, columns: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        return design_matrix(self.terms, columns, n) @ self.coef

    def predict_columns(self, columns: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        eta = self.linear_predictor(columns, n)
        return eta if self.kind == "linear" else _sigmoid(eta)

    def report(self) -> dict:
        return {"kind": self.kind, "iterations": self.n_iter,
                "gradient_norm": self.grad_norm, "ridge": self.ridge}


def _sigmoid(eta):
    return 1.0 / (1.0 + np.exp(-eta))


def _check_fit_inputs(data: Dataset, outcome: str, predictors: Sequence[str]):
    data.require([outcome, *predictors])
    if outcome in predictors:
        raise DataError(f"outcome '{outcome}' listed among its predictors")


def fit_linear(data: Dataset, outcome: str, predictors: Sequence[str], rescue: bool = False,
               intercept: bool = True) -> FittedRegression:
    """Ordinary least squares through a QR decomposition.

    A rank-deficient design raises RankDeficient unless ``rescue`` is set, in
    which case a ridge term of 1e-8 is added and reported.
    """
    _check_fit_inputs(data, outcome, predictors)
    terms = design_terms(data.schema, predictors, intercept)
    X = design_matrix(terms, data.columns, data.n)
    y = np.asarray(data[outcome], dtype=float)
    n, p = X.shape
    if n <= p:
        raise InsufficientRows(f"{n} rows for {p} design columns")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    ridge = 0.0
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        if not rescue:
            raise RankDeficient(f"collinear design for '{outcome}' on {list(predictors)}")
        ridge = 1e-8
        beta = np.linalg.solve(X.T @ X + ridge * np.eye(p), X.T @ y)
    else:
        beta = np.linalg.solve(R, Q.T @ y)
    grad = X.T @ (y - X @ beta)
    return FittedRegression("linear", outcome, tuple(terms), beta, 1, float(np.linalg.norm(grad)), ridge)


def fit_logistic(data: Dataset, outcome: str, predictors: Sequence[str], max_iter: int = 100,
                 tol: float = 1e-8, intercept: bool = True) -> FittedRegression:
    """Maximum-likelihood logistic regression by iteratively reweighted least squares."""
    _check_fit_inputs(data, outcome, predictors)
    y = np.asarray(data[outcome], dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError(f"outcome '{outcome}' must be binary 0/1")
    terms = design_terms(data.schema, predictors, intercept)
    X = design_matrix(terms, data.columns, data.n)
    n, p = X.shape
    if n <= p:
        raise InsufficientRows(f"{n} rows for {p} design columns")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficient(f"collinear design for '{outcome}' on {list(predictors)}")

    beta = np.zeros(p)
    for it in range(max_iter + 1):
        mu = _sigmoid(X @ beta)
        grad = X.T @ (y - mu)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            if np.abs(y - mu).max() < 1e-6:
                raise Separation(f"fitted probabilities are all 0 or 1 for '{outcome}': separated data")
            return FittedRegression("logistic", outcome, tuple(terms), beta, it, gnorm)
        if it == max_iter:
            break
        w = mu * (1.0 - mu)
        info = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        beta = beta + step
        if np.abs(beta).max() > 30:
            raise Separation(f"coefficients diverge for '{outcome}' (|coef| > 30): separated data")
    raise NoConvergence(f"IRLS did not converge in {max_iter} iterations (gradient norm {gnorm:.3g})")


def predict(model: FittedRegression, row: Mapping[str, float]) -> float:
    """Prediction for one row: ``x.b`` for linear models, the sigmoid of it for logistic ones."""
    for v in model.variables:
        if v not in row:
            raise MissingPredictor(f"row lacks predictor '{v}'")
    cols = {v: np.asarray([row[v]], dtype=float) for v in model.variables}
    return float(model.predict_columns(cols, 1)[0])


# -- empirical conditional probability tables ------------------------------

@dataclass(frozen=True)
class EmpiricalCPT:
    """``table[c_1, ..., c_m, t]`` holds p(target = t | conditioners = c)."""

    target: str
    conditioners: tuple[str, ...]
    table: np.ndarray
    counts: np.ndarray = field(repr=False)
    alpha: float = 0.0

    def prob(self, value: int, given: Mapping[str, int] | None = None) -> float:
        return float(self.slice(given)[value])

    def slice(self, given: Mapping[str, int] | None = None) -> np.ndarray:
        given = given or {}
        idx = tuple(int(given[c]) for c in self.conditioners)
        return self.table[idx]

    def support(self, given: Mapping[str, int] | None = None) -> int:
        given = given or {}
        idx = tuple(int(given[c]) for c in self.conditioners)
        return int(self.counts[idx].sum())

    def lookup(self, columns: Mapping[str, np.ndarray], value) -> np.ndarray:
        """Vectorized p(target=value | row conditioners)."""
        idx = tuple(np.asarray(columns[c]) for c in self.conditioners)
        value = np.broadcast_to(np.asarray(value), idx[0].shape if idx else np.shape(value))
        return self.table[idx + (value,)]


def joint_counts(data: Dataset, names: Sequence[str]) -> np.ndarray:
    shape = tuple(data.levels(n) for n in names)
    if not names:
        return np.array(float(data.n))
    flat = np.ravel_multi_index(tuple(data[n] for n in names), shape)
    return np.bincount(flat, minlength=math.prod(shape)).reshape(shape).astype(float)


def fit_cpt(data: Dataset, target: str, conditioners: Sequence[str] = (),
            alpha: float | None = None) -> EmpiricalCPT:
    """Smoothed frequency table ``(count(t, c) + alpha) / (count(c) + alpha * k)``.

    ``alpha`` defaults to 0 for a marginal and 0.5 for a conditional table.
    A stratum with no rows and ``alpha = 0`` gets the uniform distribution;
    its zero support stays visible through ``counts``.
    """
    conditioners = tuple(conditioners)
    for n in (target, *conditioners):
        data.levels(n)
    if alpha is None:
        alpha = 0.0 if not conditioners else 0.5
    counts = joint_counts(data, (*conditioners, target))
    k = counts.shape[-1]
    num = counts + alpha
    den = num.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0 / k)
    return EmpiricalCPT(target, conditioners, table, counts, float(alpha))


def strata(data: Dataset, names: Sequence[str]):
    """Yield ``(levels, row_mask)`` for every observed stratum of categorical ``names``."""
    if not names:
        yield (), np.ones(data.n, dtype=bool)
        return
    shape = tuple(data.levels(n) for n in names)
    flat = np.ravel_multi_index(tuple(data[n] for n in names), shape)
    for code in np.unique(flat):
        yield tuple(int(v) for v in np.unravel_index(code, shape)), flat == code


def all_levels(shape: Sequence[int]):
    return itertools.product(*(range(k) for k in shape))
