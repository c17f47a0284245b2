"""Correcting a misclassified confounder with a known error matrix.

The proxy ``C*`` is observed in place of the true confounder ``C``.  If
``mat[r, c] = p(C*=r | C=c)`` is known and of full column rank, the joint
over ``(Y, A, C)`` is recovered from the joint over ``(Y, A, C*)`` with a
left inverse of ``mat``; the backdoor functional is then applied to the
reconstructed table.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import Dataset
from .errors import DataError, DimensionMismatch, NegativeMassWarning, PositivityViolation, SingularMatrix
from .estimate import EffectEstimate
from .scm import JointTable

MAX_CONDITION = 1e8
DEFICIT_WARN = 0.01


@dataclass(frozen=True)
class MisclassificationMatrix:
    """``columns[:, c]`` is the distribution of the proxy given true level ``c``."""

    columns: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.columns, dtype=float)
        if mat.ndim != 2:
            raise DimensionMismatch("misclassification matrix must be two-dimensional")
        k_proxy, k_true = mat.shape
        if k_proxy < k_true:
            raise DimensionMismatch(f"proxy has {k_proxy} levels, fewer than the {k_true} true levels")
        if (mat < 0).any() or (mat > 1).any():
            raise DataError("misclassification entries must lie in [0, 1]")
        if np.abs(mat.sum(axis=0) - 1.0).max() > 1e-12:
            raise DataError("each column of the misclassification matrix must sum to 1")
        sv = np.linalg.svd(mat, compute_uv=False)
        if sv.min() <= 1e-8 or sv.max() / sv.min() > MAX_CONDITION:
            raise SingularMatrix(
                f"misclassification matrix is not of full column rank (singular values {np.round(sv, 12).tolist()})")
        object.__setattr__(self, "columns", mat)

    @property
    def proxy_levels(self) -> int:
        return self.columns.shape[0]

    @property
    def true_levels(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def flip(cls, rate: float, levels: int = 2) -> "MisclassificationMatrix":
        """Symmetric error: keep the true level with probability 1 - rate, else uniform over the rest."""
        off = rate / (levels - 1) if levels > 1 else 0.0
        mat = np.full((levels, levels), off)
        np.fill_diagonal(mat, 1.0 - rate if levels > 1 else 1.0)
        return cls(mat)

    def to_dict(self) -> dict:
        return {"proxy_levels": self.proxy_levels, "true_levels": self.true_levels,
                "columns": self.columns.T.tolist()}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MisclassificationMatrix":
        extra = set(doc) - {"proxy_levels", "true_levels", "columns"}
        if extra:
            raise DataError(f"unknown misclassification keys: {sorted(extra)}")
        cols = np.asarray(doc["columns"], dtype=float)
        if cols.ndim != 2:
            raise DimensionMismatch("'columns' must be a list of columns")
        mat = cols.T
        if mat.shape != (int(doc["proxy_levels"]), int(doc["true_levels"])):
            raise DimensionMismatch(
                f"columns give a {mat.shape[0]}x{mat.shape[1]} matrix, header says "
                f"{doc['proxy_levels']}x{doc['true_levels']}")
        return cls(mat)


def load_matrix(path) -> MisclassificationMatrix:
    with open(path) as fh:
        try:
            return MisclassificationMatrix.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None


def invert_misclassification(mat: MisclassificationMatrix) -> np.ndarray:
    """Left inverse ``M`` (true x proxy) with ``M @ mat = I``; least squares when k* > k."""
    return np.linalg.pinv(mat.columns)


def corrupt_joint(joint: JointTable, mat: MisclassificationMatrix, true_name: str,
                  proxy: str) -> JointTable:
    """Forward model: replace the ``true_name`` axis by the proxy distribution it induces."""
    ax = joint.axis(true_name)
    if joint.shape[ax] != mat.true_levels:
        raise DimensionMismatch(f"'{true_name}' has {joint.shape[ax]} levels, matrix expects {mat.true_levels}")
    probs = np.moveaxis(np.tensordot(joint.probs, mat.columns, axes=([ax], [1])), -1, ax)
    names = list(joint.names)
    names[ax] = proxy
    return JointTable(names, probs)


@dataclass(frozen=True)
class CorrectedJoint:
    joint: JointTable
    deficit: float      # negative mass removed by clipping, before renormalization
    raw_total: float    # total mass of the reconstruction before clipping


def corrected_joint(observed: JointTable, mat: MisclassificationMatrix, proxy: str,
                    true_name: str | None = None) -> CorrectedJoint:
    """Apply the left inverse along the proxy axis of ``observed``.

    Negative cells (a finite-sample artifact) are set to 0 and the table is
    renormalized; a warning is issued when more than 0.01 of mass is clipped.
    """
    true_name = true_name or proxy
    ax = observed.axis(proxy)
    if observed.shape[ax] != mat.proxy_levels:
        raise DimensionMismatch(
            f"'{proxy}' has {observed.shape[ax]} levels, matrix expects {mat.proxy_levels}")
    M = invert_misclassification(mat)
    raw = np.moveaxis(np.tensordot(observed.probs, M, axes=([ax], [1])), -1, ax)
    total = float(raw.sum())
    deficit = float(-raw[raw < 0].sum())
    probs = raw
    if deficit > 0:
        probs = np.clip(raw, 0.0, None)
        probs = probs / probs.sum()
        if deficit > DEFICIT_WARN:
            warnings.warn(f"clipped {deficit:.4f} of negative probability mass after misclassification "
                          "correction", NegativeMassWarning, stacklevel=2)
    names = list(observed.names)
    names[ax] = true_name
    return CorrectedJoint(JointTable(names, probs), deficit, total)


def _adjusted_mean(joint: JointTable, a: str, y: str, w: str, value: int) -> float:
    sub = joint.marginal((y, a, w)).probs
    at = sub[:, value, :]                       # p(y, A=value, w)
    p_aw = at.sum(axis=0)
    p_w = sub.sum(axis=(0, 1))
    support = p_w > 0
    if (p_aw[support] <= 0).any():
        bad = np.flatnonzero(support & (p_aw <= 0)).tolist()
        raise PositivityViolation(f"no mass with {a}={value} at {w} level(s) {bad}")
    ey = np.arange(sub.shape[0]) @ at[:, support] / p_aw[support]
    return float(ey @ p_w[support])


def corrected_effect(data: Dataset, proxy: str, mat: MisclassificationMatrix, a: str, y: str,
                     value: int = 1, true_name: str | None = None) -> EffectEstimate:
    """E[Y(value)] from the backdoor functional over the reconstructed true confounder."""
    data.require([proxy, a, y])
    for v in (proxy, a, y):
        data.levels(v)
    true_name = true_name or f"{proxy}_true"
    observed = JointTable.from_dataset(data, (y, a, proxy))
    fixed = corrected_joint(observed, mat, proxy, true_name)
    point = _adjusted_mean(fixed.joint, a, y, true_name, value)
    diag = {"corrected": True, "clipped_mass": fixed.deficit, "proxy": proxy,
            "matrix": mat.to_dict()}
    return EffectEstimate(point, "gformula", data.n, diagnostics=diag)


def proxy_adjusted_effect(data: Dataset, proxy: str, a: str, y: str, value: int = 1) -> float:
    """The naive comparator: backdoor adjustment treating the proxy as if it were the confounder."""
    observed = JointTable.from_dataset(data, (y, a, proxy))
    return _adjusted_mean(observed, a, y, proxy, value)
