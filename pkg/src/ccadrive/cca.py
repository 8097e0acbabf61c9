"""
Canonical correlation analysis by whitening + SVD, and threshold-based
selection of participant feature groups.

Views are per *row*: ``X`` is ``(N, n)`` and ``Y`` is ``(N, m)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import GROUP_ORDER, HOST_HISTORY, DesignMatrices
from .errors import CcaDriveError, DegenerateShape, InvalidConfig, ShapeMismatch, SingularCovariance

DEFAULT_RIDGE = 1e-8
EIG_FLOOR = 1e-12
RANK_TOL = 1e-10


@dataclass(frozen=True)
class CcaResult:
    correlations: np.ndarray
    a_vectors: np.ndarray
    b_vectors: np.ndarray
    ridge: float = DEFAULT_RIDGE

    @property
    def rho1(self) -> float:
        return float(self.correlations[0]) if self.correlations.size else 0.0

    @property
    def n_pairs(self) -> int:
        return self.correlations.size


def _as_2d(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeMismatch(f"{name} must be 1-D or 2-D, got {a.ndim}-D")
    return a


def cross_covariance(X, Y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample covariance blocks (ddof=1): ``(S_xx, S_yy, S_xy)``."""
    X, Y = _as_2d(X, "X"), _as_2d(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    n_rows = X.shape[0]
    if n_rows < 2:
        raise DegenerateShape("covariance needs at least 2 rows")
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    s_xx = Xc.T @ Xc / (n_rows - 1)
    s_yy = Yc.T @ Yc / (n_rows - 1)
    s_xy = Xc.T @ Yc / (n_rows - 1)
    # exact symmetry, roundoff in the products is not symmetric
    return 0.5 * (s_xx + s_xx.T), 0.5 * (s_yy + s_yy.T), s_xy


def inv_sqrt_psd(S, ridge: float = 0.0) -> tuple[np.ndarray, int]:
    """``(S + ridge*I)^(-1/2)`` via eigh with eigenvalues floored at 1e-12.

    Also returns the effective rank of ``S + ridge*I``.
    """
    S = np.asarray(S, dtype=float)
    evals, evecs = np.linalg.eigh(S + ridge * np.eye(S.shape[0]))
    top = max(evals[-1], 0.0) if evals.size else 0.0
    rank = int(np.sum(evals > RANK_TOL * max(top, EIG_FLOOR)))
    clamped = np.maximum(evals, EIG_FLOOR)
    return (evecs / np.sqrt(clamped)) @ evecs.T, rank


def _live_columns(A, S) -> np.ndarray:
    # same constant-column rule as dataset.standardize
    return np.sqrt(np.diag(S)) > 1e-12 * np.maximum(1.0, np.abs(A.mean(axis=0)))


def fit_cca(X, Y, ridge: float = DEFAULT_RIDGE) -> CcaResult:
    """Canonical correlations and projection pairs of row-aligned views.

    All-zero (constant) columns are excluded from whitening and receive zero
    weight in every projection vector.
    """
    if ridge < 0:
        raise InvalidConfig("ridge must be non-negative")
    X, Y = _as_2d(X, "X"), _as_2d(Y, "Y")
    s_xx, s_yy, s_xy = cross_covariance(X, Y)
    live_x, live_y = _live_columns(X, s_xx), _live_columns(Y, s_yy)
    n, m = X.shape[1], Y.shape[1]
    if not live_x.any() or not live_y.any():
        return CcaResult(np.zeros(0), np.zeros((n, 0)), np.zeros((m, 0)), ridge)

    sxx = s_xx[np.ix_(live_x, live_x)]
    syy = s_yy[np.ix_(live_y, live_y)]
    sxy = s_xy[np.ix_(live_x, live_y)]
    wx, rank_x = inv_sqrt_psd(sxx, ridge)
    wy, rank_y = inv_sqrt_psd(syy, ridge)
    if ridge == 0 and (rank_x < sxx.shape[0] or rank_y < syy.shape[0]):
        raise SingularCovariance(
            f"rank-deficient covariance (rank {rank_x}/{sxx.shape[0]}, {rank_y}/{syy.shape[0]}); use ridge > 0"
        )
    # effective rank of the data itself, not of the ridged matrix
    p = min(np.linalg.matrix_rank(sxx, hermitian=True, tol=RANK_TOL * max(np.abs(sxx).max(), EIG_FLOOR)),
            np.linalg.matrix_rank(syy, hermitian=True, tol=RANK_TOL * max(np.abs(syy).max(), EIG_FLOOR)))
    p = max(int(p), 1)

    M = wx @ sxy @ wy
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U, V = U[:, :p], Vt[:p].T
    a_live = wx @ U
    b_live = wy @ V
    # the ridge shapes the directions only: rescale to unit variance under the
    # unridged covariances and report the true correlation of the projections
    var_a = np.einsum("ip,ij,jp->p", a_live, sxx, a_live)
    var_b = np.einsum("ip,ij,jp->p", b_live, syy, b_live)
    a_live = a_live / np.sqrt(np.where(var_a > 0, var_a, 1.0))
    b_live = b_live / np.sqrt(np.where(var_b > 0, var_b, 1.0))
    s = np.einsum("ip,ij,jp->p", a_live, sxy, b_live)
    order = np.argsort(-s, kind="stable")
    s, a_live, b_live = s[order], a_live[:, order], b_live[:, order]

    # deterministic sign: largest-magnitude entry of each a_i positive
    idx = np.argmax(np.abs(a_live), axis=0)
    signs = np.sign(a_live[idx, np.arange(p)])
    signs[signs == 0] = 1.0
    a_live, b_live = a_live * signs, b_live * signs

    a = np.zeros((n, p))
    b = np.zeros((m, p))
    a[live_x] = a_live
    b[live_y] = b_live
    return CcaResult(np.clip(s, 0.0, 1.0), a, b, ridge)


def canonical_value(X, Y, result: CcaResult) -> float:
    """Recompute ``a1^T S_xy b1`` for a fitted pair."""
    X, Y = _as_2d(X, "X"), _as_2d(Y, "Y")
    if result.a_vectors.shape[0] != X.shape[1] or result.b_vectors.shape[0] != Y.shape[1]:
        raise ShapeMismatch("projection vectors do not match the data dimensions")
    if result.n_pairs == 0:
        return 0.0
    _, _, s_xy = cross_covariance(X, Y)
    return float(result.a_vectors[:, 0] @ s_xy @ result.b_vectors[:, 0])


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupScore:
    rho1: float
    selected: bool
    diagnostic: str = ""


@dataclass(frozen=True)
class SelectionReport:
    threshold: float
    per_group: dict[str, GroupScore] = field(default_factory=dict)

    @property
    def selected_groups(self) -> tuple[str, ...]:
        return tuple(g for g in GROUP_ORDER if g in self.per_group and self.per_group[g].selected)

    def to_dict(self) -> dict:
        groups = []
        for g in GROUP_ORDER:
            if g not in self.per_group:
                continue
            score = self.per_group[g]
            entry = {"name": g, "rho1": score.rho1, "selected": score.selected}
            if score.diagnostic:
                entry["diagnostic"] = score.diagnostic
            groups.append(entry)
        return {"threshold": self.threshold, "groups": groups}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "SelectionReport":
        per_group = {
            e["name"]: GroupScore(float(e["rho1"]), bool(e["selected"]), e.get("diagnostic", ""))
            for e in d["groups"]
        }
        return cls(float(d["threshold"]), per_group)


def group_correlations(matrices: DesignMatrices, ridge: float = DEFAULT_RIDGE) -> dict[str, tuple[float, str]]:
    """First canonical correlation of every group against the target block.

    A group whose fit fails gets ``nan`` and the error text.
    """
    out = {}
    for g in matrices.group_names:
        try:
            out[g] = (fit_cca(matrices.groups[g], matrices.target, ridge).rho1, "")
        except CcaDriveError as exc:
            out[g] = (float("nan"), f"{type(exc).__name__}: {exc}")
    return out


def select_features(matrices: DesignMatrices, threshold: float, ridge: float = DEFAULT_RIDGE,
                    scores: dict[str, tuple[float, str]] | None = None) -> SelectionReport:
    """Keep non-host groups whose rho1 reaches ``threshold``; host history always kept.

    ``scores`` lets a threshold sweep reuse one set of CCA fits.
    """
    if not 0 < threshold < 1:
        raise InvalidConfig(f"threshold must lie in (0, 1), got {threshold}")
    if scores is None:
        scores = group_correlations(matrices, ridge)
    per_group = {}
    for g, (rho, diag) in scores.items():
        if g == HOST_HISTORY:
            per_group[g] = GroupScore(rho, True, diag)
        else:
            per_group[g] = GroupScore(rho, bool(np.isfinite(rho) and rho >= threshold), diag)
    return SelectionReport(float(threshold), per_group)


def threshold_sweep(matrices: DesignMatrices, thresholds, ridge: float = DEFAULT_RIDGE) -> list[SelectionReport]:
    scores = group_correlations(matrices, ridge)
    return [select_features(matrices, t, ridge, scores) for t in thresholds]
