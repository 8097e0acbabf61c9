"""
Zero-mean Gaussian process regression with a single kernel-width and a
noise hyperparameter, fitted by minimizing the negative log marginal
likelihood with projected gradient descent in log-parameter space.

The default kernel is ``exp(-||x - x'|| / sigma_f)`` (unsquared distance,
unit amplitude). ``kernel="squared_exponential"`` swaps in
``exp(-||x - x'||^2 / (2 sigma_f^2))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .errors import AllRestartsFailed, InvalidConfig, NotPositiveDefinite, ShapeMismatch

KERNELS = ("exponential", "squared_exponential")
JITTER = 1e-10
LOG_BOUNDS = np.array([[-4.0, 4.0], [-6.0, 2.0]])  # rows: log sigma_f, log sigma_n
LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class Hyperparams:
    sigma_f: float
    sigma_n: float

    def __post_init__(self):
        if not (self.sigma_f > 0 and self.sigma_n > 0):
            raise InvalidConfig(f"hyperparameters must be positive, got {self}")

    @property
    def log(self) -> np.ndarray:
        return np.log([self.sigma_f, self.sigma_n])

    @classmethod
    def from_log(cls, theta) -> "Hyperparams":
        return cls(float(np.exp(theta[0])), float(np.exp(theta[1])))


def _check_kernel(kind):
    if kind not in KERNELS:
        raise InvalidConfig(f"unknown kernel {kind!r}, choose from {KERNELS}")


def _as_rows(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D")
    return X


def _kernel_from_dist(r, sigma_f, kind):
    if kind == "exponential":
        return np.exp(-r / sigma_f)
    return np.exp(-0.5 * (r / sigma_f) ** 2)


def kernel(x, x2, sigma_f: float, kind: str = "exponential") -> float:
    _check_kernel(kind)
    if sigma_f <= 0:
        raise InvalidConfig("sigma_f must be positive")
    x, x2 = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.ndim != 1:
        raise ShapeMismatch(f"kernel arguments must be equal-length vectors, got {x.shape} and {x2.shape}")
    return float(_kernel_from_dist(np.sqrt(np.sum((x - x2) ** 2)), sigma_f, kind))


def gram(X, X2, sigma_f: float, kind: str = "exponential") -> np.ndarray:
    """Kernel matrix between the rows of ``X`` and ``X2``."""
    _check_kernel(kind)
    if sigma_f <= 0:
        raise InvalidConfig("sigma_f must be positive")
    X, X2 = _as_rows(X), _as_rows(X2, "X2")
    if X.shape[1] != X2.shape[1]:
        raise ShapeMismatch(f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
    return _kernel_from_dist(cdist(X, X2), sigma_f, kind)


def _factor(K, sigma_n):
    n = K.shape[0]
    C = K + (sigma_n**2 + JITTER) * np.eye(n)
    try:
        L = cholesky(C, lower=True, check_finite=False)
    except LinAlgError:
        raise NotPositiveDefinite(f"Cholesky of C failed (sigma_n={sigma_n:g})") from None
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefinite("non-finite Cholesky factor")
    return L


def _prepare(hyper, X, y):
    X = _as_rows(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != X.shape[0]:
        raise ShapeMismatch(f"{X.shape[0]} inputs but {y.size} targets")
    return X, y


def nlml(hyper: Hyperparams, X, y, kind: str = "exponential") -> float:
    """Negative log marginal likelihood, via Cholesky."""
    X, y = _prepare(hyper, X, y)
    return _nlml_from(hyper, cdist(X, X), y, kind)


def _nlml_from(hyper, R, y, kind):
    L = _factor(_kernel_from_dist(R, hyper.sigma_f, kind), hyper.sigma_n)
    alpha = cho_solve((L, True), y, check_finite=False)
    return float(0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * y.size * LOG_2PI)


def _nlml_and_grad(theta, R, y, kind):
    hyper = Hyperparams.from_log(theta)
    K = _kernel_from_dist(R, hyper.sigma_f, kind)
    L = _factor(K, hyper.sigma_n)
    n = y.size
    alpha = cho_solve((L, True), y, check_finite=False)
    value = float(0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * LOG_2PI)
    C_inv = cho_solve((L, True), np.eye(n), check_finite=False)
    # dL/dtheta = 1/2 tr((C^-1 - alpha alpha^T) dC/dtheta)
    W = C_inv - np.outer(alpha, alpha)
    if kind == "exponential":
        dC_dsf = K * R / hyper.sigma_f**2
    else:
        dC_dsf = K * R**2 / hyper.sigma_f**3
    g_sf = 0.5 * np.sum(W * dC_dsf)
    g_sn = 0.5 * np.trace(W) * 2.0 * hyper.sigma_n
    # chain rule to log-parameters
    return value, np.array([g_sf * hyper.sigma_f, g_sn * hyper.sigma_n])


def nlml_grad(hyper: Hyperparams, X, y, kind: str = "exponential") -> np.ndarray:
    """Gradient of ``nlml`` with respect to ``(log sigma_f, log sigma_n)``."""
    X, y = _prepare(hyper, X, y)
    return _nlml_and_grad(hyper.log, cdist(X, X), y, kind)[1]


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


@dataclass
class DescentResult:
    theta: np.ndarray
    value: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    history: list[float] = field(default_factory=list)


def projected_gradient_descent(fun_and_grad, theta0, bounds, max_iter: int = 200, gtol: float = 1e-6,
                               c1: float = 1e-4, shrink: float = 0.5, step0: float = 1.0,
                               max_step: float = 1e3) -> DescentResult:
    """Box-constrained gradient descent with Armijo backtracking.

    ``fun_and_grad`` may raise ``NotPositiveDefinite``; such trial points
    are treated as infinitely bad and the step is shrunk. ``history`` is
    the objective after every accepted step (plus the start value).
    """
    lo, hi = bounds[:, 0], bounds[:, 1]
    theta = np.clip(np.asarray(theta0, dtype=float), lo, hi)
    value, grad = fun_and_grad(theta)
    history = [value]
    step = step0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg = theta - np.clip(theta - grad, lo, hi)
        if np.linalg.norm(pg) < gtol:
            converged = True
            it -= 1
            break
        accepted = False
        while step > 1e-14:
            cand = np.clip(theta - step * grad, lo, hi)
            delta = cand - theta
            if not np.any(delta):
                break
            try:
                cand_value, cand_grad = fun_and_grad(cand)
            except NotPositiveDefinite:
                step *= shrink
                continue
            if cand_value <= value + c1 * grad @ delta:
                accepted = True
                break
            step *= shrink
        if not accepted:
            converged = np.linalg.norm(pg) < np.sqrt(gtol)
            break
        theta, value, grad = cand, cand_value, cand_grad
        history.append(value)
        step = min(step * 2.0, max_step)
    return DescentResult(theta, value, grad, it, converged, history)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GprModel:
    hyper: Hyperparams
    X_train: np.ndarray
    y_train: np.ndarray
    kind: str = "exponential"
    chol_C: np.ndarray = field(default=None, repr=False)
    alpha: np.ndarray = field(default=None, repr=False)
    nlml_value: float = float("nan")

    def __post_init__(self):
        _check_kernel(self.kind)
        X, y = _prepare(self.hyper, self.X_train, self.y_train)
        L = _factor(gram(X, X, self.hyper.sigma_f, self.kind), self.hyper.sigma_n)
        alpha = cho_solve((L, True), y, check_finite=False)
        for name, arr in (("X_train", X), ("y_train", y), ("chol_C", L), ("alpha", alpha)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.isfinite(self.nlml_value):
            value = float(0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * y.size * LOG_2PI)
            object.__setattr__(self, "nlml_value", value)

    def to_dict(self) -> dict:
        return {
            "sigma_f": self.hyper.sigma_f,
            "sigma_n": self.hyper.sigma_n,
            "kernel": self.kind,
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "GprModel":
        return cls(Hyperparams(float(d["sigma_f"]), float(d["sigma_n"])),
                   np.asarray(d["X_train"], dtype=float), np.asarray(d["y_train"], dtype=float),
                   d.get("kernel", "exponential"))

    @classmethod
    def from_json(cls, text: str) -> "GprModel":
        return cls.from_dict(json.loads(text))


def restart_starts(restarts: int, seed: int, bounds=LOG_BOUNDS) -> np.ndarray:
    """Seeded uniform starting points inside ``bounds``, one per restart."""
    children = np.random.SeedSequence(int(seed) & (2**64 - 1)).spawn(max(restarts, 1))
    return np.array([np.random.default_rng(c).uniform(bounds[:, 0], bounds[:, 1]) for c in children])


def fit_gpr(X, y, restarts: int = 3, seed: int = 0, kind: str = "exponential", max_iter: int = 200,
            gtol: float = 1e-6, bounds=LOG_BOUNDS) -> GprModel:
    """Multi-restart NLML minimization; keeps the lowest final NLML."""
    _check_kernel(kind)
    X, y = _prepare(None, X, y)
    if X.shape[0] < 2:
        raise InvalidConfig("fit_gpr needs at least 2 training rows")
    R = cdist(X, X)
    bounds = np.asarray(bounds, dtype=float)

    def fg(theta):
        return _nlml_and_grad(theta, R, y, kind)

    best = None
    failures = []
    for start in restart_starts(restarts, seed, bounds):
        try:
            res = projected_gradient_descent(fg, start, bounds, max_iter=max_iter, gtol=gtol)
        except NotPositiveDefinite as exc:
            failures.append(str(exc))
            continue
        if best is None or res.value < best.value:
            best = res
    if best is None:
        raise AllRestartsFailed(f"every restart failed: {failures}")
    return GprModel(Hyperparams.from_log(best.theta), X, y, kind, nlml_value=best.value)


def gpr_predict(model: GprModel, X_star, return_cov: bool = True):
    """Posterior mean ``(M,)`` and covariance ``(M, M)`` at the rows of ``X_star``."""
    X_star = _as_rows(X_star, "X_star")
    if X_star.shape[1] != model.X_train.shape[1]:
        raise ShapeMismatch(f"expected {model.X_train.shape[1]} columns, got {X_star.shape[1]}")
    K_s = gram(X_star, model.X_train, model.hyper.sigma_f, model.kind)
    mean = K_s @ model.alpha
    if not return_cov:
        return mean
    V = solve_triangular(model.chol_C, K_s.T, lower=True, check_finite=False)
    cov = gram(X_star, X_star, model.hyper.sigma_f, model.kind) - V.T @ V
    cov = 0.5 * (cov + cov.T)
    d = np.einsum("ii->i", cov)
    d[d < 0] = 0.0
    return mean, cov
