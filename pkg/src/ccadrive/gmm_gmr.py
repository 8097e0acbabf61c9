"""
Full-covariance Gaussian mixture fitted by EM, and Gaussian mixture
regression (conditional expectation of the output block given the input
block, weighted by input-marginal responsibilities).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import logsumexp

from .errors import DegenerateData, InvalidConfig, NumericalCollapse, ShapeMismatch

LOG_2PI = np.log(2 * np.pi)
REG_COVAR = 1e-6
MIN_WEIGHT = 1e-12


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    input_dims: tuple[int, ...]
    output_dims: tuple[int, ...]

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        mu = np.array(self.means, dtype=float)
        cov = np.array(self.covariances, dtype=float)
        K = w.size
        if K < 1 or mu.ndim != 2 or mu.shape[0] != K:
            raise ShapeMismatch(f"means shape {mu.shape} does not match {K} weights")
        D = mu.shape[1]
        if cov.shape != (K, D, D):
            raise ShapeMismatch(f"covariances shape {cov.shape}, expected {(K, D, D)}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidConfig("mixture weights must be non-negative and sum to 1")
        if not np.allclose(cov, np.swapaxes(cov, 1, 2), rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise InvalidConfig("component covariances must be symmetric")
        for k in range(K):
            try:
                np.linalg.cholesky(cov[k])
            except np.linalg.LinAlgError:
                raise InvalidConfig(f"covariance of component {k} is not positive definite") from None
        inp, out = tuple(int(i) for i in self.input_dims), tuple(int(i) for i in self.output_dims)
        if sorted(inp + out) != list(range(D)):
            raise InvalidConfig(f"input {inp} and output {out} dims must partition 0..{D - 1}")
        for name, arr in (("weights", w), ("means", mu), ("covariances", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "input_dims", inp)
        object.__setattr__(self, "output_dims", out)

    @property
    def K(self) -> int:
        return self.weights.size

    @property
    def D(self) -> int:
        return self.means.shape[1]

    def n_parameters(self) -> int:
        D = self.D
        return self.K * (D + D * (D + 1) // 2) + self.K - 1

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": [c.reshape(-1).tolist() for c in self.covariances],
            "input_dims": list(self.input_dims),
            "output_dims": list(self.output_dims),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "GmmModel":
        K = int(d["K"])
        means = np.asarray(d["means"], dtype=float).reshape(K, -1)
        D = means.shape[1]
        covs = np.asarray(d["covariances"], dtype=float).reshape(K, D, D)
        return cls(np.asarray(d["weights"], dtype=float), means, covs,
                   tuple(d["input_dims"]), tuple(d["output_dims"]))

    @classmethod
    def from_json(cls, text: str) -> "GmmModel":
        return cls.from_dict(json.loads(text))


@dataclass
class EmTrace:
    log_likelihoods: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    reseeded: bool = False


def _component_logpdf(X, mean, cov) -> np.ndarray:
    """log N(x | mean, cov) for each row of X, via Cholesky."""
    L = np.linalg.cholesky(cov)
    z = solve_triangular(L, (X - mean).T, lower=True, check_finite=False)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    return -0.5 * (mean.size * LOG_2PI + logdet + np.einsum("ij,ij->j", z, z))


def _weighted_logpdf(X, weights, means, covs) -> np.ndarray:
    """(N, K) matrix of log(pi_k) + log N(x_n | mu_k, Sigma_k)."""
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return np.column_stack([logw[k] + _component_logpdf(X, means[k], covs[k]) for k in range(len(weights))])


def gmm_logpdf(model: GmmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.D:
        raise ShapeMismatch(f"expected {model.D} columns, got {X.shape[1]}")
    return logsumexp(_weighted_logpdf(X, model.weights, model.means, model.covariances), axis=1)


def gmm_density(model: GmmModel, x) -> float | np.ndarray:
    """Mixture density at one point (1-D input) or at each row (2-D input)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    single = x.ndim == 1
    if single and x.size != model.D:
        raise ShapeMismatch(f"expected a vector of length {model.D}, got {x.size}")
    dens = np.exp(gmm_logpdf(model, x[None, :] if single else x))
    return float(dens[0]) if single else dens


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------


def kmeans_pp(X, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: indices of K rows of X."""
    N = X.shape[0]
    chosen = [int(rng.integers(N))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(N, p=d2 / total))
        else:
            idx = int(rng.integers(N))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(chosen)


def _m_step(X, resp, reg):
    N, D = X.shape
    nk = resp.sum(axis=0)
    weights = nk / N
    safe = np.where(nk > 0, nk, 1.0)
    means = (resp.T @ X) / safe[:, None]
    covs = np.empty((resp.shape[1], D, D))
    for k in range(resp.shape[1]):
        diff = X - means[k]
        covs[k] = (resp[:, k, None] * diff).T @ diff / safe[k]
        covs[k] = 0.5 * (covs[k] + covs[k].T) + reg * np.eye(D)
    return weights / weights.sum(), means, covs


def _default_dims(D, input_dims, output_dims):
    if input_dims is None and output_dims is None:
        return tuple(range(D - 1)), (D - 1,)
    if output_dims is None:
        output_dims = tuple(i for i in range(D) if i not in set(input_dims))
    if input_dims is None:
        input_dims = tuple(i for i in range(D) if i not in set(output_dims))
    return tuple(input_dims), tuple(output_dims)


def fit_gmm(data, K: int = 5, seed: int = 0, tol: float = 1e-7, max_iter: int = 500,
            reg: float = REG_COVAR, input_dims=None, output_dims=None) -> tuple[GmmModel, EmTrace]:
    """Fit a K-component full-covariance mixture by EM.

    Initialization assigns every row to its nearest k-means++ seed. The
    trace holds the log-likelihood of the parameters entering each
    iteration, so ``log_likelihoods[-1]`` belongs to the returned model.
    By default the last column is the output block for regression.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N, D = X.shape
    if K < 1:
        raise InvalidConfig("K must be >= 1")
    if N < K * (D + 1):
        raise DegenerateData(f"need at least K*(D+1) = {K * (D + 1)} rows, got {N}")
    if not np.all(np.isfinite(X)):
        raise DegenerateData("data contains non-finite values")
    input_dims, output_dims = _default_dims(D, input_dims, output_dims)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))

    centers = X[kmeans_pp(X, K, rng)]
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((N, K))
    resp[np.arange(N), np.argmin(d2, axis=1)] = 1.0
    weights, means, covs = _m_step(X, resp, reg)

    trace = EmTrace()
    prev = None
    for it in range(max_iter + 1):
        if np.any(weights < MIN_WEIGHT):
            if trace.reseeded:
                raise NumericalCollapse(f"component weight fell below {MIN_WEIGHT} twice")
            weights, means, covs = _reseed(X, weights, means, covs, reg)
            trace.reseeded = True
            prev = None
        logp = _weighted_logpdf(X, weights, means, covs)
        log_norm = logsumexp(logp, axis=1)
        ll = float(log_norm.sum())
        trace.log_likelihoods.append(ll)
        if prev is not None and (ll - prev) <= tol * abs(prev):
            trace.converged = True
            break
        if it == max_iter:
            break
        prev = ll
        resp = np.exp(logp - log_norm[:, None])
        weights, means, covs = _m_step(X, resp, reg)
        trace.n_iter = it + 1

    model = GmmModel(weights, means, covs, input_dims, output_dims)
    return model, trace


def _reseed(X, weights, means, covs, reg):
    """Move every collapsed component onto the worst-explained row."""
    weights, means, covs = weights.copy(), means.copy(), covs.copy()
    ok = weights >= MIN_WEIGHT
    logp = logsumexp(_weighted_logpdf(X, weights[ok] / weights[ok].sum(), means[ok], covs[ok]), axis=1)
    global_cov = np.cov(X, rowvar=False, bias=True).reshape(X.shape[1], X.shape[1]) + reg * np.eye(X.shape[1])
    for k in np.flatnonzero(~ok):
        means[k] = X[int(np.argmin(logp))]
        covs[k] = global_cov
        weights[k] = 1.0 / X.shape[0]
    return weights / weights.sum(), means, covs


def bic(model: GmmModel, data) -> float:
    X = np.asarray(data, dtype=float)
    return -2.0 * float(gmm_logpdf(model, X).sum()) + model.n_parameters() * np.log(X.shape[0])


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------


def _split(model: GmmModel):
    i, o = list(model.input_dims), list(model.output_dims)
    mu_i = model.means[:, i]
    mu_o = model.means[:, o]
    s_ii = model.covariances[:, i][:, :, i]
    s_oi = model.covariances[:, o][:, :, i]
    s_oo = model.covariances[:, o][:, :, o]
    return mu_i, mu_o, s_ii, s_oi, s_oo


def _check_input(model: GmmModel, x_in):
    x = np.asarray(x_in, dtype=float)
    single = x.ndim <= 1
    x = np.atleast_2d(x.reshape(1, -1) if single else x)
    if x.shape[1] != len(model.input_dims):
        raise ShapeMismatch(f"expected {len(model.input_dims)} input values, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ShapeMismatch("input contains non-finite values")
    return x, single


def _log_responsibilities(model: GmmModel, X):
    if not model.input_dims:
        return np.tile(np.log(model.weights), (X.shape[0], 1))
    mu_i, _, s_ii, _, _ = _split(model)
    logp = _weighted_logpdf(X, model.weights, mu_i, s_ii)
    return logp - logsumexp(logp, axis=1, keepdims=True)


def responsibilities(model: GmmModel, x_in) -> np.ndarray:
    """Posterior component probabilities under the input marginals.

    Returns shape ``(K,)`` for one input vector or ``(M, K)`` for a batch.
    """
    X, single = _check_input(model, x_in)
    h = np.exp(_log_responsibilities(model, X))
    h /= h.sum(axis=1, keepdims=True)
    return h[0] if single else h


def component_predictions(model: GmmModel, x_in) -> np.ndarray:
    """Per-component conditional means, shape ``(M, K, q)``."""
    X, _ = _check_input(model, x_in)
    mu_i, mu_o, s_ii, s_oi, _ = _split(model)
    out = np.empty((X.shape[0], model.K, len(model.output_dims)))
    for k in range(model.K):
        if model.input_dims:
            gain = cho_solve(cho_factor(s_ii[k]), s_oi[k].T).T
            out[:, k] = mu_o[k] + (X - mu_i[k]) @ gain.T
        else:
            out[:, k] = mu_o[k]
    return out


def gmr_predict(model: GmmModel, x_in) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and covariance of the outputs given ``x_in``.

    One vector in gives ``(q,)`` and ``(q, q)``; a batch gives ``(M, q)``
    and ``(M, q, q)``.
    """
    if not model.output_dims:
        raise ShapeMismatch("model has no output dimensions")
    X, single = _check_input(model, x_in)
    _, _, s_ii, s_oi, s_oo = _split(model)
    h = responsibilities(model, X)
    m = component_predictions(model, X)
    mean = np.einsum("mk,mkq->mq", h, m)

    cond = np.empty_like(s_oo)
    for k in range(model.K):
        if model.input_dims:
            cond[k] = s_oo[k] - s_oi[k] @ cho_solve(cho_factor(s_ii[k]), s_oi[k].T)
        else:
            cond[k] = s_oo[k]
    # law of total variance over the component posterior
    second = np.einsum("mk,kpq->mpq", h, cond) + np.einsum("mk,mkp,mkq->mpq", h, m, m)
    cov = second - np.einsum("mp,mq->mpq", mean, mean)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    if single:
        return mean[0], cov[0]
    return mean, cov


def fit_gmr(X, Y, K: int = 5, seed: int = 0, restarts: int = 1, tol: float = 1e-7,
            max_iter: int = 500) -> tuple[GmmModel, EmTrace]:
    """Best-of-``restarts`` joint mixture over ``[X, Y]`` for regression."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    data = np.hstack([X, Y])
    d_in = X.shape[1]
    dims = tuple(range(d_in)), tuple(range(d_in, data.shape[1]))
    seeds = np.random.SeedSequence(int(seed) & (2**64 - 1)).generate_state(max(restarts, 1), np.uint64)
    best = None
    for s in seeds:
        model, trace = fit_gmm(data, K, int(s), tol, max_iter, input_dims=dims[0], output_dims=dims[1])
        if best is None or trace.log_likelihoods[-1] > best[1].log_likelihoods[-1]:
            best = (model, trace)
    return best


def select_k_bic(X, Y, k_range=range(1, 9), seed: int = 0, restarts: int = 1) -> int:
    data = np.hstack([np.asarray(X, dtype=float), np.asarray(Y, dtype=float).reshape(len(X), -1)])
    scores = {}
    for K in k_range:
        if data.shape[0] < K * (data.shape[1] + 1):
            break
        model, _ = fit_gmr(X, Y, K, seed, restarts)
        scores[K] = bic(model, data)
    return min(scores, key=scores.get)
