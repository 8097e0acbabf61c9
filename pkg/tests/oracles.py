"""Independent reference computations used by the tests.

None of these call into the code paths they check: CCA is maximized by
grid search over projection directions, GP quantities use explicit dense
inverses and determinants, densities are integrated by quadrature.
"""

import numpy as np


def correlation_objective(X, Y, a, b):
    """Sample correlation of the projections X a and Y b (vectorized over a's columns)."""
    u = (X - X.mean(axis=0)) @ a
    v = (Y - Y.mean(axis=0)) @ b
    num = (u * v).sum(axis=0)
    return num / np.sqrt((u * u).sum(axis=0) * (v * v).sum(axis=0))


def _directions(dim, n_grid):
    if dim == 1:
        return np.array([[1.0]])
    # half circle suffices: a and -a give the same |rho|
    ang = np.linspace(0.0, np.pi, n_grid, endpoint=False)
    return np.vstack([np.cos(ang), np.sin(ang)])


def brute_force_rho1(X, Y, n_grid=1440):
    """max |corr(X a, Y b)| over unit a, b by exhaustive grid (n, m <= 2)."""
    X = np.atleast_2d(X.T).T
    Y = np.atleast_2d(Y.T).T
    A = _directions(X.shape[1], n_grid)
    B = _directions(Y.shape[1], n_grid)
    U = (X - X.mean(axis=0)) @ A
    V = (Y - Y.mean(axis=0)) @ B
    U /= np.sqrt((U * U).sum(axis=0))
    V /= np.sqrt((V * V).sum(axis=0))
    return float(np.abs(U.T @ V).max())


def exp_kernel_dense(X, X2, sigma_f):
    X = np.atleast_2d(X)
    X2 = np.atleast_2d(X2)
    K = np.empty((X.shape[0], X2.shape[0]))
    for i in range(X.shape[0]):
        for j in range(X2.shape[0]):
            K[i, j] = np.exp(-np.sqrt(np.sum((X[i] - X2[j]) ** 2)) / sigma_f)
    return K


def dense_C(X, sigma_f, sigma_n, jitter=1e-10):
    return exp_kernel_dense(X, X, sigma_f) + (sigma_n**2 + jitter) * np.eye(len(X))


def dense_nlml(X, y, sigma_f, sigma_n, jitter=1e-10):
    C = dense_C(X, sigma_f, sigma_n, jitter)
    _, logdet = np.linalg.slogdet(C)
    return 0.5 * y @ np.linalg.inv(C) @ y + 0.5 * logdet + 0.5 * len(y) * np.log(2 * np.pi)


def dense_posterior(X, y, X_star, sigma_f, sigma_n, jitter=1e-10):
    C_inv = np.linalg.inv(dense_C(X, sigma_f, sigma_n, jitter))
    K_s = exp_kernel_dense(X_star, X, sigma_f)
    mean = K_s @ C_inv @ y
    cov = exp_kernel_dense(X_star, X_star, sigma_f) - K_s @ C_inv @ K_s.T
    return mean, cov


def central_difference(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def trapezoid_integral(f, lo, hi, n=200001):
    x = np.linspace(lo, hi, n)
    return np.trapezoid(f(x), x)


def gaussian_condition(mean, cov, in_idx, out_idx, x_in):
    """Textbook conditional mean/cov of a joint Gaussian, via explicit inverse."""
    mi, mo = mean[in_idx], mean[out_idx]
    s_ii = cov[np.ix_(in_idx, in_idx)]
    s_oi = cov[np.ix_(out_idx, in_idx)]
    s_oo = cov[np.ix_(out_idx, out_idx)]
    inv = np.linalg.inv(s_ii)
    return mo + s_oi @ inv @ (x_in - mi), s_oo - s_oi @ inv @ s_oi.T
