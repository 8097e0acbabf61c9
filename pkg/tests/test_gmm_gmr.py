import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gaussian_condition, trapezoid_integral

from ccadrive.errors import DegenerateData, InvalidConfig, ShapeMismatch
from ccadrive.gmm_gmr import (
    REG_COVAR,
    GmmModel,
    bic,
    component_predictions,
    fit_gmm,
    fit_gmr,
    gmm_density,
    gmr_predict,
    responsibilities,
    select_k_bic,
)


def _model_1d(weights, means, stds):
    K = len(weights)
    return GmmModel(np.array(weights), np.array(means, float).reshape(K, 1),
                    (np.array(stds, float) ** 2).reshape(K, 1, 1), (), (0,))


def _random_joint(rng, K=3, D=3):
    w = rng.dirichlet(np.ones(K))
    mu = rng.normal(size=(K, D)) * 2
    A = rng.normal(size=(K, D, D))
    cov = A @ np.swapaxes(A, 1, 2) + 0.2 * np.eye(D)
    return GmmModel(w, mu, cov, tuple(range(D - 1)), (D - 1,))


def _two_blob_data(seed, n=2000):
    rng = np.random.default_rng(seed)
    labels = rng.random(n) < 0.5
    return np.where(labels, -5.0, 5.0) + rng.normal(size=n)


class TestModel:
    def test_rejects_bad_weights(self):
        with pytest.raises(InvalidConfig):
            _model_1d([0.6, 0.6], [0, 1], [1, 1])

    def test_rejects_non_pd(self):
        with pytest.raises(InvalidConfig):
            GmmModel(np.ones(1), np.zeros((1, 2)), np.array([[[1.0, 2.0], [2.0, 1.0]]]), (0,), (1,))

    def test_rejects_bad_partition(self):
        with pytest.raises(InvalidConfig):
            GmmModel(np.ones(1), np.zeros((1, 2)), np.eye(2)[None], (0,), (0,))

    def test_json_round_trip(self, rng):
        model = _random_joint(rng)
        back = GmmModel.from_json(model.to_json())
        np.testing.assert_array_equal(back.covariances, model.covariances)
        assert back.input_dims == model.input_dims and back.output_dims == model.output_dims
        assert back.to_json() == model.to_json()

    def test_json_revalidates(self, rng):
        d = _random_joint(rng).to_dict()
        d["weights"] = [0.5, 0.5, 0.5]
        with pytest.raises(InvalidConfig):
            GmmModel.from_dict(d)


class TestDensity:
    def test_standard_normal_mode(self):
        assert gmm_density(_model_1d([1.0], [0.0], [1.0]), [0.0]) == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-15)

    def test_mixture_collapse(self):
        single = _model_1d([1.0], [0.3], [1.7])
        double = _model_1d([0.5, 0.5], [0.3, 0.3], [1.7, 1.7])
        for x in (-2.0, 0.0, 0.3, 4.1):
            assert gmm_density(double, [x]) == pytest.approx(gmm_density(single, [x]), rel=1e-14)

    def test_integrates_to_one(self):
        model = _model_1d([0.2, 0.5, 0.3], [-3.0, 0.5, 4.0], [0.7, 1.2, 0.4])
        total = trapezoid_integral(lambda x: gmm_density(model, x[:, None]), -20, 20)
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_matches_scipy_free_formula(self, rng):
        model = _random_joint(rng, K=2, D=2)
        x = rng.normal(size=2)
        expected = 0.0
        for w, m, c in zip(model.weights, model.means, model.covariances):
            d = x - m
            expected += w * np.exp(-0.5 * d @ np.linalg.inv(c) @ d) / (2 * np.pi * np.sqrt(np.linalg.det(c)))
        assert gmm_density(model, x) == pytest.approx(expected, rel=1e-12)

    def test_shape_check(self):
        with pytest.raises(ShapeMismatch):
            gmm_density(_model_1d([1.0], [0.0], [1.0]), [0.0, 1.0])


class TestFitGmm:
    def test_k1_closed_form(self, rng):
        X = rng.normal(size=(300, 3)) @ rng.normal(size=(3, 3))
        model, trace = fit_gmm(X, K=1)
        np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(model.covariances[0], np.cov(X, rowvar=False, bias=True) + REG_COVAR * np.eye(3),
                                   atol=1e-10)
        assert trace.n_iter == 1 and trace.converged

    def test_two_component_recovery(self):
        model, trace = fit_gmm(_two_blob_data(0), K=2, seed=0)
        order = np.argsort(model.means[:, 0])
        np.testing.assert_allclose(model.means[order, 0], [-5.0, 5.0], atol=0.1)
        np.testing.assert_allclose(model.weights, 0.5, atol=0.05)
        assert trace.converged

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), K=st.integers(1, 4), D=st.integers(1, 3))
    def test_log_likelihood_monotone(self, seed, K, D):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(loc=rng.normal(scale=3, size=D), size=(40, D)) for _ in range(3)])
        _, trace = fit_gmm(X, K=K, seed=seed)
        ll = np.array(trace.log_likelihoods)
        if not trace.reseeded:
            assert np.all(np.diff(ll) >= -1e-9)

    def test_deterministic(self, rng):
        X = rng.normal(size=(200, 2))
        a, ta = fit_gmm(X, K=3, seed=4)
        b, tb = fit_gmm(X, K=3, seed=4)
        assert a.to_json() == b.to_json()
        assert ta.log_likelihoods == tb.log_likelihoods

    def test_too_few_rows(self):
        with pytest.raises(DegenerateData):
            fit_gmm(np.zeros((5, 2)), K=2)

    def test_duplicate_rows_stay_pd(self):
        X = np.repeat(np.array([[0.0, 1.0], [3.0, -1.0], [1.0, 1.0]]), 20, axis=0)
        model, _ = fit_gmm(X, K=3)
        for c in model.covariances:
            np.linalg.cholesky(c)

    def test_max_iter_respected(self, rng):
        _, trace = fit_gmm(rng.normal(size=(300, 2)), K=4, max_iter=3, tol=0.0)
        assert trace.n_iter == 3 and not trace.converged

    def test_bic_prefers_true_k(self):
        x = _two_blob_data(1, 600)
        y = np.zeros_like(x)
        y += np.random.default_rng(2).normal(size=x.size)
        assert select_k_bic(x[:, None], y, range(1, 5)) == 2
        model, _ = fit_gmm(np.column_stack([x, y]), K=2)
        assert np.isfinite(bic(model, np.column_stack([x, y])))


class TestResponsibilities:
    def test_single_component(self, rng):
        model = _random_joint(rng, K=1)
        np.testing.assert_array_equal(responsibilities(model, [0.3, -1.0]), [1.0])

    def test_symmetric_midpoint(self):
        cov = np.array([np.eye(2), np.eye(2)])
        model = GmmModel(np.array([0.5, 0.5]), np.array([[-2.0, 0.0], [2.0, 1.0]]), cov, (0,), (1,))
        np.testing.assert_allclose(responsibilities(model, [0.0]), [0.5, 0.5], atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31), x=st.lists(st.floats(-50, 50), min_size=2, max_size=2))
    def test_probability_vector(self, seed, x):
        h = responsibilities(_random_joint(np.random.default_rng(seed)), x)
        assert abs(h.sum() - 1.0) < 1e-12
        assert np.all((h >= 0) & (h <= 1))

    def test_batch_matches_single(self, rng):
        model = _random_joint(rng)
        X = rng.normal(size=(5, 2))
        H = responsibilities(model, X)
        for i in range(5):
            np.testing.assert_allclose(H[i], responsibilities(model, X[i]), atol=1e-15)


class TestGmrPredict:
    def test_linear_relation(self, rng):
        x = rng.normal(size=500)
        model, _ = fit_gmr(x[:, None], 2 * x, K=1)
        mean, _ = gmr_predict(model, [1.0])
        assert mean[0] == pytest.approx(2.0, abs=1e-3)

    def test_k1_matches_gaussian_conditioning(self, rng):
        model = _random_joint(rng, K=1, D=4)
        model = GmmModel(model.weights, model.means, model.covariances, (0, 2), (1, 3))
        x_in = rng.normal(size=2)
        mean, cov = gmr_predict(model, x_in)
        m_ref, c_ref = gaussian_condition(model.means[0], model.covariances[0], [0, 2], [1, 3], x_in)
        np.testing.assert_allclose(mean, m_ref, atol=1e-8)
        np.testing.assert_allclose(cov, c_ref, atol=1e-8)

    def test_beats_linear_fit_on_parabola(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-2, 2, 2000)
        y = x**2 + 0.1 * rng.normal(size=x.size)
        model, _ = fit_gmr(x[:, None], y, K=5, seed=0)
        grid = np.linspace(-1.9, 1.9, 200)
        pred, _ = gmr_predict(model, grid[:, None])
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        lin = coef[0] + coef[1] * grid
        truth = grid**2
        assert np.sqrt(np.mean((pred[:, 0] - truth) ** 2)) < np.sqrt(np.mean((lin - truth) ** 2))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31), x=st.lists(st.floats(-20, 20), min_size=2, max_size=2))
    def test_convex_combination(self, seed, x):
        model = _random_joint(np.random.default_rng(seed))
        mean, cov = gmr_predict(model, x)
        m = component_predictions(model, x)[0]
        tol = 1e-9 * max(1.0, np.abs(m).max())
        assert np.all(m.min(axis=0) - tol <= mean) and np.all(mean <= m.max(axis=0) + tol)
        assert np.all(np.linalg.eigvalsh(cov) > -1e-10)

    def test_batch_shapes(self, rng):
        model = _random_joint(rng, K=2, D=4)
        mean, cov = gmr_predict(model, rng.normal(size=(7, 3)))
        assert mean.shape == (7, 1) and cov.shape == (7, 1, 1)

    def test_restarts_keep_best(self, rng):
        X = rng.normal(size=(300, 1))
        Y = np.sin(2 * X[:, 0]) + 0.1 * rng.normal(size=300)
        _, t1 = fit_gmr(X, Y, K=4, seed=3, restarts=1)
        _, t3 = fit_gmr(X, Y, K=4, seed=3, restarts=3)
        assert t3.log_likelihoods[-1] >= t1.log_likelihoods[-1]

    def test_input_shape_check(self, rng):
        with pytest.raises(ShapeMismatch):
            gmr_predict(_random_joint(rng), [1.0, 2.0, 3.0])
