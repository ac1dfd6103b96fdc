import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imputekit.errors import FitError
from imputekit.linear import (
    design_matrix,
    design_width,
    draw_norm_bayes,
    draw_norm_nob,
    fit_linear,
    predict_norm,
)
from imputekit.rng import seed_tree

from conftest import make_dataset


class TestFitLinear:
    def test_noiseless_line(self):
        x = np.arange(10.0)
        model = fit_linear(x[:, None], 2 * x)
        assert model.beta == pytest.approx([0.0, 2.0], abs=1e-9)
        assert model.sigma2 < 1e-18

    def test_bivariate_normal_slope(self):
        # closed form: regressing X1 on X2 = X1 + N(0, 2) gives slope
        # Cov/Var = 1/3 and residual variance 1 - 1/3 = 2/3
        rng = seed_tree(1)
        n = 5000
        x1 = rng.standard_normal(n)
        x2 = x1 + rng.standard_normal(n) * np.sqrt(2.0)
        model = fit_linear(x2[:, None], x1)
        assert model.beta[1] == pytest.approx(1 / 3, abs=0.05)
        assert model.sigma2 == pytest.approx(2 / 3, abs=0.05)

    def test_constant_target(self):
        x = np.arange(12.0)
        model = fit_linear(x[:, None], np.full(12, 4.5))
        assert model.beta == pytest.approx([4.5, 0.0], abs=1e-10)
        assert model.sigma2 < 1e-18

    def test_too_few_rows(self):
        with pytest.raises(FitError, match="rows"):
            fit_linear(np.ones((2, 2)), np.ones(2))

    def test_rank_deficiency_ridged(self):
        x = np.ones((10, 1))  # duplicate of the intercept
        model = fit_linear(np.column_stack([x, x]), np.arange(10.0))
        assert model.ridged
        assert np.isfinite(model.beta).all()

    def test_dof(self):
        model = fit_linear(np.arange(9.0)[:, None], np.arange(9.0))
        assert model.dof == 7


class TestDrawNorm:
    @pytest.fixture
    def line_model(self):
        x = np.arange(10.0)
        return fit_linear(x[:, None], 2 * x)

    @pytest.fixture
    def noisy_model(self):
        rng = seed_tree(2)
        x = rng.standard_normal(200)
        y = 1.0 + 0.5 * x + rng.standard_normal(200) * 2.0
        return fit_linear(x[:, None], y)

    def test_zero_variance_collapses_to_predict(self, line_model):
        X = np.array([[1.5], [7.0]])
        draws = draw_norm_nob(line_model, X, seed_tree(0))
        assert np.array_equal(draws, predict_norm(line_model, X))

    def test_seed_reproducibility(self, noisy_model):
        X = np.array([[0.3]])
        a = draw_norm_nob(noisy_model, X, seed_tree(5))
        b = draw_norm_nob(noisy_model, X, seed_tree(5))
        assert np.array_equal(a, b)
        a = draw_norm_bayes(noisy_model, X, seed_tree(5))
        b = draw_norm_bayes(noisy_model, X, seed_tree(5))
        assert np.array_equal(a, b)

    def test_moment_convergence(self, noisy_model):
        # law of large numbers on the specified N(x beta, sigma2) draw
        X = np.repeat([[0.7]], 100_000, axis=0)
        draws = draw_norm_nob(noisy_model, X, seed_tree(9))
        mu = predict_norm(noisy_model, X[:1])[0]
        sd = np.sqrt(noisy_model.sigma2)
        assert abs(draws.mean() - mu) < 4 * sd / np.sqrt(draws.size)
        assert abs(draws.var() / noisy_model.sigma2 - 1) < 0.05

    def test_predict_deterministic(self, noisy_model):
        X = np.linspace(-1, 1, 7)[:, None]
        assert np.array_equal(predict_norm(noisy_model, X), predict_norm(noisy_model, X))

    def test_predict_matches_draw_mean(self, noisy_model):
        X = np.repeat([[0.2]], 100_000, axis=0)
        draws = draw_norm_nob(noisy_model, X, seed_tree(11))
        mu = predict_norm(noisy_model, X[:1])[0]
        assert abs(draws.mean() - mu) < 4 * np.sqrt(noisy_model.sigma2 / draws.size)

    def test_shape_mismatch(self, noisy_model):
        with pytest.raises(FitError):
            predict_norm(noisy_model, np.ones((3, 2)))


class TestDrawBayes:
    def test_noiseless_collapse(self):
        x = np.arange(10.0)
        model = fit_linear(x[:, None], 2 * x)
        X = np.array([[3.0], [4.0]])
        draws = draw_norm_bayes(model, X, seed_tree(3))
        assert draws == pytest.approx([6.0, 8.0], abs=1e-7)

    def test_parameter_uncertainty_inflates_variance(self):
        # nested-variance oracle by simulation: Bayes draws add coefficient
        # and variance resampling on top of the residual noise, so their
        # variance strictly exceeds the fixed-parameter draw variance
        rng = seed_tree(4)
        n = 20
        x = rng.standard_normal(n)
        y = 1.0 + 0.5 * x + rng.standard_normal(n)
        model = fit_linear(x[:, None], y)
        X = np.repeat([[2.5]], 10_000, axis=0)  # far from the design center
        v_nob = draw_norm_nob(model, X, seed_tree(6)).var()
        v_bayes = draw_norm_bayes_many(model, X, seed_tree(7)).var()
        assert v_bayes > v_nob * 1.1

    def test_rejects_zero_dof(self):
        x = np.arange(10.0)
        model = fit_linear(x[:, None], 2 * x)
        object.__setattr__(model, "dof", 0)
        with pytest.raises(FitError):
            draw_norm_bayes(model, np.array([[1.0]]), seed_tree(0))


def draw_norm_bayes_many(model, X, rng):
    # one bayes draw resamples (sigma2*, beta*) once for the whole vector;
    # variance inflation needs fresh parameters per draw
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = draw_norm_bayes(model, X[i : i + 1], rng)[0]
    return out


class TestDesignMatrix:
    def test_one_hot_reference_level(self):
        ds = make_dataset(
            [[1.0, 0], [2.0, 1], [3.0, 2], [4.0, 0]], ["num", ["a", "b", "c"]]
        )
        X = design_matrix(ds.values, ds.columns, [0, 1], np.arange(4))
        assert X.shape == (4, 3)
        assert X[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0]
        assert X[:, 1].tolist() == [0.0, 1.0, 0.0, 0.0]  # level b
        assert X[:, 2].tolist() == [0.0, 0.0, 1.0, 0.0]  # level c
        assert design_width(ds.columns, [0, 1]) == 4

    @settings(max_examples=25, deadline=None)
    @given(
        beta=st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=4),
        seed=st.integers(0, 10_000),
    )
    def test_recovers_coefficients_within_4_se(self, beta, seed):
        beta = np.array(beta)
        rng = seed_tree(seed)
        n = 400
        X = rng.standard_normal((n, beta.size - 1))
        y = beta[0] + X @ beta[1:] + rng.standard_normal(n) * 0.8
        model = fit_linear(X, y)
        se = np.sqrt(np.maximum(model.sigma2, 1e-30) * np.diag(model.xtx_inv))
        assert np.all(np.abs(model.beta - beta) <= 4 * se + 1e-9)
