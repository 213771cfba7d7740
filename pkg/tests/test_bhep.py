import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bhep_mcar.bhep import (
    NullQuantileTable,
    bhep_complete_case,
    bhep_on_imputed,
    bhep_oracle,
    bhep_statistic,
    complete_case_covariance,
    kernel_h,
    kernel_h_quadrature,
    null_quantile_table,
    simulate_null,
    standardized_statistic,
)
from bhep_mcar.dataset import IncompleteMatrix, PerColumn, ampute_mcar
from bhep_mcar.errors import SingularCovariance, TooFewCompleteCases, TooFewRows, UnsupportedDimension
from bhep_mcar.imputation import Knn, Mean, Median
from bhep_mcar.numerics import RngStream

METHODS = [Mean(), Median(), Knn(3), Knn(6)]


def direct_statistic(x):
    """Double loop over all ordered pairs, straight from the definition."""
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    xbar = x.mean(axis=0)
    s = (x - xbar).T @ (x - xbar) / n
    w, v = np.linalg.eigh(s)
    y = (x - xbar) @ (v @ np.diag(w**-0.5) @ v.T)
    total = 0.0
    for j in range(n):
        for k in range(n):
            total += np.exp(-0.5 * np.sum((y[j] - y[k]) ** 2))
    return total / n - 2 ** (1 - d / 2) * np.exp(-0.25 * np.sum(y**2, axis=1)).sum() + n * 3 ** (-d / 2)


def amputed(seed, n=40, d=2, q=0.8):
    gen = RngStream(seed).generator()
    x = gen.standard_normal((n, d))
    return ampute_mcar(x, PerColumn((q,) * d), gen)


def random_affine(gen, d):
    while True:
        a = gen.normal(size=(d, d))
        if abs(np.linalg.det(a)) > 0.1:
            return a, gen.normal(scale=5, size=d)


class TestKernel:
    def test_value_at_center(self):
        assert abs(kernel_h(np.zeros(2), np.zeros(2), np.zeros(2), np.eye(2)) - 1 / 3) < 1e-15

    def test_value_at_center_1d(self):
        # 1 - 2 / sqrt(2) + 1 / sqrt(3)
        v = kernel_h(np.zeros(1), np.zeros(1), np.zeros(1), np.eye(1))
        assert abs(v - (1 - np.sqrt(2) + 1 / np.sqrt(3))) < 1e-15

    def test_broadcast(self):
        x = np.random.default_rng(0).normal(size=(5, 2))
        out = kernel_h(x[:, None], x[None], np.zeros(2), np.eye(2))
        assert out.shape == (5, 5)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 2))
    def test_quadrature_identity(self, seed, d):
        gen = np.random.default_rng(seed)
        a = gen.normal(size=(d, d))
        sigma = a @ a.T + 0.5 * np.eye(d)
        mu = gen.normal(size=d)
        x1, x2 = gen.normal(size=(2, d))
        exact = kernel_h(x1, x2, mu, sigma)
        assert abs(exact - kernel_h(x2, x1, mu, sigma)) < 1e-14
        assert abs(exact - kernel_h_quadrature(x1, x2, mu, sigma)) < 1e-6


class TestStatistic:
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_matches_direct_definition(self, seed, d):
        x = np.random.default_rng(seed).standard_normal((15, d))
        assert abs(bhep_statistic(x).statistic - direct_statistic(x)) < 1e-10

    def test_fixed_8x2_matches_oracle(self):
        x = np.array(
            [[0.3, -1.2], [1.1, 0.4], [-0.7, 0.9], [2.0, 1.5], [-1.4, -0.3], [0.2, 0.1], [0.9, -2.1], [-0.5, 0.6]]
        )
        assert abs(bhep_statistic(x).statistic - bhep_oracle(x)) < 1e-6

    def test_n5_d1_matches_oracle(self):
        x = RngStream(11).generator().standard_normal((5, 1))
        assert abs(bhep_statistic(x).statistic - bhep_oracle(x)) < 1e-6

    def test_oracle_converged(self):
        x = RngStream(12).generator().standard_normal((10, 2))
        assert abs(bhep_oracle(x, 30) - bhep_oracle(x, 50)) < 1e-8

    def test_oracle_limits(self):
        x = np.random.default_rng(0).standard_normal((10, 4))
        with pytest.raises(UnsupportedDimension):
            bhep_oracle(x)
        with pytest.raises(ValueError):
            bhep_oracle(x[:, :2], 20)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            bhep_statistic(np.zeros((3, 2)))

    def test_singular(self):
        x = np.random.default_rng(0).standard_normal((10, 1))
        with pytest.raises(SingularCovariance):
            bhep_statistic(np.hstack([x, 2 * x]))
        with pytest.raises(SingularCovariance):
            bhep_statistic(np.ones((10, 2)))

    def test_standardization_returned(self):
        x = np.random.default_rng(1).standard_normal((30, 2))
        v = bhep_statistic(x)
        assert_allclose(v.mean, x.mean(axis=0))
        assert_allclose(v.cov, np.cov(x.T, bias=True))
        assert v.standardization.dim == 2

    def test_extreme_sample_is_large(self):
        gen = np.random.default_rng(3)
        normal = bhep_statistic(gen.standard_normal((100, 2))).statistic
        skewed = bhep_statistic(gen.exponential(size=(100, 2)) ** 3).statistic
        assert skewed > 5 * normal

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(4, 30), st.integers(1, 3))
    def test_nonnegative_and_permutation_invariant(self, seed, n, d):
        gen = np.random.default_rng(seed)
        x = gen.standard_normal((max(n, d + 2), d))
        t = bhep_statistic(x).statistic
        assert t >= 0
        assert abs(bhep_statistic(x[gen.permutation(len(x))]).statistic - t) < 1e-10 * max(1, t)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 3))
    def test_affine_invariance(self, seed, d):
        gen = np.random.default_rng(seed)
        x = gen.standard_normal((20, d))
        a, b = random_affine(gen, d)
        assert abs(bhep_statistic(x @ a.T + b).statistic - bhep_statistic(x).statistic) < 1e-8

    def test_standardized_statistic_at_origin(self):
        # one row at the origin: 1 - 2^(1-d/2) + 3^(-d/2)
        assert abs(standardized_statistic(np.zeros((1, 2))) - 1 / 3) < 1e-15


class TestCompleteCase:
    def test_fully_observed(self):
        x = np.random.default_rng(0).standard_normal((20, 2))
        assert bhep_complete_case(IncompleteMatrix.complete(x)).statistic == bhep_statistic(x).statistic

    def test_drops_incomplete_row(self):
        x = np.random.default_rng(1).standard_normal((6, 2))
        mask = np.ones((6, 2), dtype=bool)
        mask[3, 1] = False
        v = bhep_complete_case(IncompleteMatrix(x, mask))
        assert v.statistic == bhep_statistic(np.delete(x, 3, axis=0)).statistic
        assert v.n_used == 5

    def test_too_few_complete_cases(self):
        x = np.random.default_rng(2).standard_normal((6, 2))
        mask = np.ones((6, 2), dtype=bool)
        mask[:3, 0] = False
        with pytest.raises(TooFewCompleteCases):
            bhep_complete_case(IncompleteMatrix(x, mask))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_affine_invariance(self, seed):
        data = amputed(seed)
        a, b = random_affine(np.random.default_rng(seed), 2)
        moved = IncompleteMatrix(data.values @ a.T + b, data.mask)
        assert abs(bhep_complete_case(moved).statistic - bhep_complete_case(data).statistic) < 1e-8


class TestImputed:
    @pytest.mark.parametrize("method", METHODS)
    def test_no_missing_equals_complete(self, method):
        x = np.random.default_rng(5).standard_normal((25, 2))
        data = IncompleteMatrix.complete(x)
        assert abs(bhep_on_imputed(data, method).statistic - bhep_statistic(x).statistic) < 1e-12
        v = bhep_on_imputed(data, method, sigma_center="available-case")
        assert abs(v.statistic - bhep_statistic(x).statistic) < 1e-12

    def test_covariance_uses_complete_cases(self):
        data = amputed(3)
        rows = data.values[data.mask.all(axis=1)]
        assert_allclose(complete_case_covariance(data), np.cov(rows.T, bias=True), atol=1e-14)

    def test_covariance_available_case_center(self):
        data = amputed(4)
        rows = data.values[data.mask.all(axis=1)]
        mu = np.array([data.values[data.mask[:, c], c].mean() for c in range(2)])
        assert_allclose(complete_case_covariance(data, "available-case"), (rows - mu).T @ (rows - mu) / len(rows))

    def test_bad_center(self):
        with pytest.raises(ValueError):
            complete_case_covariance(amputed(0), "imputed")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(METHODS))
    def test_translation_invariance(self, seed, method):
        data = amputed(seed)
        b = np.random.default_rng(seed).normal(scale=10, size=2)
        moved = IncompleteMatrix(data.values + b, data.mask)
        assert abs(bhep_on_imputed(moved, method).statistic - bhep_on_imputed(data, method).statistic) < 1e-8

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([Mean(), Median()]), st.integers(2, 3))
    def test_mean_median_diagonal_scaling_invariance(self, seed, method, d):
        # location-equivariant fills commute with diagonal maps
        data = amputed(seed, d=d)
        scale = np.random.default_rng(seed).uniform(0.2, 5, size=d)
        moved = IncompleteMatrix(data.values * scale, data.mask)
        assert abs(bhep_on_imputed(moved, method).statistic - bhep_on_imputed(data, method).statistic) < 1e-8

    def test_not_affine_invariant(self):
        data = amputed(0, n=30, q=0.8)
        shear = np.array([[1.0, 0.7], [0.0, 1.0]])
        moved = IncompleteMatrix(data.values @ shear.T, data.mask)
        assert abs(bhep_on_imputed(moved, Mean()).statistic - bhep_on_imputed(data, Mean()).statistic) > 1e-3

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(METHODS))
    def test_sentinel_values_ignored(self, seed, method):
        data = amputed(seed)
        noise = np.random.default_rng(seed).normal(scale=1e6, size=data.values.shape)
        other = IncompleteMatrix(np.where(data.mask, data.values, noise), data.mask)
        assert bhep_on_imputed(other, method).statistic == bhep_on_imputed(data, method).statistic
        assert bhep_complete_case(other).statistic == bhep_complete_case(data).statistic


class TestNullTable:
    def test_monotone_and_reproducible(self):
        a = null_quantile_table(60, 2, (0.5, 0.95), 10_000, RngStream(1))
        b = null_quantile_table(60, 2, (0.5, 0.95), 10_000, RngStream(1))
        assert a == b
        assert a.quantile(0.5) < a.quantile(0.95)

    def test_json_round_trip(self):
        t = null_quantile_table(20, 2, (0.9, 0.95), 1000, RngStream(2))
        assert NullQuantileTable.from_json(t.to_json()) == t
        with pytest.raises(KeyError):
            t.quantile(0.5)

    def test_small_m_rejected(self):
        with pytest.raises(ValueError):
            null_quantile_table(20, 2, (0.95,), 999, RngStream(0))

    def test_self_consistency(self):
        table = null_quantile_table(30, 2, (0.95,), 10_000, RngStream(3))
        fresh = simulate_null(30, 2, 2000, RngStream(4).generator())
        rate = np.mean(fresh > table.quantile(0.95))
        assert abs(rate - 0.05) < 0.01

    def test_sorted(self):
        draws = simulate_null(20, 1, 200, RngStream(5).generator())
        assert np.all(np.diff(draws) >= 0)
