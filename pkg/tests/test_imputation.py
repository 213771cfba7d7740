import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from bhep_mcar.dataset import IncompleteMatrix, PerColumn, ampute_mcar
from bhep_mcar.errors import EmptyColumn, NoDonor
from bhep_mcar.imputation import Knn, Mean, Median, fitted_mean, impute, parse_method
from bhep_mcar.numerics import RngStream

METHODS = [Mean(), Median(), Knn(1), Knn(3), Knn(6), Knn(3, aggregate="median")]


def nan_matrix(rows):
    return IncompleteMatrix.from_nan(np.array(rows, dtype=float))


def random_incomplete(seed, n=25, d=3, q=0.7):
    gen = RngStream(seed).generator()
    x = gen.standard_normal((n, d))
    data = ampute_mcar(x, PerColumn((q,) * d), gen)
    mask = data.mask.copy()
    mask[0] = True  # no empty column
    return IncompleteMatrix(x, mask)


class TestExamples:
    def test_mean(self):
        assert_array_equal(impute(nan_matrix([[1], [np.nan], [3]]), Mean())[:, 0], [1, 2, 3])

    def test_median(self):
        out = impute(nan_matrix([[1], [np.nan], [3], [100]]), Median())
        assert out[1, 0] == 3

    def test_median_even_count(self):
        out = impute(nan_matrix([[1], [np.nan], [3], [5], [100]]), Median())
        assert out[1, 0] == 4

    def test_knn_tie_goes_to_lower_index(self):
        out = impute(nan_matrix([[0, 0], [10, 10], [5, np.nan]]), Knn(1))
        assert out[2, 1] == 0

    def test_knn_average(self):
        out = impute(nan_matrix([[0, 0], [10, 10], [5, np.nan], [100, 7]]), Knn(2))
        assert out[2, 1] == 5

    def test_knn_shared_coordinate_scaling(self):
        # donor 1 shares two coordinates: sqrt(1 + 1) / 2 < donor 0's 1.0 / 1
        rows = [[1.0, np.nan, 50.0], [1.0, 1.0, 20.0], [0.0, 0.0, np.nan]]
        out = impute(nan_matrix(rows), Knn(1))
        assert out[2, 2] == 20.0

    def test_fitted_mean_median_skewed(self):
        assert fitted_mean(nan_matrix([[0], [0], [np.nan], [9]]), Median())[0] == 2.25

    def test_parse(self):
        assert parse_method("knn6") == Knn(6)
        assert parse_method("MEAN") == Mean()
        with pytest.raises(ValueError):
            parse_method("mode")


class TestErrors:
    @pytest.mark.parametrize("method", METHODS)
    def test_empty_column(self, method):
        with pytest.raises(EmptyColumn):
            impute(nan_matrix([[1, np.nan], [2, np.nan], [3, np.nan]]), method)

    def test_orphan_row_error(self):
        data = nan_matrix([[1, 2], [3, 4], [np.nan, np.nan]])
        with pytest.raises(NoDonor):
            impute(data, Knn(2, fallback="error"))

    def test_orphan_row_falls_back_to_mean(self):
        data = nan_matrix([[1, 2], [3, 4], [np.nan, np.nan]])
        assert_array_equal(impute(data, Knn(2))[2], [2, 3])

    def test_bad_k(self):
        with pytest.raises(ValueError):
            Knn(0)


class TestProperties:
    @pytest.mark.parametrize("method", METHODS)
    def test_complete_data_unchanged(self, method):
        x = np.random.default_rng(0).standard_normal((10, 2))
        assert_array_equal(impute(IncompleteMatrix.complete(x), method), x)
        assert_allclose(fitted_mean(IncompleteMatrix.complete(x), method), x.mean(axis=0))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(METHODS))
    def test_mask_fidelity_and_idempotence(self, seed, method):
        data = random_incomplete(seed)
        out = impute(data, method)
        assert np.all(np.isfinite(out))
        assert_array_equal(out[data.mask], data.values[data.mask])
        again = impute(IncompleteMatrix.complete(out), method)
        assert_array_equal(again, out)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_mean_preserves_column_means(self, seed):
        data = random_incomplete(seed)
        available = np.array([data.values[data.mask[:, c], c].mean() for c in range(data.d)])
        assert np.abs(fitted_mean(data, Mean()) - available).max() < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(METHODS))
    def test_sentinel_values_ignored(self, seed, method):
        data = random_incomplete(seed)
        noise = np.random.default_rng(seed).normal(scale=1e6, size=data.values.shape)
        other = IncompleteMatrix(np.where(data.mask, data.values, noise), data.mask)
        assert_array_equal(impute(data, method), impute(other, method))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([Knn(1), Knn(3), Knn(6)]))
    def test_knn_row_permutation(self, seed, method):
        # continuous values, so no distance ties: the output permutes with the rows
        gen = np.random.default_rng(seed)
        x = gen.standard_normal((20, 3))
        mask = gen.random((20, 3)) < 0.75
        mask[0] = True
        perm = gen.permutation(20)
        out = impute(IncompleteMatrix(x, mask), method)
        shuffled = impute(IncompleteMatrix(x[perm], mask[perm]), method)
        assert_allclose(shuffled, out[perm], rtol=0, atol=1e-12)
