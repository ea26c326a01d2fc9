import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from migselect.data import (Dataset, DegenerateColumnError, complete_cases,
                            rows_observed_on, standardize)


def make_ds(X, mask=None, y=None, names=None):
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if mask is None:
        mask = np.zeros((n, p), dtype=bool)
    if y is None:
        y = np.arange(n, dtype=float)
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(y=y, X=X, mask=mask, names=names)


class TestDatasetValidation:
    def test_rejects_missing_response(self):
        with pytest.raises(ValueError, match="response"):
            make_ds(np.ones((3, 2)), y=np.array([1.0, np.nan, 3.0]))

    def test_rejects_mask_shape_mismatch(self):
        with pytest.raises(ValueError, match="mask"):
            make_ds(np.ones((3, 2)), mask=np.zeros((3, 3), dtype=bool))

    def test_rejects_name_count_mismatch(self):
        with pytest.raises(ValueError, match="names"):
            make_ds(np.ones((3, 2)), names=("a",))

    def test_arrays_are_read_only(self):
        ds = make_ds(np.ones((3, 2)))
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5.0


class TestCompleteCases:
    def test_no_missingness_returns_all_rows(self):
        ds = make_ds(np.ones((3, 2)))
        assert complete_cases(ds).tolist() == [0, 1, 2]

    def test_single_masked_row_excluded(self):
        mask = np.zeros((3, 2), dtype=bool)
        mask[1, 0] = True
        ds = make_ds(np.ones((3, 2)), mask=mask)
        assert complete_cases(ds).tolist() == [0, 2]

    def test_all_rows_masked_gives_empty(self):
        mask = np.zeros((3, 2), dtype=bool)
        mask[:, 1] = True
        ds = make_ds(np.ones((3, 2)), mask=mask)
        assert complete_cases(ds).size == 0


class TestRowsObservedOn:
    def test_all_columns_matches_complete_cases(self):
        rng = np.random.default_rng(0)
        mask = rng.random((10, 4)) < 0.3
        ds = make_ds(rng.standard_normal((10, 4)), mask=mask)
        assert rows_observed_on(ds, range(4)).tolist() == complete_cases(ds).tolist()

    def test_empty_cols_returns_all_rows(self):
        mask = np.ones((4, 3), dtype=bool)
        ds = make_ds(np.ones((4, 3)), mask=mask)
        assert rows_observed_on(ds, []).tolist() == [0, 1, 2, 3]

    def test_single_mask_lookup(self):
        mask = np.zeros((4, 3), dtype=bool)
        mask[0, 2] = True
        ds = make_ds(np.ones((4, 3)), mask=mask)
        assert rows_observed_on(ds, [2]).tolist() == [1, 2, 3]
        assert rows_observed_on(ds, [0, 1]).tolist() == [0, 1, 2, 3]

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_antitone_in_columns(self, seed):
        rng = np.random.default_rng(seed)
        mask = rng.random((12, 5)) < 0.3
        ds = make_ds(rng.standard_normal((12, 5)), mask=mask)
        cols = list(rng.choice(5, size=rng.integers(1, 6), replace=False))
        sub = cols[: rng.integers(0, len(cols) + 1)]
        big = set(rows_observed_on(ds, sub).tolist())
        small = set(rows_observed_on(ds, cols).tolist())
        assert small <= big


class TestStandardize:
    def test_hand_example(self):
        ds = make_ds(np.array([[1.0], [2.0], [3.0]]))
        out, params = standardize(ds)
        np.testing.assert_allclose(out.X[:, 0], [-1.0, 0.0, 1.0])
        assert params.mean[0] == 2.0 and params.sd[0] == 1.0

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        ds = make_ds(rng.standard_normal((20, 3)))
        once, _ = standardize(ds)
        twice, _ = standardize(once)
        np.testing.assert_allclose(twice.X, once.X, atol=1e-12)

    def test_constant_column_raises(self):
        ds = make_ds(np.column_stack([np.full(3, 5.0), np.arange(3.0)]))
        with pytest.raises(DegenerateColumnError, match="x1"):
            standardize(ds)

    def test_statistics_use_observed_entries_only(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [99.0, 1.0]])
        mask = np.zeros((4, 2), dtype=bool)
        mask[3, 0] = True  # the 99 must not influence column 1 stats
        ds = make_ds(X, mask=mask)
        out, params = standardize(ds)
        assert params.mean[0] == 2.0
        np.testing.assert_allclose(out.X[:3, 0], [-1.0, 0.0, 1.0])

    def test_masked_cells_never_dereferenced(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((8, 3))
        mask = rng.random((8, 3)) < 0.25
        mask[:, 0] = False  # keep at least one fully observed column
        results = []
        for sentinel in (0.0, 1e9, -1e9):
            Xs = X.copy()
            Xs[mask] = sentinel
            out, _ = standardize(make_ds(Xs, mask=mask))
            results.append(out.X[~mask])
        np.testing.assert_array_equal(results[0], results[1])
        np.testing.assert_array_equal(results[0], results[2])
