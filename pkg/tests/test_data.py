import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flfosr.basis import make_basis
from flfosr.data import (
    dense_grouping_matrix,
    destandardize_covariates,
    expand,
    from_arrays,
    group_sum,
    load_dataset,
    project_dataset,
    standardize_covariates,
    write_dataset,
)
from flfosr.errors import DegenerateColumnError, DimensionError, InvalidInputError


def make_ds(n=3, m=(2, 3, 1), L=2, T=10, seed=0):
    rng = np.random.default_rng(seed)
    m = np.asarray(m)
    M = int(m.sum())
    return from_arrays(
        np.linspace(0, 1, T),
        rng.standard_normal((M, T)),
        list(np.repeat(np.arange(n), m)),
        list(range(M)),
        rng.standard_normal((M, L)),
        [f"x{l}" for l in range(1, L + 1)],
    )


class TestGroupSumExpand:
    def test_group_sum_counts(self):
        subject_of = np.array([0, 0, 1, 1, 1])
        np.testing.assert_array_equal(group_sum(np.ones(5), subject_of), [2.0, 3.0])

    def test_group_sum_arithmetic(self):
        subject_of = np.array([0, 0, 1, 1, 1])
        np.testing.assert_array_equal(
            group_sum(np.array([1.0, 2, 3, 4, 5]), subject_of), [3.0, 12.0]
        )

    def test_expand_repeats(self):
        subject_of = np.array([0, 1, 1])
        np.testing.assert_array_equal(expand(np.array([7.0, -1.0]), subject_of), [7.0, -1.0, -1.0])

    def test_expand_zero(self):
        subject_of = np.array([0, 0, 1])
        np.testing.assert_array_equal(expand(np.zeros(2), subject_of), np.zeros(3))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_matches_dense_grouping_matrix(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        m = rng.integers(1, 5, size=n)
        subject_of = np.repeat(np.arange(n), m)
        Z = dense_grouping_matrix(m)
        v = rng.standard_normal(int(m.sum()))
        u = rng.standard_normal(n)
        np.testing.assert_allclose(group_sum(v, subject_of), Z.T @ v, atol=1e-12)
        np.testing.assert_allclose(expand(u, subject_of), Z @ u, atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_adjointness(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        m = rng.integers(1, 5, size=n)
        subject_of = np.repeat(np.arange(n), m)
        v = rng.standard_normal(int(m.sum()))
        u = rng.standard_normal(n)
        assert expand(u, subject_of) @ v == pytest.approx(u @ group_sum(v, subject_of))

    def test_group_sum_matrix_rows(self):
        subject_of = np.array([0, 0, 1])
        v = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(group_sum(v, subject_of), [[1.0, 2.0], [7.0, 5.0]])

    def test_expand_then_group_sum_scales_by_m(self):
        m = np.array([1, 2, 3])
        subject_of = np.repeat(np.arange(3), m)
        u = np.array([2.0, -1.0, 4.0])
        np.testing.assert_array_equal(group_sum(expand(u, subject_of), subject_of), m * u)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            group_sum(np.ones(4), np.array([0, 0, 1]))
        with pytest.raises(DimensionError):
            expand(np.ones(3), np.array([0, 0, 1]))


class TestDatasetConstruction:
    def test_canonicalizes_row_order(self):
        rng = np.random.default_rng(1)
        curves = rng.standard_normal((4, 6))
        ds = from_arrays(
            np.linspace(0, 1, 6),
            curves,
            ["b", "a", "b", "a"],
            [1, 2, 0, 1],
            rng.standard_normal((4, 1)),
            ["x1"],
        )
        assert ds.subject_ids == ("a", "b")
        np.testing.assert_array_equal(ds.subject_of, [0, 0, 1, 1])
        np.testing.assert_array_equal(ds.m, [2, 2])
        # subject a's replicates sorted 1 then 2
        np.testing.assert_array_equal(ds.curves[0], curves[3])
        np.testing.assert_array_equal(ds.curves[1], curves[1])

    def test_numeric_labels_sort_numerically(self):
        rng = np.random.default_rng(2)
        ds = from_arrays(
            np.linspace(0, 1, 4),
            rng.standard_normal((3, 4)),
            ["10", "2", "2"],
            [0, 0, 1],
            rng.standard_normal((3, 1)),
            ["x1"],
        )
        assert ds.subject_ids == ("2", "10")

    def test_rejects_nonfinite_curves(self):
        rng = np.random.default_rng(3)
        curves = rng.standard_normal((2, 4))
        curves[1, 2] = np.nan
        with pytest.raises(InvalidInputError):
            from_arrays(np.linspace(0, 1, 4), curves, [0, 1], [0, 0], np.zeros((2, 1)), ["x1"])


class TestStandardize:
    def test_three_point_column(self):
        ds = make_ds(n=1, m=(3,), L=1, T=5)
        X = ds.X.copy()
        X[:, 1] = [1.0, 2.0, 3.0]
        ds = ds.__class__(**{**ds.__dict__, "X": X})
        out, info = standardize_covariates(ds, ["x1"])
        np.testing.assert_allclose(out.X[:, 1], [-1.0, 0.0, 1.0], atol=1e-12)
        assert info.means[0] == pytest.approx(2.0)
        assert info.scales[0] == pytest.approx(1.0)

    def test_idempotent_within_tolerance(self):
        ds = make_ds(seed=5)
        once, _ = standardize_covariates(ds, [1, 2])
        twice, _ = standardize_covariates(once, [1, 2])
        np.testing.assert_allclose(twice.X, once.X, atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_round_trip(self, seed):
        ds = make_ds(seed=seed)
        out, info = standardize_covariates(ds, [1, 2])
        back = destandardize_covariates(out, info)
        np.testing.assert_allclose(back.X, ds.X, atol=1e-12)

    def test_constant_column_rejected(self):
        ds = make_ds()
        X = ds.X.copy()
        X[:, 1] = 3.14
        ds = ds.__class__(**{**ds.__dict__, "X": X})
        with pytest.raises(DegenerateColumnError):
            standardize_covariates(ds, [1])

    def test_intercept_not_selectable(self):
        ds = make_ds()
        with pytest.raises(InvalidInputError):
            standardize_covariates(ds, [0])


class TestProjectionConsistency:
    def test_projected_matches_regeneration_bitwise(self):
        ds = make_ds(T=20)
        basis = make_basis(ds.grid, K0=6, degree=2)
        a = project_dataset(ds, basis).yk
        b = project_dataset(ds, basis).yk
        np.testing.assert_array_equal(a, b)


class TestFileRoundTrip:
    def test_write_then_load_reproduces_dataset(self, tmp_path):
        ds = make_ds(n=3, m=(2, 1, 2), L=2, T=7, seed=11)
        write_dataset(ds, tmp_path)
        back = load_dataset(
            tmp_path / "curves.csv", tmp_path / "covariates.csv", tmp_path / "grid.csv"
        )
        np.testing.assert_array_equal(back.curves, ds.curves)
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.grid, ds.grid)
        np.testing.assert_array_equal(back.subject_of, ds.subject_of)
        assert back.covariate_names == ds.covariate_names

    def test_default_grid_when_absent(self, tmp_path):
        ds = make_ds(T=9)
        write_dataset(ds, tmp_path)
        back = load_dataset(tmp_path / "curves.csv", tmp_path / "covariates.csv")
        np.testing.assert_allclose(back.grid, np.linspace(0, 1, 9))

    def test_missing_covariate_file(self, tmp_path):
        ds = make_ds()
        write_dataset(ds, tmp_path)
        with pytest.raises(InvalidInputError, match="not_there.csv"):
            load_dataset(tmp_path / "curves.csv", tmp_path / "not_there.csv")

    def test_incomplete_curve_rejected(self, tmp_path):
        ds = make_ds(T=5)
        write_dataset(ds, tmp_path)
        lines = (tmp_path / "curves.csv").read_text().splitlines()
        (tmp_path / "curves.csv").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(InvalidInputError):
            load_dataset(tmp_path / "curves.csv", tmp_path / "covariates.csv")

    def test_nan_value_rejected(self, tmp_path):
        ds = make_ds(T=5)
        write_dataset(ds, tmp_path)
        text = (tmp_path / "curves.csv").read_text()
        first_value = text.splitlines()[1].rsplit(",", 1)[-1]
        (tmp_path / "curves.csv").write_text(text.replace(first_value, "nan", 1))
        with pytest.raises(InvalidInputError):
            load_dataset(tmp_path / "curves.csv", tmp_path / "covariates.csv")
