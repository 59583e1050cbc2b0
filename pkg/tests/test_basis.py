"""Function-space tests: trigonometric basis, quadrature, projection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgflm.basis import (
    BasisSet,
    FunctionGrid,
    center_covariates,
    default_grid,
    gram_matrix,
    make_trig_basis,
    project,
    project_rows,
    quad_inner_product,
    reconstruct,
)


class TestFunctionGrid:
    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            FunctionGrid(np.linspace(0, 1, 5), np.zeros(4))

    def test_rejects_nonuniform_grid(self):
        t = np.array([0.0, 0.1, 0.3, 0.4])
        with pytest.raises(ValueError):
            FunctionGrid(t, np.zeros(4))

    def test_rejects_decreasing_grid(self):
        with pytest.raises(ValueError):
            FunctionGrid(np.array([0.0, 0.5, 0.4]), np.zeros(3))

    def test_accepts_default_grid(self):
        t = default_grid(50)
        assert t[0] == 0.0 and t[-1] == 1.0 and t.size == 50
        fg = FunctionGrid(t, np.sin(t))
        assert fg.size == 50


class TestMakeTrigBasis:
    def test_first_function_is_constant(self):
        basis = make_trig_basis(1, default_grid(50))
        np.testing.assert_array_equal(basis.values[0], np.ones(50))

    def test_exact_trig_values_at_quarter(self):
        # grid containing t = 0.25 exactly
        t = np.linspace(0.0, 1.0, 9)
        basis = make_trig_basis(3, t)
        i = 2  # t[2] = 0.25
        assert basis.function(2).values[i] == pytest.approx(0.0, abs=1e-12)
        assert basis.function(3).values[i] == pytest.approx(np.sqrt(2.0))

    def test_gram_matrix_is_identity_j20(self):
        basis = make_trig_basis(20, default_grid(50))
        G = gram_matrix(basis)
        assert np.max(np.abs(G - np.eye(20))) < 1e-4

    def test_rejects_zero_functions(self):
        with pytest.raises(ValueError):
            make_trig_basis(0, default_grid(50))

    def test_rejects_coarse_grid(self):
        # J = 20 needs at least 41 points
        with pytest.raises(ValueError):
            make_trig_basis(20, default_grid(40))


class TestQuadInnerProduct:
    def test_unit_integral(self):
        t = default_grid(50)
        one = FunctionGrid(t, np.ones(50))
        assert quad_inner_product(one, one) == pytest.approx(1.0)

    def test_linear_integral(self):
        t = default_grid(50)
        f = FunctionGrid(t, np.ones(50))
        g = FunctionGrid(t, t)
        assert quad_inner_product(f, g) == pytest.approx(0.5)

    def test_orthogonal_basis_pair(self):
        basis = make_trig_basis(3, default_grid(50))
        assert abs(quad_inner_product(basis.function(2), basis.function(3))) < 1e-6

    def test_rejects_mismatched_grids(self):
        f = FunctionGrid(default_grid(50), np.ones(50))
        g = FunctionGrid(default_grid(40), np.ones(40))
        with pytest.raises(ValueError):
            quad_inner_product(f, g)


class TestProject:
    def test_constant_function(self):
        basis = make_trig_basis(6, default_grid(50))
        scores = project(FunctionGrid(basis.grid_points, np.full(50, 3.5)), basis)
        assert scores[0] == pytest.approx(3.5, abs=1e-10)
        assert np.max(np.abs(scores[1:])) < 1e-10

    def test_known_combination(self):
        basis = make_trig_basis(6, default_grid(50))
        X = reconstruct(np.array([0.0, 2.0, 0.0, 0.0, 0.5, 0.0]), basis)
        scores = project(X, basis)
        expected = np.array([0.0, 2.0, 0.0, 0.0, 0.5, 0.0])
        assert np.max(np.abs(scores - expected)) < 1e-4

    def test_mean_curve_against_fine_grid_oracle(self):
        # independent oracle: trapezoid on a 10^4-point grid
        tt = np.linspace(0.0, 1.0, 10**4)
        oracle = np.trapezoid(4.0 * tt * np.sin(3.0 * tt), tt)
        t = default_grid(50)
        basis = make_trig_basis(6, t)
        scores = project(FunctionGrid(t, 4.0 * t * np.sin(3.0 * t)), basis)
        assert scores[0] == pytest.approx(oracle, abs=2e-3)

    def test_project_rows_matches_project(self, rng):
        basis = make_trig_basis(5, default_grid(50))
        vals = rng.normal(size=(7, 50))
        rows = project_rows(vals, basis)
        for i in range(7):
            one = project(FunctionGrid(basis.grid_points, vals[i]), basis)
            np.testing.assert_allclose(rows[i], one, atol=1e-12)


class TestReconstruct:
    def test_first_unit_vector(self):
        basis = make_trig_basis(4, default_grid(50))
        fg = reconstruct(np.array([1.0, 0.0, 0.0, 0.0]), basis)
        np.testing.assert_array_equal(fg.values, np.ones(50))

    def test_true_parameter_function_values(self):
        # beta(t) = phi_1 + phi_2/2 + phi_3/3
        basis = make_trig_basis(3, default_grid(50))
        fg = reconstruct(np.array([1.0, 0.5, 1.0 / 3.0]), basis)
        t = basis.grid_points
        expected = (1.0 + 0.5 * np.sqrt(2) * np.cos(2 * np.pi * t)
                    + np.sqrt(2) / 3.0 * np.sin(2 * np.pi * t))
        np.testing.assert_allclose(fg.values, expected, atol=1e-12)

    def test_rejects_too_many_coefficients(self):
        basis = make_trig_basis(3, default_grid(50))
        with pytest.raises(ValueError):
            reconstruct(np.ones(4), basis)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=10, max_size=10))
    def test_project_reconstruct_round_trip(self, coeffs):
        basis = make_trig_basis(10, default_grid(50))
        c = np.asarray(coeffs)
        back = project(reconstruct(c, basis), basis)
        assert np.max(np.abs(back - c)) < 1e-4 * max(1.0, np.max(np.abs(c)))

    def test_parseval_at_truncation(self, rng):
        basis = make_trig_basis(8, default_grid(50))
        t = basis.grid_points
        X = FunctionGrid(t, rng.normal(size=3) @ basis.values[:3]
                         + 0.3 * np.sin(9 * np.pi * t))
        trunc = reconstruct(project(X, basis), basis)
        assert quad_inner_product(trunc, trunc) <= quad_inner_product(X, X) + 1e-6


class TestCenterCovariates:
    def test_single_curve_centers_to_zero(self):
        t = default_grid(20)
        fg = FunctionGrid(t, np.sin(t))
        centered, mean = center_covariates([fg])
        np.testing.assert_allclose(centered[0].values, 0.0, atol=1e-15)
        np.testing.assert_allclose(mean.values, fg.values)

    def test_antisymmetric_pair_unchanged(self):
        t = default_grid(20)
        f = np.cos(3 * t)
        centered, mean = center_covariates(
            [FunctionGrid(t, f), FunctionGrid(t, -f)])
        np.testing.assert_allclose(mean.values, 0.0, atol=1e-15)
        np.testing.assert_allclose(centered[0].values, f, atol=1e-15)

    def test_centered_mean_is_zero(self, rng):
        t = default_grid(30)
        curves = [FunctionGrid(t, rng.normal(size=30)) for _ in range(7)]
        centered, _ = center_covariates(curves)
        total = np.mean([c.values for c in centered], axis=0)
        assert np.max(np.abs(total)) < 1e-12

    def test_rejects_empty_list(self):
        with pytest.raises(ValueError):
            center_covariates([])


def test_basisset_rejects_bad_shape():
    with pytest.raises(ValueError):
        BasisSet(default_grid(10), np.zeros((3, 9)))
