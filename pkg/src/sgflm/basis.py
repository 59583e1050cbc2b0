"""Orthonormal trigonometric basis on [0, 1] and grid-based function algebra.

Functions are carried as values on a shared uniform grid. All integrals are
composite trapezoid quadrature on that grid, which is effectively exact for
the trigonometric basis as long as the highest frequency is resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FunctionGrid",
    "BasisSet",
    "default_grid",
    "make_trig_basis",
    "quad_inner_product",
    "project",
    "reconstruct",
    "center_covariates",
]

_UNIFORM_RTOL = 1e-12


@dataclass(frozen=True)
class FunctionGrid:
    """A real function sampled on a uniform grid of [0, 1].

    Attributes
    ----------
    grid_points : ndarray
        Strictly increasing, uniformly spaced abscissae, length >= 2.
    values : ndarray
        Function values, same length as ``grid_points``.
    """

    grid_points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.grid_points, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 1 or t.size != v.size:
            raise ValueError("grid_points and values must be 1-d with equal length")
        if t.size < 2:
            raise ValueError("need at least 2 grid points")
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise ValueError("grid_points must be strictly increasing")
        h = dt[0]
        if np.any(np.abs(dt - h) > _UNIFORM_RTOL * max(abs(h), 1.0)):
            raise ValueError("grid spacing is not uniform")
        object.__setattr__(self, "grid_points", t)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.grid_points.size

    def with_values(self, values) -> "FunctionGrid":
        return FunctionGrid(self.grid_points, np.asarray(values, dtype=float))


@dataclass(frozen=True)
class BasisSet:
    """A finite orthonormal basis evaluated on a shared grid.

    ``values`` is a (J, T) matrix; row j holds basis function j on the grid.
    """

    grid_points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.grid_points, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != t.size:
            raise ValueError("values must be (J, T) matching the grid")
        object.__setattr__(self, "grid_points", t)
        object.__setattr__(self, "values", v)

    @property
    def num_functions(self) -> int:
        return self.values.shape[0]

    @property
    def functions(self) -> list[FunctionGrid]:
        return [FunctionGrid(self.grid_points, row) for row in self.values]

    def function(self, j: int) -> FunctionGrid:
        """Basis function with 1-based index ``j``."""
        return FunctionGrid(self.grid_points, self.values[j - 1])


def default_grid(num_points: int = 50) -> np.ndarray:
    """Uniform grid on [0, 1] including both endpoints."""
    return np.linspace(0.0, 1.0, num_points)


def make_trig_basis(num_functions: int, grid_points) -> BasisSet:
    """First ``num_functions`` functions of the trigonometric basis on [0, 1].

    The convention is phi_1 = 1, phi_{2k} = sqrt(2) cos(2 pi k t),
    phi_{2k+1} = sqrt(2) sin(2 pi k t), which is orthonormal on [0, 1].

    Raises
    ------
    ValueError
        If ``num_functions`` < 1 or the grid has fewer than
        ``2 * num_functions + 1`` points (aliasing risk).
    """
    if num_functions < 1:
        raise ValueError("need at least one basis function")
    t = np.asarray(grid_points, dtype=float)
    if t.size < 2 * num_functions + 1:
        raise ValueError(
            f"grid with {t.size} points is too coarse for {num_functions} "
            f"basis functions (need >= {2 * num_functions + 1})"
        )
    rows = np.empty((num_functions, t.size))
    rows[0] = 1.0
    for j in range(2, num_functions + 1):
        k = j // 2
        if j % 2 == 0:
            rows[j - 1] = np.sqrt(2.0) * np.cos(2.0 * np.pi * k * t)
        else:
            rows[j - 1] = np.sqrt(2.0) * np.sin(2.0 * np.pi * k * t)
    return BasisSet(t, rows)


def _check_same_grid(a, b):
    if a.size != b.size or np.any(np.abs(a - b) > _UNIFORM_RTOL):
        raise ValueError("functions are not on the same grid")


def quad_inner_product(f: FunctionGrid, g: FunctionGrid) -> float:
    """Trapezoid approximation of the L2 inner product of ``f`` and ``g``."""
    _check_same_grid(f.grid_points, g.grid_points)
    return float(np.trapezoid(f.values * g.values, f.grid_points))


def gram_matrix(basis: BasisSet) -> np.ndarray:
    """Matrix of pairwise basis inner products (identity when orthonormal)."""
    return _projection_matrix(basis) @ basis.values.T


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    h = t[1] - t[0]
    w = np.full(t.size, h)
    w[0] = w[-1] = h / 2.0
    return w


def _projection_matrix(basis: BasisSet) -> np.ndarray:
    # (J, T) matrix mapping grid values to basis coefficients by quadrature
    return basis.values * _trapezoid_weights(basis.grid_points)


def project(X: FunctionGrid, basis: BasisSet) -> np.ndarray:
    """Basis coefficients of ``X``: scores[j] = integral of X * phi_{j+1}."""
    _check_same_grid(X.grid_points, basis.grid_points)
    return _projection_matrix(basis) @ X.values


def project_rows(values: np.ndarray, basis: BasisSet) -> np.ndarray:
    """Project each row of an (n, T) value matrix, returning (n, J) scores."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != basis.grid_points.size:
        raise ValueError("row length does not match the basis grid")
    return values @ _projection_matrix(basis).T


def reconstruct(coeffs, basis: BasisSet) -> FunctionGrid:
    """Pointwise sum of ``coeffs[j] * phi_{j+1}`` on the basis grid."""
    c = np.asarray(coeffs, dtype=float)
    if c.size > basis.num_functions:
        raise ValueError("more coefficients than basis functions")
    return FunctionGrid(basis.grid_points, c @ basis.values[: c.size])


def center_covariates(curves: list[FunctionGrid]) -> tuple[list[FunctionGrid], FunctionGrid]:
    """Subtract the sample mean curve; returns (centered curves, mean curve)."""
    if not curves:
        raise ValueError("empty covariate list")
    grid = curves[0].grid_points
    for c in curves[1:]:
        _check_same_grid(grid, c.grid_points)
    stacked = np.stack([c.values for c in curves])
    mean = stacked.mean(axis=0)
    centered = [FunctionGrid(grid, row - mean) for row in stacked]
    return centered, FunctionGrid(grid, mean)
