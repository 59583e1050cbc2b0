"""Empirical Godambe (sandwich) information and asymptotic inference.

H_hat is the average negative Hessian, J_hat the average outer product of
per-replicate score vectors, and G_hat = H J^{-1} H. The (1,1) block of
G_hat^{-1} calibrates the confidence interval for the dependence parameter;
the remaining block calibrates quadratic-form statistics and the simultaneous
confidence band for the regression parameter function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .basis import BasisSet, FunctionGrid, reconstruct
from .model import Theta, composite_loglik_derivatives

__all__ = [
    "SandwichMatrices",
    "ConfidenceBand",
    "sandwich",
    "ci_eta",
    "quadratic_stat_theta",
    "quadratic_stat_beta",
    "band_beta",
]

_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SandwichMatrices:
    """Empirical H, J, G, G^{-1} and the blocks used for inference.

    For the spatial model the parameter order is (eta, alpha, beta_1..beta_p),
    so ``g11_inv`` is the eta block and ``g22_inv`` the (p+1)-dim coefficient
    block. For the independence model there is no eta coordinate: ``g11_inv``
    is None and ``g22_inv`` is the whole of G^{-1}.
    """

    h_hat: np.ndarray
    j_hat: np.ndarray
    g_hat: np.ndarray
    g_inv_hat: np.ndarray
    g11_inv: float | None
    g22_inv: np.ndarray
    n_replicates: int
    condition_numbers: dict


def _checked_inverse(mat, name):
    cond = float(np.linalg.cond(mat))
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise np.linalg.LinAlgError(
            f"{name} is numerically singular (condition number {cond:.3g})")
    return np.linalg.inv(mat), cond


def sandwich(datasets, theta_hat: Theta, model: str = "sgflm") -> SandwichMatrices:
    """Empirical sandwich matrices at the fitted parameter.

    ``model`` selects whether the eta coordinate is part of the parameter
    ("sgflm") or frozen at zero and excluded ("gflm").
    """
    N = len(datasets)
    dim = theta_hat.dim if model == "sgflm" else theta_hat.dim - 1
    if N < dim + 1:
        raise ValueError(f"need more replicates than parameters ({N} <= {dim})")

    H = np.zeros((dim, dim))
    J = np.zeros((dim, dim))
    for ds in datasets:
        d = composite_loglik_derivatives(theta_hat, ds)
        g, h = d.gradient, d.hessian
        if model == "gflm":
            g, h = g[1:], h[1:, 1:]
        H -= h
        J += np.outer(g, g)
    H /= N
    J /= N
    H = 0.5 * (H + H.T)
    J = 0.5 * (J + J.T)

    J_inv, cond_j = _checked_inverse(J, "J_hat")
    H_inv, cond_h = _checked_inverse(H, "H_hat")
    G = H @ J_inv @ H
    G_inv = H_inv @ J @ H_inv
    G = 0.5 * (G + G.T)
    G_inv = 0.5 * (G_inv + G_inv.T)

    if model == "sgflm":
        g11 = float(G_inv[0, 0])
        g22 = G_inv[1:, 1:]
    else:
        g11 = None
        g22 = G_inv
    return SandwichMatrices(
        h_hat=H, j_hat=J, g_hat=G, g_inv_hat=G_inv,
        g11_inv=g11, g22_inv=g22, n_replicates=N,
        condition_numbers={"H_hat": cond_h, "J_hat": cond_j})


def ci_eta(sw: SandwichMatrices, eta_hat: float, n_replicates: int,
           level: float = 0.95) -> tuple[float, float]:
    """Wald confidence interval for the dependence parameter."""
    if sw.g11_inv is None or sw.g11_inv <= 0:
        raise ValueError("nonpositive or missing eta variance block")
    z = stats.norm.ppf(0.5 * (1.0 + level))
    half = z * np.sqrt(sw.g11_inv / n_replicates)
    return float(eta_hat - half), float(eta_hat + half)


def quadratic_stat_theta(sw: SandwichMatrices, theta_hat: Theta, theta0: Theta,
                         n_replicates: int) -> float:
    """Standardized quadratic form in the full parameter vector."""
    d = theta_hat.to_vector() - theta0.to_vector()
    if d.size != sw.g_hat.shape[0]:
        raise ValueError("parameter dimension does not match the sandwich")
    q = n_replicates * float(d @ sw.g_hat @ d)
    k = d.size
    return (q - k) / np.sqrt(2.0 * k)


def quadratic_stat_beta(sw: SandwichMatrices, beta_hat_with_alpha, beta0,
                        n_replicates: int) -> float:
    """Standardized quadratic form in (alpha, beta_1..beta_p).

    The coefficient vector includes the intercept as its first element.
    """
    b = np.asarray(beta_hat_with_alpha, dtype=float)
    b0 = np.asarray(beta0, dtype=float)
    if b.size != sw.g22_inv.shape[0]:
        raise ValueError("coefficient dimension does not match the sandwich")
    g22_prec, _ = _checked_inverse(sw.g22_inv, "G22_inv")
    d = b - b0
    q = n_replicates * float(d @ g22_prec @ d)
    k = b.size
    return (q - k) / np.sqrt(2.0 * k)


@dataclass(frozen=True)
class ConfidenceBand:
    grid_points: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    simultaneous: bool

    def __post_init__(self):
        if np.any(self.lower > self.center) or np.any(self.center > self.upper):
            raise ValueError("band must satisfy lower <= center <= upper")


def band_beta(sw: SandwichMatrices, theta_hat: Theta, basis: BasisSet,
              n_replicates: int, level: float = 0.95,
              simultaneous: bool = True) -> ConfidenceBand:
    """Confidence band for the regression parameter function beta(t).

    The simultaneous band projects the chi-square confidence ellipsoid for
    (alpha, beta) through the basis by Cauchy-Schwarz:
    beta_hat(t) +/- sqrt(chi2_{p+1, level} * phi(t)' G22_inv phi(t) / N)
    with phi(t) = (0, phi_1(t), ..., phi_p(t)). The pointwise variant uses
    the normal quantile with the same variance function.
    """
    p = theta_hat.p
    if sw.g22_inv.shape[0] != p + 1:
        raise ValueError("sandwich block does not match the parameter dimension")
    center = reconstruct(theta_hat.beta, basis)
    # rows of the (p+1, T) evaluation matrix; intercept row zero when plotting beta(t)
    Phi = np.vstack([np.zeros(basis.grid_points.size), basis.values[:p]])
    var_t = np.einsum("it,ij,jt->t", Phi, sw.g22_inv, Phi) / n_replicates
    var_t = np.maximum(var_t, 0.0)
    if simultaneous:
        crit = stats.chi2.ppf(level, df=p + 1)
    else:
        crit = stats.norm.ppf(0.5 * (1.0 + level)) ** 2
    half = np.sqrt(crit * var_t)
    return ConfidenceBand(
        grid_points=basis.grid_points, center=center.values,
        lower=center.values - half, upper=center.values + half,
        level=level, simultaneous=simultaneous)
