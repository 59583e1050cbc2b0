"""Maximum composite likelihood fitting of the spatial functional model.

Initialization uses an independence-model logistic regression (optionally
through a principal-component rotation of the scores) followed by a
one-dimensional search for the dependence parameter. The joint optimization
is damped Newton with Levenberg ridging and step halving; truncation level
selection is by AIC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, logit

from .basis import BasisSet, FunctionGrid, project
from .model import Theta, pooled_derivatives, pooled_loglik

__all__ = [
    "FitConfig",
    "FitResult",
    "init_independence",
    "init_eta_slice",
    "fit_sgflm",
    "fit_gflm",
    "select_p_aic",
    "adjust_intercept_for_centering",
]

_IRLS_RIDGE = 1e-6  # guards against perfect separation


@dataclass(frozen=True)
class FitConfig:
    p_candidates: tuple = tuple(range(1, 11))
    eta_bounds: tuple = (-1.95, 1.95)
    max_iter: int = 100
    grad_tol: float = 1e-6
    step_halving_max: int = 30
    init_mode: str = "fpcr"

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.init_mode not in ("fpcr", "zeros"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if not self.p_candidates:
            raise ValueError("p_candidates must be non-empty")


@dataclass(frozen=True)
class FitResult:
    theta_hat: Theta
    model: str  # "sgflm" or "gflm"
    p_selected: int
    aic: float
    loglik: float
    converged: bool
    n_iterations: int
    grad_norm: float
    per_p_table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "alpha": self.theta_hat.alpha,
            "beta": self.theta_hat.beta.tolist(),
            "p_selected": self.p_selected,
            "aic": self.aic,
            "loglik": self.loglik,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
            "grad_norm": self.grad_norm,
            "per_p_table": [list(row) for row in self.per_p_table],
        }
        if self.model == "sgflm":
            d["eta"] = self.theta_hat.eta
        return d


def _pooled_design(datasets, p):
    E = np.vstack([ds.scores[:, :p] for ds in datasets])
    y = np.concatenate([ds.responses for ds in datasets])
    return np.column_stack([np.ones(E.shape[0]), E]), y


def _irls(X, y, max_iter=100, tol=1e-10, ridge=_IRLS_RIDGE):
    """Ridge-damped IRLS for logistic regression; returns (coef, converged)."""
    coef = np.zeros(X.shape[1])
    for _ in range(max_iter):
        p = expit(X @ coef)
        w = p * (1.0 - p)
        grad = X.T @ (y - p)
        H = (X.T * w) @ X + ridge * np.eye(X.shape[1])
        step = np.linalg.solve(H, grad)
        coef = coef + step
        if np.max(np.abs(step)) < tol:
            return coef, True
    return coef, False


def init_independence(datasets, p, init_mode="fpcr", max_iter=100):
    """Independence-model logistic fit of pooled responses on truncated scores.

    ``fpcr`` rotates the scores to their leading sample principal components
    before the regression and rotates the coefficients back; with a full-rank
    rotation this matches the direct fit up to the ridge damping.

    Returns (alpha0, beta0).
    """
    X, y = _pooled_design(datasets, p)
    if y.min() == y.max():
        raise ValueError("pooled responses must contain both 0s and 1s")
    if init_mode == "zeros":
        return float(logit(np.clip(y.mean(), 1e-12, 1 - 1e-12))), np.zeros(p)

    E = X[:, 1:]
    Ec = E - E.mean(axis=0)
    _, _, Vt = np.linalg.svd(Ec, full_matrices=False)
    rot = Vt.T  # (p, p) principal-component rotation
    Xr = np.column_stack([np.ones(E.shape[0]), E @ rot])
    coef, converged = _irls(Xr, y, max_iter=max_iter)
    if not converged:
        return float(logit(np.clip(y.mean(), 1e-12, 1 - 1e-12))), np.zeros(p)
    return float(coef[0]), rot @ coef[1:]


def init_eta_slice(datasets, alpha0, beta0, eta_bounds):
    """Maximize the pseudo-likelihood slice in eta with (alpha, beta) fixed."""
    lo, hi = eta_bounds

    def neg_slice(eta):
        theta = Theta(eta, alpha0, beta0, eta_max=max(abs(lo), abs(hi), 1e-9))
        return -pooled_loglik(theta, datasets)

    res = minimize_scalar(neg_slice, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-4})
    return float(np.clip(res.x, lo, hi))


def _newton_maximize(derivs_fn, x0, *, max_iter, grad_tol, step_halving_max,
                     clip_fn=None):
    """Damped Newton ascent with Levenberg ridging and step halving.

    ``derivs_fn(x)`` returns (value, gradient, hessian) of the objective to
    maximize. Returns (x, value, grad, converged, n_iter).
    """
    x = np.asarray(x0, dtype=float)
    if clip_fn is not None:
        x = clip_fn(x)
    value, grad, hess = derivs_fn(x)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(grad)) < grad_tol:
            converged = True
            it -= 1
            break
        lam = 1e-6
        step = None
        for _ in range(12):
            try:
                cand = np.linalg.solve(-hess + lam * np.eye(x.size), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if np.all(np.isfinite(cand)) and grad @ cand > 0:
                step = cand
                break
            lam *= 10.0
        if step is None:
            break
        improved = False
        for _ in range(step_halving_max):
            x_new = x + step
            if clip_fn is not None:
                x_new = clip_fn(x_new)
            v_new, g_new, h_new = derivs_fn(x_new)
            if np.isfinite(v_new) and v_new >= value:
                x, value, grad, hess = x_new, v_new, g_new, h_new
                improved = True
                break
            step = 0.5 * step
        if not improved:
            break
    else:
        it = max_iter
    if np.max(np.abs(grad)) < grad_tol:
        converged = True
    return x, value, grad, converged, it


def _sgflm_derivs(datasets, eta_max):
    def fn(vec):
        theta = Theta.from_vector(vec, eta_max=eta_max)
        d = pooled_derivatives(theta, datasets)
        return d.value, d.gradient, d.hessian
    return fn


def _gflm_derivs(datasets):
    def fn(vec):
        theta = Theta(0.0, float(vec[0]), vec[1:])
        d = pooled_derivatives(theta, datasets)
        return d.value, d.gradient[1:], d.hessian[1:, 1:]
    return fn


def fit_sgflm(datasets, p, config: FitConfig = FitConfig()) -> FitResult:
    """Maximum composite likelihood fit of the spatial model at truncation p."""
    if p > min(ds.num_scores for ds in datasets):
        raise ValueError("truncation level exceeds available scores")
    lo, hi = config.eta_bounds
    eta_max = max(abs(lo), abs(hi))
    if config.init_mode == "zeros":
        alpha0, beta0 = init_independence(datasets, p, init_mode="zeros")
    else:
        alpha0, beta0 = init_independence(datasets, p, init_mode=config.init_mode,
                                          max_iter=config.max_iter)
    eta0 = init_eta_slice(datasets, alpha0, beta0, config.eta_bounds)

    def clip(vec):
        vec = vec.copy()
        vec[0] = np.clip(vec[0], lo, hi)
        return vec

    x0 = np.r_[eta0, alpha0, beta0]
    x, value, grad, converged, n_iter = _newton_maximize(
        _sgflm_derivs(datasets, eta_max), x0,
        max_iter=config.max_iter, grad_tol=config.grad_tol,
        step_halving_max=config.step_halving_max, clip_fn=clip)
    q = p + 2
    return FitResult(
        theta_hat=Theta.from_vector(x, eta_max=eta_max),
        model="sgflm", p_selected=p, aic=2 * q - 2 * value, loglik=value,
        converged=converged, n_iterations=n_iter,
        grad_norm=float(np.max(np.abs(grad))))


def fit_gflm(datasets, p, config: FitConfig = FitConfig()) -> FitResult:
    """Independence-model (eta = 0) fit with the same Newton machinery."""
    if p > min(ds.num_scores for ds in datasets):
        raise ValueError("truncation level exceeds available scores")
    if config.init_mode == "zeros":
        alpha0, beta0 = init_independence(datasets, p, init_mode="zeros")
    else:
        alpha0, beta0 = init_independence(datasets, p, init_mode=config.init_mode,
                                          max_iter=config.max_iter)
    x0 = np.r_[alpha0, beta0]
    x, value, grad, converged, n_iter = _newton_maximize(
        _gflm_derivs(datasets), x0,
        max_iter=config.max_iter, grad_tol=config.grad_tol,
        step_halving_max=config.step_halving_max)
    q = p + 1
    return FitResult(
        theta_hat=Theta(0.0, float(x[0]), x[1:]),
        model="gflm", p_selected=p, aic=2 * q - 2 * value, loglik=value,
        converged=converged, n_iterations=n_iter,
        grad_norm=float(np.max(np.abs(grad))))


def select_p_aic(datasets, config: FitConfig = FitConfig(), model="sgflm") -> FitResult:
    """Fit every candidate truncation level and keep the AIC minimizer."""
    fit_fn = fit_sgflm if model == "sgflm" else fit_gflm
    best = None
    table = []
    errors = []
    for p in config.p_candidates:
        try:
            res = fit_fn(datasets, p, config)
        except Exception as exc:  # noqa: BLE001 - per-p failures are recorded
            errors.append((p, str(exc)))
            continue
        table.append((p, res.aic, res.loglik))
        if best is None or res.aic < best.aic:
            best = res
    if best is None:
        raise RuntimeError(f"all candidate fits failed: {errors}")
    return FitResult(
        theta_hat=best.theta_hat, model=best.model, p_selected=best.p_selected,
        aic=best.aic, loglik=best.loglik, converged=best.converged,
        n_iterations=best.n_iterations, grad_norm=best.grad_norm,
        per_p_table=table)


def adjust_intercept_for_centering(alpha_hat, beta_hat, xbar: FunctionGrid,
                                   basis: BasisSet) -> float:
    """Intercept for the centered-covariate parameterization.

    Converts an intercept estimated against raw scores into the intercept
    matching centered scores: alpha + sum_j beta_j <Xbar, phi_j>.
    """
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    if beta_hat.size > basis.num_functions:
        raise ValueError("beta longer than the basis")
    xbar_scores = project(xbar, basis)[: beta_hat.size]
    return float(alpha_hat + beta_hat @ xbar_scores)
