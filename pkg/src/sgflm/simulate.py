"""Covariate generation, Gibbs sampling of responses, and an exact-joint oracle.

The simulation protocol: functional covariates X_i(t) = mu(t) + sum_j eps_j
phi_j(t) with eps_j ~ N(0, sd_j^2) on a 50-point grid, binary responses drawn
by systematic-sweep Gibbs from the autologistic full conditionals. On tiny
lattices the joint distribution can be enumerated exactly, which is used to
validate the sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import expit, logsumexp

from .basis import (
    BasisSet,
    FunctionGrid,
    default_grid,
    make_trig_basis,
    project,
    project_rows,
)
from .lattice import Lattice, build_lattice
from .model import Dataset, Theta

__all__ = [
    "SimConfig",
    "MCCase",
    "default_mu",
    "generate_covariates",
    "gibbs_sweeps",
    "gibbs_simulate",
    "simulate_case",
    "exact_joint",
]

CHAIN_MODES = ("thinned_shared", "per_replicate")


def default_mu(grid_points) -> FunctionGrid:
    """Mean curve mu(t) = 4 t sin(3 t)."""
    t = np.asarray(grid_points, dtype=float)
    return FunctionGrid(t, 4.0 * t * np.sin(3.0 * t))


@dataclass(frozen=True)
class SimConfig:
    """Configuration for one simulated case of N lattice replicates.

    ``chain_mode`` selects how replicates within a case are produced:
    ``thinned_shared`` runs a single Gibbs chain per case and emits every
    ``thin``-th sweep (with an initial ``burn_in``), recomputing the
    conditional field against each replicate's fresh covariates;
    ``per_replicate`` runs an independent chain (fresh initialization and
    ``burn_in`` sweeps) for every replicate.
    """

    true_theta: Theta
    rows: int = 20
    cols: int = 20
    wrap: bool = True
    neighborhood_kind: str = "four_nearest"
    basis_size: int = 20
    num_grid: int = 50
    mu: FunctionGrid | None = None
    score_sd: np.ndarray | None = None
    burn_in: int = 200
    thin: int = 200
    replicates: int = 20
    chain_mode: str = "thinned_shared"
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0 or self.thin < 1 or self.replicates < 1:
            raise ValueError("need burn_in >= 0, thin >= 1, replicates >= 1")
        if self.chain_mode not in CHAIN_MODES:
            raise ValueError(f"unknown chain_mode {self.chain_mode!r}")
        sd = self.score_sd
        if sd is None:
            sd = 1.0 / np.arange(1, self.basis_size + 1)
        sd = np.asarray(sd, dtype=float)
        if sd.size != self.basis_size or np.any(sd < 0):
            raise ValueError("score_sd must be a nonnegative vector of length basis_size")
        object.__setattr__(self, "score_sd", sd)

    def grid(self) -> np.ndarray:
        return default_grid(self.num_grid)

    def make_basis(self) -> BasisSet:
        return make_trig_basis(self.basis_size, self.grid())

    def make_lattice(self) -> Lattice:
        return build_lattice(self.rows, self.cols, self.wrap, self.neighborhood_kind)

    def mean_curve(self) -> FunctionGrid:
        return self.mu if self.mu is not None else default_mu(self.grid())


@dataclass(frozen=True)
class MCCase:
    """N replicate datasets simulated under a shared true parameter."""

    datasets: list
    true_theta: Theta
    case_seed: int


def generate_covariates(config: SimConfig, rng: np.random.Generator, basis: BasisSet | None = None):
    """Draw n covariate curves; returns (curve matrix (n, T), generating scores)."""
    if basis is None:
        basis = config.make_basis()
    n = config.rows * config.cols
    gen_scores = rng.normal(size=(n, config.basis_size)) * config.score_sd
    X = config.mean_curve().values + gen_scores @ basis.values
    return X, gen_scores


@njit(cache=True)
def _sweep_kernel(y, nbr, deg, base, eta, u):
    n_sweeps = u.shape[0]
    n = y.shape[0]
    for s in range(n_sweeps):
        for i in range(n):
            acc = 0.0
            for m in range(deg[i]):
                acc += y[nbr[i, m]]
            a = base[i] + eta * acc
            if a >= 0.0:
                p = 1.0 / (1.0 + np.exp(-a))
            else:
                ea = np.exp(a)
                p = ea / (1.0 + ea)
            y[i] = 1.0 if u[s, i] < p else 0.0


def gibbs_sweeps(lattice: Lattice, lin: np.ndarray, eta: float, y: np.ndarray,
                 n_sweeps: int, rng: np.random.Generator) -> None:
    """Run systematic row-major Gibbs sweeps in place on the 0/1 field ``y``.

    ``lin`` is the independence-model linear predictor; the conditional at
    site i uses A_i = lin_i + eta * sum_{j in N_i} (y_j - kappa_j).
    """
    if n_sweeps == 0:
        return
    kap = expit(lin)
    W = lattice.adjacency()
    base = lin - eta * (W @ kap)
    u = rng.random((n_sweeps, lattice.n_sites))
    _sweep_kernel(y, lattice.neighbors, lattice.degree, base, eta, u)


@njit(cache=True)
def _count_kernel(y, nbr, deg, base, eta, u, thin, counts, powers):
    n = y.shape[0]
    n_draws = u.shape[0] // thin
    for d in range(n_draws):
        for s in range(thin):
            row = d * thin + s
            for i in range(n):
                acc = 0.0
                for m in range(deg[i]):
                    acc += y[nbr[i, m]]
                a = base[i] + eta * acc
                if a >= 0.0:
                    p = 1.0 / (1.0 + np.exp(-a))
                else:
                    ea = np.exp(a)
                    p = ea / (1.0 + ea)
                y[i] = 1.0 if u[row, i] < p else 0.0
        state = 0
        for i in range(n):
            if y[i] > 0.5:
                state += powers[i]
        counts[state] += 1.0


def gibbs_state_counts(lattice: Lattice, lin: np.ndarray, eta: float,
                       n_draws: int, thin: int, burn_in: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Histogram of thinned Gibbs draws over all 2^n states (n <= 20).

    Used to compare the sampler's long-run distribution against the exact
    joint on small lattices.
    """
    n = lattice.n_sites
    if n > 20:
        raise ValueError("state counting limited to 20 sites")
    y = (rng.random(n) < 0.5).astype(np.float64)
    gibbs_sweeps(lattice, lin, eta, y, burn_in, rng)
    kap = expit(lin)
    base = lin - eta * (lattice.adjacency() @ kap)
    counts = np.zeros(2 ** n)
    powers = (2 ** np.arange(n)).astype(np.int64)
    # draw uniforms in blocks to bound memory
    block = max(1, 2_000_000 // (thin * n))
    done = 0
    while done < n_draws:
        take = min(block, n_draws - done)
        u = rng.random((take * thin, n))
        _count_kernel(y, lattice.neighbors, lattice.degree, base, eta, u,
                      thin, counts, powers)
        done += take
    return counts


def _build_dataset(config, lattice, basis, X, y, replicate, true_lin):
    Xbar = X.mean(axis=0)
    centered_scores = project_rows(X - Xbar, basis)
    xbar_scores = project(FunctionGrid(basis.grid_points, Xbar), basis)
    meta = {
        "lattice": lattice.spec(),
        "basis": {"kind": "trig", "size": basis.num_functions, "num_grid": basis.grid_points.size},
        "centered": True,
        "xbar_scores": xbar_scores,
        "replicate": replicate,
        "true_linpred": true_lin,
    }
    return Dataset(lattice, centered_scores, y.copy(), meta=meta)


def simulate_case(config: SimConfig, seed: int | None = None) -> MCCase:
    """Simulate one case of ``config.replicates`` datasets.

    Covariates are drawn fresh for every replicate; the response chain is
    shared or re-initialized per replicate according to ``chain_mode``.
    """
    case_seed = config.seed if seed is None else seed
    rng = np.random.Generator(np.random.PCG64(case_seed))
    lattice = config.make_lattice()
    basis = config.make_basis()
    theta = config.true_theta
    n = lattice.n_sites

    datasets = []
    y = (rng.random(n) < 0.5).astype(np.float64)
    for k in range(config.replicates):
        X, _ = generate_covariates(config, rng, basis)
        raw_scores = project_rows(X, basis)
        lin = theta.alpha + raw_scores[:, : theta.p] @ theta.beta
        if config.chain_mode == "per_replicate":
            y = (rng.random(n) < 0.5).astype(np.float64)
            sweeps = config.burn_in
        else:
            sweeps = config.burn_in if k == 0 else config.thin
        gibbs_sweeps(lattice, lin, theta.eta, y, sweeps, rng)
        datasets.append(_build_dataset(config, lattice, basis, X, y, k, lin))
    return MCCase(datasets, theta, case_seed)


def gibbs_simulate(config: SimConfig, scores: np.ndarray, rng: np.random.Generator) -> MCCase:
    """Simulate N datasets against a fixed score matrix (no fresh covariates).

    Used for sampler validation where the conditional field must stay fixed;
    the main pipeline (fresh covariates per replicate) is ``simulate_case``.
    """
    lattice = config.make_lattice()
    theta = config.true_theta
    n = lattice.n_sites
    scores = np.asarray(scores, dtype=float)
    lin = theta.alpha + scores[:, : theta.p] @ theta.beta

    datasets = []
    y = (rng.random(n) < 0.5).astype(np.float64)
    for k in range(config.replicates):
        if config.chain_mode == "per_replicate":
            y = (rng.random(n) < 0.5).astype(np.float64)
            sweeps = config.burn_in
        else:
            sweeps = config.burn_in if k == 0 else config.thin
        gibbs_sweeps(lattice, lin, theta.eta, y, sweeps, rng)
        meta = {"lattice": lattice.spec(), "centered": False, "replicate": k}
        datasets.append(Dataset(lattice, scores, y.copy(), meta=meta))
    return MCCase(datasets, theta, config.seed)


def exact_joint(theta: Theta, dataset_scores: np.ndarray, lattice: Lattice):
    """Exact joint distribution of the binary field by full enumeration.

    The joint mass is proportional to
    exp( sum_i y_i [logit(kappa_i) - eta * sum_{j in N_i} kappa_j]
         + eta * sum_{pairs i<j adjacent} y_i y_j ),
    whose full conditionals reproduce the model's conditional probabilities.

    Returns (states, probs): states is the (2^n, n) 0/1 state table with site
    0 as the fastest-varying bit, probs the corresponding probabilities.
    """
    n = lattice.n_sites
    if n > 20:
        raise ValueError(f"exact enumeration limited to 20 sites, got {n}")
    scores = np.asarray(dataset_scores, dtype=float)
    lin = theta.alpha + scores[:, : theta.p] @ theta.beta
    kap = expit(lin)
    W = lattice.adjacency().toarray()
    a = lin - theta.eta * (W @ kap)

    idx = np.arange(2 ** n, dtype=np.int64)
    states = ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64)
    log_mass = states @ a + 0.5 * theta.eta * np.einsum("si,ij,sj->s", states, W, states)
    probs = np.exp(log_mass - logsumexp(log_mass))
    return states, probs
