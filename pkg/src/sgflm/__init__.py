"""Spatial generalized functional linear models for binary lattice data.

Composite-likelihood estimation of an autologistic model with a functional
covariate, Godambe-information inference, and a reproducible Monte Carlo
harness.
"""

from .basis import (
    BasisSet,
    FunctionGrid,
    center_covariates,
    default_grid,
    make_trig_basis,
    project,
    quad_inner_product,
    reconstruct,
)
from .fit import (
    FitConfig,
    FitResult,
    adjust_intercept_for_centering,
    fit_gflm,
    fit_sgflm,
    init_eta_slice,
    init_independence,
    select_p_aic,
)
from .inference import (
    ConfidenceBand,
    SandwichMatrices,
    band_beta,
    ci_eta,
    quadratic_stat_beta,
    quadratic_stat_theta,
    sandwich,
)
from .lattice import Lattice, build_lattice, neighbor_sum
from .model import (
    CLDerivatives,
    Dataset,
    Theta,
    composite_loglik,
    composite_loglik_derivatives,
    conditional_probability,
    kappa,
    natural_parameter,
)
from .simulate import (
    MCCase,
    SimConfig,
    exact_joint,
    generate_covariates,
    gibbs_simulate,
    simulate_case,
)

__version__ = "0.1.0"
