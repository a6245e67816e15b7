"""Numerical experiments relating Orlicz-Sobolev inequalities and doubling of measures."""

from .config import ExperimentConfig
from .cutoff import (
    CutoffSequence,
    cutoff_field,
    discrete_lip,
    psi_eval,
    q_gradient_bound_check,
    radii_sequence,
    zeta_sum,
)
from .errors import ContractError, DegenerateInputError, DivergentSeriesError, DomainError, OrliczError
from .iteration import (
    IterationTrace,
    best_doubling_bound,
    doubling_bound,
    find_contradiction,
    induction_holds,
    induction_threshold,
    minimal_c_tilde,
    pj_sequence,
    recursion_check,
    superradius_lower_bound,
)
from .metric import (
    DegeneracyProfile,
    MetricGrid,
    ball_measure,
    distance_field,
    doubling_ratio,
    fit_doubling_exponent,
    log_doubling_exponent_fit,
    q_gradient,
    volume_asymptotic,
)
from .sobolev import empirical_superradius, pp_sobolev_check, sobolev_ratio, superradius_formula
from .young import DiscreteMeasureSpace, YoungFunction, check_young, eval_phi, lp_norm, luxemburg_norm, phi_inverse

__version__ = "0.1.0"
