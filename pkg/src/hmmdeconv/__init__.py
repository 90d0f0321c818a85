"""Adaptive deconvolution estimation of the stationary, joint and transition
densities of a Markov chain observed through additive noise, Y = X + eps.
"""
from .estimate1d import (PenaltyConfig, ProjectionEstimate1D, coefficients_1d, contrast_1d,
                         evaluate_1d, model_collection_1d, penalty_1d, select_and_fit_1d)
from .estimate2d import (ProjectionEstimate2D, coefficients_2d, contrast_2d, evaluate_2d,
                         model_collection_2d, penalty_2d, select_and_fit_2d)
from .fourier import (QuadratureGrid, basis_square_sum, empirical_cf_1d, empirical_cf_2d,
                      fourier_coeff_grid, sinc_basis)
from .noise import (DeltaOverflow, NoiseModel, delta2_m, delta_m, envelope, gaussian, identity,
                    laplace, log_chisq, penalty_exponents, user_table)
from .risk import (RiskRecord, mc_risk_study, mise_grid, oracle_m_search, predict_rate, rate_fit)
from .simulate import (AR1Chain, CIRChain, OUChain, SmoothnessClass, add_noise, simulate_ar1,
                       simulate_cir, simulate_sv, true_density_eval)
from .transition import (StationaryFloor, TransitionEstimate, estimate_transition,
                         quotient_estimate, restricted_models_f)

__version__ = "0.1.0"
