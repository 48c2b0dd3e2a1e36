"""Linearized stability for quasilinear and semilinear parabolic problems on spectral Hilbert scales."""

from .errors import (DivergenceError, InputError, NumericError, NumericOverflowError, ParastabError,
                     PreconditionError)
from .exponents import (CriticalReport, ExponentProfile, alpha_crit, alpha_crit_star, chemotaxis_profile,
                        critical_sobolev_index, gradient_profile, scaling_defect, validate_profile)
from .integrate import (SolveConfig, TimeMesh, TrajectorySolution, oracle_integrate, singular_bound_check,
                        solve_quasilinear, solve_semilinear)
from .linops import (BlockGenerator, DenseGenerator, GeneratorCertificate, LinearizationReport,
                     apply_semigroup, chemotaxis_linearization, energy_identity_residual, evolution_operator,
                     numeric_linearization, resolvent_certificate, semigroup_norm_constants, spectral_bound)
from .problems import (ProblemSpec, equilibrium_residual, make_chemotaxis, make_gradient_quasilinear,
                       make_problem, make_quadratic)
from .spaces import (Domain1D, Scale, SpectralField, SystemField, WeightedTrajectory, pointwise_compose,
                     project_function, sobolev_norm, weighted_sup_norm)
from .special import special_beta, sup_power_exp
from .stability import (BasinCertificate, DecayFit, StabilityVerdict, basin_certificate, basin_length,
                        c0_constant, certificate_M, choose_gamma0, estimate_remainder_constants, fit_decay,
                        instability_probe, smoothing_probe, verify_exponential_estimate, weighted_vanishing)

__version__ = "0.1.0"
