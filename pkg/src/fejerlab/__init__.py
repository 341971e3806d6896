"""Relativised Fejér monotone iterations: Dykstra's algorithm, moduli, rates and checkers."""

from .geometry import (AffineSubspace, Ball, Box, ConvexSet, DimensionError, GeometryError, HalfSpace,
                       Hyperplane, ProblemInstance, dist, project, residual_f)
from .moduli import (CoarseGridError, GHPair, Modulus, Modulus2, Modulus3, ModulusError, ModulusRangeError,
                     TableModulus, box_total_boundedness, coincidence_tau, discover_regularity,
                     dykstra_rho_chi_approx, dykstra_rho_uniform, falsify_regularity, gh_identity, gh_square,
                     gh_square_sound, monotone_envelope, monotonize_A)
from .iterations import (HorizonError, IterationTrace, ParamSequence, SchemeDescriptor, Verdict, a_holds,
                         check_fejer_local, check_fejer_uniform, check_fejer_uniform_approx, empirical_phi,
                         run_dykstra, run_scheme)
from .rates import (BoundOverflow, Counterfunction, RateCertificate, RateInputs, certify_cauchy,
                    certify_metastability, psi_cauchy, psi_metastable, reversal_regularity)
from .harness import ConfigError, ExperimentConfig, Report, run_experiment

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AffineSubspace",
    "Ball",
    "Box",
    "ConvexSet",
    "DimensionError",
    "GeometryError",
    "HalfSpace",
    "Hyperplane",
    "ProblemInstance",
    "dist",
    "project",
    "residual_f",
    "CoarseGridError",
    "GHPair",
    "Modulus",
    "Modulus2",
    "Modulus3",
    "ModulusError",
    "ModulusRangeError",
    "TableModulus",
    "box_total_boundedness",
    "coincidence_tau",
    "discover_regularity",
    "dykstra_rho_chi_approx",
    "dykstra_rho_uniform",
    "falsify_regularity",
    "gh_identity",
    "gh_square",
    "gh_square_sound",
    "monotone_envelope",
    "monotonize_A",
    "HorizonError",
    "IterationTrace",
    "SchemeDescriptor",
    "Verdict",
    "a_holds",
    "check_fejer_local",
    "check_fejer_uniform",
    "check_fejer_uniform_approx",
    "empirical_phi",
    "run_dykstra",
    "run_scheme",
    "BoundOverflow",
    "Counterfunction",
    "RateCertificate",
    "RateInputs",
    "certify_cauchy",
    "certify_metastability",
    "psi_cauchy",
    "psi_metastable",
    "reversal_regularity",
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "run_experiment",
    "ParamSequence",
]
