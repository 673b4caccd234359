"""Generalized Gaussian volumes, surface measures and Minkowski-problem solvers."""

__version__ = "0.1.0"

from .density import Params, ball_mass, classify_log_profile, density_at, normalizer, support_cutoff
from .errors import (DomainError, GGMinkError, InadmissibleParamsError, NonConvergenceError,
                     PreconditionError)
from .geometry import Polytope, SupportVector, wulff_shape
from .measures import gauss_volume, weighted_surface_measure
from .normalized import DiscreteMeasure, solve_normalized, solve_normalized_even

__all__ = ["__version__", "Params", "ball_mass", "classify_log_profile", "density_at", "normalizer",
           "support_cutoff", "DomainError", "GGMinkError", "InadmissibleParamsError", "NonConvergenceError",
           "PreconditionError", "Polytope", "SupportVector", "wulff_shape", "gauss_volume",
           "weighted_surface_measure", "DiscreteMeasure", "solve_normalized", "solve_normalized_even"]
