"""Solitary waves of the modified Camassa-Holm equation on a nonzero
background: construction, variational and spectral checks, and time
evolution."""
from .errors import (AmbiguityError, BlowUpError, ConditioningWarning, DomainError,
                     IntegrationError, MchError, ParameterError, ParityError,
                     PositivityError, ResolutionWarning, SolverError)
from .wave_profile import (WaveParameters, WaveProfile, construct_profile,
                           level_curve_psi2, profile_residuals,
                           scaling_covariance_check, validate_parameters)

__version__ = "0.1.0"
