"""Quasi-harmonic analysis of proton end-to-end distributions from open path integrals."""

__version__ = "0.1.0"

from .core import PROTON_MASS_AMU, UNITS, convert_energy, principal_decomposition, spherical_gaussian_average
from .errors import (AccuracyError, DataError, InsufficientDataError, InvalidCorrelationError, NoBoundStateError,
                     OpenPathError, UnconfinedError, UsageError)
from .estimator import (EndToEndSampleSet, PrincipalSpectrum, accumulate_correlation, average_spectrum,
                        fit_principal_spectrum, fit_samples, kinetic_energy, momentum_distribution,
                        spherical_end_to_end)
from .quasiharmonic import isotropic_fit, omega_from_sigma, sigma_from_omega
