"""Open-chain samplers, the 1D grid oracle and effective-potential fitting."""

from .fitting import PotentialFit, fit_effective_potential_1d
from .oracle import Oracle1DResult, effective_omega, oracle_1d
from .pimc import (OpenChainConfig, PIMCResult, chain_action, discrete_harmonic_variance, sample_harmonic_exact,
                   sample_open_pimc)
from .potentials import (DoubleWell1D, Free, Harmonic3D, Polynomial1D, cubic_stretch, ice_stretch_preset,
                         morse_like)
