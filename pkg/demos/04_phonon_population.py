"""Harmonic momentum correlations and band populations of the shipped water-ring Hessian."""
from pathlib import Path

import numpy as np

from openpath.phonon import (BandPartition, band_analysis, dynamical_spectrum, harmonic_principal_spectrum,
                             momentum_correlation, phonon_principal_frequencies, population, read_hessian)

T = 269.0
H, masses = read_hessian(Path(__file__).resolve().parent.parent / "data" / "water_ring_hessian.txt")
spec = dynamical_spectrum(H, masses)
print(f"{len(masses)} atoms, {len(spec.frequencies)} vibrational modes, "
      f"{spec.frequencies.min():.0f} to {spec.frequencies.max():.0f} cm^-1")

protons = [i for i, m in enumerate(masses) if m < 1.5]
pp = phonon_principal_frequencies([momentum_correlation(spec, i, T) for i in protons], T)
print(f"proton principal frequencies {pp.omega_mean.round(1)} +- {pp.omega_std.round(1)} cm^-1, "
      f"E_K {pp.kinetic_mean:.2f} +- {pp.kinetic_std:.2f} meV")

dirs = [harmonic_principal_spectrum(spec, i, T).directions for i in protons]
table = population(spec, dirs, protons)
ba = band_analysis(table, BandPartition(), T, float(np.mean(masses[protons])))
for lab, w in ba.weights.items():
    print(f"{lab:10s} weight {w.round(3)}")
print(f"acoustic   weight {ba.acoustic.round(3)}; completeness {table.completeness}")
print(f"without network modes: weighted mean {ba.weighted_mean.round(1)}, restricted {ba.restricted_sum.round(1)} cm^-1")
