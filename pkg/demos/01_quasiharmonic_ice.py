"""Principal frequencies of the ice proton to kinetic energy, isotropic fits and radial curves.

Compares the path-integral (anharmonic) and phonon (harmonic) spectra at 269 K.
"""
import numpy as np

from openpath import PrincipalSpectrum, kinetic_energy, momentum_distribution, spherical_end_to_end
from openpath.quasiharmonic import environmental_inverse_variance, isotropic_fit_report

T = 269.0
SPECTRA = {"path integral": (2639.0, 1164.0, 775.0), "harmonic": (3017.6, 1172.5, 870.3)}

for name, om in SPECTRA.items():
    spec = PrincipalSpectrum.from_omega(om, T)
    ek = kinetic_energy(spec)
    print(f"{name}: omega {om} cm^-1, sigma^2 {np.round(spec.sigma2, 5)} A^2, E_K {ek:.2f} meV")
    print(f"  environmental b_k {np.round(environmental_inverse_variance(np.array(om), T), 3)} A^-2")
    for method, fit in isotropic_fit_report(spec).items():
        print(f"  isotropic {method:13s} omega_bar {fit.omega_bar:7.1f} cm^-1  T_eff {fit.effective_temperature:6.1f} K"
              f"  E_K ratio {fit.kinetic_energy / ek:.3f}")
    ee = spherical_end_to_end(spec, np.linspace(0, 2.5, 1250))
    mom = momentum_distribution(spec)
    k = mom.grid[np.argmax(mom.grid**2 * mom.values)]
    print(f"  n(x) norm {ee.normalization:.8f}; 4 pi k^2 n(k) peaks at k = {k:.2f} A^-1")
