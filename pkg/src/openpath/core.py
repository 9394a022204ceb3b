"""Constants, unit handling, 3x3 eigendecompositions and angular quadrature.

Internal units: lengths in Angstrom, energies in meV, temperatures in K,
masses in amu. Frequencies cross the boundary in cm^-1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants as _C
from scipy import optimize
from scipy.special import roots_legendre

from .errors import AccuracyError, InvalidCorrelationError, UsageError

PROTON_MASS_AMU = _C.physical_constants["proton mass in u"][0]

# Reference kinetic constant: hbar^2/2m = 2.0753 meV A^2 for m = 1.0073 amu. CODATA
# gives 2.07498 for the proton, 1.7e-4 lower; the reference value is the one the
# quoted derived numbers (environmental inverse variance, effective temperature)
# were computed with. ``UnitSystem.codata()`` gives the pure CODATA set.
REFERENCE_HBAR2_OVER_2M = 2.0753
REFERENCE_MASS_AMU = 1.0073
CODATA_HBAR2_OVER_2AMU = _C.hbar**2 / (2 * _C.atomic_mass) / (1e-3 * _C.e) / 1e-20


@dataclass(frozen=True)
class UnitSystem:
    """Constants expressed in the internal unit system."""

    #: hbar^2 / (2 * 1 amu) in meV*A^2
    hbar2_over_2amu: float = REFERENCE_HBAR2_OVER_2M * REFERENCE_MASS_AMU
    #: Boltzmann constant in meV/K
    kB: float = _C.k / (1e-3 * _C.e)
    #: energy of 1 cm^-1 in meV
    cm1_to_meV: float = _C.h * _C.c * 100 / (1e-3 * _C.e)
    #: 1 amu in kg
    amu_to_internal: float = _C.atomic_mass

    def hbar2_over_2m(self, mass=PROTON_MASS_AMU):
        """hbar^2/2m in meV*A^2 for a particle of ``mass`` amu."""
        if np.any(np.asarray(mass) <= 0):
            raise UsageError("mass must be positive")
        return self.hbar2_over_2amu / mass

    @classmethod
    def codata(cls):
        return cls(hbar2_over_2amu=CODATA_HBAR2_OVER_2AMU)

    @property
    def hbar2_over_2m_proton(self):
        return self.hbar2_over_2m(PROTON_MASS_AMU)

    def kT(self, temperature):
        return self.kB * temperature


UNITS = UnitSystem()

_ENERGY_ALIASES = {
    "cm-1": "cm-1", "cm^-1": "cm-1", "cm1": "cm-1", "wavenumber": "cm-1",
    "mev": "meV",
    "k": "K", "kelvin": "K", "kbt": "K",
}


def _unit_tag(unit):
    try:
        return _ENERGY_ALIASES[str(unit).strip().lower()]
    except KeyError:
        raise UsageError(f"unknown energy unit {unit!r}") from None


def convert_energy(value, from_unit, to_unit):
    """Linear conversion between cm^-1, meV and K (energy as k_B*T)."""
    src, dst = _unit_tag(from_unit), _unit_tag(to_unit)
    to_mev = {"cm-1": UNITS.cm1_to_meV, "meV": 1.0, "K": UNITS.kB}
    value = np.asarray(value, dtype=float)
    out = value * (to_mev[src] / to_mev[dst]) if src != dst else value * 1.0
    return out.item() if out.ndim == 0 else out


def cm1_to_meV(omega):
    return np.asarray(omega, dtype=float) * UNITS.cm1_to_meV


def meV_to_cm1(energy):
    return np.asarray(energy, dtype=float) / UNITS.cm1_to_meV


def _fix_signs(vecs):
    # first component with |v| > 1e-12 made positive, column-wise
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return vecs


def principal_decomposition(C, neg_tol=1e-12, degeneracy_tol=1e-8):
    """Eigendecomposition of a symmetric 3x3 correlation matrix.

    Returns ``(eigvals, eigvecs, degenerate)`` with eigenvalues descending,
    eigenvectors as *columns* and a flag set when two eigenvalues coincide
    within ``degeneracy_tol``.
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (3, 3):
        raise UsageError(f"expected a 3x3 matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise InvalidCorrelationError("correlation matrix has non-finite entries")
    scale = max(np.abs(C).max(), 1e-300)
    if np.abs(C - C.T).max() > 1e-10 * scale:
        raise InvalidCorrelationError("correlation matrix is not symmetric")
    C = 0.5 * (C + C.T)
    vals, vecs = np.linalg.eigh(C)
    if vals[0] < -neg_tol:
        raise InvalidCorrelationError(f"negative eigenvalue {vals[0]:.3e}")
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vecs = _fix_signs(vecs)
    degenerate = bool(np.any(np.abs(np.diff(vals)) < degeneracy_tol))
    return vals, vecs, degenerate


def reconstruct(eigvals, eigvecs):
    return (eigvecs * eigvals) @ eigvecs.T


def find_root(f, lo, hi, rtol=1e-15, xtol=1e-300, maxiter=200):
    """Bracketed scalar root (Brent); raises AccuracyError on failure."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise AccuracyError(f"root not bracketed in [{lo}, {hi}]")
    try:
        return optimize.brentq(f, lo, hi, xtol=max(xtol, 1e-300), rtol=max(rtol, 4 * np.finfo(float).eps),
                               maxiter=maxiter)
    except RuntimeError as exc:
        raise AccuracyError(str(exc)) from exc


def _angular_sum(x, half_inv_var, order, chunk=None):
    # product rule: Gauss-Legendre in u = cos(theta) on [0, 1] (even integrand),
    # uniform midpoint in phi on [0, pi/2) (integrand has period pi, even)
    u, wu = roots_legendre(order)
    u = 0.5 * (u + 1.0)
    wu = 0.5 * wu
    nphi = 2 * order
    phi = (np.arange(nphi) + 0.5) * (0.5 * np.pi / nphi)
    s = np.sqrt(1.0 - u**2)
    u1 = np.outer(s, np.cos(phi))
    u2 = np.outer(s, np.sin(phi))
    u3 = np.repeat(u[:, None], nphi, axis=1)
    q = (half_inv_var[0] * u1**2 + half_inv_var[1] * u2**2 + half_inv_var[2] * u3**2).ravel()
    w = (np.outer(wu, np.full(nphi, 0.5 * np.pi / nphi))).ravel() * 8.0
    x2 = np.asarray(x, dtype=float) ** 2
    out = np.empty_like(x2)
    step = chunk or max(1, 2_000_000 // q.size)
    for i in range(0, x2.size, step):
        out[i:i + step] = np.exp(-np.outer(x2[i:i + step], q)) @ w
    return out


def spherical_gaussian_average(x, variances, tol=1e-8, min_order=8, max_order=512):
    """Radial density of a centred anisotropic Gaussian, angle-integrated.

    ``n(x) = (8 pi^3)^(-1/2) / (s1 s2 s3) * Int dOmega exp(-sum x_k^2 / 2 s_k^2)``,
    normalised so that ``Int x^2 n(x) dx = 1``. The angular order is doubled
    until the largest change falls below ``tol`` relative to the peak value.
    Returns ``(values, order)``.
    """
    variances = np.asarray(variances, dtype=float)
    if variances.shape != (3,) or np.any(variances <= 0):
        raise UsageError("need three positive variances")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pref = 1.0 / np.sqrt(8 * np.pi**3 * np.prod(variances))
    half = 0.5 / variances
    order = min_order
    prev = pref * _angular_sum(x, half, order)
    while True:
        order *= 2
        cur = pref * _angular_sum(x, half, order)
        peak = max(np.abs(cur).max(), 1e-300)
        change = np.abs(cur - prev).max() / peak
        if change < tol:
            return cur, order
        if order >= max_order:
            raise AccuracyError(f"angular quadrature reached order {order} with change {change:.2e}",
                                achieved=change)
        prev = cur
