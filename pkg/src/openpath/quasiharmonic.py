"""Thermal harmonic-oscillator maps between widths and frequencies.

The end-to-end variance of a harmonic mode at temperature T is
``sigma^2 = (2 hbar / M omega) tanh(hbar omega / 2 k_B T)``; this module
provides that map, its inverse, kinetic energies, the isotropic best-fit
model, the effective harmonic potential and spread comparisons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import PROTON_MASS_AMU, UNITS, find_root, spherical_gaussian_average
from .errors import AccuracyError, NoBoundStateError, UsageError

OMEGA_MAX_CM1 = 1e5


def _check_temperature(T):
    if not np.all(np.asarray(T) > 0):
        raise UsageError("temperature must be positive")


def _half_beta_hbar_omega(omega, T):
    return np.asarray(omega, dtype=float) * UNITS.cm1_to_meV / (2.0 * UNITS.kB * np.asarray(T, dtype=float))


def _tanhc(y):
    # tanh(y)/y with the y -> 0 limit
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-4
    safe = np.where(small, 1.0, y)
    return np.where(small, 1.0 - y**2 / 3.0 + 2.0 * y**4 / 15.0, np.tanh(safe) / safe)


def _ycoth(y):
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-4
    safe = np.where(small, 1.0, y)
    return np.where(small, 1.0 + y**2 / 3.0 - y**4 / 45.0, safe / np.tanh(safe))


def _ycoth_minus_one(y):
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-3
    safe = np.where(small, 1.0, y)
    series = y**2 / 3.0 - y**4 / 45.0 + 2.0 * y**6 / 945.0
    return np.where(small, series, safe / np.tanh(safe) - 1.0)


def free_particle_sigma2(T, mass=PROTON_MASS_AMU):
    """End-to-end variance of a free particle, hbar^2/(M k_B T), in A^2."""
    _check_temperature(T)
    return 2.0 * UNITS.hbar2_over_2m(mass) / (UNITS.kB * np.asarray(T, dtype=float))


def sigma_from_omega(omega, T, mass=PROTON_MASS_AMU):
    """End-to-end variance (A^2) of a harmonic mode of frequency ``omega`` (cm^-1)."""
    if isinstance(omega, (int, float)) and isinstance(T, (int, float)) and omega >= 0 and T > 0:
        # plain-float path; numpy dispatch dominates for single values
        y = omega * UNITS.cm1_to_meV / (2.0 * UNITS.kB * T)
        tc = 1.0 - y * y / 3.0 + 2.0 * y**4 / 15.0 if y < 1e-4 else math.tanh(y) / y
        return 2.0 * UNITS.hbar2_over_2m(mass) / (UNITS.kB * T) * tc
    _check_temperature(T)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise UsageError("frequencies must be non-negative")
    y = _half_beta_hbar_omega(omega, T)
    out = free_particle_sigma2(T, mass) * _tanhc(y)
    return out.item() if out.ndim == 0 else out


def _solve_tanh_ratio(r, maxiter=100):
    # root of tanh(y) = r y for 0 < r < 1: Newton inside the bracket [sqrt(3(1-r)), 1/r],
    # bisecting whenever a step leaves it. Start from the Pade estimate tanh(y)/y ~ 1/(1 + y^2/3).
    r = np.asarray(r, dtype=float)
    lo = np.sqrt(3.0 * (1.0 - r)) * (1.0 - 1e-12)
    hi = 1.0 / r
    y = np.clip(np.sqrt(3.0 * (1.0 - r) / r), lo, hi)
    for _ in range(maxiter):
        t = np.tanh(y)
        f = t - r * y
        lo = np.where(f > 0, y, lo)
        hi = np.where(f < 0, y, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = y - f / ((1.0 - t) * (1.0 + t) - r)
        bad = ~((new >= lo) & (new <= hi))
        new = np.where(bad, 0.5 * (lo + hi), new)
        done = (np.abs(new - y) <= 4e-16 * y) | (np.abs(f) <= 4e-16 * t)
        y = np.where(np.abs(f) <= 4e-16 * t, y, new)
        if np.all(done):
            return y
    raise AccuracyError("iteration for omega did not converge")


def _solve_tanh_ratio_scalar(r, maxiter=100):
    lo = math.sqrt(3.0 * (1.0 - r)) * (1.0 - 1e-12)
    hi = 1.0 / r
    y = min(max(math.sqrt(3.0 * (1.0 - r) / r), lo), hi)
    for _ in range(maxiter):
        t = math.tanh(y)
        f = t - r * y
        if abs(f) <= 4e-16 * t:
            return y
        if f > 0:
            lo = y
        else:
            hi = y
        d = (1.0 - t) * (1.0 + t) - r
        new = y - f / d if d != 0 else hi + 1.0
        if not lo <= new <= hi:
            new = 0.5 * (lo + hi)
        if abs(new - y) <= 4e-16 * y:
            return new
        y = new
    raise AccuracyError("iteration for omega did not converge")


def omega_from_sigma(sigma2, T, mass=PROTON_MASS_AMU):
    """Inverse of :func:`sigma_from_omega`: frequency in cm^-1."""
    if isinstance(sigma2, (int, float)) and isinstance(T, (int, float)) and sigma2 > 0 and T > 0:
        r = sigma2 / (2.0 * UNITS.hbar2_over_2m(mass) / (UNITS.kB * T))
        if r < 1.0:
            omega = 2.0 * _solve_tanh_ratio_scalar(r) * UNITS.kB * T / UNITS.cm1_to_meV
            if omega <= OMEGA_MAX_CM1:
                return omega
    _check_temperature(T)
    s = np.asarray(sigma2, dtype=float)
    if not np.all(s > 0):
        raise UsageError("sigma^2 must be positive")
    bound = free_particle_sigma2(T, mass)
    r = s / bound
    if np.any(r >= 1.0):
        i = np.unravel_index(np.argmax(r), r.shape) if r.ndim else ()
        raise NoBoundStateError(
            f"sigma^2 = {float(np.broadcast_to(s, r.shape)[i]):.6g} A^2 is not below the "
            f"free-particle bound {float(np.broadcast_to(bound, r.shape)[i]):.6g} A^2")
    y = _solve_tanh_ratio(r)
    out = 2.0 * y * UNITS.kB * np.asarray(T, dtype=float) / UNITS.cm1_to_meV
    if np.any(out > OMEGA_MAX_CM1):
        raise AccuracyError(f"frequency {np.max(out):.4g} cm^-1 outside bracket (0, {OMEGA_MAX_CM1:g}]")
    return out.item() if out.ndim == 0 else out


def mode_kinetic_energy(omega, T):
    """(hbar omega / 4) coth(hbar omega / 2 k_B T) in meV; k_B T / 2 at omega = 0."""
    _check_temperature(T)
    y = _half_beta_hbar_omega(omega, T)
    out = 0.5 * UNITS.kB * np.asarray(T, dtype=float) * _ycoth(y)
    return out.item() if out.ndim == 0 else out


def kinetic_energy_from_omega(omega, T):
    return float(np.sum(mode_kinetic_energy(omega, T)))


def kinetic_energy_from_sigma(sigma2, mass=PROTON_MASS_AMU):
    """(hbar^2/2M) sum 1/sigma_k^2 in meV."""
    return float(UNITS.hbar2_over_2m(mass) * np.sum(1.0 / np.asarray(sigma2, dtype=float)))


def momentum_variance(omega, T, mass=PROTON_MASS_AMU):
    """<p^2>/hbar^2 per mode (A^-2): (M omega / 2 hbar) coth(hbar omega / 2 k_B T)."""
    return 1.0 / np.asarray(sigma_from_omega(omega, T, mass))


def omega_from_momentum_variance(lam, T, mass=PROTON_MASS_AMU):
    """Invert ``lam = (M omega / 2 hbar) coth(...)`` (A^-2) for omega in cm^-1."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise NoBoundStateError("momentum variance must be positive")
    return omega_from_sigma(1.0 / lam, T, mass)


def environmental_inverse_variance(omega, T, mass=PROTON_MASS_AMU):
    """1/sigma^2 - M k_B T / hbar^2 (A^-2), exactly zero at omega = 0."""
    y = _half_beta_hbar_omega(omega, T)
    free_inv = 1.0 / free_particle_sigma2(T, mass)
    out = free_inv * _ycoth_minus_one(y)
    return out.item() if np.ndim(out) == 0 else out


@dataclass
class IsotropicFitResult:
    omega_bar: float
    effective_temperature: float
    kinetic_energy: float
    fit_residual: float
    method: str
    space: str
    sigma2: float = field(default=float("nan"))

    units = {"omega_bar": "cm^-1", "effective_temperature": "K", "kinetic_energy": "meV",
             "fit_residual": "1", "sigma2": "A^2"}


def _iso_result(omega, T, mass, residual, method, space):
    ek = 3.0 * mode_kinetic_energy(omega, T)
    return IsotropicFitResult(
        omega_bar=float(omega),
        effective_temperature=float(2.0 * ek / (3.0 * UNITS.kB)),
        kinetic_energy=float(ek),
        fit_residual=float(residual),
        method=method,
        space=space,
        sigma2=float(sigma_from_omega(omega, T, mass)),
    )


def _iso_density(x, s):
    return np.sqrt(2.0 / np.pi) * s**-1.5 * np.exp(-x**2 / (2.0 * s))


def _ls_isotropic_variance(grid, values, s0):
    """Variance s minimising Int x^2 (n_iso(x; s) - n(x))^2 dx.

    Solved as a root of the stationarity condition, so an isotropic input is
    a fixed point to machine precision.
    """
    w = grid**2

    def dobj(s):
        niso = _iso_density(grid, s)
        dn = niso * (-1.5 / s + grid**2 / (2.0 * s**2))
        return integrate.simpson(w * (niso - values) * dn, x=grid)

    def obj(s):
        return integrate.simpson(w * (_iso_density(grid, s) - values) ** 2, x=grid)

    # coarse log scan around the moment estimate, then refine on a sign change
    cand = s0 * np.geomspace(0.25, 4.0, 81)
    vals = np.array([obj(c) for c in cand])
    i = int(np.argmin(vals))
    lo, hi = cand[max(i - 1, 0)], cand[min(i + 1, len(cand) - 1)]
    if dobj(lo) * dobj(hi) > 0:
        raise AccuracyError("least-squares isotropic fit did not bracket a minimum")
    s = find_root(dobj, lo, hi, rtol=1e-14)
    resid = np.sqrt(obj(s) / integrate.simpson(w * values**2, x=grid))
    return s, resid


def isotropic_fit(data, T=None, mass=None, space="end-to-end", method="moment-match",
                  grid_points=4001):
    """Single-frequency isotropic model that best represents ``data``.

    ``data`` is a PrincipalSpectrum (anything with ``sigma2``, ``temperature``
    and ``mass``) or a RadialCurve. ``method`` is ``"moment-match"`` (equal
    second moment, ``3 sigma_iso^2 = sum sigma_k^2`` in end-to-end space) or
    ``"least-squares"`` (x^2-weighted squared difference of spherical curves).
    """
    if method not in ("moment-match", "least-squares"):
        raise UsageError(f"unknown isotropic fit method {method!r}")
    if space not in ("end-to-end", "momentum"):
        raise UsageError(f"unknown space {space!r}")
    T = T if T is not None else getattr(data, "temperature", None)
    mass = mass if mass is not None else getattr(data, "mass", PROTON_MASS_AMU)
    if T is None:
        raise UsageError("temperature required")
    _check_temperature(T)

    if hasattr(data, "sigma2"):
        var = np.asarray(data.sigma2, dtype=float)
        if space == "momentum":
            var = 1.0 / var
        second_moment = float(var.sum())
        grid = np.linspace(0.0, 12.0 * np.sqrt(var.max()), grid_points)
        values = None
    else:
        kind = getattr(data, "kind", space)
        if kind != space:
            raise UsageError(f"curve kind {kind!r} does not match space {space!r}")
        grid = np.asarray(data.grid, dtype=float)
        values = np.asarray(data.values, dtype=float)
        second_moment = float(integrate.simpson(grid**4 * values, x=grid))
        var = None

    s_mm = second_moment / 3.0
    if method == "moment-match":
        s = s_mm
        if values is None:
            resid = 0.0 if np.allclose(var, s, rtol=0, atol=0) else _residual(grid, var, s)
        else:
            resid = np.sqrt(integrate.simpson(grid**2 * (_iso_density(grid, s) - values) ** 2, x=grid)
                            / integrate.simpson(grid**2 * values**2, x=grid))
    else:
        if values is None:
            values, _ = spherical_gaussian_average(grid, var)
        s, resid = _ls_isotropic_variance(grid, values, s_mm)

    sigma2 = s if space == "end-to-end" else 1.0 / s
    omega = omega_from_sigma(sigma2, T, mass)
    return _iso_result(omega, T, mass, resid, method, space)


def _residual(grid, var, s):
    values, _ = spherical_gaussian_average(grid, var)
    return float(np.sqrt(integrate.simpson(grid**2 * (_iso_density(grid, s) - values) ** 2, x=grid)
                         / integrate.simpson(grid**2 * values**2, x=grid)))


def isotropic_fit_report(data, T=None, mass=None, space="end-to-end"):
    """Both isotropic fit methods, keyed by method name."""
    return {m: isotropic_fit(data, T, mass, space=space, method=m)
            for m in ("least-squares", "moment-match")}


@dataclass
class MeanForceMatrix:
    A: np.ndarray               # cm^-2, sum_k omega_k^2 v_k v_k^T
    force_constants: np.ndarray  # meV/A^2 along each principal direction, M omega_k^2
    K: np.ndarray               # meV/A^2, M A as a matrix
    directions: np.ndarray

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.A)[::-1]

    def energy(self, r):
        """Effective potential (M/2) r^T A r in meV for points of shape (..., 3)."""
        r = np.asarray(r, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", r, self.K, r)


def force_constant(omega, mass=PROTON_MASS_AMU):
    """M omega^2 in meV/A^2 for omega in cm^-1."""
    e = np.asarray(omega, dtype=float) * UNITS.cm1_to_meV
    return e**2 / (2.0 * UNITS.hbar2_over_2m(mass))


def potential_of_mean_force(spectrum):
    omega = np.asarray(spectrum.omega, dtype=float)
    V = np.asarray(spectrum.directions, dtype=float)
    A = (V.T * omega**2) @ V
    k = force_constant(omega, spectrum.mass)
    K = (V.T * k) @ V
    return MeanForceMatrix(A=A, force_constants=k, K=K, directions=V.copy())


def classical_spread(omega, T, mass=PROTON_MASS_AMU):
    """Classical thermal rms displacement sqrt(k_B T / M omega^2) in A."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise AccuracyError("classical spread diverges at omega = 0")
    if np.any(np.asarray(T) < 0):
        raise UsageError("temperature must be non-negative")
    out = np.sqrt(UNITS.kB * np.asarray(T, dtype=float) / force_constant(omega, mass))
    return out.item() if out.ndim == 0 else out


def quantum_spread(omega, T=0.0, mass=PROTON_MASS_AMU):
    """Quantal rms position spread sqrt((hbar/2 M omega) coth(hbar omega/2 k_B T)) in A.

    ``T = 0`` gives the ground-state value sqrt(hbar / 2 M omega).
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise UsageError("frequency must be positive")
    e = omega * UNITS.cm1_to_meV
    ground = UNITS.hbar2_over_2m(mass) / e
    if np.all(np.asarray(T) == 0):
        out = np.sqrt(ground)
    else:
        out = np.sqrt(ground / np.tanh(_half_beta_hbar_omega(omega, T)))
    return out.item() if np.ndim(out) == 0 else out
