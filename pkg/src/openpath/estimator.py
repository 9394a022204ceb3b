"""From end-to-end displacement samples to principal spectra and distributions."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, ndimage, signal, stats

from .core import PROTON_MASS_AMU, UNITS, principal_decomposition, spherical_gaussian_average
from .errors import DataError, InsufficientDataError, InvalidCorrelationError, UsageError
from .quasiharmonic import (
    free_particle_sigma2,
    kinetic_energy_from_omega,
    kinetic_energy_from_sigma,
    omega_from_sigma,
    sigma_from_omega,
)


@dataclass
class EndToEndSampleSet:
    """End-to-end vectors (A) tagged by proton id."""

    proton_ids: np.ndarray
    x: np.ndarray
    temperature: float
    mass: float = PROTON_MASS_AMU
    provenance: str = "imported"

    def __post_init__(self):
        self.proton_ids = np.asarray(self.proton_ids, dtype=np.int64).ravel()
        self.x = np.asarray(self.x, dtype=float).reshape(-1, 3)
        if self.proton_ids.size != self.x.shape[0]:
            raise DataError("proton_ids and x have different lengths")
        if not np.all(np.isfinite(self.x)):
            raise DataError("non-finite end-to-end components")
        if self.provenance not in ("simulated", "imported"):
            raise DataError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return self.x.shape[0]

    @property
    def protons(self):
        return np.unique(self.proton_ids)

    def for_proton(self, proton_id):
        return self.x[self.proton_ids == proton_id]

    @classmethod
    def concatenate(cls, sets):
        sets = list(sets)
        if not sets:
            raise DataError("nothing to concatenate")
        first = sets[0]
        return cls(np.concatenate([s.proton_ids for s in sets]), np.concatenate([s.x for s in sets]),
                   first.temperature, first.mass, first.provenance)


@dataclass
class CorrelationEstimate:
    matrix: np.ndarray
    mean: np.ndarray
    count: int


def accumulate_correlation(samples, proton_id=None, block=65536):
    """C_ab = <x_a x_b> over one proton's samples (no mean subtraction).

    Partial sums are taken over fixed-size blocks and reduced in order, so
    the result does not depend on how the data were chunked upstream.
    """
    x = samples.x if proton_id is None else samples.for_proton(proton_id)
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"proton {proton_id}: {n} sample(s), need at least 2")
    C = np.zeros((3, 3))
    s = np.zeros(3)
    for i in range(0, n, block):
        blk = x[i:i + block]
        C += blk.T @ blk
        s += blk.sum(axis=0)
    C /= n
    C = 0.5 * (C + C.T)
    return CorrelationEstimate(matrix=C, mean=s / n, count=n)


@dataclass
class PrincipalSpectrum:
    """Principal widths, frequencies and directions, ordered omega_1 >= omega_2 >= omega_3."""

    sigma2: np.ndarray       # A^2, ascending
    omega: np.ndarray        # cm^-1, descending
    directions: np.ndarray   # rows are v_k
    temperature: float
    mass: float = PROTON_MASS_AMU
    degenerate: bool = False
    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    count: int = 0

    units = {"sigma2": "A^2", "omega": "cm^-1", "temperature": "K", "mass": "amu", "mean": "A"}

    @classmethod
    def from_omega(cls, omega, temperature, mass=PROTON_MASS_AMU, directions=None):
        omega = np.asarray(omega, dtype=float)
        order = np.argsort(-omega, kind="stable")
        omega = omega[order]
        dirs = np.eye(3) if directions is None else np.asarray(directions, dtype=float)[order]
        return cls(sigma2=np.asarray(sigma_from_omega(omega, temperature, mass)), omega=omega,
                   directions=dirs, temperature=temperature, mass=mass,
                   degenerate=bool(np.any(np.abs(np.diff(omega)) == 0)))

    @classmethod
    def from_sigma2(cls, sigma2, temperature, mass=PROTON_MASS_AMU, directions=None):
        sigma2 = np.asarray(sigma2, dtype=float)
        order = np.argsort(sigma2, kind="stable")
        dirs = np.eye(3) if directions is None else np.asarray(directions, dtype=float)[order]
        return cls(sigma2=sigma2[order], omega=np.asarray(omega_from_sigma(sigma2[order], temperature, mass)),
                   directions=dirs, temperature=temperature, mass=mass)

    def correlation(self):
        """End-to-end correlation matrix sum_k sigma_k^2 v_k v_k^T."""
        return (self.directions.T * self.sigma2) @ self.directions

    def momentum_covariance(self):
        """<k k^T> with k = p/hbar, in A^-2."""
        return (self.directions.T / self.sigma2) @ self.directions


def fit_principal_spectrum(C, T, mass=PROTON_MASS_AMU):
    """Principal spectrum of an end-to-end correlation matrix at temperature T."""
    if isinstance(C, CorrelationEstimate):
        est = C
        C = est.matrix
    else:
        est = None
    vals, vecs, degenerate = principal_decomposition(C)
    if vals[-1] <= 0:
        raise InvalidCorrelationError("correlation matrix is not positive definite")
    sigma2 = vals[::-1]
    dirs = vecs[:, ::-1].T
    omega = np.asarray(omega_from_sigma(sigma2, T, mass))
    return PrincipalSpectrum(sigma2=sigma2, omega=omega, directions=dirs, temperature=T, mass=mass,
                             degenerate=degenerate,
                             mean=est.mean if est is not None else np.zeros(3),
                             count=est.count if est is not None else 0)


def fit_samples(samples):
    """Per-proton spectra, keyed by proton id."""
    return {int(pid): fit_principal_spectrum(accumulate_correlation(samples, pid), samples.temperature,
                                             samples.mass)
            for pid in samples.protons}


def average_spectrum(spectra):
    """Average principal frequencies over protons; widths follow through the thermal map."""
    spectra = list(spectra)
    if not spectra:
        raise InsufficientDataError("no spectra to average")
    omega = np.mean([s.omega for s in spectra], axis=0)
    first = spectra[0]
    return PrincipalSpectrum.from_omega(omega, first.temperature, first.mass)


@dataclass
class SpectrumUncertainty:
    omega_mean: np.ndarray
    jackknife_protons: np.ndarray   # cm^-1, standard error of the proton average
    block_samples: dict            # proton id -> cm^-1 block standard error
    n_blocks: int


def spectrum_uncertainty(samples, n_blocks=10):
    """Jackknife-over-protons and block-over-samples standard errors of omega_k."""
    spectra = fit_samples(samples)
    ids = sorted(spectra)
    om = np.array([spectra[i].omega for i in ids])
    n = len(ids)
    if n > 1:
        loo = np.array([(om.sum(axis=0) - om[j]) / (n - 1) for j in range(n)])
        jk = np.sqrt((n - 1) / n * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    else:
        jk = np.full(3, np.nan)
    blocks = {}
    for pid in ids:
        x = samples.for_proton(pid)
        size = x.shape[0] // n_blocks
        if size < 2:
            blocks[pid] = np.full(3, np.nan)
            continue
        per = []
        for b in range(n_blocks):
            blk = x[b * size:(b + 1) * size]
            C = blk.T @ blk / blk.shape[0]
            try:
                per.append(fit_principal_spectrum(C, samples.temperature, samples.mass).omega)
            except (InvalidCorrelationError, ArithmeticError):
                continue
        per = np.array(per)
        blocks[pid] = per.std(axis=0, ddof=1) / np.sqrt(len(per)) if len(per) > 1 else np.full(3, np.nan)
    return SpectrumUncertainty(omega_mean=om.mean(axis=0), jackknife_protons=jk, block_samples=blocks,
                               n_blocks=n_blocks)


@dataclass
class AxisGaussianity:
    sigma: float
    probabilities: np.ndarray
    empirical: np.ndarray
    gaussian: np.ndarray
    max_abs_dquantile: float
    ks_statistic: float
    ks_pvalue: float
    skewness: float
    excess_kurtosis: float
    n_modes: int
    multimodal: bool


def _count_modes(z, bins=81, smooth=1.5, prominence=0.05):
    lim = max(4.0, np.abs(z).max())
    hist, _ = np.histogram(z, bins=bins, range=(-lim, lim), density=True)
    hist = ndimage.gaussian_filter1d(hist.astype(float), smooth, mode="constant")
    peaks, _ = signal.find_peaks(np.concatenate([[0.0], hist, [0.0]]), prominence=prominence * hist.max())
    return len(peaks)


def gaussianity_report(samples, spectrum, proton_id=None, probabilities=None):
    """Per principal axis: quantiles of projected samples versus N(0, sigma_k^2)."""
    x = samples.x if proton_id is None else samples.for_proton(proton_id)
    if x.shape[0] < 1000:
        warnings.warn(f"gaussianity report on {x.shape[0]} samples (< 1000)", stacklevel=2)
    if probabilities is None:
        probabilities = np.array([0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999])
    out = []
    for k in range(3):
        proj = x @ spectrum.directions[k]
        sig = float(np.sqrt(spectrum.sigma2[k]))
        emp = np.quantile(proj, probabilities)
        gau = stats.norm.ppf(probabilities, scale=sig)
        ks = stats.kstest(proj / sig, "norm")
        z = proj / sig
        m2 = np.mean(z**2)
        skew = float(np.mean(z**3) / m2**1.5)
        kurt = float(np.mean(z**4) / m2**2 - 3.0)
        nm = _count_modes(z / np.sqrt(m2))
        out.append(AxisGaussianity(sigma=sig, probabilities=probabilities, empirical=emp, gaussian=gau,
                                   max_abs_dquantile=float(np.abs(emp - gau).max()),
                                   ks_statistic=float(ks.statistic), ks_pvalue=float(ks.pvalue),
                                   skewness=skew, excess_kurtosis=kurt, n_modes=nm, multimodal=nm > 1))
    return out


@dataclass
class RadialCurve:
    grid: np.ndarray
    values: np.ndarray
    kind: str
    order: int = 0

    @property
    def normalization(self):
        return float(integrate.simpson(self.grid**2 * self.values, x=self.grid))

    @property
    def second_moment(self):
        return float(integrate.simpson(self.grid**4 * self.values, x=self.grid))


DEFAULT_RADIAL_GRID = np.linspace(0.0, 1.2, 600)


def spherical_density(sigma2, x, tol=1e-8):
    """Spherically averaged end-to-end density at radii ``x`` for widths ``sigma2``."""
    vals, _ = spherical_gaussian_average(x, sigma2, tol=tol)
    return vals


def spherical_end_to_end(spectrum, grid=None, tol=1e-8):
    grid = DEFAULT_RADIAL_GRID if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid < 0):
        raise UsageError("radial grid must be non-negative")
    vals, order = spherical_gaussian_average(grid, spectrum.sigma2, tol=tol)
    return RadialCurve(grid=grid, values=vals, kind="end-to-end", order=order)


def momentum_distribution(spectrum, grid=None, tol=1e-8):
    """Spherically averaged momentum density in k = p/hbar (A^-1).

    Normalised as ``Int k^2 n(k) dk = 1``; per-axis momentum variances are
    1/sigma_k^2.
    """
    kvar = 1.0 / np.asarray(spectrum.sigma2)
    if grid is None:
        grid = np.linspace(0.0, 8.0 * np.sqrt(kvar.max()), 600)
    grid = np.asarray(grid, dtype=float)
    vals, order = spherical_gaussian_average(grid, kvar, tol=tol)
    return RadialCurve(grid=grid, values=vals, kind="momentum", order=order)


def directional_momentum(spectrum, k):
    """3D momentum density nu(k) (A^3), a Gaussian with covariance sum_k v v^T / sigma_k^2."""
    k = np.asarray(k, dtype=float)
    kp = k @ spectrum.directions.T
    q = np.sum(kp**2 * spectrum.sigma2, axis=-1)
    norm = np.sqrt(np.prod(spectrum.sigma2) / (2 * np.pi) ** 3)
    return norm * np.exp(-0.5 * q)


def directional_end_to_end(spectrum, x):
    """3D end-to-end probability density (A^-3)."""
    x = np.asarray(x, dtype=float)
    xp = x @ spectrum.directions.T
    q = np.sum(xp**2 / spectrum.sigma2, axis=-1)
    return np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** 3 * np.prod(spectrum.sigma2))


def kinetic_energy(spectrum, check=True):
    """Proton kinetic energy in meV; both the frequency and width forms are evaluated."""
    ek_w = kinetic_energy_from_omega(spectrum.omega, spectrum.temperature)
    if check:
        ek_s = kinetic_energy_from_sigma(spectrum.sigma2, spectrum.mass)
        if abs(ek_w - ek_s) > 1e-10 * abs(ek_w):
            raise InvalidCorrelationError(
                f"inconsistent spectrum: E_K from omega {ek_w:.12g} vs sigma {ek_s:.12g} meV")
    return ek_w

