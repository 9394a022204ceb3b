"""Harmonic lattice dynamics at the Gamma point of a supercell.

Hessians are in meV/A^2, masses in amu and frequencies in cm^-1. Negative
frequencies denote imaginary modes.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import UNITS, meV_to_cm1
from .errors import DataError, NoBoundStateError, OpenPathError, UsageError
from .estimator import PrincipalSpectrum, fit_principal_spectrum
from .quasiharmonic import momentum_variance, omega_from_sigma

IMAGINARY_THRESHOLD_CM1 = 5.0


@dataclass
class AtomicSystem:
    positions: np.ndarray
    masses: np.ndarray
    species: list = field(default_factory=list)
    protons: list = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.masses = np.asarray(self.masses, dtype=float).ravel()
        if len(self.positions) < 1 or len(self.masses) != len(self.positions):
            raise DataError("need one mass per atom and at least one atom")
        if np.any(self.masses <= 0):
            raise DataError("masses must be positive")
        if not self.species:
            self.species = ["X"] * len(self.masses)

    @property
    def n_atoms(self):
        return len(self.masses)


@dataclass
class HessianResult:
    matrix: np.ndarray
    asymmetry_norm: float
    max_force: float
    step: float


def build_hessian_fd(potential, system, step=0.0053, threads=1):
    """Central-difference Hessian from forces, H_ij = -dF_i/dx_j.

    ``potential(positions) -> (energy, forces)`` with positions (N, 3) in A.
    """
    if not step > 0:
        raise UsageError("finite-difference step must be positive")
    x0 = system.positions
    n = x0.size
    try:
        _, f0 = potential(x0.copy())
    except Exception as exc:
        raise OpenPathError(f"potential callback failed: {exc}") from exc
    max_force = float(np.abs(np.asarray(f0)).max())

    def column(j):
        xp = x0.copy().ravel()
        xm = xp.copy()
        xp[j] += step
        xm[j] -= step
        _, fp = potential(xp.reshape(x0.shape))
        _, fm = potential(xm.reshape(x0.shape))
        return -(np.asarray(fp).ravel() - np.asarray(fm).ravel()) / (2.0 * step)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            cols = list(ex.map(column, range(n)))
    else:
        cols = [column(j) for j in range(n)]
    H = np.array(cols).T
    norm = np.linalg.norm(H)
    asym = float(np.linalg.norm(H - H.T) / norm) if norm > 0 else 0.0
    return HessianResult(matrix=0.5 * (H + H.T), asymmetry_norm=asym, max_force=max_force, step=step)


@dataclass
class PhononSpectrum:
    frequencies: np.ndarray          # cm^-1 ascending, vibrational modes
    eigenvectors: np.ndarray         # (3N, n_modes), mass-weighted, orthonormal columns
    masses: np.ndarray
    acoustic: np.ndarray             # (3N, 3) normalised mass-weighted translations, or (3N, 0)
    unstable: np.ndarray             # indices of imaginary modes
    asymmetry_norm: float = 0.0

    @property
    def n_atoms(self):
        return len(self.masses)

    def full_basis(self):
        """Acoustic vectors followed by vibrational eigenvectors: a complete basis."""
        return np.hstack([self.acoustic, self.eigenvectors])

    def participation(self):
        """Participation ratio of each mode, 1/(N sum_i |e_i|^4)."""
        e2 = (self.eigenvectors**2).reshape(self.n_atoms, 3, -1).sum(axis=1)
        return 1.0 / (self.n_atoms * (e2**2).sum(axis=0))


def _eig_to_cm1(lam):
    # lam in meV/(A^2 amu); (hbar omega)^2 = 2 (hbar^2 / 2 amu) lam
    e = np.sqrt(2.0 * UNITS.hbar2_over_2amu * np.abs(lam))
    return np.sign(lam) * meV_to_cm1(e)


def _fix_columns(vecs):
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-10)
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return vecs


def translation_vectors(masses):
    masses = np.asarray(masses, dtype=float)
    n = len(masses)
    T = np.zeros((3 * n, 3))
    sq = np.sqrt(masses)
    for a in range(3):
        T[a::3, a] = sq
    return T / np.linalg.norm(T, axis=0)


def dynamical_spectrum(hessian, masses, remove_translations=True, asymmetry_norm=None):
    """Eigenmodes of D = M^-1/2 H M^-1/2.

    With ``remove_translations`` the three uniform translations are split off
    exactly and D is diagonalised on their orthogonal complement, leaving
    3N - 3 vibrational modes.
    """
    H = hessian.matrix if isinstance(hessian, HessianResult) else np.asarray(hessian, dtype=float)
    if asymmetry_norm is None:
        asymmetry_norm = hessian.asymmetry_norm if isinstance(hessian, HessianResult) else 0.0
    masses = np.asarray(masses, dtype=float)
    n3 = 3 * len(masses)
    if H.shape != (n3, n3):
        raise DataError(f"Hessian shape {H.shape} does not match {len(masses)} atoms")
    if np.abs(H - H.T).max() > 1e-8 * max(np.abs(H).max(), 1e-300):
        raise DataError("Hessian is not symmetric")
    minv = 1.0 / np.sqrt(np.repeat(masses, 3))
    D = 0.5 * (H + H.T) * np.outer(minv, minv)
    if remove_translations:
        if len(masses) < 2:
            raise UsageError("translation removal needs at least two atoms")
        T = translation_vectors(masses)
        # orthonormal complement of the translations
        Q, _ = np.linalg.qr(np.hstack([T, np.eye(n3)]))
        Q = Q[:, 3:n3]
        Q = Q - T @ (T.T @ Q)
        Q, _ = np.linalg.qr(Q)
        lam, W = np.linalg.eigh(Q.T @ D @ Q)
        vecs = Q @ W
        acoustic = T
    else:
        lam, vecs = np.linalg.eigh(D)
        acoustic = np.zeros((n3, 0))
    vecs = _fix_columns(vecs)
    freq = _eig_to_cm1(lam)
    unstable = np.flatnonzero(freq < -IMAGINARY_THRESHOLD_CM1)
    if unstable.size:
        warnings.warn(f"{unstable.size} imaginary mode(s) below -{IMAGINARY_THRESHOLD_CM1} cm^-1", stacklevel=2)
    return PhononSpectrum(frequencies=freq, eigenvectors=vecs, masses=masses, acoustic=acoustic,
                          unstable=unstable, asymmetry_norm=float(asymmetry_norm))


def dos(spectrum, smearing=20.0, grid=None, npoints=2000):
    """Gaussian-broadened density of states; integrates to the mode count."""
    freq = spectrum.frequencies if isinstance(spectrum, PhononSpectrum) else np.asarray(spectrum, dtype=float)
    if freq.size == 0:
        raise UsageError("no modes")
    if grid is None:
        grid = np.linspace(freq.min() - 8 * smearing, freq.max() + 8 * smearing, npoints)
    grid = np.asarray(grid, dtype=float)
    g = np.exp(-0.5 * ((grid[:, None] - freq[None, :]) / smearing) ** 2).sum(axis=1)
    return grid, g / (smearing * np.sqrt(2 * np.pi))


@dataclass
class MomentumCorrelation:
    matrix: np.ndarray        # <k k^T> with k = p/hbar, A^-2
    kinetic_energy: float     # meV
    mass: float
    atom: int


def _mode_factor(freq, T, mass):
    # (M omega / 2 hbar) coth(hbar omega / 2 k_B T) in A^-2; imaginary modes treated by |omega|
    return np.asarray(momentum_variance(np.abs(freq), T, mass))


def momentum_correlation(spectrum, atom, T):
    """Momentum correlation of one atom from its harmonic modes (translations excluded)."""
    if not T > 0:
        raise UsageError("temperature must be positive")
    m = float(spectrum.masses[atom])
    e = spectrum.eigenvectors[3 * atom:3 * atom + 3, :]
    C = (e * _mode_factor(spectrum.frequencies, T, m)) @ e.T
    C = 0.5 * (C + C.T)
    return MomentumCorrelation(matrix=C, kinetic_energy=float(UNITS.hbar2_over_2m(m) * np.trace(C)),
                               mass=m, atom=int(atom))


@dataclass
class PhononPrincipal:
    spectra: list              # PrincipalSpectrum per tagged atom
    omega_mean: np.ndarray
    omega_std: np.ndarray
    kinetic_mean: float
    kinetic_std: float


def principal_from_momentum(corr, T):
    """Principal spectrum of one atom from its momentum correlation."""
    vals, vecs = np.linalg.eigh(corr.matrix)
    floor = 1.0 / (2.0 * UNITS.hbar2_over_2m(corr.mass) / (UNITS.kB * T))
    if np.any(vals <= floor * (1.0 + 1e-14)):
        raise NoBoundStateError(f"atom {corr.atom}: momentum variance at or below the classical floor")
    Cx = (vecs / vals) @ vecs.T
    return fit_principal_spectrum(0.5 * (Cx + Cx.T), T, corr.mass)


def phonon_principal_frequencies(correlations, T):
    spectra = [principal_from_momentum(c, T) for c in correlations]
    om = np.array([s.omega for s in spectra])
    ek = np.array([c.kinetic_energy for c in correlations])
    ddof = 1 if len(spectra) > 1 else 0
    return PhononPrincipal(spectra=spectra, omega_mean=om.mean(axis=0), omega_std=om.std(axis=0, ddof=ddof),
                           kinetic_mean=float(ek.mean()), kinetic_std=float(ek.std(ddof=ddof)))


@dataclass
class PopulationTable:
    frequencies: np.ndarray   # vibrational modes, cm^-1
    h: np.ndarray             # (n_modes, 3)
    acoustic: np.ndarray      # (3,) weight carried by the translations
    n_protons: int

    @property
    def completeness(self):
        return self.h.sum(axis=0) + self.acoustic


def population(spectrum, directions, atoms):
    """Weight of each mode along each principal direction, averaged over atoms.

    ``directions[i]`` holds the rows v_1, v_2, v_3 of atom ``atoms[i]``.
    """
    directions = np.asarray(directions, dtype=float).reshape(-1, 3, 3)
    atoms = list(atoms)
    if len(atoms) != len(directions):
        raise UsageError("one direction triad per tagged atom required")
    h = np.zeros((spectrum.eigenvectors.shape[1], 3))
    ac = np.zeros(3)
    for V, i in zip(directions, atoms):
        e = spectrum.eigenvectors[3 * i:3 * i + 3, :]
        h += (V @ e).T ** 2
        if spectrum.acoustic.shape[1]:
            ac += ((V @ spectrum.acoustic[3 * i:3 * i + 3, :]) ** 2).sum(axis=1)
    n = len(atoms)
    return PopulationTable(frequencies=spectrum.frequencies.copy(), h=h / n, acoustic=ac / n, n_protons=n)


@dataclass
class BandPartition:
    edges: tuple = (400.0, 1050.0, 2400.0)
    labels: tuple = ("network", "libration", "bending", "stretching")

    def __post_init__(self):
        self.edges = tuple(float(e) for e in self.edges)
        if len(self.labels) != len(self.edges) + 1:
            raise UsageError("need one more label than edges")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])) or (self.edges and self.edges[0] <= 0):
            raise UsageError("band edges must be positive and strictly increasing")

    def assign(self, freq):
        """Band index of each frequency; imaginary modes go to the lowest band."""
        return np.searchsorted(np.asarray(self.edges), np.asarray(freq, dtype=float), side="right")

    @classmethod
    def parse(cls, text):
        return cls(edges=tuple(float(v) for v in text.split(",")))


@dataclass
class BandAnalysis:
    weights: dict               # band label -> (3,)
    acoustic: np.ndarray
    weighted_mean: np.ndarray   # cm^-1, h-weighted mean over non-network modes
    restricted_sum: np.ndarray  # cm^-1, thermal map inverted on non-network modes


def band_analysis(table, bands=None, T=None, mass=None, excluded=("network",)):
    """Band weights and band-restricted effective frequencies per direction.

    ``restricted_sum`` renormalises the population over the retained modes
    before inverting the thermal map, so dropping soft modes raises it.
    """
    bands = bands or BandPartition()
    idx = bands.assign(table.frequencies)
    weights = {lab: table.h[idx == b].sum(axis=0) for b, lab in enumerate(bands.labels)}
    keep = ~np.isin(idx, [bands.labels.index(lab) for lab in excluded if lab in bands.labels])
    keep &= table.frequencies > 0
    hk = table.h[keep]
    fk = table.frequencies[keep]
    wsum = hk.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        wmean = np.where(wsum > 0, (hk * fk[:, None]).sum(axis=0) / wsum, np.nan)
    rsum = np.full(3, np.nan)
    if T is not None and mass is not None:
        fac = momentum_variance(fk, T, mass)
        for l in range(3):
            if wsum[l] > 0:
                lam = (hk[:, l] * fac).sum() / wsum[l]
                rsum[l] = omega_from_sigma(1.0 / lam, T, mass)
    return BandAnalysis(weights=weights, acoustic=table.acoustic.copy(), weighted_mean=wmean, restricted_sum=rsum)


# model potentials with analytic forces, for tests and examples

class VectorSprings:
    """V = sum_(i,j) k/2 |r_j - r_i - d_ij|^2 (isotropic springs)."""

    def __init__(self, pairs, k, rest):
        self.pairs = [tuple(p) for p in pairs]
        self.k = np.broadcast_to(np.asarray(k, dtype=float), (len(self.pairs),))
        self.rest = np.asarray(rest, dtype=float).reshape(len(self.pairs), 3)

    def __call__(self, pos):
        pos = np.asarray(pos, dtype=float)
        F = np.zeros_like(pos)
        E = 0.0
        for (i, j), k, d in zip(self.pairs, self.k, self.rest):
            u = pos[j] - pos[i] - d
            E += 0.5 * k * u @ u
            F[i] += k * u
            F[j] -= k * u
        return E, F


class BondSprings:
    """Central springs V = sum k/2 (|r_j - r_i| - r0)^2 plus optional quartic term."""

    def __init__(self, pairs, k, r0, quartic=0.0):
        self.pairs = [tuple(p) for p in pairs]
        n = len(self.pairs)
        self.k = np.broadcast_to(np.asarray(k, dtype=float), (n,))
        self.r0 = np.broadcast_to(np.asarray(r0, dtype=float), (n,))
        self.quartic = np.broadcast_to(np.asarray(quartic, dtype=float), (n,))

    def __call__(self, pos):
        pos = np.asarray(pos, dtype=float)
        F = np.zeros_like(pos)
        E = 0.0
        for (i, j), k, r0, q in zip(self.pairs, self.k, self.r0, self.quartic):
            d = pos[j] - pos[i]
            r = np.linalg.norm(d)
            u = r - r0
            E += 0.5 * k * u**2 + q * u**4
            dE = k * u + 4.0 * q * u**3
            g = dE * d / r
            F[i] += g
            F[j] -= g
        return E, F


class Tether:
    """Each atom bound to its reference site by an isotropic spring."""

    def __init__(self, ref, k):
        self.ref = np.asarray(ref, dtype=float).reshape(-1, 3)
        self.k = float(k)

    def __call__(self, pos):
        u = np.asarray(pos, dtype=float) - self.ref
        return 0.5 * self.k * float((u**2).sum()), -self.k * u


def periodic_chain(n, k, mass, spacing=1.0):
    """Harmonic ring of ``n`` atoms with isotropic nearest-neighbour springs."""
    pos = np.zeros((n, 3))
    pos[:, 0] = spacing * np.arange(n)
    pairs = [(i, (i + 1) % n) for i in range(n)]
    rest = np.array([pos[j] - pos[i] for i, j in pairs])
    return AtomicSystem(pos, np.full(n, float(mass))), VectorSprings(pairs, k, rest)


def chain_dispersion(n, k, mass):
    """Analytic ring frequencies 2 sqrt(k/m) |sin(pi j / n)| in cm^-1, each triply degenerate."""
    j = np.arange(n)
    lam = 4.0 * k / mass * np.sin(np.pi * j / n) ** 2
    return _eig_to_cm1(lam)


def read_hessian(path):
    """Text Hessian: ``N``; a line of N masses (amu); 3N rows of 3N floats (meV/A^2)."""
    with open(path) as fh:
        rows = [ln.split("#", 1)[0].split() for ln in fh]
    rows = [r for r in rows if r]
    try:
        n = int(rows[0][0])
        masses = np.array([float(v) for v in rows[1]])
        H = np.array([[float(v) for v in r] for r in rows[2:]])
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed Hessian file ({exc})") from exc
    if masses.size != n or H.shape != (3 * n, 3 * n):
        raise DataError(f"{path}: expected {n} masses and a {3 * n}x{3 * n} matrix")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(masses))):
        raise DataError(f"{path}: non-finite values")
    return H, masses


def write_hessian(path, H, masses):
    H = np.asarray(H, dtype=float)
    masses = np.asarray(masses, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{len(masses)}\n")
        fh.write(" ".join(f"{m:.10g}" for m in masses) + "\n")
        for row in H:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def harmonic_principal_spectrum(spectrum, atom, T) -> PrincipalSpectrum:
    return principal_from_momentum(momentum_correlation(spectrum, atom, T), T)
