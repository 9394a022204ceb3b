"""Exact 1D thermal reference from a finite-difference eigensolve.

The Hamiltonian -(hbar^2/2M) d^2/dx^2 + V(x) is discretised with an
eighth-order central stencil on a uniform grid; the lowest states are
obtained by shift-invert Lanczos. From them the end-to-end
distribution (the off-diagonal density matrix integrated along the
diagonal), the momentum density and the kinetic energy follow directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal, sparse
from scipy.sparse import linalg as sparse_linalg

from ..core import PROTON_MASS_AMU, UNITS
from ..errors import AccuracyError, UnconfinedError, UsageError
from ..quasiharmonic import omega_from_sigma

# eighth-order central second derivative
_STENCIL = np.array([-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0])
_WEIGHT_CUTOFF = 1e-16


@dataclass
class Oracle1DResult:
    lags: np.ndarray            # end-to-end displacement grid, A
    pdf: np.ndarray             # end-to-end probability density, A^-1
    ntilde: np.ndarray          # same curve normalised to 1 at zero displacement
    k: np.ndarray               # wavevector grid p/hbar, A^-1
    momentum: np.ndarray        # momentum density in k, A
    kinetic_energy: float       # meV
    energies: np.ndarray        # meV
    weights: np.ndarray         # Boltzmann weights of the retained states
    positions: np.ndarray       # position grid, A
    density: np.ndarray         # diagonal density rho(x, x), A^-1
    midpoint: np.ndarray        # density of the chain midpoint of the open path, A^-1
    temperature: float
    mass: float
    n_points: int
    extent: float
    _cdf: np.ndarray = field(default=None, repr=False)

    @property
    def variance(self):
        """End-to-end variance, A^2."""
        return float(integrate.trapezoid(self.lags**2 * self.pdf, self.lags))

    @property
    def momentum_variance(self):
        return float(integrate.trapezoid(self.k**2 * self.momentum, self.k))

    def cdf(self, x):
        if self._cdf is None:
            self._cdf = integrate.cumulative_trapezoid(self.pdf, self.lags, initial=0.0)
            self._cdf /= self._cdf[-1]
        return np.interp(x, self.lags, self._cdf, left=0.0, right=1.0)

    def sample(self, n, seed=0):
        """Draw end-to-end displacements by inverse-CDF sampling."""
        self.cdf(0.0)
        u = np.random.default_rng(seed).random(n)
        return np.interp(u, self._cdf, self.lags)

    def position_cdf(self, x, which="midpoint"):
        dens = self.midpoint if which == "midpoint" else self.density
        c = integrate.cumulative_trapezoid(dens, self.positions, initial=0.0)
        return np.interp(x, self.positions, c / c[-1], left=0.0, right=1.0)


def _kinetic_band(n, h, lam):
    band = np.zeros((len(_STENCIL), n))
    for d, c in enumerate(_STENCIL):
        band[d, :n - d] = -lam * c / h**2
    return band


def _solve(V, T, mass, extent, n_points, max_states):
    if n_points < 2048:
        raise UsageError("oracle grid needs at least 2048 points")
    x = np.linspace(-extent, extent, n_points)
    h = x[1] - x[0]
    lam = UNITS.hbar2_over_2m(mass)
    pot = np.asarray(V(x), dtype=float)
    if not np.all(np.isfinite(pot)):
        raise UnconfinedError("potential not finite on the grid")
    band = _kinetic_band(n_points, h, lam)
    band[0] += pot
    offs = np.arange(len(_STENCIL))
    H = sparse.diags([band[d, :n_points - d] for d in offs] + [band[d, :n_points - d] for d in offs[1:]],
                     list(offs) + list(-offs[1:]), format="csc")
    beta = 1.0 / (UNITS.kB * T)
    nstates = min(16, n_points - 2)
    shift = pot.min() - 1.0
    while True:
        # shift-invert below the spectrum returns the lowest states
        E, psi = sparse_linalg.eigsh(H, k=nstates, sigma=shift, which="LM", tol=0)
        order = np.argsort(E)
        E, psi = E[order], psi[:, order]
        w = np.exp(-beta * (E - E[0]))
        if w[-1] < _WEIGHT_CUTOFF or nstates >= min(max_states, n_points - 2):
            break
        nstates = min(2 * nstates, max_states, n_points - 2)
    if w[-1] >= _WEIGHT_CUTOFF:
        raise AccuracyError(f"thermal weight {w[-1]:.2e} left in state {nstates}", achieved=w[-1])
    keep = w >= _WEIGHT_CUTOFF
    E, psi, w = E[keep], psi[:, keep], w[keep]
    psi = psi / np.sqrt(h)          # grid normalisation h sum psi^2 = 1
    w = w / w.sum()
    edge = np.abs(psi[[0, -1], :]).max() / np.abs(psi).max()
    return x, h, pot, E, psi, w, lam, edge


def _kinetic_expectation(psi, h, lam):
    n = psi.shape[0]
    band = _kinetic_band(n, h, lam)
    out = band[0][:, None] * psi
    for d in range(1, band.shape[0]):
        out[:-d] += band[d, :n - d][:, None] * psi[d:]
        out[d:] += band[d, :n - d][:, None] * psi[:-d]
    return h * np.sum(psi * out, axis=0)


def _auto_extent(V, T, mass):
    # widen until the potential rises 60 k_B T plus a generous zero-point margin above its minimum
    kT = UNITS.kB * T
    lam = UNITS.hbar2_over_2m(mass)
    s = np.linspace(-5.0, 5.0, 20001)
    v = np.asarray(V(s), dtype=float)
    vmin = v.min()
    if v[0] - vmin < 1.0 or v[-1] - vmin < 1.0:
        raise UnconfinedError("potential does not rise away from its minimum within 5 A")
    # effective curvature at the minimum sets the ground-state width
    i = int(np.argmin(v))
    d = s[1] - s[0]
    curv = max((v[min(i + 1, s.size - 1)] - 2 * v[i] + v[max(i - 1, 0)]) / d**2, 1e-6)
    hw = np.sqrt(2.0 * lam * curv)
    ecut = vmin + max(60.0 * kT, 30.0 * hw)
    inside = s[v <= ecut]
    span = max(abs(inside[0]), abs(inside[-1]))
    width = (lam / max(np.sqrt(curv * lam), 1e-9)) ** 0.5
    return float(span + 8.0 * width)


def oracle_1d(V, T, mass=PROTON_MASS_AMU, extent=None, n_points=4097, max_states=512, check=True):
    """Exact end-to-end and momentum distributions of a 1D potential ``V(x)`` (meV, A).

    ``V`` is a callable or a model potential (its first local axis is used).
    With ``check`` the calculation is repeated on a grid with (about) twice
    the points and the kinetic energy and end-to-end variance must agree to
    1e-8 relative.
    """
    if not T > 0:
        raise UsageError("temperature must be positive")
    if hasattr(V, "axis_energy"):
        if not getattr(V, "confining", True):
            raise UnconfinedError("oracle needs a confining potential")
        mass = getattr(V, "mass", mass)
        V = V.axis_energy
    if extent is None:
        extent = _auto_extent(V, T, mass)
    x, h, pot, E, psi, w, lam, edge = _solve(V, T, mass, extent, n_points, max_states)
    if edge > 1e-8:
        raise AccuracyError(f"eigenfunctions not decayed at the grid edge ({edge:.1e}); increase extent",
                            achieved=edge)

    # n~(m h) = sum_n w_n h sum_j psi_n[j] psi_n[j+m]
    nt = np.zeros(2 * n_points - 1)
    for j in range(psi.shape[1]):
        nt += w[j] * h * signal.fftconvolve(psi[:, j], psi[::-1, j], mode="full")
    lags = h * np.arange(-(n_points - 1), n_points)
    nt = 0.5 * (nt + nt[::-1])
    ntilde = nt / nt[n_points - 1]
    pdf = nt / integrate.trapezoid(nt, lags)

    # momentum density from the Fourier transforms of the eigenfunctions
    nfft = 4 * n_points
    ks = 2.0 * np.pi * np.fft.fftfreq(nfft, d=h)
    order = np.argsort(ks)
    mom = np.zeros(nfft)
    for j in range(psi.shape[1]):
        ft = np.fft.fft(psi[:, j], n=nfft) * h / np.sqrt(2.0 * np.pi)
        mom += w[j] * np.abs(ft) ** 2
    k, mom = ks[order], mom[order]

    ek = float(np.sum(w * _kinetic_expectation(psi, h, lam)))

    density = (psi**2) @ w
    beta = 1.0 / (UNITS.kB * T)
    overlap = h * psi.sum(axis=0)
    g = psi @ (np.exp(-0.5 * beta * (E - E[0])) * overlap)
    mid = g**2
    mid /= integrate.trapezoid(mid, x)

    res = Oracle1DResult(lags=lags, pdf=pdf, ntilde=ntilde, k=k, momentum=mom, kinetic_energy=ek,
                         energies=E, weights=w, positions=x, density=density, midpoint=mid,
                         temperature=T, mass=mass, n_points=n_points, extent=extent)
    if check:
        fine = oracle_1d(V, T, mass, extent=extent, n_points=2 * n_points - 1, max_states=max_states,
                         check=False)
        d_ek = abs(fine.kinetic_energy - ek) / ek
        d_var = abs(fine.variance - res.variance) / res.variance
        if max(d_ek, d_var) > 1e-8:
            raise AccuracyError(f"oracle not converged: dE_K {d_ek:.1e}, dvar {d_var:.1e}",
                                achieved=max(d_ek, d_var))
    return res


def effective_omega(result):
    """Harmonic frequency (cm^-1) with the same end-to-end variance."""
    return omega_from_sigma(result.variance, result.temperature, result.mass)
