"""Fit a 1D polynomial effective potential c2 s^2 + c3 s^3 + c4 s^4 to end-to-end samples.

The model distribution comes from the grid oracle. The end-to-end law of any
1D potential is symmetric in x, so it fixes c3 only up to sign; passing the
chain-midpoint positions as well pins down the asymmetry.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from ..core import PROTON_MASS_AMU
from ..errors import AccuracyError, InsufficientDataError, NoBoundStateError, UnconfinedError, UsageError
from ..quasiharmonic import force_constant, free_particle_sigma2, omega_from_sigma
from .oracle import _auto_extent, oracle_1d
from .potentials import Polynomial1D

PARAMS = ("c2", "c3", "c4")
DEFAULT_PROBS = np.linspace(0.02, 0.98, 49)
MIN_SAMPLES = 100_000


@dataclass
class PotentialFit:
    coefficients: dict          # c2 meV/A^2, c3 meV/A^3, c4 meV/A^4
    uncertainties: dict         # bootstrap standard deviations (0 for fixed parameters)
    free: tuple
    ks_distance: float          # end-to-end KS distance between samples and the fitted model
    residual_rms: float
    converged: bool
    effective_omega: float      # cm^-1, harmonic frequency with the fitted model's end-to-end variance
    n_samples: int
    used_positions: bool
    bootstrap: np.ndarray = field(default=None, repr=False)
    notes: list = field(default_factory=list)

    def potential(self, mass=PROTON_MASS_AMU):
        c = self.coefficients
        return Polynomial1D(c["c2"], c["c3"], c["c4"], mass=mass)

    def summary(self):
        return {
            "coefficients": {k: float(v) for k, v in self.coefficients.items()},
            "uncertainties": {k: float(v) for k, v in self.uncertainties.items()},
            "units": {"c2": "meV/A^2", "c3": "meV/A^3", "c4": "meV/A^4", "effective_omega": "cm^-1"},
            "free": list(self.free),
            "ks_distance": float(self.ks_distance),
            "residual_rms": float(self.residual_rms),
            "converged": bool(self.converged),
            "effective_omega": float(self.effective_omega),
            "n_samples": int(self.n_samples),
            "used_positions": bool(self.used_positions),
            "notes": list(self.notes),
        }


def _quantiles_from_cdf(grid, cdf, probs):
    # strictly increasing support for interpolation
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(probs, cdf[keep], grid[keep])


class _Model:
    def __init__(self, T, mass, extent, n_points, probs, with_positions):
        self.T, self.mass, self.extent, self.n_points = T, mass, extent, n_points
        self.probs = probs
        self.with_positions = with_positions

    def quantiles(self, c):
        try:
            V = Polynomial1D(*c, mass=self.mass)
        except UnconfinedError:
            return None
        try:
            res = oracle_1d(V, self.T, self.mass, extent=self.extent, n_points=self.n_points, check=False)
        except (AccuracyError, UnconfinedError):
            return None
        res.cdf(0.0)
        q = [_quantiles_from_cdf(res.lags, res._cdf, self.probs)]
        if self.with_positions:
            q.append(_quantiles_from_cdf(res.positions, res.position_cdf(res.positions), self.probs))
        return np.concatenate(q), res


def _sample_quantiles(x, pos, probs):
    q = [np.quantile(x, probs)]
    if pos is not None:
        q.append(np.quantile(pos, probs))
    return np.concatenate(q)


def fit_effective_potential_1d(x, T, mass=PROTON_MASS_AMU, free=PARAMS, fixed=None, positions=None,
                               n_boot=20, seed=0, probs=DEFAULT_PROBS, n_points=2049, initial=None):
    """Least-squares match of sample and model quantiles over the free coefficients.

    ``x``: end-to-end displacements projected on the axis (A); ``positions``:
    optional chain-midpoint coordinates on the same axis. Fixed coefficients
    are taken from ``fixed`` (default 0). Uncertainties are bootstrap standard
    deviations from ``n_boot`` resamples, each refit from the best estimate.
    """
    x = np.asarray(x, dtype=float).ravel()
    pos = None if positions is None else np.asarray(positions, dtype=float).ravel()
    if not np.all(np.isfinite(x)) or (pos is not None and not np.all(np.isfinite(pos))):
        raise UsageError("non-finite samples")
    free = tuple(free)
    if not free or any(p not in PARAMS for p in free) or len(set(free)) != len(free):
        raise UsageError(f"free parameters must be a subset of {PARAMS}")
    notes = []
    n = x.size
    if n < 100:
        raise InsufficientDataError("far too few samples for a potential fit")
    if n < MIN_SAMPLES:
        msg = f"{n} samples; at least {MIN_SAMPLES} are recommended"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    if pos is None and "c3" in free:
        notes.append("no positions given: only |c3| is identifiable")

    # free-particle data (or anything as wide) cannot come from a confining potential
    var = float(np.mean(x**2))
    bound = free_particle_sigma2(T, mass)
    if var >= bound * (1.0 - 4.0 * np.sqrt(2.0 / n)):
        raise UnconfinedError(f"end-to-end variance {var:.4g} A^2 is consistent with a free particle "
                              f"({bound:.4g} A^2)")
    try:
        w0 = omega_from_sigma(var, T, mass)
    except NoBoundStateError:
        raise UnconfinedError("end-to-end variance at the free-particle bound") from None

    c_init = {"c2": 0.5 * force_constant(w0, mass), "c3": 0.0, "c4": 0.0}
    c_init.update(fixed or {})
    c_init.update(initial or {})
    c2s = abs(c_init["c2"])
    scale = {"c2": c2s, "c3": 10.0 * c2s, "c4": 100.0 * c2s}
    # c3 = 0 is a stationary point of the symmetric end-to-end law, so start off it
    # from a few cubic strengths (both signs when positions fix the orientation)
    c3_starts = [c_init["c3"]]
    if "c3" in free and c_init["c3"] == 0:
        c3_starts = [-c2s, -3.0 * c2s]
        if pos is not None:
            c3_starts += [c2s, 3.0 * c2s]
    starts = []
    for c3 in c3_starts:
        c = dict(c_init, c3=c3)
        if "c4" in free and c_init["c4"] <= 0:
            # single-welled (c4 > 9/32 c3^2/c2); a second well traps the least squares
            c["c4"] = max(0.01 * scale["c4"], 0.5 * c3**2 / c2s)
        starts.append(c)
    c_init = starts[0]

    fixed_c = {k: float(c_init[k]) for k in PARAMS}
    extent = _auto_extent(Polynomial1D(fixed_c["c2"] if fixed_c["c2"] > 0 else c2s, 0.0,
                                       max(fixed_c["c4"], 0.0), mass=mass).axis_energy, T, mass)
    extent *= 1.5
    probs = np.asarray(probs, dtype=float)
    model = _Model(T, mass, extent, n_points, probs, pos is not None)
    bad = 1e3

    def coeffs(theta):
        c = dict(fixed_c)
        for t, p in zip(theta, free):
            c[p] = t * scale[p]
        return [c[p] for p in PARAMS]

    def make_residual(target, spread):
        def resid(theta):
            out = model.quantiles(coeffs(theta))
            if out is None:
                return np.full(target.size, bad)
            return (out[0] - target) / spread
        return resid

    def solve(target, spread, theta0):
        sol = optimize.least_squares(make_residual(target, spread), theta0, x_scale=1.0,
                                     diff_step=1e-4, xtol=1e-10, ftol=1e-12, max_nfev=200)
        return sol

    target = _sample_quantiles(x, pos, probs)
    spread = np.concatenate([np.full(probs.size, x.std())] + ([np.full(probs.size, pos.std())] if pos is not None else []))
    sol = None
    for c in starts:
        trial = solve(target, spread, np.array([c[p] / scale[p] for p in free]))
        if sol is None or (trial.success and trial.cost < sol.cost) or not sol.success:
            sol = trial
    converged = bool(sol.success) and np.all(np.abs(sol.fun) < bad)
    if not converged:
        notes.append(f"least squares did not converge: {sol.message}")
    best = coeffs(sol.x)

    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(int(n_boot)):
        idx = rng.integers(0, n, n)
        tb = _sample_quantiles(x[idx], None if pos is None else pos[idx], probs)
        sb = solve(tb, spread, sol.x)
        boots.append([sb.x[i] * scale[p] for i, p in enumerate(free)])
    boots = np.array(boots).reshape(-1, len(free))
    unc = {p: 0.0 for p in PARAMS}
    if len(boots) > 1:
        for i, p in enumerate(free):
            unc[p] = float(np.std(boots[:, i], ddof=1))

    fitted = model.quantiles(best)
    if fitted is None:
        raise AccuracyError("best-fit model cannot be evaluated")
    res = fitted[1]
    ks = float(stats.kstest(x, res.cdf).statistic)
    return PotentialFit(
        coefficients=dict(zip(PARAMS, map(float, best))),
        uncertainties=unc,
        free=free,
        ks_distance=ks,
        residual_rms=float(np.sqrt(np.mean(sol.fun**2))),
        converged=converged,
        effective_omega=float(omega_from_sigma(res.variance, T, mass)),
        n_samples=n,
        used_positions=pos is not None,
        bootstrap=boots,
        notes=notes,
    )
