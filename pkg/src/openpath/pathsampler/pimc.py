"""Exact harmonic sampler and open-chain path-integral Monte Carlo.

The open chain has P imaginary-time slices of length tau = beta/P and P + 1
bead positions r_0 .. r_P. With lam = hbar^2/2M the primitive action is

    S = sum_s |r_{s+1} - r_s|^2 / (4 lam tau) + tau sum_s w_s V(r_s),

w_s = 1/2 at the two free ends and 1 elsewhere. The recorded quantity is
r_P - r_0. Chains are advanced in vectorised batches; each batch draws from
its own stream keyed by (seed, batch index), so results do not depend on
how many threads process the batches.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..core import PROTON_MASS_AMU, UNITS
from ..errors import TrotterWarning, SamplerTuningWarning, UnconfinedError, UsageError
from ..estimator import EndToEndSampleSet
from ..quasiharmonic import force_constant, sigma_from_omega
from .potentials import Free, ModelPotential

MOVE_SCHEMES = ("staging", "single-bead", "reference")
TROTTER_LIMIT = 0.5
SPAN_QUANTILES = (0.001, 0.01, 0.5, 0.99, 0.999)
_SPAN_EDGES = np.linspace(-1.5, 1.5, 6001)
_TUNE_EVERY = 20


def sample_harmonic_exact(omega, T, n, frame=None, mass=PROTON_MASS_AMU, seed=0, proton_id=0):
    """i.i.d. end-to-end vectors of a 3D harmonic oscillator.

    ``frame`` rows are the principal directions (identity by default).
    """
    omega = np.asarray(omega, dtype=float).reshape(3)
    if np.any(omega <= 0):
        raise UnconfinedError("harmonic frequencies must be positive")
    n = int(n)
    if n < 1:
        raise UsageError("need at least one draw")
    frame = np.eye(3) if frame is None else np.asarray(frame, dtype=float)
    sd = np.sqrt(sigma_from_omega(omega, T, mass))
    z = np.random.default_rng(seed).standard_normal((n, 3))
    return EndToEndSampleSet(np.full(n, proton_id), (z * sd) @ frame, T, mass, provenance="simulated")


@dataclass
class OpenChainConfig:
    beads: int = 64               # P: imaginary-time slices, P + 1 positions
    temperature: float = 269.0
    mass: float = PROTON_MASS_AMU
    moves: str = "staging"
    segment: int | None = None    # initial staging length in slices; tuned during burn-in
    steps: int = 1000             # recorded sweeps per chain, before thinning
    burn_in: int = 200
    thinning: int = 1
    seed: int = 0
    chains: int = 1024
    batch: int = 512              # chains advanced together; fixes the RNG streams
    reference: bool = True        # Gaussian whole-chain proposal when the potential offers one
    audit: int = 0                # proposals of chain 0 to log
    proton_id: int = 0

    def __post_init__(self):
        if int(self.beads) != self.beads or self.beads < 8:
            raise UsageError("beads must be an integer >= 8")
        self.beads = int(self.beads)
        if not self.temperature > 0:
            raise UsageError("temperature must be positive")
        if not self.mass > 0:
            raise UsageError("mass must be positive")
        if self.moves not in MOVE_SCHEMES:
            raise UsageError(f"moves must be one of {MOVE_SCHEMES}")
        if self.segment is not None and not 2 <= self.segment <= self.beads:
            raise UsageError("segment must lie in [2, beads]")
        for name in ("steps", "thinning", "chains", "batch"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        if self.moves == "reference" and not self.reference:
            raise UsageError("the reference scheme needs reference=True")
        if self.burn_in < 0 or self.audit < 0:
            raise UsageError("burn_in and audit must be non-negative")

    @property
    def tau(self):
        return 1.0 / (UNITS.kB * self.temperature * self.beads)

    @property
    def kept_per_chain(self):
        return self.steps // self.thinning

    @property
    def kept(self):
        return self.chains * self.kept_per_chain

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def endpoint_weights(P):
    w = np.ones(P + 1)
    w[0] = w[-1] = 0.5
    return w


def chain_action(R, potential, config):
    """Primitive action of chains ``R`` (..., P+1, dim) in local coordinates (dimensionless)."""
    R = np.asarray(R, dtype=float)
    lam = UNITS.hbar2_over_2m(config.mass)
    tau = config.tau
    kin = np.sum(np.diff(R, axis=-2) ** 2, axis=(-2, -1)) / (4.0 * lam * tau)
    pot = tau * np.sum(endpoint_weights(config.beads) * potential.energy(R), axis=-1)
    return kin + pot


def open_chain_precision(P, lam, tau, k):
    """Precision matrix of the open chain for V = k s^2 / 2 along one axis."""
    n = P + 1
    link = 1.0 / (2.0 * lam * tau)
    Q = np.zeros((n, n))
    i = np.arange(P)
    Q[i, i] += link
    Q[i + 1, i + 1] += link
    Q[i, i + 1] -= link
    Q[i + 1, i] -= link
    Q[np.diag_indices(n)] += tau * k * endpoint_weights(P)
    return Q


def discrete_harmonic_variance(omega, T, P, mass=PROTON_MASS_AMU):
    """Exact end-to-end variance (A^2) of the P-slice primitive open chain."""
    lam = UNITS.hbar2_over_2m(mass)
    tau = 1.0 / (UNITS.kB * T * P)
    Q = open_chain_precision(P, lam, tau, force_constant(omega, mass))
    e = np.zeros(P + 1)
    e[0], e[-1] = -1.0, 1.0
    return float(e @ linalg.cho_solve(linalg.cho_factor(Q), e))


@dataclass
class PIMCDiagnostics:
    acceptance: dict
    proposals: dict
    segment: list
    endpoint_segment: list
    tau_int: float              # integrated autocorrelation time of recorded x_1^2, in kept samples
    effective_samples: float
    span_quantiles: dict        # bead minus centroid along the first local axis, A
    centroid_rms: list          # rms bead-centroid distance per local axis, A
    trotter_parameter: float    # beta hbar omega_max / P
    warnings: list = field(default_factory=list)
    audit: list = field(default_factory=list, repr=False)

    def summary(self):
        return {
            "acceptance": {k: float(v) for k, v in sorted(self.acceptance.items())},
            "proposals": {k: int(v) for k, v in sorted(self.proposals.items())},
            "staging_segment": [int(s) for s in self.segment],
            "endpoint_segment": [int(s) for s in self.endpoint_segment],
            "tau_int_samples": float(self.tau_int),
            "effective_samples": float(self.effective_samples),
            "span_quantiles_A": {str(k): float(v) for k, v in self.span_quantiles.items()},
            "centroid_rms_A": [float(v) for v in self.centroid_rms],
            "trotter_parameter": float(self.trotter_parameter),
            "warnings": list(self.warnings),
        }


@dataclass
class PIMCResult:
    samples: EndToEndSampleSet   # lab frame
    local: np.ndarray            # end-to-end vectors in the potential's local frame
    midpoints: np.ndarray        # position of bead P//2, local frame
    diagnostics: PIMCDiagnostics
    config: OpenChainConfig


class _Batch:
    """A vectorised group of independent open chains."""

    def __init__(self, potential, config, index, size):
        self.pot = potential
        self.cfg = config
        self.index = index
        self.nw = size
        self.P = config.beads
        self.d = potential.dim
        self.lam = UNITS.hbar2_over_2m(config.mass)
        self.tau = config.tau
        self.w = endpoint_weights(self.P)
        self.link_sd = np.sqrt(2.0 * self.lam * self.tau)
        self.rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(index,)))
        self.R = np.zeros((size, self.P + 1, self.d))
        self.V = self.pot.energy(self.R)
        seg = config.segment or max(2, self.P // 8)
        self.seg = int(seg)
        self.end_seg = max(1, self.seg // 2)
        # free-particle thermal width as a starting step
        self.trans_step = 0.3 * np.sqrt(2.0 * self.lam / (UNITS.kB * config.temperature))
        self.bead_step = self.link_sd
        self.counts = {}
        self.audit = []
        self.audit_left = config.audit if index == 0 else 0
        self._setup_reference()
        if config.moves == "reference" and self.ref_k is None:
            raise UsageError(f"{potential.kind} potential offers no Gaussian reference")

    def _setup_reference(self):
        self.ref_k = None
        self._excess = None
        k = self.pot.reference_force_constants() if self.cfg.reference else None
        if k is None:
            return
        k = np.asarray(k, dtype=float).reshape(self.d)
        if np.any(k <= 0):
            return
        self.ref_k = k
        self.ref_gen = []
        for kd in k:
            U = linalg.cholesky(open_chain_precision(self.P, self.lam, self.tau, kd), lower=False)
            self.ref_gen.append(linalg.solve_triangular(U, np.eye(self.P + 1), lower=False))

    def _ref_energy(self, R):
        if self.d == 1:
            return 0.5 * self.ref_k[0] * R[..., 0] ** 2
        return 0.5 * np.sum(self.ref_k * R**2, axis=-1)

    # bookkeeping
    def _count(self, move, accepted, total):
        a, t = self.counts.get(move, (0, 0))
        self.counts[move] = (a + int(accepted), t + int(total))

    def _log(self, move, beads, new_beads, log_ratio, u, accepted):
        # walker 0; ``new_beads`` has the proposed positions of ``beads``
        if self.audit_left <= 0:
            return
        old = self.R[0].copy()
        new = old.copy()
        new[beads] = new_beads
        self.audit.append({"move": move, "beads": np.asarray(beads), "old": old, "new": new,
                           "log_ratio": float(log_ratio), "u": float(u), "accepted": bool(accepted)})
        self.audit_left -= 1

    def _accept(self, log_ratio):
        u = self.rng.random(log_ratio.shape)
        with np.errstate(over="ignore"):
            acc = np.log(u) < log_ratio
        return acc, u

    # moves
    def _regrow(self, move, beads, newpos, Vnew, groups):
        """Accept/reject proposals of several disjoint bead groups at once.

        ``beads`` (m, L) indices, ``newpos`` (nw, m, L, d), ``Vnew`` (nw, m, L);
        dS is the potential part only (free-particle springs are sampled exactly).
        """
        w = self.w[beads]
        dS = self.tau * np.sum(w * (Vnew - self.V[:, beads]), axis=-1)
        acc, u = self._accept(-dS)
        if self.audit_left > 0:
            for j in range(groups):
                self._log(move, beads[j], newpos[0, j], -dS[0, j], u[0, j], acc[0, j])
                if acc[0, j]:
                    self.R[0, beads[j]] = newpos[0, j]
                    self.V[0, beads[j]] = Vnew[0, j]
        ia = np.nonzero(acc)
        R_sel = self.R[:, beads]               # (nw, m, L, d) copy
        V_sel = self.V[:, beads]
        R_sel[ia] = newpos[ia]
        V_sel[ia] = Vnew[ia]
        self.R[:, beads] = R_sel
        self.V[:, beads] = V_sel
        self._count(move, acc.sum(), acc.size)

    def staging(self):
        P, l = self.P, self.seg
        o = int(self.rng.integers(0, l))
        anchors = np.arange(o, P + 1, l)
        m = len(anchors) - 1
        if m > 0 and l > 1:
            A = self.R[:, anchors[:-1]]
            B = self.R[:, anchors[1:]]
            W = np.cumsum(self.rng.standard_normal((self.nw, m, l, self.d)) * self.link_sd, axis=2)
            k = (np.arange(1, l) / l)[None, None, :, None]
            bridge = A[:, :, None] + W[:, :, :-1] - k * (W[:, :, -1:] - (B - A)[:, :, None])
            beads = anchors[:-1, None] + np.arange(1, l)[None, :]
            self._regrow("staging", beads, bridge, self.pot.energy(bridge), m)
        self._ends("staging", o, P - anchors[-1])

    def _ends(self, move, head, tail):
        """Regrow ``head`` beads at r_0 and ``tail`` beads at r_P as free random walks."""
        if head > 0:
            steps = np.cumsum(self.rng.standard_normal((self.nw, 1, head, self.d)) * self.link_sd, axis=2)
            new = self.R[:, head][:, None, None] + steps            # beads head-1, ..., 0
            beads = np.arange(head - 1, -1, -1)[None, :]
            self._regrow(move, beads, new, self.pot.energy(new), 1)
        if tail > 0:
            s = self.P - tail
            steps = np.cumsum(self.rng.standard_normal((self.nw, 1, tail, self.d)) * self.link_sd, axis=2)
            new = self.R[:, s][:, None, None] + steps                # beads s+1, ..., P
            beads = np.arange(s + 1, self.P + 1)[None, :]
            self._regrow(move, beads, new, self.pot.energy(new), 1)

    def endpoints(self):
        self._ends("endpoint", self.end_seg, self.end_seg)

    def single_bead(self):
        inv = 1.0 / (4.0 * self.lam * self.tau)
        for parity in (0, 1):
            idx = np.arange(parity, self.P + 1, 2)
            old = self.R[:, idx]
            new = old + self.rng.standard_normal(old.shape) * self.bead_step
            Vn = self.pot.energy(new)
            dK = np.zeros((self.nw, len(idx)))
            for nb in (-1, 1):
                j = idx + nb
                ok = (j >= 0) & (j <= self.P)
                nbr = self.R[:, np.clip(j, 0, self.P)]
                d = np.sum((new - nbr) ** 2 - (old - nbr) ** 2, axis=-1)
                dK += np.where(ok, d, 0.0)
            dS = inv * dK + self.tau * self.w[idx] * (Vn - self.V[:, idx])
            acc, u = self._accept(-dS)
            if self.audit_left > 0:
                for jj, b in enumerate(idx):
                    self._log("single-bead", [b], new[0, jj][None], -dS[0, jj], u[0, jj], acc[0, jj])
                    if acc[0, jj]:
                        self.R[0, b] = new[0, jj]
                        self.V[0, b] = Vn[0, jj]
            Rs, Vs = self.R[:, idx], self.V[:, idx]
            Rs[acc] = new[acc]
            Vs[acc] = Vn[acc]
            self.R[:, idx], self.V[:, idx] = Rs, Vs
            self._count("single-bead", acc.sum(), acc.size)

    def translate(self):
        delta = self.rng.standard_normal((self.nw, 1, self.d)) * self.trans_step
        new = self.R + delta
        Vn = self.pot.energy(new)
        dS = self.tau * (Vn - self.V) @ self.w
        self._whole("translate", new, Vn, -dS)

    def reference_move(self):
        z = self.rng.standard_normal((self.d, self.nw, self.P + 1))
        new = np.stack([z[a] @ G.T for a, G in enumerate(self.ref_gen)], axis=-1)
        Vn = self.pot.energy(new)
        excess_new = self.tau * ((Vn - self._ref_energy(new)) @ self.w)
        if self._excess is None:
            self._excess = self.tau * ((self.V - self._ref_energy(self.R)) @ self.w)
        acc = self._whole("reference", new, Vn, self._excess - excess_new)
        if self.cfg.moves == "reference":
            self._excess[acc] = excess_new[acc]     # nothing else moves the chain
        else:
            self._excess = None

    def _whole(self, move, new, Vn, log_ratio):
        acc, u = self._accept(log_ratio)
        if self.audit_left > 0:
            self._log(move, np.arange(self.P + 1), new[0], log_ratio[0], u[0], acc[0])
        self.R[acc] = new[acc]
        self.V[acc] = Vn[acc]
        self._count(move, acc.sum(), acc.size)
        return acc

    def sweep(self):
        if self.cfg.moves == "reference":
            self.reference_move()
            return
        if self.cfg.moves == "staging":
            self.staging()
        else:
            self.single_bead()
        self.endpoints()
        self.translate()
        if self.ref_k is not None:
            self.reference_move()

    # tuning
    def _window_rate(self, move, before):
        a1, t1 = self.counts.get(move, (0, 0))
        a0, t0 = before.get(move, (0, 0))
        return (a1 - a0) / (t1 - t0) if t1 > t0 else None

    def tune(self, before):
        r = self._window_rate("staging", before)
        if r is not None and self.cfg.segment is None:
            if r > 0.6 and self.seg < self.P:
                self.seg += 1
            elif r < 0.3 and self.seg > 2:
                self.seg -= 1
        r = self._window_rate("endpoint", before)
        if r is not None:
            if r > 0.6 and self.end_seg < self.P // 2:
                self.end_seg += 1
            elif r < 0.3 and self.end_seg > 1:
                self.end_seg -= 1
        for move, attr in (("translate", "trans_step"), ("single-bead", "bead_step")):
            r = self._window_rate(move, before)
            if r is not None:
                setattr(self, attr, getattr(self, attr) * (1.2 if r > 0.5 else 0.8))

    def run(self):
        cfg = self.cfg
        for i in range(cfg.burn_in):
            if i % _TUNE_EVERY == 0:
                before = dict(self.counts)
            self.sweep()
            if i % _TUNE_EVERY == _TUNE_EVERY - 1:
                self.tune(before)
        self.counts = {}
        nk = cfg.kept_per_chain
        ee = np.empty((nk, self.nw, self.d))
        mid = np.empty((nk, self.nw, self.d))
        hist = np.zeros(len(_SPAN_EDGES) - 1)
        sq = np.zeros(self.d)
        nspan = 0
        sub = min(self.nw, 64)
        kept = 0
        for i in range(cfg.steps):
            self.sweep()
            if (i + 1) % cfg.thinning == 0 and kept < nk:
                ee[kept] = self.R[:, -1] - self.R[:, 0]
                mid[kept] = self.R[:, self.P // 2]
                dev = self.R[:sub] - self.R[:sub].mean(axis=1, keepdims=True)
                hist += np.histogram(dev[..., 0], bins=_SPAN_EDGES)[0]
                sq += np.sum(dev**2, axis=(0, 1))
                nspan += dev.shape[0] * dev.shape[1]
                kept += 1
        return {"ee": ee, "mid": mid, "hist": hist, "sq": sq, "nspan": nspan,
                "counts": self.counts, "seg": self.seg, "end_seg": self.end_seg, "audit": self.audit}


def _tau_int(series, c=5.0):
    """Integrated autocorrelation time of (steps, chains) data, Sokal window."""
    y = series - series.mean(axis=0)
    n = y.shape[0]
    if n < 4:
        return 1.0
    f = np.fft.rfft(y, n=2 * n, axis=0)
    acf = np.fft.irfft(f * np.conj(f), axis=0)[:n].sum(axis=1)
    if acf[0] <= 0:
        return 1.0
    rho = acf / acf[0]
    tau = 1.0
    for m in range(1, n):
        tau += 2.0 * rho[m]
        if m >= c * tau:
            break
    return max(float(tau), 1.0)


def _quantiles_from_hist(hist, edges, probs):
    cdf = np.cumsum(hist)
    cdf = cdf / cdf[-1]
    centers = edges[1:]
    return {p: float(np.interp(p, cdf, centers)) for p in probs}


def trotter_parameter(potential, config):
    w = potential.curvature_omega()
    return float(w * UNITS.cm1_to_meV / (UNITS.kB * config.temperature * config.beads))


def sample_open_pimc(potential, config=None, threads=1):
    """Metropolis sampling of the open chain; returns samples and diagnostics."""
    config = config or OpenChainConfig()
    if not isinstance(potential, ModelPotential):
        raise UsageError("potential must be a ModelPotential")
    if not potential.confining and not isinstance(potential, Free):
        raise UnconfinedError("non-confining potential")
    notes = []
    tp = trotter_parameter(potential, config)
    if tp > TROTTER_LIMIT:
        msg = f"beta hbar omega_max / P = {tp:.3f} exceeds {TROTTER_LIMIT}"
        warnings.warn(msg, TrotterWarning, stacklevel=2)
        notes.append(msg)

    sizes = [config.batch] * (config.chains // config.batch)
    if config.chains % config.batch:
        sizes.append(config.chains % config.batch)

    def work(i):
        return _Batch(potential, config, i, sizes[i]).run()

    if threads and threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as ex:
            outs = list(ex.map(work, range(len(sizes))))
    else:
        outs = [work(i) for i in range(len(sizes))]

    # chain-major order: chain id = batch offset + walker, then time
    local = np.concatenate([o["ee"].transpose(1, 0, 2).reshape(-1, potential.dim) for o in outs])
    mids = np.concatenate([o["mid"].transpose(1, 0, 2).reshape(-1, potential.dim) for o in outs])
    series = np.concatenate([o["ee"][..., 0] ** 2 for o in outs], axis=1)
    tau = _tau_int(series)

    counts = {}
    for o in outs:
        for k, (a, t) in o["counts"].items():
            a0, t0 = counts.get(k, (0, 0))
            counts[k] = (a0 + a, t0 + t)
    acceptance = {k: a / t for k, (a, t) in counts.items() if t}
    # a high rate is harmless once the move spans its largest allowed segment
    saturated = {"staging": all(o["seg"] >= config.beads for o in outs),
                 "endpoint": all(o["end_seg"] >= config.beads // 2 for o in outs), "single-bead": False}
    for move in ("staging", "single-bead", "endpoint"):
        r = acceptance.get(move)
        if r is not None and (r < 0.05 or (r > 0.95 and not saturated[move])):
            msg = f"{move} acceptance {r:.3f} outside [0.05, 0.95]"
            warnings.warn(msg, SamplerTuningWarning, stacklevel=2)
            notes.append(msg)

    hist = sum(o["hist"] for o in outs)
    nspan = sum(o["nspan"] for o in outs)
    sq = sum(o["sq"] for o in outs)
    diag = PIMCDiagnostics(
        acceptance=acceptance,
        proposals={k: t for k, (a, t) in counts.items()},
        segment=[o["seg"] for o in outs],
        endpoint_segment=[o["end_seg"] for o in outs],
        tau_int=tau,
        effective_samples=len(local) / tau,
        span_quantiles=_quantiles_from_hist(hist, _SPAN_EDGES, SPAN_QUANTILES) if nspan else {},
        centroid_rms=list(np.sqrt(sq / nspan)) if nspan else [],
        trotter_parameter=tp,
        warnings=notes,
        audit=outs[0]["audit"],
    )
    lab = potential.to_lab(local)
    samples = EndToEndSampleSet(np.full(len(lab), config.proton_id), lab, config.temperature,
                                config.mass, provenance="simulated")
    return PIMCResult(samples, local, mids, diag, config)
