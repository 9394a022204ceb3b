"""Directional end-to-end distributions: environmental factor and ice-Ih superposition.

The end-to-end distribution of a quasi-harmonic proton factorises into the
free-particle Gaussian exp(-M k_B T x^2 / 2 hbar^2) and an environmental
part n_V(x) = exp(-1/2 sum_k b_k (x . v_k)^2) with
b_k = 1/sigma_k^2 - M k_B T / hbar^2. Superposing n_V over the molecular
orientations of hexagonal ice gives the crystal-symmetric environmental
distribution.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import DataError, UnconfinedError, UsageError
from .quasiharmonic import environmental_inverse_variance, free_particle_sigma2

TETRAHEDRAL_COS = -1.0 / 3.0
DEFAULT_JITTER_CM1 = (8.2, 8.9, 14.6)
LOG_FLOOR = -12.0


def rotation_about_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def environmental_coefficients(spectrum, tol=1e-12):
    """Environmental inverse variances b_k (A^-2), one per principal direction."""
    free = free_particle_sigma2(spectrum.temperature, spectrum.mass)
    wide = np.flatnonzero(np.asarray(spectrum.sigma2) > free * (1 + tol))
    if wide.size:
        raise UnconfinedError(f"environment not confining along axes {wide.tolist()}")
    b = np.atleast_1d(environmental_inverse_variance(spectrum.omega, spectrum.temperature, spectrum.mass))
    scale = 1.0 / np.min(spectrum.sigma2)
    b = np.where(np.abs(b) <= tol * scale, 0.0, b)
    if np.any(b < 0):
        raise UnconfinedError(f"environment not confining along axes {np.flatnonzero(b < 0).tolist()}")
    return b


def _quadratic_form(directions, b):
    V = np.asarray(directions, dtype=float)
    return (V.T * b) @ V


def environmental_component(spectrum, points):
    """n_V at ``points`` (..., 3) in A, normalised so n_V(0) = 1."""
    B = _quadratic_form(spectrum.directions, environmental_coefficients(spectrum))
    pts = np.asarray(points, dtype=float)
    return np.exp(-0.5 * np.einsum("...i,ij,...j->...", pts, B, pts))


@dataclass
class OrientationSet:
    """Orthonormal triads ``triads[i] = (v1, v2, v3)`` as rows."""

    triads: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.triads = np.asarray(self.triads, dtype=float).reshape(-1, 3, 3)
        if not self.labels:
            self.labels = [f"o{i}" for i in range(len(self.triads))]
        for i, t in enumerate(self.triads):
            if np.abs(t @ t.T - np.eye(3)).max() > 1e-9:
                raise DataError(f"triad {i} is not orthonormal")
            if np.linalg.det(t) < 0:
                raise DataError(f"triad {i} is left-handed")

    def __len__(self):
        return len(self.triads)

    def rotated(self, R):
        return OrientationSet(self.triads @ np.asarray(R).T, list(self.labels))

    def contains(self, triad, tol=1e-9):
        return bool(np.any(np.abs(self.triads - triad).reshape(len(self), -1).max(axis=1) < tol))

    def is_closed_under(self, R, tol=1e-9):
        return all(self.contains(t, tol) for t in self.rotated(R).triads)


def wurtzite_bonds(phase=0.0):
    """Four ideal tetrahedral bond directions with one bond along +c."""
    s = np.sqrt(1.0 - TETRAHEDRAL_COS**2)
    bonds = [np.array([0.0, 0.0, 1.0])]
    for j in range(3):
        phi = phase + 2.0 * np.pi * j / 3.0
        bonds.append(np.array([s * np.cos(phi), s * np.sin(phi), TETRAHEDRAL_COS]))
    return np.array(bonds)


def _triad(donor, other):
    v1 = donor / np.linalg.norm(donor)
    w = other - (other @ v1) * v1
    v2 = w / np.linalg.norm(w)
    v3 = np.cross(v1, v2)
    return np.array([v1, v2, v3])


def ih_orientations(tol=1e-9):
    """The 24 proton triads of ideal ice Ih.

    For each of the two oxygen sublattices (bond sets related by a 60 degree
    rotation about c) and each ordered pair of distinct bonds, v1 is the
    donor O-H bond, v2 the unit vector in the H-O-H plane perpendicular to
    v1 and v3 = v1 x v2.
    """
    triads, labels = [], []
    for lattice, phase in (("A", 0.0), ("B", np.pi / 3.0)):
        bonds = wurtzite_bonds(phase)
        for i, j in permutations(range(4), 2):
            t = _triad(bonds[i], bonds[j])
            if any(np.abs(t - u).max() < tol for u in triads):
                continue
            triads.append(t)
            labels.append(f"{lattice}{i}{j}")
    return OrientationSet(np.array(triads), labels)


@dataclass
class PlaneGrid:
    normal: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    extent: float
    coords: np.ndarray
    values: np.ndarray   # log10 density, shape (len(coords), len(coords)), [iv, iu]
    mode: str
    metadata: dict = field(default_factory=dict)

    @property
    def resolution(self):
        return len(self.coords)

    def points(self):
        U, Vv = np.meshgrid(self.coords, self.coords)
        return U[..., None] * self.axis_u + Vv[..., None] * self.axis_v


PLANES = {
    "basal": (np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    "prism": (np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])),
}


def resolve_plane(plane):
    if isinstance(plane, str):
        try:
            return PLANES[plane]
        except KeyError:
            raise UsageError(f"unknown plane {plane!r}") from None
    n, u, v = (np.asarray(a, dtype=float) for a in plane)
    return n / np.linalg.norm(n), u / np.linalg.norm(u), v / np.linalg.norm(v)


def _jittered_coefficients(base, orientations, jitter, seed, replicas):
    # one independent stream per (seed, orientation index)
    jitter = np.asarray(jitter, dtype=float)
    out = []
    for i in range(len(orientations)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        for _ in range(replicas):
            z = rng.standard_normal(3)
            omega = np.abs(base.omega + jitter * z)
            b = np.atleast_1d(environmental_inverse_variance(omega, base.temperature, base.mass))
            if np.any(b < 0):
                raise UnconfinedError("jittered frequency gave a non-confining environment")
            out.append((i, b))
    return out


def _forms(orientations, base, jitter, seed, replicas):
    if np.all(np.asarray(jitter) == 0):
        b = environmental_coefficients(base)
        return [_quadratic_form(t, b) for t in orientations.triads]
    return [_quadratic_form(orientations.triads[i], b)
            for i, b in _jittered_coefficients(base, orientations, jitter, seed, replicas)]


def superposition(forms, points, mode="slice", normal=None):
    """Average of exp(-x^T B x / 2) over quadratic forms, at 3D points (slice) or
    in-plane points integrated along ``normal`` (marginal, normalised at 0)."""
    pts = np.asarray(points, dtype=float)
    acc = np.zeros(pts.shape[:-1])
    if mode == "slice":
        for B in forms:
            acc += np.exp(-0.5 * np.einsum("...i,ij,...j->...", pts, B, pts))
        return acc / len(forms)
    if mode != "marginal":
        raise UsageError(f"unknown projection mode {mode!r}")
    nrm = np.asarray(normal, dtype=float)
    center = 0.0
    for B in forms:
        bnn = nrm @ B @ nrm
        if bnn <= 0:
            raise UnconfinedError("marginal along an unconfined direction")
        Bn = B @ nrm
        Bp = B - np.outer(Bn, Bn) / bnn
        w = 1.0 / np.sqrt(bnn)
        acc += w * np.exp(-0.5 * np.einsum("...i,ij,...j->...", pts, Bp, pts))
        center += w
    return acc / center


def superpose(orientations, spectrum, jitter=DEFAULT_JITTER_CM1, plane="basal", extent=0.6,
              resolution=257, seed=0, mode="slice", replicas=1, threads=1, floor=LOG_FLOOR):
    """log10 of the orientation-averaged environmental distribution on a plane grid."""
    if resolution < 16:
        raise UsageError("resolution must be at least 16")
    if extent <= 0:
        raise UsageError("extent must be positive")
    normal, au, av = resolve_plane(plane)
    forms = _forms(orientations, spectrum, jitter, seed, replicas)
    coords = np.linspace(-extent, extent, resolution)

    def row(iv):
        pts = coords[:, None] * au + coords[iv] * av
        return superposition(forms, pts, mode, normal)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(row, range(resolution)))
    else:
        rows = [row(iv) for iv in range(resolution)]
    dens = np.array(rows)
    with np.errstate(divide="ignore"):
        values = np.maximum(np.log10(dens), floor)
    meta = {
        "mode": mode,
        "n_orientations": len(orientations),
        "replicas": replicas,
        "seed": seed,
        "jitter_cm1": [float(j) for j in np.broadcast_to(jitter, (3,))],
        "omega_cm1": [float(w) for w in spectrum.omega],
        "temperature_K": float(spectrum.temperature),
        "mass_amu": float(spectrum.mass),
        "extent_A": float(extent),
        "resolution": resolution,
        "log_floor": floor,
        "plane_normal": [float(a) for a in normal],
        "orientation_digest": hashlib.sha256(np.round(orientations.triads, 12).tobytes()).hexdigest()[:16],
    }
    return PlaneGrid(normal, au, av, float(extent), coords, values, mode, meta)


def angular_profile(forms, radius, n_angles=360, plane="basal", mode="slice"):
    """Superposed n_V around a circle of ``radius`` in the plane."""
    normal, au, av = resolve_plane(plane)
    th = 2.0 * np.pi * np.arange(n_angles) / n_angles
    pts = radius * (np.cos(th)[:, None] * au + np.sin(th)[:, None] * av)
    return th, superposition(forms, pts, mode, normal)


def orientation_forms(orientations, spectrum, jitter=(0.0, 0.0, 0.0), seed=0, replicas=1):
    """Quadratic forms B_i of each (possibly jittered) orientation."""
    return _forms(orientations, spectrum, jitter, seed, replicas)


def read_orientations(path):
    """One triad per line: v1 v2 v3 as nine floats; '#' starts a comment."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 9:
                raise DataError(f"{path}:{lineno}: expected 9 floats, got {len(parts)}")
            vals = np.array([float(p) for p in parts])
            if not np.all(np.isfinite(vals)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append(vals.reshape(3, 3))
    if not rows:
        raise DataError(f"{path}: no orientations")
    return OrientationSet(np.array(rows))
