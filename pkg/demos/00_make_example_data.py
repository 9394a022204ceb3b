"""Regenerate the small files in data/ used by the CLI examples and tests.

  * picpmd_spectrum.txt / harmonic_spectrum.txt: quoted principal
    frequencies for ice at 269 K, written as spectrum files.
  * samples_example.txt: exact harmonic end-to-end draws for four protons
    with the quasi-harmonic frequencies, each along a different ice-Ih
    orientation.
  * water_ring_hessian.txt: Gamma-point Hessian of a periodic ring of
    four rigid-ish water molecules held together by springs.
"""
from pathlib import Path

import numpy as np

from openpath import PrincipalSpectrum
from openpath.directional import ih_orientations
from openpath.estimator import EndToEndSampleSet
from openpath.io import write_samples, write_spectrum
from openpath.pathsampler import sample_harmonic_exact
from openpath.phonon import AtomicSystem, BondSprings, VectorSprings, build_hessian_fd, write_hessian
from openpath.quasiharmonic import force_constant

DATA = Path(__file__).resolve().parent.parent / "data"
T = 269.0
PICPMD = (2639.0, 1164.0, 775.0)
HARMONIC = (3017.6, 1172.5, 870.3)


def spectra():
    write_spectrum(DATA / "picpmd_spectrum.txt", PrincipalSpectrum.from_omega(PICPMD, T),
                   ["quasi-harmonic principal frequencies (path-integral ice Ih)"])
    write_spectrum(DATA / "harmonic_spectrum.txt", PrincipalSpectrum.from_omega(HARMONIC, T),
                   ["harmonic (phonon) principal frequencies for ice Ih"])


def samples(n_per=2500):
    ors = ih_orientations()
    sets = [sample_harmonic_exact(PICPMD, T, n_per, frame=ors.triads[3 * p], seed=100 + p, proton_id=p)
            for p in range(4)]
    s = EndToEndSampleSet.concatenate(sets)
    write_samples(DATA / "samples_example.txt", s, ["exact harmonic draws, four protons, seeds 100-103"])


def water_ring(n_mol=4, spacing=2.76):
    theta = np.deg2rad(104.5)
    pos, masses = [], []
    for i in range(n_mol):
        o = np.array([spacing * i, 0.0, 0.0])
        h1 = o + 0.97 * np.array([1.0, 0.0, 0.0])
        h2 = o + 0.97 * np.array([np.cos(theta), np.sin(theta), 0.2])
        pos += [o, h1, h2]
        masses += [15.999, 1.00728, 1.00728]
    pos = np.array(pos)
    length = spacing * n_mol
    oh, hh, hb, lib, oo = [], [], [], [], []
    for i in range(n_mol):
        o, h1, h2 = 3 * i, 3 * i + 1, 3 * i + 2
        nxt = 3 * ((i + 1) % n_mol)
        oh += [(o, h1), (o, h2)]
        hh.append((h1, h2))
        hb.append((h1, nxt))
        lib += [(o, h1), (o, h2)]
        oo.append((o, nxt))

    def rest(pairs):
        out = []
        for i, j in pairs:
            d = pos[j] - pos[i]
            d[0] -= length * np.round(d[0] / length)
            out.append(d)
        return np.array(out)

    # central springs need minimum-image geometry: unwrap the ring for bond lengths
    r_hb = np.linalg.norm(rest(hb), axis=1)
    k_oh = force_constant(3350.0, 0.95)
    k_hh = force_constant(1650.0, 0.5)
    k_lib = force_constant(700.0, 1.0)
    k_oo = force_constant(220.0, 9.0)
    k_hb = force_constant(300.0, 1.0)
    terms = [BondSprings(oh, k_oh, 0.97), BondSprings(hh, k_hh, np.linalg.norm(rest(hh), axis=1)),
             VectorSprings(lib, k_lib, rest(lib)), VectorSprings(oo, k_oo, rest(oo)),
             _PeriodicBonds(hb, k_hb, r_hb, length)]

    def potential(p):
        E, F = 0.0, np.zeros_like(p)
        for t in terms:
            e, f = t(p)
            E += e
            F += f
        return E, F

    system = AtomicSystem(pos, np.array(masses), species=["O", "H", "H"] * n_mol)
    H = build_hessian_fd(potential, system)
    write_hessian(DATA / "water_ring_hessian.txt", H.matrix, system.masses)


class _PeriodicBonds(BondSprings):
    """Central springs across the periodic boundary along x."""

    def __init__(self, pairs, k, r0, length):
        super().__init__(pairs, k, r0)
        self.length = length

    def __call__(self, pos):
        pos = np.asarray(pos, dtype=float)
        F = np.zeros_like(pos)
        E = 0.0
        for (i, j), k, r0 in zip(self.pairs, self.k, self.r0):
            d = pos[j] - pos[i]
            d[0] -= self.length * np.round(d[0] / self.length)
            r = np.linalg.norm(d)
            E += 0.5 * k * (r - r0) ** 2
            g = k * (r - r0) * d / r
            F[i] += g
            F[j] -= g
        return E, F


if __name__ == "__main__":
    DATA.mkdir(exist_ok=True)
    spectra()
    samples()
    water_ring()
    print("wrote", sorted(p.name for p in DATA.iterdir()))
