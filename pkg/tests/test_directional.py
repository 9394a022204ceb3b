import numpy as np
import pytest

import oracles as orc
from openpath.directional import (OrientationSet, angular_profile, environmental_coefficients,
                                  environmental_component, ih_orientations, orientation_forms, read_orientations,
                                  rotation_about_z, superpose, wurtzite_bonds)
from openpath.errors import DataError, UnconfinedError, UsageError
from openpath.estimator import PrincipalSpectrum, directional_end_to_end
from openpath.quasiharmonic import free_particle_sigma2

T = 269.0


@pytest.fixture(scope="module")
def spec():
    return PrincipalSpectrum.from_omega(orc.PICPMD_OMEGA, T)


def test_factorisation(spec, rng):
    # n(x) = free Gaussian * n_V(x), up to normalisation
    pts = rng.normal(scale=0.2, size=(200, 3))
    free = np.exp(-0.5 * np.sum(pts**2, axis=1) / free_particle_sigma2(T))
    ratio = directional_end_to_end(spec, pts) / (free * environmental_component(spec, pts))
    assert np.allclose(ratio, ratio[0], rtol=1e-10)
    assert environmental_component(spec, np.zeros(3)) == 1.0


def test_environment_not_confining():
    # sigma^2 above the free-particle bound along one axis
    bound = free_particle_sigma2(T)
    spec = PrincipalSpectrum(sigma2=np.array([0.01, 0.02, 1.1 * bound]), omega=np.array([3000.0, 1500.0, 1.0]),
                             directions=np.eye(3), temperature=T)
    with pytest.raises(UnconfinedError):
        environmental_coefficients(spec)


def test_ih_orientations_structure():
    ors = ih_orientations()
    assert len(ors) == 24
    for t in ors.triads:
        assert np.abs(t @ t.T - np.eye(3)).max() < 1e-12
        assert np.linalg.det(t) == pytest.approx(1.0, abs=1e-12)
    # closure under the generators used to build the set
    assert ors.is_closed_under(rotation_about_z(np.pi / 3))
    assert ors.is_closed_under(rotation_about_z(2 * np.pi / 3))


def test_v1_axes_hexagonal():
    ors = ih_orientations()
    v1 = ors.triads[:, 0, :]
    rot = v1 @ rotation_about_z(np.pi / 3).T
    for v in rot:
        assert np.min(np.abs(v1 - v).max(axis=1)) < 1e-9


def test_wurtzite_bonds_tetrahedral():
    b = wurtzite_bonds()
    G = b @ b.T
    off = G[~np.eye(4, dtype=bool)]
    assert np.allclose(off, -1 / 3, atol=1e-12)


def test_orientation_validation(tmp_path):
    with pytest.raises(DataError):
        OrientationSet(np.ones((1, 3, 3)))
    with pytest.raises(DataError):
        OrientationSet(np.diag([1.0, 1.0, -1.0])[None])
    p = tmp_path / "o.txt"
    p.write_text("# one triad\n1 0 0 0 1 0 0 0 1\n")
    assert len(read_orientations(p)) == 1
    p.write_text("1 0 0 0 1 0\n")
    with pytest.raises(DataError):
        read_orientations(p)


def test_grid_center_is_maximum(spec):
    g = superpose(ih_orientations(), spec, jitter=(0, 0, 0), extent=0.5, resolution=65)
    c = g.resolution // 2
    assert g.values[c, c] == pytest.approx(0.0, abs=1e-15)
    assert g.values.max() == g.values[c, c]
    assert np.all(np.isfinite(g.values))
    assert g.values.min() >= g.metadata["log_floor"]


def test_marginal_mode(spec):
    g = superpose(ih_orientations(), spec, jitter=(0, 0, 0), extent=0.5, resolution=65, mode="marginal")
    c = g.resolution // 2
    assert g.values[c, c] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(UsageError):
        superpose(ih_orientations(), spec, jitter=(0, 0, 0), resolution=65, mode="sideways")


def test_anisotropy_grows_with_radius(spec):
    forms = orientation_forms(ih_orientations(), spec)
    ratios = []
    for r in np.linspace(0.02, 0.5, 25):
        _, ring = angular_profile(forms, r, n_angles=360)
        ratios.append(ring.max() / ring.min())
    assert np.all(np.diff(ratios) >= -1e-12)
    assert ratios[-1] > 1.01


def test_jitter_to_zero_limit(spec):
    ors = ih_orientations()
    a = superpose(ors, spec, jitter=(0, 0, 0), extent=0.5, resolution=33)
    b = superpose(ors, spec, jitter=(1e-12, 1e-12, 1e-12), extent=0.5, resolution=33, seed=3)
    assert np.abs(a.values - b.values).max() < 1e-12


def test_jitter_deterministic_and_thread_independent(spec):
    ors = ih_orientations()
    kw = dict(jitter=(8.2, 8.9, 14.6), extent=0.5, resolution=33, seed=7, replicas=2)
    a = superpose(ors, spec, threads=1, **kw)
    b = superpose(ors, spec, threads=3, **kw)
    assert np.array_equal(a.values, b.values)
    c = superpose(ors, spec, threads=1, **{**kw, "seed": 8})
    assert not np.array_equal(a.values, c.values)


def test_plane_and_validation(spec):
    ors = ih_orientations()
    g = superpose(ors, spec, jitter=(0, 0, 0), plane="prism", extent=0.4, resolution=17)
    assert g.metadata["plane_normal"] == [0.0, 1.0, 0.0]
    with pytest.raises(UsageError):
        superpose(ors, spec, plane="pyramidal", resolution=17)
    with pytest.raises(UsageError):
        superpose(ors, spec, resolution=4)
