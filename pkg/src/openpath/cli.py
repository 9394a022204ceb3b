"""Command-line front end.

Every run prints a JSON summary on stdout (and writes it to ``--out``/summary.json
when an output directory is given, together with CSV tables). Exit codes:
0 success, 2 usage, 3 data, 4 numerical accuracy.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import directional, estimator, phonon, quasiharmonic
from .core import PROTON_MASS_AMU, principal_decomposition
from .errors import DataError, OpenPathError, UsageError
from .io import (dumps_summary, is_spectrum_file, read_samples, read_spectrum, write_csv, write_samples)
from .pathsampler import fitting, oracle, pimc, potentials


def q(value, unit):
    """A numeric summary entry with its unit ('1' for dimensionless)."""
    return {"value": value, "unit": unit}


# config handling

OPTIONS = {
    # name: (type, default)
    "in": (str, None),
    "out": (str, None),
    "temp": (float, None),
    "mass": (float, None),
    "seed": (int, 0),
    "beads": (int, 64),
    "samples": (int, 100000),
    "grid": (str, None),
    "plane": (str, "basal"),
    "bands": (str, "400,1050,2400"),
    "method": (str, None),
    "threads": (int, None),
    "omega": (str, None),
    "jitter": (str, None),
    "atoms": (str, None),
    "potential": (str, "ice"),
    "params": (str, None),
    "free": (str, "c2,c3,c4"),
    "axis": (str, None),
    "positions": (str, None),
    "orientations": (str, None),
    "bootstrap": (int, 20),
}


def read_config(path):
    """Plain key=value lines; '#' comments; keys are long option names."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = (t.strip() for t in s.split("=", 1))
        key = key.replace("_", "-").lstrip("-")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        typ = OPTIONS[key][0]
        try:
            out[key] = typ(val)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}") from None
    return out


def resolve(args):
    """Defaults < config file < explicit flags; threads falls back to OPENPATH_THREADS."""
    cfg = {k: d for k, (_, d) in OPTIONS.items()}
    if args.config:
        cfg.update(read_config(args.config))
    for k in OPTIONS:
        v = getattr(args, k.replace("-", "_"), None)
        if v is not None:
            cfg[k] = v
    if cfg["threads"] is None:
        env = os.environ.get("OPENPATH_THREADS")
        if env:
            try:
                cfg["threads"] = int(env)
            except ValueError:
                raise UsageError("OPENPATH_THREADS must be an integer") from None
        else:
            cfg["threads"] = 1
    if cfg["threads"] < 0:
        raise UsageError("--threads must be >= 0")
    cfg["command"] = args.command
    return cfg


def n_threads(cfg):
    return cfg["threads"] or (os.cpu_count() or 1)


def floats(text, n=None, name="value"):
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"bad {name} list {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{name} needs {n} comma-separated numbers")
    return vals


def need(cfg, key):
    if cfg[key] is None:
        raise UsageError(f"--{key} is required for {cfg['command']}")
    return cfg[key]


def input_path(cfg):
    p = Path(need(cfg, "in"))
    if not p.is_file():
        raise DataError(f"input file {p} not found")
    return p


class Output:
    def __init__(self, cfg):
        self.dir = Path(cfg["out"]) if cfg["out"] else None
        self.files = []
        if self.dir is not None:
            if self.dir.exists() and not self.dir.is_dir():
                raise DataError(f"--out {self.dir} is not a directory")
            try:
                self.dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise DataError(f"cannot create {self.dir}: {exc.strerror}") from exc

    def path(self, name):
        if self.dir is None:
            return None
        self.files.append(name)
        return self.dir / name

    def csv(self, name, columns, data, comments=()):
        p = self.path(name)
        if p is not None:
            write_csv(p, columns, data, comments)

    def text(self, name, content):
        p = self.path(name)
        if p is not None:
            p.write_text(content)


# shared loaders

def load_spectrum(cfg):
    """Spectrum from --omega, a spectrum file or a sample file (proton-averaged fit)."""
    mass = cfg["mass"] if cfg["mass"] is not None else PROTON_MASS_AMU
    if cfg["omega"] is not None:
        T = need(cfg, "temp")
        return estimator.PrincipalSpectrum.from_omega(floats(cfg["omega"], 3, "omega"), T, mass)
    path = input_path(cfg)
    if is_spectrum_file(path):
        spec = read_spectrum(path)
        if cfg["temp"] is not None or cfg["mass"] is not None:
            spec = estimator.PrincipalSpectrum.from_omega(
                spec.omega, cfg["temp"] or spec.temperature, cfg["mass"] or spec.mass, spec.directions)
        return spec
    samples = load_samples(cfg)
    return estimator.average_spectrum(estimator.fit_samples(samples).values())


def load_samples(cfg):
    s = read_samples(input_path(cfg))
    if cfg["temp"] is not None:
        s.temperature = cfg["temp"]
    if cfg["mass"] is not None:
        s.mass = cfg["mass"]
    return s


def spectrum_entry(spec):
    return {
        "omega": q(spec.omega, "cm^-1"),
        "sigma2": q(spec.sigma2, "A^2"),
        "directions": q(spec.directions, "1"),
        "temperature": q(spec.temperature, "K"),
        "mass": q(spec.mass, "amu"),
    }


def radial_grid(cfg, default_max):
    if cfg["grid"] is None:
        return np.linspace(0.0, default_max, 600)
    vals = floats(cfg["grid"], 2, "grid")
    if vals[0] <= 0 or vals[1] < 8:
        raise UsageError("--grid is 'max,points' with max > 0 and points >= 8")
    return np.linspace(0.0, vals[0], int(vals[1]))


# subcommands

def cmd_fit(cfg, out):
    samples = load_samples(cfg)
    cols = ["proton_id", "omega_1_cm1", "omega_2_cm1", "omega_3_cm1", "sigma2_1_A2", "sigma2_2_A2",
            "sigma2_3_A2", "kinetic_meV", "v1_x", "v1_y", "v1_z", "v2_x", "v2_y", "v2_z", "v3_x", "v3_y", "v3_z"]
    header = [f"temperature_K {samples.temperature:.10g}"]
    if len(samples) == 0:
        out.csv("spectra.csv", cols, [[] for _ in cols], header)
        return {"n_samples": q(0, "1"), "n_protons": q(0, "1"), "average": None, "kinetic_energy": q(None, "meV"),
                "per_proton": {}, "uncertainty": None}
    spectra = estimator.fit_samples(samples)
    avg = estimator.average_spectrum(spectra.values())
    unc = estimator.spectrum_uncertainty(samples)
    ids = sorted(spectra)
    data = [ids]
    data += [[spectra[i].omega[k] for i in ids] for k in range(3)]
    data += [[spectra[i].sigma2[k] for i in ids] for k in range(3)]
    data += [[estimator.kinetic_energy(spectra[i]) for i in ids]]
    data += [[spectra[i].directions[a, b] for i in ids] for a in range(3) for b in range(3)]
    out.csv("spectra.csv", cols, data, header)
    return {
        "n_samples": q(len(samples), "1"),
        "n_protons": q(len(ids), "1"),
        "average": spectrum_entry(avg),
        "kinetic_energy": q(estimator.kinetic_energy(avg), "meV"),
        "per_proton": {str(i): {"omega": q(spectra[i].omega, "cm^-1"),
                                "kinetic_energy": q(estimator.kinetic_energy(spectra[i]), "meV"),
                                "count": q(spectra[i].count, "1")} for i in ids},
        "uncertainty": {
            "jackknife_protons": q(unc.jackknife_protons, "cm^-1"),
            "block_samples": {str(k): q(v, "cm^-1") for k, v in unc.block_samples.items()},
            "n_blocks": q(unc.n_blocks, "1"),
        },
    }


def cmd_spherical(cfg, out):
    spec = load_spectrum(cfg)
    x = radial_grid(cfg, 8.0 * np.sqrt(spec.sigma2.max()))
    ee = estimator.spherical_end_to_end(spec, x)
    mom = estimator.momentum_distribution(spec)
    out.csv("end_to_end.csv", ["x_A", "n_x_A-3"], [ee.grid, ee.values])
    out.csv("momentum.csv", ["k_A-1", "n_k_A3"], [mom.grid, mom.values])
    return {
        "spectrum": spectrum_entry(spec),
        "kinetic_energy": q(estimator.kinetic_energy(spec), "meV"),
        "end_to_end": {"normalization": q(ee.normalization, "1"), "second_moment": q(ee.second_moment, "A^2"),
                       "quadrature_order": q(ee.order, "1"), "points": q(len(ee.grid), "1")},
        "momentum": {"normalization": q(mom.normalization, "1"), "second_moment": q(mom.second_moment, "A^-2"),
                     "quadrature_order": q(mom.order, "1"), "points": q(len(mom.grid), "1")},
    }


def cmd_isotropic(cfg, out):
    spec = load_spectrum(cfg)
    ek = estimator.kinetic_energy(spec)
    methods = [cfg["method"]] if cfg["method"] else ["least-squares", "moment-match"]
    res = {}
    for m in methods:
        r = quasiharmonic.isotropic_fit(spec, method=m)
        res[m] = {"omega_bar": q(r.omega_bar, "cm^-1"), "effective_temperature": q(r.effective_temperature, "K"),
                  "kinetic_energy": q(r.kinetic_energy, "meV"), "fit_residual": q(r.fit_residual, "1"),
                  "kinetic_ratio": q(r.kinetic_energy / ek, "1")}
    return {"spectrum": spectrum_entry(spec), "anisotropic_kinetic_energy": q(ek, "meV"), "fits": res,
            "default_method": "moment-match"}


def cmd_directional(cfg, out):
    spec = load_spectrum(cfg)
    if cfg["orientations"]:
        ors = directional.read_orientations(cfg["orientations"])
    else:
        ors = directional.ih_orientations()
    jitter = floats(cfg["jitter"], 3, "jitter") if cfg["jitter"] is not None else (0.0, 0.0, 0.0)
    extent, res = 0.6, 257
    if cfg["grid"] is not None:
        g = floats(cfg["grid"], 2, "grid")
        extent, res = g[0], int(g[1])
    mode = cfg["method"] or "slice"
    grid = directional.superpose(ors, spec, jitter=jitter, plane=cfg["plane"], extent=extent, resolution=res,
                                 seed=cfg["seed"], mode=mode, threads=n_threads(cfg))
    U, Vv = np.meshgrid(grid.coords, grid.coords)
    out.csv("grid.csv", ["x_A", "y_A", "log10_nV"], [U.ravel(), Vv.ravel(), grid.values.ravel()],
            [f"plane {cfg['plane']}", f"mode {mode}"])
    out.text("grid_meta.json", dumps_summary(grid.metadata))
    center = grid.values[res // 2, res // 2]
    return {
        "spectrum": spectrum_entry(spec),
        "environmental_b": q(directional.environmental_coefficients(spec), "A^-2"),
        "grid": {"extent": q(extent, "A"), "resolution": q(res, "1"), "mode": mode, "plane": cfg["plane"],
                 "log10_min": q(float(grid.values.min()), "1"), "log10_center": q(float(center), "1")},
        "metadata": grid.metadata,
    }


def _hessian_spectrum(cfg):
    H, masses = phonon.read_hessian(input_path(cfg))
    return phonon.dynamical_spectrum(H, masses), masses


def _atoms(cfg, masses):
    if cfg["atoms"]:
        try:
            atoms = [int(a) for a in cfg["atoms"].split(",")]
        except ValueError:
            raise UsageError("--atoms is a comma-separated list of atom indices") from None
        if any(a < 0 or a >= len(masses) for a in atoms):
            raise UsageError("atom index out of range")
        return atoms
    atoms = [i for i, m in enumerate(masses) if m < 1.5]
    if not atoms:
        raise DataError("no hydrogen-like atoms (mass < 1.5 amu); pass --atoms")
    return atoms


def cmd_phonon_hessian(cfg, out):
    spec, masses = _hessian_spectrum(cfg)
    part = spec.participation()
    k = np.arange(len(spec.frequencies))
    out.csv("modes.csv", ["k", "omega_cm1", "participation"], [k, spec.frequencies, part])
    g, d = phonon.dos(spec)
    out.csv("dos.csv", ["omega_cm1", "dos_per_cm1"], [g, d])
    return {"n_atoms": q(len(masses), "1"), "n_modes": q(len(spec.frequencies), "1"),
            "n_acoustic": q(spec.acoustic.shape[1], "1"), "unstable_modes": q(spec.unstable, "1"),
            "min_frequency": q(float(spec.frequencies.min()), "cm^-1"),
            "max_frequency": q(float(spec.frequencies.max()), "cm^-1"),
            "asymmetry_norm": q(spec.asymmetry_norm, "meV/A^2")}


def cmd_phonon_momenta(cfg, out):
    spec, masses = _hessian_spectrum(cfg)
    T = need(cfg, "temp")
    atoms = _atoms(cfg, masses)
    corrs = [phonon.momentum_correlation(spec, a, T) for a in atoms]
    pp = phonon.phonon_principal_frequencies(corrs, T)
    out.csv("principal.csv", ["atom", "omega_1_cm1", "omega_2_cm1", "omega_3_cm1", "kinetic_meV"],
            [atoms] + [[s.omega[i] for s in pp.spectra] for i in range(3)] + [[c.kinetic_energy for c in corrs]])
    return {"atoms": q(atoms, "1"), "omega_mean": q(pp.omega_mean, "cm^-1"), "omega_std": q(pp.omega_std, "cm^-1"),
            "kinetic_mean": q(pp.kinetic_mean, "meV"), "kinetic_std": q(pp.kinetic_std, "meV"),
            "temperature": q(T, "K")}


def cmd_population(cfg, out):
    spec, masses = _hessian_spectrum(cfg)
    T = need(cfg, "temp")
    atoms = _atoms(cfg, masses)
    bands = phonon.BandPartition.parse(cfg["bands"])
    dirs = [phonon.harmonic_principal_spectrum(spec, a, T).directions for a in atoms]
    table = phonon.population(spec, dirs, atoms)
    k = np.arange(len(table.frequencies))
    out.csv("population.csv", ["k", "omega_cm1", "h_1", "h_2", "h_3"],
            [k, table.frequencies, table.h[:, 0], table.h[:, 1], table.h[:, 2]])
    mass = float(np.mean(masses[atoms]))
    ba = phonon.band_analysis(table, bands, T, mass)
    return {"atoms": q(atoms, "1"), "band_edges": q(list(bands.edges), "cm^-1"),
            "band_weights": {lab: q(w, "1") for lab, w in ba.weights.items()},
            "acoustic_weight": q(ba.acoustic, "1"), "completeness": q(table.completeness, "1"),
            "weighted_mean": q(ba.weighted_mean, "cm^-1"), "restricted_sum": q(ba.restricted_sum, "cm^-1"),
            "temperature": q(T, "K")}


def build_potential(cfg):
    kind = cfg["potential"]
    mass = cfg["mass"] if cfg["mass"] is not None else PROTON_MASS_AMU
    p = floats(cfg["params"], name="params") if cfg["params"] else []
    try:
        if kind == "ice":
            return potentials.ice_stretch_preset(mass=mass)
        if kind == "free":
            return potentials.Free(1, mass=mass)
        if kind == "harmonic1D":
            return potentials.Polynomial1D.harmonic(p[0], mass=mass)
        if kind == "harmonic3D":
            return potentials.Harmonic3D(p[:3], mass=mass)
        if kind == "polynomial1D":
            return potentials.Polynomial1D(*p[:3], mass=mass)
        if kind == "doublewell1D":
            return potentials.DoubleWell1D(p[0], p[1], mass=mass)
    except IndexError:
        raise UsageError(f"--params has too few values for {kind}") from None
    raise UsageError(f"unknown potential {kind!r} (ice, free, harmonic1D, harmonic3D, polynomial1D, doublewell1D)")


def cmd_simulate(cfg, out):
    T = need(cfg, "temp")
    mass = cfg["mass"] if cfg["mass"] is not None else PROTON_MASS_AMU
    n = cfg["samples"]
    if n < 1:
        raise UsageError("--samples must be positive")
    if cfg["potential"] == "harmonic-exact":
        om = floats(need(cfg, "omega"), 3, "omega")
        s = pimc.sample_harmonic_exact(om, T, n, mass=mass, seed=cfg["seed"])
        p = out.path("samples.txt")
        if p is not None:
            write_samples(p, s, ["exact harmonic draws"])
        return {"n_samples": q(len(s), "1"), "omega": q(om, "cm^-1"), "temperature": q(T, "K")}
    V = build_potential(cfg)
    chains = 256
    steps = max(1, -(-n // chains))
    conf = pimc.OpenChainConfig(beads=cfg["beads"], temperature=T, mass=mass, moves=cfg["method"] or "staging",
                                steps=steps, seed=cfg["seed"], chains=chains, batch=64)
    res = pimc.sample_open_pimc(V, conf, threads=n_threads(cfg))
    s = res.samples
    s = estimator.EndToEndSampleSet(s.proton_ids[:n], s.x[:n], T, mass, "simulated")
    p = out.path("samples.txt")
    if p is not None:
        write_samples(p, s, [f"open-chain PIMC {V.kind} P={conf.beads} seed={conf.seed}"])
        # chain midpoints along the first local axis, for fit-potential --positions
        np.savetxt(out.path("midpoints.txt"), res.midpoints[:n, 0], fmt="%.9e",
                   header=f"midpoint bead P/2 along local axis 1 (A), {V.kind}")
    x1 = res.local[:n, 0]
    return {"potential": V.describe(), "n_samples": q(len(s), "1"), "beads": q(conf.beads, "1"),
            "variance_axis1": q(float(np.mean(x1**2)), "A^2"),
            "effective_omega_axis1": q(quasiharmonic.omega_from_sigma(float(np.mean(x1**2)), T, mass), "cm^-1"),
            "diagnostics": res.diagnostics.summary(), "temperature": q(T, "K")}


def cmd_oracle1d(cfg, out):
    T = need(cfg, "temp")
    V = build_potential(cfg)
    if V.dim != 1 and not hasattr(V, "axis_energy"):
        raise UsageError("oracle1d needs a 1D potential")
    r = oracle.oracle_1d(V, T)
    sel = np.abs(r.lags) <= min(r.extent, 1.5)
    out.csv("end_to_end.csv", ["x_A", "pdf_A-1", "ntilde"], [r.lags[sel], r.pdf[sel], r.ntilde[sel]])
    ksel = np.abs(r.k) <= 30.0
    out.csv("momentum.csv", ["k_A-1", "n_k_A"], [r.k[ksel], r.momentum[ksel]])
    return {"potential": V.describe(), "kinetic_energy": q(r.kinetic_energy, "meV"),
            "variance": q(r.variance, "A^2"), "effective_omega": q(oracle.effective_omega(r), "cm^-1"),
            "states": q(len(r.energies), "1"), "extent": q(r.extent, "A"), "temperature": q(T, "K")}


def cmd_fit_potential(cfg, out):
    samples = load_samples(cfg)
    if cfg["axis"]:
        axis = np.array(floats(cfg["axis"], 3, "axis"))
        axis /= np.linalg.norm(axis)
    else:
        # stiffest direction that carries any spread; 1D simulations leave two axes at zero
        vals, vecs, _ = principal_decomposition(estimator.accumulate_correlation(samples).matrix)
        live = np.flatnonzero(vals > 1e-10 * vals[0])
        if live.size == 0:
            raise DataError("samples have no spread")
        axis = vecs[:, live[-1]]
    x = samples.x @ axis
    pos = None
    if cfg["positions"]:
        try:
            pos = np.loadtxt(cfg["positions"], ndmin=1)
        except (OSError, ValueError) as exc:
            raise DataError(f"{cfg['positions']}: {exc}") from exc
        if pos.shape[0] != x.shape[0]:
            raise DataError("positions file length differs from the sample count")
    free = tuple(v.strip() for v in cfg["free"].split(","))
    f = fitting.fit_effective_potential_1d(x, samples.temperature, samples.mass, free=free, positions=pos,
                                           n_boot=cfg["bootstrap"], seed=cfg["seed"])
    fs = f.summary()
    units = fs.pop("units")
    for key in ("coefficients", "uncertainties"):
        fs[key] = {k: q(v, units[k]) for k, v in fs[key].items()}
    fs["effective_omega"] = q(fs["effective_omega"], units["effective_omega"])
    for key in ("ks_distance", "residual_rms", "n_samples"):
        fs[key] = q(fs[key], "1")
    return {"axis": q(axis, "1"), "fit": fs, "temperature": q(samples.temperature, "K")}


COMMANDS = {
    "fit": (cmd_fit, "principal spectrum and kinetic energy from an end-to-end sample file"),
    "spherical": (cmd_spherical, "spherically averaged end-to-end and momentum distributions"),
    "isotropic": (cmd_isotropic, "single-frequency isotropic fits"),
    "directional": (cmd_directional, "orientation-superposed environmental distribution on a plane"),
    "phonon-hessian": (cmd_phonon_hessian, "normal modes and DOS of a Hessian file"),
    "phonon-momenta": (cmd_phonon_momenta, "harmonic momentum correlations and principal frequencies"),
    "population": (cmd_population, "mode populations along principal directions and band weights"),
    "simulate": (cmd_simulate, "open-chain PIMC (or exact harmonic) end-to-end samples"),
    "oracle1d": (cmd_oracle1d, "exact 1D end-to-end and momentum distributions"),
    "fit-potential": (cmd_fit_potential, "fit a 1D polynomial effective potential to samples"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="openpath", description="Quasi-harmonic analysis of proton end-to-end "
                                     "distributions.")
    parser.add_argument("--version", action="version", version=f"openpath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext, description=helptext)
        p.add_argument("--config", help="key=value file; explicit flags take precedence")
        for key, (typ, _) in OPTIONS.items():
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=typ, default=None)
    return parser


def run(argv):
    args = build_parser().parse_args(argv)
    cfg = resolve(args)
    out = Output(cfg)
    func = COMMANDS[args.command][0]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results = func(cfg, out)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"threads: {n_threads(cfg)}", file=sys.stderr)
    summary = {
        "command": args.command,
        "version": __version__,
        # thread count changes scheduling only, so it stays out of the artifacts
        "config": {k: v for k, v in cfg.items() if k not in ("command", "threads")},
        "results": results,
        "artifacts": sorted(out.files),
        "warnings": sorted({str(w.message) for w in caught}),
    }
    text = dumps_summary(summary)
    p = out.path("summary.json")
    if p is not None:
        p.write_text(text)
    sys.stdout.write(text)
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except SystemExit as exc:          # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    except OpenPathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
