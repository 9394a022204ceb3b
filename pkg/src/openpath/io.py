"""Text formats: end-to-end sample files, spectrum files, '#'-header CSV and JSON summaries."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .core import PROTON_MASS_AMU
from .errors import DataError
from .estimator import EndToEndSampleSet, PrincipalSpectrum

SPECTRUM_MAGIC = "# openpath spectrum"


def _header_value(line, key):
    parts = line[1:].split()
    if len(parts) >= 2 and parts[0] == key:
        return parts[1]
    return None


def read_samples(path, provenance="imported"):
    """Sample file: '# temperature_K <v>', '# mass_amu <v>', then 'proton_id x y z' rows (A)."""
    path = Path(path)
    T, mass = None, PROTON_MASS_AMU
    rows = []
    try:
        fh = path.open()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                for key in ("temperature_K", "mass_amu"):
                    v = _header_value(s, key)
                    if v is not None:
                        try:
                            val = float(v)
                        except ValueError:
                            raise DataError(f"{path}:{lineno}: bad {key} value {v!r}") from None
                        if key == "temperature_K":
                            T = val
                        else:
                            mass = val
                continue
            parts = s.split()
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 'proton_id x y z'")
            try:
                pid = int(parts[0])
                xyz = [float(p) for p in parts[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable record") from None
            if not all(math.isfinite(v) for v in xyz):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append((pid, *xyz))
    if T is None:
        raise DataError(f"{path}: missing '# temperature_K' header")
    if not (T > 0 and math.isfinite(T)) or not (mass > 0 and math.isfinite(mass)):
        raise DataError(f"{path}: temperature and mass must be positive and finite")
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return EndToEndSampleSet(arr[:, 0].astype(np.int64), arr[:, 1:], T, mass, provenance=provenance)


def write_samples(path, samples, comments=()):
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(f"# temperature_K {samples.temperature:.10g}\n")
        fh.write(f"# mass_amu {samples.mass:.10g}\n")
        for pid, (x, y, z) in zip(samples.proton_ids, samples.x):
            fh.write(f"{pid} {x:.9e} {y:.9e} {z:.9e}\n")


def write_spectrum(path, spectrum, comments=()):
    with open(path, "w") as fh:
        fh.write(SPECTRUM_MAGIC + "\n")
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(f"# temperature_K {spectrum.temperature:.10g}\n")
        fh.write(f"# mass_amu {spectrum.mass:.10g}\n")
        fh.write("# omega_cm1 v_x v_y v_z\n")
        for w, v in zip(spectrum.omega, spectrum.directions):
            fh.write(f"{w:.10g} {v[0]:.12g} {v[1]:.12g} {v[2]:.12g}\n")


def is_spectrum_file(path):
    try:
        with open(path) as fh:
            return fh.readline().strip() == SPECTRUM_MAGIC
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc


def read_spectrum(path):
    """Spectrum file: magic line, temperature/mass headers, three 'omega v_x v_y v_z' rows."""
    T, mass = None, PROTON_MASS_AMU
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                v = _header_value(s, "temperature_K")
                T = float(v) if v is not None else T
                v = _header_value(s, "mass_amu")
                mass = float(v) if v is not None else mass
                continue
            try:
                vals = [float(p) for p in s.split()]
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable row") from None
            if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: expected four finite numbers")
            rows.append(vals)
    if T is None or len(rows) != 3:
        raise DataError(f"{path}: need a temperature header and exactly three rows")
    arr = np.array(rows)
    dirs = arr[:, 1:] / np.linalg.norm(arr[:, 1:], axis=1, keepdims=True)
    if np.abs(dirs @ dirs.T - np.eye(3)).max() > 1e-6:
        raise DataError(f"{path}: directions are not orthonormal")
    order = np.argsort(-arr[:, 0])
    return PrincipalSpectrum.from_omega(arr[order, 0], T, mass, directions=dirs[order])


# CSV and JSON

def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return "nan"
    return f"{v:.10g}"


def write_csv(path, columns, data, comments=()):
    """Comma-separated table with '#'-prefixed comment lines and a '#'-prefixed column header."""
    data = [np.asarray(c) for c in data]
    n = len(data[0]) if data else 0
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("# " + ",".join(columns) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(c[i]) for c in data) + "\n")


def read_csv(path):
    """Returns (column names, float array (rows, columns), comment lines)."""
    comments, rows = [], []
    with open(path) as fh:
        for line in fh:
            s = line.rstrip("\n")
            if s.startswith("#"):
                comments.append(s[1:].strip())
            elif s.strip():
                rows.append([float(v) for v in s.split(",")])
    columns = comments.pop().split(",") if comments else []
    return columns, np.array(rows, dtype=float).reshape(-1, len(columns)), comments


def _clean(obj, digits):
    if isinstance(obj, dict):
        return {str(k): _clean(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(f"{v:.{digits}g}")
    return obj


def dumps_summary(obj, digits=10):
    """Deterministic JSON: sorted keys, floats rounded to ``digits`` significant figures, NaN -> null."""
    return json.dumps(_clean(obj, digits), sort_keys=True, indent=2) + "\n"
