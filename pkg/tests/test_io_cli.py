import json
from pathlib import Path

import numpy as np
import pytest

from openpath import __version__
from openpath.cli import main, read_config
from openpath.errors import DataError, UsageError
from openpath.estimator import EndToEndSampleSet, PrincipalSpectrum
from openpath.io import (dumps_summary, is_spectrum_file, read_csv, read_samples, read_spectrum, write_csv,
                         write_samples, write_spectrum)

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).with_name("golden") / "fit_summary.json"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def assert_same_tree(a, b, path="$"):
    assert type(a) is type(b) or {type(a), type(b)} <= {int, float}, path
    if isinstance(a, dict):
        assert sorted(a) == sorted(b), path
        for k in a:
            assert_same_tree(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            assert_same_tree(x, y, f"{path}[{i}]")
    elif isinstance(a, float):
        assert a == pytest.approx(b, rel=1e-8, abs=1e-12), path
    else:
        assert a == b, path


def test_fit_matches_golden(capsys, monkeypatch):
    monkeypatch.chdir(ROOT)
    code, out, err = run(capsys, "fit", "--in", "data/samples_example.txt", "--temp", "269", "--mass", "1.0073")
    assert code == 0
    got, want = json.loads(out), json.loads(GOLDEN.read_text())
    want["version"] = __version__
    assert_same_tree(got, want)
    assert "threads: 1" in err


def test_every_number_has_a_unit(capsys, monkeypatch):
    monkeypatch.chdir(ROOT)
    _, out, _ = run(capsys, "spherical", "--in", "data/picpmd_spectrum.txt", "--grid", "1.0,64")
    res = json.loads(out)["results"]

    def walk(node):
        if isinstance(node, dict):
            if set(node) == {"unit", "value"}:
                return
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)
        else:
            assert not isinstance(node, (int, float)) or isinstance(node, bool), node

    walk(res)


@pytest.mark.parametrize("argv, code", [
    (["fit", "--bogus"], 2),
    (["nonsense"], 2),
    (["fit"], 2),
    (["fit", "--in", "missing.txt", "--temp", "269"], 3),
    (["isotropic", "--omega", "1,2", "--temp", "269"], 2),
    (["simulate", "--potential", "nope", "--temp", "269"], 2),
    (["spherical", "--omega", "9e6,1000,800", "--temp", "269"], 4),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_data_error_on_malformed_input(capsys, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# temperature_K 269\n0 0.1 0.2\n")
    code, _, err = run(capsys, "fit", "--in", str(p))
    assert code == 3
    assert "expected 'proton_id x y z'" in err


def test_empty_input_gives_valid_summary(capsys, tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("# temperature_K 269\n")
    code, out, _ = run(capsys, "fit", "--in", str(p), "--out", str(tmp_path / "o"))
    assert code == 0
    res = json.loads(out)["results"]
    assert res["n_samples"] == {"unit": "1", "value": 0}
    cols, data, comments = read_csv(tmp_path / "o" / "spectra.csv")
    assert data.shape == (0, 17) and cols[0] == "proton_id"


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# isotropic run\nomega = 2639,1164,775\ntemp=269\nmethod = least-squares\n")
    _, out, _ = run(capsys, "isotropic", "--config", str(cfg))
    s = json.loads(out)
    assert list(s["results"]["fits"]) == ["least-squares"]
    assert s["config"]["temp"] == 269.0
    _, out, _ = run(capsys, "isotropic", "--config", str(cfg), "--method", "moment-match")
    assert list(json.loads(out)["results"]["fits"]) == ["moment-match"]
    cfg.write_text("colour = blue\n")
    with pytest.raises(UsageError):
        read_config(cfg)
    assert run(capsys, "isotropic", "--config", str(cfg))[0] == 2
    assert run(capsys, "isotropic", "--config", str(tmp_path / "none.cfg"))[0] == 3


def test_threads_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("OPENPATH_THREADS", "3")
    _, _, err = run(capsys, "isotropic", "--omega", "2639,1164,775", "--temp", "269")
    assert "threads: 3" in err
    _, _, err = run(capsys, "isotropic", "--omega", "2639,1164,775", "--temp", "269", "--threads", "2")
    assert "threads: 2" in err
    monkeypatch.setenv("OPENPATH_THREADS", "many")
    assert run(capsys, "isotropic", "--omega", "2639,1164,775", "--temp", "269")[0] == 2


def test_directional_writes_grid_and_sidecar(capsys, tmp_path):
    out = tmp_path / "d"
    code, text, _ = run(capsys, "directional", "--omega", "2639,1164,775", "--temp", "269", "--grid", "0.4,17",
                        "--out", str(out))
    assert code == 0
    cols, data, comments = read_csv(out / "grid.csv")
    assert cols == ["x_A", "y_A", "log10_nV"] and data.shape == (17 * 17, 3)
    meta = json.loads((out / "grid_meta.json").read_text())
    assert meta["resolution"] == 17
    s = json.loads(text)
    assert s["artifacts"] == ["grid.csv", "grid_meta.json"]
    assert (out / "summary.json").read_text() == text


def test_phonon_commands(capsys, monkeypatch):
    monkeypatch.chdir(ROOT)
    code, out, _ = run(capsys, "phonon-hessian", "--in", "data/water_ring_hessian.txt")
    assert code == 0
    assert json.loads(out)["results"]["n_acoustic"]["value"] == 3
    code, out, _ = run(capsys, "population", "--in", "data/water_ring_hessian.txt", "--temp", "269")
    assert code == 0
    comp = json.loads(out)["results"]["completeness"]["value"]
    assert np.allclose(comp, 1.0, atol=1e-9)
    code, out, _ = run(capsys, "phonon-momenta", "--in", "data/water_ring_hessian.txt", "--temp", "269")
    assert code == 0


def test_simulate_and_oracle(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--potential", "harmonic-exact", "--omega", "2639,1164,775",
                       "--temp", "269", "--samples", "500", "--out", str(tmp_path))
    assert code == 0
    s = read_samples(tmp_path / "samples.txt")
    assert len(s) == 500 and s.temperature == 269.0
    code, out, _ = run(capsys, "oracle1d", "--potential", "harmonic1D", "--params", "1500", "--temp", "269")
    assert code == 0
    assert json.loads(out)["results"]["effective_omega"]["value"] == pytest.approx(1500.0, rel=1e-7)


def test_fit_potential_on_simulated_chain(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--potential", "harmonic1D", "--params", "1500", "--temp", "269",
                       "--beads", "16", "--samples", "4000", "--seed", "3", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "midpoints.txt").exists()
    # 1D samples have a singular correlation matrix; the fit axis comes from its live direction
    code, out, _ = run(capsys, "fit-potential", "--in", str(tmp_path / "samples.txt"), "--positions",
                       str(tmp_path / "midpoints.txt"), "--free", "c2", "--bootstrap", "2")
    assert code == 0
    fit = json.loads(out)["results"]["fit"]
    assert fit["converged"]
    assert fit["effective_omega"]["value"] == pytest.approx(1500.0, rel=0.1)


def test_sample_file_round_trip(tmp_path, rng):
    s = EndToEndSampleSet(np.arange(5) % 2, rng.normal(size=(5, 3)), 269.0, 2.014)
    p = tmp_path / "s.txt"
    write_samples(p, s, ["note"])
    r = read_samples(p)
    assert np.allclose(r.x, s.x, rtol=1e-9) and r.mass == 2.014
    assert np.array_equal(r.proton_ids, s.proton_ids)
    p.write_text("0 0 0 0\n")
    with pytest.raises(DataError, match="temperature"):
        read_samples(p)
    p.write_text("# temperature_K 269\n0 inf 0 0\n")
    with pytest.raises(DataError):
        read_samples(p)


def test_spectrum_file_round_trip(tmp_path):
    spec = PrincipalSpectrum.from_omega([2639.0, 1164.0, 775.0], 269.0)
    p = tmp_path / "spec.txt"
    write_spectrum(p, spec)
    assert is_spectrum_file(p)
    r = read_spectrum(p)
    assert np.allclose(r.omega, spec.omega) and np.allclose(r.sigma2, spec.sigma2, rtol=1e-9)
    p.write_text("# openpath spectrum\n# temperature_K 269\n1000 1 0 0\n900 1 0 0\n800 0 0 1\n")
    with pytest.raises(DataError, match="orthonormal"):
        read_spectrum(p)


def test_summary_is_deterministic():
    a = dumps_summary({"b": np.float64(1 / 3), "a": [np.nan, np.int64(2), True]})
    assert a == dumps_summary({"a": [float("nan"), 2, True], "b": 1 / 3})
    assert json.loads(a) == {"a": [None, 2, True], "b": 0.3333333333}


def test_csv_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["a", "b"], [[1, 2], [0.5, np.nan]], ["hello"])
    cols, data, comments = read_csv(p)
    assert cols == ["a", "b"] and comments == ["hello"]
    assert data[0, 1] == 0.5 and np.isnan(data[1, 1])
