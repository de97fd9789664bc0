import json
import subprocess
import sys

import numpy as np
import pytest

from vibronic_gbs import formats
from vibronic_gbs.cli import main
from vibronic_gbs.errors import ValidationError
from vibronic_gbs.vibronic import SO2_DUSCHINSKY, so2_anion


def so2_doc(T=650.0, **extra):
    mol = so2_anion()
    doc = {
        "schema_version": "1.0",
        "label": "SO2-",
        "omega_initial": mol.omega_initial.tolist(),
        "omega_final": mol.omega_final.tolist(),
        "duschinsky": mol.duschinsky.tolist(),
        "delta": mol.delta.tolist(),
        "temperature_K": T,
        "truncation": {"target_mass": 0.999},
        "bin_width_cm1": 10,
        "seed": 7,
    }
    doc.update(extra)
    return doc


def identity_doc():
    return {
        "omega_initial": [800.0, 300.0],
        "omega_final": [800.0, 300.0],
        "duschinsky": [[1.0, 0.0], [0.0, 1.0]],
        "delta": [0.0, 0.0],
        "temperature_K": 0.0,
    }


@pytest.fixture
def write_config(tmp_path):
    def _write(doc, name="job.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return _write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def sticks(path):
    meta, cols, rows = formats.read_csv(path)
    return meta, cols, np.array([float(r[0]) for r in rows]), np.array([float(r[1]) for r in rows])


# ---------------------------------------------------------------------------
# compile


def test_compile_so2_650K(tmp_path, write_config, capsys):
    code, out, _ = run(capsys, "compile", "--input", write_config(so2_doc()), "--output-dir", str(tmp_path))
    assert code == 0 and "circuit.json" in out
    doc = json.loads((tmp_path / "circuit.json").read_text())
    assert doc["schema_version"] == "1.0" and doc["kind"] == "circuit"
    assert np.allclose(doc["squeezing"][:4], [0.7419, 0.6701, 0.3932, 0.3080], atol=1e-3)
    assert np.allclose(doc["squeezing_db"], 10 * np.log10(np.exp(-2 * np.array(doc["squeezing"]))))
    assert np.array(doc["interferometer"]).shape == (4, 4, 2)
    assert set(doc["audit"]) >= {"X", "Y", "gamma", "gamma_prime"}


def test_compile_so2_0K_squeezing_below_1dB(tmp_path, write_config, capsys):
    code, _, _ = run(capsys, "compile", "--input", write_config(so2_doc()), "--temperature", "0", "--output-dir", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "circuit.json").read_text())
    assert np.all(np.abs(doc["squeezing_db"]) < 1)


def test_compile_identity_molecule(tmp_path, write_config, capsys):
    code, _, _ = run(capsys, "compile", "--input", write_config(identity_doc()), "--output-dir", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "circuit.json").read_text())
    assert doc["squeezing"] == [0.0] * 4
    assert np.array(doc["input_amplitudes"]).tolist() == [[0.0, 0.0]] * 4


# ---------------------------------------------------------------------------
# spectrum


def test_spectrum_files(tmp_path, write_config, capsys):
    code, _, _ = run(capsys, "spectrum", "--input", write_config(so2_doc()), "--output-dir", str(tmp_path))
    assert code == 0
    meta, cols, omega, prob = sticks(tmp_path / "sticks.csv")
    assert cols == ["omega_v_cm1", "probability", "m_pattern", "n_pattern"]
    assert float(meta["captured_mass"]) >= 0.999 and meta["n_max"] == "16"
    assert np.any(omega < 0)
    hmeta, hcols, rows = formats.read_csv(tmp_path / "histogram.csv")
    assert hcols == ["bin_center_cm1", "intensity"]
    centers = np.array([float(r[0]) for r in rows])
    intensity = np.array([float(r[1]) for r in rows])
    assert np.allclose(np.diff(centers), 10.0)
    assert intensity.sum() == pytest.approx(float(hmeta["captured_mass"]), abs=1e-12)


def test_spectrum_cold_has_no_hot_bands(tmp_path, write_config, capsys):
    code, _, _ = run(capsys, "spectrum", "--input", write_config(so2_doc(0.0)), "--output-dir", str(tmp_path))
    assert code == 0
    _, _, omega, prob = sticks(tmp_path / "sticks.csv")
    assert prob[omega < 0].sum() <= 1e-10


def test_spectrum_identity_single_stick(tmp_path, write_config, capsys):
    code, _, _ = run(capsys, "spectrum", "--input", write_config(identity_doc()), "--output-dir", str(tmp_path))
    assert code == 0
    _, _, omega, prob = sticks(tmp_path / "sticks.csv")
    big = prob > 1e-15
    assert omega[big].tolist() == [0.0] and prob[big][0] == pytest.approx(1.0)


def test_circuit_round_trip_is_bit_identical(tmp_path, write_config, capsys):
    cfg = write_config(so2_doc())
    direct, via = tmp_path / "direct", tmp_path / "via"
    assert run(capsys, "spectrum", "--input", cfg, "--output-dir", str(direct))[0] == 0
    assert run(capsys, "compile", "--input", cfg, "--output-dir", str(via))[0] == 0
    assert run(capsys, "spectrum", "--input", str(via / "circuit.json"), "--output-dir", str(via))[0] == 0
    for name in ("sticks.csv", "histogram.csv"):
        assert (direct / name).read_bytes() == (via / name).read_bytes()


def test_circuit_input_rejects_temperature_change(tmp_path, write_config, capsys):
    run(capsys, "compile", "--input", write_config(so2_doc()), "--output-dir", str(tmp_path))
    code, _, err = run(capsys, "spectrum", "--input", str(tmp_path / "circuit.json"), "--temperature", "300")
    assert code == 2 and json.loads(err)["error"] == "ValidationError"


def test_insufficient_truncation_exit_4(tmp_path, write_config, capsys):
    out = tmp_path / "out"
    code, stdout, err = run(capsys, "spectrum", "--input", write_config(so2_doc()), "--n-max", "2", "--output-dir", str(out))
    assert code == 4 and stdout == ""
    payload = json.loads(err)
    assert payload["error"] == "InsufficientTruncation" and payload["captured_mass"] < 0.999
    assert not out.exists()


def test_csv_formatting(tmp_path, write_config, capsys):
    run(capsys, "spectrum", "--input", write_config(so2_doc(300.0)), "--output-dir", str(tmp_path))
    raw = (tmp_path / "sticks.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    line = raw.decode().split("\n")[8]
    prob = line.split(",")[1]
    assert float(prob) == float("%.17g" % float(prob)) and prob == "%.17g" % float(prob)
    assert not list(tmp_path.glob(".*"))


# ---------------------------------------------------------------------------
# validate


def test_validate_so2_passes(write_config, capsys):
    code, out, _ = run(capsys, "validate", "--input", write_config(so2_doc()))
    assert code == 0
    lines = [line for line in out.splitlines() if line.startswith(("PASS", "FAIL"))]
    assert lines and all(line.startswith("PASS") for line in lines)


def test_validate_corrupted_rotation_fails(tmp_path, write_config, capsys):
    doc = so2_doc(duschinsky=[list(r) for r in SO2_DUSCHINSKY])
    code, out, _ = run(capsys, "validate", "--input", write_config(doc), "--output-dir", str(tmp_path))
    assert code == 1
    assert any(line.startswith("FAIL  duschinsky_orthogonality") for line in out.splitlines())
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["passed"] is False and report["schema_version"] == "1.0"


def test_negative_temperature_rejected_before_work(write_config, capsys):
    code, out, err = run(capsys, "validate", "--input", write_config(so2_doc(-10.0)))
    assert code == 2 and out == ""
    assert "temperature" in json.loads(err)["message"]


# ---------------------------------------------------------------------------
# sample


def test_sample_header_only_for_zero_count(tmp_path, write_config, capsys):
    code, _, _ = run(capsys, "sample", "--input", write_config(so2_doc(300.0)), "--count", "0", "--output-dir", str(tmp_path))
    assert code == 0
    meta, cols, rows = formats.read_csv(tmp_path / "samples.csv")
    assert rows == [] and cols == ["m_0", "m_1", "n_0", "n_1"] and meta["seed"] == "7"


def test_sample_is_byte_identical_per_seed(tmp_path, write_config, capsys):
    cfg = write_config(so2_doc(650.0))
    for name in ("a", "b"):
        assert run(capsys, "sample", "--input", cfg, "--count", "500", "--seed", "3", "--output-dir", str(tmp_path / name))[0] == 0
    assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()
    meta, _, rows = formats.read_csv(tmp_path / "a" / "samples.csv")
    assert meta["seed"] == "3" and len(rows) == 500


def test_sample_negative_count(write_config, capsys):
    assert run(capsys, "sample", "--input", write_config(so2_doc()), "--count", "-1")[0] == 2


# ---------------------------------------------------------------------------
# sweep


def test_sweep(tmp_path, write_config, capsys):
    code, _, _ = run(capsys, "sweep", "--input", write_config(so2_doc()), "--output-dir", str(tmp_path))
    assert code == 0
    _, cols, rows = formats.read_csv(tmp_path / "squeezing_sweep.csv")
    assert cols[0] == "temperature_K" and len(rows) == 14
    db = np.array([[float(x) for x in r[5:]] for r in rows])
    assert np.all(np.abs(db[0]) < 1) and np.all(np.abs(db[-1]) <= 6.5)


# ---------------------------------------------------------------------------
# config parsing


@pytest.mark.parametrize(
    "patch",
    [
        {"unexpected": 1},
        {"schema_version": "2.0"},
        {"truncation": {"n_max": 4, "bogus": 1}},
        {"truncation": {"n_max": 2.5}},
        {"tolerances": {"constraint": -1}},
        {"bin_width_cm1": 0},
        {"seed": "x"},
        {"omega_initial": [989.5]},
        {"temperature_K": "hot"},
    ],
)
def test_bad_configs_exit_2(patch, write_config, capsys):
    code, _, err = run(capsys, "compile", "--input", write_config(so2_doc(**patch)))
    assert code == 2
    assert json.loads(err)["exit_code"] == 2


def test_missing_and_malformed_input(tmp_path, capsys):
    assert run(capsys, "compile", "--input", str(tmp_path / "nope.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "compile", "--input", str(bad))[0] == 2


def test_overrides_and_tolerances():
    doc = formats.apply_overrides(so2_doc(), temperature=10.0, n_max=5, target_mass=0.5, tolerance=1e-8)
    cfg = formats.parse_config(doc)
    assert cfg.temperature == 10.0 and cfg.truncation.n_max == 5 and cfg.truncation.target_mass == 0.5
    assert cfg.tolerances.constraint == 1e-8 == cfg.tolerances.reconstruction
    again = formats.parse_config(cfg.to_json())
    assert again.to_json() == cfg.to_json()


def test_read_csv_rejects_other_major(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("# schema_version=2.1\na,b\n1,2\n")
    with pytest.raises(ValidationError):
        formats.read_csv(path)


def test_module_entry_point(tmp_path, write_config):
    proc = subprocess.run(
        [sys.executable, "-m", "vibronic_gbs", "compile", "--input", write_config(identity_doc()), "--output-dir", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and (tmp_path / "circuit.json").exists()
