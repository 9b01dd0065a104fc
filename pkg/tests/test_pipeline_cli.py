import csv
import json

import numpy as np
import pytest

from aniso_levels import cli, pipeline
from aniso_levels.errors import ConfigError
from aniso_levels.grid import read_wavefunction
from aniso_levels.pipeline import SCHEMA_VERSION, analyse, dumps, parse_config, violated

HO2 = {"dimension": 2, "family": "anisotropic_harmonic", "parameters": {"omega": [1, 2]},
       "symmetry": "D2(2d)", "radial": {"r_max": 10}, "grid": {"L": 7, "n": 48}}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def strip_timings(obj):
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k != "timings"}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


@pytest.fixture(scope="module")
def ho2_report():
    return analyse(parse_config(HO2))


def test_report_schema(ho2_report):
    r = ho2_report
    assert r["schema_version"] == SCHEMA_VERSION
    for key in ("spec", "parameters", "isotropic", "full", "variational", "symmetry",
                "perturbation", "verdicts", "flags", "timings"):
        assert key in r
    assert r["verdicts"]["ground"]["status"] == "holds"
    assert r["verdicts"]["excited"]["status"] == "holds"
    assert r["verdicts"]["bound_state_exists"]["verdict"] == "true"
    assert not r["flags"]["bug"]
    assert not violated(r)


def test_numbers_carry_error_or_tolerance(ho2_report):
    for block in (ho2_report["full"]["E0"], ho2_report["isotropic"]["E0bar"]):
        assert set(block) == {"value", "error"}
    trace = ho2_report["variational"]["coupling_matrix"]["trace"]
    assert set(trace) == {"value", "tolerance"}


def test_parse_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        parse_config({**HO2, "bogus": 1})
    with pytest.raises(ConfigError):
        parse_config({**HO2, "grid": {"L": 7, "nn": 3}})


def test_parse_rejects_bad_values():
    with pytest.raises(ConfigError):
        parse_config({**HO2, "grid": {"L": -1}})
    with pytest.raises(ConfigError):
        parse_config({**HO2, "symmetry": "Oh"})  # 3D tag on a 2D spec
    with pytest.raises(ConfigError):
        parse_config({**HO2, "symmetry": "nonsense"})


def test_violated_helper():
    assert violated({"verdicts": {"ground": {"status": "violated"}, "excited": {"status": "holds"}}})
    assert violated({"verdicts": {"ground": {"status": "holds"}, "excited": {"status": "violated"}}})
    assert not violated({"verdicts": {"ground": {"status": "inconclusive"},
                                      "excited": {"status": "not_applicable"}}})


def test_dumps_sorted_and_stable(ho2_report):
    text = dumps(ho2_report)
    assert text.endswith("\n")
    assert json.loads(text) == json.loads(dumps(json.loads(text)))


def test_verify_exit_zero_and_out(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["verify", "--config", write(tmp_path, HO2), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert abs(report["full"]["E0"]["value"] - 1.5) < 5e-3


def test_verify_overrides(tmp_path):
    out = tmp_path / "r.json"
    cli.main(["verify", "--config", write(tmp_path, HO2), "--out", str(out),
              "--grid-n", "40", "--grid-L", "6.5", "--seed", "9"])
    p = json.loads(out.read_text())["parameters"]
    assert p["grid"]["n"] == 40 and p["grid"]["L"] == 6.5 and p["seed"] == 9


def test_verify_config_error_exit_two(tmp_path, capsys):
    assert cli.main(["verify", "--config", write(tmp_path, {**HO2, "bogus": 1})]) == 2
    assert "error" in capsys.readouterr().err
    assert cli.main(["verify", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["verify", "--config", str(bad)]) == 2


def test_verify_nonconvergence_exit_three(tmp_path):
    out = tmp_path / "r.json"
    cfg = {**HO2, "grid": {"L": 7, "n": 48, "tol": 1e-30}}
    assert cli.main(["verify", "--config", write(tmp_path, cfg), "--out", str(out)]) == 3
    partial = json.loads(out.read_text())
    assert partial["schema_version"] == SCHEMA_VERSION
    assert "isotropic" in partial


def test_verify_violation_exit_one(tmp_path, monkeypatch):
    fake = {"verdicts": {"ground": {"status": "violated"}, "excited": {"status": "holds"}}}
    monkeypatch.setattr(cli, "analyse", lambda cfg, dump_dir=None: fake)
    assert cli.main(["verify", "--config", write(tmp_path, HO2), "--out", str(tmp_path / "r.json")]) == 1


def test_wavefunction_dump(tmp_path):
    dump = tmp_path / "wf"
    cli.main(["verify", "--config", write(tmp_path, HO2), "--out", str(tmp_path / "r.json"),
              "--dump-wavefunctions", str(dump)])
    raw = (dump / "psi0.bin").read_bytes()
    header, _, body = raw.partition(b"\n")
    assert header == b"dims: 48 48"
    assert len(body) == 48 * 48 * 8
    psi = read_wavefunction(dump / "psi0.bin")
    assert psi.shape == (48, 48)
    np.testing.assert_array_equal(psi.ravel(), np.frombuffer(body, dtype="<f8"))
    assert (dump / "psi1.bin").exists()


def test_average_csv(tmp_path):
    cfg = {"dimension": 3, "family": "anisotropic_harmonic", "parameters": {"omega": [1, 1, 2]}}
    out = tmp_path / "avg.csv"
    assert cli.main(["average", "--config", write(tmp_path, cfg), "--radii", "0:2:5", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["r"]) for r in rows] == [0.0, 0.5, 1.0, 1.5, 2.0]
    at_one = next(r for r in rows if float(r["r"]) == 1.0)
    assert abs(float(at_one["vbar"]) - 1.0) < 1e-12
    assert max(float(r["residual"]) for r in rows) <= 1e-9


def test_average_isotropic_matches_potential(tmp_path):
    cfg = {"dimension": 3, "family": "anisotropic_harmonic", "parameters": {"omega": [1.5, 1.5, 1.5]}}
    out = tmp_path / "avg.csv"
    cli.main(["average", "--config", write(tmp_path, cfg), "--radii", "0.3,1,2.5", "--out", str(out)])
    for row in csv.DictReader(out.open()):
        r = float(row["r"])
        assert abs(float(row["vbar"]) - 0.5 * 1.5**2 * r**2) < 1e-12


def test_average_bad_radii(tmp_path):
    cfg = {"dimension": 3, "family": "anisotropic_harmonic", "parameters": {"omega": [1, 1, 2]}}
    assert cli.main(["average", "--config", write(tmp_path, cfg), "--radii", "a,b"]) == 2
    assert cli.main(["average", "--config", write(tmp_path, cfg), "--radii=-1,2"]) == 2


def test_scan_empty(tmp_path):
    out = tmp_path / "scan"
    assert cli.main(["scan", "--out", str(out), "--count", "0", "--seed", "42"]) == 0
    assert not list(out.glob("report_*.json"))
    lines = (out / "summary.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("index,")


def test_scan_config_errors(tmp_path):
    out = str(tmp_path / "scan")
    assert cli.main(["scan", "--out", out, "--config", write(tmp_path, {"count": -1})]) == 2
    assert cli.main(["scan", "--out", out, "--config", write(tmp_path, {"wells": 3})]) == 2
    assert cli.main(["scan", "--out", out, "--config", write(tmp_path, {"ranges": {"depth": [1, 0]}})]) == 2


SMALL_SCAN = {"dimension": 2, "count": 3, "radial": {"r_max": 10.0, "n_points": 1000},
              "grid": {"L": 6.0, "n": 40}}


def test_scan_jobs_do_not_change_output(tmp_path):
    cfg = write(tmp_path, SMALL_SCAN)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["scan", "--config", cfg, "--out", str(a), "--seed", "5", "--jobs", "1"]) == 0
    assert cli.main(["scan", "--config", cfg, "--out", str(b), "--seed", "5", "--jobs", "2"]) == 0
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    for fa in sorted(a.glob("report_*.json")):
        ra, rb = json.loads(fa.read_text()), json.loads((b / fa.name).read_text())
        assert strip_timings(ra) == strip_timings(rb)
    assert len(list(a.glob("report_*.json"))) == 3


def test_scan_violation_exit_one(tmp_path, monkeypatch):
    from aniso_levels import scan

    fake = {"verdicts": {"ground": {"status": "holds"}, "excited": {"status": "violated"}}}
    monkeypatch.setattr(scan, "_run_one", lambda config: (0, fake))
    assert cli.main(["scan", "--out", str(tmp_path / "s"), "--count", "2"]) == 1


def test_partial_report_attached(monkeypatch):
    cfg = parse_config({**HO2, "grid": {"L": 7, "n": 48, "tol": 1e-30}})
    with pytest.raises(pipeline.ConvergenceError) as info:
        analyse(cfg)
    assert info.value.partial["spec"]["family"] == "anisotropic_harmonic"
