import csv
import json
import math
import os
import subprocess
import sys

import pytest

from hilltrunc.cli import UsageError, parse_config, run

FREE = "model = FreeParticle\nperiod = 1\n"
KP = "# Kronig-Penney test cell\nmodel = KronigPenney\nperiod = 1\nbarrier_height = 10\nbarrier_width = 0.5\n"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "free.cfg").write_text(FREE)
    (tmp_path / "kp.cfg").write_text(KP)
    return tmp_path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_band_states_example(workdir, capsys):
    assert run(["band-states", "free.cfg", "--band", "0", "--cells", "4"]) == 0
    rows = _rows("band-states.csv")
    assert rows[0] == ["j", "lambda"]
    want = [math.pi ** 2 / 16, math.pi ** 2 / 4, 9 * math.pi ** 2 / 16]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx(want, rel=1e-12)
    assert "3 states" in capsys.readouterr().out


def test_discriminant_scan_example(workdir):
    assert run(["discriminant-scan", "free.cfg", "--lmin", "-1", "--lmax", "0", "--points", "2"]) == 0
    rows = _rows("discriminant-scan.csv")
    assert rows[0] == ["lambda", "D"]
    assert float(rows[1][0]) == -1.0 and float(rows[1][1]) == pytest.approx(2 * math.cosh(1))
    assert float(rows[2][1]) == 2.0


def test_floats_round_trip_exactly(workdir):
    from hilltrunc.coeffs import FreeParticle, PeriodicCoefficients
    from hilltrunc.truncated import band_states

    run(["band-states", "free.cfg", "--band", "0", "--cells", "4"])
    written = [float(r[1]) for r in _rows("band-states.csv")[1:]]
    assert written == [s.lam for s in band_states(PeriodicCoefficients(1.0, FreeParticle()), 0, 4)]


def test_oracle_check_passes(workdir):
    code = run(["oracle-check", "kp.cfg", "--tau", "0", "--cells", "8", "--bands", "3",
                "--format", "json"])
    assert code == 0
    doc = json.loads(open("oracle-check.json").read())
    assert doc["status"] == "PASS"
    assert doc["worst_rel_err"] < 1e-4
    assert doc["n_predicted"] == doc["n_oracle"] == 23
    assert len(doc["meta"]["model_hash"]) == 64


def test_oracle_check_fail_exit_code(workdir):
    # an impossible tolerance forces FAIL
    code = run(["oracle-check", "kp.cfg", "--cells", "2", "--bands", "1", "--gridsize", "128",
                "--no-richardson", "--rel-tol", "1e-12"])
    assert code == 3


def test_spectrum_and_sweep_schemas(workdir):
    assert run(["spectrum", "kp.cfg", "--tau", "0.3", "--cells", "3", "--bands", "2"]) == 0
    rows = _rows("spectrum.csv")
    assert rows[0] == ["lambda", "type", "band_or_gap_index", "j_or_subtype", "rho_or_blank"]
    gap_rows = [r for r in rows[1:] if r[1] == "gap"]
    assert len(gap_rows) == 1 and gap_rows[0][3] == "SurfaceLeft" and gap_rows[0][4]
    assert all(r[4] == "" for r in rows[1:] if r[1] == "band")

    assert run(["tau-sweep", "kp.cfg", "--gap", "0", "--points", "64"]) == 0
    rows = _rows("tau-sweep.csv")
    assert rows[0] == ["tau", "lambda", "subtype"] and len(rows) == 65

    assert run(["band-edges", "kp.cfg", "--gaps", "2"]) == 0
    rows = _rows("band-edges.csv")
    assert rows[0] == ["index", "kind", "lambda", "degenerate"]
    assert [r[1] for r in rows[1:]] == ["nu", "mu", "mu", "nu", "nu"]


def test_json_round_trip(workdir):
    for argv in (["band-edges", "kp.cfg", "--gaps", "2"],
                 ["gap-states", "kp.cfg", "--gap", "1", "--tau", "0.1"],
                 ["tau-sweep", "kp.cfg", "--gap", "0", "--points", "64"],
                 ["validate", "kp.cfg"]):
        assert run(argv + ["--format", "json", "--output", "out.json"]) == 0
        doc = json.loads(open("out.json").read())
        assert set(doc) >= {"meta", "records"}
        assert doc["meta"]["model"]["model"] == "KronigPenney"


def test_eigenfunction_command(workdir):
    assert run(["gap-states", "kp.cfg", "--gap", "0", "--tau", "0.3", "--format", "json"]) == 0
    lam = json.loads(open("gap-states.json").read())["records"][0]["lambda"]
    assert run(["eigenfunction", "kp.cfg", "--lambda", repr(lam), "--tau", "0.3", "--cells", "4",
                "--grid-per-cell", "32"]) == 0
    rows = _rows("eigenfunction.csv")
    assert rows[0] == ["x", "y", "py"] and len(rows) == 4 * 32 + 2
    assert run(["eigenfunction", "kp.cfg", "--lambda", "14", "--cells", "4"]) == 2


def test_usage_errors_exit_one(workdir, capsys):
    assert run(["band-states", "free.cfg", "--band", "-1", "--cells", "4"]) == 1
    assert "'band'" in capsys.readouterr().err
    assert run(["band-states", "free.cfg", "--bogus", "1"]) == 1
    assert run(["band-states", "missing.cfg", "--band", "0", "--cells", "2"]) == 1
    assert run(["oracle-check", "kp.cfg", "--cells", "3", "--gridsize", "200"]) == 1
    assert "'gridsize'" in capsys.readouterr().err
    assert run(["discriminant-scan", "kp.cfg", "--lmin", "2", "--lmax", "1"]) == 1


def test_validation_error_exit_one(workdir):
    (workdir / "bad.cfg").write_text("model = PiecewiseConstant\nperiod = 1\n"
                                     "segment = 0.5, 1, 0, 1\nsegment = 0.5, 0, 0, 1\n")
    assert run(["validate", "bad.cfg"]) == 1
    assert run(["spectrum", "bad.cfg", "--cells", "2"]) == 1


@pytest.mark.parametrize("text, field", [
    ("period = 1\n", "model"),
    ("model = Foo\nperiod = 1\n", "model"),
    ("model = KronigPenney\nperiod = 1\nbarrier_height = 1\n", "barrier_width"),
    ("model = FreeParticle\nperiod = x\n", "period"),
    ("model = FreeParticle\nperiod = 1\namplitude = 2\n", "amplitude"),
    ("model = PiecewiseConstant\nperiod = 1\nsegment = 1,1,0\n", "segment"),
    ("model = FreeParticle\nperiod\n", "key = value"),
    ("model = FreeParticle\nperiod = 1\nperiod = 2\n", "period"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(UsageError, match=field):
        parse_config(text)


def test_piecewise_config():
    coeffs, record = parse_config("model = PiecewiseConstant  # three pieces\nperiod = 2\n"
                                  "segment = 0.7, 1, 2, 1\nsegment = 0.8,2.5,-1,0.5\n"
                                  "segment = 0.5, 0.8, 4, 1.5\n\n")
    assert coeffs.period_a == 2.0
    assert len(coeffs.segments) == 3 and coeffs.segments[1].p == 2.5
    assert record["segments"][2] == [0.5, 0.8, 4.0, 1.5]


def test_artifacts_identical_across_thread_counts(workdir):
    outputs = []
    for threads in ("1", "4"):
        env = dict(os.environ, HILL_THREADS=threads)
        subprocess.run([sys.executable, "-m", "hilltrunc", "spectrum", "kp.cfg", "--cells", "5",
                        "--bands", "3", "--tau", "0.13", "--format", "json", "--output", f"s{threads}.json"],
                       env=env, check=True, capture_output=True)
        outputs.append((workdir / f"s{threads}.json").read_bytes())
    assert outputs[0] == outputs[1]
