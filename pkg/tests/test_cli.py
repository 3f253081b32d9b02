import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from blochtorus.cli import CURVE_HEADER, DISPERSION_HEADER, SUMMARY_KEYS, main, resolve_threads


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


MATHIEU_1D = {
    "task": "dispersion",
    "lattice": {"dim": 1, "nmax": 16},
    "potential": {"kind": "mathieu", "a": 1.0},
    "dispersion": {"kappa": {"start": [-np.pi], "stop": [np.pi], "count": 64}, "bands": 4},
}


def test_dispersion_table(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, MATHIEU_1D)), "--output", str(out)]) == 0
    header, rows = _read_csv(out / "dispersion.csv")
    assert tuple(header) == DISPERSION_HEADER
    assert len(rows) == 64 * 4
    summary = json.loads((out / "summary.json").read_text())
    assert tuple(sorted(summary)) == tuple(sorted(SUMMARY_KEYS))
    assert summary["task"] == "dispersion" and summary["failures"] == []
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["threads"] == 1


def test_repeated_runs_bit_identical(tmp_path):
    cfg = _write(tmp_path, MATHIEU_1D)
    main(["run", str(cfg), "--output", str(tmp_path / "a")])
    main(["run", str(cfg), "--output", str(tmp_path / "b")])
    assert (tmp_path / "a" / "dispersion.csv").read_bytes() == (tmp_path / "b" / "dispersion.csv").read_bytes()


def test_threads_do_not_change_results(tmp_path):
    cfg = dict(MATHIEU_1D, lattice={"dim": 2, "nmax": 3}, potential={"kind": "cos2d", "a": 1.0, "b": 0.5})
    cfg["dispersion"] = {"kappa": {"start": [-3.0, -3.0], "stop": [3.0, 2.0], "count": 8}, "bands": 3}
    p = _write(tmp_path, cfg)
    main(["run", str(p), "--output", str(tmp_path / "t1"), "--threads", "1"])
    main(["run", str(p), "--output", str(tmp_path / "t4"), "--threads", "4"])
    _, a = _read_csv(tmp_path / "t1" / "dispersion.csv")
    _, b = _read_csv(tmp_path / "t4" / "dispersion.csv")
    assert sorted(a) == sorted(b)


def test_threads_precedence(monkeypatch):
    monkeypatch.setenv("BLOCH_THREADS", "3")
    assert resolve_threads(None, 1) == 3
    assert resolve_threads(2, 1) == 2
    monkeypatch.delenv("BLOCH_THREADS")
    assert resolve_threads(None, 5) == 5


@pytest.mark.parametrize(
    "bad",
    [
        {"task": "dispersion", "lattice": {"dim": 1, "nmax": 4}, "bogus": 1},
        {"task": "nope"},
        {"task": "dispersion", "lattice": {"dim": 1, "nmax": 8, "grid_size": 16}},
        {"task": "dirac-curve", "lattice": {"dim": 1}},
    ],
)
def test_malformed_config_exit_2(tmp_path, bad):
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, bad)), "--output", str(out)]) == 2
    assert not out.exists()


def test_missing_config_is_io_error(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 4


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", str(_write(tmp_path, MATHIEU_1D)), "--output", str(blocker / "sub")]) == 4


def test_yaml_config(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("task: willmore\nlattice: {dim: 2, nmax: 2}\npotential: {kind: constant, c: 1.5}\n")
    out = tmp_path / "out"
    assert main(["run", str(p), "--output", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["willmore_direct"] == pytest.approx(9.0, rel=1e-14)


def test_curve_and_fit(tmp_path):
    cfg = {
        "task": "fit-c0",
        "lattice": {"nmax": 3},
        "potential": {"kind": "constant", "c": 1.0},
        "curve": {"branch": "+", "steps": 8},
    }
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, cfg)), "--output", str(out)]) == 0
    header, rows = _read_csv(out / "curve.csv")
    assert tuple(header) == CURVE_HEADER and len(rows) == 8
    summary = json.loads((out / "summary.json").read_text())
    assert abs(summary["c0_fitted"]["re"] + 1.0) < 1e-8
    assert summary["c0_integral"] == pytest.approx(-1.0)
    assert (out / "fit.json").exists()


def test_weierstrass_task(tmp_path):
    cfg = {"task": "weierstrass", "lattice": {"nmax": 4}, "potential": {"kind": "constant", "c": 1.5707963267948966}}
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, cfg)), "--output", str(out)]) == 0
    assert (out / "mesh.obj").exists() and (out / "mesh.json").exists()


def test_verify_passes_resolved(tmp_path, capsys):
    cfg = {"task": "dispersion", "lattice": {"dim": 1, "nmax": 16}, "potential": {"kind": "mathieu", "a": 1.0}}
    out = tmp_path / "out"
    assert main(["verify", str(_write(tmp_path, cfg)), "--output", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["failures"] == []
    assert "convergence-bands" in capsys.readouterr().out


def test_verify_detects_under_resolution(tmp_path):
    cfg = {"task": "dispersion", "lattice": {"dim": 1, "nmax": 2}, "potential": {"kind": "mathieu", "a": 3.0}}
    out = tmp_path / "out"
    assert main(["verify", str(_write(tmp_path, cfg)), "--output", str(out)]) == 3
    report = json.loads((out / "report.json").read_text())
    assert "convergence-bands" in report["failures"]


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "blochtorus", "--version"], capture_output=True, text=True,
                       env={**os.environ})
    assert r.returncode == 0 and "blochtorus" in r.stdout
