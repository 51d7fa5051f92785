import csv
import json

import numpy as np
import pytest

from spraygeom import cli


def _run(tmp_path, experiment, cfg=None, *extra):
    argv = [experiment, "--out", str(tmp_path / "rep")]
    if cfg is not None:
        path = tmp_path / "cfg.json"
        path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
        argv += ["--config", str(path)]
    code = cli.main(argv + list(extra))
    report = tmp_path / "rep.json"
    return code, (json.loads(report.read_text()) if report.exists() else None)


def test_inspect_euclidean_values(tmp_path, capsys):
    cfg = {"model": "euclidean", "dim": 2, "points": [{"x": [0, 0], "y": [3, 4]}]}
    code, rep = _run(tmp_path, "inspect", cfg)
    assert code == 0 and rep["all_pass"] and rep["n_points"] == 1
    v = rep["values"][0]
    assert v["F"] == 5.0 and v["g"] == [[1.0, 0.0], [0.0, 1.0]]
    assert v["G"] == [0.0, 0.0] and v["N"] == [[0.0, 0.0], [0.0, 0.0]]
    assert v["jacobi"] == [[0.0, 0.0], [0.0, 0.0]]
    np.testing.assert_allclose(v["h_mixed"], np.array([[16, -12], [-12, 9]]) / 25.0, atol=1e-15)
    assert "PASS" in capsys.readouterr().out


def test_report_schema(tmp_path):
    cfg = {"experiment": "verify_identities", "model": "hyperbolic", "dim": 2, "sampler": {"count": 4, "seed": 3}}
    code, rep = _run(tmp_path, "verify", cfg)
    assert code == 0 and rep["experiment"] == "verify"
    assert {"experiment", "model", "config", "n_points", "checks", "all_pass"} <= set(rep)
    assert rep["model"]["known_flag_curvature"] == -1.0
    for c in rep["checks"]:
        assert set(c) == {"name", "paper_anchor", "value", "tolerance", "bound", "pass"}
        assert c["pass"] is True


def test_holonomy_deformed_euclidean_contains_liouville(tmp_path):
    cfg = {"model": "euclidean", "dim": 2, "lambdas": [1.0], "sampler": {"count": 3, "seed": 1}}
    code, rep = _run(tmp_path, "holonomy", cfg)
    assert code == 0
    assert all(r["contains_liouville"] for r in rep["holonomy"]["lambda=1"])
    assert not any(r["contains_liouville"] for r in rep["holonomy"]["base"])


def test_deform_lambda_range(tmp_path):
    cfg = {"model": "hyperbolic", "dim": 2, "lambdas": {"start": 0.5, "stop": 1.5, "num": 3},
           "sampler": {"count": 3, "seed": 0}}
    code, rep = _run(tmp_path, "deform", cfg)
    assert code == 0 and rep["config"]["lambdas"] == [0.5, 1.0, 1.5]


@pytest.mark.parametrize("cfg", [
    "{not json",
    {"model": "euclidean", "colour": "red"},
    {"model": "funk"},
    {"sampler": {"count": 3}},
    {"experiment": "verify"},
    {"dim": 1},
    {"tolerances": {"no_such_check": 1.0}},
    {"lambdas": {"start": 0.0}},
    {"points": [{"x": [0, 0]}]},
    {"model": "hyperbolic", "points": [{"x": [0, -1], "y": [1, 0]}]},
])
def test_bad_configs_exit_2(tmp_path, cfg, capsys):
    code, rep = _run(tmp_path, "inspect", cfg)
    assert code == 2 and rep is None
    assert capsys.readouterr().err.startswith("error:")


def test_failing_tolerance_exits_1(tmp_path, capsys):
    cfg = {"model": "hyperbolic", "dim": 2, "sampler": {"count": 3, "seed": 0},
           "tolerances": {"metric_positive": 1e6}}
    code, rep = _run(tmp_path, "inspect", cfg)
    assert code == 1 and not rep["all_pass"]
    assert "FAIL  metric_positive" in capsys.readouterr().out


def test_seed_override(tmp_path):
    cfg = {"model": "hyperbolic", "dim": 2, "sampler": {"count": 2, "seed": 0}}
    _, a = _run(tmp_path, "inspect", cfg, "--seed", "7")
    assert a["config"]["sampler"]["seed"] == 7
    _, b = _run(tmp_path, "inspect", cfg)
    assert a["values"][0]["x"] != b["values"][0]["x"]
    assert cli.main(["inspect", "--seed", "-1", "--out", str(tmp_path / "x")]) == 2


def test_reports_are_byte_identical(tmp_path):
    cfg = {"model": "randers", "dim": 2, "sampler": {"count": 3, "seed": 5}}
    blobs = []
    for _ in range(2):
        _run(tmp_path, "deform", cfg)
        blobs.append((tmp_path / "rep.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_geodesic_and_reparam_outputs(tmp_path):
    cfg = {"model": "hyperbolic", "dim": 2, "lambdas": [0.5],
           "geodesic": {"x0": [0.0, 1.0], "v0": [1.0, 0.5], "t_end": 0.5, "steps": 200, "compare_steps": 400}}
    code, rep = _run(tmp_path, "geodesic", cfg)
    assert code == 0, rep["checks"]
    rows = list(csv.reader(open(tmp_path / "rep_geodesic_lambda0.5.csv")))
    assert rows[0] == ["t", "x1", "x2", "v1", "v2"] and len(rows) == 202
    assert (tmp_path / "rep_geodesic_base.csv").exists()
    code, rep = _run(tmp_path, "reparam", dict(cfg, experiment="reparam"))
    assert code == 0
    rows = list(csv.reader(open(tmp_path / "rep_reparam_lambda0.5.csv")))
    assert rows[0] == ["t", "ttilde", "dttilde"]
    assert float(rows[-1][2]) == pytest.approx(np.exp(0.5), rel=1e-6)
    assert rep["closed_form_reparam"][0]["residual_at_t0"] == -1.0


def test_dumps_is_deterministic_and_exact():
    s = cli.dumps({"a": 0.1, "b": [1, float("nan")], "c": np.float64(1 / 3)})
    d = json.loads(s)
    assert d["a"] == 0.1 and d["b"] == [1, "nan"] and d["c"] == 1 / 3
