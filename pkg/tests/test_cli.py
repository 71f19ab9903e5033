import csv
import json
import math

import numpy as np
import pytest

from remote_stability import cli
from remote_stability import stability_analysis as sa
from remote_stability.config import load


def run(argv):
    return cli.main([str(a) for a in argv])


@pytest.mark.parametrize("name, code", [
    ("example1_case_c", 0),
    ("theorem4_iid", 0),
    ("gilbert_elliott_stable", 0),
    ("serial_three_sensors", 0),
    ("all_off_unstable", 2),
])
def test_analyze_exit_codes(config_dir, tmp_path, name, code):
    assert run(["analyze", "--config", config_dir / f"{name}.json", "--out-dir", tmp_path]) == code
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["verdict"] == {0: "stable", 2: "unstable"}[code]


def test_exit_codes_cover_every_verdict():
    assert set(cli.EXIT_CODES) == set(sa.Verdict)
    assert sorted(cli.EXIT_CODES.values()) == [0, 2, 3]


def test_analyze_undecided_exit(tmp_path):
    # rho^2 strictly between 1/lambda_6 and 1/lower bound
    trans = [[0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1], [0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1]]
    labels = [[0, 0], [0, 1], [1, 0], [1, 1]]
    from remote_stability.channel_model import MarkovChannelModel
    ch = MarkovChannelModel(np.array(trans), np.array(labels, dtype=float))
    lo, hi = sa.lambda_lower_bound(ch), sa.lambda_search(ch, 6).lambda_min
    assert hi > lo
    a = math.sqrt(2.0 / (lo + hi))
    cfg = {"processes": [{"A": [[a]], "C": [[1.0]], "W": [[1.0]], "V": [[1.0]]}],
           "channel": {"type": "explicit", "states": labels, "transition": trans}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert run(["analyze", "--config", path, "--out-dir", tmp_path / "o"]) == 3


def test_rho_below_one_is_stable(tmp_path):
    cfg = {"processes": [{"A": [[0.5]], "C": [[1.0]], "W": [[1.0]], "V": [[1.0]]}],
           "channel": {"type": "explicit", "states": [[0, 0]], "transition": [[1.0]]}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert run(["analyze", "--config", path, "--out-dir", tmp_path / "o"]) == 0


def test_analyze_csv_format(config_dir, tmp_path):
    run(["analyze", "--config", config_dir / "example1_case_c.json", "--out-dir", tmp_path,
         "--format", "csv", "--depth-max", "3"])
    rows = list(csv.DictReader(open(tmp_path / "report_depths.csv", newline="")))
    assert [r["L"] for r in rows] == ["1", "2", "3"]


def test_bad_config_exit_1_and_no_output(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "processes": [],\n  "bogus": 1\n}\n')
    out = tmp_path / "out"
    assert run(["analyze", "--config", path, "--out-dir", out]) == 1
    err = capsys.readouterr().err
    assert "line 3" in err and "bogus" in err
    assert not out.exists()
    for cmd in ("simulate", "sweep-region", "lambda-curve"):
        assert run([cmd, "--config", path, "--out-dir", out]) == 1
    assert not out.exists()


def test_simulation_error_leaves_no_files(config_dir, tmp_path):
    cfg = json.loads((config_dir / "gilbert_elliott_stable.json").read_text())
    cfg["simulation"]["period_table"] = [[1, 5]]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert run(["simulate", "--config", path, "--out-dir", out]) == 1
    assert not out.exists() or not any(out.iterdir())


def test_lambda_curve_matches_direct_search(config_dir, tmp_path):
    path = config_dir / "example1_case_b.json"
    assert run(["lambda-curve", "--config", path, "--out-dir", tmp_path, "--depth-max", "4"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "lambda_curve.csv", newline="")))
    est = sa.lambda_search(load(path).channel.model, 4)
    assert [float(r["lambda_L"]) for r in rows] == est.values()
    assert [r["argmin"] for r in rows] == [cli.encode_argmin(d.argmin) for d in est.per_depth]


def test_lambda_curve_single_frequency_constant(tmp_path):
    cfg = {"processes": [{"A": [[1.1]], "C": [[1.0]], "W": [[1.0]], "V": [[1.0]]}],
           "channel": {"type": "explicit", "states": [[0], [1]], "transition": [[0.3, 0.7], [0.2, 0.8]]}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    run(["lambda-curve", "--config", path, "--out-dir", tmp_path, "--depth-max", "5"])
    vals = [float(r["lambda_L"]) for r in csv.DictReader(open(tmp_path / "lambda_curve.csv"))]
    # L-th roots are only exact up to rounding
    assert np.allclose(vals, vals[0], rtol=1e-14, atol=0)


def test_lambda_curve_random_sets_mix(tmp_path):
    assert run(["lambda-curve", "--random-sets", 6, "--seed", 0, "--depth-max", 5,
                "--out-dir", tmp_path]) == 0
    rows = list(csv.DictReader(open(tmp_path / "lambda_curve.csv")))
    curves = {}
    for r in rows:
        curves.setdefault(r["set"], []).append(float(r["lambda_L"]))
    assert len(curves) == 6 and all(len(c) == 5 for c in curves.values())
    rising = [any(b > a + 1e-12 for a, b in zip(c, c[1:])) for c in curves.values()]
    assert any(rising) and not all(rising)


def test_lambda_curve_random_needs_seed(tmp_path):
    assert run(["lambda-curve", "--random-sets", 2, "--out-dir", tmp_path]) == 1


def test_sweep_region_small_grid(config_dir, tmp_path):
    assert run(["sweep-region", "--config", config_dir / "example1_case_c.json",
                "--grid", 11, "--out-dir", tmp_path]) == 0
    rows = list(csv.DictReader(open(tmp_path / "region.csv", newline="")))
    assert len(rows) == 121
    assert not any(r["corollary1_stable"] == "1" and r["theorem1_stable"] == "0" for r in rows)
    assert any(r["corollary1_stable"] == "0" and r["theorem1_stable"] == "1" for r in rows)


def test_sweep_region_all_stable_when_rho_below_one(config_dir, tmp_path):
    cfg = json.loads((config_dir / "example1_case_a.json").read_text())
    cfg["processes"][0]["A"] = [[0.9]]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    run(["sweep-region", "--config", path, "--grid", 6, "--out-dir", tmp_path])
    rows = list(csv.DictReader(open(tmp_path / "region.csv")))
    assert all(r["theorem1_stable"] == "1" and r["corollary1_stable"] == "1" for r in rows)


def test_sweep_region_rejects_degenerate_grid(config_dir, tmp_path):
    assert run(["sweep-region", "--config", config_dir / "example1_case_a.json",
                "--grid", 1, "--out-dir", tmp_path / "o"]) == 1
    assert not (tmp_path / "o").exists()


def test_sweep_region_needs_independent_channel(config_dir, tmp_path):
    assert run(["sweep-region", "--config", config_dir / "gilbert_elliott_stable.json",
                "--out-dir", tmp_path]) == 1


def test_compare_knowledge(tmp_path):
    assert run(["compare-knowledge", "--seed", 1, "--num-models", 8, "--depth-max", 4,
                "--out-dir", tmp_path]) == 0
    rows = list(csv.DictReader(open(tmp_path / "knowledge.csv")))
    assert len(rows) == 16
    for r in rows:
        assert float(r["lambda_prime"]) <= float(r["lambda"]) + 1e-10
    assert run(["compare-knowledge", "--out-dir", tmp_path]) == 1


def test_compare_knowledge_permutation_chain():
    # deterministic next state: knowing the previous state is as good as the current one
    from remote_stability.channel_model import MarkovChannelModel, binary_labels
    perm = np.eye(4)[[1, 2, 3, 0]]
    ch = MarkovChannelModel(perm, binary_labels(2), validate_ergodic=False)
    assert sa.theorem2_lambda(ch) == pytest.approx(sa.lambda_search(ch, 6).lambda_min, abs=1e-12)


def test_simulate_outputs_and_reproducible(config_dir, tmp_path):
    cfg = json.loads((config_dir / "gilbert_elliott_stable.json").read_text())
    cfg["simulation"]["horizon"] = 200_000
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    for d in ("a", "b"):
        assert run(["simulate", "--config", path, "--out-dir", tmp_path / d, "--seed", 11]) == 0
    for name in ("slots.csv", "cycles.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert not summary["diverged"]
    assert summary["empirical_j"] == pytest.approx(summary["analytic_j"], rel=0.05)
    assert b"\r" not in (tmp_path / "a" / "slots.csv").read_bytes()
    assert not [p for p in (tmp_path / "a").iterdir() if p.name.startswith(".")]


def test_simulate_unstable_flags_divergence(config_dir, tmp_path):
    assert run(["simulate", "--config", config_dir / "all_off_unstable.json",
                "--out-dir", tmp_path]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["diverged"] is True


def test_simulate_three_sensors(config_dir, tmp_path):
    assert run(["simulate", "--config", config_dir / "serial_three_sensors.json",
                "--out-dir", tmp_path]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["empirical_j_per_sensor"]) == 3
    assert summary.get("analytic_j") is None


def test_csv_round_trip_full_precision():
    vals = [0.1, 1 / 3, math.pi * 1e-300, 2.0 ** 0.5, 123456789.123456789]
    text = cli.csv_text(["x"], [(v,) for v in vals])
    back = [float(r["x"]) for r in csv.DictReader(text.splitlines())]
    assert back == vals
    assert "\r" not in text
