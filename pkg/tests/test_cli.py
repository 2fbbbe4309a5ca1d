import csv
import io
import json
import math

import numpy as np
import pytest

from ctxmix import cli, runs, verify
from ctxmix.config import ExperimentConfig
from ctxmix.errors import ConfigError, GridTooLarge

ANNEAL_GRID = {"omega": [[-2, -1, 0], [-2, -1, 0]], "lambda": [0.0, math.log(2.0), 2 * math.log(2.0)]}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# configuration -----------------------------------------------------------------

@pytest.mark.parametrize("raw, fragment", [
    ({"instance": {"builtin": "E1", "corpus": "x"}}, "exactly one instance source"),
    ({"instance": {}}, "exactly one instance source"),
    ({"bogus": 1}, "unknown config keys"),
    ({"alpha": -1}, "alpha"),
    ({"solver": "magic"}, "solver"),
    ({"schedule": {"T": 0.001, "dt": 0.01}}, "exceeds"),
    ({"grid": {"lambda_count": 1}}, "lambda_count"),
    ({"instance": {"builtin": "E9"}}, "unknown builtin"),
    ({"instance": {"corpus": "missing.txt"}}, "missing.txt"),
])
def test_config_rejects(raw, fragment, tmp_path):
    with pytest.raises(ConfigError, match=fragment):
        ExperimentConfig.from_dict(raw, tmp_path)


def test_config_inline_models_and_zero_alpha():
    cfg = ExperimentConfig.from_dict({
        "instance": {"models": {"symbols": ["a", "b"], "probs": [[0.6, 0.4]]}, "target": {"probs": [0.5, 0.5]}},
        "alpha": 0,
    })
    inst = cfg.instance()
    assert inst.models.space.symbols == ("a", "b")
    spec = cfg.grid_spec(inst.models)
    assert cfg.alpha(inst, spec) == 0.0
    norm = cfg.normalized(inst, spec, 0.0)
    assert len(norm["grid"]["lambda"]) == 33 and norm["alpha"] == 0.0


# models ----------------------------------------------------------------------------

def test_models_command_on_corpus(tmp_path, capsys):
    (tmp_path / "c.txt").write_bytes(b"aab")
    conf = write(tmp_path / "m.json", {"instance": {"corpus": "c.txt", "orders": [0], "epsilon": 0.01}})
    code, out, _ = run(["models", "--config", conf], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["models"]["symbols"] == ["a", "b"]
    assert len(report["models"]["probs"]) == 1
    assert report["models"]["probs"][0] == pytest.approx([2.01 / 3.02, 1.01 / 3.02], abs=1e-15)


def test_models_command_errors(tmp_path, capsys):
    conf = write(tmp_path / "m.json", {"instance": {"corpus": "nowhere.txt"}})
    code, _, err = run(["models", "--config", conf], capsys)
    assert code == 1 and "nowhere.txt" in err
    code, _, err = run(["models"], capsys)
    assert code == 1 and "corpus" in err
    code, _, err = run(["models", "--config", str(tmp_path / "absent.json")], capsys)
    assert code == 1 and "absent.json" in err


# solve -------------------------------------------------------------------------------

def test_solve_brute_e1(capsys):
    code, out, _ = run(["solve"], capsys)
    assert code == 0
    sol = json.loads(out)["solution"]
    assert sol["omega"] == [-1.0, -2.0]
    assert sol["energy"] == pytest.approx(0.5448054311250702, abs=1e-12)
    assert sol["ties"] == 3


def test_solve_penalized_matches_constrained_omega(tmp_path, capsys):
    conf = write(tmp_path / "p.json", {"solver": "brute_penalized", "alpha": 50,
                                       "grid": {"lambda_count": 33, "lambda_padding": 0.2}})
    code, out, _ = run(["solve", "--config", conf], capsys)
    assert code == 0
    report = json.loads(out)
    w = report["solution"]["omega"]
    assert w[0] == -1.0  # the second weight is free: its model is uniform
    assert report["at_solution"]["cross_entropy"] == pytest.approx(
        report["diagnostics"]["constrained_reference"]["energy"], abs=1e-12)
    assert abs(report["solution"]["lambda"] - report["at_solution"]["lambda_of_omega"]) <= \
        report["diagnostics"]["lambda_spacing"]


def test_solve_sa_is_byte_reproducible(tmp_path, capsys):
    conf = write(tmp_path / "sa.json", {"solver": "sa", "seed": 11, "sa": {"steps": 3000}})
    outs = []
    for name in ("a.json", "b.json"):
        code, _, _ = run(["solve", "--config", conf, "--out", str(tmp_path / name), "--no-figures"], capsys)
        assert code == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    code, _, _ = run(["solve", "--config", conf, "--seed", "12", "--out", str(tmp_path / "c.json"),
                      "--no-figures"], capsys)
    assert json.loads((tmp_path / "c.json").read_text())["config"]["seed"] == 12


def test_report_reproduces_from_echoed_config(tmp_path, capsys):
    conf = write(tmp_path / "p.json", {"solver": "brute_penalized", "grid": {"lambda_count": 9}})
    _, out, _ = run(["solve", "--config", conf], capsys)
    first = json.loads(out)
    echoed = write(tmp_path / "echo.json", first["config"])
    _, out, _ = run(["solve", "--config", echoed], capsys)
    second = json.loads(out)
    assert second["solution"] == first["solution"]
    for key, value in first["at_solution"].items():
        assert np.allclose(second["at_solution"][key], value, atol=1e-12, rtol=0)


def test_solve_csv_format(capsys):
    code, out, _ = run(["solve", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["symbol"] for r in rows] == ["0", "1"]
    assert float(rows[0]["mixture"]) == pytest.approx(0.9)


# anneal --------------------------------------------------------------------------------

def test_anneal_golden_and_outputs(tmp_path, capsys):
    conf = write(tmp_path / "a.json", {"grid": ANNEAL_GRID, "schedule": {"T": 100, "dt": 0.01, "sample_every": 500},
                                       "gap_samples": 11})
    out = tmp_path / "run" / "anneal.json"
    code, _, _ = run(["anneal", "--config", conf, "--out", str(out)], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["success_probability"] == pytest.approx(verify.GOLDENS["e1_anneal_success_T100"], abs=1e-6)
    assert report["diagnostics"]["minimum_gap"]["gap"] > 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "run" / "anneal_trajectory.csv").read_text())))
    assert list(rows[0]) == cli.TRAJECTORY_COLUMNS
    assert float(rows[-1]["success_probability"]) == pytest.approx(report["success_probability"], abs=1e-12)
    for name in ("anneal_mixture.png", "anneal_trajectory.png"):
        assert (tmp_path / "run" / name).stat().st_size > 0


def test_anneal_zero_time_is_driver_state(tmp_path, capsys):
    conf = write(tmp_path / "a.json", {"grid": ANNEAL_GRID, "schedule": {"T": 0}})
    code, out, _ = run(["anneal", "--config", conf], capsys)
    assert code == 0
    report = json.loads(out)
    pops = np.array(report["final_populations"])
    assert report["success_probability"] == pytest.approx(pops[report["ground_set"]].sum(), abs=1e-15)
    assert report["success_probability"] == report["diagnostics"]["initial_success_probability"]


def test_anneal_rejects_bad_schedule_and_size(tmp_path, capsys):
    conf = write(tmp_path / "a.json", {"schedule": {"T": 0.001, "dt": 0.01}})
    code, _, err = run(["anneal", "--config", conf], capsys)
    assert code == 1 and "exceeds" in err
    conf = write(tmp_path / "b.json", {"grid": {"omega_count": 9, "lambda_count": 100}})
    code, _, _ = run(["anneal", "--config", conf], capsys)
    assert code == 1


# grand --------------------------------------------------------------------------------

def test_grand_downsized(tmp_path, capsys):
    conf = write(tmp_path / "g.json", {"instance": {"builtin": "E1-downsized"}, "alpha": 1.0,
                                       "grid": {"omega": [[-2, -1]], "lambda_count": 2, "lambda_padding": 0}})
    out = tmp_path / "g_out.json"
    code, _, _ = run(["grand", "--config", conf, "--out", str(out)], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["grand_dimension"] == 32
    assert report["identity_max_deviation"] < 1e-12
    ratios = [r["ratio_vs_prev"] for r in report["scaling"][1:]]
    assert all(1.5 <= r <= 2.5 for r in ratios)
    assert (tmp_path / "g_out_scaling.csv").read_text().startswith("dt,trace_distance,ratio_vs_prev")
    assert (tmp_path / "g_out_scaling.png").exists()


def test_grand_degenerate_case_is_exact(tmp_path, capsys):
    conf = write(tmp_path / "g.json", {
        "instance": {"models": {"symbols": [0, 1], "probs": [[0.5, 0.5]]}, "target": {"probs": [0.8, 0.2]}},
        "alpha": 0, "grid": {"omega": [[-2, -1]], "lambda_count": 2, "lambda_padding": 0}})
    code, out, _ = run(["grand", "--config", conf, "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3
    assert all(float(r["trace_distance"]) < 1e-9 for r in rows)


def test_grand_oversize_fails_before_building_lambda(monkeypatch):
    import ctxmix.config as config

    def boom(*args, **kwargs):
        raise AssertionError("lambda grid built before the size check")

    monkeypatch.setattr(config, "auto_lambda_range", boom)
    cfg = ExperimentConfig.from_dict({"grid": {"omega_count": 9, "lambda_count": 8}})
    with pytest.raises(GridTooLarge):
        runs.grand_command(cfg)


# verify ---------------------------------------------------------------------------------

def test_verify_passes_and_is_deterministic(capsys):
    code, out, _ = run(["verify"], capsys)
    assert code == 0
    assert out.strip().endswith("10/10 checks passed")
    assert verify.summary(verify.run_checks()) + "\n" == out


def test_verify_isolates_a_perturbed_golden(monkeypatch, capsys):
    perturbed = dict(verify.GOLDENS)
    perturbed["e1_constrained_energy"] += 1e-6
    monkeypatch.setattr(verify, "GOLDENS", perturbed)
    code, out, _ = run(["verify"], capsys)
    assert code == 3
    failed = [line for line in out.splitlines() if line.startswith("FAIL")]
    assert len(failed) == 1 and "golden_e1_constrained" in failed[0]
