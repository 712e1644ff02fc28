"""Command-line behavior: formats, determinism and exit codes."""
import json
import subprocess
import sys

import pytest

from strataux import embedded_kk2009, summary_to_json
from strataux.cli import main

DESIGN = "31,21,29,38,22,39"

GEN_CONFIG = {
    "seed": 13,
    "strata": [
        {"N": 40, "mean_y": 50, "mean_x": 80, "mean_z": 60,
         "sd_y": 10, "sd_x": 16, "sd_z": 12,
         "rho_yx": 0.9, "rho_yz": 0.8, "rho_xz": 0.7},
        {"N": 60, "mean_y": 55, "mean_x": 90, "mean_z": 66,
         "sd_y": 11, "sd_x": 18, "sd_z": 13.2,
         "rho_yx": 0.9, "rho_yz": 0.8, "rho_xz": 0.7},
    ],
}

MICRO_TEXT = """stratum,y,x,z
A,3,11,6
A,5,14,9
A,4,17,7
A,6,12,8
B,20,30,40
B,26,34,46
B,23,38,43
B,29,42,49
B,24,31,41
"""


@pytest.fixture()
def summary_file(tmp_path):
    pop, _ = embedded_kk2009()
    path = tmp_path / "summary.json"
    path.write_text(summary_to_json(pop))
    return str(path)


@pytest.fixture()
def micro_file(tmp_path):
    path = tmp_path / "micro.csv"
    path.write_text(MICRO_TEXT)
    return str(path)


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "gen.json"
    path.write_text(json.dumps(GEN_CONFIG))
    return str(path)


def test_moments_text_output(summary_file, capsys):
    assert main(["moments", "--input", summary_file, "--design", DESIGN]) == 0
    out = capsys.readouterr().out
    assert "v200" in out and "b2" in out
    assert "# policy: prefer-correlation" in out
    assert "# repaired_pairs: 5" in out


def test_moments_json_carries_full_precision(summary_file, capsys):
    assert main(["moments", "--input", summary_file, "--design", DESIGN,
                 "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["command"] == "moments"
    assert doc["moments"]["v200"] == pytest.approx(0.011699878537905353, rel=1e-12)
    assert doc["moments"]["census"] is False
    assert doc["provenance"]["policy"] == "prefer-correlation"


def test_moments_csv_output(summary_file, capsys):
    assert main(["moments", "--input", summary_file, "--design", DESIGN,
                 "--format", "csv"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == "quantity,value"
    v200 = float(next(l for l in lines if l.startswith("v200,")).split(",")[1])
    assert v200 == pytest.approx(0.011699878537905353, rel=1e-12)
    assert any(l.startswith("# policy:") for l in lines)


def test_moments_accepts_microdata(micro_file, capsys):
    assert main(["moments", "--input", micro_file, "--design", "2,3"]) == 0
    out = capsys.readouterr().out
    assert "# repaired_pairs: 0" in out


def test_mse_command_with_optimum_and_diagnostics(summary_file, capsys):
    assert main(["mse", "--input", summary_file, "--design", DESIGN]) == 0
    out = capsys.readouterr().out
    assert "optimal tuning: m1* = -1.17712, m2* = -0.891963" in out
    assert "diagnostics (implemented vs as-printed)" in out
    assert "as-printed closed form (0.0337262, -0.0151409)" in out


def test_mse_command_json_rows(summary_file, capsys):
    assert main(["mse", "--input", summary_file, "--design", DESIGN,
                 "--format", "json", "--m1", "1", "--m2", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    rows = {r["estimator"]: r for r in doc["rows"]}
    assert rows["mean"]["mse"] == pytest.approx(2228.5201298310753, rel=1e-12)
    assert doc["optimal"]["m1"] == pytest.approx(-1.1771177911944053, rel=1e-10)
    # the last row is the explicitly requested (m1, m2) evaluation
    assert doc["rows"][-1]["m1"] == 1.0


def test_mse_tuning_flags_must_pair(summary_file, capsys):
    assert main(["mse", "--input", summary_file, "--design", DESIGN,
                 "--m1", "1"]) == 2
    assert "must be given together" in capsys.readouterr().err


def test_pre_command_table(summary_file, capsys):
    assert main(["pre", "--input", summary_file, "--design", DESIGN]) == 0
    out = capsys.readouterr().out
    assert "exp_regression" in out
    assert "# m1_opt: -1.17712" in out


def test_pre_command_json_includes_dominance(summary_file, capsys):
    assert main(["pre", "--input", summary_file, "--design", DESIGN,
                 "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    rows = {r["estimator"]: r for r in doc["rows"]}
    assert rows["mean"]["pre"] == 100.0
    assert rows["exp_regression"]["rank"] == 1
    dom = {d["estimator"]: d for d in doc["dominance"]}
    assert all(d["satisfied"] for d in dom.values())


def test_simulate_runs_and_is_byte_deterministic(config_file, capsys):
    argv = ["simulate", "--input", config_file, "--design", "6,9",
            "--R", "200", "--seed", "5"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "# generator: philox4x64" in first
    assert "# fingerprint: " in first
    assert "exp_regression_opt" in first
    # thread count changes scheduling, never results
    assert main(argv + ["--workers", "3"]) == 0
    third = capsys.readouterr().out
    assert third == first


def test_simulate_accepts_estimator_subset(config_file, capsys):
    assert main(["simulate", "--input", config_file, "--design", "6,9",
                 "--R", "50", "--seed", "5",
                 "--estimators", "mean,ratio"]) == 0
    out = capsys.readouterr().out
    assert "ratio" in out and "exp_ratio_x" not in out


def test_simulate_rejects_summary_documents(summary_file, capsys):
    assert main(["simulate", "--input", summary_file, "--design", DESIGN]) == 2
    assert "cannot be sampled from" in capsys.readouterr().err


def test_simulate_csv_has_no_timestamps(config_file, capsys):
    argv = ["simulate", "--input", config_file, "--design", "6,9",
            "--R", "50", "--seed", "5", "--format", "csv"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("estimator,m1,m2,emp_mean")
    assert main(argv) == 0
    assert capsys.readouterr().out == out


def test_reproduce_command_text(capsys):
    assert main(["reproduce-kk2009"]) == 0
    out = capsys.readouterr().out
    assert "RANK-MISMATCH" in out
    assert "published ranking: exp_regression > regression" in out
    assert "computed ranking:  exp_regression > exp_ratio_xz" in out
    assert "repair log (prefer-correlation): 5 entries" in out
    assert "repair log (prefer-covariance): 5 entries" in out
    assert "tuned optimum: m1* = -1.17712, m2* = -0.891963" in out
    mean_line = next(l for l in out.splitlines() if l.startswith("mean "))
    assert " 100 " in mean_line


def test_reproduce_command_json(capsys):
    assert main(["reproduce-kk2009", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["published_ranking"][0] == "exp_regression"
    assert doc["computed_ranking"][-1] == "exp_product_xz"
    assert len(doc["rows"]) == 9
    assert all(r["delta"] is not None for r in doc["rows"])
    assert len(doc["repairs_correlation"]) == 5


def test_exit_code_2_on_input_errors(tmp_path, capsys):
    assert main(["moments", "--input", str(tmp_path / "nope.csv"),
                 "--design", "3"]) == 2
    assert "error: cannot read" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("stratum,y,x\nA,1,2\n")
    assert main(["moments", "--input", str(bad), "--design", "3"]) == 2
    capsys.readouterr()
    good = tmp_path / "micro.csv"
    good.write_text(MICRO_TEXT)
    assert main(["moments", "--input", str(good), "--design", "2;3"]) == 2
    assert "bad --design" in capsys.readouterr().err


def test_exit_code_3_on_degenerate_moments(tmp_path, capsys):
    doc = {"strata": [{
        "h": 1, "N": 30, "ybar": 10.0, "xbar": 8.0, "zbar": 6.0,
        "s_y": 2.0, "s_x": 0.0, "s_z": 1.5,
        "s_yx": 0.0, "s_yz": 1.0, "s_xz": 0.0,
        "rho_yx": 0.0, "rho_yz": 0.4, "rho_xz": 0.0,
    }]}
    path = tmp_path / "flat.json"
    path.write_text(json.dumps(doc))
    assert main(["mse", "--input", str(path), "--design", "5"]) == 3
    assert "numerical error: combined slope b1" in capsys.readouterr().err


def test_exit_code_4_on_strict_policy(summary_file, capsys):
    assert main(["moments", "--input", summary_file, "--design", DESIGN,
                 "--policy", "strict"]) == 4
    err = capsys.readouterr().err
    assert "validation failure:" in err and "stratum 3 pair xz" in err


def test_exit_code_4_on_nonfinite_simulation(config_file, capsys):
    assert main(["simulate", "--input", config_file, "--design", "6,9",
                 "--R", "300", "--seed", "5", "--m1", "1e7", "--m2", "1e7",
                 "--estimators", "exp_regression"]) == 4
    assert "non-finite estimate share" in capsys.readouterr().err


def test_missing_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    assert "required: command" in capsys.readouterr().err


def test_module_entry_point_is_reproducible():
    cmd = [sys.executable, "-m", "strataux", "reproduce-kk2009"]
    a = subprocess.run(cmd, capture_output=True, timeout=60)
    b = subprocess.run(cmd, capture_output=True, timeout=60)
    assert a.returncode == 0 and b.returncode == 0
    assert a.stdout == b.stdout
    assert b"RANK-MISMATCH" in a.stdout
