import csv
import json

import pytest

from pathhodge import cli
from pathhodge import suites as S

TINY = """
seed = 11

[params.sde]
steps = 100
paths = 2000
chunk = 1000
derivative_steps = 200
derivative_cases = 2

[params.filtered]
steps = 100
resamples = 200
chunk = 100
identity_steps = 50
identity_cases = 5

[params.noise]
paths = 10000
steps = 10
chunk = 5000

[params.hodge]
steps = 16
paths = 600
times = [8, 16]
"""


def write_config(tmp_path, text=TINY, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_list_suites(capsys):
    assert cli.main(["list-suites"]) == 0
    out = capsys.readouterr().out
    for name in S.SUITES:
        assert name in out


def test_run_is_deterministic_apart_from_metadata(tmp_path):
    cfg = write_config(tmp_path)
    args = ["run", "--config", str(cfg), "--suite", "sde", "--suite", "noise", "--suite", "hodge"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert ra.pop("metadata")["runtime_seconds"].keys() == rb.pop("metadata")["runtime_seconds"].keys()
    assert ra == rb
    assert ra["schema"] == cli.REPORT_SCHEMA and ra["seed"] == 11
    for name in ("sde_checks.csv", "noise_checks.csv", "sde_derivative.csv", "galerkin_system.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_checks_csv_columns(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["run", "--config", str(cfg), "--suite", "noise", "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.reader(open(tmp_path / "o" / "noise_checks.csv")))
    assert rows[0] == ["name", "measured", "bound", "stderr", "passed"]
    assert rows[1][0] == "noise_decomposition" and rows[1][4] == "True"


def test_seed_override_changes_numbers(tmp_path):
    cfg = write_config(tmp_path)
    base = ["run", "--config", str(cfg), "--suite", "noise"]
    cli.main(base + ["--out", str(tmp_path / "a")])
    cli.main(base + ["--out", str(tmp_path / "b"), "--seed", "12"])
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rb["seed"] == 12
    assert ra["suites"][0]["rows"][0]["measured"] != rb["suites"][0]["rows"][0]["measured"]


def test_output_directory_from_environment(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["run", "--config", str(cfg), "--suite", "noise"]) == 0
    assert (tmp_path / "env_out" / "report.json").exists()


def test_filtered_identities_on_the_flat_torus(tmp_path):
    text = 'suites = ["filtered"]\n' + TINY + '\n[manifold]\nkind = "clifford_torus"\n'
    cfg = cli.load_config(write_config(tmp_path, text))
    report, _ = cli.run_experiment(cfg, tmp_path / "o", log=lambda *_: None)
    (suite,) = [s for s in report["suites"] if s["name"] == "filtered"]
    (row,) = [r for r in suite["rows"] if r["name"] == "isometry_submersion"]
    assert row["passed"] and row["measured"] <= 1e-10
    assert row["details"]["manifold"] == "clifford_torus"


def test_failed_check_gives_exit_code_one(tmp_path):
    text = TINY + "\n[tolerances]\nreconstruction_tol = 0.0\n"
    cfg = write_config(tmp_path, text)
    assert cli.main(["run", "--config", str(cfg), "--suite", "noise", "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize(
    "text",
    [
        "seed = -1\n",
        "bogus = 1\n",
        'suites = ["nope"]\n',
        "[grid]\nrefinement = [200, 100]\n",
        "[grid]\nwidth = 3\n",
        '[manifold]\nkind = "klein"\n',
        "[tolerances]\nmade_up = 1.0\n",
        "[params.sde]\nnot_a_field = 1\n",
        "[params.nosuch]\nx = 1\n",
        "seed = \n",
    ],
)
def test_config_errors_give_exit_code_two(tmp_path, text, capsys):
    cfg = write_config(tmp_path, text)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "absent.toml")]) == 2


def test_unknown_suite_on_the_command_line(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["run", "--config", str(cfg), "--suite", "nope"]) == 2


def test_global_sections_reach_suite_parameters():
    cfg = cli.build_config({"grid": {"steps": 300}, "mc": {"paths": 123}, "manifold": {"kind": "sphere", "dim": 3}})
    assert cfg.params["sde"].steps == 300 and cfg.params["sde"].paths == 123
    assert cfg.params["filtered"].manifold == "sphere:3"
    # per-suite tables take precedence over global sections
    cfg = cli.build_config({"grid": {"steps": 300}, "params": {"sde": {"steps": 50}}})
    assert cfg.params["sde"].steps == 50 and cfg.params["noise"].steps == 300


def test_suite_errors_are_recorded(tmp_path):
    cfg = cli.build_config({"suites": ["hodge"], "params": {"hodge": {"steps": 16, "paths": 5, "times": [8, 16]}}})
    report, ok = cli.run_experiment(cfg, tmp_path / "o", log=lambda *_: None)
    assert not ok
    assert "error" in report["suites"][0]
