import filecmp
import os

import pytest

from pruneopt.cli import main, read_aggregates
from pruneopt.config import apply_preset, build, parse_config
from pruneopt.orchestrator import Aggregate
from pruneopt.tables import MISSING, emit_tables, format_count, format_probability


def test_format_count():
    assert format_count(9.02e6, 0.0) == "9.02 (±0.0)×10⁶"
    assert format_count(1210.0, 0.0) == "1.21 (±0.0)×10³"
    assert format_count(254.0, 0.0) == "2.54 (±0.0)×10²"
    assert format_count(178000.0, 3500.0) == "1.78 (±0.0)×10⁵"
    assert format_count(575.0, 49.0) == "5.75 (±0.5)×10²"
    assert format_count(9999.0, None) == "1.00 (±n/a)×10⁴"


def test_format_probability():
    assert format_probability(1.0, 0.0) == "1.0 (±0.0)"
    assert format_probability(0.914, 0.0246) == "0.914 (±0.02)"
    assert format_probability(None, None) == MISSING


def test_emit_tables_layout():
    agg = Aggregate(500, 1.0, 0.0, 9.02e6, 0.0, 1.78e5, 0.0)
    out = emit_tables({("exact", 1): agg}, stages=[1, 2])
    lines = out["csv"].strip().splitlines()
    assert lines[0] == "Method,Metric,T=1,T=2"
    assert lines[1] == f"exact,Probability,1.0 (±0.0),{MISSING}"
    assert lines[2].startswith("exact,Gradient,9.02 (±0.0)×10⁶")
    assert len(lines) == 7
    assert out["markdown"].startswith("| Method | Metric | T=1 | T=2 |")


def test_emit_tables_empty_grid():
    out = emit_tables({})
    assert out["csv"] == "Method,Metric\n"
    assert out["markdown"].count("\n") == 2


def test_parse_config_and_presets():
    run, drug, out = parse_config("""
[run]
preset = table-match
method = asymptotic
K = 5
use_crn = yes
output = results   # comment
[drug]
noise = 0.25
""")
    assert run["significance_split"] == "per_stage" and run["opt_tolerance"] == "combined"
    assert run["K"] == 5 and run["use_crn"] is True and out == "results"
    assert drug == {"lipschitz": "literal", "cov_bound": "sigma_g", "noise": 0.25}
    cfg = build(run, drug)
    assert cfg.problem_params["K"] == 5 and cfg.problem_params["noise"] == 0.25
    with pytest.raises(ValueError):
        parse_config("[run]\nbogus = 1\n")
    with pytest.raises(ValueError):
        parse_config("[other]\n")
    with pytest.raises(ValueError):
        apply_preset("nope")


def test_cli_run_truth_tables(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["bench", "run", "--method", "asymptotic", "--objective", "same", "--stages", "2",
                 "--reps", "3", "--seed", "7", "--out", str(out), "--verbose"]) == 0
    base = out / "same_asymptotic_T2"
    rows = (out / "same_asymptotic_T2_replications.csv").read_text().splitlines()
    assert rows[0] == "replication,selected,epsOptimal,gradEvals,funcEvals" and len(rows) == 4
    assert os.path.exists(str(base) + "_reports.jsonl")
    grid = read_aggregates(str(out))
    assert ("asymptotic", 2) in grid["same"]
    assert main(["bench", "tables", "--out", str(out)]) == 0
    assert (out / "table_same.md").exists()
    assert main(["bench", "truth", "--objective", "same", "--eps", "0.12"]) == 0
    assert '"eps_optimal": [\n      1,\n      2\n    ]' in capsys.readouterr().out
    assert main(["bench", "tables", "--out", str(tmp_path / "empty")]) == 1


def test_cli_byte_identical(tmp_path):
    for name in ("a", "b"):
        main(["bench", "run", "--method", "asymptotic", "--objective", "different", "--stages", "3",
              "--reps", "3", "--seed", "42", "--out", str(tmp_path / name)])
    for f in ("different_asymptotic_T3_replications.csv", "different_asymptotic_T3_aggregate.csv"):
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False)


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nmethod = exact\nobjective = same\nK = 4\nreplications = 2\n")
    assert main(["bench", "run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "same_exact_T1_aggregate.csv").exists()


def test_cli_grid(tmp_path):
    out = tmp_path / "g"
    assert main(["bench", "run", "--grid", "--objective", "same", "--K", "4", "--reps", "2",
                 "--out", str(out)]) == 0
    text = (out / "table_same.csv").read_text().splitlines()
    assert text[0] == "Method,Metric,T=1,T=2,T=3,T=4,T=5" and len(text) == 7
