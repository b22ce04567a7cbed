import json

from typer.testing import CliRunner

from app.cli import app
from app.schemas.experiments import OutputFormat
from app.utils.results_io import read_meta, read_results

runner = CliRunner()


def test_tune_single():
    result = runner.invoke(app, ["tune", "--budget-bits", "1024", "--delta", "1e-4"])
    assert result.exit_code == 0
    assert "37" in result.output


def test_tune_needs_arguments():
    assert runner.invoke(app, ["tune"]).exit_code != 0


def test_accuracy_writes_results(tmp_path):
    out = tmp_path / "acc.csv"
    result = runner.invoke(
        app,
        [
            "accuracy",
            "--checker", "sum",
            "--config", "1x2m31",
            "--config", "4x4m3",
            "--manipulator", "randkey",
            "--manipulator", "none",
            "--pes", "2",
            "--elements", "200",
            "--trials", "5",
            "--seed", "3",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    frame = read_results(out)
    assert len(frame) == 4
    assert set(frame["manipulator"]) == {"randkey", "none"}
    assert (frame.loc[frame["manipulator"] == "none", "failures"] == 0).all()
    assert read_meta(out)["seed"] == "3"
    assert "ledger" not in frame.columns


def test_accuracy_unknown_checker_exits_2():
    result = runner.invoke(app, ["accuracy", "--checker", "quantile", "--trials", "1"])
    assert result.exit_code == 2


def test_cost_json(tmp_path):
    out = tmp_path / "cost.json"
    result = runner.invoke(
        app, ["cost", "--checker", "sum", "--size", "100", "--size", "1000", "--pes", "4", "--format", "json", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert read_results(out, OutputFormat.JSON)["elements"].tolist() == [100, 1000]


def test_workload_command():
    result = runner.invoke(app, ["workload", "--kind", "powerlaw", "--elements", "1000", "--distinct-keys", "20"])
    assert result.exit_code == 0


def test_accuracy_json_carries_full_ledger(tmp_path):
    out = tmp_path / "acc.json"
    result = runner.invoke(
        app,
        ["accuracy", "--checker", "sum", "--config", "4x4m3", "--manipulator", "randkey", "--pes", "3",
         "--elements", "100", "--trials", "2", "--format", "json", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    row = json.loads(out.read_text())["rows"][0]
    assert len(row["ledger"]["pe"]) == 3
    assert row["ledger"]["bottleneck_volume"] == row["bottleneck_volume"]


def test_tune_reference_grid_under_both_flags():
    for flag in ("--reference", "--table2"):
        result = runner.invoke(app, ["tune", flag])
        assert result.exit_code == 0, result.output
        assert "optimal configurations" in result.output
