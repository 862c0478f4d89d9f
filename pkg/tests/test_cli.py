import os

import pandas as pd
from click.testing import CliRunner

from app.main import cli
from app.utils.store import get_store

FAST_RUN = [
    "run", "--task", "nlm", "--model", "esn", "--units", "10", "--length", "800",
    "--washout", "50", "--repetitions", "1", "--budget", "2",
]


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    result = CliRunner().invoke(cli, FAST_RUN + ["--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "nlm/esn" in result.output
    assert "nmse" in result.output
    assert (out / "comparison.csv").exists()
    assert (out / "nlm_esn_w0.1" / "summary.json").exists()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("task = narma20\nmodel = scr\nunits = 10\nlength = 800\nwashout = 50\nrepetitions = 1\nbudget = 2\n")
    out = tmp_path / "out"
    result = CliRunner().invoke(cli, ["run", "--config", str(cfg), "--model", "esn", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "narma20_esn_w0.1" / "repetitions.csv").exists()


def test_invalid_value_exits_nonzero(tmp_path):
    result = CliRunner().invoke(cli, FAST_RUN[:-2] + ["--repetitions", "0", "--out", str(tmp_path)])
    assert result.exit_code == 1
    assert "repetitions" in result.output


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("neurons = 10\n")
    result = CliRunner().invoke(cli, ["run", "--config", str(cfg)])
    assert result.exit_code == 1
    assert "neurons" in result.output


def test_failed_repetitions_exit_nonzero(tmp_path):
    args = ["run", "--task", "nlm", "--model", "pta", "--units", "10", "--length", "400",
            "--washout", "350", "--epochs", "1", "--repetitions", "1", "--out", str(tmp_path)]
    result = CliRunner().invoke(cli, args)
    assert result.exit_code == 1
    assert "n/a" in result.output
    assert "resume" in result.output
    assert (tmp_path / "nlm_pta_w0.1" / "summary.json").exists()


def test_unknown_task_is_usage_error():
    result = CliRunner().invoke(cli, ["run", "--task", "xor"])
    assert result.exit_code == 2


def test_runs_lists_ledger(tmp_path):
    runner = CliRunner()
    assert "No runs recorded." in runner.invoke(cli, ["runs"]).output
    runner.invoke(cli, FAST_RUN + ["--out", str(tmp_path)])
    listing = runner.invoke(cli, ["runs"])
    assert listing.exit_code == 0
    assert "completed" in listing.output


def test_startup_marks_stale_runs_interrupted():
    get_store().create_run("stale", "mc", "pta", {}, [0])
    CliRunner().invoke(cli, ["runs"])
    assert get_store().get_run("stale")["status"] == "interrupted"


def test_resume_unknown_run():
    result = CliRunner().invoke(cli, ["resume", "missing"])
    assert result.exit_code == 1
    assert "missing" in result.output


def test_export_dataset(tmp_path):
    target = tmp_path / "data" / "narma.csv"
    result = CliRunner().invoke(
        cli, ["export-dataset", "--task", "narma20", "--length", "300", "--seed", "2", "--out", str(target)]
    )
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(target)
    assert list(frame.columns) == ["input", "target"]
    assert len(frame) == 300
    assert os.path.getsize(target) > 0


def test_sweep_prediction_table(tmp_path):
    args = ["sweep", "--table", "prediction", "--units", "10", "--length", "800", "--washout", "50",
            "--repetitions", "1", "--budget", "2", "--epochs", "1", "--out", str(tmp_path)]
    result = CliRunner().invoke(cli, args)
    assert result.exit_code == 0, result.output
    table = pd.read_csv(tmp_path / "comparison.csv")
    assert len(table) == 9
    assert set(table["task"]) == {"nlm", "narma20", "mg"}
