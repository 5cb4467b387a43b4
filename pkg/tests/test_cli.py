import pytest
from click.testing import CliRunner

from lingobank import datasets
from lingobank.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def bundled(tmp_path, name):
    path = tmp_path / name
    path.write_text(datasets.bundled_text(name))
    return str(path)


def test_unknown_flag_is_usage_error(runner):
    result = runner.invoke(main, ["project", "--wat", "1"])
    assert result.exit_code == 2


def test_project_final_audience(runner):
    result = runner.invoke(main, ["project", "--u0", "1000", "--k", "0.2",
                                  "--r", "0.85", "--steps", "36"])
    assert result.exit_code == 0, result.output
    assert "final audience: 5792" in result.output


def test_project_csv_output(runner, tmp_path):
    out = tmp_path / "proj.csv"
    result = runner.invoke(main, ["project", "--u0", "1000", "--k", "0.2",
                                  "--r", "0.85", "--steps", "3",
                                  "--csv", str(out)])
    assert result.exit_code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "step,audience"
    assert len(lines) == 5


def test_project_rejects_non_ratio(runner):
    result = runner.invoke(main, ["project", "--u0", "1000", "--k", "x",
                                  "--r", "0.85", "--steps", "3"])
    assert result.exit_code == 2


def test_metrics_connections_bundled_table(runner, tmp_path):
    result = runner.invoke(main, ["metrics", "--data",
                                  bundled(tmp_path, "table2.csv"),
                                  "--report", "connections"])
    assert result.exit_code == 0, result.output
    assert "connects: 15842" in result.output
    assert "total minutes: 203207" in result.output
    assert "mean minutes: 12.83" in result.output


def test_metrics_involvement_window(runner, tmp_path):
    result = runner.invoke(main, ["metrics", "--data",
                                  bundled(tmp_path, "table1.csv"),
                                  "--report", "involvement",
                                  "--start", "2014-05-01",
                                  "--end", "2014-06-01"])
    assert result.exit_code == 0, result.output
    assert "new users calling: 1026" in result.output
    assert "involvement: 26.00%" in result.output


def test_metrics_k_report_with_significance(runner, tmp_path):
    result = runner.invoke(main, ["metrics", "--data",
                                  bundled(tmp_path, "weekly_k.csv"),
                                  "--report", "k"])
    assert result.exit_code == 0, result.output
    assert "mean K before 2014-07-28: 2.200%" in result.output
    assert "mean K after  2014-07-28: 3.800%" in result.output
    assert "p-value" in result.output


def test_metrics_k_csv_rows(runner, tmp_path):
    out = tmp_path / "k.csv"
    result = runner.invoke(main, ["metrics", "--data",
                                  bundled(tmp_path, "weekly_k.csv"),
                                  "--report", "k", "--csv", str(out)])
    assert result.exit_code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "start,end,U,i,IU,k_factor,k_retention,k_growth"
    assert len(lines) == 18  # header + 17 weeks


def test_metrics_runtime_failure_is_exit_1(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("month_start,month_end,connects,minutes\nnope\n")
    result = runner.invoke(main, ["metrics", "--data", str(bad),
                                  "--report", "connections"])
    assert result.exit_code == 1


def test_import_into_data_dir(runner, tmp_path):
    data_dir = tmp_path / "log"
    result = runner.invoke(main, ["import", "--file",
                                  bundled(tmp_path, "table2.csv"),
                                  "--data-dir", str(data_dir)])
    assert result.exit_code == 0
    assert "imported 9 records" in result.output
    # a metrics run over the resulting event log sees the same data
    result = runner.invoke(main, ["metrics", "--data", str(data_dir),
                                  "--report", "connections"])
    assert "connects: 15842" in result.output


def test_simulate_deterministic_summary(runner):
    args = ["simulate", "--seed", "7", "--bots", "10", "--days", "1"]
    first = runner.invoke(main, args)
    second = runner.invoke(main, args)
    assert first.exit_code == 0, first.output
    assert first.output == second.output
    assert "event log digest" in first.output


def test_simulate_config_file(runner, tmp_path):
    config = tmp_path / "sim.json"
    config.write_text('{"seed": 3, "bot_count": 5, "days": 1}')
    result = runner.invoke(main, ["simulate", "--config", str(config)])
    assert result.exit_code == 0, result.output
    assert "bots: 5 seed: 3" in result.output


def test_simulate_invalid_config_is_runtime_error(runner, tmp_path):
    config = tmp_path / "sim.json"
    config.write_text('{"bot_count": 0}')
    result = runner.invoke(main, ["simulate", "--config", str(config)])
    assert result.exit_code == 1


def test_admin_commands_unreachable_server(runner):
    result = runner.invoke(main, ["who", "--server", "127.0.0.1:1"])
    assert result.exit_code == 1
    assert "cannot reach" in result.output
