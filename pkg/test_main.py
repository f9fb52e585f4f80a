"""
End-to-end tests of the command-line dispatcher and run settings
"""

import csv
import json

import pytest

from cell_config import CellConfig
from conftest import PB560_PATH
from line_simulator import TimeModelKind
from main import SIM_CSV_HEADER, dispatch
from planning_errors import ConfigError

DATASET = str(PB560_PATH)


def test_validate_prints_summary(capsys):
    assert dispatch(["validate", DATASET]) == 0
    out = capsys.readouterr().out
    assert "20 tasks, 803 s" in out


def test_missing_dataset_is_input_error(tmp_path, capsys):
    assert dispatch(["validate", str(tmp_path / "missing.json")]) == 2
    assert "not found" in capsys.readouterr().out


def test_unknown_flag_is_usage_error():
    assert dispatch(["validate", DATASET, "--bogus"]) == 2
    assert dispatch([]) == 2


def test_cyclic_dataset_is_input_error(tmp_path, task_doc, dataset_doc, capsys):
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps(dataset_doc([task_doc(1, 5, [2]), task_doc(2, 5, [1])])), encoding="utf-8")
    assert dispatch(["validate", str(path)]) == 2
    assert "1 -> 2 -> 1" in capsys.readouterr().out


def test_balance_infeasible_names_task(tmp_path, pb560_document, capsys):
    document = json.loads(json.dumps(pb560_document))
    document["product"]["tasks"][1]["duration_s"] = 200
    path = tmp_path / "slow.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    assert dispatch(["balance", str(path)]) == 3
    assert "Task 2" in capsys.readouterr().out


def test_balance_with_safety_and_verify(tmp_path, capsys):
    out = tmp_path / "line.json"
    assert dispatch(["balance", DATASET, "--with-safety", "--verify", "--out", str(out)]) == 0
    document = json.loads(out.read_text(encoding="utf-8"))
    assert len(document["line"]["stations"]) == 5
    assert document["oracle"] == {"method": "lower_bound", "optimum": 5, "heuristic": 5}
    assert [s["index"] for s in document["safety"]["stations"]] == [1, 4]
    assert document["manifest"]["subcommand"] == "balance"
    assert "optimal" in capsys.readouterr().out


def test_balance_csv(tmp_path):
    out = tmp_path / "line.csv"
    assert dispatch(["balance", DATASET, "--csv", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open(encoding="utf-8")))
    assert [r["load_s"] for r in rows] == ["160", "161", "160", "161", "161"]
    assert (tmp_path / "line.csv.manifest.json").exists()


def test_allocate_json(tmp_path):
    out = tmp_path / "allocation.json"
    assert dispatch(["allocate", DATASET, "--out", str(out)]) == 0
    document = json.loads(out.read_text(encoding="utf-8"))
    assert len(document["entries"]) == 20
    assert document["metrics"]["robot_tasks"] == 12


def test_simulate_csv_and_trace(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    trace = tmp_path / "trace.csv"
    args = ["simulate", DATASET, "--seed", "3", "--reps", "2", "--csv", "--out", str(out), "--trace", str(trace)]
    assert dispatch(args) == 0
    rows = list(csv.DictReader(out.open(encoding="utf-8")))
    assert [r["completed_units"] for r in rows] == ["163", "163"]
    assert list(rows[0]) == SIM_CSV_HEADER
    with trace.open(encoding="utf-8") as f:
        assert f.readline().strip() == "t_s,station,event,unit_id"
    assert "not met" in capsys.readouterr().out


def test_simulate_shift_override(tmp_path):
    out = tmp_path / "sim.json"
    assert dispatch(["simulate", DATASET, "--shift-s", "1000", "--reps", "1", "--out", str(out)]) == 0
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["replications"][0]["completed_units"] == 2


def test_simulate_rejects_bad_reps():
    assert dispatch(["simulate", DATASET, "--reps", "0"]) == 2


def test_scenarios_table(tmp_path):
    out = tmp_path / "table.csv"
    assert dispatch(["scenarios", DATASET, "--n", "5", "--seed", "4", "--csv", "--out", str(out)]) == 0
    first = out.read_text(encoding="utf-8")
    assert dispatch(["scenarios", DATASET, "--n", "5", "--seed", "4", "--csv", "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == first
    assert len(first.strip().splitlines()) == 6


def test_economics_with_cost_file(capsys):
    assert dispatch(["economics", DATASET, "--cost", str(PB560_PATH.parent / "cost.json")]) == 0
    assert "55923 s" in capsys.readouterr().out


def test_safety_speed_stop(capsys):
    assert dispatch(["safety-speed", "--distance-mm", "500"]) == 0
    assert "Monitored stop" in capsys.readouterr().out


def test_safety_speed_collaborative(tmp_path):
    out = tmp_path / "speed.json"
    assert dispatch(["safety-speed", "--distance-mm", "5000", "--zone", "collaborative", "--out", str(out)]) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["allowed_speed_mm_s"] == 250.0


def test_report_is_reproducible(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert dispatch(["report", DATASET, "--seed", "7", "--out", str(first)]) == 0
    assert dispatch(["report", DATASET, "--seed", "7", "--out", str(second)]) == 0

    def without_timestamp(path):
        document = json.loads(path.read_text(encoding="utf-8"))
        del document["manifest"]["timestamp"]
        return document

    assert without_timestamp(first) == without_timestamp(second)
    assert without_timestamp(first)["manifest"]["seed"] == 7


def test_config_file_sets_defaults(tmp_path):
    path = tmp_path / "cell.env"
    path.write_text("CELL_SEED=9\nCELL_REPLICATIONS=4\nCELL_TIME_MODEL=triangular\nCELL_BUFFER=inf\n", encoding="utf-8")
    settings = CellConfig(path)
    assert settings.seed == 9
    assert settings.replications == 4
    assert settings.time_model().kind is TimeModelKind.TRIANGULAR
    assert settings.get_optional_int("CELL_BUFFER") is None


def test_config_defaults_without_file():
    settings = CellConfig()
    assert settings.seed == 42
    assert settings.time_model().kind is TimeModelKind.DETERMINISTIC
    assert settings.safety_config().v_collab_cap_mm_s == 250.0


@pytest.mark.parametrize(
    "line",
    ["CELL_SEED=abc", "CELL_TIME_MODEL=gamma", "CELL_CHARGING=maybe", "CELL_LOG_LEVEL=LOUD"],
)
def test_bad_config_values(tmp_path, line):
    path = tmp_path / "cell.env"
    path.write_text(line + "\n", encoding="utf-8")
    settings = CellConfig(path)
    with pytest.raises(ConfigError):
        settings.seed
        settings.time_model()
        settings.get_bool("CELL_CHARGING")
        settings.log_level


def test_missing_config_file_is_input_error(tmp_path):
    assert dispatch(["validate", DATASET, "--config", str(tmp_path / "none.env")]) == 2


def test_csv_suffix_selects_table_output(tmp_path):
    out = tmp_path / "table.csv"
    assert dispatch(["scenarios", DATASET, "--n", "3", "--seed", "1", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open(encoding="utf-8")))
    assert len(rows) == 3
    assert (tmp_path / "table.csv.manifest.json").exists()


def test_csv_suffix_without_table_is_usage_error(tmp_path, capsys):
    out = tmp_path / "economics.csv"
    assert dispatch(["economics", DATASET, "--out", str(out)]) == 2
    assert ".json" in capsys.readouterr().out
    assert not out.exists()


def test_buffer_override_does_not_stick(pb560):
    settings = CellConfig()
    assert settings.sim_config(pb560.shift, buffer_capacity="inf").buffer_capacity is None
    assert settings.sim_config(pb560.shift).buffer_capacity == 1
    assert settings.sim_config(pb560.shift, buffer_capacity="0").buffer_capacity == 0
    with pytest.raises(ConfigError):
        settings.sim_config(pb560.shift, buffer_capacity="big")


def test_every_safety_parameter_is_configurable(tmp_path):
    path = tmp_path / "cell.env"
    path.write_text(
        "\n".join(
            [
                "CELL_ROBOT_MAX_SPEED_MM_S=1500",
                "CELL_REACTION_TIME_S=0.2",
                "CELL_STOP_TIME_S=0.5",
                "CELL_BRAKE_DECEL_MM_S2=800",
                "CELL_CLEARANCE_MM=100",
                "CELL_UNCERTAINTY_MM=40",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    cfg = CellConfig(path).safety_config()
    assert cfg.v_max_mm_s == 1500.0
    assert cfg.t_r_s == 0.2
    assert cfg.t_s_s == 0.5
    assert cfg.a_brake_mm_s2 == 800.0
    assert cfg.clearance_mm == 100.0
    assert cfg.uncertainty_mm == 40.0


def test_negative_safety_setting_is_config_error(tmp_path):
    path = tmp_path / "cell.env"
    path.write_text("CELL_REACTION_TIME_S=-1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        CellConfig(path).safety_config()


def test_failure_causes_from_config(tmp_path, pb560):
    path = tmp_path / "cell.env"
    path.write_text("CELL_MTTF_S=3600\nCELL_FAILURE_CAUSES=collision:3, delay\n", encoding="utf-8")
    cfg = CellConfig(path).sim_config(pb560.shift)
    assert cfg.failure_causes == {"collision": 3.0, "delay": 1.0}
    assert cfg.failures_enabled

    path.write_text("CELL_FAILURE_CAUSES=collision:often\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        CellConfig(path).sim_config(pb560.shift)
