"""
Tests for variant generation, the scenario batch and the economics model
"""

import csv
import json

import pytest
from pydantic import ValidationError

from assembly_model import Product, ShiftConfig, dump_dataset, parse_dataset
from conftest import DATA_DIR
from line_simulator import SimConfig, run_sim
from planning_errors import ConfigError
from scenario_runner import (
    SCENARIO_CSV_HEADER,
    CostConfig,
    ScenarioBatch,
    VariantRule,
    batch_run,
    economics,
    economics_for_units,
    feasible_fraction,
    generate_variants,
    load_cost,
    load_rule,
    run_variant,
)

IDENTITY = VariantRule(lo=1.0, hi=1.0, flip_probability=0.0, seed=3)


@pytest.fixture
def sim_cfg(pb560):
    return SimConfig(shift=pb560.shift, seed=11)


def test_zero_variants(pb560):
    assert generate_variants(pb560, 0, VariantRule()) == []


def test_identity_rule_copies_base(pb560):
    variants = generate_variants(pb560, 3, IDENTITY)
    assert [v.product.name for v in variants] == ["PB560-v001", "PB560-v002", "PB560-v003"]
    for variant in variants:
        renamed = variant.model_copy(update={"product": variant.product.model_copy(update={"name": "PB560"})})
        assert dump_dataset(renamed) == dump_dataset(pb560)


def test_variants_are_seed_deterministic(pb560):
    rule = VariantRule(seed=99)
    first = [dump_dataset(v) for v in generate_variants(pb560, 5, rule)]
    second = [dump_dataset(v) for v in generate_variants(pb560, 5, rule)]
    assert first == second

    other = generate_variants(pb560, 5, VariantRule(seed=100))
    assert [dump_dataset(v) for v in other] != first


def test_variants_keep_precedence_and_validate(pb560):
    base = {t.id: t for t in pb560.product.tasks}
    for variant in generate_variants(pb560, 50, VariantRule(seed=5)):
        reparsed = parse_dataset(dump_dataset(variant))
        for task in reparsed.product.tasks:
            assert task.predecessors == base[task.id].predecessors
            assert 1 <= task.duration_s
            assert round(base[task.id].duration_s * 0.9) - 1 <= task.duration_s <= round(base[task.id].duration_s * 1.1) + 1


@pytest.mark.parametrize(
    "values",
    [{"lo": 1.1}, {"hi": 0.9}, {"lo": 0.0}, {"flip_probability": 0.6}, {"flip_probability": -0.1}],
)
def test_invalid_rules_rejected(values):
    with pytest.raises(ValidationError):
        VariantRule(**values)


def test_bundled_rule_and_cost_load():
    assert load_rule(DATA_DIR / "rule.json") == VariantRule()
    assert load_cost(DATA_DIR / "cost.json").material_handling_saved_s_per_shift == 3600.0


def test_bad_cost_file_is_config_error(tmp_path):
    path = tmp_path / "cost.json"
    path.write_text(json.dumps({"labor_rate_per_h": -1}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_cost(path)
    path.write_text("not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_cost(path)


def test_batch_of_fifty(pb560, sim_cfg):
    variants = generate_variants(pb560, 50, VariantRule(seed=1))
    rows = batch_run(variants, pb560.shift, sim_cfg)
    assert len(rows) == 50
    assert [r.variant for r in rows] == sorted(r.variant for r in rows)
    for row in rows:
        if row.feasible:
            assert row.throughput is not None and row.stations is not None
        else:
            assert row.throughput is None and row.error
    assert feasible_fraction(rows) >= 0.8

    again = batch_run(generate_variants(pb560, 50, VariantRule(seed=1)), pb560.shift, sim_cfg, jobs=4)
    assert [r.csv_row() for r in again] == [r.csv_row() for r in rows]


def test_identity_variant_matches_base_pipeline(pb560, sim_cfg):
    (variant,) = generate_variants(pb560, 1, IDENTITY)
    row = batch_run([variant], pb560.shift, sim_cfg)[0]
    direct = run_variant(pb560, pb560.shift, sim_cfg)
    assert row.model_copy(update={"variant": "PB560"}) == direct
    assert direct.stations == 5
    assert direct.throughput == 163
    assert direct.robot_task_share == pytest.approx(0.6)


def test_task_above_takt_gives_infeasible_row(pb560, sim_cfg):
    tasks = list(pb560.product.tasks)
    tasks[12] = tasks[12].model_copy(update={"duration_s": 200})
    product = Product(name="PB560-slow", tasks=tuple(tasks))
    variant = pb560.model_copy(update={"product": product})
    (row,) = batch_run([variant], pb560.shift, sim_cfg)
    assert not row.feasible
    assert row.throughput is None
    assert row.takt_compliance is None
    assert "Task 13" in row.error
    assert row.robot_task_share == pytest.approx(0.6)


def test_economics_only_credit_without_units():
    saving = economics_for_units(0, 321, _shift(), CostConfig())
    assert saving.labor_s_saved_per_shift == 3600.0


def _shift():
    return ShiftConfig(duration_s=27000, demand_units=167)


def test_economics_on_deterministic_run(pb560, pb560_plan, pb560_line):
    result = run_sim(pb560_line, SimConfig(shift=pb560.shift))
    saving = economics(result, pb560_plan, CostConfig(), pb560.product, pb560.shift)
    assert saving.labor_s_saved_per_shift == 163 * 321 + 3600 == 55923
    assert saving.labor_s_saved_per_shift / 3600 == pytest.approx(15.53, abs=0.01)


def test_economics_linear_in_rate_and_units():
    cost = CostConfig(labor_rate_per_h=30.0, shifts_per_year=250, material_handling_saved_s_per_shift=0.0)
    base = economics_for_units(100, 321, _shift(), cost)
    doubled_rate = economics_for_units(100, 321, _shift(), cost.model_copy(update={"labor_rate_per_h": 60.0}))
    doubled_units = economics_for_units(200, 321, _shift(), cost)
    assert doubled_rate.annual_saving == pytest.approx(2 * base.annual_saving)
    assert doubled_units.annual_saving == pytest.approx(2 * base.annual_saving)


def test_payback():
    free = economics_for_units(100, 321, _shift(), CostConfig(labor_rate_per_h=30.0, shifts_per_year=250))
    assert free.payback_years == 0.0

    loss = economics_for_units(
        100, 321, _shift(), CostConfig(robot_capex=1000.0, robot_operating_per_h=5.0, shifts_per_year=250)
    )
    assert loss.annual_saving < 0
    assert loss.payback_years is None


def test_scenario_batch_writes_table(pb560, sim_cfg, tmp_path, capsys):
    batch = ScenarioBatch(pb560, VariantRule(seed=2), sim_cfg)
    summary = batch.run(4)
    batch.print_summary()
    assert summary["variants"] == 4
    assert "SCENARIO BATCH SUMMARY" in capsys.readouterr().out

    path = batch.save_csv(tmp_path / "table.csv")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        assert reader.fieldnames == SCENARIO_CSV_HEADER
        assert len(list(reader)) == 4
