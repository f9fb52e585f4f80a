"""
Product-variant generation, batch execution and a linear economics model
Runs allocate -> takt -> balance -> simulate per variant and records one row each
"""

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
from pydantic import Field, ValidationError, model_validator

from assembly_model import (
    CRITERIA_NAMES,
    Assignment,
    Criteria,
    Dataset,
    FrozenRecord,
    Product,
    ShiftConfig,
    validate_product,
)
from line_balancer import balance_line, takt
from line_simulator import SimConfig, SimResult, run_replications
from planning_errors import ConfigError, InfeasibleError, PlanningError
from task_allocator import AllocationPlan, allocate_all, automation_metrics

logger = logging.getLogger(__name__)

SCENARIO_CSV_HEADER = [
    "variant",
    "robot_task_share",
    "time_share",
    "stations",
    "feasible",
    "throughput",
    "takt_compliance",
    "error",
]
SECONDS_PER_HOUR = 3600


class VariantRule(FrozenRecord):
    """Multiplicative duration range and per-criterion flip probability"""

    lo: float = 0.9
    hi: float = 1.1
    flip_probability: float = Field(default=0.05, ge=0.0, le=0.5)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _range_brackets_one(self) -> "VariantRule":
        if not 0 < self.lo <= 1 <= self.hi:
            raise ValueError(f"Duration range must satisfy 0 < lo <= 1 <= hi, got [{self.lo}, {self.hi}]")
        return self


class CostConfig(FrozenRecord):
    labor_rate_per_h: float = Field(default=0.0, ge=0)
    robot_capex: float = Field(default=0.0, ge=0)
    robot_operating_per_h: float = Field(default=0.0, ge=0)
    material_handling_saved_s_per_shift: float = Field(default=3600.0, ge=0)
    shifts_per_year: int = Field(default=0, ge=0)


class Economics(FrozenRecord):
    labor_s_saved_per_shift: float
    annual_saving: float
    payback_years: Optional[float]


class ScenarioRow(FrozenRecord):
    variant: str
    robot_task_share: Optional[float] = None
    time_share: Optional[float] = None
    stations: Optional[int] = None
    feasible: bool = False
    throughput: Optional[float] = None
    takt_compliance: Optional[bool] = None
    error: str = ""

    def csv_row(self) -> Dict[str, str]:
        def fmt(value, pattern: str = "") -> str:
            if value is None:
                return ""
            if isinstance(value, bool):
                return "true" if value else "false"
            return format(value, pattern)

        return {
            "variant": self.variant,
            "robot_task_share": fmt(self.robot_task_share, ".4f"),
            "time_share": fmt(self.time_share, ".4f"),
            "stations": fmt(self.stations),
            "feasible": fmt(self.feasible),
            "throughput": fmt(self.throughput, ".3f"),
            "takt_compliance": fmt(self.takt_compliance),
            "error": self.error,
        }


def _load_document(path: Union[str, Path], model, label: str):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{label} not found: {path}")
    try:
        return model.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{label} {path} is not JSON: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid {label.lower()} {path}: {e.errors()[0]['msg']}") from e


def load_rule(path: Union[str, Path]) -> VariantRule:
    return _load_document(path, VariantRule, "Variant rule")


def load_cost(path: Union[str, Path]) -> CostConfig:
    return _load_document(path, CostConfig, "Cost model")


def variant_name(base_name: str, index: int) -> str:
    return f"{base_name}-v{index:03d}"


def generate_variants(base: Dataset, n: int, rule: VariantRule) -> List[Dataset]:
    """
    Perturbed copies of a base dataset

    Every duration is multiplied by an independent uniform draw in [lo, hi],
    rounded to whole seconds (at least 1), and every criterion flips with the
    rule's probability. Precedence, resources and shift are unchanged.

    Args:
        base: validated dataset
        n: number of variants (0 gives an empty list)
        rule: perturbation rule; its seed fixes the whole sequence

    Returns:
        n datasets named <product>-v001, <product>-v002, ...
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rule.seed)))
    variants = []

    for index in range(1, n + 1):
        tasks = []
        factors = rng.uniform(rule.lo, rule.hi, size=len(base.product.tasks))
        flips = rng.random(size=(len(base.product.tasks), len(CRITERIA_NAMES))) < rule.flip_probability

        for task, factor, task_flips in zip(base.product.tasks, factors, flips):
            duration = max(1, int(round(task.duration_s * float(factor))))
            criteria = Criteria(
                **{
                    name: getattr(task.criteria, name) != bool(flip)
                    for name, flip in zip(CRITERIA_NAMES, task_flips)
                }
            )
            tasks.append(task.model_copy(update={"duration_s": duration, "criteria": criteria}))

        product = Product(name=variant_name(base.product.name, index), tasks=tuple(tasks))
        validate_product(product)
        variants.append(base.model_copy(update={"product": product}))

    logger.info("Generated %d variants of %s (seed %d)", n, base.product.name, rule.seed)
    return variants


def run_variant(dataset: Dataset, shift: ShiftConfig, sim_cfg: SimConfig) -> ScenarioRow:
    """One pipeline pass; planning failures become an infeasible row"""
    name = dataset.product.name
    try:
        plan = allocate_all(dataset.product)
        metrics = automation_metrics(plan, dataset.product)
    except PlanningError as e:
        logger.warning("Variant %s could not be allocated: %s", name, e)
        return ScenarioRow(variant=name, error=str(e))

    shares = {"robot_task_share": metrics.task_share, "time_share": metrics.time_share}
    try:
        line = balance_line(dataset.product, plan, takt(shift))
        aggregate = run_replications(line, sim_cfg.model_copy(update={"shift": shift}))
    except InfeasibleError as e:
        return ScenarioRow(variant=name, error=str(e), **shares)
    except PlanningError as e:
        logger.warning("Variant %s failed: %s", name, e)
        return ScenarioRow(variant=name, error=str(e), **shares)

    throughput = aggregate.fields["throughput_per_shift"].mean
    completed = aggregate.fields["completed_units"].mean
    return ScenarioRow(
        variant=name,
        stations=line.station_count,
        feasible=True,
        throughput=throughput,
        takt_compliance=completed >= shift.demand_units,
        **shares,
    )


def batch_run(
    variants: Iterable[Dataset],
    shift: ShiftConfig,
    sim_cfg: SimConfig,
    jobs: int = 1,
) -> List[ScenarioRow]:
    """Rows for every variant, sorted by variant id regardless of completion order"""
    variants = list(variants)
    if jobs <= 1:
        rows = [run_variant(v, shift, sim_cfg) for v in variants]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(lambda v: run_variant(v, shift, sim_cfg), variants))
    return sorted(rows, key=lambda row: row.variant)


def feasible_fraction(rows: List[ScenarioRow]) -> float:
    if not rows:
        return 0.0
    return sum(1 for row in rows if row.feasible) / len(rows)


def robot_time_per_unit(plan: AllocationPlan, product: Product) -> int:
    assignments = plan.assignments()
    return sum(task.duration_s for task in product.tasks if assignments.get(task.id) is Assignment.ROBOT)


def economics_for_units(
    completed_units: float,
    robot_time_s: float,
    shift: ShiftConfig,
    cost: CostConfig,
) -> Economics:
    """Linear labour-saving model; payback is None when nothing is saved"""
    labor_s_saved = robot_time_s * completed_units + cost.material_handling_saved_s_per_shift
    shift_h = shift.duration_s / SECONDS_PER_HOUR
    annual_saving = (
        labor_s_saved / SECONDS_PER_HOUR * cost.labor_rate_per_h * cost.shifts_per_year
        - cost.robot_operating_per_h * shift_h * cost.shifts_per_year
    )
    payback = cost.robot_capex / annual_saving if annual_saving > 0 else None
    return Economics(labor_s_saved_per_shift=labor_s_saved, annual_saving=annual_saving, payback_years=payback)


def economics(
    result: SimResult,
    plan: AllocationPlan,
    cost: CostConfig,
    product: Product,
    shift: ShiftConfig,
) -> Economics:
    """
    Labour time saved per shift, annual saving and payback

    Args:
        result: simulation result providing completed_units
        plan: allocation deciding which task time is automated
        cost: user-supplied cost coefficients
        product: product the plan belongs to
        shift: shift length used for robot operating hours

    Returns:
        Economics
    """
    return economics_for_units(result.completed_units, robot_time_per_unit(plan, product), shift, cost)


class ScenarioBatch:
    """Generate variants of one dataset, run them and save the table"""

    def __init__(self, base: Dataset, rule: VariantRule, sim_cfg: SimConfig, jobs: int = 1):
        self.base = base
        self.rule = rule
        self.sim_cfg = sim_cfg
        self.jobs = jobs
        self.rows: List[ScenarioRow] = []

    def run(self, n: int) -> dict:
        print(f"🚀 Running {n} variants of {self.base.product.name}")
        print("=" * 60)
        variants = generate_variants(self.base, n, self.rule)
        self.rows = batch_run(variants, self.base.shift, self.sim_cfg, jobs=self.jobs)
        return self.summary()

    def summary(self) -> dict:
        feasible = sum(1 for row in self.rows if row.feasible)
        return {
            "variants": len(self.rows),
            "feasible": feasible,
            "infeasible": len(self.rows) - feasible,
            "feasible_fraction": feasible_fraction(self.rows),
            "seed": self.rule.seed,
        }

    def print_summary(self) -> None:
        summary = self.summary()
        print("\n" + "=" * 60)
        print("📊 SCENARIO BATCH SUMMARY")
        print("=" * 60)
        print(f"📦 Variants: {summary['variants']}")
        print(f"✅ Feasible: {summary['feasible']}")
        print(f"❌ Infeasible: {summary['infeasible']}")
        print(f"📈 Feasible fraction: {summary['feasible_fraction'] * 100:.1f}%")
        print("=" * 60)

    def save_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=SCENARIO_CSV_HEADER, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row.csv_row())
        print(f"💾 Scenario table saved to: {path}")
        return path
