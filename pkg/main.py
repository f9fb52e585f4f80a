"""
Human-humanoid assembly cell planner
Command-line entry point: validate -> allocate -> balance -> simulate -> report
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from assembly_model import Dataset, dataset_digest, load_dataset
from cell_config import CellConfig
from line_balancer import (
    LINE_CSV_HEADER,
    ORACLE_MAX_TASKS,
    balance_line,
    min_stations,
    oracle_min_stations,
    resource_lower_bound,
    takt,
    verify_line_plan,
)
from line_simulator import TRACE_CSV_HEADER, SimResult, aggregate, replicate, run_sim, trace_rows
from planning_errors import EXIT_INPUT, EXIT_INTERNAL, EXIT_OK, InvariantError, PlanningError
from report_builder import (
    attach_manifest,
    build_report,
    make_manifest,
    validate_report,
    write_csv,
    write_json,
)
from safety_governor import Zone, allowed_speed, protective_distance, safety_checklist
from scenario_runner import (
    SCENARIO_CSV_HEADER,
    CostConfig,
    ScenarioBatch,
    VariantRule,
    economics as shift_economics,
    load_cost,
    load_rule,
)
from task_allocator import ALLOCATION_CSV_HEADER, allocate_all, allocation_rows, application_areas, automation_metrics

logger = logging.getLogger("cell_planner")

SIM_CSV_HEADER = [
    "replication",
    "seed",
    "completed_units",
    "units_entered",
    "wip_at_horizon",
    "throughput_per_shift",
    "avg_wip",
    "avg_lead_time_s",
    "event_count",
    "takt_compliance",
    "trace_digest",
]


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed, a non-negative integer (default from config)")
    common.add_argument("--out", type=Path, help="write the machine-readable artifact to this path")
    common.add_argument("--csv", action="store_true", help="write the artifact as CSV (implied by an --out path ending in .csv)")
    common.add_argument("--jobs", type=int, help="parallel workers, at least 1 (default from config)")
    common.add_argument("--config", type=Path, help="dotenv settings file, see env_template.txt")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="cell-planner",
        description="Plan and simulate a human-humanoid collaborative assembly cell",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_dataset(name: str, help_text: str) -> argparse.ArgumentParser:
        command = sub.add_parser(name, parents=[common], help=help_text)
        command.add_argument("dataset", type=Path, help="dataset JSON, e.g. data/pb560.json")
        return command

    with_dataset("validate", "check a dataset and print its summary")

    allocate = with_dataset("allocate", "rule-based Robot/Human allocation")
    allocate.add_argument("--ignore-forced", action="store_true", help="apply the criteria rule only")

    balance = with_dataset("balance", "balance the line at takt")
    balance.add_argument("--takt-s", type=int, help="override takt in whole seconds")
    balance.add_argument("--with-safety", action="store_true", help="add the safety checklist")
    balance.add_argument("--verify", action="store_true", help=f"run the exact oracle (up to {ORACLE_MAX_TASKS} tasks)")

    simulate = with_dataset("simulate", "discrete-event simulation of the balanced line")
    simulate.add_argument("--reps", type=int, help="replications, at least 1")
    simulate.add_argument("--shift-s", type=int, help="shift length in seconds, positive")
    simulate.add_argument("--buffer", help="units per inter-station buffer, or 'inf'")
    simulate.add_argument("--trace", type=Path, help="event trace CSV of replication 0")

    scenarios = with_dataset("scenarios", "generate and run product variants")
    scenarios.add_argument("--n", type=int, default=50, help="number of variants, 0 or more")
    scenarios.add_argument("--rule", type=Path, help="variant rule JSON, e.g. data/rule.json")

    econ = with_dataset("economics", "labour saving and payback of the automated tasks")
    econ.add_argument("--cost", type=Path, help="cost model JSON, e.g. data/cost.json")

    speed = sub.add_parser("safety-speed", parents=[common], help="speed allowed at a human-robot separation")
    speed.add_argument("--distance-mm", type=float, required=True, help="separation in mm, 0 or more")
    speed.add_argument("--zone", choices=[z.value for z in Zone], default=Zone.OPEN.value, help="floor zone")
    speed.add_argument("--human-speed", type=float, help="human approach speed in mm/s")

    report = with_dataset("report", "full planning report as one JSON document")
    report.add_argument("--cost", type=Path, help="cost model JSON, e.g. data/cost.json")
    return parser


class CellPlanner:
    """Runs one subcommand against explicit inputs"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.settings = CellConfig(args.config)
        self.seed = self.settings.seed if args.seed is None else args.seed
        self.jobs = self.settings.jobs if args.jobs is None else args.jobs
        if self.seed < 0:
            raise InvariantError("--seed must be a non-negative integer")
        if self.jobs < 1:
            raise InvariantError("--jobs must be at least 1")
        self.dataset: Optional[Dataset] = None
        if getattr(args, "dataset", None) is not None:
            self.dataset = load_dataset(args.dataset)

    def manifest(self, seed: Optional[int] = None):
        digest = dataset_digest(self.dataset) if self.dataset is not None else ""
        return make_manifest(digest, seed, self.args.command)

    def emit(self, payload: dict, header: Optional[List[str]] = None, rows: Optional[list] = None, seed=None) -> None:
        """Machine artifacts only go to --out"""
        out = self.args.out
        if out is None:
            return
        as_csv = self.args.csv or out.suffix.lower() == ".csv"
        if as_csv and header is None:
            raise InvariantError(f"{self.args.command} has no table output; write JSON with an --out path ending in .json")
        if as_csv:
            write_csv(out, header, rows or [], self.manifest(seed))
        else:
            write_json(out, attach_manifest(payload, self.manifest(seed)))
        print(f"💾 Results saved to: {out}")

    def validate(self) -> int:
        product = self.dataset.product
        print(f"✅ {product.name}: {len(product.tasks)} tasks, {product.total_time_s} s per unit")
        print(f"📊 Shift {self.dataset.shift.duration_s} s, demand {self.dataset.shift.demand_units} units")
        self.emit({"product": product.name, "tasks": len(product.tasks), "total_time_s": product.total_time_s})
        return EXIT_OK

    def allocate(self) -> int:
        product = self.dataset.product
        plan = allocate_all(product, honour_forced=not self.args.ignore_forced)
        metrics = automation_metrics(plan, product)
        print(f"🤖 Robot tasks: {metrics.robot_tasks}/{metrics.total_tasks} ({metrics.task_share:.0%})")
        print(f"⏱️  Automated time: {metrics.automated_time_s} s ({metrics.time_share:.2%})")
        print(f"👷 Manual time: {metrics.manual_time_s} s")
        payload = {
            "metrics": metrics.model_dump(mode="json"),
            "entries": [entry.model_dump(mode="json") for entry in plan.entries],
            "application_areas": application_areas(plan, product),
        }
        self.emit(payload, ALLOCATION_CSV_HEADER, allocation_rows(plan))
        return EXIT_OK

    def balance(self) -> int:
        product = self.dataset.product
        plan = allocate_all(product)
        takt_s = self.args.takt_s if self.args.takt_s is not None else takt(self.dataset.shift)
        line = balance_line(product, plan, takt_s)

        print(f"📐 Takt {takt_s} s, theoretical minimum {min_stations(product.total_time_s, takt_s)} stations")
        print("=" * 60)
        for station in line.stations:
            tasks = ", ".join(str(t) for t in station.task_ids)
            print(f"  S{station.index} {station.resource.value:<5} [{tasks}] load {station.load_s} s, idle {station.idle_s} s")
        print("=" * 60)
        print(f"📊 {line.station_count} stations, idle {line.idle_total_s} s, efficiency {line.efficiency:.2%}")

        payload = {"line": line.model_dump(mode="json"), "violations": verify_line_plan(product, plan, line)}
        if payload["violations"]:
            for violation in payload["violations"]:
                print(f"❌ {violation}")
            raise InvariantError(f"Line plan failed verification with {len(payload['violations'])} violations")

        if self.args.verify:
            payload["oracle"] = self._verify(product, plan, takt_s, line.station_count)
        if self.args.with_safety:
            checklist = safety_checklist(line, self.settings.safety_config())
            payload["safety"] = checklist.model_dump(mode="json")
            for entry in checklist.stations:
                print(f"🛡️  S{entry.index} {entry.zone.value}, cap {entry.speed_cap_mm_s:.0f} mm/s: {', '.join(entry.requirements)}")

        rows = [
            {
                "station": str(s.index),
                "resource": s.resource.value,
                "tasks": ";".join(str(t) for t in s.task_ids),
                "load_s": str(s.load_s),
                "idle_s": str(s.idle_s),
            }
            for s in line.stations
        ]
        self.emit(payload, LINE_CSV_HEADER, rows)
        return EXIT_OK

    def _verify(self, product, plan, takt_s: int, heuristic: int) -> dict:
        bound = resource_lower_bound(product, plan, takt_s)
        if len(product.tasks) <= ORACLE_MAX_TASKS:
            optimum = oracle_min_stations(product, plan, takt_s)
            print(f"🔍 Oracle optimum: {optimum} stations (heuristic {heuristic})")
            return {"method": "exhaustive", "optimum": optimum, "heuristic": heuristic}
        if bound == heuristic:
            print(f"🔍 Resource lower bound {bound} equals the heuristic: optimal")
            return {"method": "lower_bound", "optimum": bound, "heuristic": heuristic}
        print(f"⚠️  Instance above {ORACLE_MAX_TASKS} tasks; lower bound {bound}, heuristic {heuristic}")
        return {"method": "lower_bound", "optimum": None, "lower_bound": bound, "heuristic": heuristic}

    def _sim_config(self, shift, replications=None, buffer=None):
        humanoid = self.dataset.humanoid()
        return self.settings.sim_config(
            shift,
            seed=self.seed,
            replications=replications,
            buffer_capacity=buffer,
            charge_interval_s=humanoid.charge_interval_s if humanoid else None,
            charge_duration_s=humanoid.charge_duration_s if humanoid else None,
        )

    def simulate(self) -> int:
        shift = self.dataset.shift
        if self.args.shift_s is not None:
            if self.args.shift_s <= 0:
                raise InvariantError("--shift-s must be a positive number of seconds")
            shift = shift.model_copy(update={"duration_s": self.args.shift_s})
        if self.args.reps is not None and self.args.reps < 1:
            raise InvariantError("--reps must be at least 1")

        product = self.dataset.product
        line = balance_line(product, allocate_all(product), takt(self.dataset.shift))
        cfg = self._sim_config(shift, self.args.reps, self.args.buffer)

        results = replicate(line, cfg, jobs=self.jobs)
        summary = aggregate(results, cfg.seed)
        units = summary.fields["completed_units"]
        print(f"🚀 {cfg.replications} replications, seed {cfg.seed}, shift {shift.duration_s} s")
        print(f"📦 Completed units: mean {units.mean:.2f}" + (f" ± {units.ci95:.2f}" if units.ci95 is not None else ""))
        print(f"🎯 Demand {shift.demand_units}: {'met' if units.mean >= shift.demand_units else 'not met'}")
        for cause, stats in summary.per_cause.items():
            if stats.mean:
                print(f"🔧 Downtime from {cause}: mean {stats.mean:.0f} s per shift")

        if self.args.trace is not None:
            trace: list = []
            run_sim(line, cfg, 0, trace)
            write_csv(self.args.trace, TRACE_CSV_HEADER, trace_rows(trace), self.manifest(cfg.seed))
            print(f"💾 Event trace saved to: {self.args.trace}")

        payload = {"aggregate": summary.model_dump(mode="json"), "replications": [r.model_dump(mode="json") for r in results]}
        self.emit(payload, SIM_CSV_HEADER, [_sim_row(r) for r in results], seed=cfg.seed)
        return EXIT_OK

    def scenarios(self) -> int:
        if self.args.n < 0:
            raise InvariantError("--n must be 0 or more")
        rule = load_rule(self.args.rule) if self.args.rule else VariantRule()
        rule = rule.model_copy(update={"seed": self.seed})
        batch = ScenarioBatch(self.dataset, rule, self._sim_config(self.dataset.shift, replications=1), jobs=self.jobs)
        batch.run(self.args.n)
        batch.print_summary()
        payload = {"summary": batch.summary(), "rows": [row.model_dump(mode="json") for row in batch.rows]}
        self.emit(payload, SCENARIO_CSV_HEADER, [row.csv_row() for row in batch.rows], seed=self.seed)
        return EXIT_OK

    def economics(self) -> int:
        product = self.dataset.product
        cost = load_cost(self.args.cost) if self.args.cost else CostConfig()
        plan = allocate_all(product)
        line = balance_line(product, plan, takt(self.dataset.shift))
        result = run_sim(line, self._sim_config(self.dataset.shift, replications=1))
        saving = shift_economics(result, plan, cost, product, self.dataset.shift)
        print(f"💰 Labour saved per shift: {saving.labor_s_saved_per_shift:.0f} s ({saving.labor_s_saved_per_shift / 3600:.2f} h)")
        print(f"📈 Annual saving: {saving.annual_saving:.2f}")
        payback = "n/a" if saving.payback_years is None else f"{saving.payback_years:.2f} years"
        print(f"⏳ Payback: {payback}")
        self.emit({"cost": cost.model_dump(mode="json"), **saving.model_dump(mode="json")}, seed=self.seed)
        return EXIT_OK

    def safety_speed(self) -> int:
        cfg = self.settings.safety_config()
        zone = Zone(self.args.zone)
        speed = allowed_speed(self.args.distance_mm, self.args.human_speed, cfg, zone)
        v_h = cfg.v_h_mm_s if self.args.human_speed is None else self.args.human_speed
        print(f"🛡️  Separation {self.args.distance_mm:.0f} mm, {zone.value} zone: allowed speed {speed:.0f} mm/s")
        if speed == 0:
            print(f"⛔ Monitored stop: protective distance at rest is {protective_distance(0.0, v_h, cfg):.1f} mm")
        self.emit({"distance_mm": self.args.distance_mm, "zone": zone.value, "allowed_speed_mm_s": speed})
        return EXIT_OK

    def report(self) -> int:
        cost = load_cost(self.args.cost) if self.args.cost else CostConfig()
        document = build_report(
            self.dataset,
            self._sim_config(self.dataset.shift),
            cost=cost,
            safety_cfg=self.settings.safety_config(),
            jobs=self.jobs,
        )
        validate_report(document)
        balance = document["balance"]
        print(f"📊 {self.dataset.product.name}: {len(balance['line']['stations'])} stations at takt {balance['takt_s']} s")
        print(f"📦 Deterministic units per shift: {document['simulation']['deterministic_units']}")
        print(f"📝 {len(document['discrepancies'])} discrepancies noted")
        if self.args.out is not None:
            write_json(self.args.out, document)
            print(f"💾 Report saved to: {self.args.out}")
        return EXIT_OK

    def run(self) -> int:
        handler = getattr(self, self.args.command.replace("-", "_"))
        return handler()


def _sim_row(result: SimResult) -> dict:
    row = result.model_dump(mode="json")
    return {
        key: "" if row[key] is None else str(row[key]).lower() if isinstance(row[key], bool) else str(row[key])
        for key in SIM_CSV_HEADER
    }


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes

    Returns:
        0 on success, 2 on input or validation errors, 3 when infeasible, 1 otherwise
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        planner = CellPlanner(args)
        if not args.verbose:
            logging.getLogger().setLevel(planner.settings.log_level)
        return planner.run()
    except PlanningError as e:
        print(f"❌ Error: {e}")
        return e.exit_code
    except FileNotFoundError as e:
        print(f"❌ Error: {e}")
        return EXIT_INPUT
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"❌ Internal error: {e}")
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
