"""
Seeded discrete-event simulation of a balanced serial line on simpy

Each station is a simpy process that takes a unit from its input store,
works on it, and waits on a put into the downstream store until there is room
(blocking after service). Robot stations are interrupted by labelled failures,
charge after a fixed amount of busy time, and every station pays a changeover
when the product variant switches.
"""

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import simpy
from pydantic import Field, ValidationError
from scipy import stats

from assembly_model import Assignment, FrozenRecord, ShiftConfig
from line_balancer import LinePlan
from planning_errors import ConfigError

logger = logging.getLogger(__name__)

TRUNCATION_ATTEMPTS = 100
TRUNCATION_FLOOR = 0.01

# one independent random stream per (station, purpose)
STREAM_PURPOSES = {"process": 0, "failure": 1, "repair": 2, "cause": 3}

DEFAULT_FAILURE_CAUSES = {"collision": 1.0, "incorrect_part": 1.0, "delay": 1.0}
CHARGING = "charging"

TRACE_CSV_HEADER = ["t_s", "station", "event", "unit_id"]


class TimeModelKind(str, Enum):
    DETERMINISTIC = "deterministic"
    NORMAL_TRUNCATED = "normal_truncated"
    TRIANGULAR = "triangular"


class TimeModel(FrozenRecord):
    """Distribution of a task time around its nominal duration"""

    kind: TimeModelKind = TimeModelKind.DETERMINISTIC
    cv: float = 0.0
    min_factor: float = 1.0
    max_factor: float = 1.0

    @classmethod
    def normal(cls, cv: float) -> "TimeModel":
        return cls(kind=TimeModelKind.NORMAL_TRUNCATED, cv=cv)

    @classmethod
    def triangular(cls, min_factor: float, max_factor: float) -> "TimeModel":
        return cls(kind=TimeModelKind.TRIANGULAR, min_factor=min_factor, max_factor=max_factor)

    @property
    def is_random(self) -> bool:
        if self.kind is TimeModelKind.NORMAL_TRUNCATED:
            return self.cv > 0
        if self.kind is TimeModelKind.TRIANGULAR:
            return self.min_factor < self.max_factor
        return False


class SimConfig(FrozenRecord):
    """Parameters of one stochastic run; numeric ranges are checked by check_sim_config"""

    shift: ShiftConfig
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    replications: int = 1
    time_model: TimeModel = TimeModel()
    task_time_models: Dict[int, TimeModel] = {}
    buffer_capacity: Optional[int] = 1
    mttf_s: Optional[float] = None
    mttr_s: float = 0.0
    # relative weights of the labels drawn for each failure
    failure_causes: Dict[str, float] = dict(DEFAULT_FAILURE_CAUSES)
    changeover_s: float = 0.0
    changeover_every_units: Optional[int] = None
    charge_interval_s: Optional[float] = None
    charge_duration_s: float = 0.0

    @classmethod
    def from_document(cls, document: dict) -> "SimConfig":
        try:
            cfg = cls.model_validate(document)
        except ValidationError as e:
            raise ConfigError(f"Invalid simulation config: {e.errors()[0]['msg']}") from e
        check_sim_config(cfg)
        return cfg

    @property
    def failures_enabled(self) -> bool:
        return self.mttf_s is not None and math.isfinite(self.mttf_s)

    @property
    def charging_enabled(self) -> bool:
        return self.charge_interval_s is not None and self.charge_duration_s > 0


class SimResult(FrozenRecord):
    replication: int
    seed: int
    completed_units: int
    units_entered: int
    wip_at_horizon: int
    throughput_per_shift: float
    station_utilization: Tuple[float, ...]
    downtime_s: Tuple[float, ...]
    downtime_by_cause: Dict[str, float]
    setup_s: Tuple[float, ...]
    blocked_s: Tuple[float, ...]
    avg_wip: float
    avg_lead_time_s: Optional[float]
    event_count: int
    bottleneck_station: int
    takt_compliance: bool
    trace_digest: str


class FieldStats(FrozenRecord):
    mean: Optional[float]
    stddev: Optional[float]
    ci95: Optional[float]


class Aggregate(FrozenRecord):
    seed: int
    replications: int
    fields: Dict[str, FieldStats]
    per_station: Dict[str, Tuple[FieldStats, ...]]
    per_cause: Dict[str, FieldStats] = {}


SCALAR_FIELDS = (
    "completed_units",
    "units_entered",
    "wip_at_horizon",
    "throughput_per_shift",
    "avg_wip",
    "avg_lead_time_s",
    "event_count",
)
STATION_FIELDS = ("station_utilization", "downtime_s", "setup_s", "blocked_s")


def check_sim_config(cfg: SimConfig) -> None:
    """Raise ConfigError for invalid distribution or process parameters"""
    models = [cfg.time_model, *cfg.task_time_models.values()]
    for model in models:
        if model.cv < 0:
            raise ConfigError(f"Coefficient of variation must be >= 0, got {model.cv}")
        if not model.min_factor <= 1.0 <= model.max_factor:
            raise ConfigError(
                f"Triangular factors must satisfy min <= 1 <= max, got {model.min_factor}, {model.max_factor}"
            )
        if model.min_factor <= 0:
            raise ConfigError("Triangular min_factor must be positive")
    if cfg.replications < 1:
        raise ConfigError("At least one replication is required")
    if cfg.buffer_capacity is not None and cfg.buffer_capacity < 0:
        raise ConfigError("Buffer capacity cannot be negative")
    if cfg.mttf_s is not None and not cfg.mttf_s > 0:
        raise ConfigError(f"MTTF must be positive, got {cfg.mttf_s}")
    if cfg.mttr_s < 0:
        raise ConfigError("MTTR cannot be negative")
    if not cfg.failure_causes:
        raise ConfigError("At least one failure cause is required")
    for cause, weight in cfg.failure_causes.items():
        if not cause or cause == CHARGING:
            raise ConfigError(f"Invalid failure cause label {cause!r}")
        if not weight > 0:
            raise ConfigError(f"Failure cause weight must be positive, got {cause}={weight}")
    if cfg.changeover_s < 0:
        raise ConfigError("Changeover time cannot be negative")
    if cfg.changeover_every_units is not None and cfg.changeover_every_units < 1:
        raise ConfigError("Variant batch size must be at least one unit")
    if cfg.charge_interval_s is not None and not cfg.charge_interval_s > 0:
        raise ConfigError("Charge interval must be positive")
    if cfg.charge_duration_s < 0:
        raise ConfigError("Charge duration cannot be negative")


def random_stream(seed: int, replication: int, station: int, purpose: str) -> np.random.Generator:
    """Counter-based Philox stream keyed by (replication, station, purpose)"""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(replication, station, STREAM_PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(sequence))


def sample_duration(mean_s: float, model: TimeModel, rng: np.random.Generator) -> float:
    """Draw one task time; deterministic models consume no randomness"""
    if model.kind is TimeModelKind.NORMAL_TRUNCATED and model.cv > 0:
        sigma = model.cv * mean_s
        for _ in range(TRUNCATION_ATTEMPTS):
            value = float(rng.normal(mean_s, sigma))
            if value > 0:
                return value
        return TRUNCATION_FLOOR * mean_s
    if model.kind is TimeModelKind.TRIANGULAR and model.min_factor < model.max_factor:
        return float(rng.triangular(model.min_factor * mean_s, mean_s, model.max_factor * mean_s))
    return float(mean_s)


def bottleneck_index(line: LinePlan) -> int:
    """1-based index of the last station carrying the maximal load"""
    top = line.max_load_s
    return max(station.index for station in line.stations if station.load_s == top)


def bottleneck_bound(line: LinePlan, horizon_s: float) -> int:
    return math.ceil(horizon_s / line.max_load_s)


def deterministic_units(line: LinePlan, horizon_s: float) -> int:
    """Serial-line recurrence: first unit after the sum of loads, then one per bottleneck load"""
    if line.total_time_s > horizon_s:
        return 0
    return 1 + int((horizon_s - line.total_time_s) // line.max_load_s)


@dataclass
class _StationState:
    index: int
    resource: Assignment
    task_ids: Tuple[int, ...]
    task_durations_s: Tuple[int, ...]
    process: Optional[simpy.Process] = None
    working: bool = False
    busy_s: float = 0.0
    downtime_s: float = 0.0
    setup_s: float = 0.0
    blocked_s: float = 0.0
    blocked_since: Optional[float] = None
    down_since: Optional[float] = None
    down_cause: Optional[str] = None
    busy_since_charge: float = 0.0
    last_variant: Optional[int] = None


class SerialLineSimulation:
    """One replication of the serial line in its own simpy.Environment"""

    def __init__(self, line: LinePlan, cfg: SimConfig, replication: int = 0, trace: Optional[list] = None):
        check_sim_config(cfg)
        self.line = line
        self.cfg = cfg
        self.replication = replication
        self.horizon = float(cfg.shift.duration_s)
        self.trace = trace
        self.env = simpy.Environment()

        self.stations = [
            _StationState(
                index=station.index,
                resource=station.resource,
                task_ids=station.task_ids,
                task_durations_s=station.task_durations_s,
            )
            for station in line.stations
        ]
        # a zero-capacity buffer is a one-slot store whose put also waits for the pickup
        self.handoff = cfg.buffer_capacity == 0
        capacity = math.inf if cfg.buffer_capacity is None else max(cfg.buffer_capacity, 1)
        self.buffers = [simpy.Store(self.env, capacity=capacity) for _ in range(len(self.stations) - 1)]
        self._streams: Dict[Tuple[int, str], np.random.Generator] = {}

        self.causes = list(cfg.failure_causes)
        weights = np.array([cfg.failure_causes[c] for c in self.causes], dtype=float)
        self.cause_probabilities = weights / weights.sum()
        self.downtime_by_cause = {cause: 0.0 for cause in [*self.causes, CHARGING]}

        self.event_count = 0
        self._digest = hashlib.sha256()

        self.next_unit = 1
        self.entered_at: Dict[int, float] = {}
        self.completed = 0
        self.lead_time_total = 0.0
        self.wip = 0
        self._wip_area = 0.0
        self._wip_since = 0.0

    def _stream(self, station: int, purpose: str) -> np.random.Generator:
        key = (station, purpose)
        if key not in self._streams:
            self._streams[key] = random_stream(self.cfg.seed, self.replication, station, purpose)
        return self._streams[key]

    def _record(self, station: int, event: str, unit: Optional[int] = None) -> None:
        now = self.env.now
        line = f"{now:.6f},{station},{event},{'' if unit is None else unit}\n"
        self._digest.update(line.encode("ascii"))
        if self.trace is not None:
            self.trace.append((now, station, event, unit))

    def _set_wip(self, wip: int) -> None:
        now = self.env.now
        self._wip_area += self.wip * (now - self._wip_since)
        self._wip_since = now
        self.wip = wip

    def _model_for(self, task_id: int) -> TimeModel:
        return self.cfg.task_time_models.get(task_id, self.cfg.time_model)

    def _variant(self, unit: int) -> int:
        every = self.cfg.changeover_every_units
        return 0 if every is None else (unit - 1) // every

    def _enter(self, st: _StationState) -> int:
        unit = self.next_unit
        self.next_unit += 1
        self.entered_at[unit] = self.env.now
        self._set_wip(self.wip + 1)
        self._record(st.index, "enter", unit)
        return unit

    def _station(self, st: _StationState):
        position = st.index - 1
        last = position == len(self.stations) - 1
        while True:
            if position == 0:
                if self.env.now >= self.horizon:
                    return
                unit = self._enter(st)
            else:
                unit, taken = yield self.buffers[position - 1].get()
                if taken is not None:
                    taken.succeed()

            yield from self._work(st, unit)

            if last:
                self._complete(st, unit)
            else:
                yield from self._release(st, unit)

            if self._charge_due(st):
                st.busy_since_charge -= self.cfg.charge_interval_s
                self._record(st.index, "charge_start")
                yield from self._outage(st, CHARGING, self.cfg.charge_duration_s)
                self._record(st.index, "charge_end")

    def _work(self, st: _StationState, unit: int):
        work = 0.0
        for task_id, duration in zip(st.task_ids, st.task_durations_s):
            model = self._model_for(task_id)
            if model.is_random:
                work += sample_duration(duration, model, self._stream(st.index, "process"))
            else:
                work += float(duration)

        setup = 0.0
        variant = self._variant(unit)
        if st.last_variant is not None and variant != st.last_variant:
            setup = self.cfg.changeover_s
            st.setup_s += setup
            self._record(st.index, "changeover", unit)
        st.last_variant = variant
        self._record(st.index, "start", unit)

        remaining = setup + work
        while remaining > 0:
            started = self.env.now
            st.working = True
            try:
                yield self.env.timeout(remaining)
                remaining = 0.0
            except simpy.Interrupt as interrupt:
                # the in-progress operation resumes after the repair
                remaining -= self.env.now - started
                st.working = False
                cause, repair = interrupt.cause
                self._record(st.index, f"failure:{cause}", unit)
                yield from self._outage(st, cause, repair)
                self._record(st.index, "repair", unit)
        st.working = False

        st.busy_s += work
        if self.cfg.charging_enabled and st.resource is Assignment.ROBOT:
            st.busy_since_charge += work
        self._record(st.index, "finish", unit)

    def _release(self, st: _StationState, unit: int):
        taken = self.env.event() if self.handoff else None
        st.blocked_since = self.env.now
        yield self.buffers[st.index - 1].put((unit, taken))
        if taken is not None:
            yield taken
        st.blocked_s += self.env.now - st.blocked_since
        st.blocked_since = None

    def _complete(self, st: _StationState, unit: int) -> None:
        self.completed += 1
        self.lead_time_total += self.env.now - self.entered_at.pop(unit)
        self._set_wip(self.wip - 1)
        self._record(st.index, "complete", unit)

    def _charge_due(self, st: _StationState) -> bool:
        if not self.cfg.charging_enabled or st.resource is not Assignment.ROBOT:
            return False
        return st.busy_since_charge >= self.cfg.charge_interval_s

    def _outage(self, st: _StationState, cause: str, duration: float):
        st.down_since = self.env.now
        st.down_cause = cause
        yield self.env.timeout(duration)
        self._close_outage(st, self.env.now)

    def _close_outage(self, st: _StationState, until: float) -> None:
        elapsed = until - st.down_since
        st.downtime_s += elapsed
        self.downtime_by_cause[st.down_cause] += elapsed
        st.down_since = None
        st.down_cause = None

    def _breakdowns(self, st: _StationState):
        """Failures only strike a station that is working; the clock restarts after each repair"""
        failures = self._stream(st.index, "failure")
        repairs = self._stream(st.index, "repair")
        causes = self._stream(st.index, "cause")
        while True:
            yield self.env.timeout(float(failures.exponential(self.cfg.mttf_s)))
            if not st.working:
                continue
            cause = self.causes[int(causes.choice(len(self.causes), p=self.cause_probabilities))]
            repair = float(repairs.exponential(self.cfg.mttr_s)) if self.cfg.mttr_s > 0 else 0.0
            st.process.interrupt((cause, repair))
            yield self.env.timeout(repair)

    def run(self) -> SimResult:
        for st in self.stations:
            st.process = self.env.process(self._station(st))
        if self.cfg.failures_enabled:
            for st in self.stations:
                if st.resource is Assignment.ROBOT:
                    self.env.process(self._breakdowns(st))

        # completions at exactly the horizon still count
        while self.env.peek() <= self.horizon:
            self.env.step()
            self.event_count += 1
        return self._result()

    def _result(self) -> SimResult:
        horizon = self.horizon
        for st in self.stations:
            if st.blocked_since is not None:
                st.blocked_s += horizon - st.blocked_since
                st.blocked_since = None
            if st.down_since is not None:
                self._close_outage(st, horizon)
        self._wip_area += self.wip * (horizon - self._wip_since)
        self._wip_since = horizon

        return SimResult(
            replication=self.replication,
            seed=self.cfg.seed,
            completed_units=self.completed,
            units_entered=self.next_unit - 1,
            wip_at_horizon=self.next_unit - 1 - self.completed,
            throughput_per_shift=self.completed * self.cfg.shift.duration_s / horizon,
            station_utilization=tuple(st.busy_s / horizon for st in self.stations),
            downtime_s=tuple(st.downtime_s for st in self.stations),
            downtime_by_cause=dict(self.downtime_by_cause),
            setup_s=tuple(st.setup_s for st in self.stations),
            blocked_s=tuple(st.blocked_s for st in self.stations),
            avg_wip=self._wip_area / horizon,
            avg_lead_time_s=self.lead_time_total / self.completed if self.completed else None,
            event_count=self.event_count,
            bottleneck_station=bottleneck_index(self.line),
            takt_compliance=self.completed >= self.cfg.shift.demand_units,
            trace_digest=self._digest.hexdigest(),
        )


def run_sim(line: LinePlan, cfg: SimConfig, replication_index: int = 0, trace: Optional[list] = None) -> SimResult:
    """
    Simulate one replication of the line over one shift

    Args:
        line: feasible LinePlan
        cfg: simulation parameters
        replication_index: selects the random streams together with cfg.seed
        trace: optional list receiving (t_s, station, event, unit_id) tuples

    Returns:
        SimResult for the replication

    Raises:
        ConfigError: invalid distribution or process parameters
    """
    result = SerialLineSimulation(line, cfg, replication_index, trace).run()
    logger.debug(
        "Replication %d: %d units, %d events",
        replication_index,
        result.completed_units,
        result.event_count,
    )
    return result


def replicate(line: LinePlan, cfg: SimConfig, jobs: int = 1) -> List[SimResult]:
    """Run replications 0..n-1, optionally in parallel; results ordered by index"""
    check_sim_config(cfg)
    indices = range(cfg.replications)
    if jobs <= 1:
        return [run_sim(line, cfg, i) for i in indices]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(lambda i: run_sim(line, cfg, i), indices))


def _field_stats(values: List[Optional[float]]) -> FieldStats:
    present = [float(v) for v in values if v is not None]
    if not present:
        return FieldStats(mean=None, stddev=None, ci95=None)
    n = len(present)
    if max(present) == min(present):
        mean, stddev = present[0], 0.0
    else:
        array = np.array(present)
        mean, stddev = float(array.mean()), float(array.std(ddof=1))
    if n == 1:
        return FieldStats(mean=mean, stddev=None, ci95=None)
    half_width = float(stats.t.ppf(0.975, n - 1)) * stddev / math.sqrt(n)
    return FieldStats(mean=mean, stddev=stddev, ci95=half_width)


def aggregate(results: List[SimResult], seed: int) -> Aggregate:
    """Mean, sample standard deviation and Student-t 95% half-width per field"""
    fields = {name: _field_stats([getattr(r, name) for r in results]) for name in SCALAR_FIELDS}
    per_station = {}
    station_count = len(results[0].station_utilization) if results else 0
    for name in STATION_FIELDS:
        per_station[name] = tuple(
            _field_stats([getattr(r, name)[i] for r in results]) for i in range(station_count)
        )
    causes = list(results[0].downtime_by_cause) if results else []
    per_cause = {cause: _field_stats([r.downtime_by_cause[cause] for r in results]) for cause in causes}
    return Aggregate(
        seed=seed,
        replications=len(results),
        fields=fields,
        per_station=per_station,
        per_cause=per_cause,
    )


def run_replications(line: LinePlan, cfg: SimConfig, jobs: int = 1) -> Aggregate:
    """Run cfg.replications independent replications and aggregate them"""
    results = replicate(line, cfg, jobs)
    logger.info("Ran %d replications of %s", len(results), line.product)
    return aggregate(results, cfg.seed)


def trace_rows(trace: list) -> List[Dict[str, str]]:
    """CSV rows: t_s,station,event,unit_id"""
    return [
        {"t_s": f"{t:.6f}", "station": str(station), "event": event, "unit_id": "" if unit is None else str(unit)}
        for t, station, event, unit in trace
    ]
