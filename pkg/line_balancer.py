"""
Takt-time computation and lean line balancing
Tasks are packed into resource-homogeneous stations in ranked-positional-weight order
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

from assembly_model import Assignment, FrozenRecord, Product, ShiftConfig, check_precedence, successors_closure
from planning_errors import BudgetError, DatasetValueError, InfeasibleError, InvariantError
from task_allocator import AllocationPlan

logger = logging.getLogger(__name__)

ORACLE_MAX_TASKS = 14
LINE_CSV_HEADER = ["station", "resource", "tasks", "load_s", "idle_s"]


class Station(FrozenRecord):
    index: int
    resource: Assignment
    task_ids: Tuple[int, ...]
    task_durations_s: Tuple[int, ...]
    load_s: int
    idle_s: int


class LinePlan(FrozenRecord):
    product: str
    takt_s: int
    stations: Tuple[Station, ...]
    total_time_s: int
    idle_total_s: int

    @property
    def station_count(self) -> int:
        return len(self.stations)

    @property
    def max_load_s(self) -> int:
        return max(station.load_s for station in self.stations)

    @property
    def efficiency(self) -> float:
        """T_p over installed capacity"""
        return self.total_time_s / (self.station_count * self.takt_s)

    def station_of(self) -> Dict[int, int]:
        return {task_id: station.index for station in self.stations for task_id in station.task_ids}


def takt_time(duration_s: int, demand_units: int) -> int:
    """Floor of available time over demand, in whole seconds"""
    if demand_units <= 0:
        raise DatasetValueError(f"Demand must be at least one unit, got {demand_units}")
    return duration_s // demand_units


def takt(shift: ShiftConfig) -> int:
    """Takt time T_K = T_D / N for a shift"""
    return takt_time(shift.duration_s, shift.demand_units)


def min_stations(total_time_s: int, takt_s: int, max_task_s: Optional[int] = None) -> int:
    """Theoretical minimum station count ceil(T_p / T_K)"""
    if takt_s <= 0:
        raise InfeasibleError(f"Takt must be positive, got {takt_s}")
    if max_task_s is not None and max_task_s > takt_s:
        raise InfeasibleError(f"A task of {max_task_s} s exceeds takt {takt_s} s")
    return math.ceil(total_time_s / takt_s)


def ranked_positional_weights(product: Product) -> Dict[int, int]:
    """Task duration plus the durations of all transitive successors"""
    durations = product.durations()
    closure = successors_closure(product)
    return {t: durations[t] + sum(durations[s] for s in closure[t]) for t in durations}


def _check_inputs(product: Product, plan: AllocationPlan, takt_s: int) -> Dict[int, Assignment]:
    assignments = plan.assignments()
    missing = [t for t in product.task_ids if t not in assignments]
    if missing:
        raise InvariantError(f"Allocation plan misses tasks {missing}")

    for task in sorted(product.tasks, key=lambda t: t.id):
        if task.duration_s > takt_s:
            raise InfeasibleError(
                f"Task {task.id} ({task.name or 'unnamed'}) takes {task.duration_s} s, above takt {takt_s} s",
                task_id=task.id,
            )
    check_precedence(product)
    return assignments


def resource_lower_bound(product: Product, plan: AllocationPlan, takt_s: int) -> int:
    """Sum over resources of ceil(resource time / takt); a lower bound on any pure line"""
    assignments = plan.assignments()
    per_resource: Dict[Assignment, int] = {}
    for task in product.tasks:
        resource = assignments[task.id]
        per_resource[resource] = per_resource.get(resource, 0) + task.duration_s
    return sum(math.ceil(time_s / takt_s) for time_s in per_resource.values())


def balance_line(product: Product, plan: AllocationPlan, takt_s: int) -> LinePlan:
    """
    Greedy ranked-positional-weight balancing with resource-pure stations

    A task is eligible for the open station when all its predecessors are
    assigned, it fits the remaining takt and it matches the station resource
    (fixed by the first task placed). When nothing is eligible a new station opens.

    Args:
        product: parsed product
        plan: allocation covering every task
        takt_s: takt time in whole seconds

    Returns:
        Deterministic LinePlan

    Raises:
        InfeasibleError: a task exceeds takt
        CycleError: precedence relation is cyclic
    """
    assignments = _check_inputs(product, plan, takt_s)
    tasks = product.task_map()
    weights = ranked_positional_weights(product)
    priority = sorted(tasks, key=lambda t: (-weights[t], t))

    assigned: set = set()
    stations: List[Station] = []
    current: List[int] = []
    resource: Optional[Assignment] = None
    load = 0

    def close_station() -> None:
        stations.append(
            Station(
                index=len(stations) + 1,
                resource=resource,
                task_ids=tuple(current),
                task_durations_s=tuple(tasks[t].duration_s for t in current),
                load_s=load,
                idle_s=takt_s - load,
            )
        )

    while len(assigned) < len(tasks):
        chosen = None
        for task_id in priority:
            if task_id in assigned:
                continue
            task = tasks[task_id]
            if not all(p in assigned for p in task.predecessors):
                continue
            if task.duration_s > takt_s - load:
                continue
            if resource is not None and assignments[task_id] is not resource:
                continue
            chosen = task_id
            break

        if chosen is None:
            if not current:
                raise InfeasibleError("No task can open a new station")
            close_station()
            current, resource, load = [], None, 0
            continue

        current.append(chosen)
        assigned.add(chosen)
        resource = assignments[chosen]
        load += tasks[chosen].duration_s

    close_station()

    total = product.total_time_s
    line = LinePlan(
        product=product.name,
        takt_s=takt_s,
        stations=tuple(stations),
        total_time_s=total,
        idle_total_s=len(stations) * takt_s - total,
    )
    logger.info(
        "Balanced %s at takt %d s: %d stations, idle %d s",
        product.name,
        takt_s,
        line.station_count,
        line.idle_total_s,
    )
    return line


def verify_line_plan(product: Product, plan: AllocationPlan, line: LinePlan) -> List[str]:
    """Independent feasibility check; returns violations, empty when the line is valid"""
    violations = []
    tasks = product.task_map()
    assignments = plan.assignments()

    placements: Dict[int, int] = {}
    for station in line.stations:
        for task_id in station.task_ids:
            if task_id in placements:
                violations.append(f"task {task_id} placed twice")
            placements[task_id] = station.index

    for task_id in tasks:
        if task_id not in placements:
            violations.append(f"task {task_id} not placed")
    for task_id in placements:
        if task_id not in tasks:
            violations.append(f"unknown task {task_id} placed")

    for position, station in enumerate(line.stations, 1):
        if station.index != position:
            violations.append(f"station {station.index} out of sequence")
        load = sum(tasks[t].duration_s for t in station.task_ids if t in tasks)
        if list(station.task_durations_s) != [tasks[t].duration_s for t in station.task_ids if t in tasks]:
            violations.append(f"station {station.index} task durations do not match the product")
        if load != station.load_s:
            violations.append(f"station {station.index} load {station.load_s} != task sum {load}")
        if load > line.takt_s:
            violations.append(f"station {station.index} load {load} exceeds takt {line.takt_s}")
        if station.idle_s != line.takt_s - station.load_s:
            violations.append(f"station {station.index} idle time inconsistent")
        for task_id in station.task_ids:
            if assignments.get(task_id) is not station.resource:
                violations.append(f"task {task_id} is not {station.resource.value} work")

    for task_id, task in tasks.items():
        for predecessor in task.predecessors:
            if placements.get(predecessor, 0) > placements.get(task_id, 0):
                violations.append(f"predecessor {predecessor} of task {task_id} sits at a later station")

    total = sum(station.load_s for station in line.stations)
    if total != product.total_time_s:
        violations.append(f"station loads sum to {total}, not {product.total_time_s}")
    if line.idle_total_s != line.station_count * line.takt_s - product.total_time_s:
        violations.append("idle total does not balance")
    return violations


def oracle_min_stations(
    product: Product,
    plan: AllocationPlan,
    takt_s: int,
    max_tasks: int = ORACLE_MAX_TASKS,
) -> int:
    """
    Exact minimum station count by depth-first branch-and-bound

    Stations are filled one at a time and only closed when no eligible task
    fits (any optimal line can be shifted into that form). States are pruned
    by a per-resource capacity bound and by (assigned set, load, resource)
    dominance. Meant for tests and --verify, not for production balancing.

    Raises:
        BudgetError: more than max_tasks tasks
    """
    if len(product.tasks) > max_tasks:
        raise BudgetError(f"Oracle limited to {max_tasks} tasks, product has {len(product.tasks)}")

    assignments = _check_inputs(product, plan, takt_s)
    order = sorted(product.tasks, key=lambda t: t.id)
    bit = {task.id: 1 << i for i, task in enumerate(order)}
    durations = [task.duration_s for task in order]
    resources = [assignments[task.id] for task in order]
    pred_masks = [sum(bit[p] for p in task.predecessors) for task in order]
    weights = ranked_positional_weights(product)
    branch_order = sorted(range(len(order)), key=lambda i: (-weights[order[i].id], order[i].id))
    full = (1 << len(order)) - 1

    best = balance_line(product, plan, takt_s).station_count
    seen: Dict[Tuple[int, int, Optional[Assignment]], int] = {}

    def remaining_bound(mask: int, load: int, resource: Optional[Assignment]) -> int:
        remaining: Dict[Assignment, int] = {}
        for i in range(len(order)):
            if not mask & (1 << i):
                remaining[resources[i]] = remaining.get(resources[i], 0) + durations[i]
        if resource is None:
            # the open station is still empty and will host one of the resources
            return sum(math.ceil(time_s / takt_s) for time_s in remaining.values()) - 1
        extra = 0
        for res, time_s in remaining.items():
            slack = takt_s - load if res is resource else 0
            extra += math.ceil(max(0, time_s - slack) / takt_s)
        return extra

    def search(mask: int, load: int, resource: Optional[Assignment], used: int) -> None:
        nonlocal best
        if mask == full:
            best = min(best, used)
            return
        if used + remaining_bound(mask, load, resource) >= best:
            return
        key = (mask, load, resource)
        if seen.get(key, best + 1) <= used:
            return
        seen[key] = used

        eligible = [
            i
            for i in branch_order
            if not mask & (1 << i)
            and pred_masks[i] & mask == pred_masks[i]
            and durations[i] <= takt_s - load
            and (resource is None or resources[i] is resource)
        ]
        if not eligible:
            if load == 0:
                return
            search(mask, 0, None, used + 1)
            return
        for i in eligible:
            search(mask | (1 << i), load + durations[i], resources[i], used)

    search(0, 0, None, 1)
    return best
