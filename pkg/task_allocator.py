"""
Rule-based human/robot task allocation and automation-potential metrics
A task goes to the robot only when all five criteria pass
"""

import logging
from fractions import Fraction
from typing import Dict, List, Tuple

from pydantic import model_validator

from assembly_model import Assignment, Criteria, Product, FrozenRecord
from planning_errors import InvariantError

logger = logging.getLogger(__name__)

FORCED_RATIONALE = "forced_assignment"


class Allocation(FrozenRecord):
    """Outcome of the allocation rule; rationale lists the failed criteria"""

    assignment: Assignment
    rationale: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _robot_iff_no_rationale(self) -> "Allocation":
        if (self.assignment is Assignment.ROBOT) != (not self.rationale):
            raise ValueError("Robot assignment requires an empty rationale and Human a non-empty one")
        return self


class TaskAllocation(Allocation):
    task_id: int
    forced: bool = False


class AllocationPlan(FrozenRecord):
    entries: Tuple[TaskAllocation, ...]

    def assignments(self) -> Dict[int, Assignment]:
        return {entry.task_id: entry.assignment for entry in self.entries}

    def robot_ids(self) -> List[int]:
        return [e.task_id for e in self.entries if e.assignment is Assignment.ROBOT]

    def human_ids(self) -> List[int]:
        return [e.task_id for e in self.entries if e.assignment is Assignment.HUMAN]

    def counts(self) -> Dict[str, int]:
        return {"Robot": len(self.robot_ids()), "Human": len(self.human_ids())}


class AutomationMetrics(FrozenRecord):
    task_share: float
    time_share: float
    automated_time_s: int
    manual_time_s: int
    robot_tasks: int
    total_tasks: int


def rate_task(criteria: Criteria) -> Allocation:
    """Robot iff every criterion passes; otherwise Human with the failing criteria"""
    failed = criteria.failed()
    if failed:
        return Allocation(assignment=Assignment.HUMAN, rationale=tuple(failed))
    return Allocation(assignment=Assignment.ROBOT)


def allocate_all(product: Product, honour_forced: bool = True) -> AllocationPlan:
    """
    Apply the allocation rule to every task, ordered by task id

    Args:
        product: parsed product
        honour_forced: apply per-task forced_assignment overrides

    Returns:
        AllocationPlan with one entry per task
    """
    entries = []
    for task in sorted(product.tasks, key=lambda t: t.id):
        decision = rate_task(task.criteria)
        forced = False

        if honour_forced and task.forced_assignment is not None and task.forced_assignment is not decision.assignment:
            if task.forced_assignment is Assignment.HUMAN:
                decision = Allocation(assignment=Assignment.HUMAN, rationale=(FORCED_RATIONALE,))
                forced = True
            else:
                # failing criteria cannot be overridden towards the robot
                logger.warning(
                    "Task %d forced to Robot but fails %s; keeping Human",
                    task.id,
                    ", ".join(decision.rationale),
                )

        entries.append(
            TaskAllocation(
                task_id=task.id,
                assignment=decision.assignment,
                rationale=decision.rationale,
                forced=forced,
            )
        )

    plan = AllocationPlan(entries=tuple(entries))
    logger.info("Allocated %s: %s", product.name, plan.counts())
    return plan


def _check_coverage(plan: AllocationPlan, product: Product) -> Dict[int, Assignment]:
    assignments = plan.assignments()
    missing = [t for t in product.task_ids if t not in assignments]
    if missing:
        raise InvariantError(f"Allocation plan misses tasks {missing}")
    return assignments


def automation_metrics(plan: AllocationPlan, product: Product) -> AutomationMetrics:
    """Automated/manual time (T_H, T_M) and the task and time shares"""
    assignments = _check_coverage(plan, product)
    durations = product.durations()

    automated = sum(durations[t] for t, a in assignments.items() if a is Assignment.ROBOT and t in durations)
    total = product.total_time_s
    robot_tasks = sum(1 for t in product.task_ids if assignments[t] is Assignment.ROBOT)
    total_tasks = len(product.tasks)

    return AutomationMetrics(
        task_share=float(Fraction(robot_tasks, total_tasks)),
        time_share=float(Fraction(automated, total)),
        automated_time_s=automated,
        manual_time_s=total - automated,
        robot_tasks=robot_tasks,
        total_tasks=total_tasks,
    )


def application_areas(plan: AllocationPlan, product: Product) -> Dict[str, Dict[str, int]]:
    """Task count, time and robot share per application area"""
    assignments = _check_coverage(plan, product)
    areas: Dict[str, Dict[str, int]] = {}
    for task in product.tasks:
        area = areas.setdefault(task.category.value, {"tasks": 0, "time_s": 0, "robot_tasks": 0, "robot_time_s": 0})
        area["tasks"] += 1
        area["time_s"] += task.duration_s
        if assignments[task.id] is Assignment.ROBOT:
            area["robot_tasks"] += 1
            area["robot_time_s"] += task.duration_s
    return dict(sorted(areas.items()))


def allocation_rows(plan: AllocationPlan) -> List[Dict[str, str]]:
    """CSV rows: task_id,assignment,failed_criteria"""
    return [
        {
            "task_id": str(entry.task_id),
            "assignment": entry.assignment.value,
            "failed_criteria": ";".join(entry.rationale),
        }
        for entry in plan.entries
    ]


ALLOCATION_CSV_HEADER = ["task_id", "assignment", "failed_criteria"]

