"""
Exception hierarchy shared by every planning stage
Each error knows the CLI exit code it maps to
"""

from typing import List, Optional

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3


class PlanningError(Exception):
    """Base class for all planning and simulation errors"""

    exit_code = EXIT_INTERNAL


class SchemaError(PlanningError):
    """Dataset document is missing a field or has a field of the wrong type"""

    exit_code = EXIT_INPUT


class RefError(PlanningError):
    """A task references a predecessor id that does not exist"""

    exit_code = EXIT_INPUT

    def __init__(self, task_id: int, missing_id: int):
        self.task_id = task_id
        self.missing_id = missing_id
        super().__init__(f"Task {task_id} lists unknown predecessor {missing_id}")


class DatasetValueError(PlanningError, ValueError):
    """A dataset value violates a numeric or cardinality constraint"""

    exit_code = EXIT_INPUT


class CycleError(PlanningError):
    """Precedence relation contains a cycle"""

    exit_code = EXIT_INPUT

    def __init__(self, cycle: List[int]):
        self.cycle = list(cycle)
        path = " -> ".join(str(task_id) for task_id in self.cycle)
        super().__init__(f"Precedence cycle: {path}")


class InfeasibleError(PlanningError):
    """No line plan exists for the requested takt"""

    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str, task_id: Optional[int] = None):
        self.task_id = task_id
        super().__init__(message)


class BudgetError(PlanningError):
    """Exhaustive search refused because the instance is too large"""

    exit_code = EXIT_INPUT


class InvariantError(PlanningError):
    """An input combination violates a documented invariant"""

    exit_code = EXIT_INPUT


class ConfigError(PlanningError):
    """Invalid simulation, scenario or run configuration"""

    exit_code = EXIT_INPUT
