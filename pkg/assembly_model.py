"""
Assembly process schema for human-humanoid assembly cells
Parses and validates dataset documents and provides precedence-graph services
"""

import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Literal, NoReturn, Optional, Tuple, Union

import networkx as nx
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    StrictBool,
    StrictInt,
    StrictStr,
    ValidationError,
    field_validator,
    model_validator,
)

from planning_errors import CycleError, DatasetValueError, RefError, SchemaError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CRITERIA_NAMES = ("part", "feeding", "joining", "mounting", "safety")

# pydantic error types that describe a bad value rather than a bad shape
_VALUE_ERROR_TYPES = {
    "greater_than",
    "greater_than_equal",
    "less_than",
    "less_than_equal",
    "too_short",
    "too_long",
    "value_error",
}


class Category(str, Enum):
    """Application area of a task"""

    ASSEMBLY = "assembly"
    MATERIAL_HANDLING = "material_handling"
    PICK_PLACE = "pick_place"
    SCREW_DRIVING = "screw_driving"
    QUALITY_TEST = "quality_test"


class Assignment(str, Enum):
    """Resource a task (or a station) is given to"""

    ROBOT = "Robot"
    HUMAN = "Human"


class ResourceKind(str, Enum):
    HUMAN = "Human"
    HUMANOID = "Humanoid"


class FrozenRecord(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Criteria(FrozenRecord):
    """Five binary automation criteria; True means the robot can do it"""

    part: StrictBool
    feeding: StrictBool
    joining: StrictBool
    mounting: StrictBool
    safety: StrictBool

    def failed(self) -> List[str]:
        """Names of failing criteria in canonical order"""
        return [name for name in CRITERIA_NAMES if not getattr(self, name)]

    @classmethod
    def all_pass(cls) -> "Criteria":
        return cls(part=True, feeding=True, joining=True, mounting=True, safety=True)

    @classmethod
    def from_failures(cls, failures: Iterable[str]) -> "Criteria":
        failures = set(failures)
        unknown = failures.difference(CRITERIA_NAMES)
        if unknown:
            raise ValueError(f"Unknown criteria: {', '.join(sorted(unknown))}")
        return cls(**{name: name not in failures for name in CRITERIA_NAMES})


class Task(FrozenRecord):
    """One assembly task of a product"""

    id: StrictInt = Field(gt=0)
    name: StrictStr = ""
    duration_s: StrictInt = Field(gt=0)
    predecessors: Tuple[StrictInt, ...] = ()
    criteria: Criteria
    category: Category
    forced_assignment: Optional[Assignment] = None

    @field_validator("predecessors")
    @classmethod
    def _as_sorted_set(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        return tuple(sorted(set(value)))


class Product(FrozenRecord):
    """A product as an ordered list of tasks; precedence comes from predecessor sets"""

    name: StrictStr
    tasks: Tuple[Task, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique_ids(self) -> "Product":
        seen = set()
        for task in self.tasks:
            if task.id in seen:
                raise ValueError(f"Duplicate task id {task.id}")
            seen.add(task.id)
        return self

    @property
    def task_ids(self) -> List[int]:
        return [task.id for task in self.tasks]

    @property
    def total_time_s(self) -> int:
        return sum(task.duration_s for task in self.tasks)

    def task_map(self) -> Dict[int, Task]:
        return {task.id: task for task in self.tasks}

    def durations(self) -> Dict[int, int]:
        return {task.id: task.duration_s for task in self.tasks}


class ResourceSpec(FrozenRecord):
    """Physical capability of a worker or a humanoid"""

    kind: ResourceKind
    name: StrictStr = ""
    payload_kg: float = Field(gt=0)
    reach_mm: float = Field(gt=0)
    max_speed_mm_s: float = Field(gt=0)
    charge_interval_s: Optional[float] = Field(default=None, gt=0)
    charge_duration_s: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _charge_fields(self) -> "ResourceSpec":
        has_interval = self.charge_interval_s is not None
        has_duration = self.charge_duration_s is not None
        if self.kind is ResourceKind.HUMAN and (has_interval or has_duration):
            raise ValueError("Human resources carry no charge fields")
        if has_interval != has_duration:
            raise ValueError("charge_interval_s and charge_duration_s go together")
        return self


class ShiftConfig(FrozenRecord):
    """Available time per shift (T_D) and demand per shift (N)"""

    duration_s: StrictInt = Field(gt=0)
    demand_units: StrictInt = Field(ge=1)


class Dataset(FrozenRecord):
    """A complete planning input: product, resources and shift"""

    format: Literal[1]
    product: Product
    resources: Tuple[ResourceSpec, ...] = ()
    shift: ShiftConfig

    def humanoid(self) -> Optional[ResourceSpec]:
        for resource in self.resources:
            if resource.kind is ResourceKind.HUMANOID:
                return resource
        return None


def _raise_from_validation(exc: ValidationError) -> NoReturn:
    errors = exc.errors()
    schema_errors = [err for err in errors if err["type"] not in _VALUE_ERROR_TYPES]
    first = schema_errors[0] if schema_errors else errors[0]
    where = ".".join(str(part) for part in first["loc"]) or "<document>"
    message = f"{where}: {first['msg']}"
    if schema_errors:
        raise SchemaError(message) from exc
    raise DatasetValueError(message) from exc


def parse_dataset(text: str) -> Dataset:
    """
    Parse and fully validate a dataset document

    Args:
        text: UTF-8 JSON document with keys format, product, resources, shift

    Returns:
        Validated Dataset

    Raises:
        SchemaError: missing field or wrong type
        RefError: predecessor id unknown
        DatasetValueError: non-positive duration, empty product, duplicate id
        CycleError: precedence relation is not a DAG
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Not a JSON document: {e}") from e

    if not isinstance(document, dict):
        raise SchemaError("Dataset document must be a JSON object")

    try:
        dataset = Dataset.model_validate(document)
    except ValidationError as e:
        _raise_from_validation(e)

    validate_product(dataset.product)
    logger.debug(
        "Parsed dataset %s: %d tasks, %d s",
        dataset.product.name,
        len(dataset.product.tasks),
        dataset.product.total_time_s,
    )
    return dataset


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read and parse a dataset file"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")
    return parse_dataset(path.read_text(encoding="utf-8"))


def dump_dataset(dataset: Dataset) -> str:
    """Serialize a dataset to its canonical JSON text"""
    return json.dumps(dataset.model_dump(mode="json"), indent=2) + "\n"


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def dataset_digest(dataset: Dataset) -> str:
    """SHA-256 of the canonical form; independent of file formatting and platform"""
    canonical = canonical_json(dataset.model_dump(mode="json"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _check_references(product: Product) -> None:
    known = set(product.task_ids)
    for task in product.tasks:
        for predecessor in task.predecessors:
            if predecessor not in known:
                raise RefError(task.id, predecessor)


def precedence_graph(product: Product) -> nx.DiGraph:
    """Directed graph with an edge p -> t for every predecessor p of t"""
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(product.task_ids))
    for task in sorted(product.tasks, key=lambda t: t.id):
        for predecessor in task.predecessors:
            graph.add_edge(predecessor, task.id)
    return graph


def _cycle_path(graph: nx.DiGraph) -> List[int]:
    nodes = [u for u, _ in nx.find_cycle(graph)]
    start = nodes.index(min(nodes))
    rotated = nodes[start:] + nodes[:start]
    return rotated + [rotated[0]]


def check_precedence(product: Product) -> List[int]:
    """
    Deterministic topological order of the product's tasks

    Kahn's algorithm with the smallest available id taken first.

    Raises:
        RefError: predecessor id unknown
        CycleError: with one full cycle, e.g. [1, 2, 1]
    """
    _check_references(product)
    graph = precedence_graph(product)
    try:
        return list(nx.lexicographical_topological_sort(graph))
    except nx.NetworkXUnfeasible:
        raise CycleError(_cycle_path(graph)) from None


def validate_product(product: Product) -> List[int]:
    """Reference and DAG checks for products built in code; returns the topological order"""
    return check_precedence(product)


def successors_closure(product: Product) -> Dict[int, set]:
    """All transitive successors of every task"""
    graph = precedence_graph(product)
    return {task_id: nx.descendants(graph, task_id) for task_id in graph.nodes}


def restrict_product(product: Product, task_ids: Iterable[int], name: Optional[str] = None) -> Product:
    """Sub-instance keeping only the given tasks; edges to dropped tasks are removed"""
    keep = set(task_ids)
    tasks = []
    for task in product.tasks:
        if task.id not in keep:
            continue
        predecessors = tuple(p for p in task.predecessors if p in keep)
        tasks.append(task.model_copy(update={"predecessors": predecessors}))
    return Product(name=name or product.name, tasks=tuple(tasks))
