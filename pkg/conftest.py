"""
Shared fixtures: the bundled PB560 dataset, its plan and line, and small builders
"""

import json
from pathlib import Path

import pytest

from assembly_model import Assignment, load_dataset
from line_balancer import LinePlan, Station, balance_line, takt
from task_allocator import allocate_all

DATA_DIR = Path(__file__).parent / "data"
PB560_PATH = DATA_DIR / "pb560.json"


@pytest.fixture(scope="session")
def pb560():
    return load_dataset(PB560_PATH)


@pytest.fixture(scope="session")
def pb560_document():
    return json.loads(PB560_PATH.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def pb560_plan(pb560):
    return allocate_all(pb560.product)


@pytest.fixture(scope="session")
def pb560_line(pb560, pb560_plan):
    return balance_line(pb560.product, pb560_plan, takt(pb560.shift))


@pytest.fixture
def task_doc():
    """Build one task object of a dataset document"""

    def build(task_id, duration_s, predecessors=(), failures=(), category="assembly", **extra):
        criteria = {name: name not in failures for name in ("part", "feeding", "joining", "mounting", "safety")}
        doc = {
            "id": task_id,
            "duration_s": duration_s,
            "predecessors": list(predecessors),
            "criteria": criteria,
            "category": category,
        }
        doc.update(extra)
        return doc

    return build


@pytest.fixture
def dataset_doc():
    """Wrap task objects into a complete dataset document"""

    def build(tasks, name="demo", duration_s=27000, demand_units=167):
        return {
            "format": 1,
            "product": {"name": name, "tasks": list(tasks)},
            "resources": [],
            "shift": {"duration_s": duration_s, "demand_units": demand_units},
        }

    return build


@pytest.fixture
def serial_line():
    """Single-task stations with the given loads; resources alternate Robot/Human unless given"""

    def build(loads, resources=None, takt_s=None):
        takt_s = takt_s or max(loads)
        resources = resources or [Assignment.ROBOT if i % 2 == 0 else Assignment.HUMAN for i in range(len(loads))]
        stations = tuple(
            Station(
                index=i + 1,
                resource=resources[i],
                task_ids=(i + 1,),
                task_durations_s=(load,),
                load_s=load,
                idle_s=takt_s - load,
            )
            for i, load in enumerate(loads)
        )
        total = sum(loads)
        return LinePlan(
            product="serial",
            takt_s=takt_s,
            stations=stations,
            total_time_s=total,
            idle_total_s=len(loads) * takt_s - total,
        )

    return build
