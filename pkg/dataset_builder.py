"""
Construction script for the bundled PB560 ventilator dataset

The published case gives only aggregates: 803 s per unit, 321 s of it
automatable, five stations at takt 161 s. The per-task durations and the
precedence graph below are synthetic: tasks are grouped into five station
groups whose durations add up to the published loads, and every group ends
in a single sink task that all later groups depend on. Criteria follow the
automation-potential flags of the case study, inverted once here (flag 1
marks a challenge, so it becomes a failing criterion).

Usage:
    python dataset_builder.py [output_path]
"""

import sys
from pathlib import Path
from typing import Dict, List, Tuple

from assembly_model import (
    FORMAT_VERSION,
    Category,
    Criteria,
    Dataset,
    Product,
    ResourceKind,
    ResourceSpec,
    ShiftConfig,
    Task,
    dump_dataset,
    validate_product,
)

DEFAULT_OUTPUT = Path(__file__).parent / "data" / "pb560.json"

PB560_TAKT_S = 161
PB560_ROBOT_TIME_S = 321
PB560_HUMAN_TIME_S = 482

# id: (name, duration_s, predecessors, category, challenge flags)
PB560_TASKS: Dict[int, Tuple[str, int, List[int], Category, List[str]]] = {
    1: ("Load bottom housing onto fixture", 22, [], Category.PICK_PLACE, []),
    2: ("Route and connect blower harness", 55, [9], Category.ASSEMBLY, ["mounting"]),
    3: ("Insert blower mounting grommets", 25, [1], Category.PICK_PLACE, []),
    4: ("Seat blower assembly", 48, [2], Category.ASSEMBLY, ["mounting"]),
    5: ("Place power supply bracket", 18, [1], Category.PICK_PLACE, []),
    6: ("Drive power supply bracket screws", 30, [5], Category.SCREW_DRIVING, []),
    7: ("Place valve manifold", 20, [3], Category.PICK_PLACE, []),
    8: ("Drive valve manifold screws", 27, [7], Category.SCREW_DRIVING, []),
    9: ("Transfer base subassembly to fixture 2", 18, [6, 8], Category.MATERIAL_HANDLING, []),
    10: ("Mount main control board", 58, [4], Category.ASSEMBLY, ["part", "feeding", "mounting"]),
    11: ("Connect sensor flex cables", 52, [10], Category.ASSEMBLY, ["part", "feeding", "mounting"]),
    12: ("Fit oxygen inlet and internal tubing", 47, [11], Category.ASSEMBLY, ["part", "feeding", "mounting"]),
    13: ("Install internal battery pack", 61, [12], Category.ASSEMBLY, ["part", "feeding", "mounting", "safety"]),
    14: ("Place keypad and display module", 35, [13], Category.PICK_PLACE, []),
    15: ("Drive display module screws", 28, [14], Category.SCREW_DRIVING, []),
    16: ("Fit patient circuit connector", 74, [20], Category.ASSEMBLY, ["mounting"]),
    17: ("Place top housing", 33, [14], Category.PICK_PLACE, []),
    18: ("Functional and leak test", 87, [16], Category.QUALITY_TEST, ["mounting"]),
    19: ("Drive housing screws", 36, [15, 17], Category.SCREW_DRIVING, []),
    20: ("Apply rating labels", 29, [19], Category.PICK_PLACE, []),
}

# station groups of the intended balance: (resource, task ids)
PB560_GROUPS = [
    ("Robot", [1, 3, 5, 6, 7, 8, 9]),
    ("Human", [2, 4, 10]),
    ("Human", [11, 12, 13]),
    ("Robot", [14, 15, 17, 19, 20]),
    ("Human", [16, 18]),
]


def build_pb560() -> Dataset:
    """Build the PB560 dataset from the tables above"""
    tasks = []
    for task_id in sorted(PB560_TASKS):
        name, duration, predecessors, category, challenges = PB560_TASKS[task_id]
        tasks.append(
            Task(
                id=task_id,
                name=name,
                duration_s=duration,
                predecessors=tuple(predecessors),
                criteria=Criteria.from_failures(challenges),
                category=category,
            )
        )

    product = Product(name="PB560", tasks=tuple(tasks))
    validate_product(product)

    resources = (
        ResourceSpec(
            kind=ResourceKind.HUMANOID,
            name="Optimus",
            payload_kg=10.0,
            reach_mm=1000.0,
            max_speed_mm_s=2222.0,
            charge_interval_s=7200.0,
            charge_duration_s=900.0,
        ),
        ResourceSpec(
            kind=ResourceKind.HUMAN,
            name="Operator",
            payload_kg=15.0,
            reach_mm=700.0,
            max_speed_mm_s=1600.0,
        ),
    )
    return Dataset(
        format=FORMAT_VERSION,
        product=product,
        resources=resources,
        shift=ShiftConfig(duration_s=27000, demand_units=167),
    )


def check_construction(dataset: Dataset) -> List[str]:
    """Return the violated construction constraints (empty when all hold)"""
    problems = []
    durations = dataset.product.durations()
    robot_time = sum(durations[t] for t in durations if not dataset.product.task_map()[t].criteria.failed())
    human_time = dataset.product.total_time_s - robot_time

    if robot_time != PB560_ROBOT_TIME_S:
        problems.append(f"robot time {robot_time} != {PB560_ROBOT_TIME_S}")
    if human_time != PB560_HUMAN_TIME_S:
        problems.append(f"human time {human_time} != {PB560_HUMAN_TIME_S}")

    grouped = [t for _, ids in PB560_GROUPS for t in ids]
    if sorted(grouped) != sorted(durations):
        problems.append("station groups do not cover every task exactly once")

    tasks = dataset.product.task_map()
    earlier: set = set()
    for index, (resource, ids) in enumerate(PB560_GROUPS, 1):
        load = sum(durations[t] for t in ids)
        if load > PB560_TAKT_S or load < PB560_TAKT_S - 1:
            problems.append(f"group {index} load {load} not in [{PB560_TAKT_S - 1}, {PB560_TAKT_S}]")
        for t in ids:
            robot_capable = not tasks[t].criteria.failed()
            if robot_capable != (resource == "Robot"):
                problems.append(f"task {t} does not match group {index} resource {resource}")
            outside = set(tasks[t].predecessors) - earlier - set(ids)
            if outside:
                problems.append(f"task {t} depends on later tasks {sorted(outside)}")
        earlier.update(ids)
    return problems


def main() -> int:
    output = Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_OUTPUT
    dataset = build_pb560()
    problems = check_construction(dataset)
    if problems:
        for problem in problems:
            print(f"❌ {problem}")
        return 1

    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(dump_dataset(dataset), encoding="utf-8")
    print(f"💾 PB560 dataset written to: {output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
