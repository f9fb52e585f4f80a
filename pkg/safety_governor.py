"""
Speed-and-separation governor and human-robot interaction modes

The protective separation distance follows the usual structure of
collaborative-robot standards: a human approach term, a robot reaction
term, a braking term and fixed clearances. Every parameter is configurable;
the defaults are planning assumptions, not measured values.
"""

import logging
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import Field, StrictBool, model_validator

from assembly_model import Assignment, FrozenRecord
from line_balancer import LinePlan
from planning_errors import InvariantError

logger = logging.getLogger(__name__)

SPEED_RESOLUTION_MM_S = 1.0
IMR_CLASS = "IMR type-C"

POWER_FORCE_LIMITING = "power_force_limiting"
SAFETY_RATED_STOP = "safety_rated_stop"
SPEED_SEPARATION_MONITORING = "speed_separation_monitoring"
HAND_GUIDING = "hand_guiding"
FEATURE_ORDER = (POWER_FORCE_LIMITING, SAFETY_RATED_STOP, SPEED_SEPARATION_MONITORING, HAND_GUIDING)


class Zone(str, Enum):
    OPEN = "open"
    COLLABORATIVE = "collaborative"


class InteractionMode(str, Enum):
    """Human-robot interaction forms, from least to most intense"""

    ISOLATED = "Isolated"
    COEXISTENCE = "Coexistence"
    SYNCHRONIZED = "Synchronized"
    COOPERATION = "Cooperation"
    COLLABORATION = "Collaboration"

    @property
    def intensity(self) -> int:
        return list(InteractionMode).index(self)


class SafetyConfig(FrozenRecord):
    v_max_mm_s: float = Field(default=2222.0, gt=0)
    v_collab_cap_mm_s: float = Field(default=250.0, gt=0)
    v_h_mm_s: float = Field(default=1600.0, gt=0)
    t_r_s: float = Field(default=0.1, gt=0)
    t_s_s: float = Field(default=0.3, gt=0)
    a_brake_mm_s2: float = Field(default=500.0, gt=0)
    clearance_mm: float = Field(default=200.0, ge=0)
    uncertainty_mm: float = Field(default=60.0, ge=0)

    @model_validator(mode="after")
    def _collab_cap_below_max(self) -> "SafetyConfig":
        if self.v_collab_cap_mm_s > self.v_max_mm_s:
            raise ValueError("Collaborative speed cap cannot exceed the free-run speed cap")
        return self


class InteractionQuery(FrozenRecord):
    shares_cell: StrictBool
    zone_overlap: StrictBool
    time_overlap: StrictBool
    same_task: StrictBool


class StationSafety(FrozenRecord):
    index: int
    zone: Zone
    speed_cap_mm_s: float
    requirements: Tuple[str, ...]


class SafetyChecklist(FrozenRecord):
    imr_class: Optional[str]
    stations: Tuple[StationSafety, ...]


def protective_distance(v_r_mm_s: float, v_h_mm_s: float, cfg: SafetyConfig) -> float:
    """S_p = v_h (t_r + t_s) + v_r t_r + v_r^2 / (2 a) + C + Z, in mm"""
    return (
        v_h_mm_s * (cfg.t_r_s + cfg.t_s_s)
        + v_r_mm_s * cfg.t_r_s
        + v_r_mm_s ** 2 / (2.0 * cfg.a_brake_mm_s2)
        + cfg.clearance_mm
        + cfg.uncertainty_mm
    )


def speed_cap(cfg: SafetyConfig, zone: Zone) -> float:
    return cfg.v_collab_cap_mm_s if zone is Zone.COLLABORATIVE else cfg.v_max_mm_s


def allowed_speed(
    separation_mm: float,
    v_h_mm_s: Optional[float],
    cfg: SafetyConfig,
    zone: Zone = Zone.OPEN,
) -> float:
    """
    Largest robot speed whose protective distance fits the separation

    Args:
        separation_mm: current human-robot distance
        v_h_mm_s: human approach speed (None uses the configured default)
        cfg: governor parameters
        zone: open floor or collaborative zone

    Returns:
        Speed in mm/s within [0, zone cap], to 1 mm/s; 0 means monitored stop
    """
    if separation_mm < 0:
        raise InvariantError(f"Separation cannot be negative, got {separation_mm}")
    v_h = cfg.v_h_mm_s if v_h_mm_s is None else v_h_mm_s
    cap = speed_cap(cfg, zone)

    if protective_distance(0.0, v_h, cfg) > separation_mm:
        return 0.0
    if protective_distance(cap, v_h, cfg) <= separation_mm:
        return cap

    low, high = 0.0, cap
    while high - low > SPEED_RESOLUTION_MM_S:
        middle = (low + high) / 2.0
        if protective_distance(middle, v_h, cfg) <= separation_mm:
            low = middle
        else:
            high = middle
    return low


def classify_mode(query: InteractionQuery) -> InteractionMode:
    """Map time and space sharing to one of the five interaction forms"""
    if query.same_task and not query.zone_overlap:
        raise InvariantError("A shared task implies a shared zone")
    if query.zone_overlap and not query.shares_cell:
        raise InvariantError("A shared zone implies a shared cell")

    if not query.shares_cell:
        return InteractionMode.ISOLATED
    if not query.zone_overlap:
        return InteractionMode.COEXISTENCE
    if not query.time_overlap:
        return InteractionMode.SYNCHRONIZED
    if not query.same_task:
        return InteractionMode.COOPERATION
    return InteractionMode.COLLABORATION


def safety_checklist(line: LinePlan, cfg: Optional[SafetyConfig] = None) -> SafetyChecklist:
    """
    Safety features required per robot station

    Every robot station needs power and force limiting and hand guiding.
    A robot station next to a human station also needs speed and separation
    monitoring and a safety-rated stop, and is treated as a collaborative zone.
    """
    cfg = cfg or SafetyConfig()
    resources = {station.index: station.resource for station in line.stations}
    entries: List[StationSafety] = []

    for station in line.stations:
        if station.resource is not Assignment.ROBOT:
            continue
        neighbours = [resources.get(station.index - 1), resources.get(station.index + 1)]
        human_adjacent = Assignment.HUMAN in neighbours

        features = {POWER_FORCE_LIMITING, HAND_GUIDING}
        if human_adjacent:
            features.update({SPEED_SEPARATION_MONITORING, SAFETY_RATED_STOP})
        zone = Zone.COLLABORATIVE if human_adjacent else Zone.OPEN

        entries.append(
            StationSafety(
                index=station.index,
                zone=zone,
                speed_cap_mm_s=speed_cap(cfg, zone),
                requirements=tuple(f for f in FEATURE_ORDER if f in features),
            )
        )

    imr_class = IMR_CLASS if entries else None
    logger.debug("Safety checklist for %s: %d robot stations", line.product, len(entries))
    return SafetyChecklist(imr_class=imr_class, stations=tuple(entries))
