"""
Tests for the speed-and-separation governor, mode classifier and safety checklist
"""

import itertools
import random

import pytest
from pydantic import ValidationError

from assembly_model import Assignment
from planning_errors import InvariantError
from safety_governor import (
    HAND_GUIDING,
    IMR_CLASS,
    POWER_FORCE_LIMITING,
    SAFETY_RATED_STOP,
    SPEED_SEPARATION_MONITORING,
    InteractionMode,
    InteractionQuery,
    SafetyConfig,
    Zone,
    allowed_speed,
    classify_mode,
    protective_distance,
    safety_checklist,
)


def test_worked_protective_distance():
    assert protective_distance(250.0, 1600.0, SafetyConfig()) == pytest.approx(987.5, abs=1e-9)


def test_protective_distance_at_rest():
    # 1600 * 0.4 + 200 + 60
    assert protective_distance(0.0, 1600.0, SafetyConfig()) == pytest.approx(900.0)


def test_stop_below_rest_distance():
    assert allowed_speed(899.0, None, SafetyConfig()) == 0.0


def test_cap_when_far_away():
    cfg = SafetyConfig()
    assert allowed_speed(100000.0, None, cfg) == cfg.v_max_mm_s
    assert allowed_speed(100000.0, None, cfg, Zone.COLLABORATIVE) == 250.0


def test_intermediate_speed_fits_separation():
    cfg = SafetyConfig()
    speed = allowed_speed(987.5, 1600.0, cfg)
    assert 249.0 <= speed <= 250.0
    assert protective_distance(speed, 1600.0, cfg) <= 987.5


def test_negative_separation_rejected():
    with pytest.raises(InvariantError):
        allowed_speed(-1.0, None, SafetyConfig())


def test_collab_cap_above_max_rejected():
    with pytest.raises(ValidationError):
        SafetyConfig(v_max_mm_s=200.0, v_collab_cap_mm_s=250.0)


def _random_config(rng: random.Random) -> SafetyConfig:
    v_max = rng.uniform(300.0, 3000.0)
    return SafetyConfig(
        v_max_mm_s=v_max,
        v_collab_cap_mm_s=min(250.0, v_max),
        v_h_mm_s=rng.uniform(500.0, 2500.0),
        t_r_s=rng.uniform(0.05, 0.5),
        t_s_s=rng.uniform(0.1, 0.8),
        a_brake_mm_s2=rng.uniform(200.0, 5000.0),
        clearance_mm=rng.uniform(0.0, 400.0),
        uncertainty_mm=rng.uniform(0.0, 150.0),
    )


def test_governor_properties_on_random_configs():
    rng = random.Random(15066)
    for _ in range(1000):
        cfg = _random_config(rng)
        zone = rng.choice(list(Zone))
        separations = sorted(rng.uniform(0.0, 5000.0) for _ in range(2))
        low, high = (allowed_speed(d, None, cfg, zone) for d in separations)
        assert low <= high
        if zone is Zone.COLLABORATIVE:
            assert high <= 250.0
        for separation, speed in zip(separations, (low, high)):
            if separation < protective_distance(0.0, cfg.v_h_mm_s, cfg):
                assert speed == 0.0
            else:
                assert protective_distance(speed, cfg.v_h_mm_s, cfg) <= separation


# (shares_cell, zone_overlap, time_overlap, same_task) -> mode
MODE_TABLE = {
    (False, False, False, False): InteractionMode.ISOLATED,
    (False, False, True, False): InteractionMode.ISOLATED,
    (True, False, False, False): InteractionMode.COEXISTENCE,
    (True, False, True, False): InteractionMode.COEXISTENCE,
    (True, True, False, False): InteractionMode.SYNCHRONIZED,
    (True, True, False, True): InteractionMode.SYNCHRONIZED,
    (True, True, True, False): InteractionMode.COOPERATION,
    (True, True, True, True): InteractionMode.COLLABORATION,
}


@pytest.mark.parametrize("flags", list(itertools.product([False, True], repeat=4)))
def test_mode_table(flags):
    query = InteractionQuery(shares_cell=flags[0], zone_overlap=flags[1], time_overlap=flags[2], same_task=flags[3])
    if flags in MODE_TABLE:
        assert classify_mode(query) is MODE_TABLE[flags]
    else:
        with pytest.raises(InvariantError):
            classify_mode(query)


def test_every_mode_reachable():
    assert set(MODE_TABLE.values()) == set(InteractionMode)
    assert [m.intensity for m in InteractionMode] == [0, 1, 2, 3, 4]


def test_pb560_checklist(pb560_line):
    checklist = safety_checklist(pb560_line)
    assert checklist.imr_class == IMR_CLASS
    assert [s.index for s in checklist.stations] == [1, 4]
    for entry in checklist.stations:
        assert entry.zone is Zone.COLLABORATIVE
        assert entry.speed_cap_mm_s == 250.0
        assert entry.requirements == (
            POWER_FORCE_LIMITING,
            SAFETY_RATED_STOP,
            SPEED_SEPARATION_MONITORING,
            HAND_GUIDING,
        )


def test_robot_only_line_stays_open(serial_line):
    line = serial_line([50, 50], resources=[Assignment.ROBOT, Assignment.ROBOT])
    checklist = safety_checklist(line)
    assert [s.zone for s in checklist.stations] == [Zone.OPEN, Zone.OPEN]
    assert checklist.stations[0].requirements == (POWER_FORCE_LIMITING, HAND_GUIDING)
    assert checklist.stations[0].speed_cap_mm_s == SafetyConfig().v_max_mm_s


def test_human_only_line_needs_nothing(serial_line):
    line = serial_line([50], resources=[Assignment.HUMAN])
    checklist = safety_checklist(line)
    assert checklist.imr_class is None
    assert checklist.stations == ()
