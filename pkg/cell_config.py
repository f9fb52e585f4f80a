"""
Run settings for the planning toolkit
Read from an explicit dotenv file; the process environment is never consulted
"""

import logging
import math
from pathlib import Path
from typing import Dict, Optional, Union

from dotenv import dotenv_values

from assembly_model import ShiftConfig
from line_simulator import SimConfig, TimeModel, TimeModelKind
from planning_errors import ConfigError
from safety_governor import SafetyConfig

logger = logging.getLogger(__name__)

DEFAULTS: Dict[str, str] = {
    "CELL_SEED": "42",
    "CELL_REPLICATIONS": "10",
    "CELL_TIME_MODEL": "deterministic",
    "CELL_CV": "0.05",
    "CELL_TRIANGULAR_MIN": "0.9",
    "CELL_TRIANGULAR_MAX": "1.2",
    "CELL_BUFFER": "1",
    "CELL_MTTF_S": "inf",
    "CELL_MTTR_S": "0",
    "CELL_FAILURE_CAUSES": "collision:1,incorrect_part:1,delay:1",
    "CELL_CHANGEOVER_S": "0",
    "CELL_CHANGEOVER_EVERY": "",
    "CELL_CHARGING": "false",
    "CELL_JOBS": "1",
    "CELL_LOG_LEVEL": "WARNING",
    "CELL_HUMAN_SPEED_MM_S": "1600",
    "CELL_COLLAB_CAP_MM_S": "250",
    "CELL_ROBOT_MAX_SPEED_MM_S": "2222",
    "CELL_REACTION_TIME_S": "0.1",
    "CELL_STOP_TIME_S": "0.3",
    "CELL_BRAKE_DECEL_MM_S2": "500",
    "CELL_CLEARANCE_MM": "200",
    "CELL_UNCERTAINTY_MM": "60",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_buffer(raw: str) -> Optional[int]:
    """Buffer size from a flag value; "inf" means unlimited"""
    text = str(raw).strip().lower()
    if text in ("none", "inf"):
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"--buffer must be an integer or 'inf', got {raw!r}") from None


class CellConfig:
    """Centralized run settings; every key has a documented default"""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        """
        Load run settings

        Args:
            path: dotenv file (None uses the defaults only)
        """
        self.path = Path(path) if path is not None else None
        self.values = dict(DEFAULTS)

        if self.path is not None:
            if not self.path.exists():
                raise ConfigError(f"Config file not found: {self.path}")
            loaded = dotenv_values(self.path)
            unknown = sorted(set(loaded) - set(DEFAULTS))
            if unknown:
                logger.warning("Ignoring unknown config keys: %s", ", ".join(unknown))
            for key in DEFAULTS:
                if loaded.get(key) not in (None, ""):
                    self.values[key] = loaded[key].strip()

    def _raw(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self._raw(key))
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self._raw(key)!r}") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self._raw(key))
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self._raw(key)!r}") from None

    def get_bool(self, key: str) -> bool:
        raw = self._raw(key).lower()
        if raw in _TRUE:
            return True
        if raw in _FALSE:
            return False
        raise ConfigError(f"{key} must be true or false, got {self._raw(key)!r}")

    def get_optional_int(self, key: str) -> Optional[int]:
        raw = self._raw(key).lower()
        if raw in ("", "none", "inf"):
            return None
        return self.get_int(key)

    @property
    def seed(self) -> int:
        return self.get_int("CELL_SEED")

    @property
    def replications(self) -> int:
        return self.get_int("CELL_REPLICATIONS")

    @property
    def jobs(self) -> int:
        return self.get_int("CELL_JOBS")

    @property
    def log_level(self) -> str:
        level = self._raw("CELL_LOG_LEVEL").upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"CELL_LOG_LEVEL must be a logging level name, got {level!r}")
        return level

    def time_model(self) -> TimeModel:
        kind = self._raw("CELL_TIME_MODEL").lower()
        if kind == TimeModelKind.DETERMINISTIC.value:
            return TimeModel()
        if kind == TimeModelKind.NORMAL_TRUNCATED.value:
            return TimeModel.normal(self.get_float("CELL_CV"))
        if kind == TimeModelKind.TRIANGULAR.value:
            return TimeModel.triangular(self.get_float("CELL_TRIANGULAR_MIN"), self.get_float("CELL_TRIANGULAR_MAX"))
        raise ConfigError(f"CELL_TIME_MODEL must be one of {[k.value for k in TimeModelKind]}, got {kind!r}")

    def failure_causes(self) -> Dict[str, float]:
        """Parse CELL_FAILURE_CAUSES, e.g. "collision:2,delay:1" (a bare label weighs 1)"""
        causes: Dict[str, float] = {}
        for item in self._raw("CELL_FAILURE_CAUSES").split(","):
            label, _, weight = item.strip().partition(":")
            if not label:
                continue
            try:
                causes[label.strip()] = float(weight) if weight else 1.0
            except ValueError:
                raise ConfigError(f"CELL_FAILURE_CAUSES weight for {label!r} must be a number") from None
        if not causes:
            raise ConfigError("CELL_FAILURE_CAUSES needs at least one label")
        return causes

    def sim_config(
        self,
        shift: ShiftConfig,
        seed: Optional[int] = None,
        replications: Optional[int] = None,
        buffer_capacity: Optional[str] = None,
        charge_interval_s: Optional[float] = None,
        charge_duration_s: Optional[float] = None,
    ) -> SimConfig:
        """
        Simulation config from these settings; explicit arguments win

        Args:
            shift: shift to simulate
            seed: overrides CELL_SEED
            replications: overrides CELL_REPLICATIONS
            buffer_capacity: overrides CELL_BUFFER ("inf" for unlimited)
            charge_interval_s, charge_duration_s: humanoid charging, used only when CELL_CHARGING is on

        Returns:
            Validated SimConfig
        """
        buffer = self.get_optional_int("CELL_BUFFER") if buffer_capacity is None else _parse_buffer(buffer_capacity)
        mttf = self.get_float("CELL_MTTF_S")

        document = {
            "shift": shift,
            "seed": self.seed if seed is None else seed,
            "replications": self.replications if replications is None else replications,
            "time_model": self.time_model(),
            "buffer_capacity": buffer,
            "mttf_s": mttf if math.isfinite(mttf) else None,
            "mttr_s": self.get_float("CELL_MTTR_S"),
            "failure_causes": self.failure_causes(),
            "changeover_s": self.get_float("CELL_CHANGEOVER_S"),
            "changeover_every_units": self.get_optional_int("CELL_CHANGEOVER_EVERY"),
        }
        if self.get_bool("CELL_CHARGING") and charge_interval_s is not None:
            document["charge_interval_s"] = charge_interval_s
            document["charge_duration_s"] = charge_duration_s or 0.0
        return SimConfig.from_document(document)

    def safety_config(self) -> SafetyConfig:
        try:
            return SafetyConfig(
                v_max_mm_s=self.get_float("CELL_ROBOT_MAX_SPEED_MM_S"),
                v_collab_cap_mm_s=self.get_float("CELL_COLLAB_CAP_MM_S"),
                v_h_mm_s=self.get_float("CELL_HUMAN_SPEED_MM_S"),
                t_r_s=self.get_float("CELL_REACTION_TIME_S"),
                t_s_s=self.get_float("CELL_STOP_TIME_S"),
                a_brake_mm_s2=self.get_float("CELL_BRAKE_DECEL_MM_S2"),
                clearance_mm=self.get_float("CELL_CLEARANCE_MM"),
                uncertainty_mm=self.get_float("CELL_UNCERTAINTY_MM"),
            )
        except ValueError as e:
            raise ConfigError(f"Invalid safety settings: {e}") from e

    def print_config(self) -> None:
        source = self.path if self.path is not None else "built-in defaults"
        print(f"🔧 Settings from {source}")
        print(f"   Seed: {self.seed}")
        print(f"   Replications: {self.replications}")
        print(f"   Time model: {self._raw('CELL_TIME_MODEL')}")
        print(f"   Buffer: {self._raw('CELL_BUFFER')}")
        print(f"   Jobs: {self.jobs}")
