"""Flat run configuration shared by all CLI commands.

Precedence, lowest to highest: built-in defaults, --config JSON file,
AFFGR_-prefixed environment variables, explicit command-line flags.
Unknown keys are rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from . import graspgeom

ENV_PREFIX = "AFFGR_"

DEFAULTS: dict[str, Any] = {
    # reward scoring
    "iou_threshold": 0.5,
    "box_l1_threshold_px": 10.0,
    "keypoint_l1_threshold_px": 30.0,
    "w_fmt": 1.0,
    "w_rep": 1.0,
    "w_acc": 1.0,
    "matching_strategy": "optimal",
    "nonrepeat_ngram_size": 0,
    # group objective
    "group_size": 8,
    "epsilon": 0.2,
    "beta": 0.0,
    "std_floor": 1e-8,
    # dataset gate
    "gate_threshold": 0.6,
    # grasp selection
    "voxel": graspgeom.VOXEL_DEFAULT,
    "clearance": graspgeom.CLEARANCE_DEFAULT,
    "top_k": graspgeom.TOP_K_DEFAULT,
    "iou_min": None,
    "nms_trans": graspgeom.NMS_TRANS_DEFAULT,
    "nms_rot_deg": 30.0,
    "max_open_width": graspgeom.MAX_OPEN_WIDTH_DEFAULT,
    "finger_thickness": graspgeom.FINGER_THICKNESS_DEFAULT,
    # execution
    "jobs": 1,
    "seed": None,
}

_INT_KEYS = {"nonrepeat_ngram_size", "group_size", "top_k", "jobs", "seed"}
_STR_KEYS = {"matching_strategy"}
_OPTIONAL_KEYS = {"iou_min", "seed"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    values: Mapping[str, Any]

    def __getattr__(self, key: str) -> Any:
        try:
            return self.values[key]
        except KeyError as exc:
            raise AttributeError(key) from exc

    @property
    def nms_rot(self) -> float:
        return math.radians(self.values["nms_rot_deg"])


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        if key in _OPTIONAL_KEYS:
            return None
        raise ConfigError(f"config key {key!r} must not be null")
    if key in _STR_KEYS:
        return str(value)
    if key in _INT_KEYS:
        if isinstance(value, str):
            value = int(value)
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"config key {key!r} must be an integer")
        return int(value)
    if isinstance(value, str):
        return float(value)
    return float(value)


def load_config(
    config_path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    values = dict(DEFAULTS)
    if config_path is not None:
        try:
            file_values = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: bad config JSON") from exc
        if not isinstance(file_values, dict):
            raise ConfigError(f"{config_path}: config must be a JSON object")
        for key, value in file_values.items():
            if key not in DEFAULTS:
                raise ConfigError(f"{config_path}: unknown config key {key!r}")
            values[key] = _coerce(key, value)
    env = os.environ if env is None else env
    for key in DEFAULTS:
        env_name = ENV_PREFIX + key.upper()
        if env_name in env:
            values[key] = _coerce(key, env[env_name])
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            values[key] = _coerce(key, value)
    return RunConfig(values=values)
