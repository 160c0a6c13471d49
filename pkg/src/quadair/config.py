"""Aggregate robot configuration: physical parameters, controller gains,
governor settings, gait schedule, planner cost model and mission tuning.
Serialized as a single JSON file with one section per group; missing keys
fall back to defaults so partial configs stay valid."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .flight import FlightGains
from .gait import GaitSchedule
from .kinematics import RobotParams
from .planner import CostModel


@dataclass
class GovernorSettings:
    kappa: float = 0.3
    horizon: int = 5
    mu: float = 0.6        # enforcement pyramid, tighter than the physical mu
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must be in (0, 1]")


@dataclass
class MissionSettings:
    dt: float = 0.001
    control_every: int = 1       # sim steps per control update
    walk_speed: float = 0.25     # m/s
    cruise_speed: float = 1.0    # m/s
    ascend_speed: float = 0.5    # m/s
    descend_speed: float = 0.3   # m/s
    waypoint_tol: float = 0.15   # m, intermediate aerial waypoints
    final_tol: float = 0.08      # m, last aerial node before landing
    edge_timeout: float = 30.0   # s per plan edge
    crouch_length: float = 0.12  # leg length once airborne
    takeoff_ramp: float = 1.0    # s of thrust ramp before liftoff
    touchdown_speed_tol: float = 0.05  # m/s
    touchdown_dwell: float = 0.2       # s of quiet four-foot contact
    raibert_gain: float = 0.08   # s, swing-foot velocity feedback
    tilt_gain: float = 0.35      # m/rad, swing-foot shift toward the body lean
    com_shift: bool = True       # crawl COM shuffle toward stance triangles
    com_shift_lead: float = 0.06  # cycle fraction of anticipation
    fall_height_frac: float = 0.5
    fall_tilt: float = 0.6       # rad
    # Poincare sampling weights: position, angle, velocity, rate
    poincare_weights: tuple[float, float, float, float] = (1.0, 1.0, 0.1, 0.05)


@dataclass
class RobotConfig:
    robot: RobotParams = field(default_factory=RobotParams)
    flight: FlightGains = field(default_factory=FlightGains)
    governor: GovernorSettings = field(default_factory=GovernorSettings)
    gait: GaitSchedule = field(default_factory=GaitSchedule)
    cost: CostModel = field(default_factory=CostModel)
    mission: MissionSettings = field(default_factory=MissionSettings)


_SECTIONS = {
    "robot": RobotParams,
    "flight": FlightGains,
    "governor": GovernorSettings,
    "gait": GaitSchedule,
    "cost": CostModel,
    "mission": MissionSettings,
}


def _build(cls, overrides: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    coerced = {}
    for k, v in overrides.items():
        if isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        coerced[k] = v
    return cls(**coerced)


def config_from_dict(d: dict) -> RobotConfig:
    unknown = set(d) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {name: _build(cls, d.get(name, {})) for name, cls in _SECTIONS.items()}
    return RobotConfig(**kwargs)


def config_to_dict(cfg: RobotConfig) -> dict:
    return {name: dataclasses.asdict(getattr(cfg, name)) for name in _SECTIONS}


def load_config(path=None) -> RobotConfig:
    """Load a config file; with no path, return the built-in defaults."""
    if path is None:
        return RobotConfig()
    with open(path) as f:
        return config_from_dict(json.load(f))


def save_config(cfg: RobotConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
