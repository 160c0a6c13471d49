"""3D world model: flat ground plane plus axis-aligned box obstacles.

Occupancy is closed-set: obstacle boundaries count as occupied, the workspace
boundary itself is traversable. All queries use SI units in a right-handed
frame with z up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

Vec3 = tuple[float, float, float]


class OutsideWorkspaceError(ValueError):
    """Raised for ground-height queries outside the workspace footprint."""


@dataclass(frozen=True)
class Box:
    lo: Vec3
    hi: Vec3

    def __post_init__(self):
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise ValueError(f"box min corner must be < max corner, got {self.lo} / {self.hi}")

    def contains(self, p) -> bool:
        """Closed-box membership."""
        return all(lo <= c <= hi for c, lo, hi in zip(p, self.lo, self.hi))

    def footprint_contains(self, x: float, y: float) -> bool:
        return self.lo[0] <= x <= self.hi[0] and self.lo[1] <= y <= self.hi[1]


@dataclass(frozen=True)
class Environment:
    ground_z: float
    bounds: Box
    obstacles: tuple[Box, ...] = ()

    def __post_init__(self):
        for ob in self.obstacles:
            if not (self.bounds.contains(ob.lo) and self.bounds.contains(ob.hi)):
                raise ValueError(f"obstacle {ob} extends outside bounds {self.bounds}")

    def is_free(self, p) -> bool:
        """True iff p is within bounds, strictly above the ground plane and
        outside every obstacle box (boxes are closed, so boundary points
        count as occupied)."""
        if not self.bounds.contains(p):
            return False
        if p[2] <= self.ground_z:
            return False
        for ob in self.obstacles:
            if ob.contains(p):
                return False
        return True

    def ground_height(self, x: float, y: float) -> float:
        """Height of the walkable surface under (x, y): the top of the tallest
        ground-resting obstacle whose footprint covers the point, else the
        ground plane."""
        if not self.bounds.footprint_contains(x, y):
            raise OutsideWorkspaceError(f"({x}, {y}) outside workspace footprint")
        h = self.ground_z
        for ob in self.obstacles:
            if ob.lo[2] <= self.ground_z and ob.footprint_contains(x, y):
                h = max(h, ob.hi[2])
        return h

    def ground_height_or_base(self, x: float, y: float) -> float:
        """Like ground_height but falls back to the base plane outside the
        footprint (used by the contact model, which must never raise)."""
        try:
            return self.ground_height(x, y)
        except OutsideWorkspaceError:
            return self.ground_z

    def segment_free(self, p0, p1, step: float) -> bool:
        """Sampled collision check along [p0, p1], endpoints included.

        The sample count is rounded up to a power-of-two subdivision so that
        shrinking `step` always yields a superset of the previous sample set
        (shrinking the step can therefore never flip the result from blocked
        to free).
        """
        if step <= 0.0:
            raise ValueError("step must be > 0")
        dx = p1[0] - p0[0]
        dy = p1[1] - p0[1]
        dz = p1[2] - p0[2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist == 0.0:
            return self.is_free(p0)
        n = 1 << max(0, math.ceil(math.log2(dist / step))) if dist > step else 1
        for i in range(n + 1):
            u = i / n
            if not self.is_free((p0[0] + u * dx, p0[1] + u * dy, p0[2] + u * dz)):
                return False
        return True


def environment_to_dict(env: Environment) -> dict:
    return {
        "ground_z": env.ground_z,
        "bounds": {"min": list(env.bounds.lo), "max": list(env.bounds.hi)},
        "obstacles": [{"min": list(ob.lo), "max": list(ob.hi)} for ob in env.obstacles],
    }


def environment_from_dict(d: dict) -> Environment:
    bounds = Box(tuple(d["bounds"]["min"]), tuple(d["bounds"]["max"]))
    obstacles = tuple(Box(tuple(ob["min"]), tuple(ob["max"])) for ob in d.get("obstacles", []))
    return Environment(ground_z=float(d["ground_z"]), bounds=bounds, obstacles=obstacles)


def load_environment(path) -> Environment:
    with open(path) as f:
        return environment_from_dict(json.load(f))


def save_environment(env: Environment, path) -> None:
    Path(path).write_text(json.dumps(environment_to_dict(env), indent=2, sort_keys=True) + "\n")


def load_demo_environment(name: str = "wall") -> Environment:
    """Packaged demo worlds. `wall` is a full-width wall that splits the
    walkable layer and forces an aerial traverse."""
    path = Path(__file__).parent / "data" / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no packaged environment named {name!r}")
    return load_environment(path)
