"""Trajectory/mission log: one row per simulation step, CSV on disk.

Columns: time, torso pose/twist, 12 joint values, 4 rotor thrusts, 12 GRF
components, contact and gait-stance flags, mission phase, active plan edge,
governor accepted fraction, and cumulative per-mode energy meters. Metadata
travels in '# key=value' comment lines above the header so a log file is
self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kinematics import LEG_NAMES

_POSE_COLS = ["t", "rx", "ry", "rz", "qw", "qx", "qy", "qz",
              "vx", "vy", "vz", "wx", "wy", "wz"]
_JOINT_COLS = [f"{n}_{leg}" for leg in LEG_NAMES for n in ("phi", "psi", "len")]
_THRUST_COLS = [f"thrust_{j}" for j in range(4)]
_GRF_COLS = [f"grf_{leg}_{ax}" for leg in LEG_NAMES for ax in "xyz"]
_CONTACT_COLS = [f"contact_{leg}" for leg in LEG_NAMES]
_STANCE_COLS = [f"stance_{leg}" for leg in LEG_NAMES]
_TAIL_COLS = ["phase", "edge", "gov_frac", "e_leg", "e_air"]

COLUMNS = _POSE_COLS + _JOINT_COLS + _THRUST_COLS + _GRF_COLS + _CONTACT_COLS + _STANCE_COLS + _TAIL_COLS

LEGAL_PHASE_STEPS = {
    ("walk", "walk"), ("stand", "stand"),
    ("walk", "prepare_takeoff"), ("prepare_takeoff", "prepare_takeoff"),
    ("prepare_takeoff", "ascend"), ("ascend", "ascend"),
    ("ascend", "cruise"), ("cruise", "cruise"),
    ("cruise", "descend"), ("descend", "descend"),
    ("descend", "touchdown_detect"), ("touchdown_detect", "touchdown_detect"),
    ("touchdown_detect", "stand"),
    ("stand", "walk"), ("walk", "stand"),
}


@dataclass
class MissionLog:
    rows: list[tuple] = field(default_factory=list)
    phases: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, t, body, legs, thrusts, contact, stance, phase: str,
               edge: int, gov_frac: float, e_leg: float, e_air: float) -> None:
        row = (
            t,
            *body.r, *body.q, *body.v, *body.w,
            *legs.reshape(-1),
            *np.asarray(thrusts, dtype=float),
            *contact.grf.reshape(-1),
            *(1.0 if c else 0.0 for c in contact.in_contact),
            *(1.0 if s else 0.0 for s in stance),
            float(edge), gov_frac, e_leg, e_air,
        )
        self.rows.append(tuple(float(x) for x in row))
        self.phases.append(phase)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        """Numeric column by name ('phase' is not numeric; use .phases)."""
        idx = _numeric_index(name)
        return np.array([r[idx] for r in self.rows])

    def array(self, names) -> np.ndarray:
        idxs = [_numeric_index(n) for n in names]
        return np.array([[r[i] for i in idxs] for r in self.rows])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def body_states(self) -> np.ndarray:
        """(n, 13) array: r(3), q(4), v(3), w(3)."""
        return self.array(_POSE_COLS[1:])

    def joints(self) -> np.ndarray:
        return self.array(_JOINT_COLS).reshape(-1, 4, 3)

    def grf(self) -> np.ndarray:
        return self.array(_GRF_COLS).reshape(-1, 4, 3)

    def thrusts(self) -> np.ndarray:
        return self.array(_THRUST_COLS)

    def stance_flags(self) -> np.ndarray:
        return self.array(_STANCE_COLS) > 0.5

    def contact_flags(self) -> np.ndarray:
        return self.array(_CONTACT_COLS) > 0.5


_NUMERIC_COLS = [c for c in COLUMNS if c != "phase"]


def _numeric_index(name: str) -> int:
    return _NUMERIC_COLS.index(name)


def save_log(log: MissionLog, path) -> None:
    phase_idx = COLUMNS.index("phase")
    lines = [f"# {json.dumps(log.metadata, sort_keys=True)}"]
    lines.append(",".join(COLUMNS))
    for row, phase in zip(log.rows, log.phases):
        cells = [repr(v) for v in row]
        cells.insert(phase_idx, phase)
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def load_log(path) -> MissionLog:
    log = MissionLog()
    phase_idx = COLUMNS.index("phase")
    with open(path) as f:
        header_seen = False
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                log.metadata = json.loads(line[1:].strip() or "{}")
                continue
            if not header_seen:
                if line.split(",") != COLUMNS:
                    raise ValueError("unrecognized log header")
                header_seen = True
                continue
            cells = line.split(",")
            phase = cells.pop(phase_idx)
            log.rows.append(tuple(float(c) for c in cells))
            log.phases.append(phase)
    return log


def validate_log(log: MissionLog, mu: float | None = None) -> list[str]:
    """Structural checks on a mission log; returns a list of violations
    (empty means the log is well formed).

    Checks: strictly increasing timestamps, legal phase sequence, unit
    quaternions, non-decreasing energy meters, GRF normal non-negativity and,
    when mu is given, the physical friction-pyramid clamp.
    """
    problems: list[str] = []
    if len(log) == 0:
        return ["log is empty"]
    t = log.t
    if np.any(np.diff(t) <= 0):
        problems.append("timestamps not strictly increasing")
    for k, (a, b) in enumerate(zip(log.phases, log.phases[1:])):
        if (a, b) not in LEGAL_PHASE_STEPS:
            problems.append(f"illegal phase transition {a} -> {b} at row {k + 1}")
            break
    q = log.array(["qw", "qx", "qy", "qz"])
    if np.any(np.abs(np.linalg.norm(q, axis=1) - 1.0) > 1e-6):
        problems.append("quaternion norm drifted from 1")
    for col in ("e_leg", "e_air"):
        if np.any(np.diff(log.column(col)) < -1e-12):
            problems.append(f"energy meter {col} decreased")
    grf = log.grf()
    if np.any(grf[:, :, 2] < -1e-12):
        problems.append("negative normal force logged")
    if mu is not None:
        fz = grf[:, :, 2]
        if np.any(np.abs(grf[:, :, 0]) > mu * fz + 1e-9) or np.any(np.abs(grf[:, :, 1]) > mu * fz + 1e-9):
            problems.append(f"tangential force outside the mu = {mu} pyramid")
    return problems


def pyramid_violations(log: MissionLog, mu: float) -> int:
    """Count logged rows where any gait-stance foot violates the pyramid at mu."""
    grf = log.grf()
    stance = log.stance_flags()
    bad = 0
    for k in range(len(log)):
        for i in range(4):
            if not stance[k, i]:
                continue
            fx, fy, fz = grf[k, i]
            if fz < 0 or abs(fx) > mu * fz + 1e-12 or abs(fy) > mu * fz + 1e-12:
                bad += 1
                break
    return bad
