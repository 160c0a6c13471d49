"""Reference governor for the ground controller.

The governor filters commanded joint references so that the ground-reaction
forces a short model rollout predicts for the stance feet always satisfy the
friction pyramid. The update law is scalar interpolation toward the target
plus bisection to the largest feasible fraction, which keeps the filter
optimization-free while giving a checkable feasibility contract.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .kinematics import BodyState


class GovernorProbeError(RuntimeError):
    """The model probe failed; the governor holds the last applied reference."""


ProbeFn = Callable[[np.ndarray], np.ndarray]
"""Maps a candidate applied reference (12,) to predicted stance-foot forces
(n, 3) over the governor horizon."""

BISECTION_STEPS = 8


@dataclass
class GovernorState:
    applied_ref: np.ndarray
    kappa: float = 0.3
    horizon: int = 5

    def __post_init__(self):
        self.applied_ref = np.asarray(self.applied_ref, dtype=float)
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError("kappa must be in (0, 1]")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")


def friction_pyramid_ok(force, mu: float) -> bool:
    """True iff the contact force lies inside the linearized friction cone:
    Fz >= 0, |Fx| <= mu Fz, |Fy| <= mu Fz."""
    fx, fy, fz = float(force[0]), float(force[1]), float(force[2])
    return fz >= 0.0 and abs(fx) <= mu * fz and abs(fy) <= mu * fz


def _forces_ok(forces: np.ndarray, mu: float) -> bool:
    for f in np.atleast_2d(forces):
        if not friction_pyramid_ok(f, mu):
            return False
    return True


def governor_update(gov: GovernorState, target_ref: np.ndarray,
                    sim_probe: ProbeFn | None, mu: float) -> tuple[GovernorState, float]:
    """Move the applied reference toward the target as far as the probe allows.

    The candidate step is kappa * (target - applied). If the probe predicts a
    pyramid violation, the step is bisected (8 halvings) down to the largest
    feasible fraction, possibly zero. Returns the new state and the accepted
    fraction of the step. With horizon = 0 the probe is skipped entirely.
    """
    target = np.asarray(target_ref, dtype=float)
    delta = gov.kappa * (target - gov.applied_ref)
    if not np.any(delta):
        return gov, 1.0
    if gov.horizon == 0 or sim_probe is None:
        return replace(gov, applied_ref=gov.applied_ref + delta), 1.0

    def feasible(frac: float) -> bool:
        try:
            forces = sim_probe(gov.applied_ref + frac * delta)
        except Exception as exc:  # probe failure: hold last applied
            raise GovernorProbeError(f"model probe failed: {exc}") from exc
        return _forces_ok(forces, mu)

    if feasible(1.0):
        return replace(gov, applied_ref=gov.applied_ref + delta), 1.0
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return gov, 0.0
    return replace(gov, applied_ref=gov.applied_ref + lo * delta), lo


def track_feet(body: BodyState, foot_targets: np.ndarray, gov: GovernorState,
               params, sim_probe: ProbeFn | None, mu: float) -> tuple[GovernorState, np.ndarray, float]:
    """IK the world foot targets and pass them through the governor.

    Returns (new governor state, applied 12-vector, accepted fraction).
    Unreachable targets propagate as UnreachableTargetError.
    """
    from .kinematics import ik_all

    target_ref = ik_all(body, foot_targets, params).reshape(-1)
    gov2, frac = governor_update(gov, target_ref, sim_probe, mu)
    return gov2, gov2.applied_ref.copy(), frac
