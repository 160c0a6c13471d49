"""Reduced-order robot model: rigid torso state, massless 3-DOF legs, parameters.

Each leg is described by a hip frontal angle phi (about the body roll axis,
positive swings the foot toward +y), a hip sagittal angle psi (about the body
pitch axis, positive swings the foot toward +x) and a telescoping length.
The leg vector from the hip, in the body frame, is

    d(phi, psi, length) = length * (sin psi, sin phi cos psi, -cos phi cos psi)

i.e. straight down for phi = psi = 0, rotated by the pitch swing first and the
roll swing second (extrinsic axes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import quat_identity, quat_normalize, quat_rotate, quat_to_matrix

LEG_NAMES = ("fl", "fr", "bl", "br")
NUM_LEGS = 4

# Rotor handedness for the yaw mixer, following the perimeter ordering of
# thruster_pos (fl, fr, br, bl): adjacent rotors alternate spin direction so
# diagonal pairs match.
ROTOR_YAW_SIGNS = (1.0, -1.0, 1.0, -1.0)


class JointLimitError(ValueError):
    """A commanded leg DOF is outside its limit; names the offending DOF."""


class UnreachableTargetError(ValueError):
    """IK target outside the reachable shell; carries the distance from the
    nearest reachable point."""

    def __init__(self, msg: str, distance: float):
        super().__init__(msg)
        self.distance = distance


@dataclass
class BodyState:
    """6-DOF torso state: world COM position, world<-body unit quaternion,
    world COM velocity, body-frame angular velocity."""

    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=quat_identity)
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "BodyState":
        return BodyState(self.r.copy(), self.q.copy(), self.v.copy(), self.w.copy())


@dataclass(frozen=True)
class LegConfig:
    phi: float = 0.0
    psi: float = 0.0
    length: float = 0.3


@dataclass
class RobotParams:
    mass: float = 4.3
    inertia_diag: tuple[float, float, float] = (0.08, 0.12, 0.10)
    hip_offsets: tuple = (
        (0.15, 0.08, 0.0),   # fl
        (0.15, -0.08, 0.0),  # fr
        (-0.15, 0.08, 0.0),  # bl
        (-0.15, -0.08, 0.0), # br
    )
    leg_min: float = 0.08
    leg_max: float = 0.35
    phi_max: float = 0.9
    # exactly pi/2: full forward swing stays reachable while the IK pitch
    # branch remains unique (cos psi >= 0 on the whole range)
    psi_max: float = math.pi / 2
    mu: float = 0.8
    contact_stiffness: float = 20000.0  # k_c, N/m
    contact_damping: float = 600.0      # d_c, N s/m
    # perimeter order fl, fr, br, bl so ROTOR_YAW_SIGNS alternates correctly
    thruster_pos: tuple = (
        (0.12, 0.10, 0.05),
        (0.12, -0.10, 0.05),
        (-0.12, -0.10, 0.05),
        (-0.12, 0.10, 0.05),
    )
    thrust_max: float = 19.0
    yaw_torque_coeff: float = 0.02  # k_yaw, m
    stand_height: float = 0.30
    # kinematic joint-speed caps for the commanded (massless) legs
    phi_rate_max: float = 15.0   # rad/s
    psi_rate_max: float = 15.0   # rad/s
    length_rate_max: float = 3.0  # m/s
    # energy meter constants
    thrust_power_coeff: float = 7.0  # c_e, W/N^1.5 (actuator-disk proxy)
    idle_power: float = 30.0         # W

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be > 0")
        if any(i <= 0 for i in self.inertia_diag):
            raise ValueError("inertia must be positive definite")
        if self.mu <= 0:
            raise ValueError("friction coefficient must be > 0")
        if self.thrust_max <= 0:
            raise ValueError("thrust_max must be > 0")
        if not 0 < self.leg_min < self.leg_max:
            raise ValueError("need 0 < leg_min < leg_max")

    @property
    def inertia(self) -> np.ndarray:
        return np.diag(self.inertia_diag)

    @property
    def inertia_inv(self) -> np.ndarray:
        return np.diag([1.0 / i for i in self.inertia_diag])

    @property
    def weight(self) -> float:
        return self.mass * 9.81

    def hip(self, i: int) -> np.ndarray:
        return np.array(self.hip_offsets[i])


@dataclass
class ContactState:
    """Per-leg contact bookkeeping. `anchor` is the world xy point the
    tangential stick-spring pulls the foot toward; NaN while airborne."""

    in_contact: np.ndarray = field(default_factory=lambda: np.zeros(NUM_LEGS, dtype=bool))
    grf: np.ndarray = field(default_factory=lambda: np.zeros((NUM_LEGS, 3)))
    anchor: np.ndarray = field(default_factory=lambda: np.full((NUM_LEGS, 2), np.nan))

    def copy(self) -> "ContactState":
        return ContactState(self.in_contact.copy(), self.grf.copy(), self.anchor.copy())


def check_leg_limits(leg: LegConfig, params: RobotParams) -> None:
    if abs(leg.phi) > params.phi_max:
        raise JointLimitError(f"phi = {leg.phi:.4f} exceeds |phi| <= {params.phi_max}")
    if abs(leg.psi) > params.psi_max:
        raise JointLimitError(f"psi = {leg.psi:.4f} exceeds |psi| <= {params.psi_max}")
    if not params.leg_min <= leg.length <= params.leg_max:
        raise JointLimitError(
            f"length = {leg.length:.4f} outside [{params.leg_min}, {params.leg_max}]"
        )


def leg_vector(phi: float, psi: float, length: float) -> np.ndarray:
    """Hip-to-foot vector in the body frame."""
    sp, cp = math.sin(phi), math.cos(phi)
    ss, cs = math.sin(psi), math.cos(psi)
    return length * np.array([ss, sp * cs, -cp * cs])


def leg_vector_rate(phi: float, psi: float, length: float,
                    dphi: float, dpsi: float, dlength: float) -> np.ndarray:
    """Time derivative of leg_vector for given joint rates."""
    sp, cp = math.sin(phi), math.cos(phi)
    ss, cs = math.sin(psi), math.cos(psi)
    d_dl = np.array([ss, sp * cs, -cp * cs])
    d_dphi = length * np.array([0.0, cp * cs, sp * cs])
    d_dpsi = length * np.array([cs, -sp * ss, cp * ss])
    return d_dl * dlength + d_dphi * dphi + d_dpsi * dpsi


def foot_position(body: BodyState, leg: LegConfig, i: int, params: RobotParams) -> np.ndarray:
    """World position of foot i for the given torso state and leg configuration."""
    check_leg_limits(leg, params)
    s = params.hip(i) + leg_vector(leg.phi, leg.psi, leg.length)
    return body.r + quat_rotate(body.q, s)


def feet_positions(body: BodyState, legs: np.ndarray, params: RobotParams) -> np.ndarray:
    """All four foot world positions; legs is a (4, 3) array of (phi, psi, length)."""
    R = quat_to_matrix(body.q)
    out = np.empty((NUM_LEGS, 3))
    for i in range(NUM_LEGS):
        s = params.hip(i) + leg_vector(legs[i, 0], legs[i, 1], legs[i, 2])
        out[i] = body.r + R @ s
    return out


def feet_velocities(body: BodyState, legs: np.ndarray, legs_rate: np.ndarray,
                    params: RobotParams) -> np.ndarray:
    """World velocities of the feet, accounting for body motion and joint rates."""
    R = quat_to_matrix(body.q)
    wx, wy, wz = body.w
    out = np.empty((NUM_LEGS, 3))
    for i in range(NUM_LEGS):
        s = params.hip(i) + leg_vector(legs[i, 0], legs[i, 1], legs[i, 2])
        ds = leg_vector_rate(legs[i, 0], legs[i, 1], legs[i, 2],
                             legs_rate[i, 0], legs_rate[i, 1], legs_rate[i, 2])
        spin = np.array([wy * s[2] - wz * s[1] + ds[0],
                         wz * s[0] - wx * s[2] + ds[1],
                         wx * s[1] - wy * s[0] + ds[2]])
        out[i] = body.v + R @ spin
    return out


def leg_ik(body: BodyState, foot_world, i: int, params: RobotParams) -> LegConfig:
    """Invert foot_position. Raises UnreachableTargetError (with the distance
    from the nearest reachable point) if the target is outside the leg's
    reachable shell or joint limits."""
    target = np.asarray(foot_world, dtype=float)
    s = quat_to_matrix(body.q).T @ (target - body.r) - params.hip(i)
    length = math.sqrt(float(s @ s))
    if length < 1e-12:
        raise UnreachableTargetError("target coincides with hip", params.leg_min)
    psi = math.atan2(s[0], math.sqrt(s[1] * s[1] + s[2] * s[2]))
    phi = math.atan2(s[1], -s[2]) if (abs(s[1]) > 1e-15 or abs(s[2]) > 1e-15) else 0.0

    phi_c = max(-params.phi_max, min(params.phi_max, phi))
    psi_c = max(-params.psi_max, min(params.psi_max, psi))
    len_c = max(params.leg_min, min(params.leg_max, length))
    if phi_c != phi or psi_c != psi or len_c != length:
        nearest = leg_vector(phi_c, psi_c, len_c)
        miss = float(np.linalg.norm(nearest - s))
        raise UnreachableTargetError(
            f"foot target {target.tolist()} unreachable for leg {LEG_NAMES[i]} "
            f"(misses reachable set by {miss:.4f} m)",
            miss,
        )
    return LegConfig(phi=phi, psi=psi, length=length)


def ik_all(body: BodyState, targets: np.ndarray, params: RobotParams,
           clamp: bool = False) -> np.ndarray:
    """(4, 3) array of joint values reaching the given (4, 3) world targets.

    With clamp=True, targets outside the reachable shell saturate at the
    joint limits (controller behaviour) instead of raising.
    """
    R_T = quat_to_matrix(body.q).T
    out = np.empty((NUM_LEGS, 3))
    for i in range(NUM_LEGS):
        if not clamp:
            cfg = leg_ik(body, targets[i], i, params)
            out[i] = (cfg.phi, cfg.psi, cfg.length)
            continue
        s = R_T @ (np.asarray(targets[i], dtype=float) - body.r) - params.hip(i)
        length = math.sqrt(float(s @ s))
        psi = math.atan2(s[0], math.sqrt(s[1] * s[1] + s[2] * s[2]))
        phi = math.atan2(s[1], -s[2]) if (abs(s[1]) > 1e-15 or abs(s[2]) > 1e-15) else 0.0
        out[i, 0] = max(-params.phi_max, min(params.phi_max, phi))
        out[i, 1] = max(-params.psi_max, min(params.psi_max, psi))
        out[i, 2] = max(params.leg_min, min(params.leg_max, length))
    return out


def legs_to_array(legs) -> np.ndarray:
    return np.array([(lc.phi, lc.psi, lc.length) for lc in legs])


def legs_from_array(arr: np.ndarray):
    return tuple(LegConfig(float(a[0]), float(a[1]), float(a[2])) for a in arr)


def standing_legs(params: RobotParams) -> np.ndarray:
    """Joint array for standing with feet straight below the hips."""
    return np.array([[0.0, 0.0, params.stand_height]] * NUM_LEGS)
