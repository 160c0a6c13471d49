"""Cascaded flight control for the four-thruster layout: position PD with
gravity compensation -> tilt attitude setpoint -> quaternion-PD attitude loop
-> exact 4x4 thrust allocation with priority-ordered saturation handling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import GRAVITY
from .geometry import matrix_to_quat, quat_conj, quat_mul, quat_to_matrix
from .kinematics import ROTOR_YAW_SIGNS, BodyState, RobotParams


@dataclass
class FlightGains:
    kp_pos: float = 4.0   # 1/s^2
    kd_pos: float = 3.0   # 1/s
    kp_att: float = 60.0
    kd_att: float = 8.0
    a_max: float = 6.0     # commanded-acceleration cap, m/s^2
    tilt_max: float = 0.5  # rad

    def __post_init__(self):
        if min(self.kp_pos, self.kd_pos, self.kp_att, self.kd_att, self.a_max) <= 0:
            raise ValueError("all gains must be > 0")
        if not 0 < self.tilt_max < math.pi / 2:
            raise ValueError("tilt_max must be in (0, pi/2)")


def position_loop(r_des, v_des, body: BodyState, gains: FlightGains,
                  params: RobotParams, yaw_des: float = 0.0) -> tuple[np.ndarray, float]:
    """Outer loop: returns (attitude setpoint quaternion, total thrust N).

    The PD acceleration is norm-clamped to a_max before gravity compensation;
    the commanded tilt is clamped to tilt_max at constant azimuth, and the
    thrust is the commanded specific force projected on the current body z.
    """
    r_des = np.asarray(r_des, dtype=float)
    v_des = np.asarray(v_des, dtype=float)
    a_pd = gains.kp_pos * (r_des - body.r) + gains.kd_pos * (v_des - body.v)
    norm = float(np.linalg.norm(a_pd))
    if norm > gains.a_max:
        a_pd = a_pd * (gains.a_max / norm)
    a_cmd = a_pd + np.array([0.0, 0.0, GRAVITY])

    a_xy = math.hypot(a_cmd[0], a_cmd[1])
    tilt = math.atan2(a_xy, max(a_cmd[2], 1e-9))
    if tilt > gains.tilt_max:
        az = math.atan2(a_cmd[1], a_cmd[0])
        mag = float(np.linalg.norm(a_cmd))
        a_dir = np.array([
            math.sin(gains.tilt_max) * math.cos(az),
            math.sin(gains.tilt_max) * math.sin(az),
            math.cos(gains.tilt_max),
        ])
        a_cmd = mag * a_dir

    z_des = a_cmd / float(np.linalg.norm(a_cmd))
    x_c = np.array([math.cos(yaw_des), math.sin(yaw_des), 0.0])
    y_b = np.cross(z_des, x_c)
    y_b = y_b / float(np.linalg.norm(y_b))
    x_b = np.cross(y_b, z_des)
    q_des = matrix_to_quat(np.column_stack([x_b, y_b, z_des]))

    body_z = quat_to_matrix(body.q)[:, 2]
    thrust_total = params.mass * max(0.0, float(a_cmd @ body_z))
    return q_des, thrust_total


def attitude_loop(q_des: np.ndarray, body: BodyState, gains: FlightGains,
                  params: RobotParams) -> np.ndarray:
    """Inner loop: body torques from the shortest-rotation quaternion error,
    tau = I (kp * e_q - kd * w)."""
    q_err = quat_mul(quat_conj(body.q), q_des)
    if q_err[0] < 0.0:
        q_err = -q_err
    e = q_err[1:4]
    return params.inertia @ (gains.kp_att * e - gains.kd_att * body.w)


def _allocation_matrix(params: RobotParams) -> np.ndarray:
    pos = np.array(params.thruster_pos)
    A = np.empty((4, 4))
    A[0] = 1.0
    A[1] = pos[:, 1]
    A[2] = -pos[:, 0]
    A[3] = np.array(ROTOR_YAW_SIGNS) * params.yaw_torque_coeff
    return A


def _max_fraction(base: np.ndarray, extra: np.ndarray, t_max: float) -> float:
    """Largest gamma in [0, 1] with base + gamma * extra inside [0, t_max]^4."""
    gamma = 1.0
    for b, e in zip(base, extra):
        if e > 1e-12:
            gamma = min(gamma, (t_max - b) / e)
        elif e < -1e-12:
            gamma = min(gamma, (0.0 - b) / e)
    return max(0.0, gamma)


def mixer(thrust_total: float, tau, params: RobotParams) -> np.ndarray:
    """Allocate total thrust and body torques to the four rotors.

    Solves the 4x4 allocation exactly; under saturation, total thrust is
    re-satisfied first and torques are scaled back (roll/pitch jointly,
    then yaw) to the largest feasible fraction.
    """
    tau = np.asarray(tau, dtype=float)
    A = _allocation_matrix(params)
    t_max = params.thrust_max
    u = np.linalg.solve(A, np.array([thrust_total, tau[0], tau[1], tau[2]]))
    if np.all(u >= -1e-12) and np.all(u <= t_max + 1e-12):
        return np.clip(u, 0.0, t_max)

    # saturated: priority total > roll/pitch > yaw
    total = min(max(thrust_total, 0.0), 4.0 * t_max)
    u_tot = np.full(4, total / 4.0)
    u_rp = np.linalg.solve(A, np.array([0.0, tau[0], tau[1], 0.0]))
    beta = _max_fraction(u_tot, u_rp, t_max)
    base = u_tot + beta * u_rp
    u_yaw = np.linalg.solve(A, np.array([0.0, 0.0, 0.0, tau[2]]))
    gamma = _max_fraction(base, u_yaw, t_max)
    return np.clip(base + gamma * u_yaw, 0.0, t_max)


def flight_command(r_des, v_des, body: BodyState, gains: FlightGains,
                   params: RobotParams, yaw_des: float = 0.0) -> np.ndarray:
    """Full cascade: position -> attitude -> mixer, returning 4 rotor thrusts."""
    q_des, thrust_total = position_loop(r_des, v_des, body, gains, params, yaw_des)
    tau = attitude_loop(q_des, body, gains, params)
    return mixer(thrust_total, tau, params)
