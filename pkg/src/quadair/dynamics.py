"""Newton-Euler dynamics of the single-rigid-torso model with spring-damper
ground contact and four body-fixed thrusters.

Contact model, per foot:
  * penetration depth d = walkable height - foot z; no force while d <= 0
  * normal force Fz = max(0, k * d - c * vz)
  * tangential force is a stick spring-damper pulling the foot toward the
    anchor captured at touchdown, clamped per axis to the friction pyramid
    |Fx| <= mu Fz, |Fy| <= mu Fz; clamping means slip and resets the anchor
    to the current foot xy (the clamped force is still applied that step)

Integration is semi-implicit Euler (velocities first, then pose), which is
deterministic and stable for the stiff default contact at dt = 1 ms. The
inner loop runs in scalar math: it executes hundreds of thousands of times
per simulated mission (the reference-governor probe replays it for every
control decision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import Environment
from .geometry import quat_integrate, quat_to_matrix
from .kinematics import (
    NUM_LEGS,
    ROTOR_YAW_SIGNS,
    BodyState,
    ContactState,
    RobotParams,
)

GRAVITY = 9.81


class SimulationDiverged(RuntimeError):
    """Non-finite state encountered; carries the last good state."""

    def __init__(self, msg: str, body: BodyState, contact: ContactState):
        super().__init__(msg)
        self.body = body
        self.contact = contact


def _foot_contact(px, py, pz, vx, vy, vz, had_contact, ax, ay,
                  env: Environment, params: RobotParams):
    """Single-foot contact update in scalar math.

    Returns (fx, fy, fz, in_contact, anchor_x, anchor_y); the anchor is NaN
    while airborne.
    """
    gz = env.ground_height_or_base(px, py)
    depth = gz - pz
    if depth <= 0.0:
        return 0.0, 0.0, 0.0, False, math.nan, math.nan
    k = params.contact_stiffness
    c = params.contact_damping
    fz = k * depth - c * vz
    if fz < 0.0:
        fz = 0.0
    if not had_contact:
        ax, ay = px, py
    fx = k * (ax - px) - c * vx
    fy = k * (ay - py) - c * vy
    lim = params.mu * fz
    slipped = False
    if fx > lim:
        fx, slipped = lim, True
    elif fx < -lim:
        fx, slipped = -lim, True
    if fy > lim:
        fy, slipped = lim, True
    elif fy < -lim:
        fy, slipped = -lim, True
    if slipped:
        ax, ay = px, py
    return fx, fy, fz, True, ax, ay


def contact_forces(body: BodyState, legs: np.ndarray, legs_rate: np.ndarray,
                   contact: ContactState, env: Environment,
                   params: RobotParams) -> ContactState:
    """Update ground-reaction forces and stick anchors for all feet."""
    _, new_contact, _, _ = _step_core(body, contact, legs, legs_rate,
                                      np.zeros(NUM_LEGS), 0.0, env, params,
                                      integrate=False)
    return new_contact


def _step_core(body: BodyState, contact: ContactState, legs: np.ndarray,
               legs_rate: np.ndarray, thrusts, dt: float, env: Environment,
               params: RobotParams, integrate: bool = True):
    """Fused FK + contact + wrench + (optionally) integration.

    Returns (new_body, new_contact, contact_power, total_thrust) where
    contact_power is the summed |grf . foot_velocity| over the feet.
    """
    R = quat_to_matrix(body.q)
    r00, r01, r02 = R[0]
    r10, r11, r12 = R[1]
    r20, r21, r22 = R[2]
    rx, ry, rz = body.r
    vx_b, vy_b, vz_b = body.v
    wx, wy, wz = body.w

    new = contact.copy()
    fsum_x = fsum_y = fsum_z = 0.0
    tau_wx = tau_wy = tau_wz = 0.0  # contact torque about the COM, world frame
    power = 0.0

    for i in range(NUM_LEGS):
        phi, psi, length = legs[i]
        dphi, dpsi, dlen = legs_rate[i]
        sp, cp = math.sin(phi), math.cos(phi)
        ss, cs = math.sin(psi), math.cos(psi)
        hx, hy, hz = params.hip_offsets[i]
        # hip-to-foot vector and its joint-rate derivative, body frame
        dx = length * ss
        dy = length * sp * cs
        dz = -length * cp * cs
        sx, sy, sz = hx + dx, hy + dy, hz + dz
        dsx = dlen * ss + length * cs * dpsi
        dsy = dlen * sp * cs + length * (cp * cs * dphi - sp * ss * dpsi)
        dsz = -dlen * cp * cs + length * (sp * cs * dphi + cp * ss * dpsi)
        # body-frame foot velocity: w x s + ds
        bvx = wy * sz - wz * sy + dsx
        bvy = wz * sx - wx * sz + dsy
        bvz = wx * sy - wy * sx + dsz
        # world position and velocity
        px = rx + r00 * sx + r01 * sy + r02 * sz
        py = ry + r10 * sx + r11 * sy + r12 * sz
        pz = rz + r20 * sx + r21 * sy + r22 * sz
        vx = vx_b + r00 * bvx + r01 * bvy + r02 * bvz
        vy = vy_b + r10 * bvx + r11 * bvy + r12 * bvz
        vz = vz_b + r20 * bvx + r21 * bvy + r22 * bvz

        fx, fy, fz, in_c, ax, ay = _foot_contact(
            px, py, pz, vx, vy, vz, bool(new.in_contact[i]),
            new.anchor[i, 0], new.anchor[i, 1], env, params)
        new.in_contact[i] = in_c
        new.grf[i, 0] = fx
        new.grf[i, 1] = fy
        new.grf[i, 2] = fz
        new.anchor[i, 0] = ax
        new.anchor[i, 1] = ay
        if in_c:
            fsum_x += fx
            fsum_y += fy
            fsum_z += fz
            lx, ly, lz = px - rx, py - ry, pz - rz
            tau_wx += ly * fz - lz * fy
            tau_wy += lz * fx - lx * fz
            tau_wz += lx * fy - ly * fx
            power += abs(fx * vx + fy * vy + fz * vz)

    total_thrust = 0.0
    tau_bx = tau_by = tau_bz = 0.0  # thruster torque, body frame
    for j in range(NUM_LEGS):
        tj = float(thrusts[j])
        if tj != 0.0:
            total_thrust += tj
            tx, ty, tz = params.thruster_pos[j]
            tau_bx += ty * tj
            tau_by += -tx * tj
            tau_bz += ROTOR_YAW_SIGNS[j] * params.yaw_torque_coeff * tj

    if not integrate:
        return body, new, power, total_thrust

    # torque to body frame: R^T @ tau_world + thruster terms
    tau_x = r00 * tau_wx + r10 * tau_wy + r20 * tau_wz + tau_bx
    tau_y = r01 * tau_wx + r11 * tau_wy + r21 * tau_wz + tau_by
    tau_z = r02 * tau_wx + r12 * tau_wy + r22 * tau_wz + tau_bz

    m = params.mass
    ix, iy, iz = params.inertia_diag
    # w x (I w) gyroscopic term
    gx = wy * (iz * wz) - wz * (iy * wy)
    gy = wz * (ix * wx) - wx * (iz * wz)
    gz = wx * (iy * wy) - wy * (ix * wx)

    acc_x = (fsum_x + (r02 * total_thrust)) / m
    acc_y = (fsum_y + (r12 * total_thrust)) / m
    acc_z = (fsum_z + (r22 * total_thrust)) / m - GRAVITY

    v_new = np.array([vx_b + dt * acc_x, vy_b + dt * acc_y, vz_b + dt * acc_z])
    w_new = np.array([wx + dt * (tau_x - gx) / ix,
                      wy + dt * (tau_y - gy) / iy,
                      wz + dt * (tau_z - gz) / iz])
    r_new = body.r + dt * v_new
    q_new = quat_integrate(body.q, w_new, dt)

    if not (math.isfinite(v_new[0]) and math.isfinite(v_new[1]) and math.isfinite(v_new[2])
            and math.isfinite(w_new[0]) and math.isfinite(w_new[1]) and math.isfinite(w_new[2])
            and math.isfinite(r_new[0]) and math.isfinite(r_new[1]) and math.isfinite(r_new[2])):
        raise SimulationDiverged("non-finite state, halting", body, contact)

    return BodyState(r_new, q_new, v_new, w_new), new, power, total_thrust


def step(body: BodyState, contact: ContactState, legs: np.ndarray,
         legs_rate: np.ndarray, thrusts: np.ndarray, dt: float,
         env: Environment, params: RobotParams) -> tuple[BodyState, ContactState]:
    """One semi-implicit Euler step; returns new (BodyState, ContactState)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    thrusts = np.asarray(thrusts, dtype=float)
    if np.any(thrusts < -1e-12) or np.any(thrusts > params.thrust_max + 1e-9):
        raise ValueError(f"thrusts {thrusts.tolist()} outside [0, {params.thrust_max}]")
    new_body, new_contact, _, _ = _step_core(body, contact, legs, legs_rate,
                                             thrusts, dt, env, params)
    return new_body, new_contact


@dataclass(frozen=True)
class ModeEnergy:
    legged: float
    aerial: float


def thrust_power(thrusts, params: RobotParams) -> float:
    """Electrical power proxy for the fans: sum of c_e * T^1.5."""
    total = 0.0
    for t in thrusts:
        if t > 0.0:
            total += t ** 1.5
    return params.thrust_power_coeff * total


def legged_power(grf: np.ndarray, foot_vel: np.ndarray, params: RobotParams) -> float:
    """Mechanical contact work rate plus idle draw."""
    return float(np.sum(np.abs(np.einsum("ij,ij->i", grf, foot_vel)))) + params.idle_power


def meter_power(dt: float, grf_hist: np.ndarray, foot_vel_hist: np.ndarray,
                thrust_hist: np.ndarray, params: RobotParams) -> ModeEnergy:
    """Integrate per-mode energy over a uniformly sampled history.

    grf_hist and foot_vel_hist are (n, 4, 3); thrust_hist is (n, 4).
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    e_air = 0.0
    e_leg = 0.0
    for k in range(len(thrust_hist)):
        e_air += thrust_power(thrust_hist[k], params) * dt
        e_leg += legged_power(grf_hist[k], foot_vel_hist[k], params) * dt
    return ModeEnergy(legged=e_leg, aerial=e_air)


def mechanical_energy(body: BodyState, params: RobotParams) -> float:
    """Kinetic plus gravitational potential energy (for drift checks)."""
    ke = 0.5 * params.mass * float(body.v @ body.v)
    ke += 0.5 * float(body.w @ (params.inertia @ body.w))
    return ke + params.mass * GRAVITY * float(body.r[2])
