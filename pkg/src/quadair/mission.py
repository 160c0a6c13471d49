"""End-to-end mission execution in the reduced-order simulator.

Ground phases track gait foot targets through leg IK against a reference
torso pose; the commanded legs then couple the real torso to that reference
through the contact springs, which is what stabilizes posture. Flight phases
run the cascaded thrust controller. Legged <-> aerial hand-offs follow the
takeoff / landing state machine (walk, prepare_takeoff, ascend, cruise,
descend, touchdown_detect, stand).

Everything here is deterministic: the governor probe and the real loop share
one stepping routine, so accepted references replay bit-identically.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RobotConfig
from .dynamics import _step_core, thrust_power
from .environment import Box, Environment
from .flight import flight_command
from .gait import GaitSchedule, gait_phase, stability_margin, support_polygon, swing_trajectory
from .geometry import quat_identity, quat_to_rpy
from .governor import GovernorState, governor_update
from .kinematics import (
    NUM_LEGS,
    BodyState,
    ContactState,
    RobotParams,
    feet_positions,
    feet_velocities,
    ik_all,
    standing_legs,
)
from .missionlog import MissionLog
from .planner import (
    CostModel,
    Mode,
    ModalGraph,
    Plan,
    astar,
    dijkstra,
    discretize_mmprm,
    discretize_uniform,
    nearest_node,
    subgraph_by_mode,
)


class MissionAbort(RuntimeError):
    """Mission could not complete; the partial log is attached."""

    def __init__(self, msg: str, log: MissionLog):
        super().__init__(msg)
        self.log = log


def flat_environment(half_extent: float = 10.0, height: float = 5.0) -> Environment:
    return Environment(
        ground_z=0.0,
        bounds=Box((-half_extent, -half_extent, 0.0), (half_extent, half_extent, height)),
    )


@dataclass
class SimState:
    t: float
    body: BodyState
    contact: ContactState
    legs: np.ndarray
    e_leg: float = 0.0
    e_air: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.t, self.body.copy(), self.contact.copy(),
                        self.legs.copy(), self.e_leg, self.e_air)


class GaitFootControl:
    """World foot targets from the gait schedule.

    Stance feet hold the world anchor captured at touchdown; swing feet sweep
    from behind to ahead of the (moving) hip projection with a half-sine lift,
    plus a velocity-feedback shift of the touchdown point that damps torso
    drift (in-place gaits included).
    """

    def __init__(self, sched: GaitSchedule, params: RobotParams, env: Environment,
                 ref_xy: np.ndarray, raibert_gain: float, tilt_gain: float = 0.0):
        self.sched = sched
        self.params = params
        self.env = env
        self.raibert = raibert_gain
        self.tilt_gain = tilt_gain
        self.prev_stance = np.ones(NUM_LEGS, dtype=bool)
        self.anchors = np.empty((NUM_LEGS, 3))
        for i in range(NUM_LEGS):
            hip = params.hip_offsets[i]
            x, y = ref_xy[0] + hip[0], ref_xy[1] + hip[1]
            self.anchors[i] = (x, y, env.ground_height_or_base(x, y))

    def _swing_point(self, i: int, u: float, ref_xy, heading, shift) -> np.ndarray:
        hip = self.params.hip_offsets[i]
        cx = ref_xy[0] + hip[0] + shift[0]
        cy = ref_xy[1] + hip[1] + shift[1]
        dx, dz = swing_trajectory(u, self.sched)
        x = cx + heading[0] * dx
        y = cy + heading[1] * dx
        return np.array([x, y, self.env.ground_height_or_base(x, y) + dz])

    def _placement_shift(self, body: BodyState, v_ref) -> np.ndarray:
        """Touchdown correction: velocity feedback plus a shift toward the
        body-lean direction, which is what catches the roll mode about the
        stance diagonal (a two-contact trot has no passive stiffness there)."""
        v_err = body.v[:2] - np.asarray(v_ref)[:2]
        w, x, y, z = body.q  # world z-axis tilt of the torso
        lean = np.array([2 * (x * z + y * w), 2 * (y * z - x * w)])
        shift = self.raibert * v_err + self.tilt_gain * lean
        norm = float(np.linalg.norm(shift))
        if norm > 0.08:
            shift *= 0.08 / norm
        return shift

    def targets(self, t_gait: float, ref_xy, heading, v_ref, body: BodyState
                ) -> tuple[np.ndarray, np.ndarray]:
        if self.sched.freq == 0.0:
            stance = np.ones(NUM_LEGS, dtype=bool)
            return self.anchors.copy(), stance
        phases, stance = gait_phase(t_gait, self.sched)
        # corrections track the live state: the roll mode grows within a
        # single half-cycle, so a swing foot must chase it until touchdown
        shift = self._placement_shift(body, v_ref)
        out = np.empty((NUM_LEGS, 3))
        for i in range(NUM_LEGS):
            if stance[i]:
                if not self.prev_stance[i]:
                    self.anchors[i] = self._swing_point(i, 1.0, ref_xy, heading, shift)
                out[i] = self.anchors[i]
            else:
                u = (phases[i] - self.sched.duty) / (1.0 - self.sched.duty)
                out[i] = self._swing_point(i, min(1.0, u), ref_xy, heading, shift)
        self.prev_stance = stance.copy()
        return out, stance


def crawl_com_shift(t_gait: float, sched: GaitSchedule, params: RobotParams,
                    lead: float = 0.06, blend: float = 0.3) -> np.ndarray:
    """Cyclic xy shuffle of the torso reference toward the centroid of the
    stance triangle of whichever leg is (about to be) in swing. Stateless in
    t, so it is exactly periodic. Only meaningful for duty > 0.5 gaits."""
    hips = np.array(params.hip_offsets)[:, :2]
    shift = np.zeros(2)
    wsum = 0.0
    swing_len = 1.0 - sched.duty
    for i in range(NUM_LEGS):
        phase = (t_gait * sched.freq + sched.phase_offset[i] + lead) % 1.0
        if phase < sched.duty:
            continue
        u = (phase - sched.duty) / swing_len
        if u < blend:
            w = 0.5 * (1 - math.cos(math.pi * u / blend))
        elif u > 1.0 - blend:
            w = 0.5 * (1 - math.cos(math.pi * (1.0 - u) / blend))
        else:
            w = 1.0
        others = [j for j in range(NUM_LEGS) if j != i]
        shift = shift + w * hips[others].mean(axis=0)
        wsum += w
    if wsum > 1.0:
        shift /= wsum
    return shift


class MissionRunner:
    """Owns the simulator state, the governor, the log and the phase machine."""

    def __init__(self, env: Environment, config: RobotConfig,
                 start_xy=(0.0, 0.0), metadata: dict | None = None):
        self.env = env
        self.cfg = config
        self.params = config.robot
        self.dt = config.mission.dt
        p = self.params
        ground = env.ground_height_or_base(start_xy[0], start_xy[1])
        settle = p.weight / (4.0 * p.contact_stiffness)
        body = BodyState(r=np.array([start_xy[0], start_xy[1],
                                     ground + p.stand_height - settle]))
        legs = standing_legs(p)
        self.state = SimState(t=0.0, body=body, contact=ContactState(), legs=legs)
        self.ref_xy = np.array([float(start_xy[0]), float(start_xy[1])])
        self.cruise_ref: np.ndarray | None = None
        g = config.governor
        self.gov = GovernorState(applied_ref=legs.reshape(-1).copy(),
                                 kappa=g.kappa, horizon=g.horizon)
        self.phase = "stand"
        self.edge = -1
        self.gov_frac = 1.0
        self.log = MissionLog(metadata=metadata or {})
        self.max_z = float(body.r[2])
        self._rate_caps = np.array([p.phi_rate_max, p.psi_rate_max, p.length_rate_max])
        self._crouch = np.array([[0.0, 0.0, config.mission.crouch_length]] * NUM_LEGS)
        self._stand = standing_legs(p)

    # ------------------------------------------------------------------
    # core stepping (shared by the governor probe and the real loop)

    def _advance_one(self, s: SimState, applied: np.ndarray,
                     thrusts: np.ndarray) -> SimState:
        rate = (applied.reshape(NUM_LEGS, 3) - s.legs) / self.dt
        rate = np.clip(rate, -self._rate_caps, self._rate_caps)
        legs = s.legs + rate * self.dt
        body, contact, contact_power, _ = _step_core(
            s.body, s.contact, legs, rate, thrusts, self.dt, self.env, self.params)
        e_leg = s.e_leg + (contact_power + self.params.idle_power) * self.dt
        e_air = s.e_air + thrust_power(thrusts, self.params) * self.dt
        return SimState(s.t + self.dt, body, contact, legs, e_leg, e_air)

    def _record(self, thrusts, stance) -> None:
        s = self.state
        self.log.append(s.t, s.body, s.legs, thrusts, s.contact, stance,
                        self.phase, self.edge, self.gov_frac, s.e_leg, s.e_air)
        self.max_z = max(self.max_z, float(s.body.r[2]))

    def _probe(self, stance_fn):
        """Forces for the governor check: stance-foot GRFs over the horizon,
        rolled out with the exact stepping routine on a copy of the state."""
        zero = np.zeros(NUM_LEGS)

        def probe(candidate: np.ndarray) -> np.ndarray:
            s = self.state.copy()
            out = []
            for _ in range(self.gov.horizon):
                s = self._advance_one(s, candidate, zero)
                stance = stance_fn(s.t)
                for i in range(NUM_LEGS):
                    if stance[i]:
                        out.append(s.contact.grf[i])
            return np.array(out) if out else np.zeros((0, 3))

        return probe

    def ground_control_step(self, foot_targets: np.ndarray, stance: np.ndarray,
                            ref_body: BodyState, stance_fn) -> None:
        """One governor update followed by control_every dynamics steps."""
        target_ref = ik_all(ref_body, foot_targets, self.params, clamp=True).reshape(-1)
        g = self.cfg.governor
        use_probe = g.enabled and g.horizon > 0 and bool(stance.any())
        probe = self._probe(stance_fn) if use_probe else None
        self.gov, frac = governor_update(self.gov, target_ref, probe, g.mu)
        self.gov_frac = frac
        zero = np.zeros(NUM_LEGS)
        for _ in range(self.cfg.mission.control_every):
            self.state = self._advance_one(self.state, self.gov.applied_ref, zero)
            self._record(zero, stance)

    def flight_control_step(self, r_des, v_des, leg_refs: np.ndarray,
                            thrust_scale: float = 1.0) -> None:
        applied = leg_refs.reshape(-1)
        self.gov = replace(self.gov, applied_ref=applied.copy())
        self.gov_frac = 1.0
        stance = np.zeros(NUM_LEGS, dtype=bool)
        for _ in range(self.cfg.mission.control_every):
            thrusts = flight_command(r_des, v_des, self.state.body,
                                     self.cfg.flight, self.params)
            if thrust_scale < 1.0:
                thrusts = thrusts * thrust_scale
            self.state = self._advance_one(self.state, applied, thrusts)
            self._record(thrusts, stance)

    # ------------------------------------------------------------------
    # phase helpers

    def _ref_body(self, shift_xy=(0.0, 0.0)) -> BodyState:
        x = self.ref_xy[0] + shift_xy[0]
        y = self.ref_xy[1] + shift_xy[1]
        z = self.env.ground_height_or_base(x, y) + self.params.stand_height
        return BodyState(r=np.array([x, y, z]), q=quat_identity())

    def _fallen(self) -> bool:
        body = self.state.body
        ground = self.env.ground_height_or_base(body.r[0], body.r[1])
        if body.r[2] - ground < self.cfg.mission.fall_height_frac * self.params.stand_height:
            return True
        roll, pitch, _ = quat_to_rpy(body.q)
        tilt = self.cfg.mission.fall_tilt
        return abs(roll) > tilt or abs(pitch) > tilt

    def stand_settle(self, duration: float) -> None:
        self.phase = "stand"
        foot = GaitFootControl(GaitSchedule(freq=0.0, duty=0.5), self.params,
                               self.env, self.ref_xy, 0.0)
        stance_all = lambda _t: np.ones(NUM_LEGS, dtype=bool)
        t_end = self.state.t + duration
        while self.state.t < t_end - 0.5 * self.dt:
            targets, stance = foot.targets(0.0, self.ref_xy, (1.0, 0.0), (0.0, 0.0),
                                           self.state.body)
            self.ground_control_step(targets, stance, self._ref_body(), stance_all)

    def timeout_check(self, t_start: float, what: str) -> None:
        if self.state.t - t_start > self.cfg.mission.edge_timeout:
            self.log.metadata.update({"completed": False, "abort": what})
            raise MissionAbort(f"timeout during {what}", self.log)


# ----------------------------------------------------------------------
# standalone experiments


def trot_in_place(duration: float, sched: GaitSchedule, config: RobotConfig | None = None,
                  env: Environment | None = None, *, com_shift: bool | None = None,
                  init_z_offset: float = 0.01, settle: float = 0.4) -> MissionLog:
    """Run the in-place trotting experiment and return its log.

    The torso starts with a small vertical offset so the transient into the
    gait limit cycle is visible. A fall (torso below half stand height or
    tilt beyond the config limit) truncates the log and sets metadata
    fall = True.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    config = config or RobotConfig()
    env = env or flat_environment()
    use_shift = config.mission.com_shift if com_shift is None else com_shift
    if sched.duty <= 0.5:
        use_shift = False

    runner = MissionRunner(env, config, metadata={"experiment": "trot_in_place",
                                                  "freq": sched.freq, "duty": sched.duty,
                                                  "com_shift": use_shift})
    runner.state.body.r[2] += init_z_offset
    runner.stand_settle(settle)
    gait_t0 = runner.state.t
    runner.log.metadata["gait_t0"] = gait_t0
    runner.phase = "walk" if sched.freq > 0 else "stand"

    foot = GaitFootControl(sched, runner.params, env, runner.ref_xy,
                           config.mission.raibert_gain, config.mission.tilt_gain)
    stance_fn = lambda t: gait_phase(max(0.0, t - gait_t0), sched)[1]
    heading = (1.0, 0.0)
    t_end = gait_t0 + duration
    while runner.state.t < t_end - 0.5 * runner.dt:
        tg = runner.state.t - gait_t0
        targets, stance = foot.targets(tg, runner.ref_xy, heading, (0.0, 0.0),
                                       runner.state.body)
        shift = (crawl_com_shift(tg, sched, runner.params, config.mission.com_shift_lead)
                 if use_shift else (0.0, 0.0))
        runner.ground_control_step(targets, stance, runner._ref_body(shift), stance_fn)
        if runner._fallen():
            runner.log.metadata["fall"] = True
            break
    runner.log.metadata.setdefault("fall", False)
    return runner.log


def lean_maneuver(duration: float, amplitude: float, freq_hz: float,
                  config: RobotConfig | None = None, env: Environment | None = None,
                  *, ramp: float = 0.4) -> MissionLog:
    """Standing lateral sway: the torso reference oscillates sideways while
    all four feet hold their anchors. Aggressive settings demand tangential
    forces beyond the friction pyramid, which is what the governor must
    prevent. The sway envelope ramps in over `ramp` seconds."""
    config = config or RobotConfig()
    env = env or flat_environment()
    runner = MissionRunner(env, config, metadata={"experiment": "lean_maneuver",
                                                  "amplitude": amplitude,
                                                  "freq": freq_hz,
                                                  "governor": config.governor.enabled})
    runner.stand_settle(0.3)
    t0 = runner.state.t
    foot = GaitFootControl(GaitSchedule(freq=0.0, duty=0.5), runner.params, env,
                           runner.ref_xy, 0.0)
    stance_all = lambda _t: np.ones(NUM_LEGS, dtype=bool)
    omega = 2.0 * math.pi * freq_hz
    t_end = t0 + duration
    while runner.state.t < t_end - 0.5 * runner.dt:
        tl = runner.state.t - t0
        envelope = min(1.0, tl / ramp)
        sway = amplitude * envelope * math.sin(omega * tl)
        targets, stance = foot.targets(0.0, runner.ref_xy, (1.0, 0.0), (0.0, 0.0),
                                       runner.state.body)
        runner.ground_control_step(targets, stance, runner._ref_body((0.0, sway)),
                                   stance_all)
    return runner.log


# ----------------------------------------------------------------------
# plan execution


def follow_plan(plan: Plan, env: Environment, config: RobotConfig | None = None) -> MissionLog:
    """Execute a plan end to end. Raises MissionAbort (carrying the partial
    log) when an edge cannot be completed within the per-edge timeout."""
    config = config or RobotConfig()
    if len(plan.node_ids) == 0:
        raise ValueError("plan is empty")
    if plan.modes[0] is not Mode.LEGGED:
        raise ValueError("plan must start in the robot's current mode (legged)")

    start = plan.positions[0]
    runner = MissionRunner(env, config, start_xy=start[:2],
                           metadata={"experiment": "follow_plan",
                                     "total_cost": plan.total_cost,
                                     "transitions": plan.num_transitions})
    runner.stand_settle(0.4)

    k = 0
    n_edges = len(plan.edge_modes)
    while k < n_edges:
        mode = plan.edge_modes[k]
        if mode is Mode.LEGGED:
            waypoints = []
            while k < n_edges and plan.edge_modes[k] is Mode.LEGGED:
                waypoints.append((k, plan.positions[k + 1]))
                k += 1
            _walk_segment(runner, waypoints)
        elif mode is Mode.TRANSITION and plan.modes[k + 1] is Mode.AERIAL:
            runner.edge = k
            _takeoff(runner, plan.positions[k + 1])
            k += 1
        elif mode is Mode.AERIAL:
            waypoints = []
            while k < n_edges and plan.edge_modes[k] is Mode.AERIAL:
                waypoints.append((k, plan.positions[k + 1]))
                k += 1
            _cruise_segment(runner, waypoints)
        else:
            runner.edge = k
            _land(runner, plan.positions[k + 1])
            k += 1

    runner.edge = -1
    runner.stand_settle(0.4)
    goal = np.array(plan.positions[-1])
    err = float(np.linalg.norm(runner.state.body.r - goal))
    runner.log.metadata.update({
        "completed": True, "final_error": err, "max_z": runner.max_z, "fall": False,
    })
    return runner.log


def _walk_segment(runner: MissionRunner, waypoints: list[tuple[int, tuple]]) -> None:
    """Trot along consecutive legged waypoints with one continuous gait."""
    runner.phase = "walk"
    cfg = runner.cfg.mission
    sched = replace(runner.cfg.gait, stride=cfg.walk_speed / runner.cfg.gait.freq)
    gait_t0 = runner.state.t
    foot = GaitFootControl(sched, runner.params, runner.env, runner.ref_xy,
                           cfg.raibert_gain, cfg.tilt_gain)
    stance_fn = lambda t: gait_phase(max(0.0, t - gait_t0), sched)[1]
    dt_ctl = runner.dt * cfg.control_every

    for idx, (edge, target) in enumerate(waypoints):
        runner.edge = edge
        t_start = runner.state.t
        target_xy = np.array(target[:2])
        last = idx == len(waypoints) - 1
        heading = np.array([1.0, 0.0])
        while True:
            rem = target_xy - runner.ref_xy
            dist = float(np.linalg.norm(rem))
            if dist < 1e-9:
                if not last:
                    break
                body_err = float(np.linalg.norm(runner.state.body.r[:2] - target_xy))
                if body_err < 0.05:
                    break
            if dist > 1e-9:
                heading = rem / dist
            advance = min(cfg.walk_speed * dt_ctl, dist)
            v_ref = heading * (advance / dt_ctl)
            runner.ref_xy = runner.ref_xy + heading * advance
            tg = runner.state.t - gait_t0
            targets, stance = foot.targets(tg, runner.ref_xy, heading, v_ref,
                                           runner.state.body)
            runner.ground_control_step(targets, stance, runner._ref_body(), stance_fn)
            if runner._fallen():
                runner.log.metadata.update({"completed": False, "abort": "fall",
                                            "fall": True})
                raise MissionAbort("fall while walking", runner.log)
            runner.timeout_check(t_start, "walk edge")


def _takeoff(runner: MissionRunner, target) -> None:
    cfg = runner.cfg.mission
    t_start = runner.state.t
    runner.phase = "prepare_takeoff"
    hold = runner.state.body.r.copy()
    # thrust ramps in while the legs still carry the robot
    while runner.state.t - t_start < cfg.takeoff_ramp:
        scale = (runner.state.t - t_start) / cfg.takeoff_ramp
        runner.flight_control_step(hold, np.zeros(3), runner._stand, thrust_scale=scale)
    # full authority; tuck the legs and let the thrusters take over
    while runner.state.contact.in_contact.any() or \
            float(np.max(np.abs(runner.state.legs[:, 2] - cfg.crouch_length))) > 0.02:
        runner.flight_control_step(hold + np.array([0.0, 0.0, 0.05]), np.zeros(3),
                                   runner._crouch)
        runner.timeout_check(t_start, "prepare_takeoff")

    runner.phase = "ascend"
    t_start = runner.state.t
    target = np.array(target)
    z_ref = float(runner.state.body.r[2])
    dt_ctl = runner.dt * cfg.control_every
    while True:
        z_err = target[2] - z_ref
        dz = math.copysign(min(abs(z_err), cfg.ascend_speed * dt_ctl), z_err)
        z_ref += dz
        r_des = np.array([target[0], target[1], z_ref])
        v_des = np.array([0.0, 0.0, dz / dt_ctl])
        runner.flight_control_step(r_des, v_des, runner._crouch)
        if abs(z_ref - target[2]) < 1e-9 and \
                float(np.linalg.norm(runner.state.body.r - target)) < cfg.waypoint_tol:
            break
        runner.timeout_check(t_start, "ascend")
    runner.cruise_ref = target.copy()


def _cruise_segment(runner: MissionRunner, waypoints: list[tuple[int, tuple]]) -> None:
    runner.phase = "cruise"
    cfg = runner.cfg.mission
    ref = runner.cruise_ref if runner.cruise_ref is not None else runner.state.body.r.copy()
    dt_ctl = runner.dt * cfg.control_every
    for idx, (edge, target) in enumerate(waypoints):
        runner.edge = edge
        t_start = runner.state.t
        target = np.array(target)
        last = idx == len(waypoints) - 1
        while True:
            rem = target - ref
            dist = float(np.linalg.norm(rem))
            if dist < 1e-9:
                body_err = float(np.linalg.norm(runner.state.body.r - target))
                tol = cfg.final_tol if last else cfg.waypoint_tol
                speed_ok = (not last) or float(np.linalg.norm(runner.state.body.v)) < 0.3
                if body_err < tol and speed_ok:
                    break
            direction = rem / dist if dist > 1e-9 else np.zeros(3)
            adv = min(cfg.cruise_speed * dt_ctl, dist)
            ref = ref + direction * adv
            runner.flight_control_step(ref, direction * (adv / dt_ctl), runner._crouch)
            runner.timeout_check(t_start, "cruise edge")
    runner.cruise_ref = ref


def _land(runner: MissionRunner, target) -> None:
    cfg = runner.cfg.mission
    p = runner.params
    runner.phase = "descend"
    t_start = runner.state.t
    target = np.array(target)
    ground = runner.env.ground_height_or_base(target[0], target[1])
    z_probe = ground + p.stand_height - 0.02
    z_ref = float(runner.state.body.r[2])
    dt_ctl = runner.dt * cfg.control_every
    # drop toward the probe altitude with the legs re-extended for touchdown
    while z_ref > z_probe + 1e-9:
        z_ref = max(z_probe, z_ref - cfg.descend_speed * dt_ctl)
        runner.flight_control_step(np.array([target[0], target[1], z_ref]),
                                   np.array([0.0, 0.0, -cfg.descend_speed]),
                                   runner._stand)
        runner.timeout_check(t_start, "descend")

    runner.phase = "touchdown_detect"
    t_start = runner.state.t
    quiet = 0.0
    z_final = ground + p.stand_height - p.weight / (4 * p.contact_stiffness) - 0.01
    while quiet < cfg.touchdown_dwell:
        z_ref = max(z_final, z_ref - 0.05 * dt_ctl)
        runner.flight_control_step(np.array([target[0], target[1], z_ref]),
                                   np.zeros(3), runner._stand)
        if runner.state.contact.in_contact.all() and \
                float(np.linalg.norm(runner.state.body.v)) < cfg.touchdown_speed_tol:
            quiet += dt_ctl
        else:
            quiet = 0.0
        runner.timeout_check(t_start, "touchdown_detect")

    runner.ref_xy = np.array([target[0], target[1]])
    runner.cruise_ref = None
    runner.stand_settle(0.3)


# ----------------------------------------------------------------------
# analysis


@dataclass
class PoincareResult:
    distances: np.ndarray
    converged: bool
    k_converged: int | None
    threshold: float


def limit_cycle_metric(log: MissionLog, sched: GaitSchedule,
                       weights=(1.0, 1.0, 0.1, 0.05)) -> PoincareResult:
    """Once-per-cycle Poincare distances of (pose, rates) at gait phase zero.

    Convergence is declared at the smallest K with d_k below 5 percent of the
    first distance for every k >= K. Requires at least 10 full cycles."""
    if sched.freq <= 0:
        raise ValueError("schedule must have freq > 0")
    t = log.t
    t0 = float(log.metadata.get("gait_t0", t[0]))
    T = 1.0 / sched.freq
    n_cycles = int(math.floor((t[-1] - t0) / T + 1e-9))
    if n_cycles < 10:
        raise ValueError(f"log spans {n_cycles} cycles, need >= 10")
    states = log.body_states()
    w_pos, w_ang, w_vel, w_rate = weights

    samples = []
    for k in range(n_cycles + 1):
        idx = int(np.searchsorted(t, t0 + k * T - 1e-12))
        idx = min(idx, len(t) - 1)
        row = states[idx]
        r, q, v, w = row[0:3], row[3:7], row[7:10], row[10:13]
        rpy = quat_to_rpy(q)
        samples.append(np.concatenate([w_pos * r, w_ang * rpy, w_vel * v, w_rate * w]))
    x = np.array(samples)
    d = np.linalg.norm(np.diff(x, axis=0), axis=1)

    if d[0] < 1e-12:
        return PoincareResult(d, True, 1, 0.0)
    thr = 0.05 * d[0]
    k_conv = None
    for k in range(1, len(d) + 1):
        if np.all(d[k - 1:] < thr):
            k_conv = k
            break
    return PoincareResult(d, k_conv is not None, k_conv, thr)


def stability_margin_trace(log: MissionLog, params: RobotParams) -> np.ndarray:
    """Signed support-polygon margin per log row (NaN with no stance feet)."""
    states = log.body_states()
    joints = log.joints()
    stance = log.stance_flags()
    out = np.full(len(log), np.nan)
    for k in range(len(log)):
        if not stance[k].any():
            continue
        body = BodyState(r=states[k, 0:3], q=states[k, 3:7])
        feet = feet_positions(body, joints[k], params)
        pts = feet[stance[k], :2]
        out[k] = stability_margin(states[k, 0:2], support_polygon(pts))
    return out


# ----------------------------------------------------------------------
# discretization comparison


@dataclass
class CompareEntry:
    method: str
    parameter: float
    build_s: float
    n_nodes: int
    n_edges: int
    no_path: bool
    plan_cost: float | None
    astar_expanded: int | None
    dijkstra_expanded: int | None


@dataclass
class CompareReport:
    start: tuple[float, float, float]
    goal: tuple[float, float, float]
    entries: list[CompareEntry] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def compare_discretizations(env: Environment, config: RobotConfig, start, goal, *,
                            spacings=(1.0, 0.5), seeds=(0, 1, 2, 3, 4),
                            prm_samples: int = 400, prm_radius: float = 1.2,
                            modes: set[Mode] | None = None) -> CompareReport:
    """Build uniform and roadmap graphs over the same scene, plan the same
    query on each and tabulate costs, sizes and search effort. No-path
    outcomes are recorded rather than raised."""
    cost = config.cost
    stand = config.robot.stand_height
    report = CompareReport(start=tuple(float(c) for c in start),
                           goal=tuple(float(c) for c in goal))

    def run(graph: ModalGraph, method: str, parameter: float, build_s: float) -> None:
        if modes is not None:
            graph = subgraph_by_mode(graph, modes, cost)
        entry = CompareEntry(method=method, parameter=parameter, build_s=build_s,
                             n_nodes=len(graph.nodes), n_edges=len(graph.edges),
                             no_path=True, plan_cost=None,
                             astar_expanded=None, dijkstra_expanded=None)
        try:
            s = nearest_node(graph, report.start, Mode.LEGGED)
            g = nearest_node(graph, report.goal, Mode.LEGGED)
        except Exception:
            report.entries.append(entry)
            return
        pd = dijkstra(graph, s, g)
        pa = astar(graph, s, g, cost)
        if pd is not None and pa is not None:
            entry.no_path = False
            entry.plan_cost = pd.total_cost
            entry.dijkstra_expanded = pd.expanded
            entry.astar_expanded = pa.expanded
        report.entries.append(entry)

    for spacing in spacings:
        tic = time.perf_counter()
        graph = discretize_uniform(env, spacing, cost, stand_height=stand)
        run(graph, "uniform", float(spacing), time.perf_counter() - tic)
    for seed in seeds:
        tic = time.perf_counter()
        graph = discretize_mmprm(env, prm_samples, prm_radius, int(seed), cost,
                                 stand_height=stand)
        run(graph, "mmprm", float(seed), time.perf_counter() - tic)

    for method in ("uniform", "mmprm"):
        costs = [e.plan_cost for e in report.entries if e.method == method and not e.no_path]
        report.summary[method] = {
            "runs": sum(1 for e in report.entries if e.method == method),
            "solved": len(costs),
            "cost_mean": float(np.mean(costs)) if costs else None,
            "cost_min": float(np.min(costs)) if costs else None,
        }
    return report


def report_to_dict(report: CompareReport) -> dict:
    return {
        "start": list(report.start),
        "goal": list(report.goal),
        "entries": [vars(e).copy() for e in report.entries],
        "summary": report.summary,
    }


def report_from_dict(d: dict) -> CompareReport:
    report = CompareReport(start=tuple(d["start"]), goal=tuple(d["goal"]),
                           summary=d.get("summary", {}))
    for e in d["entries"]:
        report.entries.append(CompareEntry(**e))
    return report


_CSV_COLS = ("method", "parameter", "build_s", "n_nodes", "n_edges", "no_path",
             "plan_cost", "astar_expanded", "dijkstra_expanded")


def report_to_csv_lines(report: CompareReport) -> list[str]:
    def cell(v) -> str:
        if v is None:
            return ""
        if isinstance(v, str):
            return v
        return repr(v)

    lines = [",".join(_CSV_COLS)]
    for e in report.entries:
        lines.append(",".join(cell(getattr(e, c)) for c in _CSV_COLS))
    return lines


# ----------------------------------------------------------------------
# cost calibration


def calibrate_cost_model(config: RobotConfig | None = None, *,
                         hover_s: float = 2.0, stand_s: float = 2.0,
                         walk_dist: float = 1.0, cruise_dist: float = 1.5) -> CostModel:
    """Measure the per-mode energy coefficients from short simulations:
    hover and stand give the holding powers, walking and cruising give the
    per-meter surcharges. Deterministic, so repeated runs agree exactly."""
    config = config or RobotConfig()
    env = flat_environment()

    def meter_span(log: MissionLog, t_lo: float) -> tuple[float, float, float]:
        t = log.t
        sel = t >= t_lo
        e_leg = log.column("e_leg")[sel]
        e_air = log.column("e_air")[sel]
        return (float(e_leg[-1] - e_leg[0]), float(e_air[-1] - e_air[0]),
                float(t[sel][-1] - t[sel][0]))

    stand_log = trot_in_place(stand_s, GaitSchedule(freq=0.0, duty=0.5),
                              config, env, init_z_offset=0.0, settle=0.3)
    e_leg, _, span = meter_span(stand_log, 0.5)
    p_leg = e_leg / span

    hover_log = _hover_log(config, env, duration=hover_s)
    _, e_air, span = meter_span(hover_log, float(hover_log.t[0]) + 0.5)
    p_air = e_air / span

    walk_log = _walk_line_log(config, env, walk_dist)
    e_leg, _, span = meter_span(walk_log, float(walk_log.metadata["gait_t0"]))
    c_leg = max(0.0, (e_leg - p_leg * span) / walk_dist)

    cruise_log = _cruise_line_log(config, env, cruise_dist)
    _, e_air, span = meter_span(cruise_log, float(cruise_log.t[0]))
    c_air = max(0.0, (e_air - p_air * span) / cruise_dist)

    base = config.cost
    return CostModel(c_leg=c_leg, c_air=c_air, p_leg=p_leg, p_air=p_air,
                     e_trans=base.e_trans, v_leg=base.v_leg, v_air=base.v_air)


def _hover_log(config: RobotConfig, env: Environment, duration: float) -> MissionLog:
    runner = MissionRunner(env, config, metadata={"experiment": "hover"})
    runner.phase = "cruise"
    runner.state.body.r[2] += 1.0  # start airborne
    hold = runner.state.body.r.copy()
    t_end = runner.state.t + duration
    while runner.state.t < t_end - 0.5 * runner.dt:
        runner.flight_control_step(hold, np.zeros(3), runner._crouch)
    return runner.log


def _walk_line_log(config: RobotConfig, env: Environment, dist: float) -> MissionLog:
    runner = MissionRunner(env, config, metadata={"experiment": "walk_line"})
    runner.stand_settle(0.4)
    runner.log.metadata["gait_t0"] = runner.state.t
    _walk_segment(runner, [(0, (dist, 0.0, runner.params.stand_height))])
    return runner.log


def _cruise_line_log(config: RobotConfig, env: Environment, dist: float) -> MissionLog:
    runner = MissionRunner(env, config, metadata={"experiment": "cruise_line"})
    runner.phase = "cruise"
    runner.state.body.r[2] += 1.0  # start airborne at cruise altitude
    target = runner.state.body.r + np.array([dist, 0.0, 0.0])
    _cruise_segment(runner, [(0, tuple(target))])
    return runner.log
