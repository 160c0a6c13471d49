import math

import numpy as np
import pytest

from quadair.geometry import quat_from_axis_angle, quat_normalize
from quadair.kinematics import (
    BodyState,
    JointLimitError,
    LegConfig,
    RobotParams,
    UnreachableTargetError,
    foot_position,
    feet_positions,
    feet_velocities,
    leg_ik,
    legs_to_array,
)


@pytest.fixture
def params():
    # hip 0 placed to match the worked examples
    return RobotParams(hip_offsets=((0.1, 0.08, 0.0),
                                    (0.1, -0.08, 0.0),
                                    (-0.1, 0.08, 0.0),
                                    (-0.1, -0.08, 0.0)))


def test_foot_straight_down(params):
    body = BodyState()
    foot = foot_position(body, LegConfig(0.0, 0.0, 0.3), 0, params)
    assert np.allclose(foot, (0.1, 0.08, -0.3), atol=1e-12)


def test_foot_swung_fully_forward(params):
    body = BodyState()
    foot = foot_position(body, LegConfig(0.0, math.pi / 2, 0.3), 0, params)
    assert np.allclose(foot, (0.4, 0.08, 0.0), atol=1e-12)


def test_foot_general_pose_frozen_oracle(params):
    # frozen from an independent rotation-matrix evaluation (scipy Rotation,
    # extrinsic pitch-then-roll chain applied to the straight-down vector)
    body = BodyState()
    foot = foot_position(body, LegConfig(0.1, 0.2, 0.25), 0, params)
    expected = (0.1496673326987653, 0.10446084875181394, -0.24379258180045402)
    assert np.allclose(foot, expected, atol=1e-12)


def test_foot_position_respects_body_pose(params):
    body = BodyState(r=np.array([1.0, 2.0, 0.5]),
                     q=quat_from_axis_angle((0, 0, 1), math.pi / 2))
    foot = foot_position(body, LegConfig(0.0, 0.0, 0.3), 0, params)
    # hip (0.1, 0.08) rotates 90 deg about z to (-0.08, 0.1)
    assert np.allclose(foot, (1.0 - 0.08, 2.0 + 0.1, 0.5 - 0.3), atol=1e-12)


def test_foot_position_joint_limits(params):
    body = BodyState()
    with pytest.raises(JointLimitError, match="psi"):
        foot_position(body, LegConfig(0.0, 2.0, 0.3), 0, params)
    with pytest.raises(JointLimitError, match="phi"):
        foot_position(body, LegConfig(1.5, 0.0, 0.3), 0, params)
    with pytest.raises(JointLimitError, match="length"):
        foot_position(body, LegConfig(0.0, 0.0, 0.5), 0, params)


def test_ik_round_trip_examples(params):
    body = BodyState()
    for cfg in (LegConfig(0.0, 0.0, 0.3),
                LegConfig(0.0, math.pi / 2 - 0.4, 0.3),
                LegConfig(0.1, 0.2, 0.25)):
        foot = foot_position(body, cfg, 0, params)
        back = leg_ik(body, foot, 0, params)
        assert abs(back.phi - cfg.phi) < 1e-12
        assert abs(back.psi - cfg.psi) < 1e-12
        assert abs(back.length - cfg.length) < 1e-12
        again = foot_position(body, back, 0, params)
        assert np.linalg.norm(again - foot) < 1e-9


def test_ik_unreachable_too_far(params):
    body = BodyState()
    target = np.array([0.1, 0.08, -(params.leg_max + 0.1)])
    with pytest.raises(UnreachableTargetError) as ei:
        leg_ik(body, target, 0, params)
    assert ei.value.distance == pytest.approx(0.1, abs=1e-9)


def test_ik_round_trip_random(params):
    rng = np.random.default_rng(42)
    body = BodyState(r=np.array([0.3, -0.2, 0.6]),
                     q=quat_normalize(rng.normal(size=4)))
    checked = 0
    for _ in range(1000):
        cfg = LegConfig(phi=rng.uniform(-params.phi_max, params.phi_max),
                        psi=rng.uniform(-params.psi_max, params.psi_max),
                        length=rng.uniform(params.leg_min, params.leg_max))
        i = int(rng.integers(0, 4))
        foot = foot_position(body, cfg, i, params)
        back = leg_ik(body, foot, i, params)
        again = foot_position(body, back, i, params)
        assert np.linalg.norm(again - foot) < 1e-9
        checked += 1
    assert checked == 1000


def test_feet_velocities_match_finite_difference(params):
    rng = np.random.default_rng(3)
    body = BodyState(r=np.array([0.1, 0.2, 0.4]),
                     q=quat_normalize(rng.normal(size=4)),
                     v=np.array([0.3, -0.1, 0.2]),
                     w=np.array([0.2, 0.4, -0.3]))
    legs = legs_to_array([LegConfig(0.1, 0.2, 0.3), LegConfig(-0.2, 0.1, 0.25),
                          LegConfig(0.0, -0.3, 0.2), LegConfig(0.3, 0.0, 0.32)])
    rates = rng.normal(scale=0.5, size=(4, 3))
    v = feet_velocities(body, legs, rates, params)

    # independent finite-difference check on the full kinematic chain
    from quadair.geometry import quat_integrate

    h = 1e-7
    body2 = BodyState(r=body.r + h * body.v, q=quat_integrate(body.q, body.w, h),
                      v=body.v, w=body.w)
    p1 = feet_positions(body, legs, params)
    p2 = feet_positions(body2, legs + h * rates, params)
    fd = (p2 - p1) / h
    assert np.allclose(v, fd, atol=1e-5)
