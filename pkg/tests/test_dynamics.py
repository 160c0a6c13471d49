import math

import numpy as np
import pytest

from quadair.dynamics import (
    GRAVITY,
    ModeEnergy,
    contact_forces,
    mechanical_energy,
    meter_power,
    step,
    thrust_power,
)
from quadair.environment import Box, Environment
from quadair.kinematics import (
    BodyState,
    ContactState,
    RobotParams,
    feet_positions,
    feet_velocities,
    standing_legs,
)

FLAT = Environment(ground_z=0.0, bounds=Box((-50, -50, -5), (50, 50, 50)))


def airborne_body(z=5.0):
    return BodyState(r=np.array([0.0, 0.0, z]))


def test_contact_force_hooke(tmp_path=None):
    params = RobotParams(contact_stiffness=20000.0, contact_damping=0.0)
    # place the body so feet penetrate exactly 1 mm
    body = BodyState(r=np.array([0.0, 0.0, params.stand_height - 0.001]))
    legs = standing_legs(params)
    contact = contact_forces(body, legs, np.zeros((4, 3)), ContactState(), FLAT, params)
    assert np.allclose(contact.grf[:, 2], 20.0, atol=1e-9)
    assert np.allclose(contact.grf[:, :2], 0.0, atol=1e-12)
    assert contact.in_contact.all()


def test_contact_force_airborne_zero():
    params = RobotParams()
    body = airborne_body()
    contact = contact_forces(body, standing_legs(params), np.zeros((4, 3)),
                             ContactState(), FLAT, params)
    assert not contact.in_contact.any()
    assert np.all(contact.grf == 0.0)
    assert np.all(np.isnan(contact.anchor))


def test_contact_tangential_clamp_and_anchor_reset():
    params = RobotParams(contact_stiffness=20000.0, contact_damping=0.0, mu=0.5)
    body = BodyState(r=np.array([0.0, 0.0, params.stand_height - 0.001]))
    legs = standing_legs(params)
    # start in contact to establish anchors
    c0 = contact_forces(body, legs, np.zeros((4, 3)), ContactState(), FLAT, params)
    # shift the body so the tangential spring demand is 2 * mu * Fz
    fz = c0.grf[0, 2]
    demand_over = 2.0 * params.mu * fz
    dx = demand_over / params.contact_stiffness
    body2 = BodyState(r=body.r + np.array([dx, 0.0, 0.0]))
    c1 = contact_forces(body2, legs, np.zeros((4, 3)), c0, FLAT, params)
    assert np.allclose(np.abs(c1.grf[:, 0]), params.mu * c1.grf[:, 2], atol=1e-9)
    # anchor snapped to the new foot position
    feet = feet_positions(body2, legs, params)
    assert np.allclose(c1.anchor, feet[:, :2], atol=1e-12)


def test_step_hover_force_balance():
    params = RobotParams()
    body = airborne_body()
    hover = params.weight / 4.0
    new_body, _ = step(body, ContactState(), standing_legs(params), np.zeros((4, 3)),
                       np.full(4, hover), 0.001, FLAT, params)
    assert np.allclose(new_body.v, 0.0, atol=1e-12)
    assert np.allclose(new_body.w, 0.0, atol=1e-12)


def test_step_free_fall():
    params = RobotParams()
    body = airborne_body()
    new_body, _ = step(body, ContactState(), standing_legs(params), np.zeros((4, 3)),
                       np.zeros(4), 0.001, FLAT, params)
    assert new_body.v[2] == pytest.approx(-0.00981, abs=1e-12)


def test_step_rejects_bad_inputs():
    params = RobotParams()
    with pytest.raises(ValueError):
        step(airborne_body(), ContactState(), standing_legs(params), np.zeros((4, 3)),
             np.zeros(4), -0.001, FLAT, params)
    with pytest.raises(ValueError):
        step(airborne_body(), ContactState(), standing_legs(params), np.zeros((4, 3)),
             np.full(4, 100.0), 0.001, FLAT, params)


def settle_standing(params, duration=2.0, dt=0.001):
    settle = params.weight / (4 * params.contact_stiffness)
    body = BodyState(r=np.array([0.0, 0.0, params.stand_height - settle + 0.002]))
    legs = standing_legs(params)
    contact = ContactState()
    for _ in range(int(duration / dt)):
        body, contact = step(body, contact, legs, np.zeros((4, 3)),
                             np.zeros(4), dt, FLAT, params)
    return body, contact


def test_standing_supports_weight():
    params = RobotParams()
    body, contact = settle_standing(params)
    total = float(contact.grf[:, 2].sum())
    assert total == pytest.approx(42.183, rel=0.01)
    assert abs(float(body.v[2])) < 1e-6


def test_quaternion_norm_preserved():
    params = RobotParams()
    body = BodyState(r=np.array([0.0, 0.0, 5.0]), w=np.array([1.0, -2.0, 0.5]))
    contact = ContactState()
    legs = standing_legs(params)
    for _ in range(1000):
        body, contact = step(body, contact, legs, np.zeros((4, 3)),
                             np.zeros(4), 0.001, FLAT, params)
        assert abs(np.linalg.norm(body.q) - 1.0) < 1e-9


def test_ballistic_energy_drift():
    # tumbling projectile: total mechanical energy drifts < 0.1% over 1 s
    params = RobotParams()
    body = BodyState(r=np.array([0.0, 0.0, 8.0]),
                     v=np.array([2.0, 1.0, 3.0]),
                     w=np.array([0.3, 0.2, 0.1]))
    e0 = mechanical_energy(body, params)
    contact = ContactState()
    legs = standing_legs(params)
    for _ in range(1000):
        body, contact = step(body, contact, legs, np.zeros((4, 3)),
                             np.zeros(4), 0.001, FLAT, params)
    e1 = mechanical_energy(body, params)
    assert abs(e1 - e0) / e0 < 0.001


def test_grf_respects_pyramid_by_construction():
    params = RobotParams(mu=0.7)
    rng = np.random.default_rng(5)
    body = BodyState(r=np.array([0.0, 0.0, params.stand_height - 0.003]),
                     v=np.array([0.4, -0.2, 0.0]))
    legs = standing_legs(params)
    contact = ContactState()
    for _ in range(500):
        rates = rng.normal(scale=0.3, size=(4, 3))
        legs2 = np.clip(legs + rates * 0.001,
                        [-params.phi_max, -params.psi_max, params.leg_min],
                        [params.phi_max, params.psi_max, params.leg_max])
        rates = (legs2 - legs) / 0.001
        legs = legs2
        body, contact = step(body, contact, legs, rates, np.zeros(4), 0.001, FLAT, params)
        fz = contact.grf[:, 2]
        assert np.all(fz >= 0.0)
        assert np.all(np.abs(contact.grf[:, 0]) <= params.mu * fz + 1e-12)
        assert np.all(np.abs(contact.grf[:, 1]) <= params.mu * fz + 1e-12)


def test_step_deterministic():
    params = RobotParams()

    def run():
        body = BodyState(r=np.array([0.0, 0.0, params.stand_height - 0.001]),
                         v=np.array([0.1, 0.0, 0.0]))
        contact = ContactState()
        legs = standing_legs(params)
        for _ in range(300):
            body, contact = step(body, contact, legs, np.zeros((4, 3)),
                                 np.zeros(4), 0.001, FLAT, params)
        return body

    a, b = run(), run()
    assert np.array_equal(a.r, b.r) and np.array_equal(a.q, b.q)
    assert np.array_equal(a.v, b.v) and np.array_equal(a.w, b.w)


def test_meter_power_static_stand_zero_idle():
    params = RobotParams(idle_power=0.0)
    n = 100
    grf = np.zeros((n, 4, 3))
    grf[:, :, 2] = 10.0
    vel = np.zeros((n, 4, 3))  # static feet do no work
    thrust = np.zeros((n, 4))
    e = meter_power(0.001, grf, vel, thrust, params)
    assert e.legged == 0.0 and e.aerial == 0.0


def test_meter_power_hover_closed_form():
    params = RobotParams()
    hover = params.weight / 4.0
    n = 1000
    thrust = np.full((n, 4), hover)
    e = meter_power(0.001, np.zeros((n, 4, 3)), np.zeros((n, 4, 3)), thrust, params)
    expected = 4 * params.thrust_power_coeff * (42.183 / 4) ** 1.5
    assert e.aerial == pytest.approx(expected, rel=1e-9)
    assert e.legged == pytest.approx(params.idle_power * 1.0, rel=1e-9)
