import numpy as np
import pytest

from quadair.governor import (
    GovernorProbeError,
    GovernorState,
    friction_pyramid_ok,
    governor_update,
    track_feet,
)
from quadair.kinematics import BodyState, RobotParams


def test_pyramid_basic():
    assert friction_pyramid_ok((5.0, 0.0, 10.0), 0.8)
    assert not friction_pyramid_ok((9.0, 0.0, 10.0), 0.8)
    assert not friction_pyramid_ok((0.0, 0.0, -1.0), 0.8)
    assert friction_pyramid_ok((0.0, 0.0, 0.0), 0.8)  # unloaded foot is fine
    assert not friction_pyramid_ok((0.0, 1e-6, 0.0), 0.8)


def make_gov(applied=0.0, kappa=0.3, horizon=5):
    return GovernorState(applied_ref=np.full(12, float(applied)),
                        kappa=kappa, horizon=horizon)


def always_ok(_ref):
    return np.array([[0.0, 0.0, 10.0]])


def test_fixed_point_target_equals_applied():
    gov = make_gov(0.25)
    target = np.full(12, 0.25)
    gov2, frac = governor_update(gov, target, always_ok, 0.6)
    assert np.array_equal(gov2.applied_ref, gov.applied_ref)
    assert frac == 1.0


def test_feasible_jump_with_unit_gain():
    gov = make_gov(0.0, kappa=1.0)
    target = np.linspace(0.0, 1.0, 12)
    gov2, frac = governor_update(gov, target, always_ok, 0.6)
    assert np.array_equal(gov2.applied_ref, target)
    assert frac == 1.0


def test_horizon_zero_is_pass_through():
    gov = make_gov(0.0, kappa=1.0, horizon=0)

    def explode(_ref):
        raise AssertionError("probe must not be called with horizon 0")

    target = np.full(12, 0.7)
    gov2, frac = governor_update(gov, target, explode, 0.6)
    assert np.array_equal(gov2.applied_ref, target)


def test_bisection_matches_line_search_oracle():
    # synthetic probe: tangential demand grows linearly with the first joint;
    # the pyramid is violated beyond s* where 40 s = mu * 10
    mu = 0.6

    def probe(ref):
        s = ref[0]
        return np.array([[40.0 * s, 0.0, 10.0]])

    s_star = mu * 10.0 / 40.0  # 0.15
    gov = make_gov(0.0, kappa=1.0)
    target = np.ones(12)
    gov2, frac = governor_update(gov, target, probe, mu)

    # brute-force line search at 1e-4 resolution: largest feasible prefix
    fine = 0.0
    f = 0.0
    while f <= 1.0:
        if 40.0 * f <= mu * 10.0:
            fine = f
        else:
            break
        f += 1e-4
    assert abs(frac - fine) <= 2 ** -8 + 1e-9
    assert gov2.applied_ref[0] == pytest.approx(s_star, abs=2 ** -8)
    # governor never emits an infeasible reference
    assert 40.0 * gov2.applied_ref[0] <= mu * 10.0 + 1e-12


def test_bisection_zero_when_nothing_feasible():
    def probe(_ref):
        return np.array([[100.0, 0.0, 1.0]])

    gov = make_gov(0.5)
    gov2, frac = governor_update(gov, np.ones(12), probe, 0.6)
    assert frac == 0.0
    assert np.array_equal(gov2.applied_ref, gov.applied_ref)


def test_monotone_convergence_to_feasible_target():
    for kappa in (0.1, 0.3, 1.0):
        gov = make_gov(0.0, kappa=kappa)
        target = np.full(12, 0.4)
        err = np.linalg.norm(gov.applied_ref - target)
        for _ in range(200):
            gov, _ = governor_update(gov, target, always_ok, 0.6)
            e = np.linalg.norm(gov.applied_ref - target)
            assert e <= err + 1e-15
            err = e
            if err < 1e-6:
                break
        assert err < 1e-6


def test_probe_failure_raises_and_holds():
    def broken(_ref):
        raise RuntimeError("sensor offline")

    gov = make_gov(0.2)
    with pytest.raises(GovernorProbeError):
        governor_update(gov, np.ones(12), broken, 0.6)
    assert np.all(gov.applied_ref == 0.2)  # untouched


def test_track_feet_standing_pass_through():
    params = RobotParams()
    body = BodyState(r=np.array([0.0, 0.0, params.stand_height]))
    targets = np.array([[*params.hip_offsets[i][:2], 0.0] for i in range(4)])
    gov = GovernorState(applied_ref=np.zeros(12), kappa=1.0, horizon=0)
    gov2, applied, frac = track_feet(body, targets, gov, params, None, 0.6)
    legs = applied.reshape(4, 3)
    assert np.allclose(legs[:, 0], 0.0, atol=1e-12)
    assert np.allclose(legs[:, 1], 0.0, atol=1e-12)
    assert np.allclose(legs[:, 2], params.stand_height, atol=1e-12)
    assert frac == 1.0


def test_governor_state_validation():
    with pytest.raises(ValueError):
        GovernorState(applied_ref=np.zeros(12), kappa=0.0)
    with pytest.raises(ValueError):
        GovernorState(applied_ref=np.zeros(12), horizon=-1)
