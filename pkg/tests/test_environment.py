import numpy as np
import pytest

from quadair.environment import (
    Box,
    Environment,
    OutsideWorkspaceError,
    environment_from_dict,
    environment_to_dict,
)


def make_env(obstacles=()):
    return Environment(ground_z=0.0,
                       bounds=Box((-5.0, -5.0, -1.0), (5.0, 5.0, 5.0)),
                       obstacles=tuple(obstacles))


def test_is_free_empty_env():
    env = make_env()
    assert env.is_free((0.0, 0.0, 1.0))


def test_is_free_below_ground():
    env = make_env()
    assert not env.is_free((0.0, 0.0, -0.1))
    assert not env.is_free((0.0, 0.0, 0.0))  # ground plane itself is occupied


def test_is_free_inside_obstacle():
    env = make_env([Box((-1.0, -1.0, 0.0), (1.0, 1.0, 2.0))])
    assert not env.is_free((0.0, 0.0, 1.0))
    assert not env.is_free((1.0, 0.0, 1.0))  # boundary counts as occupied
    assert env.is_free((1.5, 0.0, 1.0))


def test_is_free_out_of_bounds():
    env = make_env()
    assert not env.is_free((9.0, 0.0, 1.0))


def test_box_requires_ordered_corners():
    with pytest.raises(ValueError):
        Box((1.0, 0.0, 0.0), (0.0, 1.0, 1.0))


def test_obstacle_must_stay_in_bounds():
    with pytest.raises(ValueError):
        make_env([Box((4.0, 4.0, 0.0), (6.0, 6.0, 1.0))])


def test_ground_height_flat():
    env = make_env()
    assert env.ground_height(0.3, -2.2) == 0.0


def test_ground_height_on_step():
    step = Box((-1.0, -1.0, -1.0), (1.0, 1.0, 0.5))  # rests on (actually below) ground
    env = make_env([step])
    assert env.ground_height(0.0, 0.0) == 0.5
    assert env.ground_height(2.0, 0.0) == 0.0


def test_ground_height_ignores_floating_boxes():
    floater = Box((-1.0, -1.0, 1.0), (1.0, 1.0, 2.0))
    env = make_env([floater])
    assert env.ground_height(0.0, 0.0) == 0.0


def test_ground_height_outside_footprint():
    env = make_env()
    with pytest.raises(OutsideWorkspaceError):
        env.ground_height(20.0, 0.0)


def test_segment_free_empty_env():
    env = make_env()
    assert env.segment_free((-3.0, 0.0, 1.0), (3.0, 2.0, 2.0), 0.1)


def test_segment_through_obstacle():
    ob = Box((-0.5, -0.5, 0.0), (0.5, 0.5, 2.0))
    env = make_env([ob])
    assert not env.segment_free((-2.0, 0.0, 1.0), (2.0, 0.0, 1.0), 0.1)


def test_segment_degenerate_point():
    env = make_env()
    assert env.segment_free((0.0, 0.0, 1.0), (0.0, 0.0, 1.0), 0.5)
    assert not env.segment_free((0.0, 0.0, -0.5), (0.0, 0.0, -0.5), 0.5)


def test_segment_matches_is_free_on_degenerate():
    env = make_env([Box((-0.5, -0.5, 0.0), (0.5, 0.5, 2.0))])
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = tuple(rng.uniform(-4, 4, size=3))
        assert env.segment_free(p, p, 0.3) == env.is_free(p)


def test_segment_step_shrink_is_conservative():
    # a blocked segment must stay blocked as the step shrinks
    rng = np.random.default_rng(11)
    ob = Box((-0.3, -0.3, 0.5), (0.3, 0.3, 1.1))
    env = make_env([ob])
    steps = [1.7, 0.9, 0.45, 0.2, 0.11, 0.05]
    for _ in range(60):
        p0 = tuple(rng.uniform(-3, 3, size=3))
        p1 = tuple(rng.uniform(-3, 3, size=3))
        results = [env.segment_free(p0, p1, s) for s in steps]
        for coarse, fine in zip(results, results[1:]):
            if not coarse:
                assert not fine


def test_environment_dict_round_trip():
    env = make_env([Box((-1.0, -1.0, 0.0), (1.0, 1.0, 2.0))])
    again = environment_from_dict(environment_to_dict(env))
    assert again == env
