import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivecone.dynamics import (MAX_HEADING_RATE, Action, ActionGrid, ConfigError, KinState, bicycle_step,
                                clamp_tilt, grid_actions, replay_step)

# values from the 50-digit evaluator in tests/oracles.py
STRAIGHT_TURN = (0.99490281863512400222, 0.10083839284660216882, 0.050419196423301084409, 10.0)
ACCEL_TURN = (1.994161142697243862, -1.8738859046412566192, 0.28864301958905802009, 5.2)
CLAMPED_TURN = (0.96465992585388915147, 0.26349805967325299387, 0.069813170079773182997, 10.0)


def _tuple(s):
    return (s.x, s.y, s.heading, s.speed)


def test_frozen_reference_steps():
    s = bicycle_step(KinState(0, 0, 0, 10), Action(0, 0.2), 0.1, 4.0)
    assert _tuple(s) == pytest.approx(STRAIGHT_TURN, rel=1e-12)
    s = bicycle_step(KinState(1.5, -2, 0.3, 5), Action(2, -0.1), 0.1, 4.5, max_heading_rate=MAX_HEADING_RATE)
    assert _tuple(s) == pytest.approx(ACCEL_TURN, rel=1e-12)
    s = bicycle_step(KinState(0, 0, 0, 10), Action(0, 0.5), 0.1, 4.0, max_heading_rate=MAX_HEADING_RATE)
    assert _tuple(s) == pytest.approx(CLAMPED_TURN, rel=1e-12)


def test_speed_saturates():
    s = bicycle_step(KinState(0, 0, 0, 99.9), Action(6, 0), 0.1, 4.0)
    assert s.speed == 100.0
    s = bicycle_step(KinState(0, 0, 0, -99.9), Action(-6, 0), 0.1, 4.0)
    assert s.speed == -100.0


def test_reversing_turns_the_other_way():
    fwd = bicycle_step(KinState(0, 0, 0, 5), Action(0, 0.3), 0.1, 4.0)
    back = bicycle_step(KinState(0, 0, 0, -5), Action(0, 0.3), 0.1, 4.0)
    assert fwd.heading > 0 > back.heading


def test_invalid_inputs():
    with pytest.raises(ValueError):
        bicycle_step(KinState(0, 0, 0, 1), Action(0, math.pi / 2), 0.1, 4.0)
    with pytest.raises(ValueError):
        bicycle_step(KinState(0, 0, 0, 1), Action(0, 0), 0.0, 4.0)


@given(st.floats(-50, 50), st.floats(-0.7, 0.7), st.floats(-6, 6), st.floats(-math.pi, math.pi))
def test_heading_rate_never_exceeds_limit(v, steer, a, h):
    s = bicycle_step(KinState(0, 0, h, v), Action(a, steer), 0.1, 4.5, max_heading_rate=MAX_HEADING_RATE)
    d = abs(math.remainder(s.heading - h, 2 * math.pi))
    assert d <= MAX_HEADING_RATE * 0.1 + 1e-12


@given(st.floats(0, 30), st.floats(-0.7, 0.7), st.floats(-math.pi, math.pi))
def test_displacement_matches_mid_step_speed(v, steer, h):
    s = bicycle_step(KinState(0, 0, h, v), Action(0, steer), 0.1, 4.5)
    assert math.hypot(s.x, s.y) == pytest.approx(v * 0.1, abs=1e-12)


def test_action_grid_layout():
    g = ActionGrid()
    assert len(g) == 6 * 21 * 5
    assert g.action(0) == Action(-3.0, -0.7, -1.6)
    assert g.action(len(g) - 1) == Action(2.0, 0.7, 1.6)
    assert grid_actions(g)[37] == g.action(37)
    with pytest.raises(IndexError):
        g.action(len(g))


def test_action_grid_validation():
    with pytest.raises(ConfigError):
        ActionGrid(accel_range=(-7, 2))
    with pytest.raises(ConfigError):
        ActionGrid(steer_range=(-1.6, 1.6))
    with pytest.raises(ConfigError):
        ActionGrid(tilt_bins=1)


def test_tilt_clamped_to_quarter_turn():
    assert clamp_tilt(1.6) == math.pi / 2
    assert clamp_tilt(-1.6) == -math.pi / 2
    assert clamp_tilt(0.3) == 0.3


def test_replay_step(corridor):
    obj = corridor.objects[0]
    s = replay_step(obj, 5)
    assert (s.x, s.y) == tuple(obj.expert.positions[5])
    with pytest.raises(IndexError):
        replay_step(obj, 91)
