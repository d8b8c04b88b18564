import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivecone import synth
from drivecone.dynamics import Action
from drivecone.obs import Goal
from drivecone.dynamics import KinState
from drivecone.scenario import Disposition, Scenario
from drivecone.sim import (REPLAY, CollisionKind, ConstantPolicy, RandomPolicy, ReplayPolicy, Runner, SimConfig,
                           Simulation, dense_reward, goal_achieved)

NO_REMOVAL = SimConfig(remove_on_goal=False, remove_on_collision=False)


def _replay_all(scn, cfg=NO_REMOVAL):
    sim = Simulation(scn, config=cfg)
    Runner({oid: ReplayPolicy() for oid in sim.controlled_ids}).rollout(sim, seed=0)
    return sim


def test_replay_reproduces_recorded_states(corridor):
    sim = _replay_all(corridor)
    for k, o in enumerate(corridor.objects):
        v = o.expert.valid[:91]
        assert np.array_equal(sim.trace_pos[v, k], o.expert.positions[v])
        assert np.array_equal(sim.trace_heading[v, k], o.expert.headings[v])
    assert all(sim.snapshot(oid).goal_achieved for oid in sim.controlled_ids)


def test_reward_boundaries():
    goal = Goal(10.0, 0.0, 5.0, 0.0)
    x0 = (0.0, 0.0)
    assert dense_reward(KinState(0, 0, 0, 5), goal, x0) == 0.4
    assert dense_reward(KinState(10, 0, 0, 5), goal, x0) == 0.6
    r = dense_reward(KinState(10, 0, 0, 45), goal, x0)
    assert r == pytest.approx(0.4, abs=1e-15)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-math.pi, math.pi), st.floats(-20, 20))
def test_reward_bounded(x, y, h, v):
    r = dense_reward(KinState(x, y, h, v), Goal(10, 0, 5, 0), (0.0, 0.0))
    # heading term never drops below half its weight
    assert r <= 0.6 + 1e-12
    assert r >= -0.2 * math.hypot(x - 10, y) / 10 + 0.1 - 0.2 * (abs(v - 5) / 40) - 1e-12


def test_goal_tolerances_closed():
    g = Goal(0, 0, 5, 0)
    assert goal_achieved(KinState(1.0, 0, 0.3, 6.0), g)
    assert not goal_achieved(KinState(1.0 + 1e-9, 0, 0, 5), g)
    assert not goal_achieved(KinState(0, 0, 0.3 + 1e-9, 5), g)
    assert not goal_achieved(KinState(0, 0, 0, 4.0 - 1e-9), g)


def test_warmup_history_and_handoff(corridor):
    sim = Simulation(corridor, config=NO_REMOVAL)
    hist = sim.reset(0)
    assert sim.t == 10
    assert all(len(h) == 10 for h in hist.values())
    assert set(hist) == set(sim.controlled_ids)


def test_action_validation(corridor):
    sim = Simulation(corridor)
    sim.reset(0)
    ids = sim.active_ids
    with pytest.raises(ValueError, match="missing"):
        sim.step({})
    with pytest.raises(ValueError):
        sim.step({oid: Action(7.0, 0.0) for oid in ids})
    with pytest.raises(TypeError):
        sim.step({oid: (0, 0) for oid in ids})
    sim.step({oid: REPLAY for oid in ids})
    assert sim.t == 11


def test_head_on_collision_removes_both():
    a = synth.make_object(0, synth.straight(0, 0, 0.0, 10.0))
    b = synth.make_object(1, synth.straight(40, 0, math.pi, 10.0), headings=np.full(91, math.pi))
    scn = Scenario("headon", (a, b), ())
    disp = {0: Disposition.CONTROLLED, 1: Disposition.EXPERT_REPLAY}
    sim = Simulation(scn, disp, config=SimConfig(warmup_steps=0))
    sim.reset(0)
    # constant speed straight ahead meets the oncoming car near x=20
    while not sim.done:
        sim.step({0: Action(0.0, 0.0)})
    snap = sim.snapshot(0)
    assert snap.collided is CollisionKind.VEHICLE
    assert not snap.alive
    assert sim.t < 25


def test_road_edge_collision(corridor):
    oid = next(o.id for o in corridor.objects)
    disp = {o.id: (Disposition.CONTROLLED if o.id == oid else Disposition.EXPERT_REPLAY) for o in corridor.objects}
    sim = Simulation(corridor, disp, config=SimConfig(warmup_steps=0))
    Runner({oid: ConstantPolicy(0.0, 0.5)}).rollout(sim, seed=0)
    assert sim.snapshot(oid).collided is not CollisionKind.NONE


def test_goal_removal_and_bonus(corridor):
    sim = Simulation(corridor)
    sim.reset(0)
    total = {}
    while not sim.done:
        for oid, tr in sim.step({oid: REPLAY for oid in sim.active_ids}).items():
            total[oid] = tr
    for oid, tr in total.items():
        assert tr.info["goal_achieved"] and tr.done and tr.observation is None
        assert tr.reward > 80.0


def test_seeded_random_rollouts_repeat(corridor):
    def run():
        sim = Simulation(corridor, config=NO_REMOVAL)
        pol = {oid: RandomPolicy(seed=oid) for oid in sim.controlled_ids}
        Runner(pol).rollout(sim, seed=4)
        return sim.trace_pos
    assert np.array_equal(run(), run(), equal_nan=True)


def test_set_controlled_hands_over(corridor):
    sim = Simulation(corridor, config=NO_REMOVAL)
    sim.reset(0)
    sim.set_controlled([corridor.objects[3].id])
    assert sim.active_ids == [corridor.objects[3].id]
    sim.advance({corridor.objects[3].id: Action(1.0, 0.0)})


def test_config_window_checked():
    with pytest.raises(ValueError):
        SimConfig(warmup_steps=10, horizon=81)
    assert dataclasses.replace(SimConfig(), horizon=5).end_step == 15
