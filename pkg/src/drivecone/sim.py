"""Episode loop for the partially observed driving game.

Every episode starts with a warm-up during which all vehicles follow their
recordings; control then passes to the policies for ``horizon`` steps.
Each step advances controlled vehicles with the bicycle model and replayed
ones from their recordings, flags collisions, tests goals, pays rewards,
removes finished vehicles and builds fresh observations.
"""

from __future__ import annotations

import enum
import functools
import logging
import math
from decimal import Decimal
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Protocol, Union

import numpy as np

from . import _kernels as K
from .dynamics import (MAX_ACCEL, Action, ActionGrid, ConfigError, KinState, bicycle_step, clamp_tilt)
from .geom import min_angle
from .obs import Goal, ObsLayout, Observation, build_observation
from .scenario import N_STEPS, Disposition, ObjectKind, Scenario, select_controlled
from .visibility import ViewConfig
from .world import RoadMap, World

log = logging.getLogger(__name__)


class _Replay:
    """Action placeholder: move the vehicle to its recorded next state."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "REPLAY"


REPLAY = _Replay()
ActionLike = Union[Action, _Replay]


class CollisionKind(enum.IntEnum):
    NONE = 0
    VEHICLE = 1
    ROAD_EDGE = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class SimConfig:
    warmup_steps: int = 10
    horizon: int = 80
    goal_pos_tol: float = 1.0
    goal_speed_tol: float = 1.0
    goal_heading_tol: float = 0.3
    reward_position: float = 0.2
    reward_speed: float = 0.2
    reward_heading: float = 0.2
    speed_normalizer: float = 40.0
    goal_bonus: float = 80.0
    max_controlled: int = 20
    remove_on_goal: bool = True
    remove_on_collision: bool = True
    v_max: float = 100.0
    max_heading_rate: Optional[float] = math.radians(40.0)
    include_vru: bool = False

    def __post_init__(self) -> None:
        if self.warmup_steps < 0 or self.horizon < 1:
            raise ConfigError("warmup_steps must be >= 0 and horizon >= 1")
        if self.warmup_steps + self.horizon > N_STEPS - 1:
            raise ConfigError(f"warmup_steps + horizon must not exceed {N_STEPS - 1}")

    @property
    def end_step(self) -> int:
        return self.warmup_steps + self.horizon


def goal_achieved(s: KinState, goal: Goal, config: SimConfig = SimConfig()) -> bool:
    return (math.hypot(s.x - goal.x, s.y - goal.y) <= config.goal_pos_tol
            and abs(s.speed - goal.speed) <= config.goal_speed_tol
            and min_angle(s.heading, goal.heading) <= config.goal_heading_tol)


@functools.lru_cache(maxsize=None)
def _decimal_weights(*weights: float) -> tuple[tuple[int, ...], int]:
    """Integer numerators over a common denominator for decimal weights."""
    ratios = [Decimal(repr(w)).as_integer_ratio() for w in weights]
    den = math.lcm(*(d for _, d in ratios))
    return tuple(n * (den // d) for n, d in ratios), den


def reward_terms(s: KinState, goal: Goal, x0: tuple[float, float],
                 config: SimConfig = SimConfig()) -> tuple[float, float, float]:
    """Unweighted (position, speed, heading) progress terms.

    When the start coincides with the goal the position term is 1.
    """
    d0 = math.hypot(x0[0] - goal.x, x0[1] - goal.y)
    pos = 1.0 if d0 == 0.0 else 1.0 - math.hypot(s.x - goal.x, s.y - goal.y) / d0
    speed = 1.0 - abs(s.speed - goal.speed) / config.speed_normalizer
    head = 1.0 - min_angle(s.heading, goal.heading) / (2.0 * math.pi)
    return pos, speed, head


def dense_reward(s: KinState, goal: Goal, x0: tuple[float, float], config: SimConfig = SimConfig()) -> float:
    """Weighted sum of :func:`reward_terms`.

    Weights are read as the decimals they are written as and the sum is
    divided once, so 0.2 + 0.2 + 0.2 gives exactly 0.6.
    """
    pos, speed, head = reward_terms(s, goal, x0, config)
    (n_p, n_s, n_h), den = _decimal_weights(config.reward_position, config.reward_speed, config.reward_heading)
    return (n_p * pos + n_s * speed + n_h * head) / den


@dataclass
class Transition:
    observation: Optional[Observation]
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ObjectSnapshot:
    state: Optional[KinState]
    alive: bool
    collided: CollisionKind
    goal_achieved: bool


def _goal_of(obj) -> Goal:
    return Goal(obj.goal_position[0], obj.goal_position[1], obj.goal_speed, obj.goal_heading)


class Simulation:
    """One scenario, one episode at a time. Not thread-safe."""

    def __init__(self, scenario: Scenario, disposition: Optional[Mapping[int, Disposition]] = None,
                 config: SimConfig = SimConfig(), view: ViewConfig = ViewConfig(),
                 layout: ObsLayout = ObsLayout(), road_map: Optional[RoadMap] = None, seed: int = 0):
        self.scenario = scenario
        self.config = config
        self.view = view
        self.layout = layout
        if disposition is None:
            disposition = select_controlled(scenario, config.max_controlled, seed, config.include_vru)
        missing = {o.id for o in scenario.objects} - set(disposition)
        if missing:
            raise ConfigError(f"disposition misses objects {sorted(missing)}")
        self.disposition = dict(disposition)
        self.world = World.from_scenario(scenario, road_map)
        objs = scenario.objects
        self.goals = [_goal_of(o) for o in objs]
        self._goal_arr = np.array([(g.x, g.y, g.speed, g.heading) for g in self.goals]).reshape(-1, 4)
        self._exp_pos = np.stack([o.expert.positions for o in objs], axis=1) if objs else np.empty((N_STEPS, 0, 2))
        self._exp_head = np.stack([o.expert.headings for o in objs], axis=1) if objs else np.empty((N_STEPS, 0))
        self._exp_speed = (np.stack([o.expert.speeds for o in objs], axis=1) if objs
                           else np.empty((N_STEPS, 0)))
        self._exp_valid = (np.stack([o.expert.valid for o in objs], axis=1) if objs
                           else np.empty((N_STEPS, 0), dtype=bool))
        self._is_vehicle = self.world.kinds == ObjectKind.VEHICLE.index
        self._init_masks()
        self.t = -1

    def _init_masks(self) -> None:
        ids = self.world.ids
        self.alive = np.array([self.disposition[int(i)] is not Disposition.REMOVED for i in ids], dtype=bool)
        self._controlled = np.array([self.disposition[int(i)] is Disposition.CONTROLLED for i in ids],
                                    dtype=bool)

    # ------------------------------------------------------------- helpers
    @property
    def ids(self) -> np.ndarray:
        return self.world.ids

    def _idx(self, oid: int) -> int:
        return self.world.index_of[int(oid)]

    @property
    def controlled_ids(self) -> list[int]:
        return [int(self.world.ids[i]) for i in np.flatnonzero(self._controlled)]

    @property
    def active_ids(self) -> list[int]:
        """Controlled vehicles still in the episode."""
        return [int(self.world.ids[i]) for i in np.flatnonzero(self._controlled & self.alive)]

    def kin_state(self, oid: int) -> Optional[KinState]:
        i = self._idx(oid)
        if not self.world.present[i]:
            return None
        w = self.world
        return KinState(float(w.pos[i, 0]), float(w.pos[i, 1]), float(w.heading[i]), float(w.speed[i]))

    def snapshot(self, oid: int) -> ObjectSnapshot:
        i = self._idx(oid)
        return ObjectSnapshot(self.kin_state(oid), bool(self.alive[i]), CollisionKind(int(self.collided[i])),
                              bool(self.goal_flag[i]))

    def _load_expert(self, mask: np.ndarray, t: int) -> None:
        # invalid recorded states are never read; the object just vanishes
        w = self.world
        K.load_states(mask, self._exp_valid[t], self.alive, self._exp_pos[t], self._exp_head[t],
                      self._exp_speed[t], w.pos, w.heading, w.speed, w.present)

    def _record(self) -> None:
        w = self.world
        self.trace_pos[self.t] = w.pos
        self.trace_heading[self.t] = w.heading
        self.trace_speed[self.t] = w.speed
        self.trace_present[self.t] = w.present

    # ---------------------------------------------------------------- API
    def reset(self, seed: Optional[int] = None) -> dict[int, list[Observation]]:
        """Start an episode and run the warm-up.

        Returns, per controlled vehicle, the observations built after each
        warm-up step; the last one is the observation at control handoff.
        With no warm-up it holds just the initial observation.
        """
        n = len(self.world)
        self.rng = np.random.default_rng(seed)
        self._init_masks()
        w0 = self.config.warmup_steps
        for i in np.flatnonzero(self._controlled):
            if not self._exp_valid[: w0 + 1, i].all():
                log.warning("controlled vehicle %d is invalid during warm-up; removing it", self.world.ids[i])
                self.alive[i] = False
                self._controlled[i] = False
                self.disposition[int(self.world.ids[i])] = Disposition.REMOVED
        self.collided = np.zeros(n, dtype=np.int8)
        self.goal_flag = np.zeros(n, dtype=bool)
        self.tilt = np.zeros(n)
        self.trace_pos = np.full((N_STEPS, n, 2), np.nan)
        self.trace_heading = np.full((N_STEPS, n), np.nan)
        self.trace_speed = np.full((N_STEPS, n), np.nan)
        self.trace_present = np.zeros((N_STEPS, n), dtype=bool)

        everyone = np.ones(n, dtype=bool)
        self.t = 0
        self._load_expert(everyone, 0)
        self.world.touch()
        self._record()
        history: dict[int, list[Observation]] = {oid: [] for oid in self.controlled_ids}
        if w0 == 0:
            for oid in history:
                history[oid].append(self.observe(oid))
        for t in range(1, w0 + 1):
            self.t = t
            self._load_expert(everyone, t)
            self.world.touch()
            self._record()
            for oid in history:
                history[oid].append(self.observe(oid))
        self.x0 = self.world.pos.copy()
        return history

    def set_controlled(self, ids) -> None:
        """Hand control to ``ids`` mid-episode; every other survivor replays."""
        ids = {int(i) for i in ids}
        for oid in ids:
            if not self.alive[self._idx(oid)]:
                raise ValueError(f"object {oid} has been removed")
        for oid, d in self.disposition.items():
            if d is not Disposition.REMOVED:
                self.disposition[oid] = Disposition.CONTROLLED if oid in ids else Disposition.EXPERT_REPLAY
        self._controlled[:] = False
        for oid in ids:
            self._controlled[self._idx(oid)] = True

    def observe(self, oid: int, tilt: Optional[float] = None) -> Optional[Observation]:
        i = self._idx(oid)
        if not self.world.present[i]:
            return None
        tilt = self.tilt[i] if tilt is None else clamp_tilt(tilt)
        return build_observation(oid, tilt, self.world, self.goals[i], self.layout, self.view)

    def _check_actions(self, actions: Mapping[int, ActionLike]) -> None:
        active = set(self.active_ids)
        given = set(map(int, actions))
        if given != active:
            extra = given - active
            if extra:
                raise ValueError(f"actions given for vehicles that are not active controlled vehicles: {sorted(extra)}")
            raise ValueError(f"missing actions for active controlled vehicles: {sorted(active - given)}")
        for oid, act in actions.items():
            if act is REPLAY:
                continue
            if not isinstance(act, Action):
                raise TypeError(f"action for {oid} must be an Action or REPLAY, got {type(act).__name__}")
            if abs(act.accel) > MAX_ACCEL:
                raise ValueError(f"acceleration {act.accel} outside +/-{MAX_ACCEL}")

    def advance(self, actions: Mapping[int, ActionLike]) -> dict[int, tuple[float, bool]]:
        """Physics, collision, goal and removal for one step; no observations.

        Returns per active controlled vehicle ``(reward, goal_newly_achieved)``.
        """
        if self.t < 0:
            raise RuntimeError("call reset() first")
        if self.t >= self.config.end_step:
            raise RuntimeError("episode is over")
        self._check_actions(actions)
        cfg = self.config
        w = self.world
        t1 = self.t + 1
        active = self._controlled & self.alive

        replay = ~self._controlled & self.alive
        for oid, act in actions.items():
            if act is REPLAY:
                replay[self._idx(oid)] = True
        self._load_expert(replay, t1)
        w.present[~self.alive] = False
        for oid, act in actions.items():
            if act is REPLAY:
                continue
            i = self._idx(oid)
            s = KinState(float(w.pos[i, 0]), float(w.pos[i, 1]), float(w.heading[i]), float(w.speed[i]))
            s = bicycle_step(s, act, self.scenario.dt, float(w.length[i]), cfg.v_max, cfg.max_heading_rate)
            w.pos[i, 0] = s.x
            w.pos[i, 1] = s.y
            w.heading[i] = s.heading
            w.speed[i] = s.speed
            w.present[i] = True
            self.tilt[i] = clamp_tilt(act.head_tilt)
        self.t = t1
        w.touch()

        veh_hit, edge_hit = w.collisions()
        fresh = (self.collided == 0) & w.present
        self.collided[fresh & veh_hit] = int(CollisionKind.VEHICLE)
        self.collided[fresh & ~veh_hit & edge_hit] = int(CollisionKind.ROAD_EDGE)

        cand = np.flatnonzero(w.present & self._is_vehicle & ~self.goal_flag)
        hit = K.goal_hits(w.pos, w.speed, w.heading, self._goal_arr, cand,
                          cfg.goal_pos_tol, cfg.goal_speed_tol, cfg.goal_heading_tol)
        self.goal_flag[hit] = True
        newly_set = set(hit.tolist())
        out: dict[int, tuple[float, bool]] = {}
        removed = False
        for i in np.flatnonzero(active):
            oid = int(w.ids[i])
            newly = i in newly_set
            reward = 0.0
            if w.present[i]:
                s = KinState(w.pos[i, 0], w.pos[i, 1], w.heading[i], w.speed[i])
                reward = dense_reward(s, self.goals[i], (self.x0[i, 0], self.x0[i, 1]), cfg)
            if newly:
                reward += cfg.goal_bonus
            out[oid] = (reward, newly)
            if ((cfg.remove_on_goal and self.goal_flag[i])
                    or (cfg.remove_on_collision and self.collided[i] != CollisionKind.NONE)):
                self.alive[i] = False
                w.present[i] = False
                removed = True
        if removed:
            w.touch()
        self._record()
        return out

    def step(self, actions: Mapping[int, ActionLike]) -> dict[int, Transition]:
        results = self.advance(actions)
        final = self.t >= self.config.end_step
        trans: dict[int, Transition] = {}
        for oid, (reward, newly) in results.items():
            i = self._idx(oid)
            removed = not self.alive[i]
            obs = None if removed else self.observe(oid)
            trans[oid] = Transition(obs, reward, removed or final, {
                "collision": CollisionKind(int(self.collided[i])).label,
                "goal_achieved": bool(self.goal_flag[i]),
                "goal_newly_achieved": newly,
                "removed": removed,
            })
        return trans

    @property
    def done(self) -> bool:
        return self.t >= self.config.end_step or not self.active_ids


# ---------------------------------------------------------------- policies

class Policy(Protocol):
    def act(self, vehicle_id: int, observation: Optional[Observation], sim: Simulation) -> ActionLike:
        ...


class ReplayPolicy:
    def act(self, vehicle_id, observation, sim):
        return REPLAY


@dataclass
class ConstantPolicy:
    accel: float = 0.0
    steer: float = 0.0
    head_tilt: float = 0.0

    def act(self, vehicle_id, observation, sim):
        return Action(self.accel, self.steer, self.head_tilt)


class RandomPolicy:
    """Uniform draws from an action grid with its own seeded generator."""

    def __init__(self, grid: ActionGrid = ActionGrid(), seed: int = 0):
        self.grid = grid
        self.rng = np.random.default_rng(seed)

    def act(self, vehicle_id, observation, sim):
        return self.grid.action(int(self.rng.integers(len(self.grid))))


@dataclass
class FunctionPolicy:
    fn: Callable[[int, Optional[Observation], Simulation], ActionLike]

    def act(self, vehicle_id, observation, sim):
        return self.fn(vehicle_id, observation, sim)


class Runner:
    """Drives a simulation with one policy handle per controlled vehicle."""

    def __init__(self, policies: Mapping[int, Policy]):
        self.policies = dict(policies)

    def rollout(self, sim: Simulation, seed: Optional[int] = None,
                on_step: Optional[Callable[[Simulation, dict], None]] = None) -> dict[int, float]:
        """Run a full episode; returns the summed reward per controlled vehicle."""
        history = sim.reset(seed)
        unmapped = set(sim.controlled_ids) - set(self.policies)
        if unmapped:
            raise ConfigError(f"no policy for controlled vehicles {sorted(unmapped)}")
        last = {oid: (h[-1] if h else None) for oid, h in history.items()}
        totals = {oid: 0.0 for oid in sim.controlled_ids}
        while not sim.done:
            actions = {oid: self.policies[oid].act(oid, last.get(oid), sim) for oid in sim.active_ids}
            trans = sim.step(actions)
            for oid, tr in trans.items():
                totals[oid] += tr.reward
                last[oid] = tr.observation
            if on_step is not None:
                on_step(sim, trans)
        # run the clock out so traces cover the full window
        while sim.t < sim.config.end_step:
            sim.advance({})
        return totals


def assign_policies(disposition: Mapping[int, Disposition], policies: Mapping[int, Policy]) -> Runner:
    unmapped = [oid for oid, d in disposition.items() if d is Disposition.CONTROLLED and oid not in policies]
    if unmapped:
        raise ConfigError(f"no policy for controlled vehicles {sorted(unmapped)}")
    return Runner(policies)
