"""Kinematic bicycle model, discrete action grids, and expert replay."""

from __future__ import annotations

import itertools
from functools import cached_property
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geom import wrap_angle
from .scenario import N_STEPS, RoadObject

MAX_ACCEL = 6.0
MAX_HEADING_RATE = math.radians(40.0)
MAX_HEAD_TILT = 0.5 * math.pi
DEFAULT_V_MAX = 100.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class KinState:
    x: float
    y: float
    heading: float
    speed: float


@dataclass(frozen=True)
class Action:
    accel: float = 0.0
    steer: float = 0.0
    head_tilt: float = 0.0


def bicycle_step(s: KinState, act: Action, dt: float, length: float,
                 v_max: float = DEFAULT_V_MAX,
                 max_heading_rate: Optional[float] = None) -> KinState:
    """Advance one step of the kinematic bicycle model.

    The reference point is the center of gravity, halfway along the
    wheelbase, and position is integrated with the mid-step speed. When
    ``max_heading_rate`` is given the heading change is clamped afterwards.
    """
    if abs(act.steer) >= 0.5 * math.pi:
        raise ValueError(f"steering angle {act.steer} outside (-pi/2, pi/2)")
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_dot = act.accel
    v_bar = min(max(s.speed + 0.5 * v_dot * dt, -v_max), v_max)
    tan_d = math.tan(act.steer)
    beta = math.atan(0.5 * tan_d)
    x_dot = v_bar * math.cos(s.heading + beta)
    y_dot = v_bar * math.sin(s.heading + beta)
    theta_dot = v_bar * math.cos(beta) * tan_d / length
    d_theta = theta_dot * dt
    if max_heading_rate is not None:
        lim = max_heading_rate * dt
        d_theta = min(max(d_theta, -lim), lim)
    return KinState(
        x=s.x + x_dot * dt,
        y=s.y + y_dot * dt,
        heading=wrap_angle(s.heading + d_theta),
        speed=min(max(s.speed + v_dot * dt, -v_max), v_max),
    )


@dataclass(frozen=True)
class ActionGrid:
    accel_bins: int = 6
    accel_range: tuple[float, float] = (-3.0, 2.0)
    steer_bins: int = 21
    steer_range: tuple[float, float] = (-0.7, 0.7)
    tilt_bins: int = 5
    tilt_range: tuple[float, float] = (-1.6, 1.6)

    def __post_init__(self) -> None:
        for name in ("accel", "steer", "tilt"):
            bins = getattr(self, f"{name}_bins")
            lo, hi = getattr(self, f"{name}_range")
            if bins < 1:
                raise ConfigError(f"{name}_bins must be >= 1")
            if lo > hi:
                raise ConfigError(f"{name}_range is inverted")
            if bins < 2 and hi != lo:
                raise ConfigError(f"{name}: a nonzero range needs at least 2 bins")
        if max(abs(v) for v in self.accel_range) > MAX_ACCEL:
            raise ConfigError(f"acceleration bins exceed +/-{MAX_ACCEL} m/s^2")
        if max(abs(v) for v in self.steer_range) >= 0.5 * math.pi:
            raise ConfigError("steering bins must stay inside (-pi/2, pi/2)")

    def values(self, name: str) -> np.ndarray:
        lo, hi = getattr(self, f"{name}_range")
        return np.linspace(lo, hi, getattr(self, f"{name}_bins"))

    def __len__(self) -> int:
        return self.accel_bins * self.steer_bins * self.tilt_bins

    @cached_property
    def _table(self) -> tuple[list[float], list[float], list[float]]:
        return tuple(self.values(n).tolist() for n in ("accel", "steer", "tilt"))

    def action(self, index: int) -> Action:
        """Action at a flat index (accel-major, tilt fastest)."""
        if not 0 <= index < len(self):
            raise IndexError(f"action index {index} outside [0, {len(self)})")
        i_a, rest = divmod(int(index), self.steer_bins * self.tilt_bins)
        i_s, i_t = divmod(rest, self.tilt_bins)
        acc, steer, tilt = self._table
        return Action(acc[i_a], steer[i_s], tilt[i_t])


def grid_actions(grid: ActionGrid) -> list[Action]:
    return [Action(float(a), float(d), float(t)) for a, d, t in
            itertools.product(grid.values("accel"), grid.values("steer"), grid.values("tilt"))]


def clamp_tilt(tilt: float) -> float:
    return min(max(tilt, -MAX_HEAD_TILT), MAX_HEAD_TILT)


def replay_step(obj: RoadObject, t: int) -> Optional[KinState]:
    """Recorded state at step ``t``, or None where the record is invalid."""
    if not 0 <= t < N_STEPS:
        raise IndexError(f"step {t} outside [0, {N_STEPS - 1}]")
    e = obj.expert
    if not e.valid[t]:
        return None
    return KinState(float(e.positions[t, 0]), float(e.positions[t, 1]), float(e.headings[t]),
                    float(math.hypot(e.velocities[t, 0], e.velocities[t, 1])))
