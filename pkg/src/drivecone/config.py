"""One JSON document for every tunable: view, actions, observation layout
and episode settings. ``benchmark.json`` in ``presets/`` pins the values
that benchmark runs must use; :func:`rule_violations` checks a config
against it."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Union

from .dynamics import MAX_ACCEL, MAX_HEADING_RATE, ActionGrid, ConfigError
from .obs import ObsLayout
from .sim import SimConfig
from .visibility import ViewConfig

_SECTIONS = {"sim": SimConfig, "view": ViewConfig, "actions": ActionGrid, "layout": ObsLayout}


@dataclass(frozen=True)
class EnvConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    view: ViewConfig = field(default_factory=ViewConfig)
    actions: ActionGrid = field(default_factory=ActionGrid)
    layout: ObsLayout = field(default_factory=ObsLayout)

    def to_dict(self) -> dict:
        out = {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}
        # tuples become lists so the document round-trips through JSON unchanged
        out["actions"] = {k: list(v) if isinstance(v, tuple) else v for k, v in out["actions"].items()}
        out["observation"] = self.layout.to_dict()
        return out


def _section(cls, doc: Mapping[str, Any], name: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(doc) - set(known)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in doc.items():
        default = known[k].default
        kwargs[k] = tuple(v) if isinstance(default, tuple) else v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from e


def config_from_dict(doc: Mapping[str, Any]) -> EnvConfig:
    extra = set(doc) - set(_SECTIONS) - {"observation"}
    if extra:
        raise ConfigError(f"unknown config sections {sorted(extra)}")
    parts = {name: _section(cls, doc.get(name, {}), name) for name, cls in _SECTIONS.items()}
    return EnvConfig(**parts)


def load_config(src: Union[str, Path, Mapping]) -> EnvConfig:
    if isinstance(src, Mapping):
        return config_from_dict(src)
    return config_from_dict(json.loads(Path(src).read_text()))


def save_config(cfg: EnvConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def benchmark_config() -> EnvConfig:
    text = resources.files("drivecone").joinpath("presets/benchmark.json").read_text()
    return config_from_dict(json.loads(text))


def rule_violations(cfg: EnvConfig) -> list[str]:
    """Ways ``cfg`` departs from the benchmark rules; empty when compliant."""
    out = []
    ref = benchmark_config()
    if cfg.view != ref.view:
        out.append("view cone differs from the fixed 120 degree / 80 m cone")
    lo, hi = cfg.actions.accel_range
    if max(abs(lo), abs(hi)) > MAX_ACCEL:
        out.append(f"acceleration bins exceed +/-{MAX_ACCEL} m/s^2")
    if cfg.sim.max_heading_rate is None or cfg.sim.max_heading_rate > MAX_HEADING_RATE + 1e-12:
        out.append("heading rate is not limited to 40 degrees per second")
    if cfg.sim.warmup_steps != ref.sim.warmup_steps or cfg.sim.horizon != ref.sim.horizon:
        out.append("episode window differs from 1 s warm-up + 8 s control")
    for k in ("goal_pos_tol", "goal_speed_tol", "goal_heading_tol", "reward_position", "reward_speed",
              "reward_heading", "speed_normalizer", "goal_bonus", "max_controlled"):
        if getattr(cfg.sim, k) != getattr(ref.sim, k):
            out.append(f"sim.{k} differs from the benchmark value {getattr(ref.sim, k)}")
    return out


def check_benchmark(cfg: EnvConfig) -> None:
    problems = rule_violations(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
