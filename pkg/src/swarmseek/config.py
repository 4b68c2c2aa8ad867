"""Run configuration: JSON parsing, validation, presets and object builders.

A config file is a JSON object with the blocks ``field``, ``swarm``, ``sim``,
``ascent``, ``harness`` and ``output``. Keys may be nested or dotted
(``{"sim.mode": "free"}`` is the same as ``{"sim": {"mode": "free"}}``).
Every block is optional; missing values take the defaults printed by
``swarmseek print-defaults``.

A ``harness.preset`` supplies a bundle of values that sits underneath the
file: anything the file sets explicitly wins.
"""
from __future__ import annotations

import copy
import json
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dynamics import SimConfig
from .errors import ConfigError
from .field import SignalField
from .harness import ResilienceEvent, make_rng, near_degenerate_swarm, random_swarm
from .swarm import SwarmState


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_default=True)


class FieldBlock(_Block):
    kind: Literal["gaussian", "quadratic"] = "gaussian"
    amplitude: float = Field(1.0, gt=0)
    scale: float = Field(10.0, gt=0)
    offset: float = 0.0
    source: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    curvature: Optional[List[List[float]]] = None
    operating_radius: Optional[float] = Field(None, gt=0)

    @field_validator("source")
    @classmethod
    def _source_dim(cls, v):
        if len(v) not in (2, 3):
            raise ValueError("len(source) in {2, 3}")
        return v


class RandomSwarmBlock(_Block):
    kind: Literal["annulus", "near_degenerate"] = "annulus"
    n_robots: int = Field(5, ge=1)
    center_std: float = Field(25.0, ge=0)
    radius_range: Tuple[float, float] = (0.5, 2.0)
    length: float = Field(2.0, gt=0)

    @field_validator("radius_range")
    @classmethod
    def _radii(cls, v):
        if not 0 < v[0] <= v[1]:
            raise ValueError("0 < radius_range[0] <= radius_range[1]")
        return v


class SwarmBlock(_Block):
    positions: Optional[List[List[float]]] = None
    headings: Optional[List[float]] = None
    random: RandomSwarmBlock = Field(default_factory=RandomSwarmBlock)

    @model_validator(mode="after")
    def _shapes(self):
        if self.positions is not None:
            if len(self.positions) < 1:
                raise ValueError("len(positions) >= 1")
            if len({len(p) for p in self.positions}) != 1 or len(self.positions[0]) not in (2, 3):
                raise ValueError("positions must be rows of 2 or 3 coordinates")
            if self.headings is not None and len(self.headings) != len(self.positions):
                raise ValueError("len(headings) == len(positions)")
        elif self.headings is not None:
            raise ValueError("headings require explicit positions")
        return self


class SimBlock(_Block):
    mode: Literal["free", "unicycle"] = "free"
    u_r: float = 1.0
    k_gamma: float = 1.0
    rtol: float = 1e-8
    atol: float = 1e-10
    t_end: float = 100.0
    sample_dt: float = 0.1
    seed: int = Field(0, ge=0, lt=2**64)
    epsilon: float = 0.5
    integrator: Literal["dopri45", "rk4"] = "dopri45"
    h_fixed: float = 0.01
    h_min: float = 1e-12

    @model_validator(mode="after")
    def _positive(self):
        for name in ("u_r", "k_gamma", "rtol", "atol", "t_end", "sample_dt", "epsilon", "h_fixed", "h_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} > 0")
        return self


class AscentBlock(_Block):
    direction: Literal["measured", "exact"] = "measured"
    eta_l: Optional[float] = Field(None, ge=0)
    omega_d_mode: Literal["analytic", "measured"] = "analytic"


class EventBlock(_Block):
    t: float = Field(ge=0)
    action: Literal["remove", "add"]
    index: Optional[int] = Field(None, ge=0)
    position: Optional[List[float]] = None
    heading: Optional[float] = None

    @model_validator(mode="after")
    def _target(self):
        if self.action == "remove" and self.index is None:
            raise ValueError("remove event needs index")
        if self.action == "add" and self.position is None:
            raise ValueError("add event needs position")
        return self


class SweepBlock(_Block):
    k_gamma: List[float] = Field(default_factory=lambda: [1.0, 10.0])

    @field_validator("k_gamma")
    @classmethod
    def _gains(cls, v):
        if not v or any(not k > 0 for k in v):
            raise ValueError("non-empty list with every k_gamma > 0")
        return v


class HarnessBlock(_Block):
    preset: Optional[Literal["convergence", "near_degenerate", "kgamma_sweep", "resilience"]] = None
    runs: int = Field(1, ge=1)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    events: List[EventBlock] = Field(default_factory=list)
    verify_samples: int = Field(10000, ge=1)


class OutputBlock(_Block):
    dir: str = "out"
    format: Literal["csv", "json"] = "csv"


class RunConfig(_Block):
    field: FieldBlock = Field(default_factory=FieldBlock)
    swarm: SwarmBlock = Field(default_factory=SwarmBlock)
    sim: SimBlock = Field(default_factory=SimBlock)
    ascent: AscentBlock = Field(default_factory=AscentBlock)
    harness: HarnessBlock = Field(default_factory=HarnessBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _consistent(self):
        dim = len(self.field.source)
        if self.swarm.positions is not None and len(self.swarm.positions[0]) != dim:
            raise ValueError("swarm positions and field.source must have the same dimension")
        if self.sim.mode == "unicycle" and dim != 2:
            raise ValueError("unicycle mode requires a planar field")
        for ev in self.harness.events:
            if ev.t > self.sim.t_end:
                raise ValueError("event t <= sim.t_end")
        return self


# Values each preset places underneath the user's file.
PRESETS = {
    "convergence": {
        "field": {"amplitude": 1000.0},
        "swarm": {"random": {"center_std": 10.0}},
        "sim": {"mode": "free", "t_end": 500.0, "sample_dt": 0.5},
        "ascent": {"direction": "exact"},
    },
    "near_degenerate": {
        "field": {"amplitude": 1000.0},
        "swarm": {"random": {"kind": "near_degenerate", "center_std": 10.0}},
        "sim": {"mode": "free", "t_end": 500.0, "sample_dt": 0.5},
        "ascent": {"direction": "exact"},
    },
    "kgamma_sweep": {
        "swarm": {"random": {"center_std": 10.0}},
        "sim": {"mode": "unicycle", "u_r": 1.0, "t_end": 300.0},
        "harness": {"sweep": {"k_gamma": [1.0, 10.0]}},
    },
    "resilience": {
        "field": {"amplitude": 1000.0},
        "swarm": {"random": {"center_std": 10.0}},
        "sim": {"mode": "free", "t_end": 500.0, "sample_dt": 0.5},
        "ascent": {"direction": "exact"},
        "harness": {"events": [{"t": 5.0, "action": "remove", "index": 0}]},
    },
}


def _expand_dotted(obj, path=""):
    """Turn ``{"a.b": 1}`` into ``{"a": {"b": 1}}`` recursively."""
    if not isinstance(obj, dict):
        return obj
    out = {}
    for key, val in obj.items():
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"conflicting keys at {path}{key}")
        leaf = parts[-1]
        val = _expand_dotted(val, f"{path}{key}.")
        if leaf in node and isinstance(node[leaf], dict) and isinstance(val, dict):
            node[leaf] = _merge(node[leaf], val)
        elif leaf in node:
            raise ConfigError(f"duplicate key {path}{key}")
        else:
            node[leaf] = val
    return out


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            lines.append(f"unknown key: {loc}")
            continue
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        lines.append(f"{loc}: constraint violated: {msg}")
    return "; ".join(lines)


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = _expand_dotted(data)
    preset = (data.get("harness") or {}).get("preset") if isinstance(data.get("harness"), dict) else None
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"harness.preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data = _merge(PRESETS[preset], data)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate JSON config text."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def default_config_text() -> str:
    return dump_config(RunConfig())


def build_field(cfg: RunConfig) -> SignalField:
    f = cfg.field
    return SignalField(
        kind=f.kind,
        amplitude=f.amplitude,
        scale=f.scale,
        offset=f.offset,
        source=np.array(f.source, dtype=float),
        curvature=None if f.curvature is None else np.array(f.curvature, dtype=float),
        operating_radius=f.operating_radius,
    )


def build_sim(cfg: RunConfig, k_gamma: Optional[float] = None) -> SimConfig:
    s = cfg.sim
    return SimConfig(
        mode=s.mode,
        u_r=s.u_r,
        k_gamma=s.k_gamma if k_gamma is None else float(k_gamma),
        rtol=s.rtol,
        atol=s.atol,
        t_end=s.t_end,
        sample_dt=s.sample_dt,
        seed=s.seed,
        epsilon=s.epsilon,
        integrator=s.integrator,
        h_fixed=s.h_fixed,
        h_min=s.h_min,
        direction=cfg.ascent.direction,
        omega_d_mode=cfg.ascent.omega_d_mode,
        eta_l=cfg.ascent.eta_l,
    )


def build_swarm(cfg: RunConfig, run_index: int = 0) -> SwarmState:
    """Initial swarm: explicit positions, or a draw from the run's RNG stream
    ``(sim.seed, run_index)``."""
    sw = cfg.swarm
    unicycle = cfg.sim.mode == "unicycle"
    if sw.positions is not None:
        pos = np.array(sw.positions, dtype=float)
        if sw.headings is not None:
            head = np.array(sw.headings, dtype=float)
        elif unicycle:
            head = make_rng((cfg.sim.seed, run_index)).uniform(0.0, 2.0 * np.pi, size=len(pos))
        else:
            head = None
        return SwarmState(pos, headings=head if unicycle else None)
    r = sw.random
    seed = (cfg.sim.seed, run_index)
    center = np.array(cfg.field.source, dtype=float)
    if r.kind == "near_degenerate":
        if center.size != 2:
            raise ConfigError("near_degenerate swarms are planar")
        return near_degenerate_swarm(seed, r.n_robots, r.center_std, r.length, unicycle=unicycle, center=center)
    return random_swarm(seed, r.n_robots, r.center_std, tuple(r.radius_range), dim=center.size,
                        unicycle=unicycle, center=center)


def build_events(cfg: RunConfig) -> list:
    return [
        ResilienceEvent(
            time=e.t,
            action=e.action,
            index=e.index,
            position=None if e.position is None else tuple(e.position),
            heading=e.heading,
        )
        for e in cfg.harness.events
    ]
