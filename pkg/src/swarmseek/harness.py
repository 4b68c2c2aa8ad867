"""Scenario execution: swarm generation, resilience events, diagnostics, success record."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional, Sequence

import numpy as np

from . import ascent
from .dynamics import SimConfig, SwarmSystem, initialize_unicycle, integrate, rederive_delta
from .errors import ConfigError, DegeneracyWarning, SimulationError, SwarmSeekError
from .field import SignalField
from .swarm import SwarmState, decompose, default_degeneracy_eps, degeneracy_margin

log = logging.getLogger(__name__)

DEFAULT_CENTER_STD = 25.0
DEFAULT_RADIUS_RANGE = (0.5, 2.0)

DIAGNOSTIC_COLUMNS = ("sigma_rc", "grad_norm", "dist", "deformation", "theta", "guiding_defined")


def make_rng(seed):
    """RNG for a seed or a ``(master_seed, run_index)`` tuple."""
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng([int(s) for s in seed])
    return np.random.default_rng(int(seed))


def random_swarm(
    seed,
    n_robots: int = 5,
    center_std: float = DEFAULT_CENTER_STD,
    radius_range=DEFAULT_RADIUS_RANGE,
    dim: int = 2,
    unicycle: bool = False,
    center=None,
) -> SwarmState:
    """Random formation around a normally distributed centre.

    Each robot sits at a uniformly drawn distance in ``radius_range`` from the
    centre, in a uniformly random direction. Headings (unicycle) are uniform
    on the circle.
    """
    if n_robots < 1:
        raise ConfigError("n_robots >= 1 violated")
    lo, hi = radius_range
    if not 0 < lo <= hi:
        raise ConfigError("radius_range must satisfy 0 < lo <= hi")
    rng = make_rng(seed)
    mean = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    c = mean + rng.normal(0.0, center_std, size=dim)
    radii = rng.uniform(lo, hi, size=n_robots)
    if dim == 2:
        ang = rng.uniform(0.0, 2.0 * np.pi, size=n_robots)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        dirs = rng.normal(size=(n_robots, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pos = c + radii[:, None] * dirs
    headings = rng.uniform(0.0, 2.0 * np.pi, size=n_robots) if unicycle else None
    return SwarmState(pos, headings=headings)


def near_degenerate_swarm(
    seed, n_robots: int = 5, center_std: float = DEFAULT_CENTER_STD, length: float = 2.0,
    axis: int = 0, unicycle: bool = False, center=None,
) -> SwarmState:
    """Robots spread along one axis with perpendicular jitter of ``1e-3 * D``."""
    rng = make_rng(seed)
    mean = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    c = mean + rng.normal(0.0, center_std, size=2)
    along = np.linspace(-length, length, n_robots)
    jitter = rng.uniform(-1.0, 1.0, size=n_robots) * 1e-3 * length
    pos = np.zeros((n_robots, 2))
    pos[:, axis] = along
    pos[:, 1 - axis] = jitter
    headings = rng.uniform(0.0, 2.0 * np.pi, size=n_robots) if unicycle else None
    return SwarmState(c + pos, headings=headings)


@dataclass(frozen=True)
class ResilienceEvent:
    time: float
    action: str
    index: Optional[int] = None
    position: Optional[tuple] = None
    heading: Optional[float] = None

    def __post_init__(self):
        if self.action not in ("remove", "add"):
            raise ConfigError(f"event action must be 'remove' or 'add', got {self.action!r}")
        if self.action == "remove" and self.index is None:
            raise ConfigError("remove event needs an index")
        if self.action == "add" and self.position is None:
            raise ConfigError("add event needs a position")


def apply_resilience_event(state: SwarmState, ev: ResilienceEvent, field: Optional[SignalField] = None,
                           cfg: Optional[SimConfig] = None) -> SwarmState:
    """Remove or add a robot. Survivors keep positions and headings; in
    unicycle mode every ``delta`` is re-derived against the new guiding field."""
    pos = state.positions
    head = state.headings
    keep = state.delta
    if ev.action == "remove":
        if not 0 <= ev.index < state.n_robots:
            raise ConfigError(f"cannot remove robot {ev.index} from a swarm of {state.n_robots}")
        if state.n_robots == 1:
            raise ConfigError("removing the last robot would leave an empty swarm")
        sel = np.arange(state.n_robots) != ev.index
        pos = pos[sel]
        head = None if head is None else head[sel]
        keep = None if keep is None else keep[sel]
    else:
        p = np.asarray(ev.position, dtype=float).reshape(1, -1)
        if p.shape[1] != state.dim or not np.all(np.isfinite(p)):
            raise ConfigError("added robot position must be finite and match the swarm dimension")
        pos = np.vstack([pos, p])
        if head is not None:
            head = np.append(head, 0.0 if ev.heading is None else float(ev.heading))
            keep = np.append(keep, np.nan)
    new = SwarmState(pos, headings=head, delta=None if head is None else np.zeros(len(head)), t=state.t)
    geom = decompose(new)
    margin = degeneracy_margin(geom)
    if margin <= default_degeneracy_eps(new.n_robots):
        warnings.warn(
            f"swarm geometry is degenerate after {ev.action} at t={ev.time:g} (N={new.n_robots}, margin={margin:.3g})",
            DegeneracyWarning,
            stacklevel=2,
        )
    if head is not None and field is not None and cfg is not None:
        new = rederive_delta(new, field, cfg, keep=keep)
    return new


@dataclass
class Trajectory:
    states: list
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def centroids(self) -> np.ndarray:
        return np.array([s.positions.mean(axis=0) for s in self.states])


def compute_diagnostics(states: Sequence[SwarmState], field: SignalField, cfg: SimConfig) -> dict:
    """Per-sample diagnostics. Deformation is measured against the geometry at
    the start of the current segment (the initial state, or the state right
    after the most recent change in robot count)."""
    eta = cfg.eta_for(field)
    out = {k: np.empty(len(states)) for k in DIAGNOSTIC_COLUMNS}
    ref = None
    for k, st in enumerate(states):
        geom = decompose(st)
        if ref is None or ref.shape != geom.offsets.shape:
            ref = geom.offsets
        rc = geom.centroid
        g = field.gradient(rc)
        out["sigma_rc"][k] = field.value(rc)
        out["grad_norm"][k] = float(np.linalg.norm(g))
        out["dist"][k] = float(np.linalg.norm(rc - field.source))
        out["deformation"][k] = float(np.sqrt(np.einsum("ij,ij->i", geom.offsets - ref, geom.offsets - ref).max()))
        if geom.spread == 0.0:
            out["theta"][k] = math.nan
            out["guiding_defined"][k] = 0.0
            continue
        out["theta"][k] = ascent.angle_between(ascent.l_exact(g, geom).value, g)
        if cfg.direction == "measured":
            l = ascent.l_hat(field.values(st.positions), geom)
        else:
            l = ascent.l_exact(g, geom)
        out["guiding_defined"][k] = 1.0 if l.norm > eta else 0.0
    out["guiding_defined"] = out["guiding_defined"].astype(bool)
    return out


def success_record(times, dist, epsilon: float) -> dict:
    """Earliest sample time after which the centroid stays within ``epsilon`` of the source."""
    inside = np.asarray(dist) < epsilon
    if len(inside) == 0 or not inside[-1]:
        return {"trapped": False, "t0": None}
    outside = np.flatnonzero(~inside)
    k = 0 if len(outside) == 0 else int(outside[-1]) + 1
    return {"trapped": True, "t0": float(times[k])}


def run_scenario(cfg: SimConfig, field: SignalField, swarm0: SwarmState, events: Sequence[ResilienceEvent] = ()):
    """Integrate one scenario; return ``(trajectory, metrics)``.

    Simulation failures do not raise: the partial trajectory is returned and
    the failure is recorded under ``metrics['error']``.
    """
    if swarm0.dim != field.dim:
        raise ConfigError("swarm and field dimensions differ")
    if cfg.mode == "unicycle":
        if swarm0.headings is None:
            raise ConfigError("unicycle mode needs initial headings")
        swarm0 = initialize_unicycle(swarm0, field, cfg)
    elif swarm0.headings is not None:
        swarm0 = SwarmState(swarm0.positions, t=swarm0.t)
    system = SwarmSystem(field, cfg)
    warn_list = []
    margin0 = degeneracy_margin(decompose(swarm0))
    if margin0 <= default_degeneracy_eps(swarm0.n_robots):
        msg = f"initial geometry is degenerate (margin={margin0:.3g})"
        warnings.warn(msg, DegeneracyWarning, stacklevel=2)
        warn_list.append(msg)

    def on_event(state, ev):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            new = apply_resilience_event(state, ev, field, cfg)
        for w in caught:
            warn_list.append(str(w.message))
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        log.info("event at t=%g: %s -> N=%d", ev.time, ev.action, new.n_robots)
        return new

    error = None
    try:
        states = integrate(field, swarm0, cfg, events, on_event, system=system)
    except SimulationError as exc:
        states = exc.samples
        error = str(exc)
    except SwarmSeekError as exc:
        states = []
        error = str(exc)
    traj = Trajectory(states, compute_diagnostics(states, field, cfg) if states else {})
    metrics = summarize(traj, cfg)
    metrics.update(
        {
            "mode": cfg.mode,
            "k_gamma": cfg.k_gamma,
            "u_r": cfg.u_r,
            "n_robots_initial": swarm0.n_robots,
            "n_robots_final": states[-1].n_robots if states else None,
            "initial_margin": margin0,
            "singular_evaluations": system.singular_evals,
            "singular_entries": system.singular_entries,
            "warnings": warn_list,
            "error": error,
        }
    )
    if system.singular_evals:
        log.info("guiding field undefined in %d rhs evaluations; omega_d frozen at 0", system.singular_evals)
    return traj, metrics


def summarize(traj: Trajectory, cfg: SimConfig) -> dict:
    d = traj.diagnostics
    if not traj.states:
        return {"trapped": False, "t0": None, "samples": 0}
    times = traj.times
    rec = success_record(times, d["dist"], cfg.epsilon)
    # a robot-count change moves the centroid discontinuously, so monotonicity
    # of sigma(r_c) is only checked between samples of the same segment
    counts = np.array([st.n_robots for st in traj.states])
    steps = np.diff(d["sigma_rc"])[counts[1:] == counts[:-1]]
    return {
        **rec,
        "samples": len(times),
        "epsilon": cfg.epsilon,
        "t_final": float(times[-1]),
        "final_dist": float(d["dist"][-1]),
        "min_dist": float(d["dist"].min()),
        "max_deformation": float(d["deformation"].max()),
        "max_sigma_decrease": float(max(0.0, -steps.min())) if steps.size else 0.0,
        "guiding_undefined_samples": int((~d["guiding_defined"]).sum()),
    }
