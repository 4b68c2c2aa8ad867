"""Free and constant-speed unicycle swarm dynamics plus the time integrator.

State vectors handed to the integrator are flat:

* free mode: ``R`` (``N*n`` entries);
* unicycle mode: ``[R (2N), alpha (N), delta (N)]``.

The robot count is recovered from the vector length, so the same right-hand
side keeps working after robots leave or join the swarm.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import RK45

from . import ascent
from .errors import ConfigError, SimulationError, SingularityError, StiffnessError
from .field import SignalField, bounds
from .swarm import SwarmState, decompose

log = logging.getLogger(__name__)

MODES = ("free", "unicycle")
INTEGRATORS = ("dopri45", "rk4")
DIRECTIONS = ("measured", "exact")
OMEGA_D_MODES = ("analytic", "measured")

# spacing of the two readings used to difference the guiding-field angle
OMEGA_D_PROBE_DT = 1e-6


@dataclass(frozen=True)
class SimConfig:
    mode: str = "free"
    u_r: float = 1.0
    k_gamma: float = 1.0
    rtol: float = 1e-8
    atol: float = 1e-10
    t_end: float = 100.0
    sample_dt: float = 0.1
    seed: int = 0
    epsilon: float = 0.5
    integrator: str = "dopri45"
    h_fixed: float = 0.01
    h_min: float = 1e-12
    direction: str = "measured"
    omega_d_mode: str = "analytic"
    eta_l: Optional[float] = None

    def __post_init__(self):
        checks = [
            (self.mode in MODES, f"mode in {MODES}"),
            (self.integrator in INTEGRATORS, f"integrator in {INTEGRATORS}"),
            (self.direction in DIRECTIONS, f"direction in {DIRECTIONS}"),
            (self.omega_d_mode in OMEGA_D_MODES, f"omega_d_mode in {OMEGA_D_MODES}"),
            (self.u_r > 0, "u_r > 0"),
            (self.k_gamma > 0, "k_gamma > 0"),
            (self.rtol > 0, "rtol > 0"),
            (self.atol > 0, "atol > 0"),
            (self.t_end > 0, "t_end > 0"),
            (self.sample_dt > 0, "sample_dt > 0"),
            (self.epsilon > 0, "epsilon > 0"),
            (self.h_fixed > 0, "h_fixed > 0"),
            (self.h_min > 0, "h_min > 0"),
            (self.eta_l is None or self.eta_l >= 0, "eta_l >= 0"),
        ]
        for ok, rule in checks:
            if not ok:
                raise ConfigError(f"sim config violates {rule}")

    def eta_for(self, field: SignalField) -> float:
        if self.eta_l is not None:
            return self.eta_l
        return ascent.DEFAULT_ETA_REL * bounds(field)[0]

    def sample_times(self) -> np.ndarray:
        n = int(math.floor(self.t_end / self.sample_dt + 1e-9))
        return np.minimum(np.arange(n + 1) * self.sample_dt, self.t_end)


def free_rhs(state: SwarmState, direction: ascent.AscentVector) -> np.ndarray:
    """Every robot moves with the shared ascending direction."""
    return np.tile(direction.value, (state.n_robots, 1))


def control_law(delta, k_gamma: float) -> np.ndarray:
    return -k_gamma * np.asarray(delta, dtype=float)


def unicycle_rhs(state: SwarmState, field: SignalField, cfg: SimConfig, omega_d: Optional[float] = None):
    """Return ``(r_dot, alpha_dot, delta_dot)`` for the augmented unicycle system.

    ``omega_d`` may be supplied directly; otherwise it is obtained from the
    field per ``cfg.omega_d_mode``, and frozen at zero where the guiding field
    is undefined.
    """
    vel = cfg.u_r * ascent.heading_vectors(state.headings)
    if omega_d is None:
        omega_d, _ = _omega_d(field, state.positions, vel, cfg, cfg.eta_for(field))
    w = control_law(state.delta, cfg.k_gamma)
    return vel, w, w - omega_d


def _omega_d(field, pos, vel, cfg, eta):
    """Guiding-field rate and whether the field was defined, for robot velocities ``vel``.

    Pass ``eta=0`` to evaluate the rate wherever the ascending direction is
    nonzero, which keeps the right-hand side smooth up to the source.
    """
    n = pos.shape[0]
    rc = pos.sum(axis=0) / n
    x = pos - rc
    d2 = float((x * x).sum(axis=1).max())
    measured = cfg.direction == "measured"
    if measured:
        w, grads = field.values_and_gradients(pos)
        s = w @ x
    else:
        g = field.gradient(rc)
        s = (x @ g) @ x
    if d2 == 0.0 or not math.sqrt(float(s @ s)) / (n * d2) > eta:
        return 0.0, False
    if cfg.omega_d_mode == "measured":
        return ascent.omega_d_differenced(field, pos, vel, OMEGA_D_PROBE_DT, measured), True
    if measured:
        sd = ascent._sum_measured_rate(w, grads, x, vel)
    else:
        sd = ascent._sum_exact_rate(g, field.hessian(rc), x, vel)
    return ascent.cross2(s, sd) / float(s @ s), True


def guiding_direction(field: SignalField, positions, cfg: SimConfig) -> ascent.GuidingDirection:
    """Guiding direction of the swarm at ``positions`` for the configured source of ascent."""
    geom = decompose(np.asarray(positions, dtype=float))
    if cfg.direction == "measured":
        l = ascent.l_hat(field.values(geom.centroid + geom.offsets), geom)
    else:
        l = ascent.l_exact(field.gradient(geom.centroid), geom)
    return ascent.guiding_field(l, cfg.eta_for(field))


def ascent_direction(field: SignalField, positions, cfg: SimConfig) -> ascent.AscentVector:
    geom = decompose(np.asarray(positions, dtype=float))
    if cfg.direction == "measured":
        return ascent.l_hat(field.values(np.asarray(positions, dtype=float)), geom)
    return ascent.l_exact(field.gradient(geom.centroid), geom)


def initialize_unicycle(state: SwarmState, field: SignalField, cfg: SimConfig) -> SwarmState:
    """Set ``delta(0)`` to the wrapped heading error and lift the headings so
    that ``alpha_i - delta_i`` is the same angle for every robot.

    The lift only adds multiples of ``2 pi`` to the headings.
    """
    gd = guiding_direction(field, state.positions, cfg)
    if not gd.defined:
        raise SingularityError("initial state lies in the singular set of the guiding field (|L| <= eta_L)")
    mi = ascent.heading_vectors(state.headings)
    delta = np.array([ascent.wrapped_angle(m, gd.m) for m in mi])
    return replace(state, headings=gd.angle + delta, delta=delta)


def common_reference(headings, delta, psi: float) -> float:
    """Lift of the guiding angle ``psi`` nearest to the shared reference
    ``alpha_i - delta_i`` (the mean over robots with a finite ``delta``)."""
    h = np.asarray(headings, dtype=float)
    d = np.asarray(delta, dtype=float)
    ok = np.isfinite(d)
    if not ok.any():
        return psi
    ref = float(np.mean(h[ok] - d[ok]))
    return psi + 2.0 * math.pi * round((ref - psi) / (2.0 * math.pi))


def rederive_delta(state: SwarmState, field: SignalField, cfg: SimConfig, keep: Optional[np.ndarray] = None) -> SwarmState:
    """Recompute ``delta`` against the current guiding field.

    Robots with a previous value (``keep`` finite) keep their headings and get
    ``delta_i = alpha_i - c`` where ``c`` is the lift of the guiding angle
    closest to their old shared reference; pairwise heading differences are
    therefore preserved. New robots (``keep`` NaN) start from the wrapped
    heading error and have their heading lifted onto the same reference.
    If the guiding field is undefined, previous values are kept and new
    robots start at zero.
    """
    n = state.n_robots
    keep = np.full(n, np.nan) if keep is None else np.asarray(keep, dtype=float)
    gd = guiding_direction(field, state.positions, cfg)
    if not gd.defined:
        log.warning("guiding field undefined at t=%.6g; keeping previous heading errors", state.t)
        return replace(state, delta=np.nan_to_num(keep))
    c = common_reference(state.headings, keep, gd.angle)
    head = np.array(state.headings, dtype=float)
    delta = head - c
    fresh = ~np.isfinite(keep)
    for i in np.flatnonzero(fresh):
        delta[i] = ascent.wrapped_angle(ascent.heading_vectors(head[i]), gd.m)
        head[i] = c + delta[i]
    return replace(state, headings=head, delta=delta)


class SwarmSystem:
    """Flat-vector right-hand side for one field and configuration.

    In unicycle mode the system carries a latch for the singular set of the
    guiding field. The latch only changes between integrator steps (see
    ``switch``), so the right-hand side is smooth within every step. While
    latched, ``omega_d`` is frozen at zero. On leaving the singular set the
    heading errors are re-synchronized with the guiding field by a common
    shift of ``2 pi`` multiples plus the rotation missed while frozen.

    ``singular_evals`` counts right-hand-side evaluations with ``omega_d``
    frozen and ``singular_entries`` counts latch activations.
    """

    def __init__(self, field: SignalField, cfg: SimConfig):
        self.field = field
        self.cfg = cfg
        self.eta = cfg.eta_for(field)
        self.singular_evals = 0
        self.singular_entries = 0
        self.latched = False
        if cfg.mode == "unicycle" and field.dim != 2:
            raise ConfigError("unicycle mode requires a planar field")

    def pack(self, state: SwarmState) -> np.ndarray:
        if self.cfg.mode == "free":
            return state.positions.reshape(-1).copy()
        return np.concatenate([state.positions.reshape(-1), state.headings, state.delta])

    def unpack(self, y, t: float) -> SwarmState:
        y = np.asarray(y, dtype=float)
        if self.cfg.mode == "free":
            return SwarmState(y.reshape(-1, self.field.dim), t=float(t))
        n = y.size // 4
        return SwarmState(y[: 2 * n].reshape(n, 2), y[2 * n : 3 * n], y[3 * n :], t=float(t))

    def __call__(self, t, y):
        if self.cfg.mode == "free":
            pos = y.reshape(-1, self.field.dim)
            return np.tile(ascent_direction(self.field, pos, self.cfg).value, pos.shape[0])
        n = y.size // 4
        pos = y[: 2 * n].reshape(n, 2)
        alpha = y[2 * n : 3 * n]
        delta = y[3 * n :]
        out = np.empty_like(y)
        vel = out[: 2 * n].reshape(n, 2)
        vel[:, 0] = np.cos(alpha)
        vel[:, 1] = np.sin(alpha)
        vel *= self.cfg.u_r
        if self.latched:
            wd, defined = 0.0, False
        else:
            # the eta_L threshold acts through the latch only
            wd, defined = _omega_d(self.field, pos, vel, self.cfg, 0.0)
        if not defined:
            self.singular_evals += 1
        w = -self.cfg.k_gamma * delta
        out[2 * n : 3 * n] = w
        out[3 * n :] = w - wd
        return out

    def switch(self, t, y):
        """Update the singular-set latch after an accepted step.

        Returns ``None`` if nothing changed, otherwise the (possibly modified)
        state from which integration must restart.
        """
        if self.cfg.mode != "unicycle":
            return None
        n = y.size // 4
        gd = guiding_direction(self.field, y[: 2 * n].reshape(n, 2), self.cfg)
        if not self.latched:
            if gd.defined:
                return None
            self.latched = True
            self.singular_entries += 1
            log.info("guiding field undefined at t=%.9g; omega_d frozen", t)
            return y
        if not gd.defined:
            return None
        self.latched = False
        alpha = y[2 * n : 3 * n]
        c = common_reference(alpha, y[3 * n :], gd.angle)
        y = y.copy()
        y[3 * n :] = alpha - c
        log.info("guiding field defined again at t=%.9g; heading errors re-synchronized", t)
        return y


def solve(fun, t0: float, y0, t1: float, sample_times, cfg: SimConfig):
    """Integrate ``y' = fun(t, y)`` on ``[t0, t1]``; return ``(ys, y_end)`` with
    ``ys[k]`` the solution at ``sample_times[k]`` (all within ``[t0, t1]``)."""
    sample_times = np.asarray(sample_times, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if t1 <= t0:
        return [y0.copy() for _ in sample_times], y0.copy()
    if cfg.integrator == "rk4":
        return _solve_rk4(fun, t0, y0, t1, sample_times, cfg.h_fixed)
    out = []
    k = 0
    while k < len(sample_times) and sample_times[k] <= t0:
        out.append(y0.copy())
        k += 1
    switch = getattr(fun, "switch", None)
    solver = RK45(fun, t0, y0, t1, rtol=cfg.rtol, atol=cfg.atol)
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integrator failed at t={solver.t:.9g}: {msg}", samples=out, t=solver.t)
        if solver.status == "running" and solver.step_size is not None and solver.step_size < cfg.h_min:
            raise StiffnessError(
                f"step size {solver.step_size:.3g} below h_min={cfg.h_min:.3g} at t={solver.t:.9g}",
                samples=out,
                t=solver.t,
            )
        if not np.all(np.isfinite(solver.y)):
            raise SimulationError(f"non-finite state at t={solver.t:.9g}", samples=out, t=solver.t)
        at_sample = False
        if k < len(sample_times) and sample_times[k] <= solver.t:
            dense = solver.dense_output()
            while k < len(sample_times) and sample_times[k] <= solver.t:
                tk = sample_times[k]
                at_sample = tk == solver.t
                out.append(solver.y.copy() if at_sample else dense(tk))
                k += 1
        if switch is not None and solver.status == "running":
            y_new = switch(solver.t, solver.y)
            if y_new is not None:
                if at_sample:
                    out[-1] = y_new.copy()
                solver = RK45(fun, solver.t, y_new, t1, rtol=cfg.rtol, atol=cfg.atol)
    return out, solver.y.copy()


def _rk4_step(fun, t, y, h):
    k1 = fun(t, y)
    k2 = fun(t + h / 2, y + h / 2 * k1)
    k3 = fun(t + h / 2, y + h / 2 * k2)
    k4 = fun(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _solve_rk4(fun, t0, y0, t1, sample_times, h):
    # every sample time and the end point are step boundaries
    switch = getattr(fun, "switch", None)
    stops = sorted({float(t) for t in sample_times if t0 < t <= t1} | {float(t1)})
    out = [y0.copy() for t in sample_times if t <= t0]
    t, y = t0, y0.copy()
    for stop in stops:
        n = max(1, math.ceil((stop - t) / h - 1e-9))
        hs = (stop - t) / n
        for i in range(n):
            y = _rk4_step(fun, t + i * hs, y, hs)
            if not np.all(np.isfinite(y)):
                raise SimulationError(f"non-finite state at t={t + (i + 1) * hs:.9g}", samples=out, t=t)
            if switch is not None:
                y_new = switch(t + (i + 1) * hs, y)
                if y_new is not None:
                    y = y_new
        t = stop
        if stop in sample_times:
            out.append(y.copy())
    return out, y


def integrate(
    field: SignalField,
    state0: SwarmState,
    cfg: SimConfig,
    events: Sequence = (),
    on_event: Optional[Callable] = None,
    system: Optional[SwarmSystem] = None,
):
    """Integrate from ``state0`` over ``[0, t_end]``, returning states at the sample grid.

    ``events`` are objects with a ``time`` attribute; at each event time the
    integration stops, ``on_event(state, event)`` produces the new state and
    integration restarts from it. A sample falling exactly on an event time
    records the post-event state.
    """
    system = system or SwarmSystem(field, cfg)
    times = cfg.sample_times()
    evs = sorted(events, key=lambda e: e.time)
    for ev in evs:
        if not 0.0 <= ev.time <= cfg.t_end:
            raise ConfigError(f"event time {ev.time} outside [0, t_end]")
    samples = []
    state = state0
    t = 0.0
    i_ev = 0
    while True:
        while i_ev < len(evs) and evs[i_ev].time <= t:
            state = on_event(state, evs[i_ev])
            i_ev += 1
        stop = evs[i_ev].time if i_ev < len(evs) else cfg.t_end
        last = i_ev >= len(evs)
        mask = (times >= t) & ((times <= stop) if last else (times < stop))
        seg_times = times[mask]
        try:
            ys, y_end = solve(system, t, system.pack(state), stop, seg_times, cfg)
        except SimulationError as exc:
            partial = exc.samples or []
            samples.extend(system.unpack(y, tk) for y, tk in zip(partial, seg_times))
            exc.samples = samples
            raise
        samples.extend(system.unpack(y, tk) for y, tk in zip(ys, seg_times))
        state = system.unpack(y_end, stop)
        t = stop
        if last:
            break
    return samples
