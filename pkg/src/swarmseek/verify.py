"""Numerical checks of the convergence inequalities.

Each check returns a :class:`VerificationReport`. Margins are signed so that a
negative worst margin marks a violation; empirical constants (``Omega_d``,
``C_emp``, ``gamma``) are reported in ``details`` and never compared with the
non-constructive constants of the existence proofs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field, replace

import numpy as np

from . import ascent
from .dynamics import SimConfig, SwarmSystem, _rk4_step
from .field import SignalField, bounds
from .harness import make_rng, random_swarm, run_scenario
from .swarm import decompose, default_degeneracy_eps, degeneracy_margin

FD_STEP = 1e-6


@dataclass
class VerificationReport:
    name: str
    samples: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    witness: dict = dc_field(default_factory=dict)
    details: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, margin: float, witness_fn):
        """Count one sample; keep the witness of the smallest margin."""
        self.samples += 1
        if not margin >= 0.0:
            self.violations += 1
        if margin < self.worst_margin or (math.isnan(margin) and not self.witness):
            self.worst_margin = margin
            self.witness = witness_fn()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def random_geometry_sample(rng, n_range=(3, 8), spread_range=(0.5, 3.0), scale_range=(5.0, 20.0),
                           centroid_span=3.0):
    """A gaussian field and a swarm at a random place on it."""
    s = rng.uniform(*scale_range)
    amp = rng.uniform(0.5, 2.0)
    f = SignalField("gaussian", amplitude=amp, scale=s)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    x = rng.normal(size=(n, 2))
    x -= x.mean(axis=0)
    x *= rng.uniform(*spread_range) / np.sqrt((x * x).sum(axis=1).max())
    rc = rng.uniform(-centroid_span * s, centroid_span * s, size=2)
    return f, rc + x


def check_ascent_bound(seed, sample_count: int) -> VerificationReport:
    """``|L_hat - L| <= M D`` on random fields and swarms."""
    rep = VerificationReport("ascent_bound")
    for k in range(sample_count):
        rng = make_rng((seed, k))
        f, pos = random_geometry_sample(rng)
        geom = decompose(pos)
        _, m = bounds(f)
        err = np.linalg.norm(ascent.l_hat(f.values(pos), geom).value - ascent.l_exact(f.gradient(geom.centroid), geom).value)
        rep.record(m * geom.spread - err, lambda: {"seed": [seed, k], "positions": pos.tolist(), "scale": f.scale})
    return rep


def check_alignment(seed, sample_count: int) -> VerificationReport:
    """``L . g / |g|^2`` lies in the eigenvalue bracket of the geometry, is
    positive for spanning geometries, and ``|L| <= |g|``."""
    rep = VerificationReport("ascent_alignment")
    c_emp = 0.0
    for k in range(sample_count):
        rng = make_rng((seed, k))
        f, pos = random_geometry_sample(rng)
        geom = decompose(pos)
        g = f.gradient(geom.centroid)
        if not np.any(g):
            continue
        ratio = ascent.ascent_alignment(g, geom)
        lo, hi = ascent.alignment_bounds(geom)
        slack = 1e-12 * hi
        l_norm = ascent.l_exact(g, geom).norm
        margins = [ratio - lo + slack, hi - ratio + slack, np.linalg.norm(g) * (1 + 1e-12) - l_norm]
        if degeneracy_margin(geom) > default_degeneracy_eps(geom.n_robots):
            margins.append(ratio)
            c_emp = max(c_emp, 1.0 / ratio)
        rep.record(min(margins), lambda: {"seed": [seed, k], "positions": pos.tolist(), "ratio": ratio, "bracket": [lo, hi]})
    rep.details["C_emp"] = c_emp
    return rep


def check_deformation(trajectories, u_r: float, k_gamma: float, name="deformation_bound") -> VerificationReport:
    """``max_i |x_i(t) - x_i(0)| <= 2 pi u_r / k_gamma``."""
    rep = VerificationReport(name, details={"bound": 2 * math.pi * u_r / k_gamma})
    bound = 2 * math.pi * u_r / k_gamma
    worst = 0.0
    for run_id, traj in trajectories:
        dev = traj.diagnostics["deformation"]
        for j, v in enumerate(dev):
            rep.record(bound + 1e-6 - v, lambda: {"run": run_id, "t": float(traj.states[j].t)})
        worst = max(worst, float(dev.max()))
    rep.details["max_deformation"] = worst
    return rep


def heading_decay_errors(traj, k_gamma: float, t_max: float):
    """Relative errors of pairwise heading differences against ``d(0) exp(-k t)``."""
    s0 = traj.states[0]
    h0 = s0.headings
    n = len(h0)
    errs = []
    for st in traj.states:
        if st.t > t_max + 1e-12 or st.n_robots != n:
            break
        decay = math.exp(-k_gamma * st.t)
        for i in range(n):
            for j in range(i + 1, n):
                ref = (h0[j] - h0[i]) * decay
                if abs(h0[j] - h0[i]) < 1e-9:
                    continue
                got = st.headings[j] - st.headings[i]
                errs.append((abs(got - ref) / abs(ref), st.t, i, j))
    return errs


def check_heading_decay(trajectories, k_gamma: float, tol: float = 1e-6) -> VerificationReport:
    rep = VerificationReport("heading_decay", details={"tolerance": tol})
    for run_id, traj in trajectories:
        for err, t, i, j in heading_decay_errors(traj, k_gamma, 10.0 / k_gamma):
            rep.record(tol - err, lambda: {"run": run_id, "t": t, "pair": [i, j], "rel_error": err})
    return rep


def omega_d_bound(field: SignalField, state, u_r: float) -> float:
    """Upper bound ``|Sdot| / |S|`` with ``|Sdot| <= N (2 M u_r M1^2 + 4 u_r K M1)``."""
    geom = decompose(state)
    k_bound, m_bound = bounds(field)
    s = (geom.offsets @ field.gradient(geom.centroid)) @ geom.offsets
    m1 = geom.spread
    return geom.n_robots * (2 * m_bound * u_r * m1**2 + 4 * u_r * k_bound * m1) / float(np.linalg.norm(s))


def check_omega_bound(trajectories, field: SignalField, u_r: float, grad_eps: float):
    """``|omega_d|`` stays bounded where ``|grad sigma(r_c)| >= grad_eps``; returns
    the report and the per-run empirical ``Omega_d``."""
    rep = VerificationReport("omega_d_bound", details={"grad_eps": grad_eps})
    omegas = {}
    for run_id, traj in trajectories:
        om = 0.0
        for j, st in enumerate(traj.states):
            if traj.diagnostics["grad_norm"][j] < grad_eps:
                continue
            vel = u_r * ascent.heading_vectors(st.headings)
            wd = ascent.omega_d_analytic(field, st, vel, measured=False, eta_l=0.0)
            om = max(om, abs(wd))
            b = omega_d_bound(field, st, u_r)
            rep.record(b - abs(wd), lambda: {"run": run_id, "t": float(st.t), "omega_d": wd, "bound": b})
        omegas[run_id] = om
    rep.details["Omega_d"] = max(omegas.values()) if omegas else 0.0
    rep.details["Omega_d_per_run"] = omegas
    return rep, omegas


def check_attractive_interval(trajectories, k_gamma: float, grad_eps: float, omegas: dict) -> VerificationReport:
    """Once every ``|delta_i| < gamma`` with ``gamma = 2 Omega_d / k_gamma``, it stays
    so while the gradient at the centroid exceeds ``grad_eps``."""
    rep = VerificationReport("attractive_interval", details={"gamma": {}, "not_applicable": []})
    for run_id, traj in trajectories:
        gamma = 2.0 * omegas.get(run_id, 0.0) / k_gamma
        if not 0.0 < gamma < math.pi / 2:
            rep.details["not_applicable"].append(run_id)
            continue
        rep.details["gamma"][run_id] = gamma
        grad = traj.diagnostics["grad_norm"]
        inside = False
        for j, st in enumerate(traj.states):
            if grad[j] <= grad_eps:
                inside = False
                continue
            worst = float(np.abs(st.delta).max())
            if not inside:
                inside = worst < gamma
                continue
            rep.record(gamma - worst, lambda: {"run": run_id, "t": float(st.t), "max_abs_delta": worst, "gamma": gamma})
    return rep


def check_lyapunov(trajectories, slack: float = 1e-9) -> VerificationReport:
    """``sigma(r_c)`` non-decreasing and geometry rigid along free-mode runs."""
    rep = VerificationReport("free_lyapunov", details={"slack": slack})
    for run_id, traj in trajectories:
        sig = traj.diagnostics["sigma_rc"]
        x0 = decompose(traj.states[0]).offsets
        d0 = decompose(traj.states[0]).spread
        for j in range(1, len(sig)):
            rigid = 1e-9 * d0 - float(np.abs(decompose(traj.states[j]).offsets - x0).max())
            rep.record(min(sig[j] - sig[j - 1] + slack, rigid), lambda: {"run": run_id, "t": float(traj.states[j].t)})
    return rep


def fd_omega_d(system: SwarmSystem, state, measured: bool, h: float = FD_STEP) -> float:
    """Central difference in time of the guiding-field angle, stepping the
    integrated dynamics ``h`` forward and backward with classical RK4."""
    y = system.pack(state)
    fwd = system.unpack(_rk4_step(system, state.t, y, h), state.t + h)
    bwd = system.unpack(_rk4_step(system, state.t, y, -h), state.t - h)
    a1 = ascent.direction_angle(system.field, fwd.positions, measured)
    a0 = ascent.direction_angle(system.field, bwd.positions, measured)
    return ascent.wrap(a1 - a0) / (2 * h)


def check_omega_consistency(trajectories, field: SignalField, cfg: SimConfig, grad_eps: float,
                            tol: float = 1e-5, max_points=None) -> VerificationReport:
    """Analytic ``omega_d`` against a finite difference of the guiding angle."""
    measured = cfg.direction == "measured"
    rep = VerificationReport("omega_d_consistency", details={"tolerance": tol, "direction": cfg.direction})
    system = SwarmSystem(field, cfg)
    for run_id, traj in trajectories:
        for j, st in enumerate(traj.states):
            if max_points is not None and rep.samples >= max_points:
                return rep
            if traj.diagnostics["grad_norm"][j] < grad_eps or not traj.diagnostics["guiding_defined"][j]:
                continue
            vel = cfg.u_r * ascent.heading_vectors(st.headings)
            wa = ascent.omega_d_analytic(field, st, vel, measured=measured, eta_l=0.0)
            wf = fd_omega_d(system, st, measured)
            rep.record(tol - abs(wa - wf), lambda: {"run": run_id, "t": float(st.t), "analytic": wa, "fd": wf})
    return rep


def unicycle_runs(seed, runs: int, field: SignalField, cfg: SimConfig, center_std: float = 10.0):
    out = []
    for i in range(runs):
        s0 = random_swarm((seed, i), center_std=center_std, unicycle=True, center=field.source)
        traj, metrics = run_scenario(cfg, field, s0)
        out.append((i, traj))
    return out


def verify_suite(seed: int, sample_count: int, runs: int = 2, t_end: float = 60.0):
    """Run every check; ``sample_count`` sets the static sample size, ``runs`` the
    number of integrated scenarios per dynamic check."""
    if sample_count < 1:
        raise ValueError("sample_count >= 1 violated")
    field = SignalField("gaussian", amplitude=1.0, scale=10.0)
    k_bound, _ = bounds(field)
    grad_eps = 0.1 * k_bound
    reports = [check_ascent_bound(seed, sample_count), check_alignment(seed, sample_count)]

    theory = SimConfig(mode="unicycle", u_r=1.0, k_gamma=10.0, t_end=t_end, sample_dt=0.05,
                       rtol=1e-9, atol=1e-11, direction="exact")
    slow = replace(theory, k_gamma=1.0)
    fast_runs = unicycle_runs(seed, runs, field, theory)
    slow_runs = unicycle_runs(seed, runs, field, slow)
    deform = check_deformation(slow_runs, 1.0, 1.0, "deformation_bound_k1")
    deform_fast = check_deformation(fast_runs, 1.0, 10.0, "deformation_bound_k10")
    reports += [deform, deform_fast]
    decay = _merge("heading_decay", [check_heading_decay(slow_runs, 1.0), check_heading_decay(fast_runs, 10.0)])
    reports.append(decay)
    om_rep, omegas = check_omega_bound(fast_runs, field, 1.0, grad_eps)
    reports.append(om_rep)
    reports.append(check_attractive_interval(fast_runs, theory.k_gamma, grad_eps, omegas))

    free_field = SignalField("gaussian", amplitude=100.0, scale=10.0)
    free_cfg = SimConfig(mode="free", t_end=t_end, sample_dt=0.5, direction="exact")
    free_runs = []
    for i in range(runs):
        traj, _ = run_scenario(free_cfg, free_field, random_swarm((seed, 1000 + i), center_std=10.0))
        free_runs.append((i, traj))
    reports.append(check_lyapunov(free_runs))

    measured_cfg = SimConfig(mode="unicycle", u_r=1.0, k_gamma=1.0, t_end=t_end, sample_dt=0.5)
    m_runs = unicycle_runs(seed, runs, field, measured_cfg)
    reports.append(check_omega_consistency(m_runs, field, measured_cfg, grad_eps, max_points=sample_count))
    return reports


def _merge(name, reps):
    out = VerificationReport(name, details={"parts": [r.details for r in reps]})
    for r in reps:
        out.samples += r.samples
        out.violations += r.violations
        if r.worst_margin < out.worst_margin:
            out.worst_margin = r.worst_margin
            out.witness = r.witness
    return out
