"""Ascending directions, guiding fields and their angular velocity.

``l_hat`` uses scalar readings only and is what a real swarm can compute;
``l_exact`` needs the gradient at the centroid and is the direction the
convergence results are stated for. Both are normalized by ``N D^2``.

The guiding direction is the unit vector along an ascending direction. Its
angular velocity ``omega_d`` does not depend on the normalization (positive
rescaling of a vector leaves its direction unchanged), so it is computed from
the unnormalized sums ``S = sum_i w_i x_i``:

    omega_d = (S x dS/dt) / |S|^2

where ``x`` is the planar cross product. This equals ``dm/dt . E m`` with
``E`` the quarter-turn rotation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSwarmError, SingularityError
from .field import bounds
from .swarm import Geometry, SwarmState, decompose

# counter-clockwise quarter turn
E = np.array([[0.0, -1.0], [1.0, 0.0]])

DEFAULT_ETA_REL = 1e-9


@dataclass(frozen=True)
class AscentVector:
    value: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value))


@dataclass(frozen=True)
class GuidingDirection:
    m: np.ndarray
    defined: bool

    @property
    def angle(self) -> float:
        return math.atan2(self.m[1], self.m[0]) if self.defined else math.nan


def _require_spread(geom: Geometry):
    if geom.spread == 0.0:
        raise DegenerateSwarmError("swarm spread D is zero; all robots coincide")


def l_hat(readings, geom: Geometry) -> AscentVector:
    """Measured ascending direction from the field readings at the robots."""
    _require_spread(geom)
    w = np.asarray(readings, dtype=float)
    n = geom.n_robots
    return AscentVector(w @ geom.offsets / (n * geom.spread**2))


def l_exact(grad, geom: Geometry) -> AscentVector:
    """Ascending direction built from the true gradient at the centroid."""
    _require_spread(geom)
    n = geom.n_robots
    proj = geom.offsets @ np.asarray(grad, dtype=float)
    return AscentVector(proj @ geom.offsets / (n * geom.spread**2))


def guiding_field(l: AscentVector, eta_l: float) -> GuidingDirection:
    nrm = l.norm
    if nrm > eta_l:
        return GuidingDirection(l.value / nrm, True)
    return GuidingDirection(np.full(l.value.shape, np.nan), False)


def cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def wrapped_angle(m_i, m_d) -> float:
    """Directed angle from ``m_d`` to ``m_i`` in ``(-pi, pi]``; antipodal gives ``+pi``."""
    ang = math.atan2(cross2(m_d, m_i), float(np.dot(m_d, m_i)))
    return math.pi if ang <= -math.pi else ang


def wrap(angle: float) -> float:
    """Wrap a scalar angle into ``(-pi, pi]``."""
    a = math.remainder(angle, 2.0 * math.pi)
    return math.pi if a <= -math.pi else a


def heading_vectors(headings) -> np.ndarray:
    h = np.asarray(headings, dtype=float)
    return np.stack([np.cos(h), np.sin(h)], axis=-1)


def _sum_exact(grad, x):
    return (x @ grad) @ x


def _sum_exact_rate(grad, hess, x, v):
    """Time derivative of ``sum_i (g . x_i) x_i`` with ``g = grad(r_c)``."""
    vc = v.mean(axis=0)
    xd = v - vc
    gd = hess @ vc
    return (x @ gd + xd @ grad) @ x + (x @ grad) @ xd


def _sum_measured_rate(readings, grads, x, v):
    """Time derivative of ``sum_i sigma(r_i) x_i``."""
    xd = v - v.sum(axis=0) / v.shape[0]
    rd = (grads * v).sum(axis=1)
    return rd @ x + readings @ xd


def omega_d_analytic(field, state, velocities, measured: bool = False, eta_l=None) -> float:
    """Angular velocity of the guiding field along the motion ``velocities``.

    With ``measured=False`` this is the rate of ``m_d = L/|L|``; with
    ``measured=True`` the rate of ``m_hat_d = L_hat/|L_hat|``. The field model
    supplies the derivatives needed by the chain rule.
    """
    pos = state.positions if isinstance(state, SwarmState) else np.asarray(state, dtype=float)
    if pos.shape[1] != 2:
        raise ValueError("guiding fields are planar")
    v = np.asarray(velocities, dtype=float).reshape(pos.shape)
    geom = decompose(pos)
    _require_spread(geom)
    x = geom.offsets
    if measured:
        w = field.values(pos)
        s = w @ x
        sd = _sum_measured_rate(w, field.gradients(pos), x, v)
    else:
        g = field.gradient(geom.centroid)
        s = _sum_exact(g, x)
        sd = _sum_exact_rate(g, field.hessian(geom.centroid), x, v)
    if eta_l is None:
        eta_l = DEFAULT_ETA_REL * bounds(field)[0]
    # guiding_field works on the normalized direction
    norm_l = float(np.linalg.norm(s)) / (geom.n_robots * geom.spread**2)
    if not norm_l > eta_l:
        raise SingularityError("guiding field undefined: |L| <= eta_L")
    return cross2(s, sd) / float(s @ s)


def direction_angle(field, positions, measured: bool) -> float:
    """Angle of the (unnormalized) ascending direction at ``positions``."""
    pos = np.asarray(positions, dtype=float)
    x = pos - pos.mean(axis=0)
    if measured:
        s = field.values(pos) @ x
    else:
        s = _sum_exact(field.gradient(pos.mean(axis=0)), x)
    return math.atan2(s[1], s[0])


def omega_d_differenced(field, positions, velocities, dt: float, measured: bool = True) -> float:
    """Guiding-field rate from two readings ``dt`` apart (the current position
    and the one ``dt`` earlier along the current velocities)."""
    pos = np.asarray(positions, dtype=float)
    prev = pos - dt * np.asarray(velocities, dtype=float)
    return wrap(direction_angle(field, pos, measured) - direction_angle(field, prev, measured)) / dt


def ascent_alignment(grad, geom: Geometry) -> float:
    """``(L . g) / |g|^2``; bounded by the extreme eigenvalues of ``X^T X / (N D^2)``."""
    g = np.asarray(grad, dtype=float)
    return float(l_exact(g, geom).value @ g / (g @ g))


def alignment_bounds(geom: Geometry):
    """Eigenvalue bracket ``(lo, hi)`` of ``X^T X / (N D^2)``."""
    gram = geom.offsets.T @ geom.offsets / (geom.n_robots * geom.spread**2)
    ev = np.linalg.eigvalsh(gram)
    return float(ev[0]), float(ev[-1])


def angle_between(a, b) -> float:
    """Unsigned angle in ``[0, pi]``; ``nan`` if either vector vanishes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return math.nan
    ua, ub = a / na, b / nb
    return 2.0 * math.atan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub))
