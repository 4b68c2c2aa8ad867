"""Scalar signal models with analytic derivatives and certified bounds.

Two models are provided:

* ``gaussian``: ``sigma(r) = A * exp(-|r - r*|^2 / (2 s^2))``, globally defined,
  positive and decaying.
* ``quadratic``: ``sigma(r) = c - (r - r*)^T Q (r - r*)`` with ``Q`` symmetric
  positive definite. Its derivatives are unbounded on the whole space, so
  bounds are only certified on the ball of radius ``operating_radius``
  around the source.

Hessian norms are spectral norms throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import ConfigError

KINDS = ("gaussian", "quadratic")


@dataclass(frozen=True)
class SignalField:
    kind: str = "gaussian"
    amplitude: float = 1.0
    scale: float = 10.0
    offset: float = 0.0
    source: np.ndarray = dc_field(default_factory=lambda: np.zeros(2))
    curvature: Optional[np.ndarray] = None
    operating_radius: Optional[float] = None

    def __post_init__(self):
        src = np.array(self.source, dtype=float).reshape(-1)
        if src.size not in (2, 3):
            raise ConfigError(f"field.source must have 2 or 3 coordinates, got {src.size}")
        src.setflags(write=False)
        object.__setattr__(self, "source", src)
        if self.kind not in KINDS:
            raise ConfigError(f"field.kind must be one of {KINDS}, got {self.kind!r}")
        if not self.amplitude > 0:
            raise ConfigError("field.amplitude > 0 violated")
        if self.operating_radius is not None and not self.operating_radius > 0:
            raise ConfigError("field.operating_radius > 0 violated")
        if self.kind == "gaussian":
            if not self.scale > 0:
                raise ConfigError("field.scale > 0 violated")
        else:
            q = np.eye(src.size) if self.curvature is None else np.array(self.curvature, dtype=float)
            if q.shape != (src.size, src.size):
                raise ConfigError(f"field.curvature must be {src.size}x{src.size}")
            if not np.allclose(q, q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(q).max())):
                raise ConfigError("field.curvature must be symmetric")
            if np.linalg.eigvalsh(q).min() <= 0:
                raise ConfigError("field.curvature must be positive definite")
            q.setflags(write=False)
            object.__setattr__(self, "curvature", q)

    @property
    def dim(self) -> int:
        return self.source.size

    def value(self, r) -> float:
        d = np.asarray(r, dtype=float) - self.source
        if self.kind == "gaussian":
            return self.amplitude * math.exp(-(d @ d) / (2.0 * self.scale**2))
        return self.offset - d @ self.curvature @ d

    def values(self, points) -> np.ndarray:
        """Readings at a stack of points, shape ``(N, n) -> (N,)``."""
        d = np.asarray(points, dtype=float) - self.source
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-np.einsum("ij,ij->i", d, d) / (2.0 * self.scale**2))
        return self.offset - np.einsum("ij,jk,ik->i", d, self.curvature, d)

    def gradient(self, r) -> np.ndarray:
        d = np.asarray(r, dtype=float) - self.source
        if self.kind == "gaussian":
            return -self.value(r) / self.scale**2 * d
        return -2.0 * (self.curvature @ d)

    def gradients(self, points) -> np.ndarray:
        d = np.asarray(points, dtype=float) - self.source
        if self.kind == "gaussian":
            return -(self.values(points) / self.scale**2)[:, None] * d
        return -2.0 * d @ self.curvature

    def values_and_gradients(self, points):
        """Readings and gradients at a stack of points in one pass."""
        d = np.asarray(points, dtype=float) - self.source
        if self.kind == "gaussian":
            s2 = self.scale * self.scale
            w = self.amplitude * np.exp((d * d).sum(axis=1) * (-0.5 / s2))
            return w, d * (w * (-1.0 / s2))[:, None]
        qd = d @ self.curvature
        return self.offset - (qd * d).sum(axis=1), -2.0 * qd

    def hessian(self, r) -> np.ndarray:
        d = np.asarray(r, dtype=float) - self.source
        if self.kind == "gaussian":
            s2 = self.scale**2
            return self.value(r) * (np.outer(d, d) / s2**2 - np.eye(d.size) / s2)
        return -2.0 * np.array(self.curvature)


def evaluate(field: SignalField, r):
    """Return ``(sigma, grad, hessian)`` at ``r``."""
    return field.value(r), field.gradient(r), field.hessian(r)


def bounds(field: SignalField):
    """Return ``(K, M)`` with ``|grad| <= K`` and ``|H| <= 2M``.

    Gaussian: the radial slope ``A u exp(-u^2/2) / s`` peaks at ``u = 1``, giving
    ``K = A / (s sqrt(e))``; the Hessian eigenvalues are ``-sigma/s^2`` and
    ``sigma (u^2 - 1)/s^2``, both bounded in magnitude by ``A/s^2`` (attained at
    the peak), so ``M = A / (2 s^2)``.

    Quadratic: ``K = 2 |Q| rho`` and ``M = |Q|`` on the operating ball.
    """
    if field.kind == "gaussian":
        return field.amplitude / (field.scale * math.sqrt(math.e)), field.amplitude / (2.0 * field.scale**2)
    if field.operating_radius is None:
        raise ConfigError("quadratic field requires field.operating_radius to certify K and M")
    qn = float(np.linalg.norm(field.curvature, 2))
    return 2.0 * qn * field.operating_radius, qn


def in_operating_region(field: SignalField, r) -> bool:
    if field.operating_radius is None:
        return True
    return float(np.linalg.norm(np.asarray(r, dtype=float) - field.source)) <= field.operating_radius
