"""Swarm state, centroid/geometry decomposition and non-degeneracy."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class SwarmState:
    """Positions of ``N`` robots in ``R^n``; unicycle runs also carry headings
    and the unwrapped (augmented) heading errors ``delta``."""

    positions: np.ndarray
    headings: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] not in (2, 3):
            raise ValueError(f"positions must have shape (N, 2) or (N, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "positions", pos)
        for name in ("headings", "delta"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr, dtype=float).reshape(-1)
            if arr.size != pos.shape[0]:
                raise ValueError(f"{name} must have one entry per robot")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)

    @property
    def n_robots(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def is_unicycle(self) -> bool:
        return self.headings is not None

    def stacked(self) -> np.ndarray:
        """The stacked position vector ``R`` in ``R^{nN}``."""
        return self.positions.reshape(-1).copy()


@dataclass(frozen=True)
class Geometry:
    centroid: np.ndarray
    offsets: np.ndarray
    spread: float

    @property
    def n_robots(self) -> int:
        return self.offsets.shape[0]


def decompose(state) -> Geometry:
    """Split positions into centroid plus offsets. Accepts a ``SwarmState`` or an ``(N, n)`` array."""
    pos = state.positions if isinstance(state, SwarmState) else np.asarray(state, dtype=float)
    rc = pos.mean(axis=0)
    x = pos - rc
    spread = float(np.sqrt(np.einsum("ij,ij->i", x, x).max()))
    return Geometry(rc, x, spread)


def default_degeneracy_eps(n_robots: int) -> float:
    return 1e-6 * math.sqrt(n_robots)


def degeneracy_margin(geom: Geometry) -> float:
    """Smallest singular value of the offsets normalized by the spread.

    Zero when the offsets cannot span the space (fewer robots than dimensions,
    coincident robots, exact rank deficiency up to round-off).
    """
    n_rob, dim = geom.offsets.shape
    if geom.spread == 0.0 or n_rob < dim:
        return 0.0
    s = np.linalg.svd(geom.offsets / geom.spread, compute_uv=False)
    # numpy's matrix_rank cut-off: anything below is numerical noise
    if s[-1] <= s[0] * max(n_rob, dim) * np.finfo(float).eps:
        return 0.0
    return float(s[-1])


def is_degenerate(geom: Geometry, eps: Optional[float] = None) -> bool:
    if eps is None:
        eps = default_degeneracy_eps(geom.n_robots)
    return degeneracy_margin(geom) <= eps
