"""Known equilibria and the deviation bookkeeping built on them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import BX, ENE, NVAR, RHO, Grid, interior_view, prim_to_cons

ScalarProfile = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
VectorProfile = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]


def _zero_field(x, y, z):
    return (np.zeros_like(x), np.zeros_like(x), np.zeros_like(x))


@dataclass(frozen=True)
class EquilibriumProfile:
    """Static equilibrium given by analytic density, pressure and field.

    Velocities are zero by construction.  ``EquilibriumProfile.trivial()``
    stands for the zero state and turns well-balancing off.
    """

    name: str
    rho: Optional[ScalarProfile] = None
    p: Optional[ScalarProfile] = None
    B: VectorProfile = _zero_field

    def __post_init__(self):
        if (self.rho is None) != (self.p is None):
            raise ValueError("density and pressure profiles must be given together")

    @classmethod
    def trivial(cls) -> "EquilibriumProfile":
        return cls("none")

    @property
    def is_trivial(self) -> bool:
        return self.rho is None

    def primitive(self, x, y, z) -> np.ndarray:
        x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
        w = np.zeros((NVAR,) + x.shape)
        if self.is_trivial:
            return w
        w[RHO] = self.rho(x, y, z)
        w[ENE] = self.p(x, y, z)
        for k, b in enumerate(self.B(x, y, z)):
            w[BX + k] = b
        return w

    def state(self, x, y, z, gamma: float, mu: float = 1.0) -> np.ndarray:
        """Conserved equilibrium state at arbitrary points."""
        w = self.primitive(x, y, z)
        if self.is_trivial:
            return w
        return prim_to_cons(w, gamma, mu)

    def pressure(self, x, y, z) -> np.ndarray:
        if self.is_trivial:
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)))
        return self.p(*np.broadcast_arrays(x, y, z))


def equilibrium_at_cells(eq: EquilibriumProfile, grid: Grid, gamma: float, mu: float = 1.0) -> np.ndarray:
    """Equilibrium sampled at every (ghost-inclusive) cell center."""
    return eq.state(*grid.mesh(), gamma, mu)


def equilibrium_at_faces(eq: EquilibriumProfile, grid: Grid, axis: int,
                         gamma: float, mu: float = 1.0) -> np.ndarray:
    """Equilibrium evaluated directly at face centers normal to ``axis``."""
    return eq.state(*grid.face_mesh(axis), gamma, mu)


def deviation(q: np.ndarray, eq: EquilibriumProfile, grid: Grid, gamma: float,
              mu: float = 1.0, q_eq: Optional[np.ndarray] = None) -> np.ndarray:
    """``q - q_eq`` at cell centers (padded or interior arrays)."""
    if q_eq is None:
        q_eq = equilibrium_at_cells(eq, grid, gamma, mu)
    if q.shape[-3:] == grid.n and q_eq.shape[-3:] == grid.shape:
        q_eq = interior_view(q_eq, grid)
    return q - q_eq


def recompose(dq: np.ndarray, eq: EquilibriumProfile, grid: Grid, gamma: float,
              mu: float = 1.0, q_eq: Optional[np.ndarray] = None) -> np.ndarray:
    if q_eq is None:
        q_eq = equilibrium_at_cells(eq, grid, gamma, mu)
    if dq.shape[-3:] == grid.n and q_eq.shape[-3:] == grid.shape:
        q_eq = interior_view(q_eq, grid)
    return dq + q_eq


def mhse_residual(eq: EquilibriumProfile, grid: Grid, gravity, mu: float = 1.0) -> float:
    """Max-norm of the centered-difference residual of the static momentum balance.

    Checks ``div(p + |B|^2/(2 mu) - B B / mu) = rho g`` at interior cells,
    using the analytic profile at neighbouring centers.  ``gravity`` is a
    callable ``g(x, y, z) -> (gx, gy, gz)``.
    """
    if eq.is_trivial:
        return 0.0
    X, Y, Z = grid.mesh()
    w = eq.primitive(X, Y, Z)
    rho, p = w[RHO], w[ENE]
    B = w[BX:BX + 3]
    pt = p + 0.5 * np.sum(B ** 2, axis=0) / mu
    g = np.asarray(gravity(X, Y, Z), dtype=float)
    inner = grid.interior
    res = np.zeros((3,) + grid.n)
    for i in range(3):
        res[i] = -rho[inner] * g[i][inner]
        for j in grid.active:
            T = (pt if i == j else 0.0) - B[i] * B[j] / mu
            lo = list(inner)
            hi = list(inner)
            lo[j] = slice(inner[j].start - 1, inner[j].stop - 1)
            hi[j] = slice(inner[j].start + 1, inner[j].stop + 1)
            res[i] += (T[tuple(hi)] - T[tuple(lo)]) / (2.0 * grid.dx[j])
    return float(np.max(np.abs(res)))
