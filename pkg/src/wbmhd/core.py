"""Uniform Cartesian grids, state containers and conversions.

Cell data are stored as arrays of shape ``(8, NX, NY, NZ)`` where the padded
extent along an active axis is ``n + 2 * n_ghost`` and an unused axis has
extent 1 (no ghost layers).  Component order is
``(rho, rho*u, rho*v, rho*w, rho*E, Bx, By, Bz)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

NVAR = 8
RHO, MX, MY, MZ, ENE, BX, BY, BZ = range(NVAR)
MOM = (MX, MY, MZ)
MAG = (BX, BY, BZ)

# primitive layout uses the same slots: (rho, u, v, w, p, Bx, By, Bz)
VX, VY, VZ, PRS = MX, MY, MZ, ENE


class InvalidStateError(ValueError):
    """Raised when a state has non-positive density or pressure."""


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    dim: int
    n: Tuple[int, int, int]
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]
    n_ghost: int = 2
    dx: Tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n_ghost < 1:
            raise ValueError("n_ghost must be >= 1")
        for a in range(3):
            if self.n[a] < 1:
                raise ValueError(f"cell count along axis {a} must be >= 1, got {self.n[a]}")
            if not self.lo[a] < self.hi[a]:
                raise ValueError(f"inverted bounds along axis {a}: {self.lo[a]} >= {self.hi[a]}")
            if a >= self.dim and self.n[a] != 1:
                raise ValueError("unused axes must have exactly one cell")
        dx = tuple((self.hi[a] - self.lo[a]) / self.n[a] for a in range(3))
        object.__setattr__(self, "dx", dx)

    @property
    def active(self) -> Tuple[int, ...]:
        return tuple(range(self.dim))

    def ghosts(self, axis: int) -> int:
        return self.n_ghost if axis < self.dim else 0

    @property
    def shape(self) -> Tuple[int, int, int]:
        """Padded cell-array shape (without the component axis)."""
        return tuple(self.n[a] + 2 * self.ghosts(a) for a in range(3))

    @property
    def interior(self) -> Tuple[slice, slice, slice]:
        return tuple(slice(self.ghosts(a), self.ghosts(a) + self.n[a]) for a in range(3))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([self.dx[a] for a in self.active]))

    def centers(self, axis: int, ghosts: bool = True) -> np.ndarray:
        """Cell-center coordinates along ``axis``; ghost centers included by default."""
        g = self.ghosts(axis) if ghosts else 0
        i = np.arange(-g, self.n[axis] + g)
        return self.lo[axis] + (i + 0.5) * self.dx[axis]

    def faces(self, axis: int) -> np.ndarray:
        """Coordinates of the ``n + 1`` faces bounding the interior cells."""
        return self.lo[axis] + np.arange(self.n[axis] + 1) * self.dx[axis]

    def mesh(self, ghosts: bool = True):
        """Broadcastable cell-center coordinate arrays ``(X, Y, Z)``."""
        return np.meshgrid(*(self.centers(a, ghosts) for a in range(3)), indexing="ij")

    def face_mesh(self, axis: int):
        """Coordinates at faces normal to ``axis``.

        The normal extent covers the ``n + 1`` interior faces; transverse axes
        include ghost cells, matching the layout of numerical flux arrays.
        """
        coords = [self.centers(a) for a in range(3)]
        coords[axis] = self.faces(axis)
        return np.meshgrid(*coords, indexing="ij")

    def same_as(self, other: "Grid") -> bool:
        return (self.dim, self.n, self.lo, self.hi) == (other.dim, other.n, other.lo, other.hi)


def build_grid(dim: int, counts: Sequence[int], bounds: Sequence[Sequence[float]],
               n_ghost: int = 2) -> Grid:
    """Build a uniform grid.

    ``counts`` and ``bounds`` list the active axes only; unused axes get one
    cell of unit width.
    """
    if len(counts) != dim or len(bounds) != dim:
        raise ValueError("counts and bounds must have one entry per active axis")
    n = [1, 1, 1]
    lo = [0.0, 0.0, 0.0]
    hi = [1.0, 1.0, 1.0]
    for a in range(dim):
        c = int(counts[a])
        if c != counts[a] or c < 1:
            raise ValueError(f"cell count along axis {a} must be a positive integer, got {counts[a]}")
        n[a] = c
        lo[a], hi[a] = float(bounds[a][0]), float(bounds[a][1])
    return Grid(dim, tuple(n), tuple(lo), tuple(hi), n_ghost)


@dataclass
class FieldSet:
    """Conserved variables on a padded grid."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        expected = (NVAR,) + self.grid.shape
        if self.data.shape != expected:
            raise ValueError(f"field shape {self.data.shape} does not match grid {expected}")

    @classmethod
    def zeros(cls, grid: Grid) -> "FieldSet":
        return cls(grid, np.zeros((NVAR,) + grid.shape))

    @property
    def interior(self) -> np.ndarray:
        return self.data[(slice(None),) + self.grid.interior]

    def copy(self) -> "FieldSet":
        return FieldSet(self.grid, self.data.copy())


def kinetic_energy(q: np.ndarray) -> np.ndarray:
    return 0.5 * (q[MX] ** 2 + q[MY] ** 2 + q[MZ] ** 2) / q[RHO]


def magnetic_energy(q: np.ndarray, mu: float = 1.0) -> np.ndarray:
    return 0.5 * (q[BX] ** 2 + q[BY] ** 2 + q[BZ] ** 2) / mu


def pressure(q: np.ndarray, gamma: float, mu: float = 1.0) -> np.ndarray:
    return (gamma - 1.0) * (q[ENE] - kinetic_energy(q) - magnetic_energy(q, mu))


def cons_to_prim(q, gamma: float, mu: float = 1.0, check: bool = True) -> np.ndarray:
    """Conserved -> primitive ``(rho, u, v, w, p, Bx, By, Bz)``.

    Non-positive density raises :class:`InvalidStateError`.  Non-positive
    pressure is returned as computed; use :func:`is_admissible` to flag it.
    """
    q = np.asarray(q, dtype=float)
    if check and np.any(q[RHO] <= 0.0):
        raise InvalidStateError("non-positive density")
    w = np.empty_like(q)
    w[RHO] = q[RHO]
    for m in MOM:
        w[m] = q[m] / q[RHO]
    w[PRS] = pressure(q, gamma, mu)
    for b in MAG:
        w[b] = q[b]
    return w


def prim_to_cons(w, gamma: float, mu: float = 1.0) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    q = np.empty_like(w)
    q[RHO] = w[RHO]
    for m in MOM:
        q[m] = w[RHO] * w[m]
    q[ENE] = (w[PRS] / (gamma - 1.0)
              + 0.5 * w[RHO] * (w[VX] ** 2 + w[VY] ** 2 + w[VZ] ** 2)
              + 0.5 * (w[BX] ** 2 + w[BY] ** 2 + w[BZ] ** 2) / mu)
    for b in MAG:
        q[b] = w[b]
    return q


def is_admissible(q: np.ndarray, gamma: float, mu: float = 1.0) -> np.ndarray:
    return (q[RHO] > 0.0) & (pressure(q, gamma, mu) > 0.0)


def interior_view(a: np.ndarray, grid: Grid) -> np.ndarray:
    """Interior part of a padded array (leading component axes are kept)."""
    if a.shape[-3:] == grid.shape:
        return a[(Ellipsis,) + grid.interior]
    if a.shape[-3:] == grid.n:
        return a
    raise GridMismatchError(f"array shape {a.shape} does not fit grid {grid.n}")


def l1_norm(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """Volume-weighted L1 distance over interior cells.

    Inputs may be padded or interior-only arrays of one component.  The sum
    runs in a fixed (C) order so results are reproducible.
    """
    da = interior_view(np.asarray(a, dtype=float), grid)
    db = interior_view(np.asarray(b, dtype=float), grid)
    if da.shape != db.shape:
        raise GridMismatchError(f"shapes differ: {da.shape} vs {db.shape}")
    return float(np.sum(np.abs(da - db).ravel()) * grid.cell_volume)
