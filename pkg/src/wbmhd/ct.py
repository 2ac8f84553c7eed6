"""Constrained transport of face-centred magnetic fields.

Face arrays hold only the interior faces: ``bx`` has shape
``(nx + 1, ny, nz)``, ``by`` ``(nx, ny + 1, nz)``, ``bz`` ``(nx, ny, nz + 1)``.
Components along unused axes are ``None`` and evolve as cell averages.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .core import BX, BY, BZ, Grid

# face flux component carrying +/- each corner EMF, keyed by (emf axis, flux axis)
# Ez = -F[By] = G[Bx];  Ey = F[Bz] = -H[Bx];  Ex = -G[Bz] = H[By]
_EMF_FROM_FLUX = {
    (2, 0): (BY, -1.0), (2, 1): (BX, 1.0),
    (1, 0): (BZ, 1.0), (1, 2): (BX, -1.0),
    (0, 1): (BZ, -1.0), (0, 2): (BY, 1.0),
}


@dataclass
class StaggeredB:
    faces: List[Optional[np.ndarray]]

    def copy(self) -> "StaggeredB":
        return StaggeredB([None if f is None else f.copy() for f in self.faces])

    def axpy(self, alpha: float, other: "StaggeredB") -> "StaggeredB":
        """``self + alpha * other`` as a new object."""
        return StaggeredB([None if f is None else f + alpha * o for f, o in zip(self.faces, other.faces)])

    @classmethod
    def zeros(cls, grid: Grid, axes: Sequence[int]) -> "StaggeredB":
        faces: List[Optional[np.ndarray]] = [None, None, None]
        for a in axes:
            shape = list(grid.n)
            shape[a] += 1
            faces[a] = np.zeros(shape)
        return cls(faces)


@dataclass
class CornerEMF:
    """EMF component ``e`` lives on edges parallel to axis ``e``.

    ``E[e]`` has the interior cell extent along ``e`` and ``n + 1`` along the
    other two active axes (extent 1 on unused axes).
    """

    E: List[Optional[np.ndarray]]


def _interior_transverse(flux: np.ndarray, grid: Grid, flux_axis: int, keep_ghost_axis: int) -> np.ndarray:
    """Restrict a face-flux array to interior cells along the remaining axis,
    keeping one ghost layer on each side of ``keep_ghost_axis``."""
    idx = []
    for a in range(3):
        if a == flux_axis:
            idx.append(slice(None))
        elif a == keep_ghost_axis:
            g = grid.ghosts(a)
            idx.append(slice(g - 1, g + grid.n[a] + 1))
        else:
            idx.append(grid.interior[a])
    return flux[tuple(idx)]


def corner_emf(fluxes: Sequence[Optional[np.ndarray]], grid: Grid) -> CornerEMF:
    """Edge EMFs as the average of the four adjacent face EMFs.

    ``fluxes[a]`` are the (deviation) numerical fluxes at faces normal to
    axis ``a`` with padded transverse extent, as returned by the explicit
    sub-step.
    """
    if grid.dim < 2:
        raise ValueError("constrained transport needs at least two dimensions")
    E: List[Optional[np.ndarray]] = [None, None, None]
    for e in range(3):
        others = [a for a in range(3) if a != e]
        if not all(a in grid.active for a in others):
            continue
        acc = None
        for fa in others:
            ta = others[0] if others[1] == fa else others[1]
            comp, sign = _EMF_FROM_FLUX[(e, fa)]
            f = sign * _interior_transverse(fluxes[fa][comp], grid, fa, ta)
            n = f.shape[ta]
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[ta] = slice(0, n - 1)
            hi[ta] = slice(1, n)
            avg = 0.5 * (f[tuple(lo)] + f[tuple(hi)])
            acc = avg if acc is None else acc + avg
        E[e] = 0.5 * acc
    return CornerEMF(E)


def _diff(a: np.ndarray, axis: int) -> np.ndarray:
    n = a.shape[axis]
    hi = [slice(None)] * 3
    lo = [slice(None)] * 3
    hi[axis] = slice(1, n)
    lo[axis] = slice(0, n - 1)
    return a[tuple(hi)] - a[tuple(lo)]


def ct_rate(emf: CornerEMF, grid: Grid, axes: Sequence[int]) -> StaggeredB:
    """Face-field time derivative ``-curl E`` for the staggered components."""
    out: List[Optional[np.ndarray]] = [None, None, None]
    for b in axes:
        j, k = (b + 1) % 3, (b + 2) % 3
        # dB_b/dt = -(d_j E_k - d_k E_j)
        rate = np.zeros(tuple(grid.n[a] + (1 if a == b else 0) for a in range(3)))
        if emf.E[k] is not None and j in grid.active:
            rate -= _diff(emf.E[k], j) / grid.dx[j]
        if emf.E[j] is not None and k in grid.active:
            rate += _diff(emf.E[j], k) / grid.dx[k]
        out[b] = rate
    return StaggeredB(out)


def ct_update(staggered: StaggeredB, emf: CornerEMF, dt: float, grid: Grid) -> StaggeredB:
    axes = [a for a in range(3) if staggered.faces[a] is not None]
    return staggered.axpy(dt, ct_rate(emf, grid, axes))


def faces_to_centers(staggered: StaggeredB) -> List[Optional[np.ndarray]]:
    """Cell averages of each staggered component (arithmetic mean of its two faces)."""
    out: List[Optional[np.ndarray]] = [None, None, None]
    for a, f in enumerate(staggered.faces):
        if f is None:
            continue
        n = f.shape[a]
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[a] = slice(0, n - 1)
        hi[a] = slice(1, n)
        out[a] = 0.5 * (f[tuple(lo)] + f[tuple(hi)])
    return out


def div_b(staggered: StaggeredB, grid: Grid) -> np.ndarray:
    """Discrete divergence per cell from face differences."""
    out = np.zeros(grid.n)
    for a, f in enumerate(staggered.faces):
        if f is not None:
            out += _diff(f, a) / grid.dx[a]
    return out
