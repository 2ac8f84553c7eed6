"""Explicit convective sub-step in deviation form."""
from __future__ import annotations

from typing import List, NamedTuple, Optional

import numpy as np

from .core import MAG, NVAR, RHO, Grid, InvalidStateError
from .discretization import Discretization
from .physics import flux_convective, max_eig_convective, source


def minmod(a, b):
    """Smaller-magnitude argument when both share a sign, else zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _shift(a: np.ndarray, axis: int, start: int, stop: int) -> np.ndarray:
    idx = [slice(None)] * a.ndim
    idx[a.ndim - 3 + axis] = slice(start, stop)
    return a[tuple(idx)]


def limited_slopes(dq: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Minmod slopes (per unit length) for cells ``g-1 .. g+n`` along ``axis``."""
    g, n, h = grid.n_ghost, grid.n[axis], grid.dx[axis]
    centre = _shift(dq, axis, g - 1, g + n + 1)
    left = _shift(dq, axis, g - 2, g + n)
    right = _shift(dq, axis, g, g + n + 2)
    return minmod((centre - left) / h, (right - centre) / h)


def reconstruct(dq: np.ndarray, grid: Grid, axis: int, order: int):
    """Left/right face values at the ``n + 1`` faces normal to ``axis``.

    ``dq`` is padded with filled ghosts.  The result keeps the padded
    transverse extent, so transverse ghost rows get fluxes too (the corner
    EMFs need them).
    """
    g, n = grid.n_ghost, grid.n[axis]
    left_cells = _shift(dq, axis, g - 1, g + n)
    right_cells = _shift(dq, axis, g, g + n + 1)
    if order == 1:
        return left_cells.copy(), right_cells.copy()
    if order != 2:
        raise ValueError("order must be 1 or 2")
    if g < 2:
        raise ValueError("second order needs two ghost layers")
    half = 0.5 * grid.dx[axis] * limited_slopes(dq, grid, axis)
    qL = left_cells + _shift(half, axis, 0, n + 1)
    qR = right_cells - _shift(half, axis, 1, n + 2)
    return qL, qR


def rusanov_flux(qL: np.ndarray, qR: np.ndarray, axis: int, mu: float = 1.0) -> np.ndarray:
    """Central convective flux plus dissipation scaled by the convective speed only."""
    if np.any(qL[RHO] <= 0.0) or np.any(qR[RHO] <= 0.0):
        raise InvalidStateError("non-positive density in interface state")
    smax = np.maximum(max_eig_convective(qL, axis, mu), max_eig_convective(qR, axis, mu))
    return 0.5 * (flux_convective(qL, axis, mu) + flux_convective(qR, axis, mu)) - 0.5 * smax * (qR - qL)


def cfl_dt(q: np.ndarray, grid: Grid, cfl: float, mu: float = 1.0, dt_max: float = np.inf) -> float:
    """Convective time step ``cfl / sum_a(max|lambda_c,a| / dx_a)``, capped at ``dt_max``.

    In one dimension this is ``cfl * dx / max|lambda_c|``; the sum over axes
    is the stability limit of the unsplit multi-dimensional update.  ``q``
    holds full (not deviation) interior states; the sound speed plays no role.
    """
    rate = 0.0
    for axis in grid.active:
        rate += float(np.max(max_eig_convective(q, axis, mu))) / grid.dx[axis]
    if rate <= 0.0:
        if not np.isfinite(dt_max):
            raise ValueError("static state needs a finite dt_max")
        return float(dt_max)
    return float(min(cfl / rate, dt_max))


class ExplicitTendency(NamedTuple):
    rate: np.ndarray                      # (8, interior) d(dq)/dt
    fluxes: List[Optional[np.ndarray]]    # deviation face fluxes per axis


def _bad_cell(q: np.ndarray, grid: Grid, axis: int) -> str:
    idx = np.argwhere(q[RHO] <= 0.0)
    if len(idx) == 0:
        return "unknown"
    i = list(idx[0])
    return ", ".join(str(v) for v in i)


def face_fluxes(dq: np.ndarray, disc: Discretization, axis: int) -> np.ndarray:
    """Deviation flux ``F_num(qbar_L, qbar_R) - F_c(q_eq_face)`` at faces normal to ``axis``."""
    grid = disc.grid
    dL, dR = reconstruct(dq, grid, axis, disc.order)
    qf = disc.q_eq_faces[axis]
    if qf is None:
        qL, qR = dL, dR
    else:
        qL, qR = dL + qf, dR + qf
    try:
        flux = rusanov_flux(qL, qR, axis, disc.mu)
    except InvalidStateError as exc:
        bad = qL if np.any(qL[RHO] <= 0.0) else qR
        raise InvalidStateError(
            f"inadmissible interface state on axis {axis} at face index ({_bad_cell(bad, grid, axis)})"
        ) from exc
    if disc.flux_eq_faces[axis] is not None:
        flux = flux - disc.flux_eq_faces[axis]
    if not disc.ct_axes:
        # 1D: the normal field component is not evolved
        flux[MAG[axis]] = 0.0
    return flux


def explicit_tendency(dq: np.ndarray, disc: Discretization) -> ExplicitTendency:
    """Rate of change of the deviation from convective fluxes and gravity.

    ``dq`` is a padded deviation array with filled ghosts.  Components
    handled by constrained transport are still returned here; callers
    replace them with face averages.
    """
    grid = disc.grid
    inner = (slice(None),) + grid.interior
    rate = np.zeros((NVAR,) + grid.n)
    fluxes: List[Optional[np.ndarray]] = [None, None, None]
    for axis in grid.active:
        flux = face_fluxes(dq, disc, axis)
        fluxes[axis] = flux
        n = grid.n[axis]
        # restrict transverse extent to interior
        idx = [slice(None)] + [grid.interior[a] for a in range(3)]
        idx[1 + axis] = slice(None)
        f = flux[tuple(idx)]
        rate -= (_shift(f, axis, 1, n + 1) - _shift(f, axis, 0, n)) / grid.dx[axis]
    qbar = dq[inner] + disc.q_eq[inner]
    g = disc.gravity[inner]
    rate += source(qbar, g) - disc.src_eq
    return ExplicitTendency(rate, fluxes)


def explicit_update(dq: np.ndarray, disc: Discretization, dt: float) -> np.ndarray:
    """One forward-Euler convective step on the interior (no constrained transport)."""
    grid = disc.grid
    return dq[(slice(None),) + grid.interior] + dt * explicit_tendency(dq, disc).rate
