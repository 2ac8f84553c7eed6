"""Boundary filling and the precomputed data shared by the sub-steps."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import ENE, MAG, MOM, NVAR, Grid
from .physics import flux_convective, source
from .wellbalance import EquilibriumProfile, equilibrium_at_cells, equilibrium_at_faces

BC_KINDS = ("periodic", "wall", "exact")

Side = Tuple[str, str]


def _axis_slice(ndim_lead: int, axis: int, s) -> tuple:
    idx = [slice(None)] * (ndim_lead + 3)
    idx[ndim_lead + axis] = s
    return tuple(idx)


def state_parity(axis: int) -> np.ndarray:
    """Reflection signs of the 8 conserved components at a wall normal to ``axis``."""
    sign = np.ones(NVAR)
    sign[MOM[axis]] = -1.0
    sign[MAG[axis]] = -1.0
    return sign


def fill_ghosts(a: np.ndarray, grid: Grid, bcs: Sequence[Side], parity=None,
                exact: Optional[np.ndarray] = None) -> np.ndarray:
    """Fill ghost layers of a padded array in place and return it.

    ``a`` has shape ``lead + grid.shape``.  ``parity(axis)`` gives per-component
    reflection signs for walls (broadcast against the leading axes); scalars
    default to even parity.  ``exact`` supplies ghost values for ``"exact"``
    sides.  Axes are filled in order so corner ghosts are consistent.
    """
    lead = a.ndim - 3
    for axis in grid.active:
        g, n = grid.n_ghost, grid.n[axis]
        for side, kind in enumerate(bcs[axis]):
            if side == 0:
                ghost = slice(0, g)
            else:
                ghost = slice(n + g, n + 2 * g)
            if kind == "periodic":
                src = slice(n, n + g) if side == 0 else slice(g, 2 * g)
                a[_axis_slice(lead, axis, ghost)] = a[_axis_slice(lead, axis, src)]
            elif kind == "wall":
                if side == 0:
                    src = slice(2 * g - 1, g - 1, -1)
                else:
                    src = slice(n + g - 1, n - 1 if n > 0 else None, -1)
                vals = a[_axis_slice(lead, axis, src)]
                if parity is not None:
                    sign = np.asarray(parity(axis), dtype=float)
                    vals = vals * sign.reshape(sign.shape + (1,) * 3)
                a[_axis_slice(lead, axis, ghost)] = vals
            elif kind == "exact":
                if exact is None:
                    raise ValueError("exact boundary requires ghost values")
                a[_axis_slice(lead, axis, ghost)] = exact[_axis_slice(lead, axis, ghost)]
            else:
                raise ValueError(f"unknown boundary kind {kind!r}")
    return a


def pad(interior: np.ndarray, grid: Grid) -> np.ndarray:
    lead = interior.shape[:-3]
    out = np.zeros(lead + grid.shape)
    out[(Ellipsis,) + grid.interior] = interior
    return out


@dataclass
class Discretization:
    """Everything the sub-steps need that does not change in time.

    Equilibrium quantities are sampled once: at cell centers (with ghosts),
    and directly at face centers for the flux subtraction.  ``exact_dq`` holds
    the deviation of the exact boundary state at ghost cells.
    """

    grid: Grid
    gamma: float
    mu: float
    eq: EquilibriumProfile
    bcs: List[Side]
    gravity: np.ndarray
    order: int = 2
    exact_dq: Optional[np.ndarray] = None
    q_eq: np.ndarray = field(init=False)
    q_eq_faces: List[Optional[np.ndarray]] = field(init=False)
    flux_eq_faces: List[Optional[np.ndarray]] = field(init=False)
    src_eq: np.ndarray = field(init=False)
    p_eq: np.ndarray = field(init=False)
    exact_dp: Optional[np.ndarray] = field(init=False)

    def __post_init__(self):
        grid = self.grid
        if len(self.bcs) < grid.dim:
            raise ValueError("one boundary pair per active axis is required")
        for axis in grid.active:
            lo, hi = self.bcs[axis]
            for kind in (lo, hi):
                if kind not in BC_KINDS:
                    raise ValueError(f"unknown boundary kind {kind!r}")
            if (lo == "periodic") != (hi == "periodic"):
                raise ValueError("periodic boundaries must be paired")
            if "exact" in (lo, hi) and self.exact_dq is None:
                raise ValueError("exact boundaries need exact ghost data")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        self.bcs = [tuple(b) for b in self.bcs] + [("periodic", "periodic")] * (3 - len(self.bcs))
        self.q_eq = equilibrium_at_cells(self.eq, grid, self.gamma, self.mu)
        self.p_eq = self.eq.pressure(*grid.mesh())
        self.q_eq_faces = [None, None, None]
        self.flux_eq_faces = [None, None, None]
        for axis in grid.active:
            if self.eq.is_trivial:
                continue
            qf = equilibrium_at_faces(self.eq, grid, axis, self.gamma, self.mu)
            self.q_eq_faces[axis] = qf
            self.flux_eq_faces[axis] = flux_convective(qf, axis, self.mu)
        inner = (slice(None),) + grid.interior
        if self.eq.is_trivial:
            self.src_eq = np.zeros((NVAR,) + grid.n)
        else:
            self.src_eq = source(self.q_eq[inner], self.gravity[inner])
        if self.exact_dq is not None:
            self.exact_dp = self.pressure_deviation(self.exact_dq, self.q_eq)
        else:
            self.exact_dp = None

    @property
    def ct_axes(self) -> Tuple[int, ...]:
        """Axes whose normal field component is evolved on faces."""
        return self.grid.active if self.grid.dim >= 2 else ()

    def fill_state(self, dq: np.ndarray) -> np.ndarray:
        return fill_ghosts(dq, self.grid, self.bcs, state_parity, self.exact_dq)

    def fill_scalar(self, a: np.ndarray, exact: Optional[np.ndarray] = None, odd_axis: Optional[int] = None):
        """Fill a scalar field; ``odd_axis`` flips the sign at walls normal to it."""
        def parity(axis):
            return -1.0 if axis == odd_axis else 1.0
        return fill_ghosts(a, self.grid, self.bcs, parity, exact)

    def padded_state(self, dq_interior: np.ndarray) -> np.ndarray:
        return self.fill_state(pad(dq_interior, self.grid))

    def interior(self, a: np.ndarray) -> np.ndarray:
        return a[(Ellipsis,) + self.grid.interior]

    @property
    def p_eq_interior(self) -> np.ndarray:
        return self.p_eq[self.grid.interior]

    def exact_component(self, comp: int) -> Optional[np.ndarray]:
        return None if self.exact_dq is None else self.exact_dq[comp]

    def magnetic_energy_deviation(self, dq: np.ndarray, q_eq: np.ndarray) -> np.ndarray:
        """``m(B_eq + dB) - m(B_eq)`` written so it vanishes exactly for ``dB = 0``."""
        out = 0.0
        for b in MAG:
            out = out + dq[b] * (dq[b] + 2.0 * q_eq[b])
        return 0.5 * out / self.mu

    def pressure_deviation(self, dq: np.ndarray, q_eq: np.ndarray) -> np.ndarray:
        """``p - p_eq`` from deviations only (equilibrium velocity is zero)."""
        rho = dq[0] + q_eq[0]
        ekin = 0.5 * (dq[MOM[0]] ** 2 + dq[MOM[1]] ** 2 + dq[MOM[2]] ** 2) / rho
        return (self.gamma - 1.0) * (dq[ENE] - ekin - self.magnetic_energy_deviation(dq, q_eq))
