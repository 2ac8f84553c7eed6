"""Semi-implicit time stepping: first-order split step and LSDIRK2(2,2,2) IMEX."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import BX, ENE, MAG, MOM, RHO, kinetic_energy
from .ct import StaggeredB, corner_emf, ct_rate, div_b, faces_to_centers
from .discretization import Discretization
from .explicit import cfl_dt, explicit_tendency
from .physics import max_eig_convective, wave_speeds
from .implicit import ConvergenceError, KrylovReport, implicit_substep, level_data


@dataclass(frozen=True)
class ButcherPair:
    A_exp: np.ndarray
    c_exp: np.ndarray
    A_imp: np.ndarray
    c_imp: np.ndarray
    b: np.ndarray

    @property
    def stages(self) -> int:
        return len(self.b)

    @classmethod
    def lsdirk2(cls) -> "ButcherPair":
        g = 1.0 - 1.0 / math.sqrt(2.0)
        beta = 1.0 / (2.0 * g)
        return cls(
            A_exp=np.array([[0.0, 0.0], [beta, 0.0]]),
            c_exp=np.array([0.0, beta]),
            A_imp=np.array([[g, 0.0], [1.0 - g, g]]),
            c_imp=np.array([g, 1.0]),
            b=np.array([1.0 - g, g]),
        )

    @classmethod
    def euler(cls) -> "ButcherPair":
        return cls(np.zeros((1, 1)), np.zeros(1), np.ones((1, 1)), np.ones(1), np.ones(1))


class StageVector:
    """A list of arrays (``None`` entries allowed) with vector-space arithmetic."""

    __slots__ = ("parts",)

    def __init__(self, parts):
        self.parts = list(parts)

    def __add__(self, other):
        return StageVector([None if a is None else a + b for a, b in zip(self.parts, other.parts)])

    def __sub__(self, other):
        return StageVector([None if a is None else a - b for a, b in zip(self.parts, other.parts)])

    def __mul__(self, s):
        return StageVector([None if a is None else a * s for a in self.parts])

    __rmul__ = __mul__

    def __truediv__(self, s):
        return StageVector([None if a is None else a / s for a in self.parts])


def imex_step(y, dt: float, explicit: Callable, implicit: Callable, pair: ButcherPair):
    """One IMEX Runge-Kutta step for ``y' = f_E(y) + f_I(y)``.

    ``explicit(yE)`` returns ``(rate, ctx)``; ``implicit(star, ctx, dt_eff)``
    returns ``Y`` solving ``Y = star + dt_eff * f_I(Y)`` with coefficients
    frozen from ``ctx``.  Each stage tendency ``k_i = (Y_i - yI_i) / (dt a_ii)``
    includes both parts.  Returns ``(y_new, stage_states)``.
    """
    ks: List = []
    stages: List = []
    for i in range(pair.stages):
        yE = y
        yI = y
        for j in range(i):
            if pair.A_exp[i, j] != 0.0:
                yE = yE + (dt * pair.A_exp[i, j]) * ks[j]
            if pair.A_imp[i, j] != 0.0:
                yI = yI + (dt * pair.A_imp[i, j]) * ks[j]
        rate, ctx = explicit(yE)
        dte = dt * pair.A_imp[i, i]
        Y = implicit(yI + dte * rate, ctx, dte, yI)
        stages.append(Y)
        ks.append((Y - yI) / dte)
    y_new = y
    for i in range(pair.stages):
        y_new = y_new + (dt * pair.b[i]) * ks[i]
    return y_new, stages


@dataclass
class StepInfo:
    reports: List[KrylovReport] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return max((r.iterations for r in self.reports), default=0)

    @property
    def residual(self) -> float:
        return max((r.residual for r in self.reports), default=0.0)


@dataclass
class SolverOptions:
    stencil: str = "wide"
    tol: float = 1e-12
    maxiter: int = 500
    restart: int = 30
    freeze: str = "explicit"
    enthalpy: str = "new"


class _Operators:
    """Explicit and implicit stage evaluations on ``(dq, faces...)`` vectors."""

    def __init__(self, disc: Discretization, opts: SolverOptions, info: StepInfo):
        self.disc = disc
        self.opts = opts
        self.info = info

    def explicit(self, y: StageVector):
        disc = self.disc
        grid = disc.grid
        dq = y.parts[0]
        dq_pad = disc.padded_state(dq)
        tend = explicit_tendency(dq_pad, disc)
        rate = tend.rate
        face_rates: List[Optional[np.ndarray]] = [None, None, None]
        if disc.ct_axes:
            emf = corner_emf(tend.fluxes, grid)
            fr = ct_rate(emf, grid, disc.ct_axes)
            centers = faces_to_centers(fr)
            for a in disc.ct_axes:
                rate[BX + a] = centers[a]
            face_rates = fr.faces
        return StageVector([rate] + face_rates), dq_pad

    def implicit(self, star: StageVector, dq_level_pad: np.ndarray, dt: float,
                 y_known: Optional[StageVector] = None) -> StageVector:
        disc = self.disc
        star_pad = disc.padded_state(star.parts[0])
        if self.opts.freeze == "implicit" and y_known is not None:
            dq_level_pad = disc.padded_state(y_known.parts[0])
        level = level_data(dq_level_pad, disc)
        res = implicit_substep(star_pad, level, disc, dt, self.opts.stencil, self.opts.tol,
                               self.opts.maxiter, self.opts.restart, self.opts.enthalpy)
        self.info.reports.append(res.report)
        return StageVector([res.dq] + star.parts[1:])


def _pack(dq: np.ndarray, faces: StaggeredB) -> StageVector:
    return StageVector([dq] + list(faces.faces))


def _unpack(y: StageVector):
    return y.parts[0], StaggeredB(y.parts[1:])


def step_first_order(dq: np.ndarray, faces: StaggeredB, disc: Discretization, dt: float,
                     opts: Optional[SolverOptions] = None):
    """Explicit update, constrained transport, pressure solve, momentum and energy update.

    ``dq`` is the interior deviation.  Returns ``(dq_new, faces_new, StepInfo)``.
    """
    opts = opts or SolverOptions()
    info = StepInfo()
    ops = _Operators(disc, opts, info)
    y = _pack(dq, faces)
    rate, level = ops.explicit(y)
    star = y + dt * rate
    y_new = ops.implicit(star, level, dt)
    dq_new, faces_new = _unpack(y_new)
    return dq_new, faces_new, info


def step_imex2(dq: np.ndarray, faces: StaggeredB, disc: Discretization, dt: float,
               opts: Optional[SolverOptions] = None, pair: Optional[ButcherPair] = None,
               return_stages: bool = False):
    """Second-order IMEX step; the implicit coefficients of each stage are
    frozen at that stage's explicit state."""
    opts = opts or SolverOptions()
    pair = pair or ButcherPair.lsdirk2()
    info = StepInfo()
    ops = _Operators(disc, opts, info)
    y_new, stages = imex_step(_pack(dq, faces), dt, ops.explicit, ops.implicit, pair)
    dq_new, faces_new = _unpack(y_new)
    if return_stages:
        return dq_new, faces_new, info, [_unpack(s) for s in stages]
    return dq_new, faces_new, info


# --- driver ----------------------------------------------------------------

class SolverError(RuntimeError):
    pass


@dataclass
class StepRecord:
    t: float
    dt: float
    divb_max: float
    divb_scale: float
    krylov_iterations: int
    krylov_residual: float
    mass: float
    energy: float
    kinetic_energy: float
    momentum: tuple
    magnetic: tuple


@dataclass
class RunResult:
    dq: np.ndarray
    faces: StaggeredB
    t: float
    steps: int
    history: List[StepRecord]

    def state(self, disc: Discretization) -> np.ndarray:
        """Full interior conserved state."""
        return self.dq + disc.interior(disc.q_eq)


class Simulation:
    """Holds the evolving deviation and face fields of one run."""

    def __init__(self, disc: Discretization, dq0: np.ndarray, faces0: StaggeredB,
                 b_eq_faces: Optional[Sequence[Optional[np.ndarray]]] = None,
                 opts: Optional[SolverOptions] = None):
        self.disc = disc
        self.dq = dq0.copy()
        self.faces = faces0.copy()
        self.opts = opts or SolverOptions()
        if b_eq_faces is None:
            b_eq_faces = [None, None, None]
            for a in disc.ct_axes:
                qf = disc.q_eq_faces[a]
                if qf is not None:
                    b_eq_faces[a] = qf[(BX + a,) + _face_interior(disc, a)]
        self.b_eq_faces = list(b_eq_faces)
        self.t = 0.0
        self.steps = 0

    def full_state(self) -> np.ndarray:
        return self.dq + self.disc.interior(self.disc.q_eq)

    def full_faces(self) -> StaggeredB:
        out = []
        for a, f in enumerate(self.faces.faces):
            if f is None:
                out.append(None)
            elif self.b_eq_faces[a] is None:
                out.append(f)
            else:
                out.append(f + self.b_eq_faces[a])
        return StaggeredB(out)

    def divergence(self):
        """``(max |div B|, max|B| / min dx)`` of the full face field."""
        grid = self.disc.grid
        if not self.disc.ct_axes:
            return 0.0, 0.0
        full = self.full_faces()
        d = float(np.max(np.abs(div_b(full, grid))))
        bmax = max(float(np.max(np.abs(f))) for f in full.faces if f is not None)
        q = self.full_state()
        bmax = max(bmax, float(np.max(np.abs(q[BX:BX + 3]))))
        return d, bmax / min(grid.dx[a] for a in grid.active)

    def totals(self):
        q = self.full_state()
        vol = self.disc.grid.cell_volume
        return (float(np.sum(q[RHO]) * vol), float(np.sum(q[ENE]) * vol),
                float(np.sum(kinetic_energy(q)) * vol),
                tuple(float(np.sum(q[m]) * vol) for m in MOM),
                tuple(float(np.sum(q[b]) * vol) for b in MAG))

    def record(self, dt: float, info: StepInfo) -> StepRecord:
        d, scale = self.divergence()
        mass, energy, ekin, mom, mag = self.totals()
        return StepRecord(self.t, dt, d, scale, info.iterations, info.residual,
                          mass, energy, ekin, mom, mag)

    def step(self, dt: float, order: int = 2) -> StepInfo:
        stepper = step_imex2 if order == 2 else step_first_order
        try:
            dq, faces, info = stepper(self.dq, self.faces, self.disc, dt, self.opts)
        except ConvergenceError as exc:
            raise SolverError(f"pressure solve failed in step {self.steps + 1} at t={self.t:.6g}: {exc}") from exc
        bad = ~np.isfinite(dq)
        if np.any(bad):
            cell = tuple(int(i) for i in np.argwhere(bad)[0])
            raise SolverError(f"non-finite value in step {self.steps + 1} at (component, i, j, k)={cell}")
        self.dq, self.faces = dq, faces
        self.steps += 1
        return info

    def crossing_time(self) -> float:
        """Time for the fastest magnetosonic signal of the current state to cross the domain."""
        grid = self.disc.grid
        q = self.full_state()
        t = np.inf
        for a in grid.active:
            cf = float(np.max(wave_speeds(q, a, self.disc.gamma, self.disc.mu).c_f))
            if cf > 0.0:
                t = min(t, (grid.hi[a] - grid.lo[a]) / cf)
        return t

    def _at_rest(self) -> bool:
        grid = self.disc.grid
        q = self.full_state()
        return all(float(np.max(max_eig_convective(q, a, self.disc.mu))) == 0.0 for a in grid.active)

    def acoustic_dt(self) -> float:
        """``1 / sum_a(max(|u_a| + c_f) / dx_a)``, the fully explicit step at unit CFL."""
        grid = self.disc.grid
        q = self.full_state()
        rate = 0.0
        for a in grid.active:
            ws = wave_speeds(q, a, self.disc.gamma, self.disc.mu)
            rate += float(np.max(np.abs(q[MOM[a]] / q[RHO]) + ws.c_f)) / grid.dx[a]
        return 1.0 / rate if rate > 0.0 else np.inf

    def run(self, t_end: float, cfl: float = 0.9, order: int = 2, dt_max: Optional[float] = None,
            callback: Optional[Callable[["Simulation", StepRecord], None]] = None,
            max_steps: int = 10_000_000, dt_growth: float = 1.1) -> RunResult:
        """Advance to ``t_end`` with convective CFL steps.

        A run starting at rest has no convective speed to limit its first
        step; it then starts from the magnetosonic CFL step and grows by at
        most ``dt_growth`` per step, capped by ``dt_max`` (default: a tenth of
        the magnetosonic domain-crossing time).  Moving initial states are
        uncapped by default so the step stays independent of the sound speed.
        """
        if not 0.0 < cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        at_rest = self._at_rest()
        if dt_max is None:
            dt_max = np.inf
            if at_rest:
                dt_max = 0.1 * self.crossing_time()
                if not np.isfinite(dt_max):
                    dt_max = t_end
        dt_prev = cfl * self.acoustic_dt() if at_rest else np.inf
        history = [self.record(0.0, StepInfo())]
        if callback:
            callback(self, history[0])
        while self.t < t_end and self.steps < max_steps:
            dt = cfl_dt(self.full_state(), self.disc.grid, cfl, self.disc.mu, dt_max)
            dt = min(dt, dt_prev * dt_growth if self.steps else dt_prev)
            dt_prev = dt
            last = dt >= t_end - self.t
            if last:
                dt = t_end - self.t
            info = self.step(dt, order)
            self.t = t_end if last else self.t + dt
            rec = self.record(dt, info)
            history.append(rec)
            if callback:
                callback(self, rec)
        return RunResult(self.dq, self.faces, self.t, self.steps, history)


def _face_interior(disc: Discretization, axis: int):
    grid = disc.grid
    idx = list(grid.interior)
    idx[axis] = slice(None)
    return tuple(idx)
