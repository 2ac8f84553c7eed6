"""Implicit pressure sub-step.

The pressure is solved for in deviation form, ``dp = p - p_eq``: moving the
``p_eq / (gamma - 1)`` term of the right-hand side to the left leaves a
linear system in ``dp`` whose right-hand side vanishes identically at
equilibrium.  The operator is applied matrix-free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ENE, MOM, RHO, Grid
from .discretization import Discretization, pad


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, report: "KrylovReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class KrylovReport:
    iterations: int
    residual: float
    converged: bool


def _sl(grid: Grid, axis: int, offset: int):
    """Interior slice shifted by ``offset`` cells along ``axis``."""
    idx = list(grid.interior)
    s = idx[axis]
    idx[axis] = slice(s.start + offset, s.stop + offset)
    return tuple(idx)


def enthalpy_laplacian_apply(p: np.ndarray, h: np.ndarray, grid: Grid, stencil: str = "compact") -> np.ndarray:
    """Discrete ``div(h grad p)`` at interior cells from padded ``p`` and ``h``.

    ``"compact"`` is the three-point enthalpy-weighted stencil in which ``h_i``
    carries no weight.  ``"wide"`` is the centered difference of
    ``h * centered_gradient(p)`` and matches the flux-form energy update exactly.
    """
    out = np.zeros(grid.n)
    c = grid.interior
    for a in grid.active:
        m, pl = _sl(grid, a, -1), _sl(grid, a, 1)
        d2 = grid.dx[a] ** 2
        if stencil == "compact":
            hm, hp = h[m], h[pl]
            out += ((0.75 * hm + 0.25 * hp) * p[m] - (hm + hp) * p[c] + (0.25 * hm + 0.75 * hp) * p[pl]) / d2
        elif stencil == "wide":
            mm, pp = _sl(grid, a, -2), _sl(grid, a, 2)
            out += (h[pl] * (p[pp] - p[c]) - h[m] * (p[c] - p[mm])) / (4.0 * d2)
        else:
            raise ValueError(f"unknown stencil {stencil!r}")
    return out


def centered_difference(f: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Undivided centered difference ``f[i+1] - f[i-1]`` at interior cells."""
    return f[_sl(grid, axis, 1)] - f[_sl(grid, axis, -1)]


@dataclass
class PressureSystem:
    """Linear system for ``dp^{n+1}`` with frozen coefficients.

    ``h`` is the padded time-level-n enthalpy, ``mom_n`` the interior
    time-level-n momenta (3, ...), ``rho_new`` the interior density after the
    explicit sub-step and ``b`` the deviation right-hand side.  ``fill`` fills
    ghost layers of a padded pressure deviation using the given ghost data
    (``None`` means homogeneous data).
    """

    grid: Grid
    gamma: float
    dt: float
    h: np.ndarray
    mom_n: np.ndarray
    rho_new: np.ndarray
    b: np.ndarray
    fill: Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]
    ghost_dp: Optional[np.ndarray] = None
    stencil: str = "wide"
    tol: float = 1e-12
    maxiter: int = 500
    restart: int = 30

    def _apply_padded(self, dp_pad: np.ndarray) -> np.ndarray:
        grid = self.grid
        out = dp_pad[grid.interior] / (self.gamma - 1.0)
        for a in grid.active:
            coef = self.dt / (2.0 * grid.dx[a]) * self.mom_n[a] / (2.0 * self.rho_new)
            out -= coef * centered_difference(dp_pad, grid, a)
        out -= self.dt ** 2 * enthalpy_laplacian_apply(dp_pad, self.h, grid, self.stencil)
        return out

    def apply(self, dp: np.ndarray) -> np.ndarray:
        """Linear operator on an interior deviation with homogeneous boundary data."""
        return self._apply_padded(self.fill(pad(dp, self.grid), None))

    def apply_affine(self, dp: np.ndarray) -> np.ndarray:
        """Operator including the actual boundary data of the pressure deviation."""
        return self._apply_padded(self.fill(pad(dp, self.grid), self.ghost_dp))

    def padded(self, dp: np.ndarray) -> np.ndarray:
        return self.fill(pad(dp, self.grid), self.ghost_dp)


def gmres(apply: Callable[[np.ndarray], np.ndarray], b: np.ndarray, x0: np.ndarray,
          tol: float = 1e-12, restart: int = 30, maxiter: int = 500,
          b_norm: Optional[float] = None):
    """Restarted GMRES with modified Gram-Schmidt and Givens rotations.

    Convergence means ``||b - A x|| <= tol * b_norm`` where ``b_norm``
    defaults to ``||b||``, or a normwise backward error below ``tol``:
    ``||b - A x|| <= tol * (||A|| ||x|| + ||b||)`` with ``||A||`` estimated
    from the Arnoldi products.  The second test matters for badly conditioned
    low-Mach systems whose residual floor is set by rounding in ``A x``.
    Returns ``(x, KrylovReport)``; raises :class:`ConvergenceError` when
    ``maxiter`` Arnoldi steps do not suffice.
    """
    shape = b.shape
    bvec = b.ravel()
    if b_norm is None:
        b_norm = float(np.linalg.norm(bvec))
    if b_norm < 1e-300:
        return np.zeros(shape), KrylovReport(0, 0.0, True)
    x = np.array(x0, dtype=float).ravel()
    target = tol * b_norm
    r = bvec - apply(x.reshape(shape)).ravel()
    beta = float(np.linalg.norm(r))
    iters = 0
    a_norm = 0.0

    def backward_ok(res):
        return res <= tol * (a_norm * float(np.linalg.norm(x)) + b_norm)

    if beta <= target:
        return x.reshape(shape), KrylovReport(0, beta / b_norm, True)
    while iters < maxiter:
        m = min(restart, maxiter - iters)
        V = np.zeros((m + 1, bvec.size))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        breakdown = False
        for k in range(m):
            w = apply(V[k].reshape(shape)).ravel()
            a_norm = max(a_norm, float(np.linalg.norm(w)))
            for j in range(k + 1):
                H[j, k] = float(np.dot(V[j], w))
                w -= H[j, k] * V[j]
            hnorm = float(np.linalg.norm(w))
            H[k + 1, k] = hnorm
            iters += 1
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            denom = math.hypot(H[k, k], hnorm)
            if denom == 0.0:
                # singular Hessenberg column: keep what we have
                breakdown = True
                break
            cs[k], sn[k] = H[k, k] / denom, hnorm / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_used = k + 1
            if abs(g[k + 1]) <= target:
                break
            if hnorm == 0.0:
                breakdown = True
                break
            V[k + 1] = w / hnorm
        if k_used > 0:
            y = np.linalg.solve(np.triu(H[:k_used, :k_used]), g[:k_used])
            x += V[:k_used].T @ y
        r = bvec - apply(x.reshape(shape)).ravel()
        beta = float(np.linalg.norm(r))
        if beta <= target or backward_ok(beta):
            return x.reshape(shape), KrylovReport(iters, beta / b_norm, True)
        if breakdown:
            report = KrylovReport(iters, beta / b_norm, False)
            raise ConvergenceError("GMRES breakdown before reaching tolerance", report)
    report = KrylovReport(iters, beta / b_norm, False)
    raise ConvergenceError(f"GMRES did not converge in {iters} iterations "
                           f"(relative residual {beta / b_norm:.3e})", report)


# --- sub-step pieces -------------------------------------------------------

@dataclass
class LevelData:
    """Time-level-n quantities that freeze the implicit coefficients."""

    h: np.ndarray       # padded enthalpy
    mom: np.ndarray     # interior momenta (3, ...)
    dp: np.ndarray      # interior pressure deviation (initial guess)
    rho: Optional[np.ndarray] = None   # padded density the enthalpy was formed with

    def rescaled(self, rho_new: np.ndarray) -> "LevelData":
        """Enthalpy ``gamma p^n / ((gamma - 1) rho_new)`` for a padded new density."""
        return LevelData(self.h * self.rho / rho_new, self.mom, self.dp, rho_new)


def level_data(dq_n: np.ndarray, disc: Discretization) -> LevelData:
    """Enthalpy, momenta and pressure deviation of a padded deviation state."""
    dp = disc.pressure_deviation(dq_n, disc.q_eq)
    rho = dq_n[RHO] + disc.q_eq[RHO]
    h = disc.gamma * (disc.p_eq + dp) / ((disc.gamma - 1.0) * rho)
    inner = disc.grid.interior
    mom = np.stack([dq_n[m][inner] for m in MOM])
    return LevelData(h, mom, dp[inner], rho)


def assemble_rhs(dq_star: np.ndarray, level: LevelData, disc: Discretization, dt: float) -> np.ndarray:
    """Deviation right-hand side of the pressure equation.

    ``dq_star`` is the padded explicit (and constrained-transport) state with
    filled ghosts.  The full right-hand side is this plus ``p_eq / (gamma - 1)``.
    """
    grid = disc.grid
    c = grid.interior
    q_eq = disc.q_eq
    rho_new = dq_star[RHO][c] + q_eq[RHO][c]
    dm_new = disc.magnetic_energy_deviation(dq_star[:, c[0], c[1], c[2]], q_eq[:, c[0], c[1], c[2]])
    b = dq_star[ENE][c] - dm_new
    # every momentum component carries kinetic energy, transport only the active ones
    for a in range(3):
        b -= level.mom[a] / (2.0 * rho_new) * dq_star[MOM[a]][c]
    for a in grid.active:
        b -= dt / (2.0 * grid.dx[a]) * centered_difference(level.h * dq_star[MOM[a]], grid, a)
    return b


def assemble_rhs_full(dq_star, level, disc, dt):
    """Right-hand side as printed for the full pressure unknown."""
    return assemble_rhs(dq_star, level, disc, dt) + disc.p_eq_interior / (disc.gamma - 1.0)


def pressure_system(dq_star: np.ndarray, level: LevelData, disc: Discretization, dt: float,
                    stencil: str = "wide", tol: float = 1e-12, maxiter: int = 500,
                    restart: int = 30) -> PressureSystem:
    grid = disc.grid
    c = grid.interior
    rho_new = dq_star[RHO][c] + disc.q_eq[RHO][c]
    b = assemble_rhs(dq_star, level, disc, dt)

    def fill(a, exact):
        # exact=None means homogeneous boundary data
        return disc.fill_scalar(a, np.zeros_like(a) if exact is None else exact)

    return PressureSystem(grid, disc.gamma, dt, level.h, level.mom, rho_new, b, fill,
                          ghost_dp=disc.exact_dp, stencil=stencil, tol=tol,
                          maxiter=maxiter, restart=restart)


def pressure_apply(p: np.ndarray, system: PressureSystem, p_eq: np.ndarray) -> np.ndarray:
    """Left-hand side for a full interior pressure ``p`` (affine in ``p``)."""
    return system.apply_affine(p - p_eq) + p_eq / (system.gamma - 1.0)


def gmres_solve(system: PressureSystem, dp_guess: Optional[np.ndarray] = None):
    """Solve for the pressure deviation; returns ``(dp, KrylovReport)``.

    Boundary data enter through an affine offset moved to the right-hand side,
    so the Krylov iteration only sees the linear operator.
    """
    grid = system.grid
    offset = system._apply_padded(system.fill(pad(np.zeros(grid.n), grid), system.ghost_dp))
    rhs = system.b - offset
    if dp_guess is None:
        dp_guess = np.zeros(grid.n)
    return gmres(system.apply, rhs, dp_guess, system.tol, system.restart, system.maxiter)


def momentum_update(dq_star: np.ndarray, dp_pad: np.ndarray, disc: Discretization, dt: float) -> np.ndarray:
    """Interior momentum deviations after the pressure correction (3, ...)."""
    grid = disc.grid
    c = grid.interior
    out = np.stack([dq_star[m][c] for m in MOM])
    for a in grid.active:
        out[a] -= dt / (2.0 * grid.dx[a]) * centered_difference(dp_pad, grid, a)
    return out


def energy_update(dq_star: np.ndarray, mom_new_pad: np.ndarray, level: LevelData,
                  disc: Discretization, dt: float) -> np.ndarray:
    """Interior total-energy deviation from the flux-form enthalpy transport.

    ``mom_new_pad`` holds padded full momenta at the new level (equal to
    their deviations since the equilibrium is static).
    """
    grid = disc.grid
    out = dq_star[ENE][grid.interior].copy()
    for a in grid.active:
        out -= dt / (2.0 * grid.dx[a]) * centered_difference(level.h * mom_new_pad[a], grid, a)
    return out


@dataclass
class ImplicitResult:
    dq: np.ndarray          # interior deviation state at the new level
    dp: np.ndarray          # interior pressure deviation
    report: KrylovReport


def implicit_substep(dq_star: np.ndarray, level: LevelData, disc: Discretization, dt: float,
                     stencil: str = "wide", tol: float = 1e-12, maxiter: int = 500,
                     restart: int = 30, enthalpy: str = "new") -> ImplicitResult:
    """Pressure solve, momentum update and energy update.

    ``dq_star`` is padded with filled ghosts; density and magnetic field pass
    through unchanged.  With ``enthalpy="new"`` the frozen pressure is divided
    by the already known new density, so ``h (rho u)^{n+1}`` carries exactly
    ``gamma p^n u^{n+1} / (gamma - 1)``; ``"old"`` keeps ``h^n`` as is.
    """
    grid = disc.grid
    if enthalpy == "new":
        level = level.rescaled(dq_star[RHO] + disc.q_eq[RHO])
    elif enthalpy != "old":
        raise ValueError(f"unknown enthalpy mode {enthalpy!r}")
    system = pressure_system(dq_star, level, disc, dt, stencil, tol, maxiter, restart)
    dp, report = gmres_solve(system, level.dp)
    dp_pad = system.padded(dp)
    mom = momentum_update(dq_star, dp_pad, disc, dt)
    mom_pad = pad(mom, grid)
    for a in range(3):
        disc.fill_scalar(mom_pad[a], disc.exact_component(MOM[a]), odd_axis=a)
    ene = energy_update(dq_star, mom_pad, level, disc, dt)
    out = dq_star[(slice(None),) + grid.interior].copy()
    for a in range(3):
        out[MOM[a]] = mom[a]
    out[ENE] = ene
    return ImplicitResult(out, dp, report)
