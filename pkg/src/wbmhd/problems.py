"""Built-in test problems and the glue that turns one into a runnable simulation."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import BX, NVAR, Grid, build_grid, prim_to_cons
from .ct import StaggeredB, faces_to_centers
from .discretization import Discretization, fill_ghosts as _fill, state_parity
from .imex import Simulation, SolverOptions
from .wellbalance import EquilibriumProfile, mhse_residual

PrimitiveProfile = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _prim(rho, u, v, w, p, bx, by, bz) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    out = np.zeros((NVAR,) + rho.shape)
    for k, val in enumerate((rho, u, v, w, p, bx, by, bz)):
        out[k] = val
    return out


def _zero_gravity(x, y, z):
    return np.zeros((3,) + np.shape(x))


@dataclass
class ProblemSpec:
    """Initial data, equilibrium, forcing and boundaries of one test.

    ``initial`` returns primitive variables ``(rho, u, v, w, p, Bx, By, Bz)``
    at arbitrary points; ``face_field`` (optional) returns the magnetic field
    at face centers, defaulting to the initial field.  ``equilibrium`` is
    used when well-balancing is on.  Boundary kinds are ``periodic``,
    ``wall`` and ``exact`` (ghosts take the initial data).  ``solver`` holds
    default overrides for :class:`SolverOptions`.
    """

    name: str
    dim: int
    counts: Tuple[int, ...]
    bounds: Tuple[Tuple[float, float], ...]
    gamma: float
    initial: PrimitiveProfile
    bcs: List[Tuple[str, str]]
    t_end: float
    mu: float = 1.0
    gravity: Callable = _zero_gravity
    equilibrium: EquilibriumProfile = field(default_factory=EquilibriumProfile.trivial)
    face_field: Optional[Callable] = None
    params: Dict[str, float] = field(default_factory=dict)
    stationary: bool = False
    solver: Dict[str, object] = field(default_factory=dict)

    def with_counts(self, counts: Sequence[int]) -> "ProblemSpec":
        return replace(self, counts=tuple(int(c) for c in counts))


# --- registry --------------------------------------------------------------

def sod_gravity() -> ProblemSpec:
    def initial(x, y, z):
        left = x < 0.5
        rho = np.where(left, 1.0, 0.125)
        p = np.where(left, 1.0, 0.1)
        zero = np.zeros_like(rho)
        return _prim(rho, zero, zero, zero, p, zero, zero, zero)

    def gravity(x, y, z):
        g = np.zeros((3,) + np.shape(x))
        g[0] = -1.0
        return g

    # no equilibrium is balanced here, well-balancing stays off
    return ProblemSpec("sod_gravity", 1, (100,), ((0.0, 1.0),), 1.4, initial,
                       [("wall", "wall")], 0.2, gravity=gravity)


def _gss_rho(x, y, z):
    return 3.0 + 2.0 * np.sin(2.0 * np.pi * x)


def _gss_p(x, y, z):
    return 3.0 + 3.0 * np.sin(2.0 * np.pi * x) - 0.5 * np.cos(4.0 * np.pi * x)


def general_steady_state_1d() -> ProblemSpec:
    eq = EquilibriumProfile("gss1d", _gss_rho, _gss_p)

    def initial(x, y, z):
        zero = np.zeros_like(x)
        return _prim(_gss_rho(x, y, z), zero, zero, zero, _gss_p(x, y, z), zero, zero, zero)

    def gravity(x, y, z):
        g = np.zeros((3,) + np.shape(x))
        g[0] = 2.0 * np.pi * np.cos(2.0 * np.pi * x)
        return g

    return ProblemSpec("gss1d", 1, (40,), ((0.0, 1.0),), 1.4, initial,
                       [("periodic", "periodic")], 1.0, gravity=gravity, equilibrium=eq,
                       stationary=True)


def _diagonal_gravity(x, y, z):
    g = np.zeros((3,) + np.shape(x))
    g[0] = -1.0
    g[1] = -1.0
    return g


def _bump(x, y, width):
    return np.exp(-width * ((x - 0.5) ** 2 + (y - 0.5) ** 2))


def isothermal_atmosphere_2d(eta: float = 0.0) -> ProblemSpec:
    def rho(x, y, z):
        return 1.21 * np.exp(-1.21 * (x + y))

    def p(x, y, z):
        return np.exp(-1.21 * (x + y))

    eq = EquilibriumProfile("isothermal2d", rho, p)

    def initial(x, y, z):
        zero = np.zeros_like(x)
        pres = p(x, y, z)
        if eta != 0.0:
            pres = pres + eta * _bump(x, y, 121.0)
        return _prim(rho(x, y, z), zero, zero, zero, pres, zero, zero, zero)

    t_end = 1.0 if eta == 0.0 else 0.15
    return ProblemSpec("isothermal2d", 2, (64, 64), ((0.0, 1.0), (0.0, 1.0)), 1.4, initial,
                       [("exact", "exact"), ("exact", "exact")], t_end,
                       gravity=_diagonal_gravity, equilibrium=eq, params={"eta": eta},
                       stationary=(eta == 0.0))


def mhd_steady_state_2d(eta: float = 0.0) -> ProblemSpec:
    def rho(x, y, z):
        return 2.21 * np.exp(-(x + y))

    def p(x, y, z):
        return 1.21 * np.exp(-(x + y))

    def field_(x, y, z):
        b = np.exp(-0.5 * (x + y))
        return (b, -b, np.zeros_like(b))

    eq = EquilibriumProfile("mhd2d", rho, p, field_)

    def initial(x, y, z):
        zero = np.zeros_like(x)
        pres = p(x, y, z)
        if eta != 0.0:
            pres = pres + eta * _bump(x, y, 100.0)
        bx, by, bz = field_(x, y, z)
        return _prim(rho(x, y, z), zero, zero, zero, pres, bx, by, bz)

    t_end = 1.0 if eta == 0.0 else 0.15
    return ProblemSpec("mhd2d", 2, (64, 64), ((0.0, 1.0), (0.0, 1.0)), 1.4, initial,
                       [("exact", "exact"), ("exact", "exact")], t_end, mu=1.0,
                       gravity=_diagonal_gravity, equilibrium=eq, face_field=field_,
                       params={"eta": eta}, stationary=(eta == 0.0))


# Gresho-type vortex: peak speed 1 at r = 0.2, one turn takes 2*pi*0.2 ~ 1.26
_VORTEX_R = 0.4
_VORTEX_G0 = 10.0


def _vortex_speed(r):
    return np.where(r < 0.2, 5.0 * r, np.where(r < 0.4, 2.0 - 5.0 * r, 0.0))


def _vortex_pressure(r):
    """Centrifugal pressure ``int u^2/r dr`` (rho = 1), zero outside the vortex."""
    rr = np.maximum(r, 1e-300)
    c_mid = 6.0 - 4.0 * np.log(0.4)          # zero at r = 0.4
    c_in = 4.0 * np.log(0.2) - 4.0 + c_mid   # continuous at r = 0.2
    mid = 12.5 * r ** 2 - 20.0 * r + 4.0 * np.log(rr) + c_mid
    inner = 12.5 * r ** 2 + c_in
    return np.where(r < 0.2, inner, np.where(r < 0.4, mid, 0.0))


def _hydrostatic_pressure(r):
    """Pressure excess balancing the radial gravity ``-g0 r (1 - r^2/R^2)^2``."""
    s = np.clip(1.0 - (r / _VORTEX_R) ** 2, 0.0, None)
    return _VORTEX_G0 * _VORTEX_R ** 2 / 6.0 * s ** 3


def _vortex_p_inf(mach_max: float, gamma: float) -> float:
    r = np.linspace(0.0, _VORTEX_R, 4001)
    speed = _vortex_speed(r)
    extra = _hydrostatic_pressure(r) + _vortex_pressure(r)

    def excess(p_inf):
        c = np.sqrt(gamma * (p_inf + extra))
        return float(np.max(speed / c)) - mach_max

    lo = max(1e-12, -float(np.min(extra)) + 1e-9)
    hi = 1.0
    while excess(hi) > 0.0:
        hi *= 4.0
    if excess(lo) < 0.0:
        raise ValueError("requested Mach number too large for this vortex")
    return brentq(excess, lo, hi, xtol=1e-14 * hi, rtol=1e-15)


def low_mach_vortex(mach_max: float = 0.1) -> ProblemSpec:
    """Stationary vortex in a radial gravity well, scaled by the peak Mach number.

    Density is uniform; pressure balances gravity plus the centrifugal force,
    so the configuration is an exact steady state at any Mach number.  The
    gravity well and the vortex are confined to ``r < 0.4`` around the box
    center, which keeps periodic boundaries consistent.
    """
    gamma = 1.4
    p_inf = _vortex_p_inf(mach_max, gamma)

    def radius(x, y):
        return np.sqrt((x - 0.5) ** 2 + (y - 0.5) ** 2)

    def rho(x, y, z):
        return np.ones_like(np.asarray(x, dtype=float))

    def p_eq(x, y, z):
        return p_inf + _hydrostatic_pressure(radius(x, y))

    eq = EquilibriumProfile("vortex_background", rho, p_eq)

    def gravity(x, y, z):
        r = radius(x, y)
        s = np.clip(1.0 - (r / _VORTEX_R) ** 2, 0.0, None)
        gr = -_VORTEX_G0 * s ** 2          # radial component divided by r
        g = np.zeros((3,) + np.shape(x))
        g[0] = gr * (x - 0.5)
        g[1] = gr * (y - 0.5)
        return g

    def initial(x, y, z):
        r = radius(x, y)
        speed = _vortex_speed(r)
        rr = np.where(r > 0.0, r, 1.0)
        u = -speed * (y - 0.5) / rr
        v = speed * (x - 0.5) / rr
        zero = np.zeros_like(r)
        p = p_eq(x, y, z) + _vortex_pressure(r)
        return _prim(rho(x, y, z), u, v, zero, p, zero, zero, zero)

    return ProblemSpec("vortex", 2, (40, 40), ((0.0, 1.0), (0.0, 1.0)), gamma, initial,
                       [("periodic", "periodic"), ("periodic", "periodic")], 1.26,
                       gravity=gravity, equilibrium=eq,
                       params={"mach_max": mach_max, "p_inf": p_inf},
                       solver=_low_mach_solver(mach_max))


def _low_mach_solver(mach_max: float) -> Dict[str, object]:
    # the pressure system stiffens like 1/M^2; short restarts stall near roundoff
    if mach_max >= 1e-2:
        return {}
    return {"restart": 200, "maxiter": 5000}


REGISTRY: Dict[str, Callable[..., ProblemSpec]] = {
    "sod_gravity": sod_gravity,
    "gss1d": general_steady_state_1d,
    "isothermal2d": isothermal_atmosphere_2d,
    "mhd2d": mhd_steady_state_2d,
    "vortex": low_mach_vortex,
}

EQUILIBRIA = ("none", "gss1d", "isothermal2d", "mhd2d")


def get_problem(name: str, eta: Optional[float] = None, mach_max: Optional[float] = None) -> ProblemSpec:
    if name not in REGISTRY:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}")
    if name in ("isothermal2d", "mhd2d"):
        return REGISTRY[name](eta or 0.0)
    if name == "vortex":
        return REGISTRY[name](0.1 if mach_max is None else mach_max)
    return REGISTRY[name]()


# --- set-up ----------------------------------------------------------------

def make_grid(problem: ProblemSpec, counts: Optional[Sequence[int]] = None, n_ghost: int = 2) -> Grid:
    return build_grid(problem.dim, counts or problem.counts, problem.bounds, n_ghost)


def fill_ghosts(q: np.ndarray, problem: ProblemSpec, grid: Grid) -> np.ndarray:
    """Fill ghost cells of a padded full conserved field according to the problem's boundaries."""
    exact = None
    if any("exact" in b for b in problem.bcs):
        exact = prim_to_cons(problem.initial(*grid.mesh()), problem.gamma, problem.mu)
    return _fill(q, grid, problem.bcs, state_parity, exact)


def check_equilibrium(problem: ProblemSpec, counts: Sequence[int] = (20, 40)) -> Tuple[float, float]:
    """mhse residuals on two grids; a valid profile shows second-order decay."""
    res = []
    for n in counts:
        grid = build_grid(problem.dim, [n] * problem.dim, problem.bounds)
        res.append(mhse_residual(problem.equilibrium, grid, problem.gravity, problem.mu))
    return tuple(res)


def discretize(problem: ProblemSpec, wb: bool = True, order: int = 2,
               counts: Optional[Sequence[int]] = None, n_ghost: int = 2) -> Discretization:
    grid = make_grid(problem, counts, n_ghost)
    eq = problem.equilibrium if wb else EquilibriumProfile.trivial()
    X, Y, Z = grid.mesh()
    gravity = np.asarray(problem.gravity(X, Y, Z), dtype=float)
    exact_dq = None
    if any("exact" in b for b in problem.bcs):
        q_exact = prim_to_cons(problem.initial(X, Y, Z), problem.gamma, problem.mu)
        exact_dq = q_exact - eq.state(X, Y, Z, problem.gamma, problem.mu)
    return Discretization(grid, problem.gamma, problem.mu, eq, list(problem.bcs), gravity,
                          order=order, exact_dq=exact_dq)


def initial_fields(problem: ProblemSpec, disc: Discretization):
    """Interior deviation and staggered face deviation at t = 0."""
    grid = disc.grid
    X, Y, Z = grid.mesh(ghosts=False)
    q0 = prim_to_cons(problem.initial(X, Y, Z), problem.gamma, problem.mu)
    dq = q0 - disc.interior(disc.q_eq)
    faces = StaggeredB.zeros(grid, disc.ct_axes)
    face_field = problem.face_field or (lambda x, y, z: tuple(problem.initial(x, y, z)[BX:BX + 3]))
    for a in disc.ct_axes:
        coords = [grid.centers(k, ghosts=False) for k in range(3)]
        coords[a] = grid.faces(a)
        FX, FY, FZ = np.meshgrid(*coords, indexing="ij")
        b = np.asarray(face_field(FX, FY, FZ)[a], dtype=float)
        b_eq = disc.eq.primitive(FX, FY, FZ)[BX + a]
        faces.faces[a] = b - b_eq
    centers = faces_to_centers(faces)
    for a in disc.ct_axes:
        dq[BX + a] = centers[a]
    return dq, faces


def make_simulation(problem: ProblemSpec, wb: bool = True, order: int = 2,
                    counts: Optional[Sequence[int]] = None, opts: Optional[SolverOptions] = None,
                    check: bool = True) -> Simulation:
    """Discretize a problem and set up its initial state.

    With ``check`` on, a non-trivial equilibrium must show a shrinking
    momentum-balance residual under refinement before the run starts.
    """
    if check and wb and not problem.equilibrium.is_trivial:
        r1, r2 = check_equilibrium(problem)
        if not (r2 < 0.35 * r1 or r2 < 1e-12):
            raise ValueError(f"equilibrium of {problem.name} fails the balance check "
                             f"(residuals {r1:.3e} -> {r2:.3e})")
    disc = discretize(problem, wb, order, counts)
    dq, faces = initial_fields(problem, disc)
    if opts is None:
        opts = SolverOptions(**problem.solver)
    return Simulation(disc, dq, faces, opts=opts)
