"""Well-balanced semi-implicit finite-volume solver for ideal MHD with gravity."""
from .core import Grid, build_grid, cons_to_prim, prim_to_cons
from .imex import ButcherPair, Simulation, SolverError, SolverOptions, step_first_order, step_imex2
from .problems import get_problem, make_simulation

__all__ = [
    "Grid", "build_grid", "cons_to_prim", "prim_to_cons",
    "ButcherPair", "Simulation", "SolverError", "SolverOptions", "step_first_order", "step_imex2",
    "get_problem", "make_simulation",
]
__version__ = "0.1.0"
