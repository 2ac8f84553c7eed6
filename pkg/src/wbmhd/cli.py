"""Command-line driver: configuration, CSV writers and the convergence harness."""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from .core import RHO, Grid, InvalidStateError, build_grid, cons_to_prim, kinetic_energy, prim_to_cons
from .imex import SolverError, SolverOptions, StepRecord
from .physics import wave_speeds
from .problems import REGISTRY, ProblemSpec, get_problem, make_simulation
from .reference import restrict, sod_gravity_reference

OUTPUT_ENV = "WBMHD_OUTPUT_DIR"
UNDEFINED = "—"
SNAPSHOT_COLUMNS = ("x", "y", "z", "rho", "u", "v", "w", "p", "Bx", "By", "Bz", "mach")
DIAGNOSTIC_COLUMNS = ("t", "dt", "divb_max", "krylov_iterations", "krylov_residual",
                      "mass", "energy", "kinetic_energy")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str
    nx: Optional[int] = None
    ny: Optional[int] = None
    nz: Optional[int] = None
    cfl: float = 0.9
    order: int = 2
    wb: bool = True
    tol: Optional[float] = None
    maxiter: Optional[int] = None
    restart: Optional[int] = None
    t_end: Optional[float] = None
    out: str = "output"
    snapshot_every: int = 0
    mu: Optional[float] = None
    eta: Optional[float] = None
    mach_max: Optional[float] = None

    def build_problem(self) -> ProblemSpec:
        problem = get_problem(self.problem, eta=self.eta, mach_max=self.mach_max)
        counts = [self.nx, self.ny, self.nz][: problem.dim]
        problem = problem.with_counts(counts)
        if self.t_end is not None:
            problem = replace(problem, t_end=self.t_end)
        if self.mu is not None:
            problem = replace(problem, mu=self.mu)
        return problem

    def solver_options(self, problem: ProblemSpec) -> SolverOptions:
        kw = dict(problem.solver)
        for key in ("tol", "maxiter", "restart"):
            value = getattr(self, key)
            if value is not None:
                kw[key] = value
        return SolverOptions(**kw)


_FIELD_TYPES = {
    "problem": str, "nx": int, "ny": int, "nz": int, "cfl": float, "order": int,
    "wb": bool, "tol": float, "maxiter": int, "restart": int, "t_end": float,
    "out": str, "snapshot_every": int, "mu": float, "eta": float, "mach_max": float,
}


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    if value is None:
        return None
    if kind is bool:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("on", "true", "yes", "1"):
            return True
        if text in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected on/off, got {value!r}")
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if kind is float:
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    return str(value)


def parse_config(path: Optional[str] = None, overrides: Optional[Dict[str, object]] = None,
                 text: Optional[str] = None) -> RunConfig:
    """Merge a YAML mapping with overrides (``None`` values are ignored).

    Grid counts and ``t_end`` left unset are filled from the problem defaults.
    """
    data: Dict[str, object] = {}
    if path is not None:
        with open(path) as fh:
            text = fh.read()
    if text is not None:
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a key-value mapping")
        data.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(map(str, unknown))}")
    if "problem" not in data or data["problem"] is None:
        raise ConfigError("missing problem name")
    values = {k: _coerce(k, v) for k, v in data.items()}
    cfg = RunConfig(**values)
    if cfg.problem not in REGISTRY:
        raise ConfigError(f"unknown problem {cfg.problem!r}; choose from {sorted(REGISTRY)}")
    if not 0.0 < cfg.cfl <= 1.0:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfg.cfl}")
    if cfg.order not in (1, 2):
        raise ConfigError(f"order must be 1 or 2, got {cfg.order}")
    if cfg.snapshot_every < 0:
        raise ConfigError("snapshot_every must be non-negative")
    for key in ("nx", "ny", "nz", "maxiter", "restart"):
        v = getattr(cfg, key)
        if v is not None and v < 1:
            raise ConfigError(f"{key} must be positive")
    for key in ("tol", "t_end", "mu"):
        v = getattr(cfg, key)
        if v is not None and not v > 0.0:
            raise ConfigError(f"{key} must be positive")
    base = get_problem(cfg.problem, eta=cfg.eta, mach_max=cfg.mach_max)
    names = ("nx", "ny", "nz")
    for axis in range(base.dim):
        if getattr(cfg, names[axis]) is None:
            setattr(cfg, names[axis], base.counts[axis])
    if cfg.t_end is None:
        cfg.t_end = base.t_end
    return cfg


# --- snapshots -------------------------------------------------------------

@dataclass
class Snapshot:
    dim: int
    counts: tuple
    bounds: tuple
    t: float
    gamma: float
    mu: float
    coords: np.ndarray
    prim: np.ndarray
    mach: np.ndarray

    @property
    def grid(self) -> Grid:
        return build_grid(self.dim, self.counts[: self.dim], self.bounds[: self.dim])

    def conserved(self) -> np.ndarray:
        return prim_to_cons(self.prim, self.gamma, self.mu)


def _fmt(v: float) -> str:
    return "%.17g" % v


def local_mach(q: np.ndarray, gamma: float, mu: float = 1.0) -> np.ndarray:
    speed = np.sqrt(sum((q[RHO + 1 + k] / q[RHO]) ** 2 for k in range(3)))
    return speed / wave_speeds(q, 0, gamma, mu).c


def write_snapshot(q: np.ndarray, grid: Grid, t: float, path: str, gamma: float, mu: float = 1.0):
    """Write the interior conserved state ``q`` as primitive CSV, x fastest."""
    w = cons_to_prim(q, gamma, mu)
    mach = local_mach(q, gamma, mu)
    X, Y, Z = grid.mesh(ghosts=False)
    cols = [X, Y, Z] + [w[k] for k in range(8)] + [mach]
    flat = np.stack([np.ravel(c, order="F") for c in cols], axis=1)
    bounds = list(zip(grid.lo, grid.hi))
    with open(path, "w", newline="") as fh:
        fh.write(f"# dim={grid.dim}\n")
        fh.write("# counts=" + ",".join(str(n) for n in grid.n) + "\n")
        fh.write("# bounds=" + ";".join(f"{_fmt(a)},{_fmt(b)}" for a, b in bounds) + "\n")
        fh.write(f"# t={_fmt(t)}\n# gamma={_fmt(gamma)}\n# mu={_fmt(mu)}\n")
        fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        for row in flat:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_snapshot(path: str) -> Snapshot:
    meta: Dict[str, str] = {}
    rows: List[List[float]] = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif header is None:
                header = tuple(line.split(","))
            else:
                rows.append([float(v) for v in line.split(",")])
    if header != SNAPSHOT_COLUMNS:
        raise ValueError(f"unexpected snapshot columns in {path}")
    counts = tuple(int(v) for v in meta["counts"].split(","))
    bounds = tuple(tuple(float(v) for v in b.split(",")) for b in meta["bounds"].split(";"))
    data = np.asarray(rows, dtype=float).reshape(-1, len(SNAPSHOT_COLUMNS))
    if data.shape[0] != int(np.prod(counts)):
        raise ValueError(f"{path}: expected {np.prod(counts)} rows, found {data.shape[0]}")

    def field(k):
        return data[:, k].reshape(counts, order="F")

    return Snapshot(int(meta["dim"]), counts, bounds, float(meta["t"]), float(meta["gamma"]),
                    float(meta["mu"]), np.stack([field(k) for k in range(3)]),
                    np.stack([field(3 + k) for k in range(8)]), field(11))


# --- diagnostics -----------------------------------------------------------

def write_diagnostics(history: Sequence[StepRecord], path: str):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(DIAGNOSTIC_COLUMNS)
        for rec in history:
            out.writerow([_fmt(rec.t), _fmt(rec.dt), _fmt(rec.divb_max), rec.krylov_iterations,
                          _fmt(rec.krylov_residual), _fmt(rec.mass), _fmt(rec.energy),
                          _fmt(rec.kinetic_energy)])


def total_kinetic_energy(q: np.ndarray, cell_volume: float) -> float:
    return float(np.sum(kinetic_energy(q)) * cell_volume)


def kinetic_energy_series(history: Sequence[StepRecord]) -> np.ndarray:
    """Rows ``(t, E_kin, E_kin / E_kin(0))``; the ratio is NaN when ``E_kin(0) = 0``."""
    t = np.array([r.t for r in history], dtype=float)
    ek = np.array([r.kinetic_energy for r in history], dtype=float)
    if ek.size and ek[0] != 0.0:
        ratio = ek / ek[0]
    else:
        ratio = np.full_like(ek, np.nan)
    return np.stack([t, ek, ratio], axis=1)


def write_kinetic_energy(series: np.ndarray, path: str):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(("t", "E_kin", "E_kin_normalized"))
        for row in series:
            out.writerow([_fmt(v) for v in row])


# --- convergence -----------------------------------------------------------

def _variables(dim: int) -> Dict[str, int]:
    names = {"rho": 0, "u": 1}
    if dim >= 2:
        names["v"] = 2
    if dim >= 3:
        names["w"] = 3
    names["p"] = 4
    return names


def eoc(coarse: float, fine: float) -> float:
    """``log2(coarse / fine)``; NaN when either error is zero or not finite."""
    if not (coarse > 0.0 and fine > 0.0 and math.isfinite(coarse) and math.isfinite(fine)):
        return math.nan
    return math.log2(coarse / fine)


@dataclass
class ConvergenceRow:
    n: int
    errors: Dict[str, float]
    eoc: Dict[str, float]
    iterations: int
    residual: float
    steps: int


def l1_errors(w: np.ndarray, w_ref: np.ndarray, cell_volume: float, dim: int) -> Dict[str, float]:
    return {name: float(np.sum(np.abs(w[k] - w_ref[k])) * cell_volume)
            for name, k in _variables(dim).items()}


def _reference(problem: ProblemSpec, sim, cache: Dict) -> np.ndarray:
    grid = sim.disc.grid
    if problem.stationary:
        # the initial data as stored, so an untouched state has zero error
        q0 = prim_to_cons(problem.initial(*grid.mesh(ghosts=False)), problem.gamma, problem.mu)
        return cons_to_prim(q0, problem.gamma, problem.mu)
    if problem.name == "sod_gravity":
        if "sod" not in cache:
            cache["sod"] = sod_gravity_reference(t_end=problem.t_end, gamma=problem.gamma)[1]
        ref = cache["sod"]
        n = grid.n[0]
        if ref.shape[1] % n:
            raise ValueError(f"reference resolution is not a multiple of {n}")
        coarse = restrict(ref, ref.shape[1] // n)
        w = np.zeros((8, n, 1, 1))
        w[0, :, 0, 0], w[1, :, 0, 0], w[4, :, 0, 0] = coarse
        return w
    raise ValueError(f"no reference solution for problem {problem.name!r}")


def convergence_study(problem: ProblemSpec, grids: Sequence[int], order: int = 2, wb: bool = False,
                      cfl: float = 0.9, opts: Optional[SolverOptions] = None) -> List[ConvergenceRow]:
    """L1 errors against the exact (stationary) or reference solution on a grid sequence."""
    rows: List[ConvergenceRow] = []
    cache: Dict = {}
    for n in grids:
        sim = make_simulation(problem, wb=wb, order=order, counts=[n] * problem.dim, opts=opts)
        res = sim.run(problem.t_end, cfl=cfl, order=order)
        w = cons_to_prim(sim.full_state(), problem.gamma, problem.mu)
        errors = l1_errors(w, _reference(problem, sim, cache), sim.disc.grid.cell_volume, problem.dim)
        rates = {k: math.nan for k in errors}
        if rows:
            rates = {k: eoc(rows[-1].errors[k], errors[k]) for k in errors}
        rows.append(ConvergenceRow(n, errors, rates,
                                   max(h.krylov_iterations for h in res.history),
                                   max(h.krylov_residual for h in res.history), res.steps))
    return rows


def format_convergence(rows: Sequence[ConvergenceRow]) -> str:
    if not rows:
        return ""
    names = list(rows[0].errors)
    head = ["N"]
    for k in names:
        head += [f"L1({k})", f"EOC({k})"]
    head += ["iterations", "residual"]
    lines = [" | ".join(head)]
    for r in rows:
        cells = [str(r.n)]
        for k in names:
            rate = r.eoc[k]
            cells += ["%.4E" % r.errors[k], UNDEFINED if math.isnan(rate) else "%.2f" % rate]
        cells += [str(r.iterations), "%.4E" % r.residual]
        lines.append(" | ".join(cells))
    return "\n".join(lines)


def write_convergence(rows: Sequence[ConvergenceRow], path: str):
    if not rows:
        return
    names = list(rows[0].errors)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["N"] + [c for k in names for c in (f"L1_{k}", f"EOC_{k}")]
                     + ["iterations", "residual"])
        for r in rows:
            cells = [r.n]
            for k in names:
                cells += [_fmt(r.errors[k]), UNDEFINED if math.isnan(r.eoc[k]) else "%.2f" % r.eoc[k]]
            out.writerow(cells + [r.iterations, _fmt(r.residual)])


# --- driver ----------------------------------------------------------------

def output_dir(cfg: RunConfig, flag: Optional[str] = None) -> str:
    """Flag beats environment beats config file."""
    return flag or os.environ.get(OUTPUT_ENV) or cfg.out


def run_config(cfg: RunConfig, out_dir: str, log=print):
    problem = cfg.build_problem()
    os.makedirs(out_dir, exist_ok=True)
    sim = make_simulation(problem, wb=cfg.wb, order=cfg.order, opts=cfg.solver_options(problem))
    grid = sim.disc.grid
    stem = os.path.join(out_dir, problem.name)

    def snapshot(s, rec):
        if cfg.snapshot_every and s.steps % cfg.snapshot_every == 0:
            write_snapshot(s.full_state(), grid, s.t, f"{stem}_step{s.steps:06d}.csv",
                           problem.gamma, problem.mu)

    res = sim.run(cfg.t_end, cfl=cfg.cfl, order=cfg.order, callback=snapshot)
    write_snapshot(sim.full_state(), grid, res.t, f"{stem}_final.csv", problem.gamma, problem.mu)
    write_diagnostics(res.history, f"{stem}_diagnostics.csv")
    write_kinetic_energy(kinetic_energy_series(res.history), f"{stem}_kinetic_energy.csv")
    log(f"{problem.name}: {res.steps} steps to t={res.t:.6g}, "
        f"max GMRES iterations {max(h.krylov_iterations for h in res.history)}")
    return res


def _grids(text: str) -> List[int]:
    try:
        grids = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid list {text!r}") from None
    if not grids or min(grids) < 1:
        raise argparse.ArgumentTypeError(f"bad grid list {text!r}")
    return grids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wbmhd", description="Well-balanced semi-implicit MHD solver")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one configuration")
    run.add_argument("config")
    run.add_argument("--nx", type=int)
    run.add_argument("--ny", type=int)
    run.add_argument("--cfl", type=float)
    run.add_argument("--order", type=int)
    run.add_argument("--wb", choices=("on", "off"))
    run.add_argument("--t-end", type=float, dest="t_end")
    run.add_argument("--out")
    run.add_argument("--eta", type=float)
    run.add_argument("--mach-max", type=float, dest="mach_max")
    conv = sub.add_parser("convergence", help="grid convergence table")
    conv.add_argument("config")
    conv.add_argument("--grids", type=_grids, default=[20, 40, 80, 160])
    conv.add_argument("--out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.command == "run":
        overrides = {k: getattr(args, k) for k in ("nx", "ny", "cfl", "order", "wb", "t_end", "eta", "mach_max")}
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = output_dir(cfg, args.out)
    try:
        if args.command == "run":
            run_config(cfg, out_dir)
        else:
            problem = cfg.build_problem()
            rows = convergence_study(problem, args.grids, order=cfg.order, wb=cfg.wb,
                                     cfl=cfg.cfl, opts=cfg.solver_options(problem))
            os.makedirs(out_dir, exist_ok=True)
            write_convergence(rows, os.path.join(out_dir, f"{problem.name}_convergence.csv"))
            print(format_convergence(rows))
    except (SolverError, InvalidStateError, ValueError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
