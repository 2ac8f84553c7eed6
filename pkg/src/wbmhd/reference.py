"""Fully explicit second-order Euler solver with gravity, used as a fine-grid reference.

Independent of the semi-implicit machinery: Rusanov flux with the full
acoustic speed, minmod slopes on primitive variables, SSP-RK2, solid walls.
"""
from __future__ import annotations

import numpy as np


def _prim(U, gamma):
    rho = U[0]
    u = U[1] / rho
    p = (gamma - 1.0) * (U[2] - 0.5 * rho * u * u)
    return rho, u, p


def _flux(rho, u, p, gamma):
    E = p / (gamma - 1.0) + 0.5 * rho * u * u
    return np.stack([rho * u, rho * u * u + p, u * (E + p)])


def _cons(rho, u, p, gamma):
    return np.stack([rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u])


def _minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _rate(U, dx, gamma, g):
    # two wall ghost cells per side, velocity reflected
    W = np.stack(_prim(U, gamma))
    W = np.concatenate([W[:, 1::-1], W, W[:, :-3:-1]], axis=1)
    W[1, :2] *= -1.0
    W[1, -2:] *= -1.0
    slope = _minmod(W[:, 1:-1] - W[:, :-2], W[:, 2:] - W[:, 1:-1])
    WL = W[:, 1:-2] + 0.5 * slope[:, :-1]
    WR = W[:, 2:-1] - 0.5 * slope[:, 1:]
    FL = _flux(*WL, gamma)
    FR = _flux(*WR, gamma)
    cL = np.sqrt(gamma * WL[2] / WL[0])
    cR = np.sqrt(gamma * WR[2] / WR[0])
    s = np.maximum(np.abs(WL[1]) + cL, np.abs(WR[1]) + cR)
    F = 0.5 * (FL + FR) - 0.5 * s * (_cons(*WR, gamma) - _cons(*WL, gamma))
    rate = -(F[:, 1:] - F[:, :-1]) / dx
    rate[1] += U[0] * g
    rate[2] += U[1] * g
    return rate, float(np.max(s))


def sod_gravity_reference(n: int = 2000, t_end: float = 0.2, gamma: float = 1.4,
                          g: float = -1.0, cfl: float = 0.45):
    """Cell centers and primitive ``(rho, u, p)`` of the gravity shock tube at ``t_end``."""
    dx = 1.0 / n
    x = (np.arange(n) + 0.5) * dx
    left = x < 0.5
    U = _cons(np.where(left, 1.0, 0.125), np.zeros(n), np.where(left, 1.0, 0.1), gamma)
    t = 0.0
    while t < t_end:
        k1, smax = _rate(U, dx, gamma, g)
        dt = min(cfl * dx / smax, t_end - t)
        U1 = U + dt * k1
        k2, _ = _rate(U1, dx, gamma, g)
        U = 0.5 * (U + U1 + dt * k2)
        t += dt
    rho, u, p = _prim(U, gamma)
    return x, np.stack([rho, u, p])


def restrict(fine: np.ndarray, factor: int) -> np.ndarray:
    """Average consecutive blocks of ``factor`` cells along the last axis."""
    n = fine.shape[-1] // factor
    return fine[..., : n * factor].reshape(fine.shape[:-1] + (n, factor)).mean(axis=-1)
