"""Pointwise ideal-MHD physics with a convective/pressure flux split.

All functions act on arrays whose leading axis holds the 8 conserved
components; any trailing shape is allowed.  ``axis`` selects the flux
direction (0=x, 1=y, 2=z).  Magnetic terms carry a permeability-like
constant ``mu``: magnetic pressure ``|B|^2/(2 mu)``, tension ``B B / mu``.
"""
from __future__ import annotations

from typing import Callable, NamedTuple, Union

import numpy as np

from .core import (BX, ENE, MAG, MOM, RHO, InvalidStateError, kinetic_energy,
                   magnetic_energy, pressure)

GravityField = Union[np.ndarray, Callable[..., np.ndarray]]


class WaveSpeeds(NamedTuple):
    c: np.ndarray
    c_a: np.ndarray
    c_s: np.ndarray
    c_f: np.ndarray
    b2: np.ndarray


def _velocity(q):
    return q[MOM[0]] / q[RHO], q[MOM[1]] / q[RHO], q[MOM[2]] / q[RHO]


def flux_convective(q: np.ndarray, axis: int, mu: float = 1.0) -> np.ndarray:
    """Explicitly treated part of the flux along ``axis``.

    The energy component carries kinetic and magnetic energy transport plus
    the magnetic-pressure work, ``u_n (rho k + 2 m) - B_n (v . B) / mu``, so
    that adding :func:`flux_pressure` recovers the full flux; pressure and
    enthalpy live there.
    """
    q = np.asarray(q, dtype=float)
    vel = _velocity(q)
    un = vel[axis]
    bn = q[BX + axis]
    f = np.empty_like(q)
    f[RHO] = q[MOM[axis]]
    for k in range(3):
        f[MOM[k]] = q[MOM[k]] * un - bn * q[BX + k] / mu
    f[MOM[axis]] += magnetic_energy(q, mu)
    vdotb = vel[0] * q[MAG[0]] + vel[1] * q[MAG[1]] + vel[2] * q[MAG[2]]
    f[ENE] = un * (kinetic_energy(q) + 2.0 * magnetic_energy(q, mu)) - bn * vdotb / mu
    for k in range(3):
        f[BX + k] = un * q[BX + k] - vel[k] * bn
    f[BX + axis] = 0.0
    return f


def enthalpy(q: np.ndarray, gamma: float, mu: float = 1.0) -> np.ndarray:
    """Gas-dynamic specific enthalpy ``gamma p / ((gamma - 1) rho)``."""
    q = np.asarray(q, dtype=float)
    if np.any(q[RHO] <= 0.0):
        raise InvalidStateError("non-positive density in enthalpy")
    return gamma * pressure(q, gamma, mu) / ((gamma - 1.0) * q[RHO])


def flux_pressure(q: np.ndarray, axis: int, gamma: float, mu: float = 1.0) -> np.ndarray:
    """Implicitly treated part of the flux: ``p`` in normal momentum, ``h rho u_n`` in energy."""
    q = np.asarray(q, dtype=float)
    f = np.zeros_like(q)
    f[MOM[axis]] = pressure(q, gamma, mu)
    f[ENE] = enthalpy(q, gamma, mu) * q[MOM[axis]]
    return f


def flux_full(q: np.ndarray, axis: int, gamma: float, mu: float = 1.0) -> np.ndarray:
    """Physical ideal-MHD flux along ``axis``, written out independently of the split."""
    q = np.asarray(q, dtype=float)
    rho = q[RHO]
    vel = _velocity(q)
    B = [q[BX + k] for k in range(3)]
    p = pressure(q, gamma, mu)
    pm = 0.5 * (B[0] ** 2 + B[1] ** 2 + B[2] ** 2) / mu
    un, bn = vel[axis], B[axis]
    vdotb = vel[0] * B[0] + vel[1] * B[1] + vel[2] * B[2]
    f = np.empty_like(q)
    f[RHO] = rho * un
    for k in range(3):
        f[MOM[k]] = rho * vel[k] * un - bn * B[k] / mu + (p + pm if k == axis else 0.0)
    f[ENE] = un * (q[ENE] + p + pm) - bn * vdotb / mu
    for k in range(3):
        f[BX + k] = 0.0 if k == axis else un * B[k] - vel[k] * bn
    return f


def source(q: np.ndarray, g) -> np.ndarray:
    """Gravity source ``(0, rho g, rho v . g, 0)``; ``g`` has a leading axis of 3."""
    q = np.asarray(q, dtype=float)
    g = np.asarray(g, dtype=float)
    s = np.zeros(np.broadcast_shapes(q.shape, (q.shape[0],) + g.shape[1:]))
    for k in range(3):
        s[MOM[k]] = q[RHO] * g[k]
    s[ENE] = q[MOM[0]] * g[0] + q[MOM[1]] * g[1] + q[MOM[2]] * g[2]
    return s


def wave_speeds(q: np.ndarray, axis: int, gamma: float, mu: float = 1.0) -> WaveSpeeds:
    q = np.asarray(q, dtype=float)
    rho = q[RHO]
    if np.any(rho <= 0.0):
        raise InvalidStateError("non-positive density in wave_speeds")
    p = pressure(q, gamma, mu)
    if np.any(p <= 0.0):
        raise InvalidStateError("non-positive pressure in wave_speeds")
    c2 = gamma * p / rho
    b2 = (q[BX] ** 2 + q[BX + 1] ** 2 + q[BX + 2] ** 2) / (mu * rho)
    ca2 = q[BX + axis] ** 2 / (mu * rho)
    disc = np.sqrt(np.maximum((b2 + c2) ** 2 - 4.0 * ca2 * c2, 0.0))
    cs2 = np.maximum(0.5 * (b2 + c2 - disc), 0.0)
    cf2 = 0.5 * (b2 + c2 + disc)
    # the slow/fast pair brackets the Alfven speed only up to rounding
    ca = np.abs(q[BX + axis]) / np.sqrt(mu * rho)
    cs = np.minimum(np.sqrt(cs2), ca)
    cf = np.maximum(np.sqrt(cf2), np.maximum(ca, np.sqrt(c2)))
    return WaveSpeeds(np.sqrt(c2), ca, cs, cf, b2)


def max_eig_convective(q: np.ndarray, axis: int, mu: float = 1.0) -> np.ndarray:
    """Largest convective eigenvalue magnitude ``|u_n| + sqrt(|B|^2 / (mu rho))``."""
    q = np.asarray(q, dtype=float)
    rho = q[RHO]
    if np.any(rho <= 0.0):
        raise InvalidStateError("non-positive density in max_eig_convective")
    un = q[MOM[axis]] / rho
    s = np.sqrt((q[BX] ** 2 + q[BX + 1] ** 2 + q[BX + 2] ** 2) / (mu * rho))
    return np.maximum(np.abs(un + s), np.abs(un - s))


def eig_pressure(q: np.ndarray, axis: int, gamma: float, mu: float = 1.0):
    """Non-zero eigenvalues ``(u -/+ sqrt(u^2 + 4 c^2)) / 2`` of the pressure sub-system."""
    q = np.asarray(q, dtype=float)
    un = q[MOM[axis]] / q[RHO]
    c2 = gamma * pressure(q, gamma, mu) / q[RHO]
    root = np.sqrt(un ** 2 + 4.0 * c2)
    return 0.5 * (un - root), 0.5 * (un + root)
