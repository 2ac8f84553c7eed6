import numpy as np
import pytest

from helpers import random_states, rel_err
from wbmhd.core import ENE, prim_to_cons
from wbmhd.physics import (eig_pressure, enthalpy, flux_convective, flux_full, flux_pressure,
                           max_eig_convective, source, wave_speeds)

GAMMA = 1.4


def prim(rho=1.0, u=0.0, v=0.0, w=0.0, p=1.0, bx=0.0, by=0.0, bz=0.0, mu=1.0, gamma=GAMMA):
    return prim_to_cons(np.array([rho, u, v, w, p, bx, by, bz], dtype=float), gamma, mu)


def test_static_gas_full_flux():
    f = flux_full(prim(), 0, GAMMA)
    assert np.allclose(f, [0, 1, 0, 0, 0, 0, 0, 0], rtol=0, atol=1e-15)


def test_static_magnetized_full_flux():
    f = flux_full(prim(p=0.7, bx=1.0, by=1.0), 0, GAMMA)
    # p + |B|^2/2 - Bx^2 = p
    assert f[1] == pytest.approx(0.7, rel=1e-14)
    assert f[6] == 0.0


@pytest.mark.parametrize("gamma,mu", [(1.4, 1.0), (5.0 / 3.0, 1.0), (2.0, 4.0 * np.pi)])
def test_flux_split_identity(gamma, mu):
    q = random_states(1000, gamma, mu, seed=1)
    for axis in range(3):
        full = flux_full(q, axis, gamma, mu)
        split = flux_convective(q, axis, mu) + flux_pressure(q, axis, gamma, mu)
        scale = np.maximum.reduce([np.abs(full), np.abs(flux_convective(q, axis, mu)),
                                   np.abs(flux_pressure(q, axis, gamma, mu)), np.full(full.shape, 1e-300)])
        assert np.max(np.abs(full - split) / scale) <= 1e-14


def test_convective_flux_at_rest_keeps_magnetic_stress():
    q = prim(p=2.0, bx=0.5, by=-1.5, bz=0.25)
    f = flux_convective(q, 0)
    m = 0.5 * (0.25 + 2.25 + 0.0625)
    assert f[1] == pytest.approx(m - 0.25, rel=1e-15)
    assert f[2] == pytest.approx(0.5 * 1.5, rel=1e-15)
    assert f[3] == pytest.approx(-0.5 * 0.25, rel=1e-15)
    for k in (0, 4, 5, 6, 7):
        assert f[k] == 0.0


def test_convective_flux_hydro_limit():
    q = prim(rho=2.0, u=1.5, v=-0.5, w=0.25, p=3.0)
    f = flux_convective(q, 0)
    rk = 0.5 * 2.0 * (1.5 ** 2 + 0.25 + 0.0625)
    expected = [3.0, 2.0 * 1.5 * 1.5, 2.0 * -0.5 * 1.5, 2.0 * 0.25 * 1.5, 1.5 * rk, 0, 0, 0]
    assert np.allclose(f, expected, rtol=1e-15, atol=0)


def test_convective_flux_is_full_minus_pressure():
    q = random_states(200, seed=2)
    for axis in range(3):
        d = flux_full(q, axis, GAMMA) - flux_pressure(q, axis, GAMMA)
        assert rel_err(flux_convective(q, axis), d) <= 1e-14


def test_pressure_flux_examples():
    assert np.allclose(flux_pressure(prim(p=1.3), 0, GAMMA), [0, 1.3, 0, 0, 0, 0, 0, 0], atol=1e-15)
    assert flux_pressure(prim(u=1.0), 0, GAMMA)[ENE] == pytest.approx(3.5, rel=1e-15)
    assert np.all(flux_pressure(prim(u=2.0, p=0.0), 0, GAMMA) == 0.0)


def test_enthalpy_examples():
    assert enthalpy(prim(), GAMMA) == pytest.approx(3.5, rel=1e-15)
    assert enthalpy(prim(p=0.0), GAMMA) == 0.0
    q = random_states(100, seed=3)
    for axis in range(3):
        assert np.allclose(enthalpy(q, GAMMA) * q[1 + axis], flux_pressure(q, axis, GAMMA)[ENE],
                           rtol=1e-15, atol=0)


def test_source_examples():
    q = prim(rho=2.0, u=1.0)
    assert np.all(source(q, np.zeros(3)) == 0.0)
    assert np.allclose(source(prim(), np.array([-1.0, 0, 0])), [0, -1, 0, 0, 0, 0, 0, 0])
    assert source(q, np.array([-1.0, 0, 0]))[ENE] == -2.0


def test_wave_speeds_hydro_limit():
    ws = wave_speeds(prim(), 0, GAMMA)
    assert ws.c_a == 0.0 and ws.c_s == 0.0
    assert ws.c_f == pytest.approx(np.sqrt(1.4), rel=1e-15)
    assert ws.c_f == pytest.approx(1.183216, abs=1e-6)


@pytest.mark.parametrize("mu", [1.0, 4.0 * np.pi])
def test_alfven_speed_normalization(mu):
    ws = wave_speeds(prim(bx=np.sqrt(mu), mu=mu), 0, GAMMA, mu)
    assert ws.c_a == pytest.approx(1.0, rel=1e-15)


def test_discriminant_stays_real_where_printed_form_fails():
    # |B|^2/rho = 0.01, c = 1, c_a = 0.1
    rho, c = 1.0, 1.0
    q = prim(rho=rho, p=c ** 2 * rho / GAMMA, bx=0.1)
    ws = wave_speeds(q, 0, GAMMA)
    assert np.isfinite(ws.c_s) and np.isfinite(ws.c_f)
    assert ws.c_s == pytest.approx(0.1, rel=1e-12)
    assert ws.c_f == pytest.approx(1.0, rel=1e-12)


def test_wave_ordering_random():
    for seed, mu in ((4, 1.0), (5, 4.0 * np.pi)):
        q = random_states(10_000, GAMMA, mu, seed=seed)
        for axis in range(3):
            ws = wave_speeds(q, axis, GAMMA, mu)
            assert np.all(ws.c_s <= ws.c_a)
            assert np.all(ws.c_a <= ws.c_f)
            assert np.all(ws.c_f >= ws.c)


def test_max_eig_convective_examples():
    assert max_eig_convective(prim(u=-0.7), 0) == pytest.approx(0.7)
    assert max_eig_convective(prim(bx=0.6, by=0.8), 0) == pytest.approx(1.0, rel=1e-15)
    assert max_eig_convective(prim(u=2.0, bz=1.0), 0) == pytest.approx(3.0, rel=1e-15)


def test_max_eig_convective_ignores_sound_speed():
    a = max_eig_convective(prim(u=0.3, p=1.0, by=0.4), 0)
    b = max_eig_convective(prim(u=0.3, p=1e4, by=0.4), 0)
    assert a == b


def test_convective_eigenvalue_galilean_shift():
    q0 = prim(u=0.5, by=1.0)
    q1 = prim(u=1.75, by=1.0)
    assert max_eig_convective(q1, 0) - max_eig_convective(q0, 0) == pytest.approx(1.25, rel=1e-14)


def test_eig_pressure_examples():
    lo, hi = eig_pressure(prim(rho=1.0, p=1.0 / GAMMA), 0, GAMMA)
    assert (lo, hi) == (pytest.approx(-1.0), pytest.approx(1.0))
    # u = 3, c = 2
    lo, hi = eig_pressure(prim(rho=1.0, u=3.0, p=4.0 / GAMMA), 0, GAMMA)
    assert lo == pytest.approx(-1.0, rel=1e-14)
    assert hi == pytest.approx(4.0, rel=1e-14)


def test_axis_rotation():
    q = random_states(300, seed=6)
    perm = [0, 2, 3, 1, 4, 6, 7, 5]      # (u,v,w) -> (v,w,u), same for B
    rotated = q[perm]
    fx = flux_full(rotated, 0, GAMMA)
    fy = flux_full(q, 1, GAMMA)
    assert rel_err(fx, fy[perm]) <= 1e-14
    assert rel_err(flux_convective(rotated, 0), flux_convective(q, 1)[perm]) <= 1e-14
