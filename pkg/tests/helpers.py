import numpy as np

from wbmhd.core import prim_to_cons


def random_primitive(n, seed=0, bmax=3.0, vmax=3.0):
    """Admissible primitive states, shape (8, n)."""
    rng = np.random.default_rng(seed)
    w = np.empty((8, n))
    w[0] = rng.uniform(0.05, 5.0, n)
    w[1:4] = rng.uniform(-vmax, vmax, (3, n))
    w[4] = rng.uniform(0.05, 5.0, n)
    w[5:8] = rng.uniform(-bmax, bmax, (3, n))
    return w


def random_states(n, gamma=1.4, mu=1.0, seed=0, **kw):
    return prim_to_cons(random_primitive(n, seed, **kw), gamma, mu)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))
