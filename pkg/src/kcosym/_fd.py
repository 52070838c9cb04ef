"""Central finite differences with the package-wide step policy."""

import numpy as np

EPS_CBRT = np.cbrt(np.finfo(float).eps)


def steps(x, base=None):
    """Per-axis step cbrt(eps) * (1 + |x_j|), or ``base * (1 + |x_j|)``."""
    h = EPS_CBRT if base is None else base
    return h * (1.0 + np.abs(np.asarray(x, dtype=float)))


def gradient(f, x, base=None):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    h = steps(x, base)
    g = np.empty_like(x)
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        g[j] = (f(xp) - f(xm)) / (xp[j] - xm[j])
    return g


def jacobian(F, x, base=None):
    """Central-difference Jacobian ``J[a, b] = dF_a / dx_b``."""
    x = np.asarray(x, dtype=float)
    h = steps(x, base)
    cols = []
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        cols.append((np.asarray(F(xp), dtype=float) - np.asarray(F(xm), dtype=float)) / (xp[j] - xm[j]))
    return np.stack(cols, axis=-1)


def directional(f, x, v, base=None):
    """Central difference of f along the line x + s v at s = 0."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = EPS_CBRT if base is None else base
    scale = 1.0 + np.max(np.abs(x))
    nv = np.max(np.abs(v))
    if nv == 0.0:
        return 0.0
    s = h * scale / nv
    return (f(x + s * v) - f(x - s * v)) / (2.0 * s)
