"""Reference computations that share no code with the package.

They work on dense arrays with ``nan`` marking missing ratings and follow the
defining formulas literally, trading speed for obviousness.
"""

import numpy as np


def dense_psi(E, r, c0=1.0):
    """sum_i m_i (c0 - d_i)^2 by explicit loops."""
    total = 0.0
    for row in E:
        rated = ~np.isnan(row)
        m = rated.sum()
        if m == 0:
            continue
        d = np.sum((row[rated] - np.asarray(r)[rated]) ** 2) / m
        total += m * (c0 - d) ** 2
    return total


def dense_pass(E, r, c0=1.0):
    """One update r -> T(r) -> r' by explicit loops (linear trust)."""
    n, m = E.shape
    r = np.asarray(r, dtype=float)
    d = np.array([np.nanmean((E[i] - r) ** 2) for i in range(n)])
    T = c0 - d
    out = np.empty(m)
    for j in range(m):
        rated = ~np.isnan(E[:, j])
        w = T[rated]
        out[j] = np.sum(w * E[rated, j]) / np.sum(w)
    return out


def _psi_on_grid(E, axes, c0):
    """psi at every point of the tensor grid spanned by ``axes``."""
    grids = np.meshgrid(*axes, indexing="ij")
    total = np.zeros(grids[0].shape)
    for row in E:
        rated = np.flatnonzero(~np.isnan(row))
        if rated.size == 0:
            continue
        sq = sum((row[j] - grids[j]) ** 2 for j in rated)
        d = sq / rated.size
        total += rated.size * (c0 - d) ** 2
    return total, grids


def grid_argmax_psi(E, c0=1.0, mesh=1e-3, final_mesh=1e-6):
    """Brute-force maximizer of psi on [0, 1]^m for m <= 2.

    A full grid at ``mesh`` locates the basin; successively finer local grids
    (each 10x finer, spanning +-5 of the previous mesh) refine it down to
    ``final_mesh``.
    """
    m = E.shape[1]
    axes = [np.linspace(0.0, 1.0, int(round(1 / mesh)) + 1)] * m
    while True:
        vals, grids = _psi_on_grid(E, axes, c0)
        k = np.unravel_index(np.argmax(vals), vals.shape)
        best = np.array([g[k] for g in grids])
        if mesh <= final_mesh * 1.0000001:
            return best
        fine = mesh / 10
        axes = [np.clip(np.arange(b - 5 * mesh, b + 5 * mesh + fine / 2, fine), 0.0, 1.0) for b in best]
        mesh = fine


def central_difference(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
