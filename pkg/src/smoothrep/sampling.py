"""Seeded low-discrepancy sampling helpers (scrambled Sobol via scipy)."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


def sobol_unit(n: int, dim: int, seed: int) -> np.ndarray:
    """n scrambled Sobol points in [0, 1]^dim, deterministic in seed."""
    if dim == 0:
        return np.zeros((n, 0))
    eng = qmc.Sobol(dim, scramble=True, seed=seed)
    m = 1 << max(1, int(n - 1).bit_length())
    return eng.random(m)[:n]


def sobol_box(n: int, lo, hi, seed: int) -> np.ndarray:
    """n Sobol points in the axis-aligned box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    pts = sobol_unit(n, lo.size, seed)
    return lo + (hi - lo) * pts


def sobol_ball(n: int, center, radius: float, seed: int) -> np.ndarray:
    """n Sobol points in the closed ball, by rejection from the bounding cube.

    The center itself is always the first point, so sampled maxima over
    nested balls are exact at the origin of the family.
    """
    center = np.asarray(center, dtype=float)
    dim = center.size
    if dim == 0:
        return np.zeros((max(n, 1), 0))
    out = [np.zeros((1, dim))]
    have = 1
    block = max(64, 4 * n)
    offset = 0
    while have < n:
        cube = 2.0 * sobol_unit(block, dim, seed + offset) - 1.0
        keep = cube[np.sum(cube * cube, axis=1) <= 1.0]
        out.append(keep)
        have += keep.shape[0]
        offset += 1
    pts = np.concatenate(out, axis=0)[:n]
    return center + radius * pts


def sobol_directions(n: int, dim: int, seed: int) -> np.ndarray:
    """n well-spread unit vectors (Sobol -> Gaussian -> normalize)."""
    if dim == 1:
        signs = np.ones(n)
        signs[1::2] = -1.0
        return signs[:, None]
    u = sobol_unit(n, dim, seed)
    g = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    return g / nrm
