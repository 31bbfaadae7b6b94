import numpy as np

from nsalpha_da.spectral import SpectralField, random_field


def rand(grid, seed, **kw):
    return random_field(grid, np.random.default_rng(seed), **kw)


def single_mode(grid, m, vec):
    """Field with coefficient vec at m only (not necessarily real)."""
    N = grid.N
    c = np.zeros((3, N, N, N), dtype=complex)
    c[(slice(None),) + tuple(int(x) % N for x in m)] = vec
    return SpectralField(grid, c)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)
