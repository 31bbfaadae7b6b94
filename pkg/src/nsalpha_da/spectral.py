"""
Fourier representation of periodic vector fields on [0, L]^3.

Coefficient convention: u(x) = sum_m c_m exp(i (2 pi / L) m . x), so the
coefficients are the true Fourier coefficients, c_m = mean of u exp(-ik.x).
With this convention |u|^2 = L^3 sum |c_m|^2.

Coefficient arrays have shape (3, N, N, N) and use FFT index order on each
axis (0, 1, ..., N/2-1, -N/2, ..., -1).  The Nyquist planes (|m_i| = N/2)
and the mean mode are kept identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from nsalpha_da.errors import ConfigurationError, GridMismatchError


@dataclass(frozen=True)
class GridSpec:
    """Periodic box [0, L]^3 resolved with N modes per dimension."""

    L: float
    N: int
    lambda1: float = field(init=False)

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 4 and self.N % 2 == 0):
            raise ConfigurationError(f"N must be an even integer >= 4, got {self.N!r}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ConfigurationError(f"L must be positive, got {self.L!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "lambda1", (2.0 * np.pi / self.L) ** 2)

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def band(self) -> int:
        """Largest |m_i| kept by the 2/3 rule."""
        return (self.N - 1) // 3

    def points(self) -> np.ndarray:
        """1D physical grid coordinates x_j = j L / N."""
        return np.arange(self.N) * (self.L / self.N)


def make_grid(L: float, N: int) -> GridSpec:
    return GridSpec(L=L, N=N)


class Wavenumbers(NamedTuple):
    m: np.ndarray  # (3, N, N, N) integer mode indices
    k: np.ndarray  # (3, N, N, N) wavevectors 2 pi m / L
    k2: np.ndarray  # |k|^2
    inv_k2: np.ndarray  # 1/|k|^2, zero at m = 0
    m2: np.ndarray  # integer |m|^2
    nyquist: np.ndarray  # True on any Nyquist plane
    dealias: np.ndarray  # True where all 3|m_i| < N
    neg: np.ndarray  # 1D index map i -> index of -m_i


@lru_cache(maxsize=16)
def wavenumbers(grid: GridSpec) -> Wavenumbers:
    N = grid.N
    m1 = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)
    m = np.array(np.meshgrid(m1, m1, m1, indexing="ij"))
    k = (2.0 * np.pi / grid.L) * m
    k2 = np.sum(k * k, axis=0)
    inv_k2 = np.zeros_like(k2)
    nz = k2 > 0
    inv_k2[nz] = 1.0 / k2[nz]
    m2 = np.sum(m * m, axis=0)
    nyquist = np.any(np.abs(m) == N // 2, axis=0)
    dealias = np.all(3 * np.abs(m) < N, axis=0)
    neg = (-np.arange(N)) % N
    out = Wavenumbers(m, k, k2, inv_k2, m2, nyquist, dealias, neg)
    for arr in out:
        arr.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A real 3-component vector field stored as Fourier coefficients."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, copy=True)
        N = self.grid.N
        if c.shape != (3, N, N, N):
            raise GridMismatchError(f"coefficient shape {c.shape} does not match grid N={N}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec) -> SpectralField:
        N = grid.N
        return cls(grid, np.zeros((3, N, N, N), dtype=np.complex128))

    def _check(self, other: SpectralField):
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def coeff(self, m) -> np.ndarray:
        """Coefficient 3-vector at integer wavevector m."""
        N = self.grid.N
        idx = tuple(int(mi) % N for mi in m)
        return self.coeffs[(slice(None),) + idx]


@dataclass(frozen=True)
class NormTriple:
    l2_sq: float  # |u|^2
    h1_sq: float  # ||u||^2 = |grad u|^2
    a_sq: float  # |Au|^2


def reflect(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Return the array indexed at -m (per component)."""
    neg = wavenumbers(grid).neg
    return c[:, neg][:, :, neg][:, :, :, neg]


def symmetrize(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Enforce c(-m) = conj(c(m)) exactly; keeps the real part of the field."""
    return 0.5 * (c + np.conj(reflect(c, grid)))


def _clean(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    wn = wavenumbers(grid)
    c = np.where(wn.nyquist, 0.0, c)
    c[:, 0, 0, 0] = 0.0
    return c


def _project(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    wn = wavenumbers(grid)
    kdotc = np.sum(wn.k * c, axis=0)
    out = c - wn.k * (kdotc * wn.inv_k2)
    out[:, 0, 0, 0] = 0.0  # P maps onto mean-zero fields
    return out


def leray_project(f: SpectralField) -> SpectralField:
    """Orthogonal projection onto divergence-free, mean-zero fields."""
    return SpectralField(f.grid, _project(f.coeffs, f.grid))


def neg_laplacian(f: SpectralField) -> SpectralField:
    """-Delta for an arbitrary (not necessarily solenoidal) mean-zero field."""
    return SpectralField(f.grid, f.coeffs * wavenumbers(f.grid).k2)


def stokes_apply(f: SpectralField) -> SpectralField:
    """A = -P Delta; on periodic solenoidal fields this is multiplication by |k|^2."""
    return SpectralField(f.grid, f.coeffs * wavenumbers(f.grid).k2)


def helmholtz_symbol(grid: GridSpec, alpha: float) -> np.ndarray:
    return 1.0 + alpha**2 * wavenumbers(grid).k2


def helmholtz_apply(f: SpectralField, alpha: float) -> SpectralField:
    if alpha <= 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    return SpectralField(f.grid, f.coeffs * helmholtz_symbol(f.grid, alpha))


def helmholtz_invert(f: SpectralField, alpha: float) -> SpectralField:
    if alpha <= 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    return SpectralField(f.grid, f.coeffs / helmholtz_symbol(f.grid, alpha))


def curl(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, curl_coeffs(f.coeffs, f.grid))


def curl_coeffs(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    k = wavenumbers(grid).k
    return 1j * np.cross(k, c, axis=0)


def dealias(f: SpectralField) -> SpectralField:
    """Truncate to the 2/3-rule band |m_i| < N/3."""
    return SpectralField(f.grid, np.where(wavenumbers(f.grid).dealias, f.coeffs, 0.0))


def norms_of(c: np.ndarray, grid: GridSpec) -> NormTriple:
    wn = wavenumbers(grid)
    p = np.sum(np.abs(c) ** 2, axis=0)
    V = grid.volume
    return NormTriple(
        l2_sq=float(V * np.sum(p)),
        h1_sq=float(V * np.sum(wn.k2 * p)),
        a_sq=float(V * np.sum(wn.k2 * wn.k2 * p)),
    )


def norms(f: SpectralField) -> NormTriple:
    return norms_of(f.coeffs, f.grid)


def inner(a: SpectralField, b: SpectralField) -> float:
    """L^2 pairing (a, b) = integral of a . b over the box."""
    a._check(b)
    return float(a.grid.volume * np.real(np.vdot(b.coeffs, a.coeffs)))


def divergence_residual(f: SpectralField) -> float:
    """max |k . c_m| relative to max |k| |c_m|; zero for exactly solenoidal fields."""
    wn = wavenumbers(f.grid)
    kdotc = np.abs(np.sum(wn.k * f.coeffs, axis=0))
    scale = np.max(np.sqrt(wn.k2) * np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0)))
    return float(np.max(kdotc) / scale) if scale > 0 else 0.0


def symmetry_residual(f: SpectralField) -> float:
    c = f.coeffs
    scale = np.max(np.abs(c))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(c - np.conj(reflect(c, f.grid)))) / scale)


def physical_of(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    N = grid.N
    return sfft.irfftn(c[..., : N // 2 + 1], s=(N, N, N), axes=(1, 2, 3), norm="forward")


def half_to_full(half: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Expand an rfft half-spectrum to the full coefficient array, exactly Hermitian."""
    N = grid.N
    neg = wavenumbers(grid).neg
    full = np.empty(half.shape[:-1] + (N,), dtype=np.complex128)
    full[..., : N // 2 + 1] = half
    tail = half[..., 1 : N // 2][..., ::-1]
    full[..., N // 2 + 1 :] = np.conj(tail[:, neg][:, :, neg])
    # the m3 = 0 plane holds both m and -m; make it exactly conjugate-symmetric
    plane = full[..., 0]
    full[..., 0] = 0.5 * (plane + np.conj(plane[:, neg][:, :, neg]))
    return full


def spectral_of(samples: np.ndarray, grid: GridSpec) -> np.ndarray:
    half = sfft.rfftn(samples, axes=(1, 2, 3), norm="forward")
    return half_to_full(half, grid)


def to_physical(f: SpectralField) -> np.ndarray:
    """Real samples u(x_j) on the N^3 grid, shape (3, N, N, N)."""
    return physical_of(f.coeffs, f.grid)


def from_physical(samples, grid: GridSpec, solenoidalize: bool = False) -> SpectralField:
    samples = np.asarray(samples, dtype=np.float64)
    N = grid.N
    if samples.shape != (3, N, N, N):
        raise GridMismatchError(f"samples shape {samples.shape} does not match grid N={N}")
    c = _clean(spectral_of(samples, grid), grid)
    if solenoidalize:
        c = _project(c, grid)
    return SpectralField(grid, c)


def random_field(
    grid: GridSpec,
    rng: np.random.Generator,
    max_shell: float | None = None,
    slope: float = 0.0,
    solenoidal: bool = True,
    min_shell: float = 1.0,
) -> SpectralField:
    """Seeded random real field on min_shell <= |m| <= max_shell inside the dealiased band.

    Coefficients are i.i.d. complex normal, scaled by |m|^-slope.
    """
    wn = wavenumbers(grid)
    if max_shell is None:
        max_shell = grid.N / 3
    N = grid.N
    shape = (3, N, N, N)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mag = np.sqrt(wn.m2.astype(float))
    support = wn.dealias & (mag >= min_shell) & (mag <= max_shell) & ~wn.nyquist
    env = np.zeros_like(mag)
    env[support] = mag[support] ** (-slope)
    c = symmetrize(c * env, grid)
    c = _clean(c, grid)
    if solenoidal:
        c = _project(c, grid)
    return SpectralField(grid, c)
