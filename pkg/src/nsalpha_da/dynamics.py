"""
NS-alpha evolution in the momentum variable v = (I + alpha^2 A) u:

    dv/dt + nu A v + Btilde(u, v) = f,    Btilde(u, v) = -P(u x curl v).

The nonlinear term is evaluated pseudo-spectrally with 2/3-rule truncation,
which makes it the exact Galerkin projection of the truncated product.
Time stepping is CNAB2: Crank-Nicolson on nu A, Adams-Bashforth 2 on the
explicit part, started with one Euler predictor / trapezoidal corrector step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from nsalpha_da.errors import ConfigurationError, GridMismatchError, StepError
from nsalpha_da.spectral import (
    GridSpec,
    SpectralField,
    _project,
    curl_coeffs,
    helmholtz_symbol,
    norms,
    norms_of,
    physical_of,
    random_field,
    spectral_of,
    wavenumbers,
)

CFL_SAFETY = 0.5


@dataclass(frozen=True)
class ForcingSpec:
    kind: str = "zero"  # zero | low_mode_deterministic
    amplitude: float = 0.0  # target |f|
    max_mode: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "low_mode_deterministic"):
            raise ConfigurationError(f"unknown forcing kind {self.kind!r}")
        if self.max_mode < 1:
            raise ConfigurationError("forcing max_mode must be >= 1")
        if self.amplitude < 0:
            raise ConfigurationError("forcing amplitude must be >= 0")


@dataclass(frozen=True)
class PhysicalSetup:
    grid: GridSpec
    nu: float
    alpha: float
    forcing: ForcingSpec = ForcingSpec()

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class StepParams:
    dt: float
    dealias: str = "two_thirds"
    scheme: str = "imex_cnab2"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.dealias != "two_thirds" or self.scheme != "imex_cnab2":
            raise ConfigurationError("only two_thirds dealiasing with imex_cnab2 is supported")


@dataclass(frozen=True, eq=False)
class SolverState:
    """Filtered velocity u at time t, plus the multistep history.

    ``v`` caches (I + alpha^2 A) u exactly as integrated; ``rhs_prev`` is the
    explicit term of the previous step (None until the startup step ran).
    """

    u: SpectralField
    t: float
    v: np.ndarray | None = None
    rhs_prev: np.ndarray | None = None
    dt_prev: float | None = None

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


def initial_state(u0: SpectralField, setup: PhysicalSetup, t: float = 0.0) -> SolverState:
    return SolverState(u=u0, t=t)


def make_forcing(spec: ForcingSpec, grid: GridSpec) -> SpectralField:
    if spec.kind == "zero" or spec.amplitude == 0.0:
        return SpectralField.zeros(grid)
    rng = np.random.default_rng(spec.seed)
    f = random_field(grid, rng, max_shell=spec.max_mode)
    size = np.sqrt(norms(f).l2_sq)
    return f * (spec.amplitude / size)


@lru_cache(maxsize=8)
def _forcing_cached(spec: ForcingSpec, grid: GridSpec) -> np.ndarray:
    c = np.array(make_forcing(spec, grid).coeffs)
    c.flags.writeable = False
    return c


def forcing_coeffs(setup: PhysicalSetup) -> np.ndarray:
    return _forcing_cached(setup.forcing, setup.grid)


def grashof(setup: PhysicalSetup) -> float:
    f = SpectralField(setup.grid, forcing_coeffs(setup))
    return grashof_of(np.sqrt(norms(f).l2_sq), setup.nu, setup.grid.lambda1)


def grashof_of(f_norm: float, nu: float, lambda1: float) -> float:
    return f_norm / (nu**2 * lambda1**0.75)


def _btilde(u_hat: np.ndarray, v_hat: np.ndarray, grid: GridSpec):
    """Return (Btilde coefficients, max |u| on the grid)."""
    mask = wavenumbers(grid).dealias
    u_hat = np.where(mask, u_hat, 0.0)
    v_hat = np.where(mask, v_hat, 0.0)
    u_x = physical_of(u_hat, grid)
    w_x = physical_of(curl_coeffs(v_hat, grid), grid)
    prod = np.cross(u_x, w_x, axis=0)
    c = np.where(mask, spectral_of(prod, grid), 0.0)
    umax = float(np.sqrt(np.max(np.sum(u_x * u_x, axis=0))))
    return -_project(c, grid), umax


def btilde(u: SpectralField, v: SpectralField) -> SpectralField:
    """Btilde(u, v) = -P(u x curl v), dealiased; inputs are truncated to the 2/3 band."""
    if u.grid != v.grid:
        raise GridMismatchError(f"grid mismatch: {u.grid} vs {v.grid}")
    c, _ = _btilde(u.coeffs, v.coeffs, u.grid)
    return SpectralField(u.grid, c)


def cfl_number(umax: float, grid: GridSpec, dt: float) -> float:
    return dt * umax * (2.0 * np.pi / grid.L) * (grid.N / 2)


def check_cfl(umax: float, grid: GridSpec, dt: float) -> None:
    cfl = cfl_number(umax, grid, dt)
    if cfl > CFL_SAFETY:
        raise StepError(f"CFL number {cfl:.4g} exceeds {CFL_SAFETY} (max|u|={umax:.4g}, dt={dt})", cfl)


class LinearStep:
    """Precomputed diagonal symbols for a fixed (setup, dt)."""

    def __init__(self, setup: PhysicalSetup, dt: float):
        grid = setup.grid
        self.grid = grid
        self.dt = dt
        self.half_visc = 0.5 * dt * setup.nu * wavenumbers(grid).k2
        self.lhs = 1.0 + self.half_visc
        self.rhs = 1.0 - self.half_visc
        self.helm = helmholtz_symbol(grid, setup.alpha)
        self.f = forcing_coeffs(setup)

    def explicit(self, u_hat: np.ndarray, v_hat: np.ndarray):
        b, umax = _btilde(u_hat, v_hat, self.grid)
        return self.f - b, umax


def _v_of(state: SolverState, lin: LinearStep) -> np.ndarray:
    return state.v if state.v is not None else state.u.coeffs * lin.helm


def advance(state: SolverState, lin: LinearStep, extra=None):
    """One CNAB2 step; returns (v_new, rhs_now).

    ``extra`` optionally returns an additional explicit forcing term (array)
    for the current state; it is added to the explicit right-hand side.
    """
    dt = lin.dt
    u_hat = state.u.coeffs
    v_hat = _v_of(state, lin)
    rhs, umax = lin.explicit(u_hat, v_hat)
    check_cfl(umax, lin.grid, dt)
    if state.rhs_prev is None or state.dt_prev != dt:
        # startup: Euler predictor, trapezoidal corrector on the nonlinear part;
        # the extra term enters as forward Euler in this single step
        ex = 0.0 if extra is None else extra
        v_pred = (lin.rhs * v_hat + dt * (rhs + ex)) / lin.lhs
        rhs_pred, _ = lin.explicit(v_pred / lin.helm, v_pred)
        v_new = (lin.rhs * v_hat + dt * (0.5 * (rhs + rhs_pred) + ex)) / lin.lhs
        if extra is not None:
            rhs = rhs + extra
    else:
        if extra is not None:
            rhs = rhs + extra
        v_new = (lin.rhs * v_hat + dt * (1.5 * rhs - 0.5 * state.rhs_prev)) / lin.lhs
    return v_new, rhs


def state_from_v(v_new: np.ndarray, rhs: np.ndarray, lin: LinearStep, t: float) -> SolverState:
    u = SpectralField(lin.grid, v_new / lin.helm)
    v_new = np.array(v_new)
    v_new.flags.writeable = False
    return SolverState(u=u, t=t, v=v_new, rhs_prev=rhs, dt_prev=lin.dt)


_LIN_CACHE: dict = {}


def linear_step(setup: PhysicalSetup, dt: float) -> LinearStep:
    key = (setup, dt)
    lin = _LIN_CACHE.get(key)
    if lin is None:
        if len(_LIN_CACHE) > 16:
            _LIN_CACHE.clear()
        lin = _LIN_CACHE[key] = LinearStep(setup, dt)
    return lin


def step_reference(state: SolverState, setup: PhysicalSetup, p: StepParams) -> SolverState:
    if state.grid != setup.grid:
        raise GridMismatchError("state and setup grids differ")
    lin = linear_step(setup, p.dt)
    v_new, rhs = advance(state, lin)
    return state_from_v(v_new, rhs, lin, state.t + p.dt)


def integrate(state: SolverState, setup: PhysicalSetup, p: StepParams, t_end: float) -> SolverState:
    """Step until t_end (to within half a step); the step count is round((t_end - t)/dt)."""
    n = int(round((t_end - state.t) / p.dt))
    t0 = state.t
    lin = linear_step(setup, p.dt)
    for i in range(1, n + 1):
        v_new, rhs = advance(state, lin)
        state = state_from_v(v_new, rhs, lin, t0 + i * p.dt)
    return state


def combined_energy(u: SpectralField, alpha: float) -> float:
    """1/2 (|u|^2 + alpha^2 ||u||^2)."""
    n = norms(u)
    return 0.5 * (n.l2_sq + alpha**2 * n.h1_sq)


def energy_budget(before: SolverState, after: SolverState, setup: PhysicalSetup, dt: float) -> float:
    """Discrete energy residual evaluated at the midpoint field.

    |dE/dt + nu (||u||^2 + alpha^2 |Au|^2) - (f, u)| with E the combined
    energy; Crank-Nicolson makes the linear part an exact identity, so the
    residual isolates the explicit nonlinear discretization error.
    """
    grid = setup.grid
    e0 = combined_energy(before.u, setup.alpha)
    e1 = combined_energy(after.u, setup.alpha)
    mid = 0.5 * (before.u.coeffs + after.u.coeffs)
    n = norms_of(mid, grid)
    f = forcing_coeffs(setup)
    work = grid.volume * float(np.real(np.vdot(mid, f)))
    return abs((e1 - e0) / dt + setup.nu * (n.h1_sq + setup.alpha**2 * n.a_sq) - work)
