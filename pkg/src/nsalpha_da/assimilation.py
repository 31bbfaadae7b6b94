"""
Nudged NS-alpha twin experiments.

The assimilating field w solves the NS-alpha equations with the feedback
term -mu (I + alpha^2 A) P (I_h w - I_h u) in the momentum variable
z = (I + alpha^2 A) w.  For the modes observer this term is diagonal and is
solved implicitly (Crank-Nicolson); otherwise it is explicit (AB2) and
guarded by mu * dt <= 0.5.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from nsalpha_da.dynamics import (
    PhysicalSetup,
    SolverState,
    StepParams,
    advance,
    btilde,
    grashof,
    linear_step,
    state_from_v,
)
from nsalpha_da.errors import ConfigurationError, StepError
from nsalpha_da.observers import ObserverSpec, _kept_mask, is_zero, lift, mode_cutoff, observe
from nsalpha_da.spectral import (
    GridSpec,
    SpectralField,
    inner,
    norms,
    norms_of,
    random_field,
    wavenumbers,
)

log = logging.getLogger(__name__)

MU_DT_LIMIT = 0.5


@dataclass(frozen=True)
class InitialCondition:
    """zero | random (seeded, |u| = amplitude on 1 <= |m| <= max_mode) | snapshot."""

    kind: str = "zero"
    amplitude: float = 1.0
    max_mode: float = 4.0
    seed: int = 0
    path: str = ""

    def __post_init__(self):
        if self.kind not in ("zero", "random", "snapshot"):
            raise ConfigurationError(f"initial condition kind must be zero|random|snapshot, got {self.kind!r}")
        if self.amplitude < 0 or self.max_mode < 1:
            raise ConfigurationError("initial condition needs amplitude >= 0 and max_mode >= 1")


@dataclass(frozen=True)
class AssimilationConfig:
    setup: PhysicalSetup
    observer: ObserverSpec
    mu: float
    step: StepParams
    t_final: float  # assimilation horizon, measured from the end of spin-up
    t_spinup: float | None = None  # None: automatic detection
    u0: InitialCondition = InitialCondition("random")
    w0: InitialCondition = InitialCondition("zero")
    k3: float = 1.0
    records_every: float = 0.1
    spinup_max: float = 200.0

    def __post_init__(self):
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.t_spinup is not None and self.t_spinup < 0:
            raise ConfigurationError("t_spinup must be >= 0")
        if not self.t_final > 0:
            raise ConfigurationError("t_final must be > 0")
        if not self.k3 > 0:
            raise ConfigurationError("k3 must be > 0")
        if not self.records_every > 0:
            raise ConfigurationError("records_every must be > 0")

    @property
    def grid(self) -> GridSpec:
        return self.setup.grid


@dataclass(frozen=True, eq=False)
class TwinState:
    ref: SolverState
    assim: SolverState
    t: float


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    err_l2_sq: float
    err_h1a_sq: float
    err_combined: float
    beta: float
    ref_l2_sq: float
    ref_h1_sq: float
    ref_a_sq: float
    assim_l2_sq: float


CSV_COLUMNS = tuple(DiagnosticsRecord.__dataclass_fields__)


# -- sufficient conditions -----------------------------------------------------


def h1_absorbing_bound(setup: PhysicalSetup, G: float | None = None) -> float:
    """Long-time bound ||u||^2 <= 2 G^2 nu^2 / (lambda1^1/2 alpha^2)."""
    G = grashof(setup) if G is None else G
    return 2.0 * G**2 * setup.nu**2 / (math.sqrt(setup.grid.lambda1) * setup.alpha**2)


def time_average_bound(setup: PhysicalSetup, T: float, G: float | None = None) -> float:
    """Bound on (1/T) * integral over [t, t+T] of ||u||^2 + alpha^2 |Au|^2."""
    G = grashof(setup) if G is None else G
    lam = setup.grid.lambda1
    return (2.0 + setup.nu * lam * T) * setup.nu * G**2 / (math.sqrt(lam) * T)


@dataclass(frozen=True)
class ConditionReport:
    G: float
    lambda1: float
    k3: float
    mu: float
    h: float
    approx_class: str
    # gain thresholds: type-1 statement form, type-1 proof form, type-2
    mu_threshold_type1: float
    mu_threshold_type1_proof: float
    mu_threshold_type2: float
    h_max_type1: float | None
    h_max_type2_a: float | None
    h_max_type2_b: float | None
    satisfied: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        def fmt(x):
            return "undefined" if x is None else f"{x:.10g}"

        out = [
            f"grashof G                      = {fmt(self.G)}",
            f"lambda1                        = {fmt(self.lambda1)}",
            f"k3 (assumed)                   = {fmt(self.k3)}",
            f"mu                             = {fmt(self.mu)}",
            f"h                              = {fmt(self.h)} ({self.approx_class})",
            f"mu threshold type1 (statement) = {fmt(self.mu_threshold_type1)}",
            f"mu threshold type1 (proof)     = {fmt(self.mu_threshold_type1_proof)}",
            f"mu threshold type2             = {fmt(self.mu_threshold_type2)}",
            f"h_max type1                    = {fmt(self.h_max_type1)}",
            f"h_max type2 (a)                = {fmt(self.h_max_type2_a)}",
            f"h_max type2 (b)                = {fmt(self.h_max_type2_b)}",
        ]
        out += [f"{k:<30} = {'PASS' if v else 'FAIL'}" for k, v in self.satisfied.items()]
        return out


def mu_thresholds(G: float, k3: float, nu: float, alpha: float, lambda1: float):
    """(type-1 statement form, type-1 proof form, type-2) gain thresholds.

    The statement form carries no nu*lambda1 factor on its first term; the
    proof form does.  The type-2 threshold coincides with the proof form.
    """
    stmt = 24 * k3**2 * G**2 + 15 * k3**2 * nu * G**2 / alpha**2
    proof = nu * lambda1 * (24 * k3**2 * G**2 + 15 * k3**2 * G**2 / (lambda1 * alpha**2))
    type2 = 24 * k3**2 * nu * lambda1 * G**2 + 15 * k3**2 * nu * G**2 / alpha**2
    return stmt, proof, type2


def h_max_values(mu: float, nu: float, alpha: float, c1: float, c2: float):
    """(type1, type2_a, type2_b); None when mu == 0."""
    if mu == 0:
        return None, None, None
    c2bar = max(c2, c2**2)
    return (
        math.sqrt(nu / (2 * mu * c1**2)),
        math.sqrt(nu / (2 * mu * c2bar)),
        (nu * alpha**2 / (2 * mu * c2**2)) ** 0.25,
    )


def check_conditions(cfg: AssimilationConfig) -> ConditionReport:
    setup, obs = cfg.setup, cfg.observer
    G = grashof(setup)
    lam = setup.grid.lambda1
    stmt, proof, type2 = mu_thresholds(G, cfg.k3, setup.nu, setup.alpha, lam)
    h1, h2a, h2b = h_max_values(cfg.mu, setup.nu, setup.alpha, obs.c1, obs.c2)
    mu = cfg.mu
    sat = {
        "mu_type1_statement": mu > stmt,
        "mu_type1_proof": mu > proof,
        "mu_type2": mu > type2,
    }
    if h1 is None:
        sat["h_max_defined"] = False
    elif obs.approx_class == "type1":
        sat["h_type1"] = obs.h < h1
    else:
        sat["h_type2"] = obs.h <= h2a and obs.h <= h2b
    sat = {k: bool(v) for k, v in sat.items()}
    G, stmt, proof, type2 = (float(x) for x in (G, stmt, proof, type2))
    return ConditionReport(G, lam, cfg.k3, mu, obs.h, obs.approx_class, stmt, proof, type2, h1, h2a, h2b, sat)


def beta_of(n, cfg: AssimilationConfig) -> float:
    setup = cfg.setup
    lam = setup.grid.lambda1
    k3sq = cfg.k3**2
    return (
        cfg.mu
        - 8 * k3sq * math.sqrt(lam) / setup.nu * (n.h1_sq + setup.alpha**2 * n.a_sq)
        - 5 * k3sq / (setup.nu * math.sqrt(lam)) * n.a_sq
    )


def beta(u_state: SolverState, cfg: AssimilationConfig) -> float:
    """Instantaneous contraction rate of |delta|^2 + alpha^2 ||delta||^2 along the reference."""
    return beta_of(norms(u_state.u), cfg)


# -- stepping ------------------------------------------------------------------


def _observe_diff(w: SpectralField, u: SpectralField, spec: ObserverSpec):
    return observe(w, spec) - observe(u, spec)


def step_assimilated(twin: TwinState, cfg: AssimilationConfig) -> TwinState:
    setup, dt, mu = cfg.setup, cfg.step.dt, cfg.mu
    lin = linear_step(setup, dt)
    spec = cfg.observer
    ref, w = twin.ref, twin.assim

    v_ref_new, ref_rhs = advance(ref, lin)
    ref_new = state_from_v(v_ref_new, ref_rhs, lin, twin.t + dt)

    if mu == 0.0:
        z_new, w_rhs = advance(w, lin)
    elif spec.kind == "modes":
        z_new, w_rhs = advance(w, lin)
        chi = _kept_mask(setup.grid, mode_cutoff(setup.grid, spec.h))
        b = np.where(chi, 0.5 * dt * mu, 0.0)
        z_old = w.v if w.v is not None else w.u.coeffs * lin.helm
        v_old = ref.v if ref.v is not None else ref.u.coeffs * lin.helm
        d = b * ((z_new - v_ref_new) + (z_old - v_old))
        if np.any(d):
            # Crank-Nicolson on -mu chi (z - v), written as a correction of the unnudged step
            z_new = z_new - d / (lin.lhs + b)
    else:
        if mu * dt > MU_DT_LIMIT:
            warnings.warn(f"mu*dt = {mu * dt:.4g} exceeds {MU_DT_LIMIT}; refusing explicit nudging step")
            raise StepError(f"mu*dt = {mu * dt:.4g} exceeds {MU_DT_LIMIT} for explicit nudging", mu * dt)
        diff = _observe_diff(w.u, ref.u, spec)
        extra = None
        if not is_zero(diff):
            g = lift(diff, project=True).coeffs
            g = np.where(wavenumbers(setup.grid).dealias, g, 0.0)
            extra = -mu * lin.helm * g
        z_new, w_rhs = advance(w, lin, extra=extra)
    w_new = state_from_v(z_new, w_rhs, lin, twin.t + dt)
    return TwinState(ref_new, w_new, twin.t + dt)


# -- diagnostics ---------------------------------------------------------------


def diagnostics(twin: TwinState, cfg: AssimilationConfig) -> DiagnosticsRecord:
    grid = cfg.grid
    a2 = cfg.setup.alpha**2
    delta = twin.assim.u.coeffs - twin.ref.u.coeffs
    e = norms_of(delta, grid)
    r = norms(twin.ref.u)
    err_l2 = e.l2_sq
    err_h1a = a2 * e.h1_sq
    return DiagnosticsRecord(
        t=twin.t,
        err_l2_sq=err_l2,
        err_h1a_sq=err_h1a,
        err_combined=err_l2 + err_h1a,
        beta=beta_of(r, cfg),
        ref_l2_sq=r.l2_sq,
        ref_h1_sq=r.h1_sq,
        ref_a_sq=r.a_sq,
        assim_l2_sq=norms(twin.assim.u).l2_sq,
    )


def lyapunov_violations(records, dt: float, floor_rel: float = 1e4 * np.finfo(float).eps):
    """Recorded intervals where beta > 0 but the error functional grew past tolerance.

    Tolerance is 2 dt^2 times the right-hand-side scale beta * Phi at the
    interval start.  Intervals whose start lies below the roundoff floor
    (floor_rel times the first record's value) are synchronized to roundoff
    and are reported separately, not as violations.
    """
    if not records:
        return [], 0
    floor = floor_rel * records[0].err_combined
    bad, skipped = [], 0
    for r0, r1 in zip(records, records[1:]):
        if r0.beta <= 0:
            continue
        if r0.err_combined <= floor:
            skipped += 1
            continue
        tol = 2.0 * dt**2 * r0.beta * r0.err_combined
        if r1.err_combined - r0.err_combined > tol:
            bad.append((r0.t, r1.t, r0.err_combined, r1.err_combined))
    return bad, skipped


# -- initial conditions and the twin runner --------------------------------------


def make_initial(ic: InitialCondition, grid: GridSpec, snapshot_of: SolverState | None = None) -> SolverState:
    if ic.kind == "zero":
        return SolverState(SpectralField.zeros(grid), 0.0)
    if ic.kind == "random":
        rng = np.random.default_rng(ic.seed)
        f = random_field(grid, rng, max_shell=ic.max_mode)
        size = math.sqrt(norms(f).l2_sq)
        return SolverState(f * (ic.amplitude / size if size > 0 else 0.0), 0.0)
    if ic.path:
        from nsalpha_da.snapshot import read_snapshot

        snap = read_snapshot(ic.path)
        if snap.field.grid != grid:
            raise ConfigurationError(f"snapshot {ic.path} grid {snap.field.grid} differs from {grid}")
        return SolverState(snap.field, snap.t)
    if snapshot_of is None:
        raise ConfigurationError("snapshot initial condition needs a reference state or a path")
    return snapshot_of


def eddy_turnover(u: SpectralField, setup: PhysicalSetup) -> float:
    grid = setup.grid
    viscous = 1.0 / (setup.nu * grid.lambda1)
    urms = math.sqrt(norms(u).l2_sq / grid.volume)
    return viscous if urms == 0 else min(grid.L / urms, viscous)


class TwinAbort(RuntimeError):
    """A step failed mid-run; ``records`` holds what was recorded before it."""

    def __init__(self, cause: Exception, records: list):
        super().__init__(str(cause))
        self.cause = cause
        self.records = records


@dataclass(frozen=True, eq=False)
class TwinRun:
    records: list
    start: TwinState
    final: TwinState
    t_spinup: float


def spin_up(state: SolverState, cfg: AssimilationConfig) -> SolverState:
    setup, dt = cfg.setup, cfg.step.dt
    lin = linear_step(setup, dt)
    t0 = state.t

    def stepped(s, i):
        v, rhs = advance(s, lin)
        return state_from_v(v, rhs, lin, t0 + i * dt)

    if cfg.t_spinup is not None:
        for i in range(1, int(round(cfg.t_spinup / dt)) + 1):
            state = stepped(state, i)
        return state
    bound = h1_absorbing_bound(setup)
    need = eddy_turnover(state.u, setup)
    under_since = t0 if norms(state.u).h1_sq <= bound else None
    i = 0
    while state.t - t0 < cfg.spinup_max:
        if under_since is not None and state.t - under_since >= need:
            return state
        i += 1
        state = stepped(state, i)
        if norms(state.u).h1_sq <= bound:
            under_since = state.t if under_since is None else under_since
        else:
            under_since = None
    log.warning("spin-up did not settle under the absorbing bound within %g", cfg.spinup_max)
    return state


def run_twin(cfg: AssimilationConfig, sink: Callable[[DiagnosticsRecord], None] | None = None) -> TwinRun:
    grid = cfg.grid
    dt = cfg.step.dt
    every = int(round(cfg.records_every / dt))
    if every < 1 or abs(every * dt - cfg.records_every) > 1e-9 * cfg.records_every:
        raise ConfigurationError(f"records_every={cfg.records_every} must be a positive multiple of dt={dt}")
    n_steps = int(round(cfg.t_final / dt))

    ref = make_initial(cfg.u0, grid)
    ref = spin_up(ref, cfg)
    t_start = ref.t
    assim = make_initial(cfg.w0, grid, snapshot_of=ref)
    assim = SolverState(assim.u, t_start, assim.v, assim.rhs_prev, assim.dt_prev)
    twin = start = TwinState(ref, assim, t_start)

    records: list[DiagnosticsRecord] = []

    def emit(tw):
        rec = diagnostics(tw, cfg)
        records.append(rec)
        if sink is not None:
            sink(rec)

    emit(twin)
    try:
        for i in range(1, n_steps + 1):
            twin = step_assimilated(twin, cfg)
            # keep time exact: t_start + i dt, not an accumulated sum
            t = t_start + i * dt
            twin = TwinState(
                SolverState(twin.ref.u, t, twin.ref.v, twin.ref.rhs_prev, twin.ref.dt_prev),
                SolverState(twin.assim.u, t, twin.assim.v, twin.assim.rhs_prev, twin.assim.dt_prev),
                t,
            )
            if i % every == 0 or i == n_steps:
                emit(twin)
    except StepError as exc:
        raise TwinAbort(exc, records) from exc
    return TwinRun(records, start, twin, t_start)


# -- constants of the trilinear estimate -------------------------------------------


def k3_quotient(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    """|<Btilde(u,v), w>| / (||u||^1/2 |Au|^1/2 |v| ||w|| + |Au| |v| |w|^1/2 ||w||^1/2)."""
    nu_, nv, nw = norms(u), norms(v), norms(w)
    num = abs(inner(btilde(u, v), w))
    den = (nu_.h1_sq * nu_.a_sq) ** 0.25 * math.sqrt(nv.l2_sq) * math.sqrt(nw.h1_sq) + math.sqrt(
        nu_.a_sq
    ) * math.sqrt(nv.l2_sq) * (nw.l2_sq * nw.h1_sq) ** 0.25
    return num / den


@dataclass(frozen=True)
class K3Estimate:
    lower_bound: float
    quotients: tuple


def estimate_k3(trial_count: int, seed: int, grid: GridSpec) -> K3Estimate:
    """Largest quotient over random (u, v, w): a lower bound for the best k3."""
    if trial_count < 1:
        raise ConfigurationError("trial_count must be >= 1")
    qs = []
    for i in range(trial_count):
        rng = np.random.default_rng([seed, i])
        u, v, w = (random_field(grid, rng, slope=rng.uniform(0.0, 3.0)) for _ in range(3))
        qs.append(k3_quotient(u, v, w))
    return K3Estimate(max(qs), tuple(qs))
