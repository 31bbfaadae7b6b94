"""
Interpolant observables I_h: low Fourier modes, cell averages, nodal values.

Cells are the n^3 cubes of edge h = L/n, indexed (c1, c2, c3) with cube
c covering [c_i h, (c_i + 1) h) on each axis.  Cell averages and nodal
values are evaluated in closed form from the Fourier coefficients, so the
certified inequalities carry no quadrature error.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from nsalpha_da.errors import ConfigurationError, GridMismatchError, ObserverTooCoarseError
from nsalpha_da.spectral import (
    GridSpec,
    SpectralField,
    from_physical,
    norms,
    random_field,
    wavenumbers,
)

KINDS = ("modes", "volumes", "nodes")
# nodal lemma: proof conclusion (32 h^2 ||grad||^2 + 8 h^4 ||.||_H2^2) and statement (32, 4)
NODAL_CONSTANTS = (32.0, 8.0)
NODAL_STATEMENT_CONSTANTS = (32.0, 4.0)
VOLUME_C1_SQ = 1.0 / 3.0


def mode_cutoff(grid: GridSpec, h: float) -> int:
    """floor(lambda1^{-1/2} / h), guarded against last-bit rounding below an integer."""
    x = 1.0 / (math.sqrt(grid.lambda1) * h)
    return int(math.floor(x * (1.0 + 1e-12)))


def modes_c1_sq(grid: GridSpec, h: float) -> float:
    """sup of |phi - P_kappa phi|^2 / (h^2 ||grad phi||^2): a single mode on |m|^2 = kappa^2 + 1."""
    kappa = mode_cutoff(grid, h)
    return 1.0 / (h**2 * grid.lambda1 * (kappa**2 + 1))


@dataclass(frozen=True)
class ObserverSpec:
    kind: str
    h: float
    cells_per_dim: int = 0
    approx_class: str = "type1"
    c1: float = 1.0
    c2: float = math.sqrt(NODAL_CONSTANTS[0])
    node_offset: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"observer kind must be one of {KINDS}, got {self.kind!r}")
        if not self.h > 0:
            raise ConfigurationError(f"observer h must be positive, got {self.h}")
        expected = "type2" if self.kind == "nodes" else "type1"
        if self.approx_class != expected:
            raise ConfigurationError(
                f"observer kind {self.kind!r} requires approx_class={expected!r}, got {self.approx_class!r}"
            )
        if self.kind != "modes" and self.cells_per_dim < 1:
            raise ConfigurationError("cells_per_dim must be >= 1")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ConfigurationError("observer constants must be positive")
        if len(self.node_offset) != 3 or not all(0.0 <= o <= 1.0 for o in self.node_offset):
            raise ConfigurationError("node_offset must be three fractions in [0, 1]")


def make_observer(
    kind: str,
    grid: GridSpec,
    h: float | None = None,
    cells_per_dim: int | None = None,
    c1: float | None = None,
    c2: float | None = None,
    node_offset=(0.5, 0.5, 0.5),
) -> ObserverSpec:
    """Build an ObserverSpec with the default constants for its kind."""
    if kind == "modes":
        if h is None:
            raise ConfigurationError("modes observer needs h")
        if mode_cutoff(grid, h) < 1:
            raise ObserverTooCoarseError(f"h={h} leaves no mode with |m| <= floor(lambda1^-1/2 / h)")
        c1 = math.sqrt(modes_c1_sq(grid, h)) if c1 is None else c1
        return ObserverSpec("modes", h, 0, "type1", c1=c1)
    if cells_per_dim is None:
        if h is None:
            raise ConfigurationError(f"{kind} observer needs cells_per_dim or h")
        cells_per_dim = int(round(grid.L / h))
    h = grid.L / cells_per_dim
    if kind == "volumes":
        c1 = math.sqrt(VOLUME_C1_SQ) if c1 is None else c1
        return ObserverSpec("volumes", h, cells_per_dim, "type1", c1=c1)
    c2 = math.sqrt(NODAL_CONSTANTS[0]) if c2 is None else c2
    return ObserverSpec("nodes", h, cells_per_dim, "type2", c2=c2, node_offset=tuple(node_offset))


@dataclass(frozen=True, eq=False)
class Observation:
    """Modes: coefficient array (zero off the kept ball).  Volumes/nodes: (3, n, n, n) reals."""

    spec: ObserverSpec
    grid: GridSpec
    payload: np.ndarray
    cutoff: int = 0

    def __sub__(self, other: Observation) -> Observation:
        if other.spec != self.spec or other.grid != self.grid:
            raise GridMismatchError("observations from different observers")
        return Observation(self.spec, self.grid, self.payload - other.payload, self.cutoff)


def _kept_mask(grid: GridSpec, kappa: int) -> np.ndarray:
    return wavenumbers(grid).m2 <= kappa * kappa


def observe_modes(field: SpectralField, h: float, spec: ObserverSpec | None = None) -> Observation:
    grid = field.grid
    kappa = mode_cutoff(grid, h)
    if kappa < 1:
        raise ObserverTooCoarseError(f"h={h} gives cutoff {kappa} < 1")
    if spec is None:
        spec = make_observer("modes", grid, h=h)
    payload = np.where(_kept_mask(grid, kappa), field.coeffs, 0.0)
    return Observation(spec, grid, payload, kappa)


def _average_matrix(grid: GridSpec, n: int) -> np.ndarray:
    """G[c, j]: mean over cell c of exp(i k_j x) along one axis."""
    h = grid.L / n
    m = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    k = 2.0 * np.pi * m / grid.L
    c = np.arange(n)[:, None]
    G = np.ones((n, grid.N), dtype=np.complex128)
    nz = m != 0
    kh = k[nz] * h
    G[:, nz] = np.exp(1j * k[nz] * c * h) * (np.expm1(1j * kh) / (1j * kh))
    # whole periods per cell average to exactly zero
    G[:, nz & (np.round(m).astype(int) % n == 0)] = 0.0
    return G


def _separable_eval(coeffs: np.ndarray, mats) -> np.ndarray:
    out = np.einsum("aijk,pi,qj,rk->apqr", coeffs, *mats, optimize=True)
    return np.ascontiguousarray(out.real)


def cell_averages(field: SpectralField, n: int) -> np.ndarray:
    G = _average_matrix(field.grid, n)
    return _separable_eval(field.coeffs, (G, G, G))


def observe_volumes(field: SpectralField, cells_per_dim: int, spec: ObserverSpec | None = None) -> Observation:
    if cells_per_dim < 1:
        raise ConfigurationError("cells_per_dim must be >= 1")
    if spec is None:
        spec = make_observer("volumes", field.grid, cells_per_dim=cells_per_dim)
    return Observation(spec, field.grid, cell_averages(field, cells_per_dim))


def center_nodes(grid: GridSpec, n: int, offset=(0.5, 0.5, 0.5)) -> np.ndarray:
    """Node positions (n, n, n, 3): x_c = (c + offset) h on each axis."""
    h = grid.L / n
    axes = [(np.arange(n) + o) * h for o in offset]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def evaluate_at(field: SpectralField, points: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant at arbitrary points (..., 3) -> (3, ...)."""
    grid = field.grid
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 3)
    m = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    k = 2.0 * np.pi * m / grid.L
    E = [np.exp(1j * np.outer(flat[:, d], k)) for d in range(3)]  # (P, N) each
    t = np.tensordot(field.coeffs, E[2], axes=([3], [1]))  # (3, N, N, P)
    t = np.einsum("aijp,pj->aip", t, E[1])
    vals = np.einsum("aip,pi->ap", t, E[0]).real
    return vals.reshape((3,) + pts.shape[:-1])


def _nodal_matrix(grid: GridSpec, n: int, offset: float) -> np.ndarray:
    h = grid.L / n
    m = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    x = (np.arange(n) + offset) * h
    return np.exp(1j * np.outer(x, 2.0 * np.pi * m / grid.L))


def nodal_values(field: SpectralField, n: int, offset=(0.5, 0.5, 0.5), nodes=None) -> np.ndarray:
    if nodes is not None:
        nodes = np.asarray(nodes, dtype=float)
        if nodes.shape != (n, n, n, 3):
            raise ConfigurationError(f"nodes must have shape {(n, n, n, 3)}, got {nodes.shape}")
        h = field.grid.L / n
        idx = np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij"), axis=-1)
        tol = 1e-12 * h
        if np.any(nodes < idx * h - tol) or np.any(nodes > (idx + 1) * h + tol):
            raise ConfigurationError("each node must lie in its own (closed) cell")
        return evaluate_at(field, nodes)
    mats = [_nodal_matrix(field.grid, n, o) for o in offset]
    return _separable_eval(field.coeffs, mats)


def observe_nodes(
    field: SpectralField,
    cells_per_dim: int,
    spec: ObserverSpec | None = None,
    nodes=None,
) -> Observation:
    if cells_per_dim < 1:
        raise ConfigurationError("cells_per_dim must be >= 1")
    if spec is None:
        spec = make_observer("nodes", field.grid, cells_per_dim=cells_per_dim)
    payload = nodal_values(field, cells_per_dim, spec.node_offset, nodes)
    return Observation(spec, field.grid, payload)


def observe(field: SpectralField, spec: ObserverSpec) -> Observation:
    if spec.kind == "modes":
        return observe_modes(field, spec.h, spec)
    if spec.kind == "volumes":
        return observe_volumes(field, spec.cells_per_dim, spec)
    return observe_nodes(field, spec.cells_per_dim, spec)


def piecewise_constant_samples(obs: Observation) -> np.ndarray:
    """Sample sum_c payload_c chi_c on the solver grid; shape (3, N, N, N)."""
    N = obs.grid.N
    n = obs.spec.cells_per_dim
    idx = (np.arange(N) * n) // N
    return obs.payload[:, idx][:, :, idx][:, :, :, idx]


def lift(obs: Observation, project: bool = True) -> SpectralField:
    """Realize (P) I_h phi as a field on the solver grid.

    Modes give the truncated field itself.  Volumes and nodes become
    piecewise-constant fields; from_physical removes their mean, and
    ``project`` applies the Leray projection.
    """
    if obs.spec.kind == "modes":
        # a Fourier truncation already commutes with P
        return SpectralField(obs.grid, obs.payload)
    if obs.payload.shape != (3,) + (obs.spec.cells_per_dim,) * 3:
        raise GridMismatchError("payload shape does not match observer")
    return from_physical(piecewise_constant_samples(obs), obs.grid, solenoidalize=project)


def is_zero(obs: Observation) -> bool:
    return not np.any(obs.payload)


# -- certification ---------------------------------------------------------------


def interpolation_error_sq(spec: ObserverSpec, field: SpectralField) -> float:
    """||phi - I_h phi||^2 in L^2 over the box, exactly (I_h as a piecewise field, no projection)."""
    grid = field.grid
    l2 = norms(field).l2_sq
    if spec.kind == "modes":
        kappa = mode_cutoff(grid, spec.h)
        tail = np.where(_kept_mask(grid, kappa), 0.0, field.coeffs)
        return grid.volume * float(np.sum(np.abs(tail) ** 2))
    n = spec.cells_per_dim
    cellvol = (grid.L / n) ** 3
    avg = cell_averages(field, n)
    if spec.kind == "volumes":
        # I_h is the L^2-orthogonal projection onto piecewise constants
        return max(l2 - cellvol * float(np.sum(avg * avg)), 0.0)
    vals = nodal_values(field, n, spec.node_offset)
    err = l2 - 2.0 * cellvol * float(np.sum(vals * avg)) + cellvol * float(np.sum(vals * vals))
    return max(err, 0.0)


def type1_ratio(spec: ObserverSpec, field: SpectralField) -> float:
    """||phi - I_h phi||^2 / (h^2 ||grad phi||^2); 0 for the zero field."""
    g = norms(field).h1_sq
    if g == 0.0:
        return 0.0
    return interpolation_error_sq(spec, field) / (spec.h**2 * g)


@dataclass(frozen=True)
class Type1Certificate:
    worst_ratio: float
    bound: float  # c1^2
    trials: int

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= self.bound + 1e-12


@dataclass(frozen=True)
class Type2Certificate:
    worst_a: float  # max err / (h^2 ||grad phi||^2)
    worst_b: float  # max err / (h^4 |A phi|^2)
    worst_proof: float  # max err / (32 h^2 ||grad||^2 + 8 h^4 |A phi|^2)
    worst_statement: float  # max err / (32 h^2 ||grad||^2 + 4 h^4 |A phi|^2)
    trials: int

    @property
    def passed(self) -> bool:
        return self.worst_proof <= 1.0

    @property
    def passed_statement(self) -> bool:
        return self.worst_statement <= 1.0


def _trial_field(grid: GridSpec, seed: int, i: int) -> SpectralField:
    rng = np.random.default_rng([seed, i])
    slope = rng.uniform(0.0, 4.0)
    return random_field(grid, rng, max_shell=grid.N / 3, slope=slope)


def shear_mode(grid: GridSpec, m, direction, phase: str = "sin") -> SpectralField:
    """Real field direction * sin(k.x) (or cos), k = 2 pi m / L; solenoidal when direction . m = 0."""
    N = grid.N
    c = np.zeros((3, N, N, N), dtype=np.complex128)
    d = np.asarray(direction, dtype=float)
    idx = tuple(int(mi) % N for mi in m)
    nidx = tuple(int(-mi) % N for mi in m)
    a = -0.5j if phase == "sin" else 0.5
    c[(slice(None),) + idx] += a * d
    c[(slice(None),) + nidx] += np.conj(a) * d
    return SpectralField(grid, c)


def modes_adversary(grid: GridSpec, h: float) -> SpectralField:
    """A single mode on the first excluded shell |m|^2 = kappa^2 + 1."""
    kappa = mode_cutoff(grid, h)
    return shear_mode(grid, (kappa, 1, 0), (0.0, 0.0, 1.0))


def certify_type1(
    spec: ObserverSpec,
    grid: GridSpec,
    trial_count: int = 100,
    seed: int = 0,
    extra_fields=(),
    adversarial: bool = True,
) -> Type1Certificate:
    if spec.approx_class != "type1":
        raise ConfigurationError("certify_type1 needs a type1 observer")
    fields = [_trial_field(grid, seed, i) for i in range(trial_count)]
    if adversarial and spec.kind == "modes" and mode_cutoff(grid, spec.h) < grid.band:
        fields.append(modes_adversary(grid, spec.h))
    fields.extend(extra_fields)
    worst = max((type1_ratio(spec, f) for f in fields), default=0.0)
    return Type1Certificate(worst, spec.c1**2, len(fields))


def type2_ratios(spec: ObserverSpec, field: SpectralField):
    n = norms(field)
    err = interpolation_error_sq(spec, field)
    h = spec.h
    a, b = NODAL_CONSTANTS
    sa, sb = NODAL_STATEMENT_CONSTANTS
    grad = h**2 * n.h1_sq
    hess = h**4 * n.a_sq
    if grad == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    return err / grad, err / hess, err / (a * grad + b * hess), err / (sa * grad + sb * hess)


def certify_type2(
    spec: ObserverSpec,
    grid: GridSpec,
    trial_count: int = 100,
    seed: int = 0,
    extra_fields=(),
) -> Type2Certificate:
    if spec.approx_class != "type2":
        raise ConfigurationError("certify_type2 needs a type2 observer")
    fields = [_trial_field(grid, seed, i) for i in range(trial_count)]
    fields.extend(extra_fields)
    rows = np.array([type2_ratios(spec, f) for f in fields]).reshape(-1, 4)
    worst = rows.max(axis=0) if len(rows) else np.zeros(4)
    return Type2Certificate(*(float(x) for x in worst), trials=len(fields))


# -- serialization -----------------------------------------------------------------

OBS_MAGIC = b"NSO1"
_OBS_HEADER = struct.Struct("<4sBId")
_KIND_CODE = {"modes": 0, "volumes": 1, "nodes": 2}


def encode_observation(obs: Observation) -> bytes:
    """b"NSO1", u8 kind, u32 cutoff (modes) or cells_per_dim, f64 h, payload f64[].

    Modes payload: for each component, the kept coefficients (|m| <= cutoff)
    in C-order over the FFT-ordered (m1, m2, m3) array, as (re, im) pairs.
    Volumes/nodes payload: the (3, n, n, n) array in C-order.
    """
    spec = obs.spec
    count = obs.cutoff if spec.kind == "modes" else spec.cells_per_dim
    head = _OBS_HEADER.pack(OBS_MAGIC, _KIND_CODE[spec.kind], count, spec.h)
    if spec.kind == "modes":
        kept = obs.payload[:, _kept_mask(obs.grid, obs.cutoff)]
        body = np.ascontiguousarray(kept).astype("<c16").view("<f8")
    else:
        body = np.ascontiguousarray(obs.payload, dtype="<f8")
    return head + body.tobytes(order="C")


def decode_observation(data: bytes, grid: GridSpec, spec: ObserverSpec | None = None) -> Observation:
    magic, code, count, h = _OBS_HEADER.unpack_from(data)
    if magic != OBS_MAGIC:
        raise ValueError(f"bad observation magic {magic!r}")
    kind = KINDS[code]
    body = np.frombuffer(data[_OBS_HEADER.size :], dtype="<f8")
    if spec is None:
        if kind == "modes":
            spec = make_observer("modes", grid, h=h)
        else:
            spec = make_observer(kind, grid, cells_per_dim=count)
    if kind == "modes":
        mask = _kept_mask(grid, count)
        nk = int(mask.sum())
        if body.size != 2 * 3 * nk:
            raise GridMismatchError("modes payload length does not match grid and cutoff")
        payload = np.zeros((3,) + mask.shape, dtype=np.complex128)
        payload[:, mask] = body.view("<c16").reshape(3, nk)
        return Observation(spec, grid, payload, count)
    if body.size != 3 * count**3:
        raise GridMismatchError("payload length does not match cells_per_dim")
    return Observation(spec, grid, body.reshape(3, count, count, count).copy())
