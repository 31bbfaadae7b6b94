import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsalpha_da.dynamics import (
    ForcingSpec,
    PhysicalSetup,
    SolverState,
    StepParams,
    btilde,
    energy_budget,
    grashof,
    grashof_of,
    integrate,
    make_forcing,
    step_reference,
)
from nsalpha_da.errors import ConfigurationError, GridMismatchError, StepError
from nsalpha_da.observers import shear_mode
from nsalpha_da.spectral import SpectralField, divergence_residual, inner, make_grid, norms, wavenumbers
from tests.helpers import rand, rel


def convolution_oracle(u: SpectralField, v: SpectralField) -> np.ndarray:
    """-P_band(u x curl v) by direct summation over all triads p + q = m."""
    g = u.grid
    N, kf = g.N, 2 * np.pi / g.L
    band = g.band
    modes = list(itertools.product(range(-band, band + 1), repeat=3))
    idx = [tuple(x % N for x in m) for m in modes]
    uq = np.array([u.coeffs[(slice(None),) + i] for i in idx])
    wq = np.array([1j * np.cross(kf * np.array(m), v.coeffs[(slice(None),) + i]) for m, i in zip(modes, idx)])
    out = np.zeros((3, N, N, N), dtype=complex)
    arr = np.array(modes)
    for p, up in zip(modes, uq):
        if not up.any():
            continue
        target = arr + np.array(p)
        ok = np.all(np.abs(target) <= band, axis=1)
        prods = np.cross(up, wq[ok])
        for m, c in zip(target[ok], prods):
            out[(slice(None),) + tuple(m % N)] += c
    k = kf * wavenumbers(g).m
    k2 = np.sum(k * k, axis=0)
    k2[0, 0, 0] = 1.0
    out -= k * np.sum(k * out, axis=0) / k2
    out[:, 0, 0, 0] = 0.0
    return -out


def shear(grid, m=(0, 1, 0)):
    return shear_mode(grid, m, (1.0, 0.0, 0.0))


@pytest.fixture
def setup16(grid16):
    return PhysicalSetup(grid16, 0.05, 0.25, ForcingSpec("low_mode_deterministic", 1.0, 2, 0))


class TestBtilde:
    @pytest.mark.parametrize("seed", range(5))
    def test_convolution_oracle(self, grid8, seed):
        u, v = rand(grid8, 2 * seed, slope=1.0), rand(grid8, 2 * seed + 1)
        assert rel(btilde(u, v).coeffs, convolution_oracle(u, v)) <= 1e-12

    def test_zero_u(self, grid8):
        assert not np.any(btilde(SpectralField.zeros(grid8), rand(grid8, 1)).coeffs)

    def test_shear_is_gradient(self, grid16):
        u = shear(grid16)
        assert np.max(np.abs(btilde(u, u).coeffs)) < 1e-15

    def test_grid_mismatch(self, grid8, grid16):
        with pytest.raises(GridMismatchError):
            btilde(SpectralField.zeros(grid8), SpectralField.zeros(grid16))

    @given(st.integers(0, 2**31))
    def test_identities(self, seed):
        g = make_grid(2 * np.pi, 16)
        u, v, w = (rand(g, seed + i, slope=1.0) for i in range(3))
        b_uv, b_wv = btilde(u, v), btilde(w, v)
        lu, lw = np.sqrt(norms(u).l2_sq), np.sqrt(norms(w).l2_sq)
        nb_uv, nb_wv = np.sqrt(norms(b_uv).l2_sq), np.sqrt(norms(b_wv).l2_sq)
        assert abs(inner(b_uv, u)) <= 1e-12 * nb_uv * lu
        assert abs(inner(b_uv, w) + inner(b_wv, u)) <= 1e-12 * (nb_uv * lw + nb_wv * lu)
        assert divergence_residual(b_uv) < 1e-13


class TestStepping:
    def test_zero_stays_zero(self, grid8):
        setup = PhysicalSetup(grid8, 0.1, 0.5)
        s = integrate(SolverState(SpectralField.zeros(grid8), 0.0), setup, StepParams(0.01), 0.1)
        assert not np.any(s.u.coeffs)
        assert s.t == pytest.approx(0.1)

    def test_single_mode_one_step(self, grid16):
        setup = PhysicalSetup(grid16, 0.1, 0.5)
        u0 = shear(grid16)
        s = step_reference(SolverState(u0, 0.0), setup, StepParams(0.01))
        factor = s.u.coeff((0, 1, 0))[0] / u0.coeff((0, 1, 0))[0]
        assert abs(factor - np.exp(-0.1 * 0.01)) <= 1e-10

    def test_single_mode_global_order(self, grid16):
        setup = PhysicalSetup(grid16, 0.1, 0.5)
        u0 = shear(grid16, (0, 2, 0))
        T = 1.0
        exact = u0.coeff((0, 2, 0))[0] * np.exp(-0.1 * 4 * T)
        errs = []
        for dt in (1e-2, 5e-3, 2.5e-3):
            s = integrate(SolverState(u0, 0.0), setup, StepParams(dt), T)
            errs.append(abs(s.u.coeff((0, 2, 0))[0] - exact))
        for a, b in zip(errs, errs[1:]):
            assert 3.2 <= a / b <= 4.8

    def test_self_convergence(self, setup16):
        g = setup16.grid
        u0 = rand(g, 1, max_shell=3)
        u0 = u0 * (1.0 / np.sqrt(norms(u0).l2_sq / g.volume))
        runs = {dt: integrate(SolverState(u0, 0.0), setup16, StepParams(dt), 0.5).u for dt in (0.02, 0.01, 0.005)}
        d1 = np.sqrt(norms(runs[0.02] - runs[0.01]).l2_sq)
        d2 = np.sqrt(norms(runs[0.01] - runs[0.005]).l2_sq)
        assert 3.2 <= d1 / d2 <= 4.8

    def test_output_invariants(self, setup16):
        s = integrate(SolverState(rand(setup16.grid, 4) * 1e-2, 0.0), setup16, StepParams(0.01), 0.05)
        assert divergence_residual(s.u) < 1e-13
        assert s.u.coeffs[:, 0, 0, 0].tolist() == [0, 0, 0]

    def test_cfl_guard(self, grid16):
        setup = PhysicalSetup(grid16, 0.1, 0.5)
        u = rand(grid16, 0) * 1e3
        with pytest.raises(StepError) as info:
            step_reference(SolverState(u, 0.0), setup, StepParams(0.1))
        assert info.value.magnitude > 0.5

    def test_bad_step_params(self):
        with pytest.raises(ConfigurationError):
            StepParams(0.0)
        with pytest.raises(ConfigurationError):
            StepParams(0.1, dealias="none")


class TestEnergyBudget:
    def test_zero(self, grid8):
        setup = PhysicalSetup(grid8, 1.0, 1.0)
        s = SolverState(SpectralField.zeros(grid8), 0.0)
        assert energy_budget(s, step_reference(s, setup, StepParams(0.01)), setup, 0.01) == 0.0

    def test_single_mode(self, grid16):
        setup = PhysicalSetup(grid16, 0.1, 0.5)
        s0 = SolverState(shear(grid16), 0.0)
        s1 = step_reference(s0, setup, StepParams(1e-3))
        assert energy_budget(s0, s1, setup, 1e-3) < 1e-4

    def test_order(self, setup16):
        g = setup16.grid
        u0 = rand(g, 1, max_shell=3)
        u0 = u0 * (1.0 / np.sqrt(norms(u0).l2_sq / g.volume))
        worst = []
        for dt in (0.02, 0.01, 0.005):
            s, res = SolverState(u0, 0.0), []
            for _ in range(int(round(0.5 / dt))):
                s1 = step_reference(s, setup16, StepParams(dt))
                res.append(energy_budget(s, s1, setup16, dt))
                s = s1
            worst.append(max(res))
        for a, b in zip(worst, worst[1:]):
            assert 2.8 <= a / b <= 5.2


class TestForcing:
    @pytest.mark.parametrize("f,nu,G", [(1.0, 1.0, 1.0), (2.0, 0.5, 8.0), (0.0, 1.0, 0.0)])
    def test_grashof(self, grid8, f, nu, G):
        assert grashof_of(f, nu, 1.0) == G
        setup = PhysicalSetup(grid8, nu, 1.0, ForcingSpec("low_mode_deterministic", f, 2, 3))
        assert grashof(setup) == pytest.approx(G, rel=1e-12, abs=0)

    def test_zero_kind(self, grid8):
        assert not np.any(make_forcing(ForcingSpec("zero", 5.0), grid8).coeffs)

    def test_deterministic(self, grid16):
        spec = ForcingSpec("low_mode_deterministic", 1.0, 2, 11)
        assert make_forcing(spec, grid16).coeffs.tobytes() == make_forcing(spec, grid16).coeffs.tobytes()

    @pytest.mark.parametrize("max_mode", [1, 2, 3])
    def test_amplitude_and_support(self, grid16, max_mode):
        f = make_forcing(ForcingSpec("low_mode_deterministic", 1.0, max_mode, 0), grid16)
        assert norms(f).l2_sq == pytest.approx(1.0, abs=1e-12)
        outside = wavenumbers(grid16).m2 > max_mode**2
        assert not np.any(f.coeffs[:, outside])
        assert divergence_residual(f) < 1e-14

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            ForcingSpec("sinusoidal")
        with pytest.raises(ConfigurationError):
            ForcingSpec("zero", max_mode=0)
