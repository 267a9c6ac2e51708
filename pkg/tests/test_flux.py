"""Duchon-Robert and Constantin-E-Titi fluxes, sweeps and the density split."""

import math

import numpy as np
import pytest
from scipy import integrate

from onsager_flux.errors import GridMismatchError, ScaleError
from onsager_flux.flux import (
    balance_flux,
    density_mechanism,
    flux_cet,
    flux_dr,
    flux_l1_series,
    grid_scales,
    sweep,
    trilinear_cet,
    trilinear_dr,
    tube_mass,
)
from onsager_flux.grid import GridField, TimeSeriesField, sample_function
from onsager_flux.kernels import kernel_for
from onsager_flux.synth import burgers_shock, random_fourier_field, shear_layer, taylor_green
from onsager_flux.traces import Interface

TWO_PI = 2 * np.pi


def step_mass_oracle(jump):
    """Continuum DR mass per unit length of a 1D step, by direct quadrature.

    The defining integral reduces to ``jump^3 / 4 * int_{z1 > 0} z1 d1 rho dz``
    on the downstream side plus its mirror on the upstream side.
    """
    def rho(x, y):
        r2 = x * x + y * y
        return math.exp(-1 / (1 - r2)) if r2 < 1 else 0.0

    def d1rho(y, x):
        r2 = x * x + y * y
        return rho(x, y) * (-2 * x / (1 - r2) ** 2) if r2 < 1 else 0.0

    lim = lambda x: math.sqrt(max(1 - x * x, 0.0))
    mass, _ = integrate.dblquad(lambda y, x: rho(x, y), -1, 1, lambda x: -lim(x), lim, epsabs=1e-13)
    half, _ = integrate.dblquad(lambda y, x: x * d1rho(y, x), 0, 1, lambda x: -lim(x), lim, epsabs=1e-13)
    half /= mass
    # downstream: delta u = -jump for z1 > 0; upstream: +jump for z1 < 0 (same integral by symmetry)
    return 2 * abs(jump) ** 3 / 4 * abs(half)


@pytest.fixture(scope="module")
def shock256():
    return burgers_shock(1.0, -1.0, 0.0, 256)


@pytest.fixture(scope="module")
def rough32():
    rng = np.random.default_rng(11)
    return [GridField(rng.standard_normal((32, 32, 2)), (1.0, 1.0)) for _ in range(3)]


class TestFluxDR:
    def test_constant_field(self):
        u = GridField(np.full((16, 16, 2), 1.0), (1.0, 1.0))
        assert np.all(flux_dr(u, kernel_for(u, "bump", 4 / 16)).values.data == 0)

    @pytest.mark.parametrize("prof", ["bump", "quartic"])
    @pytest.mark.parametrize("n", [16, 64])
    def test_sheet_cancels_exactly(self, prof, n):
        u, _ = shear_layer(1.0, -1.0, 0.0, n)
        for mult in (2, 4):
            F = flux_dr(u, kernel_for(u, prof, mult / n))
            assert F.max_abs() <= 1e-14

    def test_sheet_3d(self):
        u = sample_function(3, 3, 16, 1.0, lambda x, y, z: (np.where(z < 0.5, 1.0, -1.0), 0.0, 0.0))
        assert flux_dr(u, kernel_for(u, "bump", 3 / 16)).max_abs() <= 1e-14

    def test_step_oracle(self):
        assert step_mass_oracle(2.0) == pytest.approx(2.0, rel=1e-8)

    @pytest.mark.parametrize("prof", ["bump", "quartic"])
    def test_shock_mass_per_interface(self, shock256, prof):
        oracle = step_mass_oracle(2.0)
        for mult in (4, 8, 16):
            F = flux_dr(shock256, kernel_for(shock256, prof, mult / 256))
            # the mirrored interface is an upward step with the opposite sign
            assert abs(F.total()) <= 1e-10
            assert F.l1() / 2 == pytest.approx(oracle, rel=0.04)

    def test_shock_mass_scale_independent_quartic(self, shock256):
        masses = [flux_dr(shock256, kernel_for(shock256, "quartic", m / 256)).l1() / 2 for m in (4, 8, 16)]
        assert max(masses) / min(masses) - 1 <= 0.02

    @pytest.mark.xfail(strict=True, reason="bump mass at 4h is 2.050, a 2.5% spread over [4h, 16h]")
    def test_shock_mass_scale_independent_bump(self, shock256):
        masses = [flux_dr(shock256, kernel_for(shock256, "bump", m / 256)).l1() / 2 for m in (4, 8, 16)]
        assert max(masses) / min(masses) - 1 <= 0.02

    def test_kernel_independence(self, shock256):
        a = flux_dr(shock256, kernel_for(shock256, "bump", 8 / 256)).l1()
        b = flux_dr(shock256, kernel_for(shock256, "quartic", 8 / 256)).l1()
        assert abs(a - b) / b <= 0.05

    def test_shift_invariance(self, rough32):
        u = rough32[0]
        K = kernel_for(u, "bump", 3 / 32)
        a = flux_dr(u, K).values.data
        b = flux_dr(u + np.array([2.0, -1.0]), K).values.data
        np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(a).max())

    def test_kernel_grid_mismatch(self, rough32):
        u = rough32[0]
        K = kernel_for(GridField(np.zeros((64, 64, 2)), (1.0, 1.0)), "bump", 4 / 64)
        with pytest.raises(GridMismatchError):
            flux_dr(u, K)


class TestFluxCET:
    def test_constant_field(self):
        u = GridField(np.full((16, 16, 2), -0.5), (1.0, 1.0))
        assert flux_cet(u, kernel_for(u, "bump", 4 / 16)).max_abs() <= 1e-14

    def test_full_and_symmetric_contraction_agree(self, rough32):
        u = rough32[0]
        K = kernel_for(u, "quartic", 4 / 32)
        a = flux_cet(u, K).values.data
        b = trilinear_cet(u, u, u, K).values.data
        assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()

    @pytest.mark.parametrize("w", [0.0, 0.1])
    def test_planar_shear_vanishes_pointwise(self, w):
        # R_ell only has an 11 entry and E u_ell only a 12 entry
        u, _ = shear_layer(1.0, -1.0, w, 128)
        for mult in (4, 8, 16):
            assert flux_cet(u, kernel_for(u, "bump", mult / 128)).max_abs() <= 1e-13

    def test_shift_invariance(self, rough32):
        u = rough32[1]
        K = kernel_for(u, "bump", 3 / 32)
        a = flux_cet(u, K).values.data
        b = flux_cet(u + np.array([1.5, 0.5]), K).values.data
        np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(a).max())

    def test_direct_and_fft_agree(self, rough32):
        u = rough32[2]
        K = kernel_for(u, "bump", 3 / 32)
        a = flux_cet(u, K, "fft").values.data
        b = flux_cet(u, K, "direct").values.data
        assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


class TestTrilinear:
    @pytest.mark.parametrize("variant", ["dr", "cet"])
    def test_diagonal_collapse(self, variant):
        u, _ = taylor_green(64)
        K = kernel_for(u, "bump", 4 / 64)
        if variant == "dr":
            a, b = trilinear_dr(u, u, u, K), flux_dr(u, K)
            assert np.abs(a.values.data - b.values.data).max() <= 1e-13
        else:
            a = trilinear_cet(u, u, u, K).values.data
            b = flux_cet(u, K).values.data
            assert np.abs(a - b).max() <= 1e-13

    @pytest.mark.parametrize("slot", [0, 1, 2])
    def test_constant_slot(self, rough32, slot):
        u, v, _ = rough32
        c = GridField(np.full((32, 32, 2), 3.0), (1.0, 1.0))
        args = [u, v, u]
        args[slot] = c
        assert np.all(trilinear_dr(*args, kernel_for(u, "bump", 3 / 32)).values.data == 0)

    @pytest.mark.parametrize("op", [trilinear_dr, trilinear_cet])
    @pytest.mark.parametrize("slot", [0, 1, 2])
    def test_linearity(self, rough32, op, slot):
        a, b, w = rough32
        K = kernel_for(a, "bump", 3 / 32)
        alpha, beta = 1.7, -0.4

        def T(x):
            args = [w, w, w]
            args[slot] = x
            return op(*args, K).values.data

        lhs = T(a * alpha + b * beta)
        rhs = alpha * T(a) + beta * T(b)
        assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()

    def test_grid_mismatch(self, rough32):
        other = GridField(np.zeros((16, 16, 2)), (1.0, 1.0))
        with pytest.raises(GridMismatchError):
            trilinear_dr(rough32[0], other, rough32[0], kernel_for(rough32[0], "bump", 3 / 32))


class TestBalanceFlux:
    def test_taylor_green(self):
        u, p = taylor_green(64)
        assert balance_flux(u, p).max_abs() <= 1e-7

    def test_smooth_shear(self):
        u, p = shear_layer(1.0, -1.0, 0.1, 64)
        assert balance_flux(u, p).max_abs() <= 1e-10

    def test_constant(self):
        u = GridField(np.full((16, 16, 2), 2.0), (1.0, 1.0))
        p = GridField(np.zeros((16, 16, 1)), (1.0, 1.0))
        assert balance_flux(u, p).max_abs() <= 1e-12

    def test_rejects_vector_pressure(self, rough32):
        with pytest.raises(ValueError):
            balance_flux(rough32[0], rough32[1])


class TestSweep:
    def test_taylor_green(self):
        u, p = taylor_green(128)
        res = sweep(u, p, "bump", grid_scales(u, [4, 8, 16]))
        assert not res.nonsolution
        assert res.slope("dr") >= 1.9 and res.slope("cet") >= 1.9
        assert list(res.scales) == sorted(res.scales, reverse=True)
        assert res.l1_balance <= 1e-7

    def test_burgers_persistent(self, shock256):
        res = sweep(shock256, None, "bump", grid_scales(shock256, [4, 8, 16]), variants=("dr",))
        fit = res.fits["dr"]
        assert fit.slope == pytest.approx(0.0, abs=0.1)
        assert fit.intercept > 0
        assert res.nonsolution

    def test_rows_schema(self):
        u, p = taylor_green(64)
        rows = list(sweep(u, None, "quartic", grid_scales(u, [2, 4, 8])).rows())
        assert list(rows[0]) == ["ell", "l1_dr", "l1_cet", "l1_balance", "kernel", "nonsolution_flag"]
        assert rows[0]["kernel"] == "quartic" and rows[0]["l1_balance"] == ""

    def test_needs_three_scales(self):
        u, _ = taylor_green(32)
        with pytest.raises(ScaleError):
            sweep(u, None, "bump", grid_scales(u, [2, 4]))

    def test_misaligned_scale_named(self):
        u, _ = taylor_green(32)
        with pytest.raises(ScaleError, match="0.1"):
            sweep(u, None, "bump", [0.1, 4 / 32, 8 / 32])

    def test_fit_trim(self):
        u, p = taylor_green(64)
        res = sweep(u, p, "bump", grid_scales(u, [2, 3, 4, 6, 8]), fit_trim=(1, 1))
        assert res.fits["dr"] is not None


class TestDensityMechanism:
    def test_telescoping_on_random_fields(self):
        u = random_fourier_field(0.4, 1, 64)
        for variant in ("dr", "cet"):
            rep = density_mechanism(u, "bump", [2 / 64, 4 / 64], [4 / 64, 8 / 64], variant)
            assert rep.telescoping_error <= 1e-12
            assert len(rep.rows) == 4

    def test_smooth_field_all_columns_decrease(self):
        u, _ = taylor_green(64)
        rep = density_mechanism(u, "bump", [4 / 64], [2 / 64, 4 / 64, 8 / 64])
        for col in ("t_full", "t_smooth_leg", "t_remainder"):
            vals = rep.column(col)  # rows ordered by decreasing ell
            assert np.all(np.diff(vals) < 0), col

    def test_needs_scales(self):
        u, _ = taylor_green(32)
        with pytest.raises(ScaleError):
            density_mechanism(u, "bump", [], [4 / 32])


class TestTubeMass:
    def test_zero_flux(self):
        u = GridField(np.zeros((32, 32, 2)), (1.0, 1.0))
        F = flux_dr(u, kernel_for(u, "bump", 4 / 32))
        assert tube_mass(F, Interface((1, 0), 0.5), 4 / 32) == 0

    def test_shock_mass_localized(self, shock256):
        F = flux_dr(shock256, kernel_for(shock256, "bump", 4 / 256))
        I = Interface((1.0, 0.0), 0.5)
        assert tube_mass(F, I, 8 / 256) >= 0.95 * F.l1() / 2

    def test_sheet(self):
        u, _ = shear_layer(1.0, -1.0, 0.0, 64)
        F = flux_dr(u, kernel_for(u, "bump", 4 / 64))
        assert tube_mass(F, Interface((0, 1), 0.5), 8 / 64) == 0

    def test_width_below_resolution(self, shock256):
        F = flux_dr(shock256, kernel_for(shock256, "bump", 4 / 256))
        with pytest.raises(ScaleError):
            tube_mass(F, Interface((1, 0), 0.5), 1 / 256)


class TestTimeSeries:
    def test_trapezoid_in_time(self):
        u, _ = taylor_green(32)
        K = kernel_for(u, "bump", 4 / 32)
        series = TimeSeriesField((0.0, 0.5, 2.0), (u, u, u))
        assert flux_l1_series(series, K) == pytest.approx(2.0 * flux_dr(u, K).l1(), rel=1e-14)
