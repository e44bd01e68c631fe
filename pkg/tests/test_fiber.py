import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmdark import _kernels_py
from dmdark.fiber import (
    DerivedCoefficients,
    FiberSegment,
    PropagationError,
    StepControl,
    derive_coefficients,
    linear_step,
    nonlinear_step,
    propagate_segment,
    saturated_gain,
)
from dmdark.grid import VectorField, make_grid, total_energy

try:
    from dmdark import _kernels
except ImportError:  # pragma: no cover - extension not built
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")

C = 299792.458  # nm/ps


def coeffs(beta2=0.0, beta3=0.0, beta_bi=0.0, delta=0.0, omega_g=18.0):
    return DerivedCoefficients(beta2, beta3, beta_bi, delta, omega_g)


def gaussian(grid, t0=1.0, p0=1.0, center=0.0):
    return np.sqrt(p0) * np.exp(-((grid.t - center) ** 2) / (2 * t0**2))


def circular_oracle(u, v, gamma, h):
    """Closed-form Kerr solution, written out in the circular basis."""
    s = np.sqrt(2.0)
    plus = (u + 1j * v) / s
    minus = (u - 1j * v) / s
    a, b = np.abs(plus) ** 2, np.abs(minus) ** 2
    plus = plus * np.exp(2j * gamma * h * (a + 2 * b) / 3)
    minus = minus * np.exp(2j * gamma * h * (b + 2 * a) / 3)
    return (plus + minus) / s, (plus - minus) / (1j * s)


class TestDeriveCoefficients:
    def test_edf_beta2(self):
        c = derive_coefficients(FiberSegment("EDF", 0.005, -32.0), 1565.0, 18.2)
        assert c.beta2 == pytest.approx(41.61, abs=0.01)

    def test_smf_beta2(self):
        c = derive_coefficients(FiberSegment("SMF", 0.008, 18.0), 1565.0, 18.2)
        assert c.beta2 == pytest.approx(-23.40, abs=0.01)

    def test_zero_dispersion(self):
        assert derive_coefficients(FiberSegment("x", 0.001, 0.0)).beta2 == 0.0

    def test_birefringence_terms(self):
        c = derive_coefficients(FiberSegment("x", 0.001, 0.0, beat_length_ratio=0.01), 1565.0, 18.2)
        # beat length 1.82 km
        assert c.beta_bi == pytest.approx(math.pi / 1.82)
        assert c.delta == pytest.approx(c.beta_bi * 1565.0 / (2 * math.pi * C))
        assert c.beta3 == pytest.approx(0.1 * 1565.0**2 / (2 * math.pi * C))

    def test_gain_bandwidth(self):
        c = derive_coefficients(FiberSegment("x", 0.001, 0.0, gain_bandwidth=24.0), 1565.0)
        assert c.omega_g == pytest.approx(2 * math.pi * C * 24.0 / 1565.0**2)

    def test_rejects_bad_wavelength(self):
        with pytest.raises(ValueError):
            derive_coefficients(FiberSegment("x", 0.001, 0.0), 0.0)


class TestSegmentValidation:
    def test_negative_length(self):
        with pytest.raises(ValueError):
            FiberSegment("x", -1.0, 0.0)

    def test_gain_needs_saturation_energy(self):
        with pytest.raises(ValueError):
            FiberSegment("x", 1.0, 0.0, small_signal_gain=1.0, sat_energy=0.0)

    def test_step_control(self):
        with pytest.raises(ValueError):
            StepControl(0.0)
        with pytest.raises(ValueError):
            StepControl(1e-4, kerr="euler")


class TestLinearStep:
    grid = make_grid(1024, 40.0)

    def test_identity(self):
        f = VectorField(self.grid, gaussian(self.grid), 0.5j * gaussian(self.grid))
        out = linear_step(f, coeffs(), 0.0, 0.3)
        np.testing.assert_allclose(out.u, f.u, atol=1e-15)
        np.testing.assert_allclose(out.v, f.v, atol=1e-15)

    def test_gaussian_dispersive_broadening(self):
        t0, beta2, z = 1.0, 20.0, 0.1
        f = VectorField(self.grid, gaussian(self.grid, t0), np.zeros(1024))
        out = linear_step(f, coeffs(beta2=beta2), 0.0, z)
        q = t0**2 - 1j * beta2 * z
        exact = t0 / np.sqrt(q) * np.exp(-self.grid.t**2 / (2 * q))
        assert np.linalg.norm(out.u - exact) / np.linalg.norm(exact) < 1e-6
        # rms width grows as T1 = T0 sqrt(1 + (beta2 z / T0^2)^2)
        p = np.abs(out.u) ** 2
        rms = np.sqrt(np.sum(self.grid.t**2 * p) / np.sum(p))
        t1 = t0 * math.sqrt(1 + (beta2 * z / t0**2) ** 2)
        assert rms * math.sqrt(2) == pytest.approx(t1, rel=1e-6)

    def test_cw_gain_at_zero_frequency(self):
        g, h = 400.0, 0.002
        f = VectorField(self.grid, np.full(1024, 0.3 + 0.1j), np.full(1024, 0.2))
        out = linear_step(f, coeffs(beta2=30.0), g, h)
        np.testing.assert_allclose(out.u, f.u * math.exp(g * h / 2), rtol=1e-12)
        np.testing.assert_allclose(out.v, f.v * math.exp(g * h / 2), rtol=1e-12)

    def test_walkoff_direction(self):
        # u_z = -delta u_t moves u towards positive t, v the other way
        delta, z = 50.0, 0.04
        f = VectorField(self.grid, gaussian(self.grid), gaussian(self.grid))
        out = linear_step(f, coeffs(delta=delta), 0.0, z)
        np.testing.assert_allclose(out.u, gaussian(self.grid, center=delta * z), atol=1e-10)
        np.testing.assert_allclose(out.v, gaussian(self.grid, center=-delta * z), atol=1e-10)

    def test_generator_matches_equation(self):
        """(L(h) - 1)/h against the equation's linear terms on analytic derivatives."""
        c = coeffs(beta2=40.0, beta3=0.13, beta_bi=1.7, delta=0.3, omega_g=18.0)
        g, h = 300.0, 1e-9
        t = self.grid.t
        e = np.exp(-(t**2) / 2)
        d1 = -t * e
        d2 = (t**2 - 1) * e
        d3 = (3 * t - t**3) * e
        f = VectorField(self.grid, e, np.zeros(1024))
        out = linear_step(f, c, g, h)
        rhs = (
            1j * c.beta_bi * e
            - c.delta * d1
            - 0.5j * c.beta2 * d2
            + c.beta3 / 6 * d3
            + 0.5 * g * e
            + g / (2 * c.omega_g**2) * d2
        )
        fd = (out.u - e) / h
        assert np.linalg.norm(fd - rhs) / np.linalg.norm(rhs) < 1e-5

    def test_unitary_without_gain(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((4, 1024))
        f = VectorField(self.grid, z[0] + 1j * z[1], z[2] + 1j * z[3])
        out = linear_step(f, coeffs(beta2=40.0, beta3=0.1, beta_bi=2.0, delta=0.1), 0.0, 0.5)
        assert total_energy(out) == pytest.approx(total_energy(f), rel=1e-12)

    def test_commutes(self):
        f = VectorField(self.grid, gaussian(self.grid), 1j * gaussian(self.grid, 2.0))
        a, b = coeffs(beta2=10.0, delta=0.2), coeffs(beta2=-5.0, beta3=0.3, beta_bi=1.0)
        ab = linear_step(linear_step(f, a, 100.0, 0.01), b, 0.0, 0.02)
        ba = linear_step(linear_step(f, b, 0.0, 0.02), a, 100.0, 0.01)
        np.testing.assert_allclose(ab.u, ba.u, atol=1e-13)
        np.testing.assert_allclose(ab.v, ba.v, atol=1e-13)


class TestNonlinearStep:
    grid = make_grid(512, 10.0)

    def test_spm_phase(self):
        p, gamma, h = 2.5, 3.0, 0.01
        f = VectorField(self.grid, np.full(512, math.sqrt(p)), np.zeros(512))
        out = nonlinear_step(f, gamma, h)
        np.testing.assert_allclose(np.angle(out.u), gamma * p * h, rtol=1e-14)
        np.testing.assert_allclose(np.abs(out.u), math.sqrt(p), rtol=1e-14)

    def test_zero_field(self):
        f = VectorField.zeros(self.grid)
        out = nonlinear_step(f, 3.0, 0.1)
        assert not out.u.any() and not out.v.any()

    @pytest.mark.parametrize("method", ["rk4", "exact"])
    def test_pointwise_power_conserved(self, method):
        rng = np.random.default_rng(5)
        z = 2.0 * rng.standard_normal((4, 512))
        f = VectorField(self.grid, z[0] + 1j * z[1], z[2] + 1j * z[3])
        out = nonlinear_step(f, 3.0, 1e-3, method=method)
        np.testing.assert_allclose(out.power, f.power, rtol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 2.0))
    def test_rk4_matches_closed_form(self, seed, scale):
        rng = np.random.default_rng(seed)
        z = scale * rng.standard_normal((4, 512))
        u, v = z[0] + 1j * z[1], z[2] + 1j * z[3]
        out = nonlinear_step(VectorField(self.grid, u, v), 3.0, 1e-3, substeps=4)
        eu, ev = circular_oracle(u, v, 3.0, 1e-3)
        # nonlinear phase per sub-step stays below ~0.1 here, RK4 error ~ phase^5
        tol = 1e-6 * np.abs(z).max()
        np.testing.assert_allclose(out.u, eu, atol=tol)
        np.testing.assert_allclose(out.v, ev, atol=tol)

    def test_exact_method_matches_oracle(self):
        rng = np.random.default_rng(9)
        z = 3.0 * rng.standard_normal((4, 512))
        u, v = z[0] + 1j * z[1], z[2] + 1j * z[3]
        out = nonlinear_step(VectorField(self.grid, u, v), 3.0, 0.05, method="exact")
        eu, ev = circular_oracle(u, v, 3.0, 0.05)
        np.testing.assert_allclose(out.u, eu, atol=1e-12)
        np.testing.assert_allclose(out.v, ev, atol=1e-12)

    def test_rk4_converges_to_closed_form(self):
        rng = np.random.default_rng(11)
        z = 2.0 * rng.standard_normal((4, 64))
        u, v = z[0] + 1j * z[1], z[2] + 1j * z[3]
        eu, _ = circular_oracle(u, v, 3.0, 0.02)
        errs = []
        for m in (4, 8):
            a, b = u.copy(), v.copy()
            _kernels_py.coupled_kerr_rk4(a, b, 3.0, 0.02, m)
            errs.append(np.abs(a - eu).max())
        # fourth order: halving the sub-step cuts the error ~16x
        assert 12 < errs[0] / errs[1] < 20


@needs_ext
class TestBackendsAgree:
    @pytest.mark.parametrize("name", ["coupled_kerr_rk4", "coupled_kerr_exact"])
    def test_same_result(self, name):
        rng = np.random.default_rng(3)
        z = rng.standard_normal((4, 4096))
        u, v = z[0] + 1j * z[1], z[2] + 1j * z[3]
        u[::7] = 0
        v[::5] = 0
        args = (3.0, 0.01) + ((4,) if name.endswith("rk4") else ())
        a1, b1 = u.copy(), v.copy()
        a2, b2 = u.copy(), v.copy()
        getattr(_kernels, name)(a1, b1, *args)
        getattr(_kernels_py, name)(a2, b2, *args)
        np.testing.assert_allclose(a1, a2, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(b1, b2, rtol=1e-13, atol=1e-15)

    def test_spm(self):
        u = np.linspace(0, 2, 100) * np.exp(1j * np.linspace(0, 1, 100))
        a1, a2 = u.copy(), u.copy()
        _kernels.spm_phase(a1, 3.0, 0.1)
        _kernels_py.spm_phase(a2, 3.0, 0.1)
        np.testing.assert_allclose(a1, a2, rtol=1e-14)


class TestSaturatedGain:
    seg = FiberSegment("EDF", 0.005, -32.0, small_signal_gain=485.0, sat_energy=500.0)
    grid = make_grid(256, 100.0)

    def field_with_energy(self, e):
        return VectorField(self.grid, np.full(256, math.sqrt(e / 100.0)), np.zeros(256))

    def test_unsaturated(self):
        assert saturated_gain(self.seg, VectorField.zeros(self.grid)) == 485.0

    def test_at_saturation_energy(self):
        g = saturated_gain(self.seg, self.field_with_energy(500.0))
        assert g == pytest.approx(485.0 / math.e)
        assert g == pytest.approx(178.42, abs=0.01)

    def test_passive(self):
        seg = FiberSegment("SMF", 0.008, 18.0)
        assert saturated_gain(seg, self.field_with_energy(10.0)) == 0.0


def scalar_ssfm_oracle(u, t, omega, beta2, beta3, gamma, g, omega_g, length, n):
    """Plain symmetric split-step for the scalar NLSE, nothing shared with dmdark."""
    h = length / n
    op = 0.5j * beta2 * omega**2 - 1j * beta3 / 6 * omega**3 + g / 2 - g * omega**2 / (2 * omega_g**2)
    half = np.exp(0.5 * h * op)
    for _ in range(n):
        u = np.fft.ifft(half * np.fft.fft(u))
        u = u * np.exp(1j * gamma * np.abs(u) ** 2 * h)
        u = np.fft.ifft(half * np.fft.fft(u))
    return u


class TestPropagateSegment:
    def test_zero_length_is_identity(self):
        g = make_grid(64, 10.0)
        f = VectorField(g, gaussian(g), gaussian(g))
        seg = FiberSegment("SMF", 0.0, 18.0)
        assert propagate_segment(f, seg, derive_coefficients(seg), StepControl()) is f

    @pytest.mark.parametrize("method", ["rk4", "exact"])
    def test_passive_energy_conserved(self, method):
        grid = make_grid(2048, 100.0)
        f = VectorField(grid, gaussian(grid, 2.0, 5.0) + 0.5, 0.7j * gaussian(grid, 1.0, 3.0, 4.0))
        seg = FiberSegment("SMF", 0.01, 18.0)
        out = propagate_segment(f, seg, derive_coefficients(seg), StepControl(1e-4, kerr=method))
        assert total_energy(out) == pytest.approx(total_energy(f), rel=1e-6)

    def test_scalar_reduction_matches_oracle(self):
        grid = make_grid(1024, 50.0)
        seg = FiberSegment("EDF", 0.003, -32.0, small_signal_gain=200.0, beat_length_ratio=0.0)
        c = derive_coefficients(seg)
        assert c.beta_bi == 0 and c.delta == 0
        u0 = gaussian(grid, 1.5, 4.0) * np.exp(0.3j * grid.t)
        f = VectorField(grid, u0, np.zeros(1024))
        ctl = StepControl(1e-4)
        out = propagate_segment(f, seg, c, ctl, g=150.0)
        ref = scalar_ssfm_oracle(u0, grid.t, grid.omega, c.beta2, c.beta3, seg.gamma, 150.0, c.omega_g, 0.003, 30)
        assert np.abs(out.u - ref).max() <= 1e-10
        assert not out.v.any()

    def test_gain_evaluated_at_entry(self):
        grid = make_grid(256, 100.0)
        seg = FiberSegment("EDF", 0.002, 0.0, third_order_D=0.0, gamma=0.0,
                           small_signal_gain=400.0, beat_length_ratio=0.0)
        f = VectorField(grid, np.full(256, 1.0), np.zeros(256))  # 100 pJ
        out = propagate_segment(f, seg, derive_coefficients(seg), StepControl(1e-4))
        g = 400.0 * math.exp(-100.0 / 500.0)
        assert total_energy(out) == pytest.approx(100.0 * math.exp(g * 0.002), rel=1e-12)

    @pytest.mark.parametrize("method", ["rk4", "exact"])
    def test_second_order_convergence(self, method):
        grid = make_grid(1024, 40.0)
        seg = FiberSegment("EDF", 0.05, -32.0)
        c = derive_coefficients(seg)
        f = VectorField(grid, 4.0 / np.cosh(grid.t), 2.0j / np.cosh(grid.t - 0.5))

        def run(n):
            return propagate_segment(f, seg, c, StepControl(0.05 / n, kerr=method)).stacked()

        ref = run(320)
        e1 = np.linalg.norm(run(20) - ref)
        e2 = np.linalg.norm(run(40) - ref)
        assert 3.5 <= e1 / e2 <= 4.5

    def test_nan_is_reported_with_position(self):
        grid = make_grid(64, 10.0)
        seg = FiberSegment("EDF", 0.01, -32.0, small_signal_gain=1.0)
        f = VectorField(grid, np.ones(64), np.ones(64))
        with pytest.raises(PropagationError, match=r"EDF.*z = "):
            propagate_segment(f, seg, derive_coefficients(seg), StepControl(1e-4), g=2e7)
