import math
from dataclasses import replace

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from pendgrav.config import SystemConfig
from pendgrav.errors import CollisionError, ConfigError
from pendgrav.gravity import (
    GRAVITATIONAL_CONSTANT,
    analytic_snr,
    driven_phase,
    driven_response,
    exact_force_harmonics,
    integration_time_for_snr,
    linearized_fundamental,
    min_resolvable_source_mass,
    noise_power_in_bandwidth,
    rms_displacement_closed_form,
    snr_and_integration_time,
)
from pendgrav.oscillator import SourceMassConfig, susceptibility

G = GRAVITATIONAL_CONSTANT
SRC = SourceMassConfig()
M_PROBE = 7e-6


def source(eps, d0=3.75e-3, mass=1e-4):
    return SourceMassConfig(mass, d0, eps * d0)


def fundamental_oracle(eps):
    """Closed-form fundamental of 1/(1 + eps cos t)^2, via sympy.

    (2/pi) int_0^pi cos t / (lam + eps cos t) dt = (2/eps)(1 - lam/sqrt(lam^2 - eps^2));
    the squared shape is minus its lambda-derivative at lam = 1.
    """
    lam, e = sp.symbols("lam e", positive=True)
    c1 = 2 / e * (1 - lam / sp.sqrt(lam**2 - e**2))
    a1 = -sp.diff(c1, lam).subs(lam, 1)
    return float(sp.N(a1.subs(e, sp.Rational(eps).limit_denominator(10**12)), 30))


def riemann_coefficients(eps, k_max, n=10**6):
    theta = 2 * np.pi * np.arange(n) / n
    shape = 1.0 / (1.0 + eps * np.cos(theta)) ** 2
    return np.array([(1.0 if k == 0 else 2.0) * np.mean(shape * np.cos(k * theta)) for k in range(k_max + 1)])


class TestClosedForm:
    def test_reference_value(self):
        x = rms_displacement_closed_form(SRC, 250.0, 280.0)
        assert x == pytest.approx(3.2e-14, rel=0.01)
        assert x == pytest.approx(3e-14, rel=0.10)

    def test_zero_mass(self):
        assert rms_displacement_closed_form(replace(SRC, source_mass=0.0), 250.0, 280.0) == 0.0

    def test_doubling_separation(self):
        far = SourceMassConfig(1e-4, 7.5e-3, 1.25e-3)
        assert rms_displacement_closed_form(far, 250, 280) == pytest.approx(rms_displacement_closed_form(SRC, 250, 280) / 8, rel=1e-12)

    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 0.9), st.floats(0.1, 10), st.floats(0.5, 4))
    def test_scalings(self, a_m, a_q, frac, a_f, a_d0):
        base = SourceMassConfig(1e-4, 3.75e-3 * a_d0, 3.75e-3 * a_d0 * frac / 2)
        ref = rms_displacement_closed_form(base, 250.0, 280.0)
        assert rms_displacement_closed_form(replace(base, source_mass=1e-4 * a_m), 250, 280) == pytest.approx(a_m * ref, rel=1e-12)
        assert rms_displacement_closed_form(base, 250.0 * a_q, 280) == pytest.approx(a_q * ref, rel=1e-12)
        doubled = replace(base, drive_amplitude=2 * base.drive_amplitude)
        assert rms_displacement_closed_form(doubled, 250, 280) == pytest.approx(2 * ref, rel=1e-12)
        assert rms_displacement_closed_form(base, 250, 280 * a_f) == pytest.approx(ref / a_f**2, rel=1e-12)

    def test_ratio_to_linear_response(self, derived):
        linear = linearized_fundamental(SRC, M_PROBE) * abs(susceptibility(derived, 280.0, 250.0))
        assert linear == pytest.approx(2.6e-14, rel=0.02)
        assert rms_displacement_closed_form(SRC, 250, 280) / linear == pytest.approx(math.sqrt(2 * math.pi) / 2, rel=1e-12)


class TestExactHarmonics:
    def test_default_geometry_ratio(self):
        drive = exact_force_harmonics(SRC, M_PROBE)
        ratio = drive.force_fundamental / linearized_fundamental(SRC, M_PROBE)
        assert ratio > 1
        assert ratio == pytest.approx(1.1932426932523, rel=1e-10)

    @pytest.mark.parametrize("eps", [1e-3, 0.1, 1 / 3, 0.5, 0.8])
    def test_against_symbolic_oracle(self, eps):
        drive = exact_force_harmonics(source(eps), M_PROBE)
        scale = G * 1e-4 * M_PROBE / 3.75e-3**2
        assert drive.force_fundamental / scale == pytest.approx(abs(fundamental_oracle(eps)), rel=1e-9)

    def test_against_riemann_sum(self):
        eps = 1 / 3
        drive = exact_force_harmonics(source(eps), M_PROBE, 6)
        scale = G * 1e-4 * M_PROBE / 3.75e-3**2
        ref = riemann_coefficients(eps, 6) * scale
        np.testing.assert_allclose(drive.force_harmonics[:4], ref[:4], rtol=1e-6)
        np.testing.assert_allclose(drive.force_harmonics, ref, atol=1e-6 * abs(ref[1]))

    def test_linearization_limit(self):
        s = source(1e-4)
        ratio = exact_force_harmonics(s, M_PROBE).force_fundamental / linearized_fundamental(s, M_PROBE)
        assert ratio == pytest.approx(1.0, abs=1e-7)

    def test_monotone_from_above(self):
        eps = np.linspace(0.01, 0.89, 40)
        ratios = [
            exact_force_harmonics(source(e), M_PROBE).force_fundamental
            / linearized_fundamental(source(e), M_PROBE)
            for e in eps
        ]
        assert all(r > 1 for r in ratios)
        assert np.all(np.diff(ratios) > 0)

    def test_static(self):
        drive = exact_force_harmonics(source(0.0), M_PROBE)
        assert drive.force_fundamental == 0.0
        assert all(c == 0.0 for c in drive.force_harmonics[1:])
        assert drive.dc_offset == pytest.approx(G * 1e-4 * M_PROBE / 3.75e-3**2, rel=1e-12)

    def test_zero_mass(self):
        drive = exact_force_harmonics(replace(SRC, source_mass=0.0), M_PROBE)
        assert drive.force_fundamental == 0.0 and drive.dc_offset == 0.0

    def test_collision(self):
        with pytest.raises(CollisionError):
            exact_force_harmonics(SimpleSource(3e-3, 3e-3), M_PROBE)
        with pytest.raises(ConfigError):
            SourceMassConfig(1e-4, 3e-3, 3e-3)

    @given(st.floats(0.0, 0.9))
    @settings(max_examples=20, deadline=None)
    def test_parseval(self, eps):
        d0 = 3.75e-3
        drive = exact_force_harmonics(source(eps), M_PROBE, 40 if eps > 0.5 else 16)
        c = np.array(drive.force_harmonics)
        series_ms = c[0] ** 2 + 0.5 * np.sum(c[1:] ** 2)
        from scipy.integrate import quad

        scale = G * 1e-4 * M_PROBE / d0**2
        direct, _ = quad(lambda t: (scale / (1 + eps * math.cos(t)) ** 2) ** 2, 0, math.pi, epsrel=1e-13)
        assert series_ms == pytest.approx(direct / math.pi, rel=1e-6)

    def test_finite_and_nonnegative(self):
        drive = exact_force_harmonics(source(0.7), M_PROBE)
        assert np.all(np.isfinite(drive.force_harmonics)) and drive.force_fundamental >= 0


class SimpleSource:
    # bypasses SourceMassConfig validation to reach the collision guard
    def __init__(self, d0, ds):
        self.mean_separation, self.drive_amplitude, self.source_mass = d0, ds, 1e-4


class TestResponse:
    def test_resonant_formula(self, derived):
        drive = exact_force_harmonics(SRC, M_PROBE)
        amp = driven_response(drive, derived, 250.0)
        expected = drive.force_fundamental * 250.0 / (M_PROBE * (2 * math.pi * 280.0) ** 2)
        assert amp == pytest.approx(expected, rel=1e-9)
        assert amp == pytest.approx(3.0495e-14, rel=1e-4)

    def test_off_resonance_static(self, derived):
        drive = exact_force_harmonics(SRC, M_PROBE)
        amp = driven_response(drive, derived, 250.0, drive_frequency=28.0)
        static = drive.force_fundamental / (M_PROBE * (2 * math.pi * 280.0) ** 2)
        assert amp == pytest.approx(static, rel=0.015)

    def test_q_doubling(self, derived):
        drive = exact_force_harmonics(SRC, M_PROBE)
        assert driven_response(drive, derived, 500.0) == pytest.approx(2 * driven_response(drive, derived, 250.0), rel=1e-12)

    def test_phase_at_resonance(self, derived):
        drive = exact_force_harmonics(SRC, M_PROBE)
        # fundamental is negative (force peaks at closest approach, theta = pi)
        # and the resonant response lags by pi/2
        assert driven_phase(drive, derived, 250.0) == pytest.approx(math.pi / 2, abs=1e-9)


class TestSnr:
    def test_unit_snr(self):
        assert snr_and_integration_time(3e-14, 3e-14, 1.0).snr_amplitude == pytest.approx(1.0)

    def test_hundred_seconds(self):
        assert snr_and_integration_time(3e-14, 3e-14, 100.0).snr_amplitude == pytest.approx(10.0)

    def test_bandwidth_power(self):
        assert noise_power_in_bandwidth(3e-14, 1.0) / noise_power_in_bandwidth(3e-14, 0.01) == pytest.approx(100.0)

    def test_zero_noise(self):
        assert snr_and_integration_time(1e-14, 0.0, 1.0).snr_amplitude == math.inf

    @given(st.floats(1e-3, 1e4))
    def test_sqrt_t(self, t):
        one = snr_and_integration_time(2e-14, 3e-14, 1.0).snr_amplitude
        assert snr_and_integration_time(2e-14, 3e-14, t).snr_amplitude == pytest.approx(one * math.sqrt(t), rel=1e-12)

    @given(st.floats(0.1, 100))
    def test_inverse(self, target):
        t = integration_time_for_snr(2e-14, 3e-14, target)
        assert snr_and_integration_time(2e-14, 3e-14, t).snr_amplitude == pytest.approx(target, rel=1e-12)

    def test_analytic_defaults(self, default_config):
        assert analytic_snr(default_config) == pytest.approx(1.0677, rel=1e-4)
        assert analytic_snr(default_config, signal="exact") == pytest.approx(1.0165, rel=1e-4)


class TestMinimumMass:
    def test_defaults(self, default_config):
        m = min_resolvable_source_mass(default_config, 1.0)
        assert m == pytest.approx(93.66e-6, rel=1e-3)
        assert m == pytest.approx(94e-6, rel=0.01)

    def test_quadruple_time(self, default_config):
        assert min_resolvable_source_mass(default_config, 4.0) == pytest.approx(
            min_resolvable_source_mass(default_config, 1.0) / 2, rel=1e-12
        )

    def test_few_mg_at_four_mm(self, default_config):
        # 0.01 Hz bandwidth (T = 100 s) at 4 mm: a source of the probe's size
        cfg = replace(default_config, source=replace(default_config.source, mean_separation=4e-3))
        m = min_resolvable_source_mass(cfg, 100.0)
        assert m == pytest.approx(1.13671316e-05, rel=1e-6)
        assert m < 2 * M_PROBE

    @given(st.floats(0.1, 1e3), st.floats(1.01, 10))
    def test_decreasing_in_time(self, t, step):
        cfg = SystemConfig()
        assert min_resolvable_source_mass(cfg, t * step) < min_resolvable_source_mass(cfg, t)
