import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pendgrav.errors import ConfigError, UnstableTrapError
from pendgrav.oscillator import (
    CavityConfig,
    EnvironmentConfig,
    FeedbackConfig,
    PendulumConfig,
    SourceMassConfig,
    adiabatic_optical_spring,
    derive_oscillator,
    diluted_quality,
    effective_temperature,
    frequency_from_stiffness,
    qf_product,
    susceptibility,
    trapped_frequency,
)

PEND = PendulumConfig()


def spring(k_opt):
    return CavityConfig(optical_stiffness=k_opt, trap_frequency=None)


class TestTrappedFrequency:
    def test_reference_spring_gives_280hz(self):
        # 21.66 N/m is the inverted stiffness, rounded to 4 digits
        assert trapped_frequency(PEND, spring(21.66)) == pytest.approx(280.0, abs=0.01)

    def test_no_spring_is_natural_frequency(self):
        assert trapped_frequency(PEND, spring(0.0)) == pytest.approx(4.4, rel=1e-14)

    def test_marginal_stability(self):
        k0 = PEND.stiffness
        f = trapped_frequency(PEND, spring(-k0 + 1e-12))
        assert 0 < f < 1e-3

    @pytest.mark.parametrize("k_opt", [-PEND.stiffness, -1.0])
    def test_unstable(self, k_opt):
        with pytest.raises(UnstableTrapError):
            trapped_frequency(PEND, spring(k_opt))

    def test_target_frequency_round_trip(self):
        assert trapped_frequency(PEND, CavityConfig()) == pytest.approx(280.0, rel=1e-14)

    def test_inconsistent_stiffness_and_frequency(self):
        with pytest.raises(ConfigError):
            trapped_frequency(PEND, CavityConfig(optical_stiffness=1.0, trap_frequency=280.0))

    @given(st.floats(-0.005, 1e3))
    def test_stiffness_additivity(self, k_opt):
        m, f0 = PEND.probe_mass, PEND.natural_frequency
        direct = math.sqrt(f0**2 + k_opt / (m * 4 * math.pi**2))
        assert trapped_frequency(PEND, spring(k_opt)) == pytest.approx(direct, rel=1e-12)
        total = frequency_from_stiffness(PEND.stiffness + k_opt, m)
        assert trapped_frequency(PEND, spring(k_opt)) == pytest.approx(total, rel=1e-12)


class TestDilution:
    def test_reference_value(self):
        assert diluted_quality(PEND, 280.0) == pytest.approx(1.01e8, rel=0.005)

    def test_no_dilution_no_mixing(self):
        p = PendulumConfig(mode_mixing_factor=1.0)
        assert diluted_quality(p, p.natural_frequency) == pytest.approx(p.natural_quality)

    def test_ideal_dilution(self):
        p = PendulumConfig(mode_mixing_factor=1.0)
        assert diluted_quality(p, 280.0) == pytest.approx(4.05e8, rel=0.001)

    @given(st.floats(4.4, 5e3), st.floats(1.001, 2.0), st.floats(1.0, 10.0))
    def test_monotonic(self, f, step, chi):
        p = PendulumConfig(mode_mixing_factor=chi)
        assert diluted_quality(p, f * step) > diluted_quality(p, f)
        q = PendulumConfig(mode_mixing_factor=chi * step)
        assert diluted_quality(q, f) < diluted_quality(p, f)


class TestEffectiveTemperature:
    def test_reference_value(self):
        t = effective_temperature(PEND, 280.0, 300.0)
        assert t == pytest.approx(2.96e-6, rel=0.002)
        assert 1e-6 < t < 1e-5

    def test_unit_ratio(self):
        p = PendulumConfig(mode_mixing_factor=1.0)
        assert effective_temperature(p, p.natural_frequency, 300.0) == pytest.approx(300.0 / 1e5)

    def test_two_khz_trap(self):
        assert effective_temperature(PEND, 2000.0, 300.0) == pytest.approx(58e-9, rel=0.002)

    @given(st.floats(5.0, 1e4), st.floats(1.0, 8.0))
    def test_literal_identity_and_f2_invariance(self, f, chi):
        p = PendulumConfig(mode_mixing_factor=chi)
        t = effective_temperature(p, f, 300.0)
        assert t == pytest.approx(chi * 300.0 * (4.4 / f) ** 2 / 1e5, rel=1e-12)
        t280 = effective_temperature(p, 280.0, 300.0)
        assert t * f**2 == pytest.approx(t280 * 280.0**2, rel=1e-12)


class TestQf:
    def test_280hz(self):
        assert qf_product(diluted_quality(PEND, 280.0), 280.0) == pytest.approx(2.8e10, rel=0.02)

    def test_two_khz(self):
        assert qf_product(diluted_quality(PEND, 2000.0), 2000.0) == pytest.approx(1.03e13, rel=0.005)

    def test_unit(self):
        assert qf_product(1.0, 1.0) == 1.0


class TestSusceptibility:
    @pytest.mark.parametrize("model", ["structural", "viscous"])
    def test_resonant_magnitude(self, derived, model):
        chi = susceptibility(derived, 280.0, 250.0, model)
        expected = 250.0 / (7e-6 * (2 * math.pi * 280.0) ** 2)
        assert expected == pytest.approx(11.5, rel=0.01)
        assert abs(chi) == pytest.approx(expected, rel=1e-9)

    def test_static_limit(self, derived):
        chi = susceptibility(derived, 1e-6, 250.0)
        assert abs(chi) == pytest.approx(1 / 21.6658, rel=1e-4)
        assert abs(chi) == pytest.approx(0.046, rel=0.01)

    def test_lossless_is_real(self, derived):
        chi = susceptibility(derived, np.array([10.0, 100.0, 500.0]), math.inf)
        assert np.all(chi.imag == 0)

    def test_rejects_nonpositive_frequency(self, derived):
        with pytest.raises(ValueError):
            susceptibility(derived, 0.0)


def test_derived_oscillator_defaults(derived):
    assert derived.trapped_frequency == pytest.approx(280.0)
    assert derived.optical_stiffness == pytest.approx(21.66, rel=1e-3)
    assert derived.total_stiffness == pytest.approx(derived.pendulum_stiffness + derived.optical_stiffness)
    assert derived.effective_quality == 250.0
    assert derived.trapped_frequency >= PEND.natural_frequency


def test_derive_rejects_unstable():
    with pytest.raises(UnstableTrapError):
        derive_oscillator(PEND, spring(-1.0), EnvironmentConfig(), FeedbackConfig())


def test_adiabatic_spring_model():
    cav = CavityConfig()
    assert adiabatic_optical_spring(cav, 0.0) == 0.0
    k = adiabatic_optical_spring(cav, 0.3)
    assert k > 0
    assert adiabatic_optical_spring(cav, -0.3) == pytest.approx(-k)


@pytest.mark.parametrize(
    "factory, kwargs",
    [
        (PendulumConfig, {"probe_mass": 0.0}),
        (PendulumConfig, {"mode_mixing_factor": 0.5}),
        (CavityConfig, {"finesse": 0.0}),
        (CavityConfig, {"calibration": -1.0}),
        (EnvironmentConfig, {"temperature": 0.0}),
        (FeedbackConfig, {"target_quality": 0.0}),
        (SourceMassConfig, {"drive_amplitude": 5e-3}),
        (SourceMassConfig, {"source_mass": -1.0}),
    ],
)
def test_type_invariants(factory, kwargs):
    with pytest.raises(ConfigError):
        factory(**kwargs)
