"""Experiment parameters and closed-form oscillator relations.

Covers optical-spring stiffening of the pendulum mode, dissipation dilution
of the quality factor, the mode's effective temperature and the complex
mechanical susceptibility used by the noise budget and the signal model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import constants

from .errors import ConfigError, UnstableTrapError

TWO_PI = 2.0 * math.pi

DAMPING_MODELS = ("structural", "viscous")


def _require(cond, field, message):
    if not cond:
        raise ConfigError(message, field=field)


@dataclass(frozen=True)
class PendulumConfig:
    """Suspended mirror: mass, bare pendulum mode and its loss."""

    probe_mass: float = 7e-6  # kg
    natural_frequency: float = 4.4  # Hz
    natural_quality: float = 1e5
    mode_mixing_factor: float = 4.0
    mirror_diameter: float = 3e-3  # m, gas damping cross-section

    def __post_init__(self):
        _require(self.probe_mass > 0, "pendulum.mass_kg", "must be > 0")
        _require(self.natural_frequency > 0, "pendulum.natural_frequency_hz", "must be > 0")
        _require(self.natural_quality > 0, "pendulum.natural_quality", "must be > 0")
        _require(self.mode_mixing_factor >= 1, "pendulum.mode_mixing_factor", "must be >= 1")
        _require(self.mirror_diameter > 0, "pendulum.mirror_diameter_m", "must be > 0")

    @property
    def stiffness(self) -> float:
        """Gravitational restoring stiffness k0 = m (2 pi f0)^2, N/m."""
        return self.probe_mass * (TWO_PI * self.natural_frequency) ** 2


@dataclass(frozen=True)
class CavityConfig:
    """Optical cavity and readout.

    The optical spring is given either directly as ``optical_stiffness``
    (N/m, signed) or through the trapped frequency it produces. If both are
    set they must agree.
    """

    optical_stiffness: Optional[float] = None
    trap_frequency: Optional[float] = 280.0  # Hz
    finesse: float = 1800.0
    round_trip_length: float = 0.1  # m
    input_power: float = 0.03  # W
    wavelength: float = 1.064e-6  # m
    calibration: float = 2e-10  # m/V

    def __post_init__(self):
        _require(
            self.optical_stiffness is not None or self.trap_frequency is not None,
            "cavity.trap_frequency_hz",
            "either trap_frequency_hz or optical_stiffness_n_m is required",
        )
        if self.trap_frequency is not None:
            _require(self.trap_frequency > 0, "cavity.trap_frequency_hz", "must be > 0")
        _require(self.finesse > 0, "cavity.finesse", "must be > 0")
        _require(self.round_trip_length > 0, "cavity.round_trip_length_m", "must be > 0")
        _require(self.input_power >= 0, "cavity.input_power_w", "must be >= 0")
        _require(self.wavelength > 0, "cavity.wavelength_m", "must be > 0")
        _require(self.calibration > 0, "cavity.calibration_m_per_v", "must be > 0")

    @property
    def optical_frequency(self) -> float:
        return constants.c / self.wavelength


@dataclass(frozen=True)
class EnvironmentConfig:
    temperature: float = 300.0  # K
    pressure: float = 1e-5  # Pa
    gas_molar_mass: float = 2.016e-3  # kg/mol, residual gas species (H2)

    def __post_init__(self):
        _require(self.temperature > 0, "environment.temperature_k", "must be > 0")
        _require(self.pressure >= 0, "environment.pressure_pa", "must be >= 0")
        _require(self.gas_molar_mass > 0, "environment.gas_molar_mass_kg_mol", "must be > 0")


@dataclass(frozen=True)
class FeedbackConfig:
    target_quality: float = 250.0

    def __post_init__(self):
        _require(self.target_quality > 0, "feedback.target_quality", "must be > 0")


@dataclass(frozen=True)
class SourceMassConfig:
    """Modulated source mass. ``drive_frequency=None`` means resonant drive."""

    source_mass: float = 1e-4  # kg
    mean_separation: float = 3.75e-3  # m
    drive_amplitude: float = 1.25e-3  # m
    drive_frequency: Optional[float] = None  # Hz

    def __post_init__(self):
        _require(self.source_mass >= 0, "source.mass_kg", "must be >= 0")
        _require(self.drive_amplitude >= 0, "source.drive_amplitude_m", "must be >= 0")
        _require(
            self.mean_separation > self.drive_amplitude,
            "source.drive_amplitude_m",
            "drive amplitude must stay below the mean separation (masses would collide)",
        )
        if self.drive_frequency is not None:
            _require(self.drive_frequency > 0, "source.drive_frequency_hz", "must be > 0")


@dataclass(frozen=True)
class DerivedOscillator:
    """Quantities derived from the configuration for the trapped mode."""

    mass: float
    trapped_frequency: float
    pendulum_stiffness: float
    optical_stiffness: float
    total_stiffness: float
    natural_quality_at_trap: float
    effective_quality: float
    effective_temperature: float
    qf_product: float

    @property
    def angular_frequency(self) -> float:
        return TWO_PI * self.trapped_frequency


def stiffness_for_frequency(pendulum: PendulumConfig, frequency: float) -> float:
    """Optical stiffness that puts the trapped mode at ``frequency``."""
    return pendulum.probe_mass * (TWO_PI * frequency) ** 2 - pendulum.stiffness


def optical_stiffness(pendulum: PendulumConfig, cavity: CavityConfig) -> float:
    """Resolve K_opt from whichever of stiffness / trap frequency is set."""
    if cavity.optical_stiffness is None:
        return stiffness_for_frequency(pendulum, cavity.trap_frequency)
    if cavity.trap_frequency is not None:
        implied = stiffness_for_frequency(pendulum, cavity.trap_frequency)
        total = pendulum.stiffness + cavity.optical_stiffness
        if not math.isclose(total, pendulum.stiffness + implied, rel_tol=1e-9):
            raise ConfigError(
                f"optical stiffness {cavity.optical_stiffness!r} N/m is inconsistent "
                f"with trap frequency {cavity.trap_frequency!r} Hz",
                field="cavity.optical_stiffness_n_m",
            )
    return cavity.optical_stiffness


def frequency_from_stiffness(total_stiffness: float, mass: float) -> float:
    if not total_stiffness > 0:
        raise UnstableTrapError(
            f"total stiffness {total_stiffness:.6g} N/m is not positive; the trap is unstable"
        )
    return math.sqrt(total_stiffness / mass) / TWO_PI


def trapped_frequency(pendulum: PendulumConfig, cavity: CavityConfig) -> float:
    """Centre-of-mass frequency (Hz) once the optical spring is added."""
    k_opt = optical_stiffness(pendulum, cavity)
    return frequency_from_stiffness(pendulum.stiffness + k_opt, pendulum.probe_mass)


def diluted_quality(pendulum: PendulumConfig, trapped_frequency: float) -> float:
    """Natural Q of the trapped mode: Q0 (f_m/f0)^2 / chi.

    The optical potential is lossless, so the elastic loss is diluted by the
    stiffness ratio; ``mode_mixing_factor`` accounts for coupling to the
    lossy pitch mode.
    """
    ratio = trapped_frequency / pendulum.natural_frequency
    return pendulum.natural_quality * ratio**2 / pendulum.mode_mixing_factor


def effective_temperature(
    pendulum: PendulumConfig, trapped_frequency: float, bath_temperature: float
) -> float:
    """chi * T / Q0 * (f0/f_m)^2, in kelvin."""
    if not trapped_frequency > 0:
        raise ValueError("trapped_frequency must be > 0")
    ratio = pendulum.natural_frequency / trapped_frequency
    return (
        pendulum.mode_mixing_factor * bath_temperature / pendulum.natural_quality * ratio**2
    )


def qf_product(quality: float, frequency: float) -> float:
    if quality <= 0 or frequency <= 0:
        raise ValueError("quality and frequency must be positive")
    return quality * frequency


def adiabatic_optical_spring(cavity: CavityConfig, detuning: float) -> float:
    """Optical-spring stiffness (N/m) for a detuned, impedance-matched cavity.

    Model helper, not used by default. ``detuning`` is in units of the
    cavity half-linewidth; positive detuning (cavity longer than resonance)
    gives a positive restoring force. Intracavity power is
    P_in F/pi / (1 + detuning^2) and the radiation force 2 P/c.
    """
    peak_power = cavity.input_power * cavity.finesse / math.pi
    slope = 4.0 * cavity.finesse / cavity.wavelength  # d(detuning)/dx
    return (
        2.0
        / constants.c
        * peak_power
        * 2.0
        * detuning
        / (1.0 + detuning**2) ** 2
        * slope
    )


def derive_oscillator(
    pendulum: PendulumConfig,
    cavity: CavityConfig,
    environment: EnvironmentConfig,
    feedback: FeedbackConfig,
) -> DerivedOscillator:
    k_opt = optical_stiffness(pendulum, cavity)
    total = pendulum.stiffness + k_opt
    f_m = frequency_from_stiffness(total, pendulum.probe_mass)
    q_nat = diluted_quality(pendulum, f_m)
    return DerivedOscillator(
        mass=pendulum.probe_mass,
        trapped_frequency=f_m,
        pendulum_stiffness=pendulum.stiffness,
        optical_stiffness=k_opt,
        total_stiffness=total,
        natural_quality_at_trap=q_nat,
        effective_quality=feedback.target_quality,
        effective_temperature=effective_temperature(pendulum, f_m, environment.temperature),
        qf_product=qf_product(q_nat, f_m),
    )


def susceptibility(
    derived: DerivedOscillator,
    frequency,
    quality: Optional[float] = None,
    damping_model: str = "structural",
):
    """Displacement response per unit force, m/N (complex).

    structural: 1 / (m (w_m^2 - w^2) + i m w_m^2 / Q)
    viscous:    1 / (m (w_m^2 - w^2) + i m w_m w / Q)

    ``quality`` defaults to the feedback-controlled effective Q; pass
    ``math.inf`` for the lossless response. Works on scalars and arrays.
    """
    if quality is None:
        quality = derived.effective_quality
    f = np.asarray(frequency, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0")
    w = TWO_PI * f
    wm = derived.angular_frequency
    m = derived.mass
    if damping_model == "structural":
        loss = m * wm**2 / quality
    elif damping_model == "viscous":
        loss = m * wm * w / quality
    else:
        raise ValueError(f"unknown damping model {damping_model!r}; use one of {DAMPING_MODELS}")
    chi = 1.0 / (m * (wm**2 - w**2) + 1j * loss)
    return chi if chi.ndim else complex(chi)
