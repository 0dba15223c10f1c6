"""Gravitational drive from a modulated source mass and its detectability.

The source mass oscillates along the line of centres,
d(t) = d0 + ds cos(w_d t), so the point-mass force on the probe,
F(t) = G M m / d(t)^2, is periodic with a fundamental of 2 G M m ds / d0^3
to first order in ds/d0. The resonant closed form

    sqrt(P_xxG) = sqrt(2 pi) Q / w_m^2 * G M ds / d0^3

is provided alongside the exact harmonic decomposition and the driven
response through the mechanical susceptibility. The two resonant estimates
differ by sqrt(2 pi)/2 ~ 1.25; both are exposed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import CollisionError
from .oscillator import TWO_PI, DerivedOscillator, SourceMassConfig, susceptibility

GRAVITATIONAL_CONSTANT = 6.674e-11  # m^3 kg^-1 s^-2


@dataclass(frozen=True)
class GravityDrive:
    """Cosine-series decomposition of the periodic force, in newtons.

    ``force_harmonics[k]`` is the coefficient of cos(k w_d t); index 0 is
    the static (dc) force. Signs follow the force along the line of centres
    towards the source.
    """

    force_fundamental: float
    force_harmonics: tuple
    dc_offset: float


@dataclass(frozen=True)
class SignalEstimate:
    rms_displacement: float
    snr_amplitude: float
    integration_time: float


def rms_displacement_closed_form(
    source: SourceMassConfig, quality: float, trapped_frequency: float
) -> float:
    """Resonant signal displacement sqrt(2 pi) Q / w_m^2 G M ds / d0^3, in m."""
    wm = TWO_PI * trapped_frequency
    return (
        math.sqrt(TWO_PI)
        * quality
        / wm**2
        * GRAVITATIONAL_CONSTANT
        * source.source_mass
        * source.drive_amplitude
        / source.mean_separation**3
    )


def linearized_fundamental(source: SourceMassConfig, probe_mass: float) -> float:
    """First-order force amplitude 2 G M m ds / d0^3."""
    return (
        2.0
        * GRAVITATIONAL_CONSTANT
        * source.source_mass
        * probe_mass
        * source.drive_amplitude
        / source.mean_separation**3
    )


def exact_force_harmonics(
    source: SourceMassConfig, probe_mass: float, n_harmonics: int = 8
) -> GravityDrive:
    """Fourier coefficients of G M m / (d0 + ds cos theta)^2 by adaptive quadrature.

    Coefficients smaller than the quadrature error are reported as zero.
    """
    d0, ds = source.mean_separation, source.drive_amplitude
    if ds >= d0:
        raise CollisionError(f"drive amplitude {ds} m reaches the separation {d0} m")
    if n_harmonics < 1:
        raise ValueError("n_harmonics must be >= 1")
    scale = GRAVITATIONAL_CONSTANT * source.source_mass * probe_mass / d0**2
    eps = ds / d0
    if scale == 0.0:
        zeros = (0.0,) * (n_harmonics + 1)
        return GravityDrive(0.0, zeros, 0.0)

    def shape(theta):
        return 1.0 / (1.0 + eps * math.cos(theta)) ** 2

    coeffs = []
    for k in range(n_harmonics + 1):
        # even integrand: integrate over half a period; QAWO flags roundoff
        # on the tiny high harmonics, which the error check below zeroes
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, err = quad(
                shape, 0.0, math.pi, weight="cos", wvar=k,
                epsabs=1e-13 * eps, epsrel=1e-11, limit=200,
            )
        norm = 1.0 / math.pi if k == 0 else 2.0 / math.pi
        val, err = val * norm, err * norm
        if k > 0 and abs(val) <= max(10.0 * err, 1e-14 * coeffs[0] / scale):
            val = 0.0
        coeffs.append(scale * val)
    return GravityDrive(abs(coeffs[1]), tuple(coeffs), coeffs[0])


def driven_response(
    drive: GravityDrive,
    derived: DerivedOscillator,
    quality: Optional[float] = None,
    drive_frequency: Optional[float] = None,
    damping_model: str = "structural",
) -> float:
    """Steady-state displacement amplitude at the drive frequency, in m."""
    f = derived.trapped_frequency if drive_frequency is None else drive_frequency
    chi = susceptibility(derived, f, quality, damping_model)
    return drive.force_fundamental * abs(chi)


def driven_phase(
    drive: GravityDrive,
    derived: DerivedOscillator,
    quality: Optional[float] = None,
    drive_frequency: Optional[float] = None,
) -> float:
    """Phase (rad) of the displacement tone relative to cos(w_d t) of the source."""
    f = derived.trapped_frequency if drive_frequency is None else drive_frequency
    chi = susceptibility(derived, f, quality)
    return float(np.angle(drive.force_harmonics[1] * chi))


def snr_and_integration_time(
    signal: float, noise_asd_at_drive: float, integration_time: float
) -> SignalEstimate:
    """Amplitude SNR of a tone after integrating for T seconds.

    The demodulated noise bandwidth is 1/T, so the noise amplitude is
    ASD / sqrt(T) and the SNR grows as sqrt(T).
    """
    if signal < 0 or noise_asd_at_drive < 0 or integration_time <= 0:
        raise ValueError("signal and noise must be >= 0 and integration time > 0")
    if noise_asd_at_drive == 0:
        snr = math.inf
    else:
        snr = signal / (noise_asd_at_drive / math.sqrt(integration_time))
    return SignalEstimate(signal, snr, integration_time)


def integration_time_for_snr(signal: float, noise_asd_at_drive: float, target_snr: float) -> float:
    if signal <= 0:
        return math.inf
    return (target_snr * noise_asd_at_drive / signal) ** 2


def noise_power_in_bandwidth(asd: float, bandwidth: float) -> float:
    """Noise variance (m^2) of a white ASD seen in ``bandwidth`` Hz."""
    return asd**2 * bandwidth


def noise_asd_at(config, frequency: float) -> float:
    """Total budget ASD (m/rtHz) at one frequency."""
    from .budget import FrequencyGrid, compute_budget

    budget = compute_budget(config, FrequencyGrid(np.array([frequency])))
    return float(budget.total.asd[0])


def analytic_snr(config, integration_time: float = 1.0, signal: str = "closed_form") -> float:
    """SNR of the gravity tone against the analytic budget.

    ``signal='closed_form'`` uses the resonant closed form at the trap frequency,
    ``signal='exact'`` the exact fundamental through the susceptibility at
    the configured drive frequency.
    """
    derived = config.derive()
    q = derived.effective_quality
    if signal == "closed_form":
        f = derived.trapped_frequency
        amp = rms_displacement_closed_form(config.source, q, f)
    elif signal == "exact":
        f = config.drive_frequency()
        drive = exact_force_harmonics(config.source, config.pendulum.probe_mass)
        amp = driven_response(drive, derived, q, f)
    else:
        raise ValueError(f"unknown signal model {signal!r}")
    return snr_and_integration_time(amp, noise_asd_at(config, f), integration_time).snr_amplitude


def min_resolvable_source_mass(
    config, integration_time: float = 1.0, target_snr: float = 1.0
) -> float:
    """Smallest source mass (kg) reaching ``target_snr`` in ``integration_time``.

    Inverts the resonant closed form against the budget ASD at the trap
    frequency; scales as 1/sqrt(T).
    """
    derived = config.derive()
    f = derived.trapped_frequency
    per_kg = rms_displacement_closed_form(
        SourceMassConfig(1.0, config.source.mean_separation, config.source.drive_amplitude),
        derived.effective_quality,
        f,
    )
    return target_snr * noise_asd_at(config, f) / math.sqrt(integration_time) / per_kg
