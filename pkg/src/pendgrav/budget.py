"""Displacement noise budget of the trapped pendulum.

Components (one-sided PSDs in m^2/Hz on a shared frequency grid):

* suspension thermal noise, structural (or viscous) damping,
* laser frequency noise, shaped by the optical spring,
* a flat intensity / sensing floor,

plus the residual-gas damping limit on Q. User-supplied displacement PSDs
(seismic, coating thermal, ...) can be added to :func:`total_budget`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional

import numpy as np
from scipy import constants

from .errors import GridError
from .oscillator import (
    TWO_PI,
    CavityConfig,
    DerivedOscillator,
    EnvironmentConfig,
    PendulumConfig,
    susceptibility,
)

PSD_KINDS = ("displacement", "force", "fractional", "voltage")


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing, positive frequencies in Hz."""

    frequencies: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise GridError("frequency grid must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(f)) or f[0] <= 0:
            raise GridError("grid frequencies must be finite and > 0")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise GridError("grid frequencies must be strictly increasing")
        f.setflags(write=False)
        object.__setattr__(self, "frequencies", f)

    def __len__(self):
        return self.frequencies.size

    def same_as(self, other: "FrequencyGrid") -> bool:
        return self is other or np.array_equal(self.frequencies, other.frequencies)

    @classmethod
    def logspace(cls, fmin, fmax, n, include=()):
        """Log-spaced grid, with extra points merged in (e.g. the resonance)."""
        f = np.geomspace(fmin, fmax, n)
        if len(include):
            f = np.union1d(f, np.asarray(include, dtype=float))
        return cls(f)

    @classmethod
    def for_record(cls, n_samples, sample_rate):
        """Positive FFT bin frequencies of an ``n_samples`` record."""
        return cls(np.fft.rfftfreq(n_samples, d=1.0 / sample_rate)[1:])


@dataclass(frozen=True, eq=False)
class Psd:
    grid: FrequencyGrid
    values: np.ndarray
    kind: str = "displacement"
    bandwidth: Optional[float] = None  # resolution bandwidth of an estimate, Hz

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.frequencies.shape:
            raise GridError(
                f"PSD has {v.size} values for a grid of {len(self.grid)} frequencies"
            )
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("PSD values must be finite and >= 0")
        if self.kind not in PSD_KINDS:
            raise ValueError(f"unknown PSD kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies

    @property
    def asd(self) -> np.ndarray:
        return np.sqrt(self.values)

    def at(self, frequency: float) -> float:
        """PSD value at ``frequency`` (linear interpolation on the grid)."""
        f = self.frequencies
        if frequency < f[0] or frequency > f[-1]:
            raise GridError(f"{frequency} Hz is outside the grid [{f[0]}, {f[-1]}]")
        return float(np.interp(frequency, f, self.values))

    def scaled(self, factor: float) -> "Psd":
        return Psd(self.grid, self.values * factor, self.kind, self.bandwidth)


@dataclass(frozen=True, eq=False)
class NoiseBudget:
    components: Dict[str, Psd]
    total: Psd
    overlays: Dict[str, Psd] = field(default_factory=dict)

    @property
    def grid(self) -> FrequencyGrid:
        return self.total.grid

    def to_csv(self) -> str:
        """CSV text: frequency plus every component ASD and the total."""
        names = list(self.components)
        header = ["frequency_hz"] + [f"{n}_asd_m_rthz" for n in names] + ["total_asd_m_rthz"]
        cols = [self.grid.frequencies] + [self.components[n].asd for n in names]
        cols.append(self.total.asd)
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in zip(*cols):
            buf.write(",".join(f"{x:.9e}" for x in row) + "\n")
        return buf.getvalue()


def _check_grid(grid: FrequencyGrid):
    if grid is None or len(grid) == 0:
        raise GridError("empty frequency grid")


def suspension_thermal_psd(
    derived: DerivedOscillator,
    env: EnvironmentConfig,
    grid: FrequencyGrid,
    damping_model: str = "structural",
    natural_quality: Optional[float] = None,
) -> Psd:
    """Thermal displacement noise of the trapped mode.

    The force noise comes from the intrinsic loss (natural Q at the trap
    frequency); feedback damping only reshapes the line through the
    effective-Q susceptibility and adds no force noise.

    structural: S_F = 4 kB T k phi / w,  phi = 1/Q_nat (frequency-independent)
    viscous:    S_F = 4 kB T m w_m / Q_nat
    """
    _check_grid(grid)
    q_nat = derived.natural_quality_at_trap if natural_quality is None else natural_quality
    if not q_nat > 0:
        raise ValueError("natural quality must be > 0")
    f = grid.frequencies
    w = TWO_PI * f
    kT = constants.k * env.temperature
    if damping_model == "structural":
        force = 4.0 * kT * derived.total_stiffness / q_nat / w
    elif damping_model == "viscous":
        force = np.full_like(f, 4.0 * kT * derived.mass * derived.angular_frequency / q_nat)
    else:
        raise ValueError(f"unknown damping model {damping_model!r}")
    chi = susceptibility(derived, f, derived.effective_quality, damping_model)
    return Psd(grid, force * np.abs(chi) ** 2)


def laser_frequency_psd(asd_hz, cavity: CavityConfig, grid: FrequencyGrid) -> Psd:
    """Fractional frequency-noise PSD (delta nu / nu)^2 / Hz from an ASD in Hz/rtHz.

    ``asd_hz`` may be a scalar (white) or an array on ``grid``.
    """
    _check_grid(grid)
    asd = np.broadcast_to(np.asarray(asd_hz, dtype=float), grid.frequencies.shape)
    return Psd(grid, (asd / cavity.optical_frequency) ** 2, kind="fractional")


def spring_gain(derived: DerivedOscillator, frequencies) -> np.ndarray:
    """|K_opt chi(w)|^2 + 1: how the optical spring amplifies readout noise."""
    chi = susceptibility(derived, frequencies, derived.effective_quality)
    return np.abs(derived.optical_stiffness * chi) ** 2 + 1.0


def frequency_noise_psd(
    laser: Psd, cavity: CavityConfig, derived: DerivedOscillator, grid: FrequencyGrid
) -> Psd:
    """Displacement-equivalent laser frequency noise, shaped by the optical spring.

    Frequency fluctuations look like a length change x_nu = L delta_nu / nu.
    The spring turns that apparent offset into a force K_opt x_nu, which the
    mirror answers through its effective-Q susceptibility, so

        S_x = (|K_opt chi|^2 + 1) L^2 S_frac

    This shaping is a modelling choice; its level is set by the calibrated
    laser ASD in the default configuration.
    """
    _check_grid(grid)
    if laser.kind != "fractional":
        raise ValueError("laser noise must be a fractional frequency PSD")
    if not laser.grid.same_as(grid):
        raise GridError("laser noise PSD is not on the budget grid")
    x_nu = cavity.round_trip_length**2 * laser.values
    return Psd(grid, spring_gain(derived, grid.frequencies) * x_nu)


def intensity_noise_floor(level: float, grid: FrequencyGrid) -> Psd:
    """Flat sensing floor of ``level`` m/rtHz."""
    _check_grid(grid)
    if level < 0:
        raise ValueError("intensity floor level must be >= 0")
    return Psd(grid, np.full(len(grid), float(level) ** 2))


def gas_damping_rate(env: EnvironmentConfig, pendulum: PendulumConfig) -> float:
    """Residual-gas velocity damping rate gamma (rad/s) of the mirror.

    Free-molecular flow on a thin disc moving along its axis, both faces
    exposed (Christian's plate formula):

        gamma = P A sqrt(32 m_gas / (pi kB T)) / m

    with A the face area and m_gas the mass of one gas molecule.
    """
    area = math.pi * (pendulum.mirror_diameter / 2.0) ** 2
    m_gas = env.gas_molar_mass / constants.N_A
    coeff = math.sqrt(32.0 * m_gas / (math.pi * constants.k * env.temperature))
    return env.pressure * area * coeff / pendulum.probe_mass


def gas_damping_limit(
    env: EnvironmentConfig, pendulum: PendulumConfig, trapped_frequency: float
) -> float:
    """Q ceiling w_m / gamma_gas set by residual gas; ``inf`` in perfect vacuum.

    The rate in Hz is gamma / (2 pi), i.e. the linewidth f_m / Q.
    """
    gamma = gas_damping_rate(env, pendulum)
    if gamma == 0:
        return math.inf
    return TWO_PI * trapped_frequency / gamma


def total_budget(
    components: Mapping[str, Psd], overlays: Optional[Mapping[str, Psd]] = None
) -> NoiseBudget:
    """Sum displacement PSDs pointwise; components are kept by name."""
    if not components:
        raise ValueError("at least one component is required")
    items = list(components.items())
    grid = items[0][1].grid
    total = np.zeros(len(grid))
    for name, psd in items:
        if not psd.grid.same_as(grid):
            raise GridError(f"component {name!r} is on a different grid")
        if psd.kind != "displacement":
            raise ValueError(f"component {name!r} is not a displacement PSD")
        total = total + psd.values
    overlays = dict(overlays or {})
    for name, psd in overlays.items():
        if not psd.grid.same_as(grid):
            raise GridError(f"overlay {name!r} is on a different grid")
    return NoiseBudget(dict(items), Psd(grid, total), overlays)


def calibrate_laser_asd(
    derived: DerivedOscillator,
    env: EnvironmentConfig,
    cavity: CavityConfig,
    intensity_floor: float,
    target_asd: float,
) -> float:
    """Laser frequency ASD (Hz/rtHz, white) giving ``target_asd`` total at f_m."""
    f_m = derived.trapped_frequency
    grid = FrequencyGrid(np.array([f_m]))
    thermal = suspension_thermal_psd(derived, env, grid).values[0]
    remaining = target_asd**2 - thermal - intensity_floor**2
    if remaining < 0:
        raise ValueError(
            f"target ASD {target_asd:.3e} is below thermal + floor "
            f"({math.sqrt(thermal + intensity_floor**2):.3e} m/rtHz)"
        )
    per_unit = spring_gain(derived, grid.frequencies)[0] * cavity.round_trip_length**2
    return math.sqrt(remaining / per_unit) * cavity.optical_frequency


def default_grid(derived: DerivedOscillator, fmin=10.0, fmax=1e5, n=2001) -> FrequencyGrid:
    """Log grid over the plotted band with a dense patch around the peak."""
    f_m = derived.trapped_frequency
    width = max(20.0 * f_m / derived.effective_quality, 1.0)
    lo, hi = max(fmin, f_m - width), min(fmax, f_m + width)
    patch = np.linspace(lo, hi, 2001) if lo < hi else np.array([])
    return FrequencyGrid.logspace(fmin, fmax, n, include=np.append(patch, f_m))


def compute_budget(
    config, grid: Optional[FrequencyGrid] = None, extra: Optional[Mapping[str, Psd]] = None
) -> NoiseBudget:
    """Default budget (thermal, frequency, intensity) for a SystemConfig.

    ``extra`` adds user-supplied displacement PSDs on the same grid.
    """
    derived = config.derive()
    if grid is None:
        grid = default_grid(derived)
    laser = laser_frequency_psd(config.noise.laser_frequency_asd, config.cavity, grid)
    components = {
        "thermal": suspension_thermal_psd(derived, config.environment, grid),
        "frequency": frequency_noise_psd(laser, config.cavity, derived, grid),
        "intensity": intensity_noise_floor(config.noise.intensity_floor, grid),
    }
    components.update(extra or {})
    return total_budget(components)


def with_quality(derived: DerivedOscillator, effective_quality: float) -> DerivedOscillator:
    return replace(derived, effective_quality=effective_quality)
