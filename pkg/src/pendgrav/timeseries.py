"""Synthetic detector records: coloured noise, tone injection, calibration.

Record file layout (little-endian)::

    b"GSIM1"                    magic, 5 bytes
    sample_rate   float64
    length        uint64
    unit          uint8        0 = meters, 1 = volts
    calibration   float64      m/V, 0.0 when absent
    seed          uint64
    values        length x float64
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .budget import FrequencyGrid, Psd, compute_budget
from .errors import GridError, RecordError
from .gravity import driven_phase, driven_response, exact_force_harmonics, rms_displacement_closed_form

UNITS = ("meters", "volts")
MAGIC = b"GSIM1"
_HEADER = struct.Struct("<dQBdQ")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled record starting at t = 0."""

    sample_rate: float
    values: np.ndarray
    unit: str = "meters"
    calibration: Optional[float] = None  # m/V
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise RecordError("a record needs at least one sample")
        if not self.sample_rate > 0:
            raise RecordError("sample_rate must be > 0")
        if self.unit not in UNITS:
            raise RecordError(f"unit must be one of {UNITS}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def duration(self) -> float:
        return self.values.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) / self.sample_rate

    def with_values(self, values, **changes) -> "TimeSeries":
        return replace(self, values=values, **changes)


def _n_samples(duration, sample_rate):
    n = int(round(duration * sample_rate))
    if n < 2:
        raise RecordError("duration * sample_rate must be >= 2")
    return n


def synthesize_colored_noise(
    psd: Psd, duration: float, sample_rate: float, seed: int = 0
) -> TimeSeries:
    """Stationary Gaussian noise with one-sided PSD ``psd``.

    Each positive FFT bin gets an independent complex Gaussian amplitude
    with E|X_k|^2 = S(f_k) df / 2 (two-sided convention, df = 1/duration);
    the series is the Hermitian inverse transform. The PSD is linearly
    interpolated onto the bins and must cover 1/duration .. sample_rate/2.
    The DC bin is zero.
    """
    n = _n_samples(duration, sample_rate)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    bins = freqs[1:]
    f = psd.frequencies
    tol = 1e-9 * bins[-1]
    if f[0] > bins[0] + tol or f[-1] < bins[-1] - tol:
        raise GridError(
            f"PSD covers [{f[0]:.6g}, {f[-1]:.6g}] Hz but the record needs "
            f"[{bins[0]:.6g}, {bins[-1]:.6g}] Hz"
        )
    density = np.interp(bins, f, psd.values)
    df = sample_rate / n
    rng = np.random.default_rng(seed)
    re = rng.standard_normal(bins.size)
    im = rng.standard_normal(bins.size)
    sigma = np.sqrt(density * df / 4.0)
    spectrum = np.zeros(freqs.size, dtype=complex)
    spectrum[1:] = sigma * (re + 1j * im)
    if n % 2 == 0:
        # Nyquist bin is real and appears once
        spectrum[-1] = math.sqrt(density[-1] * df) * re[-1]
    values = np.fft.irfft(spectrum, n=n, norm="forward")
    return TimeSeries(sample_rate, values, "meters", None, seed)


def inject_tone(
    series: TimeSeries, amplitude: float, frequency: float, phase: float = 0.0
) -> TimeSeries:
    """Add amplitude * cos(2 pi f t + phase) to every sample."""
    if not 0 < frequency < series.sample_rate / 2:
        raise RecordError(
            f"tone at {frequency} Hz aliases at sample rate {series.sample_rate} Hz"
        )
    tone = amplitude * np.cos(2.0 * math.pi * frequency * series.times + phase)
    return series.with_values(series.values + tone)


def to_volts(series: TimeSeries, calibration: float) -> TimeSeries:
    """Convert a displacement record to detector volts (x / calibration)."""
    if series.unit != "meters":
        raise RecordError("to_volts expects a record in meters")
    if not calibration > 0:
        raise RecordError("calibration must be > 0 m/V")
    return series.with_values(series.values / calibration, unit="volts", calibration=calibration)


def simulate_experiment(
    config,
    duration: float = 10.0,
    sample_rate: float = 1e6,
    seed: int = 0,
    noise: bool = True,
    signal: bool = True,
) -> TimeSeries:
    """Budget noise plus the gravity tone, rendered as detector volts.

    Feedback cooling enters only through the effective-Q line shape of the
    budget. The tone uses the exact force fundamental through the
    susceptibility at the drive frequency. ``metadata`` records every
    derived quantity used.
    """
    derived = config.derive()
    f_drive = config.drive_frequency()
    n = _n_samples(duration, sample_rate)
    grid = FrequencyGrid.for_record(n, sample_rate)
    budget = compute_budget(config, grid)
    if noise:
        series = synthesize_colored_noise(budget.total, duration, sample_rate, seed)
    else:
        series = TimeSeries(sample_rate, np.zeros(n), "meters", None, seed)

    drive = exact_force_harmonics(config.source, config.pendulum.probe_mass)
    amplitude = driven_response(drive, derived, derived.effective_quality, f_drive)
    phase = driven_phase(drive, derived, derived.effective_quality, f_drive)
    if signal:
        series = inject_tone(series, amplitude, f_drive, phase)

    meta = {
        "trapped_frequency_hz": derived.trapped_frequency,
        "optical_stiffness_n_m": derived.optical_stiffness,
        "total_stiffness_n_m": derived.total_stiffness,
        "natural_quality_at_trap": derived.natural_quality_at_trap,
        "effective_quality": derived.effective_quality,
        "effective_temperature_k": derived.effective_temperature,
        "drive_frequency_hz": f_drive,
        "force_fundamental_n": drive.force_fundamental,
        "tone_amplitude_m": amplitude if signal else 0.0,
        "tone_phase_rad": phase,
        "closed_form_rms_m": rms_displacement_closed_form(config.source, derived.effective_quality,
                                          derived.trapped_frequency),
        "noise": bool(noise),
    }
    volts = to_volts(series, config.cavity.calibration)
    return replace(volts, metadata=meta)


def record_bytes(series: TimeSeries) -> bytes:
    unit = UNITS.index(series.unit)
    cal = series.calibration if series.calibration is not None else 0.0
    header = MAGIC + _HEADER.pack(
        float(series.sample_rate), len(series), unit, float(cal), int(series.seed)
    )
    return header + series.values.astype("<f8").tobytes()


def parse_record(data: bytes) -> TimeSeries:
    if data[: len(MAGIC)] != MAGIC:
        raise RecordError("not a GSIM1 record (bad magic)")
    offset = len(MAGIC) + _HEADER.size
    if len(data) < offset:
        raise RecordError("truncated record header")
    rate, length, unit, cal, seed = _HEADER.unpack_from(data, len(MAGIC))
    if unit >= len(UNITS):
        raise RecordError(f"unknown unit code {unit}")
    if len(data) != offset + 8 * length:
        raise RecordError(f"record declares {length} samples but holds {(len(data) - offset) / 8:g}")
    values = np.frombuffer(data, dtype="<f8", count=length, offset=offset)
    return TimeSeries(rate, values, UNITS[unit], cal if cal > 0 else None, seed)


def write_record(series: TimeSeries, path) -> None:
    with open(path, "wb") as fh:
        fh.write(record_bytes(series))


def read_record(path) -> TimeSeries:
    with open(path, "rb") as fh:
        return parse_record(fh.read())


def record_csv(series: TimeSeries) -> str:
    buf = io.StringIO()
    buf.write("time_s,value\n")
    for t, v in zip(series.times, series.values):
        buf.write(f"{t:.9e},{v:.9e}\n")
    return buf.getvalue()
