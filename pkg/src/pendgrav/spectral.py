"""Recovering physics from records: PSD estimation, peak fits, lock-in, ringdown."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import signal as sps
from scipy.optimize import least_squares

from .budget import FrequencyGrid, Psd
from .errors import FitError, NoPeakError, NonDecayingError, RecordError
from .timeseries import TimeSeries

WINDOWS = {"hann": "hann", "rectangular": "boxcar"}
FIT_MODELS = ("viscous", "structural")


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int = 2**16
    overlap_fraction: float = 0.5
    window: str = "hann"
    detrend: bool = True

    def __post_init__(self):
        if self.segment_length < 8:
            raise ValueError("segment_length must be >= 8")
        if not 0 <= self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must be in [0, 1)")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {tuple(WINDOWS)}")

    @classmethod
    def for_bandwidth(cls, sample_rate: float, bandwidth: float = 1.0, **kw) -> "WelchConfig":
        """Segments of sample_rate / bandwidth samples (1 Hz by default)."""
        return cls(segment_length=int(round(sample_rate / bandwidth)), **kw)


@dataclass(frozen=True)
class PeakFit:
    center_frequency: float
    quality: float
    peak_asd: float
    residual_norm: float
    floor_asd: float = 0.0
    model: str = "viscous"


@dataclass(frozen=True)
class LockinResult:
    in_phase: float
    quadrature: float
    amplitude: float
    phase: float
    statistical_sigma: float
    integration_time: float = 0.0
    segments: int = 1

    @property
    def snr(self) -> float:
        if self.statistical_sigma == 0:
            return math.inf
        return self.amplitude / self.statistical_sigma


def welch_psd(series: TimeSeries, cfg: WelchConfig) -> Psd:
    """One-sided Welch PSD (DC bin dropped).

    Normalised by window power, so white noise reads its density and a
    tone of amplitude A integrates to A^2/2. ``Psd.bandwidth`` is the bin
    spacing sample_rate / segment_length.
    """
    if len(series) < cfg.segment_length:
        raise RecordError(
            f"record has {len(series)} samples, fewer than one segment ({cfg.segment_length})"
        )
    f, p = sps.welch(
        series.values,
        fs=series.sample_rate,
        window=WINDOWS[cfg.window],
        nperseg=cfg.segment_length,
        noverlap=int(cfg.overlap_fraction * cfg.segment_length),
        detrend="constant" if cfg.detrend else False,
        return_onesided=True,
        scaling="density",
    )
    kind = "displacement" if series.unit == "meters" else "voltage"
    return Psd(FrequencyGrid(f[1:]), p[1:], kind, series.sample_rate / cfg.segment_length)


def calibrate(series: TimeSeries) -> TimeSeries:
    """Detector volts back to meters using the record's calibration."""
    if series.unit == "meters":
        return series
    if series.calibration is None:
        raise RecordError("record carries no calibration factor")
    return series.with_values(series.values * series.calibration, unit="meters")


def peak_shape(f, center, quality, model="viscous"):
    """|chi(f)|^2 normalised to 1 at ``center``."""
    f = np.asarray(f, dtype=float)
    f0sq = center**2
    if model == "viscous":
        damping = (center * f / quality) ** 2
    elif model == "structural":
        damping = np.full_like(f, (f0sq / quality) ** 2)
    else:
        raise ValueError(f"unknown peak model {model!r}")
    return (f0sq / quality) ** 2 / ((f0sq - f**2) ** 2 + damping)


def fit_resonance(
    psd: Psd, band: Tuple[float, float], model: str = "viscous", exclude=()
) -> PeakFit:
    """Least-squares fit of a resonance peak on a flat floor.

    Model: S(f) = P h(f; f0, Q) + B with h the normalised |chi|^2 line
    shape. Residuals are taken in log PSD, which weights every bin by its
    relative error and makes the fit invariant to overall scaling.

    ``exclude`` lists frequencies of coherent tones (e.g. the drive) whose
    bins are left out, within two resolution bandwidths (or two grid steps).
    """
    lo, hi = band
    f_all = psd.frequencies
    sel = (f_all >= lo) & (f_all <= hi) & (psd.values > 0)
    if len(exclude):
        step = psd.bandwidth
        if step is None:
            step = float(np.median(np.diff(f_all))) if f_all.size > 1 else 0.0
        for f_x in exclude:
            sel &= np.abs(f_all - f_x) > 2.0 * step
    f, y = f_all[sel], psd.values[sel]
    if f.size < 8:
        raise NoPeakError(f"only {f.size} usable bins in band [{lo}, {hi}] Hz")
    i = int(np.argmax(y))
    floor0 = float(np.percentile(y, 10))
    if i in (0, f.size - 1) or y[i] < 2.0 * np.median(y):
        raise NoPeakError(f"no resonance peak in band [{lo}, {hi}] Hz")

    height0 = y[i] - floor0
    above = y > floor0 + height0 / 2
    left = i
    while left > 0 and above[left - 1]:
        left -= 1
    right = i
    while right < f.size - 1 and above[right + 1]:
        right += 1
    fwhm = max(f[right] - f[left], np.min(np.diff(f)))
    q0 = f[i] / fwhm

    log_y = np.log(y)

    def residual(theta):
        f0, log_q, log_p, log_b = theta
        model_psd = np.exp(log_p) * peak_shape(f, f0, np.exp(log_q), model) + np.exp(log_b)
        return np.log(model_psd) - log_y

    x0 = np.array([f[i], math.log(q0), math.log(height0), math.log(max(floor0, np.min(y) * 1e-3))])
    # a floor far below every bin is unidentifiable; bounding it keeps the
    # solver from drifting towards B = 0
    lower = [f[0], math.log(0.5), -np.inf, math.log(np.min(y)) - 6.0 * math.log(10.0)]
    upper = [f[-1], math.log(1e12), np.inf, np.inf]
    try:
        sol = least_squares(
            residual, x0, bounds=(lower, upper), method="trf",
            x_scale=[fwhm, 1.0, 1.0, 1.0], xtol=1e-15, ftol=1e-15, gtol=1e-15,
            max_nfev=2000,
        )
    except ValueError as exc:
        raise FitError(f"resonance fit failed: {exc}", {"x0": x0.tolist()}) from exc
    diag = {"status": sol.status, "message": sol.message, "nfev": sol.nfev, "x": sol.x.tolist()}
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitError(f"resonance fit did not converge: {sol.message}", diag)
    f0, log_q, log_p, log_b = sol.x
    if not lo < f0 < hi:
        raise NoPeakError(f"fitted centre {f0:.6g} Hz left the band", diag)
    return PeakFit(
        center_frequency=float(f0),
        quality=float(math.exp(log_q)),
        peak_asd=float(math.sqrt(math.exp(log_p) + math.exp(log_b))),
        residual_norm=float(math.sqrt(np.mean(sol.fun**2))),
        floor_asd=float(math.sqrt(math.exp(log_b))),
        model=model,
    )


def _demodulate(values, start, sample_rate, frequency, phase):
    t = (start + np.arange(values.size)) / sample_rate
    ref = np.exp(-1j * (2.0 * math.pi * frequency * t + phase))
    return 2.0 / values.size * np.dot(values, ref)


def lockin(
    series: TimeSeries,
    reference_frequency: float,
    integration_time: float,
    reference_phase: float = 0.0,
) -> LockinResult:
    """Coherent I/Q demodulation over the first ``integration_time`` seconds.

    The span is truncated to an integer number of reference cycles.
    I = (2/N) sum x cos(theta), Q = (2/N) sum x sin(theta) with
    theta = 2 pi f t + reference_phase, so a tone A cos(2 pi f t + phi)
    reads amplitude A and phase phi - reference_phase.

    ``statistical_sigma`` is the per-quadrature noise sqrt(S_x(f)/T): the
    record is cut into consecutive spans of the same length, each is
    demodulated against the common time base, and sigma comes from their
    scatter about the mean (the tone is common to all spans and drops
    out). With a single span the noise is read from demodulations at
    f + j/T, j = +-1..5, which are orthogonal to the tone.
    """
    fs = series.sample_rate
    f = reference_frequency
    if not 0 < f < fs / 2:
        raise RecordError(f"reference {f} Hz is outside (0, {fs / 2}) Hz")
    if integration_time > series.duration * (1 + 1e-12):
        raise RecordError(
            f"integration time {integration_time} s exceeds the record ({series.duration} s)"
        )
    cycles = math.floor(integration_time * f + 1e-9)
    if cycles < 10:
        raise RecordError(f"only {cycles} reference cycles in {integration_time} s; need >= 10")
    n = int(round(cycles * fs / f))
    n = min(n, len(series))
    x = series.values
    spans = len(series) // n
    z = np.array(
        [_demodulate(x[k * n:(k + 1) * n], k * n, fs, f, reference_phase) for k in range(spans)]
    )
    if spans >= 2:
        var = np.sum(np.abs(z - z.mean()) ** 2) / (2.0 * (spans - 1))
    else:
        t_eff = n / fs
        side = [f + j / t_eff for j in (-5, -4, -3, -2, -1, 1, 2, 3, 4, 5) if 0 < f + j / t_eff < fs / 2]
        zs = np.array([_demodulate(x[:n], 0, fs, fj, reference_phase) for fj in side])
        var = np.mean(np.abs(zs) ** 2) / 2.0
    z0 = z[0]
    i_val, q_val = float(z0.real), float(-z0.imag)
    return LockinResult(
        in_phase=i_val,
        quadrature=q_val,
        amplitude=float(math.hypot(i_val, q_val)),
        phase=float(math.atan2(-q_val, i_val)),
        statistical_sigma=float(math.sqrt(var)),
        integration_time=n / fs,
        segments=spans,
    )


def ringdown_quality(series: TimeSeries, f_m: float, blocks: int = 50) -> float:
    """Q = pi f_m tau from the exponential decay of the demodulated envelope.

    The record is split into ``blocks`` spans of whole cycles; each span is
    demodulated at ``f_m`` and log-amplitude is fitted linearly in time.
    """
    fs = series.sample_rate
    cycles = max(1, math.floor(series.duration * f_m / blocks))
    m = int(round(cycles * fs / f_m))
    count = len(series) // m
    if count < 5:
        raise RecordError("record too short for a ringdown fit")
    x = series.values
    env = np.array([abs(_demodulate(x[k * m:(k + 1) * m], k * m, fs, f_m, 0.0)) for k in range(count)])
    t = (np.arange(count) + 0.5) * m / fs
    keep = env > 1e-3 * env[0]
    if keep.sum() < 5:
        raise NonDecayingError("envelope vanishes before a decay can be fitted")
    slope, _ = np.polyfit(t[keep], np.log(env[keep]), 1)
    if slope >= 0 or -slope * series.duration < 1e-3:
        raise NonDecayingError(f"envelope does not decay (log slope {slope:.3g} 1/s)")
    tau = -1.0 / slope
    return math.pi * f_m * tau
