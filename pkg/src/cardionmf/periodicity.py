"""Periodicity and spectral analysis: autocorrelation period estimation,
periodogram PSD, fundamental frequency, waveform features, and STFT
magnitude spectrograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate
from scipy.signal.windows import hann

__all__ = [
    "AudioSegment",
    "PeriodEstimate",
    "Spectrogram",
    "FeatureVector",
    "NoPeaksError",
    "autocorrelation",
    "estimate_period",
    "power_spectral_density",
    "fundamental_frequency",
    "extract_features",
    "stft_spectrogram",
]


class NoPeaksError(ValueError):
    """Autocorrelation shows fewer than two usable peaks (aperiodic input)."""


@dataclass(frozen=True)
class AudioSegment:
    """A sampled waveform; amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.isfinite(samples).all():
            raise ValueError("samples contain non-finite values")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class PeriodEstimate:
    period_samples: float
    peak_lags: list[int]
    confidence: float


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude time-frequency matrix (freq bins x frames)."""

    magnitudes: np.ndarray
    sample_rate: float
    window_len: int
    hop: int


@dataclass(frozen=True)
class FeatureVector:
    spectral_centroid: float
    rms_energy: float
    zero_crossing_rate: float
    variance: float
    mean_frequency: float
    max_amplitude: float

    def to_dict(self) -> dict:
        return {
            "spectral_centroid": self.spectral_centroid,
            "rms_energy": self.rms_energy,
            "zero_crossing_rate": self.zero_crossing_rate,
            "variance": self.variance,
            "mean_frequency": self.mean_frequency,
            "max_amplitude": self.max_amplitude,
        }


def autocorrelation(x: AudioSegment) -> np.ndarray:
    """Biased autocorrelation (1/T) * sum_t x[t] x[t+P] for lags P = 1..T.

    Returns an array of length T whose element i holds the value at lag
    i + 1; the final lag has an empty sum and is 0.
    """
    s = x.samples
    T = len(s)
    if T < 2:
        raise ValueError("signal must have at least 2 samples")
    full = correlate(s, s, mode="full", method="auto")
    out = np.zeros(T)
    out[: T - 1] = full[T : 2 * T - 1] / T
    return out


def estimate_period(
    acf,
    min_lag: int = 2,
    peak_threshold_ratio: float = 0.3,
    power: float | None = None,
) -> PeriodEstimate:
    """Mean gap between consecutive autocorrelation peaks.

    Peaks are strict local maxima at lags >= min_lag whose value reaches
    peak_threshold_ratio times a reference level: the lag-0
    autocorrelation (signal power) when ``power`` is given, else the
    maximum over the searched lag range. Passing the power makes noise
    inputs correctly report no peaks instead of latching onto
    autocorrelation wiggles. Confidence is the fraction of peak gaps
    within 20% of their mean. Raises NoPeaksError when fewer than two
    peaks qualify.
    """
    acf = np.asarray(acf, dtype=float)
    if acf.ndim != 1 or acf.size < 3:
        raise ValueError("acf must be a 1-D array with at least 3 lags")
    if not (0.0 < peak_threshold_ratio < 1.0):
        raise ValueError(
            f"peak_threshold_ratio must be in (0, 1), got {peak_threshold_ratio}"
        )
    min_lag = max(int(min_lag), 1)
    # index i of acf corresponds to lag i + 1
    start = min_lag - 1
    searched = acf[start:]
    if searched.size == 0 or searched.max() <= 0:
        raise NoPeaksError("autocorrelation has no positive mass beyond min_lag")
    reference = float(power) if power is not None else float(searched.max())
    if reference <= 0:
        raise NoPeaksError("reference power is not positive")
    threshold = peak_threshold_ratio * reference

    lags = []
    for i in range(max(start, 1), len(acf) - 1):
        if acf[i] >= threshold and acf[i] > acf[i - 1] and acf[i] >= acf[i + 1]:
            lags.append(i + 1)
    if len(lags) < 2:
        raise NoPeaksError(f"found {len(lags)} peak(s); need at least 2")

    gaps = np.diff(lags).astype(float)
    period = float(gaps.mean())
    confidence = float(np.mean(np.abs(gaps - period) <= 0.2 * period))
    return PeriodEstimate(period_samples=period, peak_lags=lags, confidence=confidence)


def power_spectral_density(x: AudioSegment):
    """Single Hann-window periodogram.

    Returns (freqs, psd) with freqs = k * fs / N for k = 0..N//2 and the
    one-sided density normalized so sum(psd) * (fs / N) approximates the
    signal's mean power.
    """
    s = x.samples
    N = len(s)
    if N < 8:
        raise ValueError("signal too short for a periodogram (need >= 8 samples)")
    w = hann(N, sym=False)
    spec = np.fft.rfft(s * w)
    scale = 1.0 / (x.sample_rate * np.sum(w * w))
    psd = (np.abs(spec) ** 2) * scale
    psd[1:] *= 2.0
    if N % 2 == 0:
        psd[-1] /= 2.0
    freqs = np.fft.rfftfreq(N, d=1.0 / x.sample_rate)
    return freqs, psd


def fundamental_frequency(freqs, psd) -> float:
    """Frequency of the PSD argmax, excluding the DC bin; ties resolve to
    the lower frequency."""
    freqs = np.asarray(freqs, dtype=float)
    psd = np.asarray(psd, dtype=float)
    if freqs.size == 0 or freqs.size != psd.size:
        raise ValueError("freqs and psd must be non-empty and equal-length")
    body = psd[1:]
    if body.size == 0 or body.max() <= 0:
        raise ValueError("PSD has no positive mass beyond DC")
    return float(freqs[1 + int(np.argmax(body))])


def extract_features(x: AudioSegment) -> FeatureVector:
    """Waveform feature summary used to describe separated sources.

    The spectral centroid (and its alias mean_frequency) is the
    PSD-weighted mean frequency over a Hann periodogram; an all-zero
    signal yields all-zero features by convention.
    """
    s = x.samples
    N = len(s)
    rms = float(np.sqrt(np.mean(s * s)))
    if N > 1:
        zcr = float(np.count_nonzero(s[:-1] * s[1:] < 0) / (N - 1))
    else:
        zcr = 0.0
    variance = float(np.var(s))
    max_amp = float(np.max(np.abs(s)))
    centroid = 0.0
    if N >= 8 and rms > 0:
        freqs, psd = power_spectral_density(x)
        total = psd.sum()
        if total > 0:
            centroid = float((freqs * psd).sum() / total)
    return FeatureVector(
        spectral_centroid=centroid,
        rms_energy=rms,
        zero_crossing_rate=zcr,
        variance=variance,
        mean_frequency=centroid,
        max_amplitude=max_amp,
    )


def stft_spectrogram(x: AudioSegment, window_len: int, hop: int) -> Spectrogram:
    """Hann-windowed magnitude STFT with frame count
    1 + (N - window_len) // hop."""
    s = x.samples
    N = len(s)
    if window_len < 2 or window_len > N:
        raise ValueError(
            f"window_len must be in [2, {N}], got {window_len}"
        )
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    frames = 1 + (N - window_len) // hop
    w = hann(window_len, sym=False)
    mags = np.empty((window_len // 2 + 1, frames))
    for f in range(frames):
        seg = s[f * hop : f * hop + window_len]
        mags[:, f] = np.abs(np.fft.rfft(seg * w))
    return Spectrogram(
        magnitudes=mags, sample_rate=x.sample_rate, window_len=window_len, hop=hop
    )
