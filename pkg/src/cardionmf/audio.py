"""WAV ingestion, resampling, segmentation, dataset manifests, and the
synthetic heart/lung mixture generator used as ground truth in tests."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .periodicity import AudioSegment
from .rng import make_rng

__all__ = [
    "ManifestEntry",
    "SynthMixSpec",
    "SynthMixture",
    "read_wav",
    "write_wav",
    "resample",
    "segment_audio",
    "synth_mixture",
    "load_manifest",
]

_PCM_SCALES = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path) -> AudioSegment:
    """Read a PCM16/PCM32/float32 WAV file; stereo is averaged to mono
    and integer samples are normalized to [-1, 1]."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ValueError(f"unsupported or malformed WAV file {path}: {exc}") from exc
    if data.dtype in _PCM_SCALES:
        samples = data.astype(float) / _PCM_SCALES[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(float)
    else:
        raise ValueError(f"unsupported WAV codec {data.dtype} in {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioSegment(samples=samples, sample_rate=float(rate))


def write_wav(path, segment: AudioSegment) -> None:
    """Write 16-bit PCM; amplitudes are clipped to [-1, 1]."""
    clipped = np.clip(segment.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype(np.int16)
    wavfile.write(path, int(round(segment.sample_rate)), pcm)


def resample(x: AudioSegment, target_rate: float) -> AudioSegment:
    """Polyphase windowed-sinc resampling to target_rate; output length
    is round(N * target / source)."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be > 0, got {target_rate}")
    if target_rate == x.sample_rate:
        return x
    ratio = Fraction(target_rate / x.sample_rate).limit_denominator(10000)
    out = resample_poly(x.samples, ratio.numerator, ratio.denominator)
    want = int(round(len(x.samples) * target_rate / x.sample_rate))
    want = max(want, 1)
    if len(out) > want:
        out = out[:want]
    elif len(out) < want:
        out = np.pad(out, (0, want - len(out)))
    return AudioSegment(samples=out, sample_rate=float(target_rate))


def segment_audio(x: AudioSegment, frame_seconds: float = 1.0) -> list[AudioSegment]:
    """Split into fixed-length frames, dropping a trailing partial frame."""
    if frame_seconds <= 0:
        raise ValueError(f"frame_seconds must be > 0, got {frame_seconds}")
    n = int(round(frame_seconds * x.sample_rate))
    if n < 1:
        raise ValueError("frame shorter than one sample")
    count = len(x.samples) // n
    return [
        AudioSegment(samples=x.samples[i * n : (i + 1) * n], sample_rate=x.sample_rate)
        for i in range(count)
    ]


@dataclass(frozen=True)
class SynthMixSpec:
    """Parameters of a synthetic heart/lung mixture.

    snr_db is the heart-to-lung power ratio in the mixture, in dB.
    """

    heart_period_s: float = 0.8
    lung_period_s: float = 3.2
    heart_band: tuple[float, float] = (20.0, 200.0)
    lung_band: tuple[float, float] = (100.0, 1000.0)
    snr_db: float = 0.0
    duration_s: float = 8.0
    sample_rate: float = 4000.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.heart_period_s <= 0 or self.lung_period_s <= 0:
            raise ValueError("periods must be > 0")
        if self.duration_s < 2.0 * max(self.heart_period_s, self.lung_period_s):
            raise ValueError("duration must cover at least two of the longest period")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        nyquist = self.sample_rate / 2.0
        for name, (lo, hi) in (("heart_band", self.heart_band), ("lung_band", self.lung_band)):
            if not (0.0 <= lo < hi <= nyquist):
                raise ValueError(f"{name} {lo}-{hi} Hz must lie within (0, {nyquist}]")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthMixSpec":
        kwargs = dict(d)
        for key in ("heart_band", "lung_band"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class SynthMixture:
    """mixture == heart_ref + lung_gain * lung_ref, exactly."""

    mixture: AudioSegment
    heart_ref: AudioSegment
    lung_ref: AudioSegment
    lung_gain: float
    spec: SynthMixSpec


def _bandlimited_impulse_train(spec: SynthMixSpec, n: int) -> np.ndarray:
    f0 = 1.0 / spec.heart_period_s
    lo, hi = spec.heart_band
    k_lo = max(1, int(np.ceil(lo / f0)))
    k_hi = int(np.floor(hi / f0))
    if k_hi < k_lo:
        raise ValueError(
            f"heart_band {lo}-{hi} Hz contains no harmonic of {f0:.3g} Hz"
        )
    t = np.arange(n) / spec.sample_rate
    sig = np.zeros(n)
    for k in range(k_lo, k_hi + 1):
        sig += np.cos(2.0 * np.pi * k * f0 * t)
    return 0.9 * sig / np.max(np.abs(sig))


def _modulated_band_noise(spec: SynthMixSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(n)
    freqs = np.fft.rfftfreq(n, d=1.0 / spec.sample_rate)
    spectrum = np.fft.rfft(noise)
    lo, hi = spec.lung_band
    spectrum[(freqs < lo) | (freqs > hi)] = 0.0
    band = np.fft.irfft(spectrum, n)
    t = np.arange(n) / spec.sample_rate
    envelope = 0.5 * (1.0 - np.cos(2.0 * np.pi * t / spec.lung_period_s))
    sig = envelope * band
    peak = np.max(np.abs(sig))
    if peak == 0:
        raise ValueError("lung band produced an all-zero signal")
    return 0.9 * sig / peak


def synth_mixture(spec: SynthMixSpec) -> SynthMixture:
    """Deterministic synthetic mixture: a band-limited impulse train at
    the heart period plus gain-scaled amplitude-modulated band noise with
    the lung period as its envelope; the gain realizes spec.snr_db."""
    n = int(round(spec.duration_s * spec.sample_rate))
    rng = make_rng(spec.seed)
    heart = _bandlimited_impulse_train(spec, n)
    lung = _modulated_band_noise(spec, n, rng)
    p_heart = float(np.mean(heart * heart))
    p_lung = float(np.mean(lung * lung))
    gain = float(np.sqrt(p_heart / (p_lung * 10.0 ** (spec.snr_db / 10.0))))
    mixture = heart + gain * lung
    fs = spec.sample_rate
    return SynthMixture(
        mixture=AudioSegment(samples=mixture, sample_rate=fs),
        heart_ref=AudioSegment(samples=heart, sample_rate=fs),
        lung_ref=AudioSegment(samples=lung, sample_rate=fs),
        lung_gain=gain,
        spec=spec,
    )


@dataclass(frozen=True)
class ManifestEntry:
    file_name: str
    gender: str
    sound_type: str
    location: str
    extras: dict = field(default_factory=dict)


_COLUMN_ALIASES = {
    "file_name": {"file name", "file_name", "filename"},
    "gender": {"gender"},
    "sound_type": {"sound type", "sound_type"},
    "location": {"location", "anatomical location", "anatomical_location"},
}


def load_manifest(path, validate_files: bool = False) -> list[ManifestEntry]:
    """Parse a recording manifest CSV with columns for file name,
    gender, sound type, and location (header names matched
    case-insensitively, order-free); extra columns are kept verbatim."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty manifest")
        normalized = {name: name.strip().lower() for name in reader.fieldnames}
        col_of: dict[str, str] = {}
        for field_name, aliases in _COLUMN_ALIASES.items():
            matches = [raw for raw, norm in normalized.items() if norm in aliases]
            if not matches:
                raise ValueError(f"{path}: missing required column '{field_name}'")
            col_of[field_name] = matches[0]
        known = set(col_of.values())

        entries: list[ManifestEntry] = []
        for line_no, row in enumerate(reader, start=2):
            file_name = (row.get(col_of["file_name"]) or "").strip()
            gender = (row.get(col_of["gender"]) or "").strip().lower()
            sound_type = (row.get(col_of["sound_type"]) or "").strip()
            location = (row.get(col_of["location"]) or "").strip()
            if not file_name:
                raise ValueError(f"{path}:{line_no}: empty file name")
            if gender not in ("female", "male"):
                raise ValueError(
                    f"{path}:{line_no}: gender must be female or male, got '{gender}'"
                )
            extras = {
                k: v for k, v in row.items() if k not in known and k is not None
            }
            if validate_files and not (path.parent / file_name).exists():
                raise ValueError(f"{path}:{line_no}: missing file '{file_name}'")
            entries.append(
                ManifestEntry(
                    file_name=file_name,
                    gender=gender,
                    sound_type=sound_type,
                    location=location,
                    extras=extras,
                )
            )
    return entries
