"""Advisor protocol: pluggable sources of suggested fundamental
frequencies and textual observations for the feedback separation loop.

An advisor is anything with advise(request) -> AdvisorResponse. The
separation pipeline validates every response and falls back to the
previous target frequencies on failure, so a broken advisor can never
abort a separation run.

External advisors speak line-delimited JSON over stdin/stdout:
request  {"features": {"row_0": {...}, "row_1": {...}},
          "psd_peaks": [[hz, power], ...], "prior_f": [heart_hz, lung_hz]}
response {"f_heart": ..., "f_lung": ..., "observations": "...",
          "diagnosis": "..."}
"""

from __future__ import annotations

import json
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Protocol

import math

from .periodicity import FeatureVector

__all__ = [
    "AdvisorRequest",
    "AdvisorResponse",
    "Advisor",
    "AdvisorError",
    "heuristic_advisor",
    "HeuristicAdvisor",
    "ConstantAdvisor",
    "EchoAdvisor",
    "ExternalAdvisor",
    "HEART_BAND_HZ",
    "LUNG_BAND_HZ",
    "DEFAULT_F_HEART_HZ",
    "DEFAULT_F_LUNG_HZ",
]

# Physiological search bands for the heuristic advisor. Implementation
# defaults, not literature values; see README.
HEART_BAND_HZ = (20.0, 200.0)
LUNG_BAND_HZ = (100.0, 1000.0)
DEFAULT_F_HEART_HZ = 100.0
DEFAULT_F_LUNG_HZ = 300.0


class AdvisorError(RuntimeError):
    """Advisor failed to produce a usable response (timeout, garbled
    output, non-finite or non-positive frequencies)."""


@dataclass(frozen=True)
class AdvisorRequest:
    features: tuple[FeatureVector, FeatureVector]
    psd_peaks: list[tuple[float, float]]
    prior_f: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "features": {
                "row_0": self.features[0].to_dict(),
                "row_1": self.features[1].to_dict(),
            },
            "psd_peaks": [[hz, power] for hz, power in self.psd_peaks],
            "prior_f": list(self.prior_f),
        }


@dataclass(frozen=True)
class AdvisorResponse:
    f_heart: float
    f_lung: float
    observations: str = ""
    diagnosis: str = ""

    def to_dict(self) -> dict:
        return {
            "f_heart": self.f_heart,
            "f_lung": self.f_lung,
            "observations": self.observations,
            "diagnosis": self.diagnosis,
        }


class Advisor(Protocol):
    def advise(self, request: AdvisorRequest) -> AdvisorResponse: ...


def validate_response(response) -> AdvisorResponse:
    """Check that a response carries positive finite frequencies."""
    try:
        f_heart = float(response.f_heart)
        f_lung = float(response.f_lung)
    except (AttributeError, TypeError, ValueError) as exc:
        raise AdvisorError(f"malformed advisor response: {exc}") from exc
    if not (math.isfinite(f_heart) and f_heart > 0):
        raise AdvisorError(f"advisor returned invalid f_heart = {f_heart}")
    if not (math.isfinite(f_lung) and f_lung > 0):
        raise AdvisorError(f"advisor returned invalid f_lung = {f_lung}")
    return AdvisorResponse(
        f_heart=f_heart,
        f_lung=f_lung,
        observations=str(getattr(response, "observations", "")),
        diagnosis=str(getattr(response, "diagnosis", "")),
    )


def _dominant_feature_name(fv: FeatureVector) -> str:
    if fv.zero_crossing_rate > 0.3:
        return "high zero-crossing activity"
    if fv.spectral_centroid > 400.0:
        return "high spectral centroid"
    if fv.rms_energy > 0.5:
        return "strong RMS energy"
    return "low-frequency energy concentration"


def heuristic_advisor(
    features: tuple[FeatureVector, FeatureVector],
    psd_peaks: list[tuple[float, float]],
) -> AdvisorResponse:
    """Deterministic rule-based advisor.

    The heart suggestion is the strongest PSD peak clamped into the
    heart band; the lung suggestion is the strongest peak inside the
    lung band, defaulting to the band defaults when no peak qualifies.
    """
    peaks = [(float(hz), float(p)) for hz, p in psd_peaks if p > 0]
    if peaks:
        strongest_hz = max(peaks, key=lambda t: t[1])[0]
        f_heart = min(max(strongest_hz, HEART_BAND_HZ[0]), HEART_BAND_HZ[1])
        in_lung = [t for t in peaks if LUNG_BAND_HZ[0] <= t[0] <= LUNG_BAND_HZ[1]]
        f_lung = max(in_lung, key=lambda t: t[1])[0] if in_lung else DEFAULT_F_LUNG_HZ
    else:
        f_heart, f_lung = DEFAULT_F_HEART_HZ, DEFAULT_F_LUNG_HZ
    obs = (
        f"row 0 shows {_dominant_feature_name(features[0])}; "
        f"row 1 shows {_dominant_feature_name(features[1])}"
    )
    diag = (
        f"suggested fundamentals {f_heart:.1f} Hz (heart) and "
        f"{f_lung:.1f} Hz (lung) from dominant spectral peaks"
    )
    return AdvisorResponse(
        f_heart=f_heart, f_lung=f_lung, observations=obs, diagnosis=diag
    )


class HeuristicAdvisor:
    """Advisor wrapper around heuristic_advisor."""

    def advise(self, request: AdvisorRequest) -> AdvisorResponse:
        return heuristic_advisor(request.features, request.psd_peaks)


@dataclass(frozen=True)
class ConstantAdvisor:
    """Always suggests the same fundamentals (oracle in tests)."""

    f_heart: float
    f_lung: float

    def advise(self, request: AdvisorRequest) -> AdvisorResponse:
        return AdvisorResponse(
            f_heart=self.f_heart,
            f_lung=self.f_lung,
            observations="constant advisor",
            diagnosis="",
        )


class EchoAdvisor:
    """Returns the request's prior frequencies unchanged (inert)."""

    def advise(self, request: AdvisorRequest) -> AdvisorResponse:
        return AdvisorResponse(
            f_heart=request.prior_f[0],
            f_lung=request.prior_f[1],
            observations="echo advisor",
            diagnosis="",
        )


@dataclass
class ExternalAdvisor:
    """Bridges to an external advisor process over line-delimited JSON.

    One request line per call; a response line is expected within
    timeout_s. Any failure raises AdvisorError (the pipeline treats that
    as a fallback event). Safe for concurrent separations: calls are
    serialized on an internal lock.
    """

    command: list[str]
    timeout_s: float = 10.0
    _proc: subprocess.Popen | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def advise(self, request: AdvisorRequest) -> AdvisorResponse:
        with self._lock:
            try:
                proc = self._ensure_proc()
                proc.stdin.write(json.dumps(request.to_dict()) + "\n")
                proc.stdin.flush()
                line = _read_line_with_timeout(proc.stdout, self.timeout_s)
                payload = json.loads(line)
                resp = AdvisorResponse(
                    f_heart=payload["f_heart"],
                    f_lung=payload["f_lung"],
                    observations=str(payload.get("observations", "")),
                    diagnosis=str(payload.get("diagnosis", "")),
                )
            except AdvisorError:
                raise
            except Exception as exc:
                raise AdvisorError(f"external advisor failed: {exc}") from exc
        return validate_response(resp)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            self._proc.wait(timeout=5)
        self._proc = None


def _read_line_with_timeout(stream, timeout_s: float) -> str:
    result: list[str] = []

    def reader():
        result.append(stream.readline())

    t = threading.Thread(target=reader, daemon=True)
    t.start()
    t.join(timeout_s)
    if t.is_alive() or not result or not result[0]:
        raise AdvisorError(f"no advisor response within {timeout_s} s")
    return result[0]
