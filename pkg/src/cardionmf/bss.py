"""BSS-Eval style decomposition of a separated signal into target,
interference, and artifact components, and the dB energy ratios
(SDR, SIR, SAR) over them.

Signals are mean-removed before projection so the affine offset used
upstream cannot leak into the scores. Projections are plain orthogonal
projections onto the references (no allowed distortion filter). The
noise component exists in the data model but is always zero here: the
recording protocol provides no noise references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BssComponents", "BssScores", "decompose", "bss_eval"]


@dataclass
class BssComponents:
    s_target: np.ndarray
    e_interference: np.ndarray
    e_noise: np.ndarray
    e_artifact: np.ndarray


@dataclass(frozen=True)
class BssScores:
    """Energy ratios in dB; math.inf marks a zero error denominator and
    -math.inf a zero target."""

    sdr_db: float
    sir_db: float
    sar_db: float

    def to_dict(self) -> dict:
        return {"sdr_db": self.sdr_db, "sir_db": self.sir_db, "sar_db": self.sar_db}


def _center(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def decompose(estimate, references, target_index: int) -> BssComponents:
    """Split the (mean-removed) estimate into components.

    s_target is the projection onto the matching reference;
    e_interference is the rest of the projection onto the span of all
    references; e_artifact is the residual outside that span. The four
    components sum to the mean-removed estimate.
    """
    est = _center(np.asarray(estimate, dtype=float))
    refs = [_center(np.asarray(r, dtype=float)) for r in references]
    n = est.shape[0]
    if est.ndim != 1 or n < 2:
        raise ValueError("estimate must be a 1-D vector of length >= 2")
    if any(r.shape != est.shape for r in refs):
        raise ValueError("all references must match the estimate's length")
    if not (0 <= target_index < len(refs)):
        raise ValueError(f"target_index {target_index} out of range")
    target = refs[target_index]
    t_energy = float(np.dot(target, target))
    if t_energy == 0.0:
        raise ValueError("target reference is zero after mean removal")

    R = np.stack(refs)
    if np.linalg.matrix_rank(R, tol=1e-10 * max(1.0, float(np.abs(R).max()))) < len(refs):
        raise ValueError("references are linearly dependent")

    s_target = (np.dot(est, target) / t_energy) * target
    coeffs, *_ = np.linalg.lstsq(R.T, est, rcond=None)
    proj_span = R.T @ coeffs
    e_interference = proj_span - s_target
    e_noise = np.zeros(n)
    e_artifact = est - proj_span
    return BssComponents(
        s_target=s_target,
        e_interference=e_interference,
        e_noise=e_noise,
        e_artifact=e_artifact,
    )


def _ratio_db(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf
    if num == 0.0:
        return -math.inf
    return float(10.0 * np.log10(num / den))


def bss_eval(estimate, references, target_index: int) -> BssScores:
    """SDR, SIR, SAR of an estimate against the reference sources."""
    c = decompose(estimate, references, target_index)
    t = float(np.dot(c.s_target, c.s_target))
    total_err = c.e_interference + c.e_noise + c.e_artifact
    sdr = _ratio_db(t, float(np.dot(total_err, total_err)))
    sir = _ratio_db(t, float(np.dot(c.e_interference, c.e_interference)))
    num_sar = c.s_target + c.e_interference + c.e_noise
    sar = _ratio_db(
        float(np.dot(num_sar, num_sar)), float(np.dot(c.e_artifact, c.e_artifact))
    )
    return BssScores(sdr_db=sdr, sir_db=sir, sar_db=sar)
