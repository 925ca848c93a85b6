"""Shared synthetic-instance builders for the separation test suites."""

import numpy as np

from cardionmf import (
    AffineParams,
    AlphaNmfConfig,
    BlockConfig,
    PeriodConfig,
    SeparationConfig,
)
from cardionmf.rng import make_rng

FS = 2000.0
T = 4000


def impulse_train(period_samples, band, phase=0.0, fs=FS, n=T):
    """Band-limited impulse train: the sum of all harmonics of the train
    frequency that fall inside the band, peak-normalized to 0.9."""
    f0 = fs / period_samples
    k_lo = max(1, int(np.ceil(band[0] / f0)))
    k_hi = int(np.floor(band[1] / f0))
    if k_hi < k_lo:
        raise ValueError("band contains no harmonics")
    t = np.arange(n) / fs
    sig = sum(np.cos(2 * np.pi * k * f0 * (t - phase)) for k in range(k_lo, k_hi + 1))
    return 0.9 * sig / np.abs(sig).max()


def two_source_mixture(instance_seed, base=31000):
    """Two-row mixture of a short-period and a long-period impulse train
    (period ratio >= 4) with diagonally dominant mixing, plus the exact
    per-source references."""
    g = make_rng(base, instance_seed)
    heart_period = float(g.uniform(36, 44))
    lung_period = heart_period * float(g.uniform(4.0, 10.0))
    heart = impulse_train(heart_period, (50, 950), phase=float(g.uniform(0, 1)))
    lung = impulse_train(lung_period, (100, 400), phase=float(g.uniform(0, 1)))
    gain = np.sqrt(np.mean(heart * heart) / np.mean(lung * lung))
    gain *= 10.0 ** (-float(g.uniform(-2, 2)) / 20.0)
    c1 = float(g.uniform(0.18, 0.38))
    c2 = float(g.uniform(0.18, 0.38))
    mixture = np.vstack([heart + c1 * gain * lung, c2 * heart + gain * lung])
    return {
        "mixture": mixture,
        "heart_ref": heart,
        "lung_ref": gain * lung,
        "heart_period": heart_period,
        "lung_period": lung_period,
    }


def separation_config(mixture, seed, layers=2, restarts=6, max_iter=150):
    offset = 1.05 * abs(float(mixture.min()))
    return SeparationConfig(
        heart=BlockConfig(affine=AffineParams(1.0, offset), alpha=1.0, layers=layers),
        lung=BlockConfig(affine=AffineParams(0.5, 0.55 * offset), alpha=1.0, layers=layers),
        nmf=AlphaNmfConfig(
            alpha=1.0, rank=2, max_iter=max_iter, rel_tol=1e-6, seed=seed
        ),
        period_cfg=PeriodConfig(min_lag=2, peak_threshold_ratio=0.2),
        restarts=restarts,
    )


def multibasin_matrix():
    """Mixture of two planted sparse rank-2 factorizations plus isolated
    spikes; rank-2 restarts split between a near-exact basin and clearly
    worse local minima."""
    g = make_rng(101, 3)
    A = np.where(g.random((8, 2)) < 0.45, g.uniform(0.5, 2.0, (8, 2)), 0.0)
    X = np.where(g.random((2, 24)) < 0.45, g.uniform(0.5, 2.0, (2, 24)), 0.0)
    Y = A @ X
    rows = g.integers(0, 8, 4)
    cols = g.integers(0, 24, 4)
    Y[rows, cols] += g.uniform(2, 5, 4)
    return Y
