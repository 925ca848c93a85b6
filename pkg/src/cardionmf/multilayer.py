"""Multi-layer NMF cascade with catalyst-style bounded initialization,
plus the energy-barrier / escape-probability diagnostics.

Layer 1 factors Y into A1 X1; each later layer re-factors the previous
activation map, so Y ~ A1 A2 ... AL XL. Layers after the first blend
their random basis initialization toward the mean entry of the previous
layer's basis, controlled by a bounding factor in [0, 1] (0 = plain
random restart).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .nmf import (
    AlphaNmfConfig,
    ensure_nonneg_matrix,
    factorize,
)
from .rng import derive_seed, make_rng

__all__ = [
    "ChemInitConfig",
    "LayerStack",
    "EscapeReport",
    "chem_init",
    "multilayer_factorize",
    "energy_barrier",
    "boltzmann_escape_probability",
    "survival_probability",
    "escape_experiment",
]


@dataclass(frozen=True)
class ChemInitConfig:
    """Bounded-initialization parameters.

    bounding_factor blends random inits toward the previous layer's mean
    basis entry; beta and partition_Z parameterize the Boltzmann escape
    probability used in reports.
    """

    bounding_factor: float = 0.5
    beta: float = 1.0
    partition_Z: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.bounding_factor <= 1.0):
            raise ValueError(
                f"bounding_factor must be in [0, 1], got {self.bounding_factor}"
            )
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.partition_Z <= 0:
            raise ValueError(f"partition_Z must be > 0, got {self.partition_Z}")


@dataclass
class LayerStack:
    """Per-layer factors of the cascade.

    layer_costs[l] is the final divergence of layer l's own
    sub-problem; under the cascade's descent property it should be
    non-increasing across layers (within floating-point slack).
    """

    layer_A: list[np.ndarray]
    final_X: np.ndarray
    ranks: list[int]
    layer_costs: list[float]
    per_layer_traces: list[list[float]]

    def total_basis(self) -> np.ndarray:
        """Accumulated basis A1 @ A2 @ ... @ AL (I x final rank)."""
        A_tot = self.layer_A[0]
        for A in self.layer_A[1:]:
            A_tot = A_tot @ A
        return A_tot

    def reconstruction(self) -> np.ndarray:
        return self.total_basis() @ self.final_X


def _chem_blend(
    prev_A: np.ndarray, rank: int, bounding_factor: float, rng: np.random.Generator
) -> np.ndarray:
    A_rand = 1.0 - rng.random((prev_A.shape[1], rank))
    A_base = float(prev_A.mean())
    return (1.0 - bounding_factor) * A_rand + bounding_factor * A_base * np.ones(
        (prev_A.shape[1], rank)
    )


def chem_init(prev_A, rank: int, bounding_factor: float, seed: int) -> np.ndarray:
    """Bounded initialization for the basis of the next layer: a convex
    blend of a seeded uniform-(0,1] random matrix with the constant
    matrix filled with mean(prev_A). bounding_factor = 0 returns the
    random matrix unchanged."""
    prev_A = ensure_nonneg_matrix(prev_A, "prev_A")
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if not (0.0 <= bounding_factor <= 1.0):
        raise ValueError(f"bounding_factor must be in [0, 1], got {bounding_factor}")
    return _chem_blend(prev_A, rank, bounding_factor, make_rng(seed))


def multilayer_factorize(
    Y,
    ranks: list[int],
    nmf_config: AlphaNmfConfig,
    chem_config: ChemInitConfig | None = None,
    layer_penalty=None,
) -> LayerStack:
    """Factor Y through a cascade of layers with the given rank schedule.

    Layer 1 runs exactly like the single-layer factorize (same seed,
    bitwise-identical for ranks == [J]). Later layers draw a random
    activation and a random basis from a layer-derived stream, blend the
    basis per chem_config (no blend when chem_config is None), and
    re-factor the previous activation map.

    The rank schedule must be non-increasing: each layer reduces the
    representation, and the cascade is ill-posed otherwise.

    layer_penalty, when given, is called as layer_penalty(layer_index)
    and may return a cost_penalty hook for that layer's factorize call.
    """
    Y = ensure_nonneg_matrix(Y, "Y")
    if len(ranks) == 0:
        raise ValueError("ranks must be non-empty")
    ranks = [int(r) for r in ranks]
    if any(r < 1 for r in ranks):
        raise ValueError(f"every rank must be >= 1, got {ranks}")
    if any(b > a for a, b in zip(ranks, ranks[1:])):
        raise ValueError(f"rank schedule must be non-increasing, got {ranks}")
    if ranks[0] > min(Y.shape):
        raise ValueError(
            f"ranks[0] = {ranks[0]} exceeds min(Y.shape) = {min(Y.shape)}"
        )

    bf = chem_config.bounding_factor if chem_config is not None else 0.0
    current = Y
    layer_A: list[np.ndarray] = []
    layer_costs: list[float] = []
    traces: list[list[float]] = []

    for layer, rank in enumerate(ranks, start=1):
        cfg = replace(nmf_config, rank=rank)
        penalty = layer_penalty(layer) if layer_penalty is not None else None
        if layer == 1:
            result = factorize(current, cfg, cost_penalty=penalty)
        else:
            rng = make_rng(nmf_config.seed, layer)
            scale = float(current.mean()) / rank
            X0 = (1.0 - rng.random((rank, current.shape[1]))) * scale
            A0 = _chem_blend(layer_A[-1], rank, bf, rng)
            result = factorize(
                current, cfg, init_factors=(A0, X0), cost_penalty=penalty
            )
        layer_A.append(result.A)
        layer_costs.append(result.cost_trace[-1])
        traces.append(result.cost_trace)
        current = result.X

    return LayerStack(
        layer_A=layer_A,
        final_X=current,
        ranks=ranks,
        layer_costs=layer_costs,
        per_layer_traces=traces,
    )


def energy_barrier(cost_trace: list[float], global_min_estimate: float) -> float:
    """Highest cost along an optimization trace minus the estimated
    global minimum."""
    if len(cost_trace) == 0:
        raise ValueError("cost_trace must be non-empty")
    lo = min(cost_trace)
    if global_min_estimate > lo:
        raise ValueError(
            f"global_min_estimate {global_min_estimate} exceeds trace minimum {lo}"
        )
    return float(max(cost_trace) - global_min_estimate)


def boltzmann_escape_probability(
    barrier: float, beta: float, partition_Z: float
) -> float:
    """(1/Z) * exp(-beta * barrier), in (0, 1] for Z >= 1."""
    if barrier < 0:
        raise ValueError(f"barrier must be >= 0, got {barrier}")
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if partition_Z < 1:
        raise ValueError(f"partition_Z must be >= 1, got {partition_Z}")
    return float(np.exp(-beta * barrier) / partition_Z)


def survival_probability(escape_probs: list[float]) -> list[float]:
    """Cumulative products of (1 - P_l): the chance of never having
    escaped after each successive layer. Empty input gives an empty
    curve (survival before any layer is implicitly 1)."""
    out: list[float] = []
    acc = 1.0
    for p in escape_probs:
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"escape probability {p} outside [0, 1]")
        acc *= 1.0 - p
        out.append(acc)
    return out


@dataclass
class EscapeReport:
    """Escape/survival estimates from seeded restarts at each depth.

    per_layer_escape_estimates[l-1] is the fraction of depth-l restarts
    whose final divergence came within epsilon_opt of the best final
    divergence seen anywhere in the experiment. survival_curve is the
    running product of their complements. barrier_estimates are mean
    (peak-minus-best) heights of the final layer's trace per depth.
    """

    per_layer_escape_estimates: list[float]
    survival_curve: list[float]
    barrier_estimates: list[float]
    trials: int
    best_divergence: float
    epsilon_opt: float
    final_divergences: list[list[float]]
    ranks: list[int]

    def to_dict(self) -> dict:
        return {
            "per_layer_escape_estimates": self.per_layer_escape_estimates,
            "survival_curve": self.survival_curve,
            "barrier_estimates": self.barrier_estimates,
            "trials": self.trials,
            "best_divergence": self.best_divergence,
            "epsilon_opt": self.epsilon_opt,
            "final_divergences": self.final_divergences,
            "ranks": self.ranks,
        }


def escape_experiment(
    Y,
    ranks: list[int],
    nmf_config: AlphaNmfConfig,
    chem_config: ChemInitConfig | None = None,
    trials: int = 50,
) -> EscapeReport:
    """Estimate per-depth escape probabilities by seeded restarts.

    For each depth l = 1..len(ranks), runs `trials` independent cascades
    over ranks[:l], each with a seed derived from (base seed, depth,
    trial). A restart "escapes" when its final-layer divergence is
    within epsilon_opt = 1e-3 * (1 + best) of the best final divergence
    found across all runs. Fully deterministic given the base seed.
    """
    Y = ensure_nonneg_matrix(Y, "Y")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    depths = len(ranks)
    finals = [[0.0] * trials for _ in range(depths)]
    peak = [[0.0] * trials for _ in range(depths)]
    for depth in range(1, depths + 1):
        for trial in range(trials):
            cfg = replace(
                nmf_config, seed=derive_seed(nmf_config.seed, depth, trial)
            )
            stack = multilayer_factorize(Y, ranks[:depth], cfg, chem_config)
            last_trace = stack.per_layer_traces[-1]
            finals[depth - 1][trial] = last_trace[-1]
            peak[depth - 1][trial] = max(last_trace)

    best = min(min(row) for row in finals)
    eps_opt = 1e-3 * (1.0 + best)
    escapes = [
        float(np.mean([f <= best + eps_opt for f in row])) for row in finals
    ]
    barriers = [float(np.mean([p - best for p in row])) for row in peak]
    return EscapeReport(
        per_layer_escape_estimates=escapes,
        survival_curve=survival_probability(escapes),
        barrier_estimates=barriers,
        trials=trials,
        best_divergence=float(best),
        epsilon_opt=float(eps_opt),
        final_divergences=finals,
        ranks=list(ranks),
    )
