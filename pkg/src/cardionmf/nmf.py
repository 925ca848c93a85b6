"""Single-layer alpha-divergence NMF with multiplicative updates.

Factors a non-negative matrix Y (I x T) into A (I x J) and X (J x T) by
minimizing the order-alpha divergence between Y and AX. The cost is
non-increasing under the update rules, which the iteration records in a
per-step cost trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .rng import make_rng

__all__ = [
    "AlphaNmfConfig",
    "FactorizationResult",
    "NumericalError",
    "alpha_divergence",
    "update_step",
    "normalize_factors",
    "factorize",
    "initial_cost",
    "ensure_nonneg_matrix",
]


class NumericalError(RuntimeError):
    """Non-finite values appeared during iteration (epsilon floor too small)."""


def ensure_nonneg_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-D non-negative finite float array."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    if (arr < 0).any():
        raise ValueError(f"{name} contains negative entries")
    return arr


@dataclass(frozen=True)
class AlphaNmfConfig:
    """Parameters for one factorization run.

    alpha is the divergence order in (0, 2]; alpha = 1 selects the KL
    limit. Stopping: relative cost change below rel_tol, or max_iter.
    """

    alpha: float
    rank: int
    max_iter: int = 500
    rel_tol: float = 1e-6
    epsilon_floor: float = 1e-12
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.epsilon_floor <= 0:
            raise ValueError(f"epsilon_floor must be > 0, got {self.epsilon_floor}")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")


@dataclass
class FactorizationResult:
    """Factors plus the per-iteration cost trace.

    cost_trace[0] is the cost at initialization; one entry follows per
    update step, so len(cost_trace) == iterations + 1.
    """

    A: np.ndarray
    X: np.ndarray
    cost_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def reconstruction(self) -> np.ndarray:
        return self.A @ self.X


def alpha_divergence(Y, A, X, alpha: float, epsilon_floor: float = 1e-12) -> float:
    """Order-alpha divergence D(Y || AX).

    For alpha != 1:
        1/(alpha*(alpha-1)) * sum(y^alpha * (AX)^(1-alpha) - alpha*y + (alpha-1)*AX)
    For alpha = 1 the KL limit sum(y*ln(y/AX) - y + AX) is used, with
    0*ln(0) = 0. AX entries are floored at epsilon_floor before
    exponentiation or division.
    """
    Y = ensure_nonneg_matrix(Y, "Y")
    A = ensure_nonneg_matrix(A, "A")
    X = ensure_nonneg_matrix(X, "X")
    if not (0.0 < alpha <= 2.0):
        raise ValueError(f"alpha must be in (0, 2], got {alpha}")
    if A.shape[0] != Y.shape[0] or X.shape[1] != Y.shape[1] or A.shape[1] != X.shape[0]:
        raise ValueError(
            f"dimension mismatch: Y{Y.shape}, A{A.shape}, X{X.shape}"
        )
    ax = A @ X
    ax_f = np.maximum(ax, epsilon_floor)
    if alpha == 1.0:
        val = xlogy(Y, Y / ax_f).sum() - Y.sum() + ax.sum()
    else:
        val = (
            np.sum(np.power(Y, alpha) * np.power(ax_f, 1.0 - alpha))
            - alpha * Y.sum()
            + (alpha - 1.0) * ax.sum()
        ) / (alpha * (alpha - 1.0))
    return float(val)


def update_step(Y, A, X, alpha: float, epsilon_floor: float = 1e-12):
    """One multiplicative update of both factors; X first, then A
    against the updated X. Both Y and AX are floored at epsilon_floor
    inside the ratio so exact fits are exact fixed points.
    """
    Y = ensure_nonneg_matrix(Y, "Y")
    A = ensure_nonneg_matrix(A, "A")
    X = ensure_nonneg_matrix(X, "X")
    if A.shape[0] != Y.shape[0] or X.shape[1] != Y.shape[1] or A.shape[1] != X.shape[0]:
        raise ValueError(
            f"dimension mismatch: Y{Y.shape}, A{A.shape}, X{X.shape}"
        )
    eps = epsilon_floor
    inv_alpha = 1.0 / alpha
    y_f = np.maximum(Y, eps)

    ratio_pow = np.power(y_f / np.maximum(A @ X, eps), alpha)
    col_sums = np.maximum(A.sum(axis=0), eps)
    X_new = X * np.power((A.T @ ratio_pow) / col_sums[:, None], inv_alpha)

    ratio_pow = np.power(y_f / np.maximum(A @ X_new, eps), alpha)
    row_sums = np.maximum(X_new.sum(axis=1), eps)
    A_new = A * np.power((ratio_pow @ X_new.T) / row_sums[None, :], inv_alpha)

    if not (np.isfinite(A_new).all() and np.isfinite(X_new).all()):
        raise NumericalError(
            "non-finite entries after update; epsilon_floor may be too small"
        )
    return A_new, X_new


def normalize_factors(A, X):
    """Rescale so every column of A sums to 1, compensating X so the
    product A @ X is unchanged."""
    A = ensure_nonneg_matrix(A, "A")
    X = ensure_nonneg_matrix(X, "X")
    if A.shape[1] != X.shape[0]:
        raise ValueError(f"dimension mismatch: A{A.shape}, X{X.shape}")
    s = A.sum(axis=0)
    if (s <= 0).any():
        raise ValueError("A has an all-zero column (degenerate rank)")
    return A / s, X * s[:, None]


def _random_factors(Y: np.ndarray, rank: int, rng: np.random.Generator):
    """Uniform (0, 1] entries scaled by mean(Y)/rank; A drawn before X."""
    I, T = Y.shape
    scale = float(Y.mean()) / rank
    A = (1.0 - rng.random((I, rank))) * scale
    X = (1.0 - rng.random((rank, T))) * scale
    return A, X


def initial_cost(Y, config: AlphaNmfConfig) -> float:
    """Divergence at the seeded random initialization factorize would
    draw for this config (used to scale penalty weights)."""
    Y = ensure_nonneg_matrix(Y, "Y")
    A, X = _random_factors(Y, config.rank, make_rng(config.seed))
    A, X = normalize_factors(A, X)
    return alpha_divergence(Y, A, X, config.alpha, config.epsilon_floor)


def factorize(
    Y,
    config: AlphaNmfConfig,
    init_factors: tuple[np.ndarray, np.ndarray] | None = None,
    cost_penalty=None,
) -> FactorizationResult:
    """Run multiplicative updates until the relative cost change drops
    below config.rel_tol or config.max_iter steps.

    init_factors overrides the seeded random initialization (used by the
    multi-layer cascade). cost_penalty, if given, is called as
    cost_penalty(iteration, X, cost) and its value is added to the
    divergence for the stopping test only; the recorded cost_trace stays
    the plain divergence so its monotonicity guarantee is preserved.
    """
    Y = ensure_nonneg_matrix(Y, "Y")
    I, T = Y.shape
    if Y.sum() == 0.0:
        raise ValueError("Y is identically zero; divergence is degenerate")
    if init_factors is None:
        if config.rank > min(I, T):
            raise ValueError(
                f"rank {config.rank} exceeds min(Y.shape) = {min(I, T)}"
            )
        A, X = _random_factors(Y, config.rank, make_rng(config.seed))
    else:
        A = np.array(init_factors[0], dtype=float)
        X = np.array(init_factors[1], dtype=float)

    alpha, eps = config.alpha, config.epsilon_floor
    A, X = normalize_factors(A, X)
    cost = alpha_divergence(Y, A, X, alpha, eps)
    trace = [cost]
    stop_cost = cost + (cost_penalty(0, X, cost) if cost_penalty else 0.0)
    tiny = np.finfo(float).tiny

    iterations = 0
    converged = False
    for i in range(1, config.max_iter + 1):
        A, X = update_step(Y, A, X, alpha, eps)
        A, X = normalize_factors(A, X)
        cost = alpha_divergence(Y, A, X, alpha, eps)
        trace.append(cost)
        iterations = i
        new_stop = cost + (cost_penalty(i, X, cost) if cost_penalty else 0.0)
        rel_change = abs(stop_cost - new_stop) / max(abs(stop_cost), tiny)
        stop_cost = new_stop
        if rel_change < config.rel_tol:
            converged = True
            break

    return FactorizationResult(
        A=A, X=X, cost_trace=trace, iterations=iterations, converged=converged
    )
