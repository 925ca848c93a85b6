"""Heart/lung separation pipelines.

Both pipelines run two independently parameterized factorization blocks
on the affine-shifted mixture. Each block factors the 2 x T input
through a cascade of rank-2 layers over several seeded restarts, keeps
the restart with the lowest final cost, and picks one activation row by
periodicity: the heart block keeps the shorter-period row, the lung
block the longer-period row. Selected rows are mapped back through the
inverse affine transform.

The feedback variant additionally consults an advisor during iteration
and scores restarts/stopping with the frequency-penalized cost; the
multiplicative updates themselves are never modified, so the plain cost
trace keeps its descent guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .advisors import (
    Advisor,
    AdvisorError,
    AdvisorRequest,
    DEFAULT_F_HEART_HZ,
    DEFAULT_F_LUNG_HZ,
    validate_response,
)
from .nmf import AlphaNmfConfig, alpha_divergence, factorize, initial_cost
from .periodicity import (
    AudioSegment,
    NoPeaksError,
    autocorrelation,
    estimate_period,
    extract_features,
    power_spectral_density,
)
from .rng import derive_seed, make_rng

__all__ = [
    "AffineParams",
    "PeriodConfig",
    "BlockConfig",
    "SeparationConfig",
    "LingoConfig",
    "BlockOutcome",
    "SeparationResult",
    "LingoResult",
    "affine_transform",
    "inverse_affine",
    "frequency_penalty",
    "pl_nmf_separate",
    "lingo_nmf_separate",
]

_HEART, _LUNG = 0, 1


@dataclass(frozen=True)
class AffineParams:
    """Scale-and-offset map lambda1 * y + lambda2 into the non-negative cone."""

    lambda1: float
    lambda2: float

    def __post_init__(self) -> None:
        if self.lambda1 <= 0:
            raise ValueError(f"lambda1 must be > 0, got {self.lambda1}")


def affine_transform(Y, params: AffineParams) -> np.ndarray:
    """Apply lambda1 * Y + lambda2 after checking feasibility against the
    concrete input: lambda1 * min(Y) + lambda2 must be >= 0."""
    Y = np.asarray(Y, dtype=float)
    if not np.isfinite(Y).all():
        raise ValueError("input contains non-finite values")
    lo = params.lambda1 * float(Y.min()) + params.lambda2
    if lo < 0:
        raise ValueError(
            f"affine params infeasible: lambda1*min + lambda2 = {lo} < 0"
        )
    return params.lambda1 * Y + params.lambda2


def inverse_affine(x, params: AffineParams) -> np.ndarray:
    """Undo affine_transform: (x - lambda2) / lambda1."""
    x = np.asarray(x, dtype=float)
    return (x - params.lambda2) / params.lambda1


def frequency_penalty(f_hat, f_target, lambda_f: float) -> float:
    """lambda_f times the squared distance between estimated and target
    fundamental frequencies."""
    f_hat = np.asarray(f_hat, dtype=float)
    f_target = np.asarray(f_target, dtype=float)
    if f_hat.shape != f_target.shape:
        raise ValueError("frequency vectors must have matching shapes")
    if (f_hat <= 0).any() or (f_target <= 0).any():
        raise ValueError("frequencies must be positive")
    if lambda_f < 0:
        raise ValueError(f"lambda_f must be >= 0, got {lambda_f}")
    diff = f_hat - f_target
    return float(lambda_f * np.dot(diff, diff))


@dataclass(frozen=True)
class PeriodConfig:
    min_lag: int = 2
    peak_threshold_ratio: float = 0.3


@dataclass(frozen=True)
class BlockConfig:
    affine: AffineParams
    alpha: float = 1.0
    layers: int = 2

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")


@dataclass(frozen=True)
class SeparationConfig:
    """Per-source block parameters plus the shared iteration config.

    The heart block must scale up (lambda1 >= 1) and the lung block must
    scale down (0 < lambda1 < 1); lung sounds dominate the mixture, so
    the bands bias each block toward its source.
    """

    heart: BlockConfig
    lung: BlockConfig
    nmf: AlphaNmfConfig
    period_cfg: PeriodConfig = PeriodConfig()
    restarts: int = 4

    def __post_init__(self) -> None:
        if self.heart.affine.lambda1 < 1.0:
            raise ValueError(
                f"heart lambda1 must be >= 1, got {self.heart.affine.lambda1}"
            )
        if not (0.0 < self.lung.affine.lambda1 < 1.0):
            raise ValueError(
                f"lung lambda1 must be in (0, 1), got {self.lung.affine.lambda1}"
            )
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")


@dataclass(frozen=True)
class LingoConfig:
    """Feedback-loop parameters on top of a SeparationConfig.

    lambda_f = None auto-scales the penalty weight to
    0.1 * initial divergence / ||initial_f||^2 per block, making the two
    cost terms commensurate.
    """

    base: SeparationConfig
    lambda_f: float | None = None
    advisor_period: int = 10
    initial_f: tuple[float, float] = (DEFAULT_F_HEART_HZ, DEFAULT_F_LUNG_HZ)

    def __post_init__(self) -> None:
        if self.lambda_f is not None and self.lambda_f < 0:
            raise ValueError(f"lambda_f must be >= 0, got {self.lambda_f}")
        if self.advisor_period < 1:
            raise ValueError(
                f"advisor_period must be >= 1, got {self.advisor_period}"
            )
        if any(f <= 0 or not math.isfinite(f) for f in self.initial_f):
            raise ValueError(f"initial_f must be positive finite, got {self.initial_f}")


@dataclass
class BlockOutcome:
    selected_row: int
    row_periods: list[float]
    restart_scores: list[float]
    best_restart: int
    per_layer_traces: list[list[float]]
    tie_warning: bool = False
    penalized_trace: list[float] = field(default_factory=list)


@dataclass
class SeparationResult:
    heart: AudioSegment
    lung: AudioSegment
    heart_period_samples: float
    lung_period_samples: float
    heart_block: BlockOutcome
    lung_block: BlockOutcome


@dataclass
class LingoResult(SeparationResult):
    advisor_log: list[dict] = field(default_factory=list)

    @property
    def penalized_cost_trace(self) -> dict[str, list[float]]:
        return {
            "heart": self.heart_block.penalized_trace,
            "lung": self.lung_block.penalized_trace,
        }


def _as_two_rows(mixture) -> np.ndarray:
    m = np.asarray(mixture, dtype=float)
    if m.ndim == 1:
        m = np.vstack([m, m])
    if m.ndim != 2 or m.shape[0] != 2:
        raise ValueError(f"mixture must be 1-D or 2 x T, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("mixture contains non-finite values")
    if not m.any():
        raise ValueError("mixture is identically zero")
    if m.shape[1] < 16:
        raise ValueError("mixture too short to separate")
    return m


def _row_periods(X: np.ndarray, sample_rate: float, pcfg: PeriodConfig) -> list[float]:
    """Periods of each activation row; rows are mean-removed first
    because the affine offset otherwise swamps the peak picking, and the
    peak threshold is taken against the row's power so noise-like rows
    report an infinite period instead of a spurious short one."""
    periods = []
    for row in X:
        centered = row - row.mean()
        if not centered.any():
            periods.append(math.inf)
            continue
        try:
            acf = autocorrelation(AudioSegment(samples=centered, sample_rate=sample_rate))
            est = estimate_period(
                acf,
                pcfg.min_lag,
                pcfg.peak_threshold_ratio,
                power=float(np.mean(centered * centered)),
            )
            periods.append(est.period_samples)
        except NoPeaksError:
            periods.append(math.inf)
    return periods


def _select_row(periods: list[float], want: str) -> tuple[int, bool]:
    if all(math.isinf(p) for p in periods):
        raise NoPeaksError(
            "no periodic content found in either activation row"
        )
    tie = periods[0] == periods[1]
    if tie:
        return 0, True
    if want == "shorter":
        return int(np.argmin(periods)), False
    return int(np.argmax(periods)), False


class _FeedbackLoop:
    """Per-block advisor/penalty state shared across restarts.

    Computes row fundamentals each iteration, consults the advisor every
    advisor_period iterations, and returns the frequency penalty added
    to the stopping cost. Records (cost, penalty) pairs per restart so
    the best restart's penalized trace can be reconstructed.
    """

    def __init__(
        self,
        advisor: Advisor,
        lambda_f: float,
        initial_f: tuple[float, float],
        advisor_period: int,
        sample_rate: float,
        affine: AffineParams,
        block_name: str,
        log: list[dict],
    ):
        self.advisor = advisor
        self.lambda_f = lambda_f
        self.f_target = tuple(initial_f)
        self.advisor_period = advisor_period
        self.sample_rate = sample_rate
        self.affine = affine
        self.block_name = block_name
        self.log = log
        self.restart_traces: dict[int, list[float]] = {}
        self.restart_penalties: dict[int, list[float]] = {}
        self._restart = 0

    def start_restart(self, restart: int) -> None:
        self._restart = restart
        self.restart_traces[restart] = []
        self.restart_penalties[restart] = []

    def last_penalty(self, restart: int) -> float:
        recorded = self.restart_penalties.get(restart)
        return recorded[-1] if recorded else 0.0

    def _row_fundamentals(self, X: np.ndarray) -> list[float | None]:
        fs = self.sample_rate
        out: list[float | None] = []
        for row in X:
            spec = np.abs(np.fft.rfft(row)) ** 2
            body = spec[1:]
            if body.size == 0 or body.max() <= 0:
                out.append(None)
                continue
            k = 1 + int(np.argmax(body))
            out.append(k * fs / len(row))
        return out

    def _psd_peaks(self, X: np.ndarray) -> list[tuple[float, float]]:
        peaks: list[tuple[float, float]] = []
        for row in X:
            seg = AudioSegment(samples=row - row.mean(), sample_rate=self.sample_rate)
            if len(seg) < 8 or not seg.samples.any():
                continue
            freqs, psd = power_spectral_density(seg)
            local = [
                (float(freqs[i]), float(psd[i]))
                for i in range(1, len(psd) - 1)
                if psd[i] > psd[i - 1] and psd[i] >= psd[i + 1] and psd[i] > 0
            ]
            local.sort(key=lambda t: -t[1])
            peaks.extend(local[:5])
        peaks.sort(key=lambda t: -t[1])
        return peaks

    def _consult(self, X: np.ndarray, layer: int, iteration: int) -> None:
        signal_rows = inverse_affine(X, self.affine)
        features = tuple(
            extract_features(AudioSegment(samples=r, sample_rate=self.sample_rate))
            if r.any()
            else extract_features(
                AudioSegment(samples=np.zeros(8), sample_rate=self.sample_rate)
            )
            for r in signal_rows
        )
        request = AdvisorRequest(
            features=features, psd_peaks=self._psd_peaks(X), prior_f=self.f_target
        )
        entry = {
            "block": self.block_name,
            "restart": self._restart,
            "layer": layer,
            "iteration": iteration,
            "prior_f": list(self.f_target),
        }
        try:
            response = validate_response(self.advisor.advise(request))
            self.f_target = (response.f_heart, response.f_lung)
            entry["ok"] = True
            entry["response"] = response.to_dict()
        except Exception as exc:  # any advisor failure falls back
            entry["ok"] = False
            entry["error"] = str(exc)
        self.log.append(entry)

    def _penalty_value(self, X: np.ndarray) -> float:
        f_hat = self._row_fundamentals(X)
        if f_hat[0] is None or f_hat[1] is None:
            return 0.0
        target = self.f_target
        straight = (f_hat[0] - target[0]) ** 2 + (f_hat[1] - target[1]) ** 2
        swapped = (f_hat[1] - target[0]) ** 2 + (f_hat[0] - target[1]) ** 2
        return self.lambda_f * min(straight, swapped)

    def layer_hook(self, layer: int):
        def hook(iteration: int, X: np.ndarray, cost: float) -> float:
            if iteration % self.advisor_period == 0:
                self._consult(X, layer, iteration)
            pen = self._penalty_value(X)
            self.restart_traces[self._restart].append(cost + pen)
            self.restart_penalties[self._restart].append(pen)
            return pen

        return hook


def _block_cascade(
    Yb: np.ndarray,
    layers: int,
    cfg: AlphaNmfConfig,
    feedback: _FeedbackLoop | None,
):
    """Refinement cascade for one separation block.

    Layer 1 factors the block input; each deeper layer re-factors the
    previous activation map, warm-starting its activation at that map so
    the refinement cannot scramble an already-separated solution. All
    layers share rank 2.
    """
    basis: list[np.ndarray] = []
    traces: list[list[float]] = []
    current = Yb
    for layer in range(1, layers + 1):
        penalty = feedback.layer_hook(layer) if feedback is not None else None
        if layer == 1:
            result = factorize(current, cfg, cost_penalty=penalty)
        else:
            rng = make_rng(cfg.seed, layer)
            A0 = 1.0 - rng.random((2, 2))
            result = factorize(
                current, cfg, init_factors=(A0, current), cost_penalty=penalty
            )
        basis.append(result.A)
        traces.append(result.cost_trace)
        current = result.X
    total = basis[0]
    for A in basis[1:]:
        total = total @ A
    recon_cost = alpha_divergence(Yb, total, current, cfg.alpha, cfg.epsilon_floor)
    return current, traces, recon_cost


def _run_block(
    Yb: np.ndarray,
    block: BlockConfig,
    nmf: AlphaNmfConfig,
    restarts: int,
    block_id: int,
    feedback: _FeedbackLoop | None,
):
    """Best-of-restarts cascade for one block. Restarts are ranked by the
    end-to-end reconstruction divergence (plus the current frequency
    penalty when a feedback loop is attached)."""
    scores: list[float] = []
    best = None
    best_score = math.inf
    best_restart = -1
    for r in range(restarts):
        cfg = replace(
            nmf,
            rank=2,
            alpha=block.alpha,
            seed=derive_seed(nmf.seed, block_id, r),
        )
        if feedback is not None:
            feedback.start_restart(r)
        X, traces, recon = _block_cascade(Yb, block.layers, cfg, feedback)
        score = recon
        if feedback is not None:
            score = recon + feedback.last_penalty(r)
        scores.append(score)
        if score < best_score:
            best, best_score, best_restart = (X, traces), score, r
    return best, scores, best_restart


def _separate(
    mixture,
    config: SeparationConfig,
    sample_rate: float,
    advisor: Advisor | None = None,
    lingo: LingoConfig | None = None,
):
    m = _as_two_rows(mixture)
    if sample_rate <= 0:
        raise ValueError(f"sample_rate must be > 0, got {sample_rate}")
    advisor_log: list[dict] = []
    outcomes: list[BlockOutcome] = []
    selections: list[np.ndarray] = []

    for block_id, (block, want) in enumerate(
        ((config.heart, "shorter"), (config.lung, "longer"))
    ):
        Yb = affine_transform(m, block.affine)
        feedback = None
        if lingo is not None:
            lam = lingo.lambda_f
            if lam is None:
                cfg0 = replace(
                    config.nmf,
                    rank=2,
                    alpha=block.alpha,
                    seed=derive_seed(config.nmf.seed, block_id, 0),
                )
                prior_sq = float(np.dot(lingo.initial_f, lingo.initial_f))
                lam = 0.1 * initial_cost(Yb, cfg0) / max(prior_sq, 1e-300)
            feedback = _FeedbackLoop(
                advisor=advisor,
                lambda_f=lam,
                initial_f=lingo.initial_f,
                advisor_period=lingo.advisor_period,
                sample_rate=sample_rate,
                affine=block.affine,
                block_name="heart" if block_id == _HEART else "lung",
                log=advisor_log,
            )
        (X_final, traces), scores, best_restart = _run_block(
            Yb, block, config.nmf, config.restarts, block_id, feedback
        )
        periods = _row_periods(X_final, sample_rate, config.period_cfg)
        row, tie = _select_row(periods, want)
        signal = inverse_affine(X_final[row], block.affine)
        selections.append(signal)
        outcomes.append(
            BlockOutcome(
                selected_row=row,
                row_periods=periods,
                restart_scores=scores,
                best_restart=best_restart,
                per_layer_traces=traces,
                tie_warning=tie,
                penalized_trace=(
                    feedback.restart_traces[best_restart] if feedback else []
                ),
            )
        )

    heart_seg = AudioSegment(samples=selections[_HEART], sample_rate=sample_rate)
    lung_seg = AudioSegment(samples=selections[_LUNG], sample_rate=sample_rate)
    common = dict(
        heart=heart_seg,
        lung=lung_seg,
        heart_period_samples=outcomes[_HEART].row_periods[
            outcomes[_HEART].selected_row
        ],
        lung_period_samples=outcomes[_LUNG].row_periods[outcomes[_LUNG].selected_row],
        heart_block=outcomes[_HEART],
        lung_block=outcomes[_LUNG],
    )
    if lingo is None:
        return SeparationResult(**common)
    return LingoResult(**common, advisor_log=advisor_log)


def pl_nmf_separate(
    mixture, config: SeparationConfig, sample_rate: float
) -> SeparationResult:
    """Periodicity-guided dual-block separation.

    mixture is 1-D (duplicated to two rows) or 2 x T. Returns the
    inverse-affine heart and lung signals plus per-block diagnostics.
    """
    return _separate(mixture, config, sample_rate)


def lingo_nmf_separate(
    mixture, config: LingoConfig, advisor: Advisor, sample_rate: float
) -> LingoResult:
    """Separation with an advisor feedback loop.

    Every advisor_period iterations the current activation rows are
    summarized (features, PSD peaks) and sent to the advisor; its
    suggested fundamentals update the frequency-penalty target. The
    penalized cost governs stopping and the choice among restarts only.
    Advisor failures fall back to the previous target and are logged.
    """
    return _separate(
        mixture, config.base, sample_rate, advisor=advisor, lingo=config
    )
