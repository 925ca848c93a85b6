"""Multi-layer alpha-divergence NMF toolkit for single-channel heart/lung
sound separation, spectrogram clustering, and convergence diagnostics."""

from .advisors import (
    Advisor,
    AdvisorError,
    AdvisorRequest,
    AdvisorResponse,
    ConstantAdvisor,
    EchoAdvisor,
    ExternalAdvisor,
    HeuristicAdvisor,
    heuristic_advisor,
)
from .audio import (
    ManifestEntry,
    SynthMixSpec,
    SynthMixture,
    load_manifest,
    read_wav,
    resample,
    segment_audio,
    synth_mixture,
    write_wav,
)
from .bss import BssComponents, BssScores, bss_eval, decompose
from .clustering import (
    ClusterAssignment,
    ClusterScores,
    accuracy_hungarian,
    chem_cluster_pipeline,
    internal_scores,
    kmeans,
    nmi,
)
from .multilayer import (
    ChemInitConfig,
    EscapeReport,
    LayerStack,
    boltzmann_escape_probability,
    chem_init,
    energy_barrier,
    escape_experiment,
    multilayer_factorize,
    survival_probability,
)
from .nmf import (
    AlphaNmfConfig,
    FactorizationResult,
    NumericalError,
    alpha_divergence,
    factorize,
    normalize_factors,
    update_step,
)
from .periodicity import (
    AudioSegment,
    FeatureVector,
    NoPeaksError,
    PeriodEstimate,
    Spectrogram,
    autocorrelation,
    estimate_period,
    extract_features,
    fundamental_frequency,
    power_spectral_density,
    stft_spectrogram,
)
from .separation import (
    AffineParams,
    BlockConfig,
    LingoConfig,
    LingoResult,
    PeriodConfig,
    SeparationConfig,
    SeparationResult,
    affine_transform,
    frequency_penalty,
    inverse_affine,
    lingo_nmf_separate,
    pl_nmf_separate,
)

__version__ = "0.1.0"
