"""Vowel classification toolkit: MFCC features, Fisher's-ratio coefficient
selection, per-class GMM-HMM classification, and a repeated hold-out
evaluation harness with an accuracy-vs-subset-size sweep."""

from .audio import (
    AudioClip,
    Corpus,
    VowelSpec,
    build_synthetic_corpus,
    load_wav,
    synthesize_vowel,
    write_wav,
)
from .evaluation import (
    ConfusionMatrix,
    EvalConfig,
    Split,
    SweepEntry,
    SweepReport,
    evaluate,
    run_iteration,
    stratified_split,
    sweep,
)
from .features import (
    FeatureSequence,
    FrontendConfig,
    MelFilterBank,
    MfccExtractor,
    PowerSpectrum,
    apply_window,
    build_filterbank,
    frame_signal,
    hz_to_mel,
    mel_to_hz,
    mfcc,
    power_spectrum,
)
from .hmm import (
    GaussianComponent,
    GmmEmission,
    GmmHmmClassifier,
    HmmModel,
    TrainingConfig,
    classify,
    forward_log_likelihood,
    gmm_log_pdf,
    load_models,
    save_models,
    train,
)
from .selection import (
    ClassStats,
    CoefficientSubset,
    FRatioReport,
    FRatioSelector,
    class_statistics,
    f_ratio,
    pool_frames,
    project,
    select_top_k,
)

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "ClassStats",
    "CoefficientSubset",
    "ConfusionMatrix",
    "Corpus",
    "EvalConfig",
    "FRatioReport",
    "FRatioSelector",
    "FeatureSequence",
    "FrontendConfig",
    "GaussianComponent",
    "GmmEmission",
    "GmmHmmClassifier",
    "HmmModel",
    "MelFilterBank",
    "MfccExtractor",
    "PowerSpectrum",
    "Split",
    "SweepEntry",
    "SweepReport",
    "TrainingConfig",
    "VowelSpec",
    "apply_window",
    "build_filterbank",
    "build_synthetic_corpus",
    "class_statistics",
    "classify",
    "evaluate",
    "f_ratio",
    "forward_log_likelihood",
    "frame_signal",
    "gmm_log_pdf",
    "hz_to_mel",
    "load_models",
    "load_wav",
    "mel_to_hz",
    "mfcc",
    "pool_frames",
    "power_spectrum",
    "project",
    "run_iteration",
    "save_models",
    "select_top_k",
    "stratified_split",
    "sweep",
    "synthesize_vowel",
    "train",
    "write_wav",
]
