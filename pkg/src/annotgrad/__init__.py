"""Analytics toolkit for multi-annotator appraisal corpora.

Ingests corpora where several annotators judge each text segment on four
appraisal dimensions with values in {-1, 0, +1}; measures inter-annotator
agreement (Krippendorff's alpha under three modalities), aggregates votes
into soft-label gradients, trains and cross-validates a linear probe that
predicts those gradients from text features or external embeddings, and
ships a generative annotator simulator used as the verification oracle.
"""

from .aggregate import GradientHistogram, SoftLabel, aggregate, gradient_histogram, mean_value
from .agreement import (
    AlphaResult,
    CoincidenceMatrix,
    DistanceMetric,
    Modality,
    ReliabilityData,
    agreement_report,
    coincidence_matrix,
    krippendorff_alpha,
    project_modality,
)
from .corpus import (
    CANONICAL_DIMENSIONS,
    AnnotationRecord,
    Corpus,
    CorpusStats,
    Dimension,
    Verbatim,
    descriptive_stats,
    load_corpus,
    save_corpus,
    validate,
)
from .evaluation import (
    ConfusionGrid,
    CrossValidationResult,
    FoldPlan,
    ThresholdReport,
    confusion_grid,
    cross_validate,
    make_folds,
    threshold_classify,
    threshold_report,
)
from .probe import (
    EmbeddingTable,
    FeatureVector,
    FeaturizerConfig,
    ProbeModel,
    TrainConfig,
    hash_featurize,
    load_embeddings,
    predict_dist,
    predict_value,
    train_probe,
)
from .simulator import (
    ExpectedSoftLabel,
    LatentState,
    SimulatorConfig,
    expected_soft_label,
    generate,
    realistic_config,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "AlphaResult",
    "CANONICAL_DIMENSIONS",
    "CoincidenceMatrix",
    "ConfusionGrid",
    "Corpus",
    "CorpusStats",
    "CrossValidationResult",
    "Dimension",
    "DistanceMetric",
    "EmbeddingTable",
    "ExpectedSoftLabel",
    "FeatureVector",
    "FeaturizerConfig",
    "FoldPlan",
    "GradientHistogram",
    "LatentState",
    "Modality",
    "ProbeModel",
    "ReliabilityData",
    "SimulatorConfig",
    "SoftLabel",
    "ThresholdReport",
    "TrainConfig",
    "Verbatim",
    "aggregate",
    "agreement_report",
    "coincidence_matrix",
    "confusion_grid",
    "cross_validate",
    "descriptive_stats",
    "expected_soft_label",
    "generate",
    "gradient_histogram",
    "hash_featurize",
    "krippendorff_alpha",
    "load_corpus",
    "load_embeddings",
    "make_folds",
    "mean_value",
    "predict_dist",
    "predict_value",
    "ProbeModel",
    "project_modality",
    "realistic_config",
    "save_corpus",
    "threshold_classify",
    "threshold_report",
    "train_probe",
    "validate",
]
