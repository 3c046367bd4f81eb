"""Class-accuracy imbalance metrics and post-hoc probability reweighting.

The package measures how unevenly a probabilistic classifier's accuracy is
distributed across classes and corrects it after the fact: a discrete
per-class reweighting of the output probabilities is learned on a labeled
optimization set by simulated annealing and then applied at test time.
"""

__version__ = "0.1.0"

from .annealer import (
    AnnealResult,
    AnnealSchedule,
    AnnealTrace,
    TraceRecord,
    anneal,
    perturb,
    predicted_complexity,
    write_trace,
)
from .baselines import BatchCalibration, MethodComparison, MethodResult, batch_calibrate, compare_methods
from .data import (
    ProbabilityDataset,
    ReweightArtifact,
    RunProvenance,
    SyntheticSpec,
    WeightScale,
    WeightSelection,
    generate_synthetic,
    load_artifact,
    load_dataset,
    save_artifact,
    save_dataset,
)
from .errors import ArtifactError, DatasetFormatError, ValidationError
from .metrics import (
    ClassAccuracyReport,
    ConfusionMatrix,
    class_report,
    cobias,
    cobias_single,
    confusion,
    odd_classes,
    per_class_accuracy,
    pmi_vector,
    predict,
    predict_dataset,
    report_document,
)
from .objective import (
    IncrementalEvaluator,
    ObjectiveConfig,
    ObjectiveValue,
    evaluate,
    evaluate_incremental,
)
from .oracle import enumerate_optimum

__all__ = [
    "AnnealResult",
    "AnnealSchedule",
    "AnnealTrace",
    "ArtifactError",
    "BatchCalibration",
    "ClassAccuracyReport",
    "ConfusionMatrix",
    "DatasetFormatError",
    "IncrementalEvaluator",
    "MethodComparison",
    "MethodResult",
    "ObjectiveConfig",
    "ObjectiveValue",
    "ProbabilityDataset",
    "ReweightArtifact",
    "RunProvenance",
    "SyntheticSpec",
    "TraceRecord",
    "ValidationError",
    "WeightScale",
    "WeightSelection",
    "anneal",
    "batch_calibrate",
    "class_report",
    "cobias",
    "cobias_single",
    "compare_methods",
    "confusion",
    "enumerate_optimum",
    "evaluate",
    "evaluate_incremental",
    "generate_synthetic",
    "load_artifact",
    "load_dataset",
    "odd_classes",
    "per_class_accuracy",
    "perturb",
    "pmi_vector",
    "predicted_complexity",
    "predict",
    "predict_dataset",
    "report_document",
    "save_artifact",
    "save_dataset",
    "write_trace",
]
