"""Post-hoc open-set calibration of classifier activation vectors."""

from .calibrators import (
    CalibratedOutput,
    MetaMaxCalibrator,
    OpenMaxCalibrator,
    build_metamax_models,
    build_openmax_models,
    metamax_predict,
    openmax_predict,
    softmax_predict,
)
from .data import (
    ActivationSet,
    OpenSplit,
    SyntheticSpec,
    apply_split,
    generate_synthetic,
    make_open_split,
    read_activations,
    write_activations,
)
from .evaluation import (
    EvaluationReport,
    RocCurve,
    activation_distance_correlation,
    auroc,
    evaluate,
    roc_curve,
)
from .weibull import WeibullModel, cdf, fit_high, survival

__all__ = [
    "ActivationSet",
    "CalibratedOutput",
    "EvaluationReport",
    "MetaMaxCalibrator",
    "OpenMaxCalibrator",
    "OpenSplit",
    "RocCurve",
    "SyntheticSpec",
    "WeibullModel",
    "activation_distance_correlation",
    "apply_split",
    "auroc",
    "build_metamax_models",
    "build_openmax_models",
    "cdf",
    "evaluate",
    "fit_high",
    "generate_synthetic",
    "make_open_split",
    "metamax_predict",
    "openmax_predict",
    "read_activations",
    "roc_curve",
    "softmax_predict",
    "survival",
    "write_activations",
]

__version__ = "0.1.0"
