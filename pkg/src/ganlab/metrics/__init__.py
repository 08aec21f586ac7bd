from .core import (
    GaussianStats,
    check_predictions,
    classifier_score,
    frechet_distance,
    gaussian_stats,
    matrix_sqrt_psd,
)
from .evaluate import (
    ClassifierScore,
    FrechetDistance,
    Metric,
    MetricRecord,
    StreamingGaussian,
    evaluate_metric,
    generate,
)
from .extractors import SmallConvClassifier, UniformClassifier, fit_classifier, identity_features

__all__ = [
    "ClassifierScore",
    "FrechetDistance",
    "GaussianStats",
    "Metric",
    "MetricRecord",
    "SmallConvClassifier",
    "StreamingGaussian",
    "UniformClassifier",
    "check_predictions",
    "classifier_score",
    "evaluate_metric",
    "fit_classifier",
    "frechet_distance",
    "gaussian_stats",
    "generate",
    "identity_features",
    "matrix_sqrt_psd",
]
