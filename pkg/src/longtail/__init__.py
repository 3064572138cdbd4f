"""Logit adjustment and pairwise margin losses for long-tailed classification."""

from longtail.adjust import (
    AdjustmentParams,
    NormalizationSpec,
    posthoc_adjust,
    predict,
    temperature_scale,
    weight_normalize_scores,
)
from longtail.dist import (
    ClassPriors,
    GaussianTask,
    LabeledDataset,
    LongTailProfile,
    priors_from_counts,
    profile_counts,
    sample_gaussian,
)
from longtail.loss import (
    MarginSpec,
    loss_grad,
    loss_value,
    spec_adaptive,
    spec_balanced,
    spec_combined,
    spec_equalised,
    spec_erm,
    spec_from_delta,
    spec_interpolated,
    spec_logit_adjusted,
)
from longtail.metrics import EvalReport, evaluate
from longtail.train import LinearModel, OptimizerConfig, forward, train

__version__ = "0.1.0"

__all__ = [
    "AdjustmentParams", "NormalizationSpec", "posthoc_adjust", "predict", "temperature_scale",
    "weight_normalize_scores", "ClassPriors", "GaussianTask", "LabeledDataset", "LongTailProfile",
    "priors_from_counts", "profile_counts", "sample_gaussian", "MarginSpec", "loss_grad", "loss_value",
    "spec_adaptive", "spec_balanced", "spec_combined", "spec_equalised", "spec_erm", "spec_from_delta",
    "spec_interpolated", "spec_logit_adjusted", "EvalReport", "evaluate", "LinearModel",
    "OptimizerConfig", "forward", "train",
]
