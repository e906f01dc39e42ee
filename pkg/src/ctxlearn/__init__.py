"""Learning contextual value distributions from reward samples.

The package learns a uniform-weight distribution over linear-style
reward weights from (context, reward) samples, measures how close the
induced value distributions are to the truth, and deploys the learned
distributions in posted pricing, Pandora's box and optimal stopping.
"""

from .harness import ExperimentConfig, run_pipeline
from .learner import (
    LearnerConfig,
    LearnResult,
    learn,
    lipschitz_bound,
    regularization_lambda,
    required_samples_capped,
    required_samples_levy,
    required_samples_loss,
    support_size_heuristic,
)
from .loss import cap_grid, empirical_loss, loss_subgradient, sample_loss, true_loss_at_context
from .metrics import capped_gap_sup, levy_distance, wasserstein_distance
from .model import (
    ContextDistribution,
    InstanceSpec,
    LabeledSample,
    RewardFunction,
    WeightDistribution,
    draw_samples,
    induced_value_distribution,
)
from .valuedist import DiscreteValueDistribution

__all__ = [
    "ContextDistribution",
    "DiscreteValueDistribution",
    "ExperimentConfig",
    "InstanceSpec",
    "LabeledSample",
    "LearnResult",
    "LearnerConfig",
    "RewardFunction",
    "WeightDistribution",
    "cap_grid",
    "capped_gap_sup",
    "draw_samples",
    "empirical_loss",
    "induced_value_distribution",
    "learn",
    "levy_distance",
    "lipschitz_bound",
    "loss_subgradient",
    "regularization_lambda",
    "required_samples_capped",
    "required_samples_levy",
    "required_samples_loss",
    "run_pipeline",
    "sample_loss",
    "support_size_heuristic",
    "true_loss_at_context",
    "wasserstein_distance",
]
