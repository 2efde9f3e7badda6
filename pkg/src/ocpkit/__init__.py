"""Order-contrastive pre-training on synthetic binary trajectories.

Trajectory simulation, contrastive pair sampling, subset ERM with
from-scratch logistic regression, exact Bayes-risk oracles, downstream
comparisons and reproducible sweeps.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .distribution import (
    BackgroundFeature,
    BudgetExceeded,
    DistributionSpec,
    DriverFeature,
    NoisyFeature,
    SpecError,
    dist1,
    dist2,
    exact_marginal,
    exact_pair_distribution,
    inject_violation,
    load_spec,
    sample_trajectories,
    sample_trajectory,
    verify_assumptions,
)
from .downstream import (
    DownstreamTask,
    direct_erm,
    exact_downstream_risk,
    excess_risk_curves,
    finetune,
    make_labeled_dataset,
)
from .harness import SweepConfig, run_all, run_sweep, summarize
from .learner import (
    LinearModel,
    Regularization,
    erm_subset_search,
    featurize_pair,
    l1_select,
    recovery_score,
    train_logistic,
)
from .oracle import (
    bayes_risk,
    epsilon_zero,
    m_expectation,
    optimal_subset,
    population_risk,
    unlabeled_sample_bound,
)
from .rng import substream
from .sampling import PairBatch, Scheme, sample_pair, sample_pairs, scheme_pair_law

__all__ = [name for name in dir() if not name.startswith("_")]
