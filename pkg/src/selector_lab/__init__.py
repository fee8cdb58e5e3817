"""Conditional classification with homogeneous halfspace selectors under Gaussian marginals."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ConstantClassifier,
    Dataset,
    EmptySelection,
    ErrorDistribution,
    ErrorSampler,
    GaussianSampler,
    Halfspace,
    LinearClassifier,
    PlantedModel,
    Rng,
    angle,
    conditional_error,
    joint_error,
    make_planted,
    project_orthogonal,
    sample_gaussian,
    sample_planted,
    selection_rate,
    to_error_distribution,
)
from .listlearn import SparseLinearClassifier, SparseListConfig, list_sample_size, sparse_list  # noqa: E402
from .oracle import GridSpec, exhaustive_best_subset, grid_best_halfspace, planted_joint_error  # noqa: E402
from .psgd import PsgdConfig, PsgdTrace, best_iterate, projected_gradient, psgd, surrogate_loss  # noqa: E402
from .reduction import (  # noqa: E402
    FiniteDistribution,
    HypothesisFamily,
    check_decomposition,
    err_class,
    err_cond,
    reduce_additive,
    reduce_multiplicative,
)
from .selector import BudgetExceeded, CcfcConfig, PairResult, ccfc, ccslc, schedule  # noqa: E402
from .verify import CheckReport, run_suite  # noqa: E402
