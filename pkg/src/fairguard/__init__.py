"""Fair classification that tolerates adversarial perturbation of protected attributes."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .adversaries import (
    FlipMatrix,
    PerturbationRecord,
    perturb_flip,
    perturb_nasty_labels,
    perturb_p_restricted,
    perturb_targeted,
    perturb_tv_coupling,
)
from .classifier import LinearClassifier, logistic_loss, predict_hard, predict_soft
from .data import SyntheticConfig, generate_synthetic, load_csv, save_csv, split_train_test
from .metrics import (
    FDR,
    FPR,
    SR,
    TPR,
    Dataset,
    MetricSpec,
    PerformanceTable,
    Sample,
    empirical_error,
    fairness_value,
    group_performance,
    joint_event_mass,
)
from .reduction import IntervalPartition, fit_reduced, partition_intervals
from .solver import (
    RobustParams,
    SolveResult,
    SolverConfig,
    compute_scaling_s,
    constrained_minimize,
    estimate_params,
    fit_err_tolerant,
    fit_err_tolerant_plus,
    fit_general_err_tolerant,
    fit_target_fair,
    fit_unconstrained,
    robust_fairness_threshold,
)
