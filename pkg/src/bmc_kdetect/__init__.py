"""Estimate the number of clusters of a Block Markov Chain from one trajectory."""
from .counts import CountMatrix, build_counts, degrees, trim, trim_size
from .estimators import (
    ESTIMATORS,
    EstimatorOutput,
    Thresholds,
    estimate_full,
    register_estimator,
    run_estimator,
)
from .exceptions import BmcError, ConfigError, NumericalError
from .metrics import Partition, ami, compare, misclassification, normalized_entropy
from .model import (
    BmcInstance,
    BmcParams,
    PerturbationSpec,
    Trajectory,
    build_instance,
    information_quantity,
    mixing_time,
    perturb,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "BmcError", "BmcInstance", "BmcParams", "ConfigError", "CountMatrix",
    "ESTIMATORS", "EstimatorOutput", "NumericalError", "Partition",
    "PerturbationSpec", "Thresholds", "Trajectory", "ami", "build_counts",
    "build_instance", "compare", "degrees", "estimate_full",
    "information_quantity", "misclassification", "mixing_time",
    "normalized_entropy", "perturb", "register_estimator", "run_estimator",
    "simulate", "trim", "trim_size",
]
