"""Matrix Fisher distribution on SO(3) and Bayesian attitude filters built on it."""

from .distribution import MatrixFisher, NormalizingInfo, VonMisesFisherS2, cumulative_isotropic, normalizer
from .estimator import (
    AttitudeSensor,
    EstimationRun,
    GyroModel,
    Measurements,
    UnscentedSet,
    correct,
    propagate_first_order,
    propagate_unscented,
    run_filter,
    unscented_transform,
)
from .fitting import InfeasibleMoment, fit_from_moment, fit_from_samples
from .so3 import exp_so3, hat, log_so3, proper_svd, quat_to_rotation, sample_uniform, vee

__all__ = [
    "AttitudeSensor", "EstimationRun", "GyroModel", "InfeasibleMoment", "MatrixFisher", "Measurements",
    "NormalizingInfo", "UnscentedSet", "VonMisesFisherS2", "correct", "cumulative_isotropic", "exp_so3",
    "fit_from_moment", "fit_from_samples", "hat", "log_so3", "normalizer", "propagate_first_order",
    "propagate_unscented", "proper_svd", "quat_to_rotation", "run_filter", "sample_uniform",
    "unscented_transform", "vee",
]
