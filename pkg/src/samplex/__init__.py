"""Generalization error estimates from a nearest-neighbour distance error model.

The package predicts how a classifier's test error scales with training-set
size N when each test point fails with probability ``min(1, dist / delta)``,
``dist`` being the distance to its closest training feature vector.
"""

from samplex.distributions import DiagGaussian, UniformBox, fit_diag_gaussian, pdf, sample
from samplex.error_model import ErrorModelConfig, cell_side, expected_nn_distance, phi
from samplex.errors import (
    DegenerateFitError,
    DimensionMismatchError,
    FlatObjectiveError,
    InputError,
    NumericalError,
    SamplexError,
)
from samplex.estimator import (
    EstimatorSpec,
    closed_form_error_1d_uniform,
    estimate_curve,
    estimate_error,
)
from samplex.geometry import NnIndex, PointSet, build_index, nearest_distance, unit_cube_mean_norm
from samplex.pipeline import (
    AccuracyTable,
    DeltaFit,
    PcaProjection,
    fit_delta,
    fit_pca,
    knn_accuracy,
    predict_curve,
    project,
    select_effective_dim,
)
from samplex.simulator import LearningCurve, SimulationSpec, run_simulation, simulate_error_rate

__version__ = "0.1.0"

__all__ = [
    "AccuracyTable",
    "DegenerateFitError",
    "DeltaFit",
    "DiagGaussian",
    "DimensionMismatchError",
    "ErrorModelConfig",
    "EstimatorSpec",
    "FlatObjectiveError",
    "InputError",
    "LearningCurve",
    "NnIndex",
    "NumericalError",
    "PcaProjection",
    "PointSet",
    "SamplexError",
    "SimulationSpec",
    "UniformBox",
    "build_index",
    "cell_side",
    "closed_form_error_1d_uniform",
    "estimate_curve",
    "estimate_error",
    "expected_nn_distance",
    "fit_delta",
    "fit_diag_gaussian",
    "fit_pca",
    "knn_accuracy",
    "nearest_distance",
    "pdf",
    "phi",
    "predict_curve",
    "project",
    "run_simulation",
    "sample",
    "select_effective_dim",
    "simulate_error_rate",
    "unit_cube_mean_norm",
]
