"""Differentiable GNSS single-point positioning with learned weighting.

A Gauss-Newton pseudorange solver whose converged solution is differentiable
with respect to the measurements and the per-satellite weights, small
networks trained through those sensitivities to correct pseudorange biases
and/or predict weights, classical elevation- and C/N0-based weighting
baselines, and a synthetic urban-canyon scenario generator to train and
verify against.
"""

from .errors import (
    ConfigInvalid,
    DegenerateGeometry,
    DimensionMismatch,
    GnssLearnError,
    InsufficientSatellites,
    InvalidElevation,
    IoFailure,
    MalformedCheckpoint,
    MalformedDataset,
    MissingCheckpoint,
    NearSingularOrigin,
    NoSolvableEpochs,
    NotConverged,
    SingularNormalMatrix,
    VersionMismatch,
)
from .geodesy import (
    EcefPosition,
    EnuVector,
    GeodeticPosition,
    ecef_to_enu,
    ecef_to_geodetic,
    elevation_azimuth,
    enu_to_ecef,
    geodetic_to_ecef,
)
from .observations import (
    Epoch,
    GnssSystem,
    PositionState,
    SatelliteObservation,
    SolveResult,
    jacobian_row,
    predicted_pseudorange,
)
from .solver import SolverConfig, normal_equation_step, solve_equal_weight, solve_wls
from .gradients import (
    GradientBundle,
    backprop_to_measurements,
    backprop_to_weights,
    position_loss,
    wls_sensitivities,
)
from .network import (
    AdamState,
    FeatureScaling,
    MlpModel,
    adam_step,
    featurize,
    load_model,
    save_model,
)
from .weighting import Cn0WeightParams, ElevationWeightParams, gogps_weight, rtklib_weight
from .simulate import NlosBiasParams, PRESETS, ScenarioConfig, default_nlos_bias, generate_dataset
from .dataset import load_dataset, save_dataset
from .pipeline import (
    EvalConfig,
    EvalReport,
    TrainConfig,
    TrainingLog,
    evaluate,
    export_report,
    prepare_epoch,
    train,
)
from .estimators import TdlPositioner, WlsPositioner

__version__ = "0.1.0"

__all__ = [
    "GnssLearnError",
    "NearSingularOrigin",
    "DegenerateGeometry",
    "InsufficientSatellites",
    "SingularNormalMatrix",
    "NotConverged",
    "DimensionMismatch",
    "InvalidElevation",
    "MalformedCheckpoint",
    "MalformedDataset",
    "VersionMismatch",
    "ConfigInvalid",
    "MissingCheckpoint",
    "NoSolvableEpochs",
    "IoFailure",
    "EcefPosition",
    "GeodeticPosition",
    "EnuVector",
    "ecef_to_geodetic",
    "geodetic_to_ecef",
    "ecef_to_enu",
    "enu_to_ecef",
    "elevation_azimuth",
    "GnssSystem",
    "SatelliteObservation",
    "Epoch",
    "PositionState",
    "SolveResult",
    "predicted_pseudorange",
    "jacobian_row",
    "SolverConfig",
    "solve_wls",
    "solve_equal_weight",
    "normal_equation_step",
    "GradientBundle",
    "position_loss",
    "wls_sensitivities",
    "backprop_to_measurements",
    "backprop_to_weights",
    "FeatureScaling",
    "featurize",
    "MlpModel",
    "AdamState",
    "adam_step",
    "save_model",
    "load_model",
    "ElevationWeightParams",
    "Cn0WeightParams",
    "rtklib_weight",
    "gogps_weight",
    "ScenarioConfig",
    "NlosBiasParams",
    "PRESETS",
    "default_nlos_bias",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "TrainConfig",
    "TrainingLog",
    "EvalConfig",
    "EvalReport",
    "prepare_epoch",
    "train",
    "evaluate",
    "export_report",
    "WlsPositioner",
    "TdlPositioner",
    "__version__",
]
