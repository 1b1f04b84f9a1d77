"""Scikit-learn style estimator facade.

X is a sequence of Epoch objects rather than a numeric matrix; fitting
requires epochs that carry a ground-truth position. predict returns ECEF
positions, one row per epoch, with NaN rows for epochs that could not be
solved. Both estimators round-trip through get_params/set_params/clone.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import ConfigInvalid
from .network import MlpModel
from .pipeline import (
    BASELINE_METHODS,
    BATCH_PER_EPOCH,
    EvalConfig,
    MODE_TO_ARCH,
    TDL_METHODS,
    TrainConfig,
    evaluate_epoch,
    train,
)
from .solver import SolverConfig
from .validation import as_epoch_list


def _predict_positions(method: str, epochs, cfg: EvalConfig) -> np.ndarray:
    out = np.full((len(epochs), 3), np.nan)
    for i, epoch in enumerate(epochs):
        outcome = evaluate_epoch([method], epoch, cfg)[method]
        if outcome.state is not None:
            out[i] = outcome.state.to_array()[:3]
    return out


class WlsPositioner(BaseEstimator):
    """Classical weighted least-squares positioning with a fixed weighting rule.

    Parameters
    ----------
    method : one of "equal", "rtklib", "gogps".
    elevation_mask : radians; satellites at or below it get zero weight.
    """

    def __init__(self, method: str = "equal", elevation_mask: float = np.radians(5.0),
                 max_iterations: int = 20, step_tolerance: float = 1e-4):
        self.method = method
        self.elevation_mask = elevation_mask
        self.max_iterations = max_iterations
        self.step_tolerance = step_tolerance

    def _eval_config(self) -> EvalConfig:
        if self.method not in BASELINE_METHODS:
            raise ConfigInvalid(f"method must be one of {BASELINE_METHODS}, got {self.method!r}")
        solver = SolverConfig(max_iterations=self.max_iterations, step_tolerance=self.step_tolerance)
        return EvalConfig(solver=solver, elevation_mask=self.elevation_mask)

    def fit(self, X, y=None):
        """No parameters are learned; validates input and marks fitted."""
        as_epoch_list(X)
        self._eval_config()
        self.is_fitted_ = True
        return self

    def predict(self, X) -> np.ndarray:
        """(n_epochs, 3) ECEF positions; NaN rows for unsolvable epochs."""
        check_is_fitted(self)
        epochs = as_epoch_list(X)
        return _predict_positions(self.method, epochs, self._eval_config())


class TdlPositioner(BaseEstimator):
    """Positioner with a learned bias and/or weight network in the solve loop.

    mode selects the head: "tdl-b" corrects pseudoranges, "tdl-w" predicts
    weights, "tdl-bw" does both. fit trains the network on epochs with
    ground truth; predict solves with the trained network in the loop.
    """

    def __init__(
        self,
        mode: str = "tdl-bw",
        epochs_count: int | None = None,
        learning_rate: float = 0.001,
        seed: int = 0,
        batch_mode: str = BATCH_PER_EPOCH,
        hidden_dims: tuple[int, ...] = (64, 128),
        enable_fallback: bool = True,
        max_iterations: int = 20,
        step_tolerance: float = 1e-4,
    ):
        self.mode = mode
        self.epochs_count = epochs_count
        self.learning_rate = learning_rate
        self.seed = seed
        self.batch_mode = batch_mode
        self.hidden_dims = hidden_dims
        self.enable_fallback = enable_fallback
        self.max_iterations = max_iterations
        self.step_tolerance = step_tolerance

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(max_iterations=self.max_iterations, step_tolerance=self.step_tolerance)

    def fit(self, X, y=None):
        """Train the network on epochs carrying ground-truth positions."""
        if self.mode not in TDL_METHODS:
            raise ConfigInvalid(f"mode must be one of {TDL_METHODS}, got {self.mode!r}")
        cfg = TrainConfig(
            mode=self.mode,
            epochs_count=self.epochs_count,
            learning_rate=self.learning_rate,
            seed=self.seed,
            batch_mode=self.batch_mode,
            hidden_dims=tuple(self.hidden_dims),
            solver=self._solver_config(),
        )
        self.model_, self.training_log_ = train(X, cfg)
        return self

    def predict(self, X) -> np.ndarray:
        """(n_epochs, 3) ECEF positions using the trained network."""
        check_is_fitted(self, "model_")
        epochs = as_epoch_list(X)
        cfg = EvalConfig(
            solver=self._solver_config(),
            models={self.mode: self.model_},
            enable_fallback=self.enable_fallback,
        )
        return _predict_positions(self.mode, epochs, cfg)

    def set_model(self, model: MlpModel) -> "TdlPositioner":
        """Adopt a pre-trained network (e.g. loaded from a checkpoint)."""
        expected = MODE_TO_ARCH[self.mode] if self.mode in MODE_TO_ARCH else None
        if model.architecture != expected:
            raise ConfigInvalid(
                f"checkpoint architecture {model.architecture!r} does not serve mode {self.mode!r}"
            )
        self.model_ = model
        self.training_log_ = None
        return self
