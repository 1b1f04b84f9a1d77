"""Training and evaluation orchestration.

Training couples the network to the solver: per data epoch, features come
from an equal-weight solve whose solution also warm-starts the weighted
solve, the position loss is chained back through the solver sensitivities
into the network, and Adam updates the parameters. Evaluation compares the
learned methods against classical weighting baselines with ENU error
metrics.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigInvalid,
    InsufficientSatellites,
    IoFailure,
    MissingCheckpoint,
    NoSolvableEpochs,
    SingularNormalMatrix,
)
from .geodesy import ecef_to_enu
from .gradients import backprop_to_measurements, backprop_to_weights, position_loss, wls_sensitivities
from .network import (
    ARCH_BIAS,
    ARCH_JOINT,
    ARCH_WEIGHT,
    AdamState,
    FeatureScaling,
    MlpModel,
    adam_step,
    featurize,
)
from .observations import Epoch, PositionState, SolveResult
from .solver import SolverConfig, solve_equal_weight, solve_wls
from .validation import as_epoch_list
from .weighting import Cn0WeightParams, ElevationWeightParams, gogps_weight, rtklib_weight

log = logging.getLogger(__name__)

METHOD_EQUAL = "equal"
METHOD_RTKLIB = "rtklib"
METHOD_GOGPS = "gogps"
METHOD_TDL_B = "tdl-b"
METHOD_TDL_W = "tdl-w"
METHOD_TDL_BW = "tdl-bw"
BASELINE_METHODS = (METHOD_EQUAL, METHOD_RTKLIB, METHOD_GOGPS)
TDL_METHODS = (METHOD_TDL_B, METHOD_TDL_W, METHOD_TDL_BW)
ALL_METHODS = BASELINE_METHODS + TDL_METHODS

MODE_TO_ARCH = {METHOD_TDL_B: ARCH_BIAS, METHOD_TDL_W: ARCH_WEIGHT, METHOD_TDL_BW: ARCH_JOINT}
ARCH_TO_MODE = {v: k for k, v in MODE_TO_ARCH.items()}
DEFAULT_TRAIN_EPOCHS = {METHOD_TDL_B: 500, METHOD_TDL_W: 500, METHOD_TDL_BW: 100}

FALLBACK_WEIGHT_FLOOR = 1e-6  # joint solve deemed unreliable below 4 such weights

BATCH_PER_EPOCH = "per-epoch"
BATCH_FULL = "full"


@dataclass(frozen=True)
class TrainConfig:
    mode: str = METHOD_TDL_BW
    epochs_count: int | None = None  # None picks the per-mode default
    learning_rate: float = 0.001
    seed: int = 0
    batch_mode: str = BATCH_PER_EPOCH
    hidden_dims: tuple[int, ...] = (64, 128)
    solver: SolverConfig = SolverConfig()
    log_every: int = 0

    def resolved_epochs(self) -> int:
        n = DEFAULT_TRAIN_EPOCHS[self.mode] if self.epochs_count is None else self.epochs_count
        if n < 1:
            raise ConfigInvalid("epochs_count must be >= 1")
        return n

    def validate(self) -> None:
        if self.mode not in TDL_METHODS:
            raise ConfigInvalid(f"unknown training mode {self.mode!r}")
        if self.learning_rate < 0:
            raise ConfigInvalid("learning_rate must be nonnegative")
        if self.batch_mode not in (BATCH_PER_EPOCH, BATCH_FULL):
            raise ConfigInvalid(f"unknown batch_mode {self.batch_mode!r}")
        self.resolved_epochs()


@dataclass(frozen=True)
class EvalConfig:
    solver: SolverConfig = SolverConfig()
    elevation_mask: float = math.radians(5.0)
    elevation_params: ElevationWeightParams = ElevationWeightParams()
    cn0_params: Cn0WeightParams = Cn0WeightParams()
    models: dict = field(default_factory=dict)  # method name -> MlpModel
    enable_fallback: bool = True
    threads: int | None = 1


@dataclass
class PreparedEpoch:
    """Equal-weight solve products reused by every downstream method."""

    epoch: Epoch
    features: np.ndarray  # (n, 3) scaled feature rows
    warm_start: PositionState
    ew_result: SolveResult


@dataclass
class TrainingLog:
    """Mean position loss per training epoch plus skip accounting."""

    losses: list[float] = field(default_factory=list)
    prep_skipped: int = 0
    nonconverged_steps: int = 0

    def save(self, path: str) -> None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("epoch,mean_loss_m2\n")
                for i, loss in enumerate(self.losses, start=1):
                    fh.write(f"{i},{loss!r}\n")
        except OSError as exc:
            raise IoFailure(f"cannot write training log {path}: {exc}") from exc


@dataclass
class MethodResult:
    method: str
    errors_2d: list[float]  # per epoch, NaN when skipped
    errors_3d: list[float]
    epochs_used: int
    epochs_skipped: int
    fallbacks: int

    @property
    def mean_2d(self) -> float:
        return _mean_ignoring_nan(self.errors_2d)

    @property
    def mean_3d(self) -> float:
        return _mean_ignoring_nan(self.errors_3d)

    @property
    def std_3d(self) -> float:
        vals = [e for e in self.errors_3d if not math.isnan(e)]
        return float(np.std(vals)) if vals else float("nan")


@dataclass
class EvalReport:
    methods: list[str]
    results: dict[str, MethodResult]
    epoch_times: list[float]

    @property
    def total_epochs(self) -> int:
        return len(self.epoch_times)


def _mean_ignoring_nan(values: list[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def prepare_epoch(
    epoch: Epoch,
    cfg: SolverConfig = SolverConfig(),
    scaling: FeatureScaling = FeatureScaling(),
) -> PreparedEpoch:
    """Equal-weight solve, feature rows from its residuals, and warm start."""
    ew = solve_equal_weight(epoch, cfg)
    features = np.array(
        [featurize(o, r, scaling) for o, r in zip(epoch.observations, ew.residuals)]
    )
    return PreparedEpoch(epoch=epoch, features=features, warm_start=ew.state, ew_result=ew)


def _model_outputs(model: MlpModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray | None, list]:
    """Forward pass mapped onto (weights, corrections) for the solver."""
    out, cache = model.forward(features)
    n = out.shape[0]
    if model.architecture == ARCH_BIAS:
        return np.ones(n), out[:, 0], cache
    if model.architecture == ARCH_WEIGHT:
        return out[:, 0], None, cache
    return out[:, 1], out[:, 0], cache


def _training_step(model: MlpModel, prep: PreparedEpoch, cfg: SolverConfig):
    """One loss evaluation and its parameter gradients; None when skipped."""
    weights, corrections, cache = _model_outputs(model, prep.features)
    try:
        result = solve_wls(prep.epoch, weights, corrections, y0=prep.warm_start, cfg=cfg)
    except (InsufficientSatellites, SingularNormalMatrix):
        return None, None
    if not result.converged:
        return None, None
    loss, d_loss_d_y = position_loss(prep.epoch.truth_pos, result)
    bundle = wls_sensitivities(result, weights, cfg.condition_limit)
    bundle.loss = loss
    d_out = np.zeros((len(prep.epoch), len(model.output_activations)))
    if model.architecture in (ARCH_BIAS, ARCH_JOINT):
        bundle.d_loss_d_z = backprop_to_measurements(bundle, d_loss_d_y)
        # corrections are subtracted from the measurements, hence the sign flip
        d_out[:, 0] = -bundle.d_loss_d_z
    if model.architecture in (ARCH_WEIGHT, ARCH_JOINT):
        bundle.d_loss_d_w = backprop_to_weights(bundle, d_loss_d_y)
        d_out[:, 1 if model.architecture == ARCH_JOINT else 0] = bundle.d_loss_d_w
    return loss, model.backward(cache, d_out)


def _accumulate(total: list | None, grads: list) -> list:
    if total is None:
        return [(dw.copy(), db.copy()) for dw, db in grads]
    for (tw, tb), (dw, db) in zip(total, grads):
        tw += dw
        tb += db
    return total


def train(train_data, cfg: TrainConfig = TrainConfig()) -> tuple[MlpModel, TrainingLog]:
    """Fit a network of the configured mode on epochs with ground truth."""
    cfg.validate()
    epochs = as_epoch_list(train_data, require_truth=True)
    model = MlpModel.create(MODE_TO_ARCH[cfg.mode], hidden_dims=cfg.hidden_dims, seed=cfg.seed)
    adam = AdamState.for_model(model, cfg.learning_rate)
    training_log = TrainingLog()

    prepared: list[PreparedEpoch] = []
    for epoch in epochs:
        try:
            prep = prepare_epoch(epoch, cfg.solver, model.feature_scaling)
        except (InsufficientSatellites, SingularNormalMatrix):
            training_log.prep_skipped += 1
            continue
        if not prep.ew_result.converged:
            training_log.prep_skipped += 1
            continue
        prepared.append(prep)
    if not prepared:
        raise NoSolvableEpochs("no epoch is solvable at equal weights")

    n_train_epochs = cfg.resolved_epochs()
    for train_epoch in range(1, n_train_epochs + 1):
        epoch_losses = []
        batch_grads = None
        for prep in prepared:
            loss, grads = _training_step(model, prep, cfg.solver)
            if loss is None:
                training_log.nonconverged_steps += 1
                continue
            epoch_losses.append(loss)
            if cfg.batch_mode == BATCH_PER_EPOCH:
                adam_step(model, grads, adam)
            else:
                batch_grads = _accumulate(batch_grads, grads)
        if cfg.batch_mode == BATCH_FULL and batch_grads is not None:
            scale = 1.0 / max(len(epoch_losses), 1)
            adam_step(model, [(dw * scale, db * scale) for dw, db in batch_grads], adam)
        mean_loss = float(np.mean(epoch_losses)) if epoch_losses else float("nan")
        training_log.losses.append(mean_loss)
        if cfg.log_every and train_epoch % cfg.log_every == 0:
            log.info("training epoch %d/%d mean loss %.4f m^2", train_epoch, n_train_epochs, mean_loss)
    return model, training_log


def _baseline_weights(method: str, epoch: Epoch, cfg: EvalConfig) -> np.ndarray:
    """Classical weights with the elevation mask applied as zero weight."""
    w = np.zeros(len(epoch))
    for k, obs in enumerate(epoch.observations):
        if obs.elevation <= cfg.elevation_mask:
            continue
        if method == METHOD_RTKLIB:
            w[k] = rtklib_weight(obs.elevation, cfg.elevation_params)
        else:
            w[k] = gogps_weight(obs.cn0, obs.elevation, cfg.cn0_params)
    return w


@dataclass
class EpochOutcome:
    converged: bool = False
    error_2d: float = float("nan")
    error_3d: float = float("nan")
    fallback_used: bool = False
    state: PositionState | None = None
    iterations: int = 0


def method_inputs(method: str, prep: PreparedEpoch, cfg: EvalConfig) -> tuple[np.ndarray, np.ndarray | None]:
    """(weights, corrections) a method feeds into the solver for one epoch."""
    epoch = prep.epoch
    if method == METHOD_EQUAL:
        return np.ones(len(epoch)), None
    if method in (METHOD_RTKLIB, METHOD_GOGPS):
        return _baseline_weights(method, epoch, cfg), None
    model = cfg.models.get(method)
    if model is None:
        raise MissingCheckpoint(f"method {method} needs a checkpoint (--checkpoint)")
    features = model.featurize_epoch(epoch.observations, prep.ew_result.residuals)
    weights, corrections, _ = _model_outputs(model, features)
    return weights, corrections


def _solve_method(method: str, prep: PreparedEpoch, cfg: EvalConfig) -> EpochOutcome:
    epoch = prep.epoch
    outcome = EpochOutcome()
    weights, corrections = method_inputs(method, prep, cfg)

    result = None
    if method == METHOD_EQUAL:
        result = prep.ew_result
    else:
        unreliable = (
            method == METHOD_TDL_BW
            and int(np.count_nonzero(weights > FALLBACK_WEIGHT_FLOOR)) < cfg.solver.min_satellites
        )
        if unreliable and cfg.enable_fallback:
            weights = np.ones(len(epoch))
            outcome.fallback_used = True
        try:
            result = solve_wls(epoch, weights, corrections, y0=prep.warm_start, cfg=cfg.solver)
        except (InsufficientSatellites, SingularNormalMatrix):
            return outcome
    if not result.converged:
        return outcome

    outcome.converged = True
    outcome.state = result.state
    outcome.iterations = result.iterations
    if epoch.truth_pos is not None:
        enu = ecef_to_enu(result.state.position(), epoch.truth_pos)
        outcome.error_2d = enu.horizontal_norm()
        outcome.error_3d = enu.norm()
    return outcome


def evaluate_epoch(methods: list[str], epoch: Epoch, cfg: EvalConfig) -> dict[str, EpochOutcome]:
    """All requested methods on one epoch; every method skipped when the
    equal-weight preparation itself fails."""
    try:
        prep = prepare_epoch(epoch, cfg.solver)
    except (InsufficientSatellites, SingularNormalMatrix):
        return {m: EpochOutcome() for m in methods}
    if not prep.ew_result.converged:
        return {m: EpochOutcome() for m in methods}
    return {m: _solve_method(m, prep, cfg) for m in methods}


def evaluate(methods: list[str], test_data, cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Solve every epoch with every method and aggregate ENU error stats.

    Means cover converged epochs only; skips and joint-head fallbacks are
    counted per method. Epochs are processed in parallel when cfg.threads
    allows, with a fixed reduction order so reports are thread-count
    invariant.
    """
    for method in methods:
        if method not in ALL_METHODS:
            raise ConfigInvalid(f"unknown method {method!r}")
        if method in TDL_METHODS and method not in cfg.models:
            raise MissingCheckpoint(f"method {method} needs a checkpoint (--checkpoint)")
    epochs = as_epoch_list(test_data, require_truth=True)

    def worker(epoch):
        return evaluate_epoch(methods, epoch, cfg)

    if cfg.threads is not None and cfg.threads <= 1:
        per_epoch = [worker(e) for e in epochs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            per_epoch = list(pool.map(worker, epochs))

    results: dict[str, MethodResult] = {}
    for method in methods:
        outcomes = [per_epoch[i][method] for i in range(len(epochs))]
        results[method] = MethodResult(
            method=method,
            errors_2d=[o.error_2d for o in outcomes],
            errors_3d=[o.error_3d for o in outcomes],
            epochs_used=sum(1 for o in outcomes if o.converged),
            epochs_skipped=sum(1 for o in outcomes if not o.converged),
            fallbacks=sum(1 for o in outcomes if o.fallback_used),
        )
    return EvalReport(methods=list(methods), results=results, epoch_times=[e.t for e in epochs])


def solve_series(method: str, test_data, cfg: EvalConfig = EvalConfig()) -> list[dict]:
    """Per-epoch solution records for one method, in dataset order."""
    if method not in ALL_METHODS:
        raise ConfigInvalid(f"unknown method {method!r}")
    if method in TDL_METHODS and method not in cfg.models:
        raise MissingCheckpoint(f"method {method} needs a checkpoint (--checkpoint)")
    records = []
    for i, epoch in enumerate(as_epoch_list(test_data)):
        outcome = evaluate_epoch([method], epoch, cfg)[method]
        rec = {
            "epoch_index": i,
            "t": epoch.t,
            "method": method,
            "converged": outcome.converged,
            "position_ecef_m": None if outcome.state is None else list(outcome.state.to_array()[:3]),
            "clock_m": None if outcome.state is None else outcome.state.clock,
            "iterations": outcome.iterations,
            "fallback_used": outcome.fallback_used,
        }
        if epoch.truth_pos is not None and outcome.converged:
            rec["err2d_m"] = outcome.error_2d
            rec["err3d_m"] = outcome.error_3d
        records.append(rec)
    return records


def inspect_epoch(model: MlpModel, epoch: Epoch, cfg: EvalConfig = EvalConfig()) -> list[dict]:
    """Per-satellite predicted weight/bias table, sorted by weight descending."""
    prep = prepare_epoch(epoch, cfg.solver, model.feature_scaling)
    features = model.featurize_epoch(epoch.observations, prep.ew_result.residuals)
    weights, corrections, _ = _model_outputs(model, features)
    rows = []
    for k, obs in enumerate(epoch.observations):
        rows.append(
            {
                "sat_id": obs.sat_id,
                "weight": float(weights[k]),
                "bias_m": 0.0 if corrections is None else float(corrections[k]),
                "cn0": obs.cn0,
                "elevation": obs.elevation,
                "los_truth": obs.los_truth,
            }
        )
    rows.sort(key=lambda r: (-r["weight"], r["sat_id"]))
    return rows


REPORT_COLUMNS = ("method", "mean2d_m", "mean3d_m", "std3d_m", "epochs_used", "epochs_skipped", "fallbacks")


def _report_row(res: MethodResult) -> list:
    return [res.method, res.mean_2d, res.mean_3d, res.std_3d, res.epochs_used, res.epochs_skipped, res.fallbacks]


def export_report(report: EvalReport, path: str, fmt: str = "csv", series_path: str | None = None) -> None:
    """Write the aggregate table (csv or jsonl) and optionally the per-epoch
    error series; floats keep full round-trip precision."""
    if fmt not in ("csv", "jsonl"):
        raise ConfigInvalid(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            if fmt == "csv":
                fh.write(",".join(REPORT_COLUMNS) + "\n")
                for method in report.methods:
                    row = _report_row(report.results[method])
                    fh.write(",".join(_cell(v) for v in row) + "\n")
            else:
                for method in report.methods:
                    row = _report_row(report.results[method])
                    fh.write(json.dumps(dict(zip(REPORT_COLUMNS, row)), separators=(",", ":")) + "\n")
        if series_path is not None:
            with open(series_path, "w", encoding="utf-8") as fh:
                fh.write("method,epoch_index,t,err2d_m,err3d_m\n")
                for method in report.methods:
                    res = report.results[method]
                    for i, t in enumerate(report.epoch_times):
                        fh.write(
                            f"{method},{i},{t!r},{res.errors_2d[i]!r},{res.errors_3d[i]!r}\n"
                        )
    except OSError as exc:
        raise IoFailure(f"cannot write report: {exc}") from exc


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
