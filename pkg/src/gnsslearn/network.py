"""Small multilayer perceptron with manual forward/backward and Adam.

Three head flavors share one layer stack: a bias head (linear output scaled
to meters), a weight head (sigmoid output in (0, 1)), and a joint head
emitting both. Gradients are computed by hand; no autodiff framework is
involved anywhere in the package.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, MalformedCheckpoint, VersionMismatch
from .observations import SatelliteObservation

CHECKPOINT_FORMAT_VERSION = 1

ARCH_BIAS = "bias"
ARCH_WEIGHT = "weight"
ARCH_JOINT = "joint"
ARCHITECTURES = (ARCH_BIAS, ARCH_WEIGHT, ARCH_JOINT)

DEFAULT_HIDDEN_DIMS = (64, 128)
BIAS_OUTPUT_SCALE = 100.0  # meters per unit of raw network output


@dataclass(frozen=True)
class FeatureScaling:
    """Fixed affine scaling applied to the raw per-satellite features."""

    cn0_divisor: float = 50.0
    elevation_divisor: float = math.pi / 2.0
    residual_divisor: float = 100.0


def featurize(obs: SatelliteObservation, residual: float, scaling: FeatureScaling = FeatureScaling()) -> np.ndarray:
    """Scaled feature triple (C/N0, elevation, equal-weight residual)."""
    return np.array(
        [
            obs.cn0 / scaling.cn0_divisor,
            obs.elevation / scaling.elevation_divisor,
            residual / scaling.residual_divisor,
        ]
    )


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activate_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


def _head_spec(architecture: str) -> tuple[list[str], list[float]]:
    """Per-output-unit activation names and scale factors."""
    if architecture == ARCH_BIAS:
        return ["linear"], [BIAS_OUTPUT_SCALE]
    if architecture == ARCH_WEIGHT:
        return ["sigmoid"], [1.0]
    if architecture == ARCH_JOINT:
        return ["linear", "sigmoid"], [BIAS_OUTPUT_SCALE, 1.0]
    raise ValueError(f"unknown architecture {architecture!r}")


class MlpModel:
    """Fully connected network: input features -> hidden stack -> head(s).

    The weight-head net uses sigmoid hidden activations; the other two use
    ReLU. The bias output is linear (a ReLU output would forbid negative
    corrections and trap gradients) and scaled so the raw network works in
    roughly unit range.
    """

    def __init__(
        self,
        architecture: str,
        layer_dims: list[int],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        feature_scaling: FeatureScaling = FeatureScaling(),
    ):
        if architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {architecture!r}")
        expected_out = 2 if architecture == ARCH_JOINT else 1
        if layer_dims[-1] != expected_out:
            raise DimensionMismatch(f"{architecture} head needs {expected_out} outputs, got {layer_dims[-1]}")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_dims[i + 1], layer_dims[i]) or b.shape != (layer_dims[i + 1],):
                raise DimensionMismatch(f"layer {i} parameter shapes do not match dims {layer_dims}")
        self.architecture = architecture
        self.layer_dims = list(layer_dims)
        self.weights = weights
        self.biases = biases
        self.feature_scaling = feature_scaling
        self.hidden_activation = "sigmoid" if architecture == ARCH_WEIGHT else "relu"
        self.output_activations, self.output_scales = _head_spec(architecture)

    @classmethod
    def create(
        cls,
        architecture: str,
        hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN_DIMS,
        seed: int = 0,
        feature_scaling: FeatureScaling = FeatureScaling(),
    ) -> "MlpModel":
        """Glorot-uniform initialized model with a fixed seed."""
        out_dim = 2 if architecture == ARCH_JOINT else 1
        dims = [3, *hidden_dims, out_dim]
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(architecture, dims, weights, biases, feature_scaling)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpModel":
        """Deep snapshot; safe for concurrent read-only evaluation."""
        return MlpModel(
            self.architecture,
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.feature_scaling,
        )

    def featurize_epoch(self, observations, residuals) -> np.ndarray:
        return np.array([featurize(o, r, self.feature_scaling) for o, r in zip(observations, residuals)])

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Batched forward pass; returns (outputs, cache for backward).

        Outputs shape (n, out_dim): the bias column is in meters, the weight
        column strictly inside (0, 1).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.layer_dims[0]:
            raise DimensionMismatch(f"expected {self.layer_dims[0]} features, got {x.shape[1]}")
        cache = []
        a = x
        for layer in range(self.n_layers - 1):
            z = a @ self.weights[layer].T + self.biases[layer]
            cache.append((a, z))
            a = _activate(self.hidden_activation, z)
        z = a @ self.weights[-1].T + self.biases[-1]
        cache.append((a, z))
        out = np.empty_like(z)
        for j, (act, scale) in enumerate(zip(self.output_activations, self.output_scales)):
            out[:, j] = _activate(act, z[:, j]) * scale
        return out, cache

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list, d_out: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Exact reverse-mode gradients of all parameters.

        d_out is the upstream gradient w.r.t. the scaled head outputs, shape
        (n, out_dim); for the joint head the two columns accumulate into the
        shared layers. Returns [(dW, db), ...] in layer order.
        """
        d_out = np.atleast_2d(np.asarray(d_out, dtype=float))
        a_last, z_last = cache[-1]
        if d_out.shape != z_last.shape:
            raise DimensionMismatch(f"upstream gradient shape {d_out.shape} != output shape {z_last.shape}")
        dz = np.empty_like(z_last)
        for j, (act, scale) in enumerate(zip(self.output_activations, self.output_scales)):
            dz[:, j] = d_out[:, j] * scale * _activate_grad(act, z_last[:, j])
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * self.n_layers
        for layer in range(self.n_layers - 1, -1, -1):
            a_in, _ = cache[layer]
            grads[layer] = (dz.T @ a_in, dz.sum(axis=0))
            if layer > 0:
                da = dz @ self.weights[layer]
                dz = da * _activate_grad(self.hidden_activation, cache[layer - 1][1])
        return grads


@dataclass
class AdamState:
    """Moment accumulators and hyperparameters of the Adam optimizer."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_model(cls, model: MlpModel, learning_rate: float = 0.001) -> "AdamState":
        state = cls(learning_rate=learning_rate)
        for w, b in zip(model.weights, model.biases):
            state.m.append((np.zeros_like(w), np.zeros_like(b)))
            state.v.append((np.zeros_like(w), np.zeros_like(b)))
        return state


def adam_step(model: MlpModel, grads: list[tuple[np.ndarray, np.ndarray]], state: AdamState) -> None:
    """In-place bias-corrected Adam update of the model parameters."""
    if len(grads) != model.n_layers:
        raise DimensionMismatch(f"expected {model.n_layers} gradient pairs, got {len(grads)}")
    state.step += 1
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for layer, (dw, db) in enumerate(grads):
        params = (model.weights[layer], model.biases[layer])
        for slot, (param, grad) in enumerate(zip(params, (dw, db))):
            if param.shape != grad.shape:
                raise DimensionMismatch(f"gradient shape {grad.shape} != parameter shape {param.shape}")
            m = state.m[layer][slot]
            v = state.v[layer][slot]
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad * grad
            param -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + eps)


def save_model(model: MlpModel, path: str) -> None:
    """Write a self-describing JSON checkpoint with full float precision."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "architecture": model.architecture,
        "layer_dims": model.layer_dims,
        "hidden_activation": model.hidden_activation,
        "output_activations": model.output_activations,
        "output_scales": model.output_scales,
        "feature_scaling": {
            "cn0_divisor": model.feature_scaling.cn0_divisor,
            "elevation_divisor": model.feature_scaling.elevation_divisor,
            "residual_divisor": model.feature_scaling.residual_divisor,
        },
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str) -> MlpModel:
    """Load a checkpoint; outputs reproduce the saved model bit for bit."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedCheckpoint(f"cannot parse checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedCheckpoint(f"checkpoint {path} is not a JSON object")
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise VersionMismatch(f"unsupported checkpoint format_version {version!r}")
    try:
        architecture = doc["architecture"]
        layer_dims = [int(d) for d in doc["layer_dims"]]
        scaling = FeatureScaling(
            cn0_divisor=float(doc["feature_scaling"]["cn0_divisor"]),
            elevation_divisor=float(doc["feature_scaling"]["elevation_divisor"]),
            residual_divisor=float(doc["feature_scaling"]["residual_divisor"]),
        )
        weights = [np.array(w, dtype=float) for w in doc["weights"]]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedCheckpoint(f"checkpoint {path} is missing or corrupts required fields: {exc}") from exc
    if architecture not in ARCHITECTURES:
        raise VersionMismatch(f"unknown architecture tag {architecture!r}")
    expected_out = 2 if architecture == ARCH_JOINT else 1
    if layer_dims[-1] != expected_out:
        raise VersionMismatch(
            f"architecture {architecture!r} is inconsistent with output dimension {layer_dims[-1]}"
        )
    if len(weights) != len(layer_dims) - 1 or len(biases) != len(weights):
        raise MalformedCheckpoint(f"checkpoint {path} layer count does not match layer_dims")
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.ndim != 2 or w.shape != (layer_dims[i + 1], layer_dims[i]) or b.shape != (layer_dims[i + 1],):
            raise MalformedCheckpoint(f"checkpoint {path} layer {i} arrays do not match layer_dims")
    return MlpModel(architecture, layer_dims, weights, biases, scaling)
