"""Minimal dense-network engine.

Everything trainable in the toolkit (codec encoders/decoders, leakage
estimator nets) is a plain MLP over 64-bit floats: batched row-major numpy
arrays, explicit forward/backward, and an Adam optimizer.  Keeping the
engine this small buys two properties the experiments depend on: training
is bit-reproducible from a seed, and every layer's backward pass is checked
against central finite differences in the test suite.

Activation vocabulary: ``linear``, ``relu``, terminal ``softmax`` (decoder
heads), and terminal ``power_norm`` which rescales each row to squared norm
``n*P`` so encoder outputs meet the average power constraint with equality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_FORMAT = "wiretapcodes-mlp-v1"

ACTIVATIONS = ("linear", "relu", "softmax", "power_norm")

# Stabilizer inside the power-norm square root on the training path only;
# the inference path normalizes exactly and rejects zero rows.
POWER_NORM_EPS = 1e-12

PROB_CLIP = 1e-30


class TrainingError(RuntimeError):
    """Raised when optimization produces non-finite losses or gradients."""


class DegenerateInputError(ValueError):
    """Raised when an exact power normalization meets an all-zero row."""


@dataclass
class Counters:
    """Warning counters for numerically clipped quantities."""

    prob_clips: int = 0

    def reset(self) -> None:
        self.prob_clips = 0


counters = Counters()


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str
    norm_energy: float | None = None  # n*P, set only for power_norm


@dataclass
class MlpModel:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("model needs at least one layer")
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
            if layer.activation in ("softmax", "power_norm") and i != len(self.layers) - 1:
                raise ValueError(f"{layer.activation} is only valid on the terminal layer")
            if layer.activation == "power_norm" and layer.norm_energy is None:
                raise ValueError("power_norm layer needs norm_energy")
            if i > 0 and self.layers[i - 1].weights.shape[1] != layer.weights.shape[0]:
                raise ValueError("layer dimensions do not chain")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    def parameters(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(layer.weights, layer.bias) for layer in self.layers]


@dataclass
class TrainConfig:
    """Budget for one training run; seed pins the whole trajectory."""

    epochs: int
    batch_size: int
    learning_rate: float
    messages_per_epoch: int
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "messages_per_epoch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def build_mlp(
    dims: Sequence[int],
    terminal: str,
    rng: np.random.Generator,
    norm_energy: float | None = None,
) -> MlpModel:
    """MLP with ReLU hidden layers and the given terminal activation.

    Weights are initialized uniformly in +-sqrt(6/(fan_in+fan_out)), biases
    at zero, drawn from ``rng`` so models are reproducible from a seed.
    """
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    layers = []
    last = len(dims) - 2
    for i, (fi, fo) in enumerate(zip(dims[:-1], dims[1:])):
        limit = np.sqrt(6.0 / (fi + fo))
        weights = rng.uniform(-limit, limit, size=(fi, fo))
        act = terminal if i == last else "relu"
        layers.append(
            Layer(
                weights=weights,
                bias=np.zeros(fo),
                activation=act,
                norm_energy=norm_energy if act == "power_norm" else None,
            )
        )
    return MlpModel(layers)


def one_hot(index: int, cardinality: int) -> np.ndarray:
    """Unit basis row vector of the given cardinality."""
    if not 0 <= index < cardinality:
        raise ValueError(f"index {index} out of range for cardinality {cardinality}")
    row = np.zeros((1, cardinality))
    row[0, index] = 1.0
    return row


def one_hot_rows(indices: np.ndarray, cardinality: int) -> np.ndarray:
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= cardinality):
        raise ValueError("message index out of range")
    rows = np.zeros((indices.shape[0], cardinality))
    rows[np.arange(indices.shape[0]), indices] = 1.0
    return rows


def power_normalize(x: np.ndarray, n: int, power: float) -> np.ndarray:
    """Rescale each row to squared Euclidean norm exactly n*power.

    This is the inference path (no stabilizer); an all-zero row has no
    normalization and raises ``DegenerateInputError``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != n:
        raise ValueError(f"expected rows of length {n}, got {x.shape[1]}")
    s = np.sum(x * x, axis=1, keepdims=True)
    if np.any(s == 0.0):
        raise DegenerateInputError("cannot power-normalize an all-zero vector")
    return x * np.sqrt(n * power / s)


def softmax(pre: np.ndarray) -> np.ndarray:
    z = pre - pre.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(model: MlpModel, x: np.ndarray, train: bool = False):
    """Run the network; returns (output, cache) for a later backward pass.

    ``train=True`` selects the stabilized power-norm path that tolerates
    near-zero rows during optimization.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"input must be (batch, {model.input_dim}), got {x.shape}")
    steps = []
    out = x
    for layer in model.layers:
        x_in = out
        pre = x_in @ layer.weights + layer.bias
        aux = None
        if layer.activation == "linear":
            out = pre
        elif layer.activation == "relu":
            out = np.maximum(pre, 0.0)
        elif layer.activation == "softmax":
            out = softmax(pre)
        elif layer.activation == "power_norm":
            s = np.sum(pre * pre, axis=1, keepdims=True)
            if train:
                scale = np.sqrt(layer.norm_energy / (s + POWER_NORM_EPS))
            else:
                if np.any(s == 0.0):
                    raise DegenerateInputError("encoder emitted an all-zero row")
                scale = np.sqrt(layer.norm_energy / s)
            out = pre * scale
            aux = (s, scale)
        steps.append((x_in, pre, aux))
    cache = {"steps": steps, "train": train, "batch": x.shape[0]}
    return out, cache


def backward(model: MlpModel, cache: dict, upstream: np.ndarray):
    """Backpropagate; returns (per-layer (dW, db) list, gradient wrt input).

    ``upstream`` is the loss gradient with respect to the model output,
    except for a softmax terminal where it must be the gradient with respect
    to the terminal pre-activation (the softmax/cross-entropy composite from
    ``cross_entropy``), which is the only way softmax is consumed here.
    """
    steps = cache["steps"]
    if len(steps) != len(model.layers):
        raise ValueError("cache does not match model (stale cache?)")
    grads = [None] * len(model.layers)
    d = np.asarray(upstream, dtype=float)
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        x_in, pre, aux = steps[i]
        if d.shape != pre.shape:
            raise ValueError("upstream gradient shape does not match cache (stale cache?)")
        if layer.activation in ("linear", "softmax"):
            dpre = d  # softmax: upstream already at logits
        elif layer.activation == "relu":
            dpre = d * (pre > 0.0)
        elif layer.activation == "power_norm":
            s, scale = aux
            dot = np.sum(d * pre, axis=1, keepdims=True)
            dpre = scale * (d - pre * dot / (s + POWER_NORM_EPS))
        grads[i] = (x_in.T @ dpre, dpre.sum(axis=0))
        d = dpre @ layer.weights.T
    return grads, d


def cross_entropy(probs: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood and its gradient at the logits.

    Returns (loss, dlogits) where dlogits = (probs - onehot)/batch, the
    closed-form gradient of the softmax/cross-entropy composite.  Label
    probabilities below 1e-30 are clipped and counted in
    ``counters.prob_clips``.
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    batch = probs.shape[0]
    p = probs[np.arange(batch), labels]
    n_clipped = int(np.count_nonzero(p < PROB_CLIP))
    if n_clipped:
        counters.prob_clips += n_clipped
    loss = float(-np.mean(np.log(np.maximum(p, PROB_CLIP))))
    dlogits = probs.copy()
    dlogits[np.arange(batch), labels] -= 1.0
    dlogits /= batch
    return loss, dlogits


@dataclass
class AdamState:
    """Adaptive-moment optimizer state for one model."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_adam(model: MlpModel, learning_rate: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(learning_rate, beta1, beta2, eps)
    for w, b in model.parameters():
        state.m.append((np.zeros_like(w), np.zeros_like(b)))
        state.v.append((np.zeros_like(w), np.zeros_like(b)))
    return state


def adam_step(model: MlpModel, grads: list, state: AdamState, context: str = "") -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for (w, b), (gw, gb), mom, sec in zip(model.parameters(), grads, state.m, state.v):
        for param, g, m, v in ((w, gw, mom[0], sec[0]), (b, gb, mom[1], sec[1])):
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient{': ' + context if context else ''}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            param -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)


def _layer_doc(layer: Layer) -> dict:
    doc = {
        "activation": layer.activation,
        "rows": int(layer.weights.shape[0]),
        "cols": int(layer.weights.shape[1]),
        "weights": layer.weights.reshape(-1).tolist(),
        "bias": layer.bias.tolist(),
    }
    if layer.norm_energy is not None:
        doc["norm_energy"] = float(layer.norm_energy)
    return doc


def save_checkpoint(
    path: str | Path,
    model: MlpModel,
    optimizer: AdamState | None = None,
    rng_seed: int | None = None,
    metadata: dict | None = None,
) -> None:
    """Serialize a model (and optimizer constants) to a JSON checkpoint.

    Floats round-trip exactly through JSON in Python, so load(save(m))
    reproduces weights bit for bit.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "input_dim": model.input_dim,
        "layers": [_layer_doc(layer) for layer in model.layers],
        "optimizer": None
        if optimizer is None
        else {
            "algorithm": "adam",
            "learning_rate": optimizer.learning_rate,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
        },
        "rng_seed": rng_seed,
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_checkpoint(path: str | Path) -> tuple[MlpModel, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format: {doc.get('format')!r}")
    layers = []
    for spec in doc["layers"]:
        weights = np.array(spec["weights"], dtype=float).reshape(spec["rows"], spec["cols"])
        layers.append(
            Layer(
                weights=weights,
                bias=np.array(spec["bias"], dtype=float),
                activation=spec["activation"],
                norm_energy=spec.get("norm_energy"),
            )
        )
    return MlpModel(layers), doc
