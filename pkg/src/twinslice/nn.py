"""Trainable feedforward allocator.

A plain numpy MLP with ReLU hidden layers and a per-resource-block softmax
head: the output layer is reshaped to [num_rbs, num_users] and each row is
a categorical distribution over users for that block. Training imitates an
allocation oracle via per-block cross-entropy and mini-batch gradient
descent. No autodiff framework: gradients are hand-derived and guarded by
a finite-difference check.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    AllocationMatrix,
    QoSRequirement,
    ResourceGrid,
    ServiceClass,
    UserTerminal,
    canonical_users,
)
from .envsim import db_to_linear
from .twin import TwinSnapshot

WEIGHTS_FORMAT_VERSION = 1


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, z)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-shift for numerical stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class OutputTensor:
    """Per-block categorical user distributions; rows sum to one."""

    probs: np.ndarray  # [num_rbs, num_users]

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, copy=True)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise ValueError("probs must be a [num_rbs, num_users] matrix")


class MLP:
    """Feedforward net; parameters live in ``weights``/``biases`` lists.

    ``output_shape`` records how the flat output layer splits into
    (num_rbs, num_users) softmax rows.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        output_shape: tuple[int, int],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
    ):
        rbs, users = output_shape
        if rbs * users != layer_sizes[-1]:
            raise ValueError(
                f"output_shape {output_shape} does not tile output layer "
                f"of size {layer_sizes[-1]}"
            )
        if len(weights) != len(layer_sizes) - 1 or len(biases) != len(weights):
            raise ValueError("parameter count does not match layer_sizes")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_sizes[i], layer_sizes[i + 1]):
                raise ValueError(f"weight {i} has shape {w.shape}")
            if b.shape != (layer_sizes[i + 1],):
                raise ValueError(f"bias {i} has shape {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} parameters are not finite")
        self.layer_sizes = list(layer_sizes)
        self.output_shape = (int(rbs), int(users))
        self.weights = weights
        self.biases = biases

    @classmethod
    def glorot(
        cls, layer_sizes: Sequence[int], output_shape: tuple[int, int], seed: int
    ) -> "MLP":
        """Seeded uniform init in [-s, s], s = sqrt(6/(fan_in+fan_out))."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            s = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-s, s, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(layer_sizes, output_shape, weights, biases)

    @classmethod
    def zeros(
        cls, layer_sizes: Sequence[int], output_shape: tuple[int, int]
    ) -> "MLP":
        weights = [
            np.zeros((i, o)) for i, o in zip(layer_sizes, layer_sizes[1:])
        ]
        biases = [np.zeros(o) for o in layer_sizes[1:]]
        return cls(layer_sizes, output_shape, weights, biases)

    def copy(self) -> "MLP":
        return MLP(
            list(self.layer_sizes),
            self.output_shape,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]


def _forward_batch(net: MLP, X: np.ndarray) -> tuple[np.ndarray, list, list]:
    """Return (probs [n, rbs, users], pre-activations, activations)."""
    zs, acts = [], [X]
    a = X
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        with np.errstate(over="ignore", invalid="ignore"):
            z = a @ w + b
        if not np.all(np.isfinite(z)):
            raise FloatingPointError(
                f"non-finite values in layer {i} pre-activation"
            )
        zs.append(z)
        a = z if i == n_layers - 1 else relu(z)
        acts.append(a)
    rbs, users = net.output_shape
    logits = a.reshape(a.shape[0], rbs, users)
    return softmax_rows(logits), zs, acts


def forward(net: MLP, x: np.ndarray) -> OutputTensor:
    """Single-sample inference; deterministic for a fixed (net, x)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"expected input of shape ({net.input_dim},), got {x.shape}")
    probs, _, _ = _forward_batch(net, x[None, :])
    return OutputTensor(probs=probs[0])


def decode_output(y: OutputTensor, users: Iterable[UserTerminal]) -> AllocationMatrix:
    """Per block, pick the argmax user; ties resolve to the lowest id."""
    ordered = canonical_users(users)
    if y.probs.shape[1] != len(ordered):
        raise ValueError(
            f"output has {y.probs.shape[1]} user columns for {len(ordered)} users"
        )
    cols = np.argmax(y.probs, axis=1)  # first max wins = lowest id
    ids = tuple(ordered[c].id for c in cols)
    return AllocationMatrix(assignment=ids)


@dataclass(frozen=True)
class FeatureScaling:
    """Normalisation references used by the feature encoder."""

    reference_snr_db: float = 10.0
    reference_lambda: float = 100.0
    slot_duration: float = 1e-3

    @property
    def reference_snr(self) -> float:
        return db_to_linear(self.reference_snr_db)


def feature_dim(num_users: int, num_rbs: int) -> int:
    # SNR block + per-user (rate, queue) pairs + 3 QoS entries.
    return num_users * num_rbs + 2 * num_users + 3


def encode_features(
    snapshot: TwinSnapshot,
    grid: ResourceGrid,
    users: Iterable[UserTerminal],
    qos: QoSRequirement,
    scaling: FeatureScaling,
) -> np.ndarray:
    """Flatten a twin snapshot into the net's input vector.

    Layout: normalised SNRs (user-major), then per user an arrival-rate
    share and a queue level, then the three QoS entries. All slices are
    linear in their sources, so doubling every SNR doubles the SNR slice.
    """
    ordered = canonical_users(users)
    ids = tuple(u.id for u in ordered)
    if snapshot.channel.user_ids != ids:
        raise ValueError("snapshot channel users do not match the user set")
    if snapshot.channel.num_rbs != grid.num_rbs:
        raise ValueError("snapshot channel grid does not match the resource grid")

    zeta = qos.urllc_packet_bits
    ref_bits = zeta * scaling.reference_lambda  # bits/slot reference load
    lam = snapshot.traffic.urllc_rate
    urllc_ids = snapshot.traffic.urllc_user_ids
    n_urllc = max(1, len(urllc_ids))

    snr_block = (snapshot.channel.snr / scaling.reference_snr).ravel()
    traffic_block = np.zeros(2 * len(ordered))
    for i, u in enumerate(ordered):
        if u.service is ServiceClass.URLLC:
            traffic_block[2 * i] = (lam / n_urllc) / scaling.reference_lambda
            traffic_block[2 * i + 1] = snapshot.traffic.queue_of(u.id) / ref_bits
    qos_block = np.array(
        [
            qos.embb_min_rate * scaling.slot_duration / ref_bits,
            (zeta * lam) / ref_bits,
            qos.urllc_outage_threshold,
        ]
    )
    x = np.concatenate([snr_block, traffic_block, qos_block])
    if not np.all(np.isfinite(x)):
        raise ValueError("encoded features contain non-finite entries")
    return x


def loss_and_grads(
    net: MLP, X: np.ndarray, labels: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Summed-over-blocks cross-entropy, averaged over the batch.

    ``labels`` holds the target user column per (sample, block). For a
    zero-initialised net the loss is exactly num_rbs * ln(num_users).
    """
    n = X.shape[0]
    rbs, users = net.output_shape
    probs, zs, acts = _forward_batch(net, X)

    idx_n = np.arange(n)[:, None]
    idx_r = np.arange(rbs)[None, :]
    picked = probs[idx_n, idx_r, labels]
    loss = float(-np.log(np.maximum(picked, 1e-300)).sum() / n)
    if not math.isfinite(loss):
        raise FloatingPointError("non-finite training loss")

    dlogits = probs.copy()
    dlogits[idx_n, idx_r, labels] -= 1.0  # indices are unique per (n, rb)
    dlogits /= n
    grad = dlogits.reshape(n, rbs * users)

    grads_w: list[np.ndarray] = [None] * len(net.weights)  # type: ignore
    grads_b: list[np.ndarray] = [None] * len(net.biases)  # type: ignore
    for i in reversed(range(len(net.weights))):
        grads_w[i] = acts[i].T @ grad
        grads_b[i] = grad.sum(axis=0)
        if i > 0:
            grad = (grad @ net.weights[i].T) * (zs[i - 1] > 0)
    return loss, grads_w, grads_b


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 1
    batch_size: int = 32
    seed: int = 0
    init: str = "glorot"  # "glorot" | "zeros"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.init not in ("glorot", "zeros"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class TrainResult:
    net: MLP
    # (step, epoch, loss) per optimisation step; step 0 is the pre-update loss.
    loss_curve: list[tuple[int, int, float]] = field(default_factory=list)

    def smoothed_losses(self, window: int = 25) -> list[float]:
        vals = [l for _, _, l in self.loss_curve]
        return [
            float(np.mean(vals[max(0, i - window + 1) : i + 1]))
            for i in range(len(vals))
        ]


def train(
    net: MLP, X: np.ndarray, labels: np.ndarray, cfg: TrainConfig
) -> TrainResult:
    """Mini-batch gradient descent on per-block cross-entropy.

    Deterministic for a fixed config: shuffling comes from a generator
    seeded with ``cfg.seed``. Raises on non-finite loss instead of
    continuing with poisoned parameters.
    """
    if X.ndim != 2 or labels.ndim != 2 or X.shape[0] != labels.shape[0]:
        raise ValueError("X and labels must be aligned 2-D arrays")
    net = net.copy()
    rng = np.random.default_rng(cfg.seed)
    n = X.shape[0]
    curve: list[tuple[int, int, float]] = []

    loss0, _, _ = loss_and_grads(net, X, labels)
    curve.append((0, 0, loss0))

    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grads_w, grads_b = loss_and_grads(net, X[batch], labels[batch])
            for i in range(len(net.weights)):
                net.weights[i] -= cfg.learning_rate * grads_w[i]
                net.biases[i] -= cfg.learning_rate * grads_b[i]
            step += 1
            curve.append((step, epoch, loss))
    return TrainResult(net=net, loss_curve=curve)


def accuracy(net: MLP, X: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of (sample, block) pairs whose argmax matches the label."""
    probs, _, _ = _forward_batch(net, X)
    return float(np.mean(np.argmax(probs, axis=2) == labels))


def grad_check(
    net: MLP, x: np.ndarray, labels: np.ndarray, h: float = 1e-5
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    labels2 = np.atleast_2d(np.asarray(labels, dtype=int))
    _, grads_w, grads_b = loss_and_grads(net, x2, labels2)

    worst = 0.0
    params = [(net.weights, grads_w), (net.biases, grads_b)]
    for arrays, grads in params:
        for arr, g in zip(arrays, grads):
            flat = arr.ravel()
            gflat = g.ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                lp, _, _ = loss_and_grads(net, x2, labels2)
                flat[k] = orig - h
                lm, _, _ = loss_and_grads(net, x2, labels2)
                flat[k] = orig
                numeric = (lp - lm) / (2.0 * h)
                denom = max(abs(gflat[k]) + abs(numeric), 1e-8)
                worst = max(worst, abs(gflat[k] - numeric) / denom)
    return worst


def save_weights(net: MLP, path, seed: int) -> None:
    """Versioned flat binary: one JSON header line, then raw little-endian
    float64 parameter blocks in layer order (W then b per layer)."""
    header = {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "layer_sizes": net.layer_sizes,
        "output_shape": list(net.output_shape),
        "seed": int(seed),
    }
    with open(path, "wb") as f:
        f.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        for w, b in zip(net.weights, net.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_weights(path) -> tuple[MLP, int]:
    """Inverse of save_weights; rejects unknown format versions."""
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("ascii"))
        if header.get("format_version") != WEIGHTS_FORMAT_VERSION:
            raise ValueError(
                f"unsupported weights format_version {header.get('format_version')!r}"
            )
        layer_sizes = [int(s) for s in header["layer_sizes"]]
        output_shape = tuple(int(s) for s in header["output_shape"])
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            w = np.frombuffer(f.read(8 * fan_in * fan_out), dtype="<f8")
            weights.append(w.reshape(fan_in, fan_out).copy())
            b = np.frombuffer(f.read(8 * fan_out), dtype="<f8")
            biases.append(b.copy())
        trailing = f.read()
    if trailing:
        raise ValueError(f"{len(trailing)} unexpected trailing bytes in weights file")
    net = MLP(layer_sizes, output_shape, weights, biases)  # type: ignore[arg-type]
    return net, int(header["seed"])
