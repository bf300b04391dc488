"""Mini-batch SGD for ReLU MLPs with a softmax cross-entropy loss.

Everything random (initialization and per-epoch shuffles) draws from one
``numpy.random.default_rng(seed)`` stream, so a run is a pure function of
the data, the architecture and :class:`HyperParams`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ImageSet, LabelSet
from .errors import TrainingError
from .model_ir import RELU, ArchSpec, Model


@dataclass(frozen=True)
class HyperParams:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise TrainingError("epochs and batch_size must be positive")
        # zero is accepted so a run can be checked against its own initialization
        if self.learning_rate < 0:
            raise TrainingError("learning_rate must be non-negative")


def init_params(arch: ArchSpec, rng: np.random.Generator) -> tuple[list, list]:
    """Uniform in +-1/sqrt(fan_in) for weights and biases alike."""
    d = arch.dims
    ws, bs = [], []
    for k in range(len(arch.layer_dims)):
        bound = 1.0 / np.sqrt(d[k])
        ws.append(rng.uniform(-bound, bound, size=(d[k + 1], d[k])))
        bs.append(rng.uniform(-bound, bound, size=d[k + 1]))
    return ws, bs


def _forward(ws, bs, acts, x):
    """Returns pre-activations and activations per layer (``a[0]`` is the input)."""
    zs, a = [], [x]
    for w, b, act in zip(ws, bs, acts):
        z = a[-1] @ w.T + b
        zs.append(z)
        a.append(np.maximum(z, 0.0) if act == RELU else z)
    return zs, a


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _mean_nll(logits: np.ndarray, y: np.ndarray):
    z = logits - logits.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    return -logp[np.arange(len(y)), y].mean()


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    return float(_mean_nll(logits, y))


def loss_and_grads(ws, bs, acts, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and its gradients w.r.t. every parameter."""
    x = np.atleast_2d(x)
    y = np.atleast_1d(y)
    zs, a = _forward(ws, bs, acts, x)
    logits = a[-1]
    loss = cross_entropy(logits, y)
    delta = softmax(logits)
    delta[np.arange(len(y)), y] -= 1.0
    delta /= len(y)
    gws, gbs = [None] * len(ws), [None] * len(ws)
    for k in range(len(ws) - 1, -1, -1):
        if acts[k] == RELU:
            delta = delta * (zs[k] > 0)
        gws[k] = delta.T @ a[k]
        gbs[k] = delta.sum(axis=0)
        if k:
            delta = delta @ ws[k]
    return loss, gws, gbs


def model_loss(model: Model, x, y) -> float:
    _, a = _forward(model.weights, model.biases, model.arch.activations, np.atleast_2d(x))
    return cross_entropy(a[-1], np.atleast_1d(y))


def _check_inputs(arch: ArchSpec, images: ImageSet, labels: LabelSet):
    if images.count == 0:
        raise TrainingError("training set is empty")
    if images.count != labels.count:
        raise TrainingError(f"{images.count} images but {labels.count} labels")
    if images.pixels.shape[1] != arch.input_dim:
        raise TrainingError(f"images have {images.pixels.shape[1]} pixels, architecture expects {arch.input_dim}")
    if int(labels.labels.max()) >= arch.n_classes:
        raise TrainingError(f"label {int(labels.labels.max())} out of range for {arch.n_classes} classes")


def train_mlp(
    arch: ArchSpec,
    images: ImageSet,
    labels: LabelSet,
    hp: HyperParams = HyperParams(),
    history: list | None = None,
) -> Model:
    """Train ``arch`` on pixel/255 inputs with plain mini-batch SGD.

    If ``history`` is given, the mean training loss of each epoch (averaged
    over its mini-batches) is appended to it.
    """
    _check_inputs(arch, images, labels)
    rng = np.random.default_rng(hp.seed)
    ws, bs = init_params(arch, rng)
    acts = arch.activations
    x_all = images.pixels.astype(np.float64) / 255.0
    y_all = labels.labels.astype(np.intp)
    n = len(y_all)
    for _ in range(hp.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hp.batch_size):
            idx = perm[start : start + hp.batch_size]
            loss, gws, gbs = loss_and_grads(ws, bs, acts, x_all[idx], y_all[idx])
            total += loss * len(idx)
            for k in range(len(ws)):
                ws[k] -= hp.learning_rate * gws[k]
                bs[k] -= hp.learning_rate * gbs[k]
        if history is not None:
            history.append(total / n)
    return Model(arch, tuple(ws), tuple(bs))


def numerical_gradient_check(model: Model, x, y, h: float = 1e-5, max_params: int = 20, seed: int = 0) -> float:
    """Max relative error between backprop and central differences.

    Probes at most ``max_params`` parameters, chosen uniformly at random
    across all weight and bias entries.
    """
    acts = model.arch.activations
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.intp))
    _, gws, gbs = loss_and_grads([np.array(w) for w in model.weights], [np.array(b) for b in model.biases], acts, x, y)
    # differences are taken in extended precision so roundoff stays far below the tolerance
    ws = [np.array(w, dtype=np.longdouble) for w in model.weights]
    bs = [np.array(b, dtype=np.longdouble) for b in model.biases]
    x = x.astype(np.longdouble)

    slots = [(tensors, grads, k, idx) for tensors, grads in ((ws, gws), (bs, gbs))
             for k, t in enumerate(tensors) for idx in np.ndindex(t.shape)]
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(slots), size=min(max_params, len(slots)), replace=False)

    worst = 0.0
    for s in sorted(pick):
        tensors, grads, k, idx = slots[s]
        orig = tensors[k][idx]
        tensors[k][idx] = orig + h
        up = _mean_nll(_forward(ws, bs, acts, x)[1][-1], y)
        tensors[k][idx] = orig - h
        down = _mean_nll(_forward(ws, bs, acts, x)[1][-1], y)
        tensors[k][idx] = orig
        numeric = float((up - down) / (2 * h))
        analytic = grads[k][idx]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst
