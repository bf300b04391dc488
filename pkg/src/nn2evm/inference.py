"""Forward passes in double precision and in contract-exact fixed point.

:func:`forward_fixed` is the reference for what the generated contract
computes: biases seed each accumulator, products are added in ascending
input order, every product goes through :func:`~nn2evm.fixed_point.mul_raw`
and every sum through :func:`~nn2evm.fixed_point.add_raw`.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import ImageSet, LabelSet, normalize_image, quantize_pixels
from .errors import PrecisionError
from .fixed_point import DECIMALS, SCALE, add_raw, mul_raw, quantize_raw
from .model_ir import RELU, ArchSpec, Model


@dataclass(frozen=True, eq=True)
class QuantizedModel:
    """Model parameters as raw fixed-point ints at decimal precision ``precision``."""

    arch: ArchSpec
    precision: int
    weights: tuple[tuple[tuple[int, ...], ...], ...]
    biases: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not 0 <= self.precision <= DECIMALS:
            raise PrecisionError(f"precision must be in 0..{DECIMALS}")
        d = self.arch.dims
        step = 10 ** (DECIMALS - self.precision)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if len(w) != d[k + 1] or any(len(row) != d[k] for row in w) or len(b) != d[k + 1]:
                raise ValueError(f"layer {k} parameter shapes do not match {self.arch}")
            if any(v % step for row in w for v in row) or any(v % step for v in b):
                raise PrecisionError(f"layer {k} has values finer than {self.precision} decimals")

    def flat_params(self) -> list[int]:
        """Raw values in upload order (per layer: weights row-major, then biases)."""
        out: list[int] = []
        for w, b in zip(self.weights, self.biases):
            for row in w:
                out.extend(row)
            out.extend(b)
        return out

    def to_model(self) -> Model:
        """Float view of the quantized parameters."""
        return Model(
            self.arch,
            tuple(np.array([[v / SCALE for v in row] for row in w]).reshape(len(w), -1) for w in self.weights),
            tuple(np.array([v / SCALE for v in b]) for b in self.biases),
        )


def quantize_model(model: Model, d: int) -> QuantizedModel:
    ws = tuple(tuple(tuple(quantize_raw(v, d) for v in row) for row in w.tolist()) for w in model.weights)
    bs = tuple(tuple(quantize_raw(v, d) for v in b.tolist()) for b in model.biases)
    return QuantizedModel(model.arch, d, ws, bs)


def forward_float(model: Model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.arch.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({model.arch.input_dim},)")
    a = x
    for w, b, act in zip(model.weights, model.biases, model.arch.activations):
        a = w @ a + b
        if act == RELU:
            a = np.maximum(a, 0.0)
    return a


def forward_fixed(qm: QuantizedModel, x: Sequence[int], trace: list | None = None) -> list[int]:
    """Fixed-point logits (raw ints) for raw fixed-point inputs ``x``.

    When ``trace`` is a list, each arithmetic step is appended to it as
    ``("mul", a, b)`` or ``("add", a, b)`` with raw operands, in execution
    order.
    """
    if len(x) != qm.arch.input_dim:
        raise ValueError(f"input has {len(x)} values, expected {qm.arch.input_dim}")
    a = list(x)
    for w, b, act in zip(qm.weights, qm.biases, qm.arch.activations):
        out = []
        for row, acc in zip(w, b):
            if trace is None:
                for wj, xj in zip(row, a):
                    acc = add_raw(acc, mul_raw(wj, xj))
            else:
                for wj, xj in zip(row, a):
                    trace.append(("mul", wj, xj))
                    p = mul_raw(wj, xj)
                    trace.append(("add", acc, p))
                    acc = add_raw(acc, p)
            out.append(max(acc, 0) if act == RELU else acc)
        a = out
    return a


def argmax_class(logits) -> int:
    """Index of the largest logit; ties go to the lowest index."""
    best = 0
    for i in range(1, len(logits)):
        if logits[i] > logits[best]:
            best = i
    return best


def predict_float(model: Model, pixels) -> int:
    return argmax_class(forward_float(model, normalize_image(pixels, model.arch.input_dim)))


def predict_fixed(qm: QuantizedModel, pixels) -> int:
    return argmax_class(forward_fixed(qm, quantize_pixels(pixels, qm.arch.input_dim)))


@dataclass(frozen=True)
class AccuracyReport:
    """Per-image predictions over the first ``n_total`` images.

    ``predictions`` come from the evaluated model; when a fixed-point model
    was evaluated alongside, its predictions are in ``fixed_predictions``.
    """

    labels: tuple[int, ...]
    predictions: tuple[int, ...]
    fixed_predictions: tuple[int, ...] | None = None
    mode: str = "float"

    @property
    def n_total(self) -> int:
        return len(self.labels)

    @property
    def n_correct(self) -> int:
        return sum(p == y for p, y in zip(self.predictions, self.labels))

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_total if self.n_total else 0.0

    @property
    def fixed_correct(self) -> int | None:
        if self.fixed_predictions is None:
            return None
        return sum(p == y for p, y in zip(self.fixed_predictions, self.labels))

    @property
    def fixed_accuracy(self) -> float | None:
        if self.fixed_predictions is None:
            return None
        return self.fixed_correct / self.n_total if self.n_total else 0.0

    @property
    def disagreements(self) -> list[tuple[int, int, int, int]]:
        """``(image_index, label, pred_float, pred_fixed)`` where the two modes differ."""
        if self.fixed_predictions is None:
            return []
        return [
            (i, y, pf, px)
            for i, (y, pf, px) in enumerate(zip(self.labels, self.predictions, self.fixed_predictions))
            if pf != px
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["image_index", "label", "pred_float", "pred_fixed"])
        fixed = self.fixed_predictions
        for i, (y, p) in enumerate(zip(self.labels, self.predictions)):
            if self.mode == "fixed":
                w.writerow([i, y, "", p])
            else:
                w.writerow([i, y, p, "" if fixed is None else fixed[i]])
        return buf.getvalue()


def evaluate(
    model: Model | QuantizedModel,
    images: ImageSet,
    labels: LabelSet,
    n: int | None = None,
    fixed: QuantizedModel | None = None,
) -> AccuracyReport:
    """Accuracy over the first ``n`` images.

    ``model`` may be a float :class:`~nn2evm.model_ir.Model` or a
    :class:`QuantizedModel`. Passing ``fixed`` alongside a float model
    evaluates both modes and records their disagreements.
    """
    n = images.count if n is None else n
    if n > images.count or n > labels.count:
        raise ValueError(f"requested {n} images but the dataset has {min(images.count, labels.count)}")
    ys = tuple(int(v) for v in labels.labels[:n])
    if isinstance(model, QuantizedModel):
        if fixed is not None:
            raise ValueError("'fixed' only applies to float models")
        preds = tuple(predict_fixed(model, images.pixels[i]) for i in range(n))
        return AccuracyReport(ys, preds, mode="fixed")
    x = images.pixels[:n].astype(np.float64) / 255.0
    a = x
    for w, b, act in zip(model.weights, model.biases, model.arch.activations):
        a = a @ w.T + b
        if act == RELU:
            a = np.maximum(a, 0.0)
    # row-wise argmax keeps the lowest index on ties, like argmax_class
    preds = tuple(int(v) for v in np.argmax(a, axis=1)) if n else ()
    fx = None if fixed is None else tuple(predict_fixed(fixed, images.pixels[i]) for i in range(n))
    return AccuracyReport(ys, preds, fx)


@dataclass(frozen=True)
class SweepReport:
    n_total: int
    rows: tuple[tuple[int, int], ...] = field(default=())  # (precision, n_correct)

    def as_dict(self) -> dict[int, int]:
        return dict(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["precision", "n_correct", "n_total"])
        for d, c in self.rows:
            w.writerow([d, c, self.n_total])
        return buf.getvalue()


def precision_sweep(model: Model, images: ImageSet, labels: LabelSet, precisions: Sequence[int], n: int | None = None) -> SweepReport:
    """Correct predictions at each weight precision; internal math stays at 18 decimals."""
    n = images.count if n is None else n
    rows = []
    for d in precisions:
        rep = evaluate(quantize_model(model, d), images, labels, n)
        rows.append((d, rep.n_correct))
    return SweepReport(n, tuple(rows))
