"""Model representation, architecture notation and the JSON weight manifest.

Architecture notation follows ``wLxNyN..zN``: ``w`` counts the weight layers
(hidden layers plus the output layer) and each ``<n>N`` group gives one
layer's width, so a 784-4-10 network is ``2L4N10N``.

Weights are row-major with one row per output neuron: ``weights[k][i, j]``
connects input ``j`` of layer ``k`` to its output ``i``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArchNotationError, ArchStructureError, ManifestError

SCHEMA = "nn2evm-model/1"
RELU = "relu"
IDENTITY = "none"


@dataclass(frozen=True)
class ArchSpec:
    input_dim: int
    layer_dims: tuple[int, ...]
    activations: tuple[str, ...] = field(default=())

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if not dims:
            raise ArchStructureError("an architecture needs at least one layer")
        if self.input_dim < 1 or any(d < 1 for d in dims):
            raise ArchStructureError(f"all dimensions must be >= 1, got {self.input_dim} and {dims}")
        acts = tuple(self.activations) or (RELU,) * (len(dims) - 1) + (IDENTITY,)
        if len(acts) != len(dims) or any(a not in (RELU, IDENTITY) for a in acts):
            raise ArchStructureError(f"bad activation list {acts!r} for {len(dims)} layers")
        object.__setattr__(self, "activations", acts)

    @property
    def dims(self) -> tuple[int, ...]:
        """Input width followed by every layer width."""
        return (self.input_dim,) + self.layer_dims

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_params(self) -> int:
        d = self.dims
        return sum(d[k + 1] * d[k] + d[k + 1] for k in range(len(self.layer_dims)))

    def notation(self) -> str:
        return format_arch_notation(self)


def format_arch_notation(arch: ArchSpec) -> str:
    return f"{len(arch.layer_dims)}L" + "".join(f"{d}N" for d in arch.layer_dims)


def _read_int(s: str, pos: int) -> tuple[int, int]:
    end = pos
    while end < len(s) and "0" <= s[end] <= "9":
        end += 1
    if end == pos:
        raise ArchNotationError(f"expected a digit in {s!r}", pos)
    if s[pos] == "0":
        raise ArchNotationError(f"count must be a positive integer without leading zeros in {s!r}", pos)
    return int(s[pos:end]), end


def parse_arch_notation(notation: str, input_dim: int) -> ArchSpec:
    """Parse ``wLxN..zN`` into an :class:`ArchSpec`.

    >>> parse_arch_notation("2L4N10N", 784).layer_dims
    (4, 10)
    """
    if not notation.isascii():
        bad = next(i for i, c in enumerate(notation) if not c.isascii())
        raise ArchNotationError(f"non-ASCII character in {notation!r}", len(notation[:bad].encode()))
    count, pos = _read_int(notation, 0)
    if pos >= len(notation) or notation[pos] != "L":
        raise ArchNotationError(f"expected 'L' after layer count in {notation!r}", pos)
    pos += 1
    dims = []
    while pos < len(notation):
        n, pos = _read_int(notation, pos)
        if pos >= len(notation) or notation[pos] != "N":
            raise ArchNotationError(f"expected 'N' after layer width in {notation!r}", pos)
        pos += 1
        dims.append(n)
    if not dims:
        raise ArchNotationError(f"no layer widths in {notation!r}", pos)
    if count != len(dims):
        raise ArchStructureError(f"{notation!r} declares {count} layers but lists {len(dims)}")
    return ArchSpec(input_dim, tuple(dims))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Model:
    """A trained MLP in double precision. Arrays are read-only."""

    arch: ArchSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(_frozen(w) for w in self.weights)
        bs = tuple(_frozen(b) for b in self.biases)
        d = self.arch.dims
        if len(ws) != len(self.arch.layer_dims) or len(bs) != len(ws):
            raise ManifestError(f"expected {len(self.arch.layer_dims)} layers of parameters")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (d[k + 1], d[k]):
                raise ManifestError(f"layer {k} weights have shape {w.shape}, expected {(d[k + 1], d[k])}")
            if b.shape != (d[k + 1],):
                raise ManifestError(f"layer {k} biases have shape {b.shape}, expected {(d[k + 1],)}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ManifestError(f"layer {k} contains non-finite values")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return (
            self.arch == other.arch
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    __hash__ = None

    @classmethod
    def zeros(cls, arch: ArchSpec) -> Model:
        d = arch.dims
        n = len(arch.layer_dims)
        return cls(arch, tuple(np.zeros((d[k + 1], d[k])) for k in range(n)), tuple(np.zeros(d[k + 1]) for k in range(n)))


def format_value(v: float) -> str:
    """Shortest positional decimal string that round-trips to the same double."""
    return np.format_float_positional(float(v), unique=True, trim="0")


def _parse_value(s, where: str) -> float:
    if not isinstance(s, str):
        raise ManifestError(f"{where}: values must be decimal strings, got {type(s).__name__}")
    try:
        v = float(s)
    except ValueError:
        raise ManifestError(f"{where}: {s!r} is not a decimal number") from None
    if not math.isfinite(v):
        raise ManifestError(f"{where}: non-finite value {s!r}")
    return v


def model_to_dict(model: Model) -> dict:
    layers = []
    for w, b, act in zip(model.weights, model.biases, model.arch.activations):
        layers.append(
            {
                "out": int(w.shape[0]),
                "activation": act,
                "weights": [[format_value(v) for v in row] for row in w],
                "biases": [format_value(v) for v in b],
            }
        )
    return {"schema": SCHEMA, "input_dim": model.arch.input_dim, "layers": layers}


def save_model_manifest(model: Model) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":")) + "\n"


def model_from_dict(doc: dict) -> Model:
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")
    if doc.get("schema") != SCHEMA:
        raise ManifestError(f"unknown schema version {doc.get('schema')!r}; expected {SCHEMA!r}")
    input_dim = doc.get("input_dim")
    layers = doc.get("layers")
    if not isinstance(input_dim, int) or not isinstance(layers, list) or not layers:
        raise ManifestError("manifest needs an integer 'input_dim' and a non-empty 'layers' list")
    try:
        arch = ArchSpec(input_dim, tuple(l["out"] for l in layers), tuple(l["activation"] for l in layers))
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"malformed layer entry: {exc}") from None
    except ArchStructureError as exc:
        raise ManifestError(str(exc)) from None
    weights, biases = [], []
    prev = input_dim
    for k, layer in enumerate(layers):
        rows, bias = layer.get("weights"), layer.get("biases")
        if not isinstance(rows, list) or len(rows) != layer["out"]:
            raise ManifestError(f"layer {k}: expected {layer['out']} weight rows")
        parsed = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != prev:
                n = len(row) if isinstance(row, list) else "?"
                raise ManifestError(f"layer {k} row {i}: expected {prev} values, got {n}")
            parsed.append([_parse_value(s, f"layer {k} row {i}") for s in row])
        if not isinstance(bias, list) or len(bias) != layer["out"]:
            raise ManifestError(f"layer {k}: expected {layer['out']} biases")
        weights.append(np.array(parsed, dtype=np.float64).reshape(layer["out"], prev))
        biases.append(np.array([_parse_value(s, f"layer {k} biases") for s in bias], dtype=np.float64))
        prev = layer["out"]
    return Model(arch, tuple(weights), tuple(biases))


def load_model_manifest(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    return model_from_dict(doc)


def flatten_params(weights: Sequence, biases: Sequence) -> list:
    """Parameters in upload order: per layer, weights row-major then biases."""
    out = []
    for w, b in zip(weights, biases):
        for row in w:
            out.extend(row)
        out.extend(b)
    return out
