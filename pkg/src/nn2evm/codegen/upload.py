"""Parameter layout, ``setWeights`` calldata and the batched upload plan."""
from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

from ..errors import PlanError
from ..gas import GasConfig, estimate_tx_gas
from ..model_ir import ArchSpec

# bytes4(keccak256("setWeights(uint256,uint256,int256[])"))
SET_WEIGHTS_SELECTOR = bytes.fromhex("7707a65b")
WORD = 32
HEAD_BYTES = len(SET_WEIGHTS_SELECTOR) + 4 * WORD  # selector, layer, offset, data pointer, length


@dataclass(frozen=True)
class ParamBlock:
    layer: int
    kind: str  # "weight" or "bias"
    offset: int  # flat index of the first value
    length: int


def param_layout(arch: ArchSpec) -> tuple[ParamBlock, ...]:
    """Storage order of all parameters: per layer, weights row-major then biases."""
    blocks, off = [], 0
    d = arch.dims
    for k in range(len(arch.layer_dims)):
        nw = d[k + 1] * d[k]
        blocks.append(ParamBlock(k, "weight", off, nw))
        blocks.append(ParamBlock(k, "bias", off + nw, d[k + 1]))
        off += nw + d[k + 1]
    return tuple(blocks)


def layer_starts(arch: ArchSpec) -> tuple[int, ...]:
    return tuple(b.offset for b in param_layout(arch) if b.kind == "weight")


def encode_word(v: int) -> bytes:
    return (v % (1 << 256)).to_bytes(WORD, "big")


def encode_set_weights(layer: int, offset: int, values: Sequence[int]) -> bytes:
    """ABI calldata for ``setWeights(layer, offset, values)``."""
    parts = [SET_WEIGHTS_SELECTOR, encode_word(layer), encode_word(offset), encode_word(3 * WORD), encode_word(len(values))]
    parts += [encode_word(v) for v in values]
    return b"".join(parts)


def byte_histogram(data: bytes) -> tuple[int, int]:
    """``(zero_bytes, nonzero_bytes)``."""
    z = data.count(0)
    return z, len(data) - z


@dataclass(frozen=True)
class Batch:
    layer: int
    offset: int  # relative to the start of ``layer``
    values: tuple[int, ...]

    def calldata(self) -> bytes:
        return encode_set_weights(self.layer, self.offset, self.values)


@dataclass(frozen=True)
class BatchPlan:
    batches: tuple[Batch, ...]
    gas_limit: int
    margin: float

    def __len__(self) -> int:
        return len(self.batches)

    def flatten(self) -> list[int]:
        return [v for b in self.batches for v in b.values]

    def to_json(self) -> str:
        doc = {
            "gas_limit": self.gas_limit,
            "margin": self.margin,
            "batches": [{"layer": b.layer, "offset": b.offset, "values": [str(v) for v in b.values]} for b in self.batches],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BatchPlan":
        doc = json.loads(text)
        try:
            batches = tuple(Batch(int(b["layer"]), int(b["offset"]), tuple(int(v) for v in b["values"])) for b in doc["batches"])
            return cls(batches, int(doc["gas_limit"]), float(doc.get("margin", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise PlanError(f"malformed batch plan: {exc}") from None


def _value_bytes(v: int) -> tuple[int, int]:
    return byte_histogram(encode_word(v))


def plan_batches(
    values: Sequence[int],
    starts: Sequence[int],
    gas_limit: int,
    margin: float = 0.9,
    config: GasConfig | None = None,
) -> BatchPlan:
    """Greedy in-order split of ``values`` into ``setWeights`` calls.

    ``starts`` are the flat offsets at which each layer begins; a batch is
    addressed by the layer containing its first value.
    """
    if not 0 < margin <= 1:
        raise PlanError(f"margin must be in (0, 1], got {margin}")
    config = config or GasConfig()
    budget = margin * gas_limit
    batches: list[Batch] = []
    i, n = 0, len(values)
    while i < n:
        layer = bisect_right(starts, i) - 1
        header = encode_set_weights(layer, i - starts[layer], [])
        z, nz = byte_histogram(header)
        j = i
        while j < n:
            vz, vn = _value_bytes(values[j])
            if estimate_tx_gas((z + vz, nz + vn), j - i + 1, config) > budget:
                break
            z, nz = z + vz, nz + vn
            j += 1
        if j == i:
            raise PlanError(
                f"a single parameter does not fit in {budget:.0f} gas (limit {gas_limit}, margin {margin})"
            )
        batches.append(Batch(layer, i - starts[layer], tuple(values[i:j])))
        i = j
    return BatchPlan(tuple(batches), gas_limit, margin)


def plan_weight_upload(qm, gas_limit: int, margin: float = 0.9, config: GasConfig | None = None) -> BatchPlan:
    """Split ``qm``'s parameters into ``setWeights`` transactions under ``margin·gas_limit``."""
    return plan_batches(qm.flat_params(), layer_starts(qm.arch), gas_limit, margin, config)


def batch_gas(batch: Batch, config: GasConfig | None = None) -> int:
    return estimate_tx_gas(byte_histogram(batch.calldata()), len(batch.values), config)


__all__ = [
    "Batch",
    "BatchPlan",
    "ParamBlock",
    "SET_WEIGHTS_SELECTOR",
    "batch_gas",
    "byte_histogram",
    "encode_set_weights",
    "layer_starts",
    "param_layout",
    "plan_batches",
    "plan_weight_upload",
]
