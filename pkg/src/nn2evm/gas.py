"""Static EVM gas model for deployment and weight upload, plus fiat conversion.

Costs are charged per transaction as intrinsic gas, calldata bytes and one
first-time ``SSTORE`` (plus a per-word execution allowance) for every
parameter written. Refunds, fee-market dynamics and warm rewrites are not
modelled: each parameter slot is written exactly once.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

ETH_PLACES = Decimal("0.0001")
USD_PLACES = Decimal("0.01")


@dataclass(frozen=True)
class GasConfig:
    tx_intrinsic: int = 21_000
    calldata_nonzero_byte: int = 16
    calldata_zero_byte: int = 4
    sstore_new_slot: int = 20_000
    sstore_cold_access: int = 2_100
    create_overhead: int = 32_000
    code_deposit_per_byte: int = 200
    # calibration: loop, bounds check and ABI decoding per stored word
    exec_overhead_per_word: int = 500
    # calibration: compiled bytecode size per byte of source when no compiler is available
    bytecode_ratio: float = 0.30
    gas_price_gwei: float = 4
    eth_usd: float = 2_500

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise ValueError(f"{f.name} must be positive, got {v}")

    @classmethod
    def from_mapping(cls, values: dict) -> "GasConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ValueError(f"unknown gas settings: {', '.join(sorted(unknown))}")
        conv = {k: (float(v) if known[k] == "float" else int(v)) for k, v in values.items()}
        return cls(**conv)


def _histogram(calldata) -> tuple[int, int]:
    if isinstance(calldata, (bytes, bytearray, memoryview)):
        data = bytes(calldata)
        z = data.count(0)
        return z, len(data) - z
    z, nz = calldata
    if z < 0 or nz < 0:
        raise ValueError("byte counts must be non-negative")
    return int(z), int(nz)


def calldata_gas(calldata, config: GasConfig | None = None) -> int:
    """Calldata cost of raw bytes or a ``(zero, nonzero)`` byte count."""
    c = config or GasConfig()
    z, nz = _histogram(calldata)
    return z * c.calldata_zero_byte + nz * c.calldata_nonzero_byte


def estimate_tx_gas(calldata=b"", fresh_slots: int = 0, config: GasConfig | None = None) -> int:
    """Gas of one transaction carrying ``calldata`` that fills ``fresh_slots`` new storage slots.

    >>> estimate_tx_gas((0, 32), 1)
    44112
    """
    if fresh_slots < 0:
        raise ValueError("fresh_slots must be non-negative")
    c = config or GasConfig()
    per_slot = c.sstore_new_slot + c.sstore_cold_access + c.exec_overhead_per_word
    return c.tx_intrinsic + calldata_gas(calldata, c) + fresh_slots * per_slot


def _round(x: Decimal, places: Decimal) -> Decimal:
    return x.quantize(places, rounding=ROUND_HALF_UP)


def to_fiat(gas: int, gas_price_gwei=4, eth_usd=2_500) -> tuple[Decimal, Decimal]:
    """ETH (4 places) and USD (2 places), both rounded half-up from the exact cost.

    >>> to_fiat(73_721_648, 4, 2500)
    (Decimal('0.2949'), Decimal('737.22'))
    """
    eth = Decimal(int(gas)) * Decimal(str(gas_price_gwei)) * Decimal("1e-9")
    usd = eth * Decimal(str(eth_usd))
    return _round(eth, ETH_PLACES), _round(usd, USD_PLACES)


@dataclass(frozen=True)
class GasReport:
    phase: str
    gas: int
    eth: Decimal
    usd: Decimal

    @classmethod
    def of(cls, phase: str, gas: int, config: GasConfig | None = None) -> "GasReport":
        c = config or GasConfig()
        eth, usd = to_fiat(gas, c.gas_price_gwei, c.eth_usd)
        return cls(phase, int(gas), eth, usd)

    def row(self) -> list[str]:
        return [self.phase, str(self.gas), f"{self.eth:.4f}", f"{self.usd:.2f}"]


def reports_to_csv(reports: Iterable[GasReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phase", "gas", "eth", "usd"])
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def estimate_upload_gas(plan, config: GasConfig | None = None) -> GasReport:
    """Total gas of all ``setWeights`` transactions in a batch plan."""
    c = config or GasConfig()
    total = sum(estimate_tx_gas(b.calldata(), len(b.values), c) for b in plan.batches)
    return GasReport.of("Uploading Weights", total, c)


def deploy_gas(bytecode_bytes: int, init_calldata=None, config: GasConfig | None = None) -> int:
    """Creation cost for ``bytecode_bytes`` of deployed code.

    Without the actual creation bytes, ``init_calldata`` defaults to that many
    nonzero bytes.
    """
    c = config or GasConfig()
    data = (0, bytecode_bytes) if init_calldata is None else init_calldata
    return c.tx_intrinsic + c.create_overhead + bytecode_bytes * c.code_deposit_per_byte + calldata_gas(data, c)


def bytecode_size(artifact, config: GasConfig | None = None) -> int:
    c = config or GasConfig()
    if getattr(artifact, "runtime_bytecode", None) is not None:
        return len(artifact.runtime_bytecode)
    return math.ceil(c.bytecode_ratio * artifact.source_bytes)


def estimate_deploy_gas(artifact, config: GasConfig | None = None) -> GasReport:
    """Deployment gas from compiled sizes when the artifact carries them, else from source size."""
    c = config or GasConfig()
    size = bytecode_size(artifact, c)
    init = getattr(artifact, "bytecode", None)
    return GasReport.of("Deployment", deploy_gas(size, init, c), c)


__all__ = [
    "GasConfig",
    "GasReport",
    "bytecode_size",
    "calldata_gas",
    "deploy_gas",
    "estimate_deploy_gas",
    "estimate_tx_gas",
    "estimate_upload_gas",
    "reports_to_csv",
    "to_fiat",
]
