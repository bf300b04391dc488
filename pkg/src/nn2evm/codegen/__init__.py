"""Solidity generation for quantized MLPs.

>>> art = generate_contract(qm, "D")        # doctest: +SKIP
>>> art.source_bytes, art.function_signatures["classify"]   # doctest: +SKIP
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..errors import CodegenError
from ..inference import QuantizedModel
from ..model_ir import IDENTITY, RELU, ArchSpec
from .build import CONTRACT_NAME, build_contract
from .interp import Deployed, Revert
from .ir import Contract, print_contract
from .passes import LEVELS, PIPELINES, lower
from .upload import BatchPlan, ParamBlock, encode_set_weights, param_layout, plan_weight_upload

MAX_CLASSES = 256  # classify returns uint8
MAX_PARAMS = 1 << 24


@dataclass(frozen=True)
class ContractArtifact:
    source: str
    opt_level: str
    arch: ArchSpec
    param_layout: tuple[ParamBlock, ...]
    function_signatures: dict[str, str] = field(hash=False)
    ir: Contract = field(repr=False, compare=False)
    bytecode: bytes | None = field(default=None, repr=False)  # creation code, once compiled
    runtime_bytecode: bytes | None = field(default=None, repr=False)

    @property
    def source_bytes(self) -> int:
        return len(self.source.encode("utf-8"))

    @property
    def bytecode_bytes(self) -> int | None:
        return None if self.runtime_bytecode is None else len(self.runtime_bytecode)


def _check_arch(arch: ArchSpec, max_params: int) -> None:
    expected = tuple([RELU] * (len(arch.layer_dims) - 1) + [IDENTITY])
    if tuple(arch.activations) != expected:
        raise CodegenError("only ReLU hidden layers with a linear output layer can be emitted")
    if arch.n_classes > MAX_CLASSES:
        raise CodegenError(f"{arch.n_classes} classes do not fit the uint8 return of classify")
    if arch.n_params > max_params:
        raise CodegenError(f"model has {arch.n_params} parameters, limit is {max_params}")


def generate_contract(qm: QuantizedModel, level: str = "D", max_params: int = MAX_PARAMS) -> ContractArtifact:
    """Emit the classifier contract for ``qm.arch`` at optimization ``level``.

    Weights are not baked into the source; they are written after deployment
    through ``setWeights`` (see :func:`plan_weight_upload`).
    """
    if level not in PIPELINES:
        raise CodegenError(f"unknown optimization level {level!r}; expected one of {', '.join(LEVELS)}")
    arch = qm.arch
    _check_arch(arch, max_params)
    contract = lower(build_contract(arch, comment=f"{arch.notation()} classifier, level {level}"), level)
    sigs = {f.name: f.signature for f in contract.functions if f.visibility in ("external", "public")}
    return ContractArtifact(
        source=print_contract(contract),
        opt_level=level,
        arch=arch,
        param_layout=param_layout(arch),
        function_signatures=sigs,
        ir=contract,
    )


def deploy(artifact: ContractArtifact, plan: BatchPlan | None = None, qm: QuantizedModel | None = None) -> Deployed:
    """Instantiate the artifact in the IR interpreter and upload its weights.

    Pass either a ``plan`` (applied batch by batch) or ``qm`` (written in one
    call).
    """
    inst = Deployed(artifact.ir)
    if plan is not None:
        for b in plan.batches:
            inst.call("setWeights", b.layer, b.offset, list(b.values))
    elif qm is not None:
        inst.call("setWeights", 0, 0, qm.flat_params())
    return inst


def op_trace(artifact: ContractArtifact, qm: QuantizedModel, x: Sequence[int]) -> tuple[list[int], list[tuple]]:
    """Logits and the fixed-point operation trace of ``artifact`` on input ``x``."""
    inst = deploy(artifact, qm=qm)
    trace: list = []
    out = inst.call("logits", list(x), trace=trace)
    return list(out), trace


__all__ = [
    "CONTRACT_NAME",
    "LEVELS",
    "BatchPlan",
    "ContractArtifact",
    "Deployed",
    "ParamBlock",
    "Revert",
    "deploy",
    "encode_set_weights",
    "generate_contract",
    "op_trace",
    "param_layout",
    "plan_weight_upload",
]
