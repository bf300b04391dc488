"""Turn a trained MLP into an EVM inference contract.

The pipeline: train (or load) a float model, quantize it to SD59x18 fixed
point, emit Solidity at optimization level A-D, split the weight upload into
gas-bounded transactions and estimate what all of it costs. The fixed-point
forward pass in :mod:`nn2evm.inference` reproduces the contract's arithmetic
exactly, so on-chain predictions can be checked without a chain.
"""
from .codegen import BatchPlan, ContractArtifact, generate_contract, plan_weight_upload
from .data import ImageSet, LabelSet, load_mnist
from .errors import Nn2EvmError
from .fixed_point import FP, fp_add, fp_mul, quantize
from .gas import GasConfig, GasReport, estimate_deploy_gas, estimate_tx_gas, estimate_upload_gas, to_fiat
from .inference import QuantizedModel, evaluate, forward_fixed, forward_float, precision_sweep, quantize_model
from .model_ir import ArchSpec, Model, load_model_manifest, parse_arch_notation, save_model_manifest
from .trainer import HyperParams, train_mlp

__version__ = "0.1.0"

__all__ = [
    "FP",
    "ArchSpec",
    "BatchPlan",
    "ContractArtifact",
    "GasConfig",
    "GasReport",
    "HyperParams",
    "ImageSet",
    "LabelSet",
    "Model",
    "Nn2EvmError",
    "QuantizedModel",
    "estimate_deploy_gas",
    "estimate_tx_gas",
    "estimate_upload_gas",
    "evaluate",
    "forward_fixed",
    "forward_float",
    "fp_add",
    "fp_mul",
    "generate_contract",
    "load_mnist",
    "load_model_manifest",
    "parse_arch_notation",
    "plan_weight_upload",
    "precision_sweep",
    "quantize",
    "quantize_model",
    "save_model_manifest",
    "to_fiat",
    "train_mlp",
]
