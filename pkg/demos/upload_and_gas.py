"""
Uploading weights and what it costs
===================================

Weights are written after deployment through ``setWeights`` calls. The
planner packs them greedily under a fraction of the block gas limit.
"""

import numpy as np

from nn2evm.codegen import generate_contract, plan_weight_upload
from nn2evm.gas import estimate_deploy_gas, estimate_upload_gas, reports_to_csv, to_fiat
from nn2evm.inference import quantize_model
from nn2evm.model_ir import ArchSpec, Model
from nn2evm.trainer import init_params


def model(hidden):
    arch = ArchSpec(784, (hidden, 10))
    ws, bs = init_params(arch, np.random.default_rng(0))
    return quantize_model(Model(arch, tuple(ws), tuple(bs)), 18)


qm = model(4)
plan = plan_weight_upload(qm, gas_limit=15_000_000, margin=0.9)
print(len(plan), "transactions of", [len(b.values) for b in plan.batches], "values")

# a raised local gas limit takes everything in one go
print(len(plan_weight_upload(qm, 67_500_000_000)), "transaction")

print(reports_to_csv([estimate_deploy_gas(generate_contract(qm, "D")), estimate_upload_gas(plan)]))

# fiat at 4 gwei and 2,500 USD per ETH
print(to_fiat(73_721_648), to_fiat(1_339_833))

# upload cost grows with every hidden neuron; deployment does not
for h in (2, 4, 8, 16, 32):
    q = model(h)
    up = estimate_upload_gas(plan_weight_upload(q, 15_000_000)).gas
    dep = estimate_deploy_gas(generate_contract(q, "D")).gas
    print(f"{h:3d} hidden  upload {up:>11,}  deploy {dep:,}")
