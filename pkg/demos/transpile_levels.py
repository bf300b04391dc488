"""
Four optimization levels of one contract
========================================

The contract is built once as a statement IR and lowered by successively
longer pass pipelines. Every level performs the same multiplications and
additions in the same order.
"""

import numpy as np

from nn2evm.codegen import LEVELS, generate_contract, op_trace
from nn2evm.inference import forward_fixed, quantize_model
from nn2evm.model_ir import ArchSpec, Model
from nn2evm.trainer import init_params

arch = ArchSpec(784, (4, 10))
ws, bs = init_params(arch, np.random.default_rng(0))
qm = quantize_model(Model(arch, tuple(ws), tuple(bs)), 18)

arts = {lv: generate_contract(qm, lv) for lv in LEVELS}
for lv, art in arts.items():
    print(lv, art.source_bytes, "source bytes")

# the level D forward pass: invariant index math is hoisted out of the loops
src = arts["D"].source
print(src[src.index("function _forward") :])

# same trace at every level, and it matches the Python simulation
x = [int(v) * 10**18 // 255 for v in np.random.default_rng(1).integers(0, 256, 784)]
ref = []
logits = forward_fixed(qm, x, ref)
for lv, art in arts.items():
    print(lv, op_trace(art, qm, x) == (logits, ref))
