"""
Running the contract on a local EVM
===================================

Needs a Solidity compiler (``solc``/``solcjs`` on PATH or ``$NN2EVM_SOLC``)
and ``py-evm``. Deploys level D, uploads a small model in several
transactions and checks ``logits`` against the Python simulation.
"""

import numpy as np
from eth._utils.address import generate_contract_address
from eth.chains.base import MiningChain
from eth.db.atomic import AtomicDB
from eth.vm.forks import CancunVM
from eth.vm.spoof import SpoofTransaction
from eth_keys import keys
from eth_utils import keccak

from nn2evm.codegen import generate_contract, plan_weight_upload
from nn2evm.codegen.compiler import compile_source
from nn2evm.codegen.upload import encode_word
from nn2evm.inference import forward_fixed, quantize_model
from nn2evm.model_ir import ArchSpec, Model
from nn2evm.trainer import init_params

key = keys.PrivateKey(b"\x01" * 32)
me = key.public_key.to_canonical_address()
chain = MiningChain.configure(__name__="Local", vm_configuration=((0, CancunVM),), chain_id=1337).from_genesis(
    AtomicDB(), {"gas_limit": 10**9, "difficulty": 0}, {me: {"balance": 10**30, "nonce": 0, "code": b"", "storage": {}}}
)


def tx(to, data, gas):
    vm = chain.get_vm()
    return vm.create_unsigned_transaction(nonce=vm.state.get_nonce(me), gas_price=10**10, gas=gas, to=to, value=0, data=data)


def send(to, data, gas=30_000_000):
    _, receipt, comp = chain.apply_transaction(tx(to, data, gas).as_signed_transaction(key, chain_id=1337))
    chain.mine_block()
    comp.raise_if_error()
    return receipt.gas_used


arch = ArchSpec(20, (8, 4))
ws, bs = init_params(arch, np.random.default_rng(3))
qm = quantize_model(Model(arch, tuple(ws), tuple(bs)), 18)

code = compile_source(generate_contract(qm, "D").source).bytecode
addr = generate_contract_address(me, 0)
print("deployment gas", send(b"", code))

for b in plan_weight_upload(qm, gas_limit=1_000_000).batches:
    print("setWeights", b.layer, b.offset, len(b.values), "values, gas", send(addr, b.calldata(), 1_000_000))

# logits is a view: call it without a transaction
x = [int(v) for v in np.random.default_rng(4).integers(0, 10**18, 20)]
data = keccak(text="logits(int256[])")[:4] + encode_word(32) + encode_word(len(x)) + b"".join(encode_word(v) for v in x)
out = chain.get_transaction_result(SpoofTransaction(tx(addr, data, 10**8), from_=me), chain.get_canonical_head())
words = [int.from_bytes(out[i : i + 32], "big") for i in range(64, len(out), 32)]
onchain = [w - (1 << 256) if w >> 255 else w for w in words]
print(onchain)
print("matches forward_fixed:", onchain == forward_fixed(qm, x))
