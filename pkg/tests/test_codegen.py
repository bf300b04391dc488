import re

import pytest

from nn2evm.codegen import LEVELS, Revert, deploy, generate_contract, op_trace
from nn2evm.codegen.build import build_contract
from nn2evm.codegen.interp import Deployed
from nn2evm.codegen.ir import (
    Assign,
    BinOp,
    Decl,
    For,
    FpAdd,
    FpMul,
    Function,
    Index,
    Lit,
    Name,
    NewArray,
    Return,
    print_contract,
)
from nn2evm.codegen.passes import (
    eliminate_common,
    fuse_loops,
    hoist_invariants,
    inline_temporaries,
    lower,
)
from nn2evm.errors import CodegenError
from nn2evm.fixed_point import SCALE
from nn2evm.inference import forward_fixed, quantize_model
from nn2evm.model_ir import ArchSpec, Model

from conftest import random_dims, random_model


def _as_ints(rows):
    return [(op, int(a), int(b)) for op, a, b in rows]


# -- the hand-traced fixture ---------------------------------------------------


def test_fixture_forward_fixed(toy_122):
    qm, doc = toy_122
    x = [int(v) for v in doc["input"]]
    trace = []
    assert forward_fixed(qm, x, trace) == [int(v) for v in doc["logits"]]
    assert trace == _as_ints(doc["trace"])


@pytest.mark.parametrize("level", LEVELS)
def test_fixture_contract_execution(toy_122, level):
    qm, doc = toy_122
    art = generate_contract(qm, level)
    inst = deploy(art, qm=qm)
    x = [int(v) for v in doc["input"]]
    trace = []
    assert inst.call("logits", x, trace=trace) == [int(v) for v in doc["logits"]]
    assert trace == _as_ints(doc["trace"])
    assert inst.call("classify", x) == doc["class"]


def test_truncation_not_floor_in_fixture(toy_122):
    _, doc = toy_122
    # -0.333333333333333333 * 0.6 floors to -0.2 but truncates to -0.199999999999999999
    assert int(doc["trace"][9][2]) == -199999999999999999


# -- level equivalence -----------------------------------------------------------


def test_all_levels_trace_identically(rng):
    for _ in range(20):
        dims = random_dims(rng, 3, 5)
        qm = quantize_model(random_model(rng, dims), int(rng.integers(0, 19)))
        x = [int(v) for v in rng.integers(-2 * SCALE, 2 * SCALE, size=dims[0])]
        ref = []
        out = forward_fixed(qm, x, ref)
        for level in LEVELS:
            logits, trace = op_trace(generate_contract(qm, level), qm, x)
            assert logits == out and trace == ref, (dims, level)


def test_levels_on_784_model(qm_784, rng):
    x = [int(b) * SCALE // 255 for b in rng.integers(0, 256, size=784)]
    ref = []
    out = forward_fixed(qm_784, x, ref)
    for level in LEVELS:
        logits, trace = op_trace(generate_contract(qm_784, level), qm_784, x)
        assert logits == out and trace == ref


# -- source properties ------------------------------------------------------------


def test_source_shrinks_with_level(qm_784):
    sizes = [generate_contract(qm_784, lv).source_bytes for lv in LEVELS]
    assert sizes == sorted(sizes, reverse=True) and sizes[0] > sizes[-1]


def test_source_shrinks_for_random_architectures(rng):
    for _ in range(10):
        dims = random_dims(rng, 4, 40)
        qm = quantize_model(Model.zeros(ArchSpec(dims[0], tuple(dims[1:]))), 18)
        sizes = [generate_contract(qm, lv).source_bytes for lv in LEVELS]
        assert sizes == sorted(sizes, reverse=True) and sizes[0] > sizes[-1], dims


def test_source_is_deterministic(qm_784):
    for lv in LEVELS:
        assert generate_contract(qm_784, lv).source == generate_contract(qm_784, lv).source


def test_source_does_not_embed_weights(rng):
    dims = [3, 2, 2]
    a = generate_contract(quantize_model(random_model(rng, dims), 18), "D")
    b = generate_contract(quantize_model(random_model(rng, dims), 18), "D")
    assert a.source == b.source


def test_level_features(qm_784):
    src = {lv: generate_contract(qm_784, lv).source for lv in LEVELS}
    assert "SD59x18.wrap" in src["A"] and "type SD59x18 is int256;" in src["A"]
    assert "SD59x18" not in src["B"] and "_mul(" in src["B"]
    assert "_mul(" not in src["C"] and "/ 1e18" in src["C"]
    assert re.search(r"uint256 t\d+ = ", src["D"]) and "t" not in re.findall(r"uint256 (\w+) = ", src["C"])
    for s in src.values():
        assert s.startswith("// SPDX-License-Identifier: MIT\npragma solidity ^0.8.19;\n")
        assert "function classify(int256[] calldata x) external view returns (uint8)" in s
        assert "function setWeights(uint256 layer, uint256 offset, int256[] calldata values) external" in s
        assert "import" not in s


def test_artifact_metadata(qm_784):
    art = generate_contract(qm_784, "C")
    assert art.opt_level == "C"
    assert art.source_bytes == len(art.source.encode())
    assert art.function_signatures == {
        "setWeights": "setWeights(uint256,uint256,int256[])",
        "classify": "classify(int256[])",
        "logits": "logits(int256[])",
    }
    assert art.ir.function("classify").mutability == "view"
    covered = sorted((b.offset, b.offset + b.length) for b in art.param_layout)
    assert covered[0][0] == 0 and covered[-1][1] == 3190
    assert all(a[1] == b[0] for a, b in zip(covered, covered[1:]))
    assert [(b.layer, b.kind) for b in art.param_layout] == [(0, "weight"), (0, "bias"), (1, "weight"), (1, "bias")]


def test_codegen_errors(rng):
    with pytest.raises(CodegenError):
        generate_contract(quantize_model(Model.zeros(ArchSpec(2, (2, 2), ("none", "none"))), 18), "A")
    with pytest.raises(CodegenError):
        generate_contract(quantize_model(Model.zeros(ArchSpec(1, (257,))), 0), "A")
    with pytest.raises(CodegenError):
        generate_contract(quantize_model(Model.zeros(ArchSpec(3, (2,))), 0), "Z")
    with pytest.raises(CodegenError):
        generate_contract(quantize_model(Model.zeros(ArchSpec(3, (2,))), 0), "A", max_params=7)


# -- interpreter semantics ----------------------------------------------------------


def _deployed(level="D", dims=(2, 2)):
    arch = ArchSpec(dims[0], tuple(dims[1:]))
    return Deployed(lower(build_contract(arch), level)), arch


@pytest.mark.parametrize("level", LEVELS)
def test_setter_guards(level):
    inst, arch = _deployed(level, (2, 3, 2))
    with pytest.raises(Revert, match="not owner"):
        inst.call("setWeights", 0, 0, [1], sender="mallory")
    with pytest.raises(Revert, match="bad layer"):
        inst.call("setWeights", 2, 0, [1])
    with pytest.raises(Revert, match="out of range"):
        inst.call("setWeights", 1, 7, [1, 2])
    inst.call("setWeights", 1, 0, list(range(1, 9)))
    assert inst.storage["params"][9:17] == list(range(1, 9))
    with pytest.raises(Revert, match="bad input length"):
        inst.call("logits", [0])


def test_batch_may_span_layers():
    inst, arch = _deployed("D", (2, 3, 2))
    inst.call("setWeights", 0, 5, list(range(100, 112)))
    assert inst.storage["params"][5:17] == list(range(100, 112))


def test_fixed_point_overflow_reverts():
    inst, _ = _deployed("C", (1, 1))
    inst.call("setWeights", 0, 0, [2**254, 0])
    with pytest.raises(Revert, match="overflow"):
        inst.call("logits", [4])


def test_internal_function_not_callable():
    inst, _ = _deployed()
    with pytest.raises(AttributeError):
        inst.call("_forward", [0, 0])


# -- individual passes ------------------------------------------------------------


def _fn(body):
    return Function("f", (("int256[] calldata", "x"),), ("int256",), "internal", "view", tuple(body))


def _contract_with(fn):
    c = build_contract(ArchSpec(1, (1,)))
    return c.replace_function(fn) if any(f.name == fn.name for f in c.functions) else type(c)(
        c.name, c.header, c.constants, c.state, c.constructor, c.functions + (fn,), c.uses_udvt
    )


def _run(fn, *args):
    c = _contract_with(fn)
    inst = Deployed(c)
    inst._functions[fn.name] = fn
    trace = []
    inst.trace = trace
    return inst._invoke(fn, list(args), "deployer"), trace


def test_fuse_refuses_cross_iteration_dependence():
    i = Name("i")
    n = Lit(3)
    body = [
        Decl("int256[] memory", "z", NewArray("int256", n)),
        For("i", Lit(0), BinOp("<", i, n), (Assign(Index(Name("z"), i), Index(Name("x"), i)),)),
        # reads z[0] from every iteration: must not run before the first loop finishes
        For("i", Lit(0), BinOp("<", i, n), (Assign(Index(Name("z"), i), FpAdd(Index(Name("z"), i), Index(Name("z"), Lit(0)), "op")),)),
        Return(Index(Name("z"), Lit(2))),
    ]
    f = _fn(body)
    out = fuse_loops(_contract_with(f)).function("f")
    assert sum(isinstance(s, For) for s in out.body) == 2
    assert _run(out, (1, 2, 3)) == _run(f, (1, 2, 3))


def test_fuse_merges_elementwise_loops():
    i = Name("i")
    n = Lit(3)
    body = [
        Decl("int256[] memory", "z", NewArray("int256", n)),
        For("i", Lit(0), BinOp("<", i, n), (Assign(Index(Name("z"), i), Index(Name("x"), i)),)),
        For("i", Lit(0), BinOp("<", i, n), (Assign(Index(Name("z"), i), FpAdd(Index(Name("z"), i), Lit(5), "op")),)),
        Return(Index(Name("z"), Lit(2))),
    ]
    f = _fn(body)
    out = fuse_loops(_contract_with(f)).function("f")
    assert sum(isinstance(s, For) for s in out.body) == 1
    assert _run(out, (1, 2, 3)) == _run(f, (1, 2, 3))


def test_inline_keeps_fp_order():
    # p = a*b is computed before q = c*d; folding p into "q + p" would swap the two products
    body = [
        Decl("int256", "p", FpMul(Index(Name("x"), Lit(0)), Index(Name("x"), Lit(1)), "inline")),
        Decl("int256", "q", FpMul(Index(Name("x"), Lit(1)), Index(Name("x"), Lit(1)), "inline")),
        Return(FpAdd(Name("q"), Name("p"), "op")),
    ]
    f = _fn(body)
    out = inline_temporaries(_contract_with(f)).function("f")
    assert _run(out, (3 * SCALE, 5 * SCALE)) == _run(f, (3 * SCALE, 5 * SCALE))


def test_cse_respects_reassignment():
    k = Name("k")
    body = [
        Decl("uint256", "k", Lit(1)),
        Decl("uint256", "a", BinOp("+", k, Lit(2))),
        Assign(k, BinOp("+", k, Lit(2))),  # right-hand side may reuse a
        Decl("uint256", "b", BinOp("+", k, Lit(2))),  # but not here: k changed
        Return(BinOp("*", Name("a"), Name("b"))),
    ]
    f = _fn(body)
    out = eliminate_common(_contract_with(f)).function("f")
    assert out.body[2] == Assign(k, Name("a"))
    assert out.body[3] == body[3]
    assert _run(out, ())[0] == _run(f, ())[0] == 3 * 5


def test_hoist_moves_invariant_lookups():
    c = lower(build_contract(ArchSpec(3, (4, 2))), "C")
    fwd = hoist_invariants(c).function("_forward")
    inner = [s for s in fwd.body if isinstance(s, For)][0]
    decls = [s.name for s in inner.body if isinstance(s, Decl) and s.name.startswith("t")]
    assert len(decls) >= 2


def test_printer_precedence():
    e = BinOp("*", BinOp("+", Name("a"), Name("b")), Name("c"))
    f = Function("g", (), ("uint256",), "internal", "pure", (Return(e),))
    c = _contract_with(f)
    assert "return (a + b) * c;" in print_contract(c)
    e2 = BinOp("+", Name("a"), BinOp("*", Name("b"), Name("c")))
    assert "return a + b * c;" in print_contract(c.replace_function(Function("g", (), ("uint256",), "internal", "pure", (Return(e2),))))
