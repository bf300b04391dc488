"""Baseline contract IR for a given architecture.

The baseline is a literal translation: every parameter read is wrapped into
``SD59x18``, every intermediate value gets its own local, activations are
copied through fresh buffers, and layer widths are re-read from storage on
every use. The optimization passes in :mod:`.passes` remove that overhead.

Storage layout: all parameters live in one fixed-size ``int256`` array,
layer after layer, each layer holding its weights row-major followed by its
biases. ``setWeights(layer, offset, values)`` writes ``values`` contiguously
starting at ``offset`` inside ``layer``'s block; a batch may run past the end
of that block into the following layers.
"""
from __future__ import annotations

from ..model_ir import ArchSpec
from .ir import (
    Assign,
    BinOp,
    Call,
    Cast,
    Constant,
    Contract,
    Decl,
    For,
    FpAdd,
    FpMul,
    Function,
    If,
    Index,
    Length,
    Lit,
    Name,
    NewArray,
    Require,
    Return,
    StateVar,
    Unwrap,
    Wrap,
)

PRAGMA = "pragma solidity ^0.8.19;"
CONTRACT_NAME = "MLPClassifier"

N = Name
ZERO = Lit(0)
ONE = Lit(1)


def _plus(a, b):
    return BinOp("+", a, b)


def _times(a, b):
    return BinOp("*", a, b)


def _lt(a, b):
    return BinOp("<", a, b)


def _dims(i):
    return Index(N("dims"), i)


def _layer_size(l):
    # dims[l + 1] * dims[l] + dims[l + 1]
    return _plus(_times(_dims(_plus(l, ONE)), _dims(l)), _dims(_plus(l, ONE)))


def _set_weights() -> Function:
    l, k = N("l"), N("k")
    body = (
        Require(BinOp("==", N("msg.sender"), N("owner")), "not owner"),
        Require(_lt(N("layer"), N("N_LAYERS")), "bad layer"),
        Decl("uint256", "start", N("offset")),
        For("l", ZERO, _lt(l, N("layer")), (Assign(N("start"), _plus(N("start"), _layer_size(l))),)),
        Require(BinOp("<=", _plus(N("start"), Length(N("values"))), N("N_PARAMS")), "out of range"),
        For("k", ZERO, _lt(k, Length(N("values"))), (
            Assign(Index(N("params"), _plus(N("start"), k)), Index(N("values"), k)),
        )),
    )
    return Function(
        "setWeights",
        (("uint256", "layer"), ("uint256", "offset"), ("int256[] calldata", "values")),
        (),
        "external",
        "",
        body,
    )


def _forward() -> Function:
    l, i, j = N("l"), N("i"), N("j")
    act, z, nxt, x = N("act"), N("z"), N("next"), N("x")
    n_out = _dims(_plus(l, ONE))
    n_in = _dims(l)

    dot = (
        Decl("uint256", "wIdx", _plus(_plus(N("off"), _times(i, n_in)), j)),
        Decl("SD59x18", "w", Wrap(Index(N("params"), N("wIdx")))),
        Decl("SD59x18", "prod", FpMul(N("w"), Index(act, j))),
        Assign(N("acc"), FpAdd(N("acc"), N("prod"))),
    )
    neuron = (
        Decl("uint256", "bIdx", _plus(_plus(N("off"), _times(n_out, n_in)), i)),
        Decl("SD59x18", "acc", Wrap(Index(N("params"), N("bIdx")))),
        For("j", ZERO, _lt(j, n_in), dot),
        Assign(Index(z, i), N("acc")),
    )
    relu = (
        Decl("SD59x18", "v", Index(z, i)),
        If(
            BinOp("&&", _lt(_plus(l, ONE), N("N_LAYERS")), _lt(Unwrap(N("v")), ZERO)),
            (Assign(N("v"), Wrap(ZERO)),),
        ),
        Assign(Index(nxt, i), N("v")),
    )
    layer = (
        Decl("SD59x18[] memory", "z", NewArray("SD59x18", n_out)),
        For("i", ZERO, _lt(i, n_out), neuron),
        Decl("SD59x18[] memory", "next", NewArray("SD59x18", n_out)),
        For("i", ZERO, _lt(i, n_out), relu),
        Assign(act, nxt),
        Assign(N("off"), _plus(N("off"), _layer_size(l))),
    )
    body = (
        Require(BinOp("==", Length(x), _dims(ZERO)), "bad input length"),
        Decl("SD59x18[] memory", "act", NewArray("SD59x18", Length(x))),
        For("j", ZERO, _lt(j, Length(x)), (Assign(Index(act, j), Wrap(Index(x, j))),)),
        Decl("uint256", "off", ZERO),
        For("l", ZERO, _lt(l, N("N_LAYERS")), layer),
        Decl("int256[] memory", "out", NewArray("int256", Length(act))),
        For("i", ZERO, _lt(i, Length(act)), (Assign(Index(N("out"), i), Unwrap(Index(act, i))),)),
        Return(N("out")),
    )
    return Function("_forward", (("int256[] calldata", "x"),), ("int256[] memory",), "internal", "view", body)


def _classify() -> Function:
    i, out, best = N("i"), N("out"), N("best")
    body = (
        Decl("int256[] memory", "out", Call("_forward", (N("x"),))),
        Decl("uint256", "best", ZERO),
        For("i", ONE, _lt(i, Length(out)), (
            If(BinOp(">", Index(out, i), Index(out, best)), (Assign(best, i),)),
        )),
        Return(Cast("uint8", best)),
    )
    return Function("classify", (("int256[] calldata", "x"),), ("uint8",), "external", "view", body)


def _logits() -> Function:
    body = (Return(Call("_forward", (N("x"),))),)
    return Function("logits", (("int256[] calldata", "x"),), ("int256[] memory",), "external", "view", body)


def build_contract(arch: ArchSpec, comment: str = "") -> Contract:
    header = ["// SPDX-License-Identifier: MIT", PRAGMA]
    if comment:
        header += ["", f"// {comment}"]
    dims = arch.dims
    return Contract(
        name=CONTRACT_NAME,
        header=tuple(header),
        constants=(
            Constant("uint256", "N_LAYERS", len(arch.layer_dims)),
            Constant("uint256", "N_PARAMS", arch.n_params),
        ),
        state=(
            StateVar("address", "owner", qualifiers="private immutable"),
            StateVar(f"uint256[{len(dims)}]", "dims", tuple(dims)),
            StateVar(f"int256[{arch.n_params}]", "params"),
        ),
        constructor=(Assign(N("owner"), N("msg.sender")),),
        functions=(_set_weights(), _classify(), _logits(), _forward()),
    )
