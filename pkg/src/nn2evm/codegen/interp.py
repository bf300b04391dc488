"""Reference interpreter for the contract IR.

Runs a lowered :class:`~.ir.Contract` with Solidity 0.8 semantics for the
subset the generator emits: checked ``uint256``/``int256`` arithmetic,
signed division truncating toward zero, bounds-checked arrays, calldata and
storage arrays copied on assignment to memory, memory arrays aliased.

Every fixed-point operation is optionally logged as ``("mul", a, b)`` or
``("add", a, b)``, the same record format as
:func:`nn2evm.inference.forward_fixed`.
"""
from __future__ import annotations

from .ir import (
    Assign,
    BinOp,
    Call,
    Cast,
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
    Unwrap,
    Wrap,
)

UINT_MAX = 2**256 - 1
INT_MIN, INT_MAX = -(2**255), 2**255 - 1
SCALE = 10**18


class Revert(Exception):
    """Execution reverted; ``args[0]`` is the reason."""


class _Returned(Exception):
    def __init__(self, value):
        self.value = value


def _int256(v: int) -> int:
    if v < INT_MIN or v > INT_MAX:
        raise Revert("arithmetic overflow (int256)")
    return v


def _uint256(v: int) -> int:
    if v < 0 or v > UINT_MAX:
        raise Revert("arithmetic overflow (uint256)")
    return v


class Deployed:
    """A contract instance with its own storage."""

    def __init__(self, contract: Contract, deployer: str = "deployer"):
        self.contract = contract
        self.constants = {k.name: k.value for k in contract.constants}
        self.storage: dict[str, object] = {}
        for v in contract.state:
            if "[" in v.type:
                size = int(v.type[v.type.index("[") + 1 : v.type.index("]")])
                self.storage[v.name] = list(v.init) if v.init is not None else [0] * size
            else:
                self.storage[v.name] = 0
        self._functions = {f.name: f for f in contract.functions}
        self.trace: list | None = None
        self._run(contract.constructor, {"msg.sender": deployer})

    # -- public API --------------------------------------------------------

    def call(self, name: str, *args, sender: str = "deployer", trace: list | None = None):
        fn = self._functions[name]
        if fn.visibility not in ("external", "public"):
            raise AttributeError(f"{name} is not externally callable")
        self.trace = trace
        try:
            return self._invoke(fn, [tuple(a) if isinstance(a, (list, tuple)) else a for a in args], sender)
        finally:
            self.trace = None

    # -- execution ---------------------------------------------------------

    def _invoke(self, fn: Function, args, sender):
        if len(args) != len(fn.params):
            raise TypeError(f"{fn.name} takes {len(fn.params)} arguments")
        env = {"msg.sender": sender}
        env.update({n: a for (_, n), a in zip(fn.params, args)})
        try:
            self._run(fn.body, env)
        except _Returned as r:
            return r.value
        return None

    def _run(self, body, env):
        for s in body:
            self._exec(s, env)

    def _exec(self, s, env):
        if isinstance(s, Decl):
            v = 0 if s.init is None else self._eval(s.init, env)
            if s.type.endswith("memory") and isinstance(v, (list, tuple)) and not self._is_memory(v):
                v = list(v)
            env[s.name] = v
        elif isinstance(s, Assign):
            v = self._eval(s.value, env)
            self._store(s.target, v, env)
        elif isinstance(s, For):
            had = s.var in env
            saved = env.get(s.var)
            env[s.var] = self._eval(s.start, env)
            while self._eval(s.cond, env):
                self._run(s.body, env)
                env[s.var] = _uint256(env[s.var] + 1)
            if had:
                env[s.var] = saved
            else:
                del env[s.var]
        elif isinstance(s, If):
            if self._eval(s.cond, env):
                self._run(s.body, env)
        elif isinstance(s, Require):
            if not self._eval(s.cond, env):
                raise Revert(s.message)
        elif isinstance(s, Return):
            raise _Returned(self._eval(s.value, env))
        else:
            raise TypeError(s)

    def _is_memory(self, v) -> bool:
        return isinstance(v, list) and not any(v is sv for sv in self.storage.values())

    def _lookup(self, name: str, env):
        if name in env:
            return env[name]
        if name in self.constants:
            return self.constants[name]
        if name in self.storage:
            return self.storage[name]
        raise NameError(name)

    def _store(self, target, v, env):
        if isinstance(target, Name):
            if target.id in env:
                env[target.id] = v
            elif target.id in self.storage:
                self.storage[target.id] = v
            else:
                raise NameError(target.id)
            return
        if isinstance(target, Index):
            arr = self._eval(target.base, env)
            i = self._eval(target.index, env)
            if not isinstance(arr, list):
                raise TypeError("cannot assign into calldata")
            if not 0 <= i < len(arr):
                raise Revert("array index out of bounds")
            arr[i] = v
            return
        raise TypeError(target)

    def _eval(self, e, env):
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Name):
            return self._lookup(e.id, env)
        if isinstance(e, Index):
            arr = self._eval(e.base, env)
            i = self._eval(e.index, env)
            if not 0 <= i < len(arr):
                raise Revert("array index out of bounds")
            return arr[i]
        if isinstance(e, Length):
            return len(self._eval(e.base, env))
        if isinstance(e, BinOp):
            if e.op == "&&":
                return bool(self._eval(e.left, env)) and bool(self._eval(e.right, env))
            if e.op == "||":
                return bool(self._eval(e.left, env)) or bool(self._eval(e.right, env))
            a, b = self._eval(e.left, env), self._eval(e.right, env)
            if e.op == "+":
                return _uint256(a + b)
            if e.op == "-":
                return _uint256(a - b)
            if e.op == "*":
                return _uint256(a * b)
            if e.op == "<":
                return a < b
            if e.op == "<=":
                return a <= b
            if e.op == ">":
                return a > b
            if e.op == "==":
                return a == b
            raise ValueError(e.op)
        if isinstance(e, FpMul):
            a, b = self._eval(e.a, env), self._eval(e.b, env)
            if self.trace is not None:
                self.trace.append(("mul", a, b))
            p = _int256(a * b)
            q = abs(p) // SCALE
            return -q if p < 0 else q
        if isinstance(e, FpAdd):
            a, b = self._eval(e.a, env), self._eval(e.b, env)
            if self.trace is not None:
                self.trace.append(("add", a, b))
            return _int256(a + b)
        if isinstance(e, (Wrap, Unwrap)):
            return self._eval(e.e, env)
        if isinstance(e, Cast):
            v = self._eval(e.e, env)
            bits = int(e.type.removeprefix("uint"))
            return v % (1 << bits)
        if isinstance(e, NewArray):
            return [0] * self._eval(e.length, env)
        if isinstance(e, Call):
            fn = self._functions[e.func]
            return self._invoke(fn, [self._eval(a, env) for a in e.args], env.get("msg.sender"))
        raise TypeError(e)
