"""Statement IR for the emitted contract, plus tree utilities and the printer.

Expressions and statements are frozen dataclasses, so passes rebuild trees
instead of mutating them and structural equality (CSE, pattern matching)
comes for free.

Fixed-point arithmetic has dedicated nodes, :class:`FpMul` and
:class:`FpAdd`. Their ``style`` only changes how they print; every style
denotes the same checked ``int256`` operation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Iterator, Union


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: int
    text: str | None = None  # source spelling, e.g. "1e18"


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class Length:
    base: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * < <= > == && ||
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class FpMul:
    a: "Expr"
    b: "Expr"
    style: str = "lib"  # lib: mul(a, b) on SD59x18 | helper: _mul(a, b) | inline: a * b / 1e18


@dataclass(frozen=True)
class FpAdd:
    a: "Expr"
    b: "Expr"
    style: str = "lib"  # lib: add(a, b) on SD59x18 | op: a + b


@dataclass(frozen=True)
class Wrap:
    e: "Expr"


@dataclass(frozen=True)
class Unwrap:
    e: "Expr"


@dataclass(frozen=True)
class Cast:
    type: str
    e: "Expr"


@dataclass(frozen=True)
class NewArray:
    elem: str
    length: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple = ()


Expr = Union[Lit, Name, Index, Length, BinOp, FpMul, FpAdd, Wrap, Unwrap, Cast, NewArray, Call]


# -- statements --------------------------------------------------------------


@dataclass(frozen=True)
class Decl:
    type: str
    name: str
    init: Expr | None = None


@dataclass(frozen=True)
class Assign:
    target: Expr  # Name or Index
    value: Expr


@dataclass(frozen=True)
class For:
    var: str
    start: Expr
    cond: Expr
    body: tuple


@dataclass(frozen=True)
class If:
    cond: Expr
    body: tuple


@dataclass(frozen=True)
class Require:
    cond: Expr
    message: str


@dataclass(frozen=True)
class Return:
    value: Expr


Stmt = Union[Decl, Assign, For, If, Require, Return]


# -- contract ----------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    type: str
    name: str
    value: int


@dataclass(frozen=True)
class StateVar:
    type: str
    name: str
    init: tuple[int, ...] | None = None
    qualifiers: str = "private"


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[tuple[str, str], ...]
    returns: tuple[str, ...]
    visibility: str
    mutability: str
    body: tuple

    @property
    def signature(self) -> str:
        types = ",".join(t.split()[0] for t, _ in self.params)
        return f"{self.name}({types})"


@dataclass(frozen=True)
class Contract:
    name: str
    header: tuple[str, ...]
    constants: tuple[Constant, ...]
    state: tuple[StateVar, ...]
    constructor: tuple
    functions: tuple[Function, ...]
    uses_udvt: bool = True

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def replace_function(self, fn: Function) -> Contract:
        return replace(self, functions=tuple(fn if f.name == fn.name else f for f in self.functions))


# -- traversal ---------------------------------------------------------------

EXPR_TYPES = (Lit, Name, Index, Length, BinOp, FpMul, FpAdd, Wrap, Unwrap, Cast, NewArray, Call)


def children(e: Expr) -> Iterator[Expr]:
    for f in fields(e):
        v = getattr(e, f.name)
        if isinstance(v, EXPR_TYPES):
            yield v
        elif isinstance(v, tuple):
            yield from (x for x in v if isinstance(x, EXPR_TYPES))


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from walk_expr(c)


def map_expr(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Bottom-up rewrite: children first, then ``fn`` on the rebuilt node."""
    changes = {}
    for f in fields(e):
        v = getattr(e, f.name)
        if isinstance(v, EXPR_TYPES):
            changes[f.name] = map_expr(v, fn)
        elif isinstance(v, tuple) and any(isinstance(x, EXPR_TYPES) for x in v):
            changes[f.name] = tuple(map_expr(x, fn) if isinstance(x, EXPR_TYPES) else x for x in v)
    return fn(replace(e, **changes) if changes else e)


def stmt_exprs(s: Stmt) -> Iterator[Expr]:
    """Expressions directly owned by ``s`` (not those of nested statements)."""
    if isinstance(s, Decl):
        if s.init is not None:
            yield s.init
    elif isinstance(s, Assign):
        yield s.target
        yield s.value
    elif isinstance(s, For):
        yield s.start
        yield s.cond
    elif isinstance(s, (If, Require)):
        yield s.cond
    elif isinstance(s, Return):
        yield s.value


def walk_stmts(body) -> Iterator[Stmt]:
    for s in body:
        yield s
        if isinstance(s, (For, If)):
            yield from walk_stmts(s.body)


def map_stmt_exprs(s: Stmt, fn: Callable[[Expr], Expr], deep: bool = True) -> Stmt:
    """Apply ``fn`` (as a whole-expression rewrite) to every expression of ``s``."""
    if isinstance(s, Decl):
        return s if s.init is None else replace(s, init=fn(s.init))
    if isinstance(s, Assign):
        return replace(s, target=fn(s.target), value=fn(s.value))
    if isinstance(s, For):
        body = tuple(map_stmt_exprs(x, fn, deep) for x in s.body) if deep else s.body
        return replace(s, start=fn(s.start), cond=fn(s.cond), body=body)
    if isinstance(s, If):
        body = tuple(map_stmt_exprs(x, fn, deep) for x in s.body) if deep else s.body
        return replace(s, cond=fn(s.cond), body=body)
    if isinstance(s, Require):
        return replace(s, cond=fn(s.cond))
    if isinstance(s, Return):
        return replace(s, value=fn(s.value))
    raise TypeError(s)


def substitute(e: Expr, old: Expr, new: Expr) -> Expr:
    return map_expr(e, lambda n: new if n == old else n)


def names_in(e: Expr) -> set[str]:
    return {n.id for n in walk_expr(e) if isinstance(n, Name)}


def assigned_names(body) -> set[str]:
    """Scalars and arrays written anywhere in ``body`` (including loop variables)."""
    out = set()
    for s in walk_stmts(body):
        if isinstance(s, Decl):
            out.add(s.name)
        elif isinstance(s, For):
            out.add(s.var)
        elif isinstance(s, Assign):
            t = s.target
            while isinstance(t, Index):
                t = t.base
            out.add(t.id)
    return out


def count_name_uses(body, name: str) -> int:
    n = 0
    for s in walk_stmts(body):
        for e in stmt_exprs(s):
            n += sum(1 for x in walk_expr(e) if x == Name(name))
    return n


def has_fp(e: Expr) -> bool:
    return any(isinstance(x, (FpMul, FpAdd)) for x in walk_expr(e))


# -- printer -----------------------------------------------------------------

_PREC = {"||": 1, "&&": 2, "==": 3, "<": 4, ">": 4, "<=": 4, "+": 5, "-": 5, "*": 6, "/": 6}


def fmt(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Lit):
        return e.text or str(e.value)
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Index):
        return f"{fmt(e.base, 9)}[{fmt(e.index)}]"
    if isinstance(e, Length):
        return f"{fmt(e.base, 9)}.length"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        s = f"{fmt(e.left, p)} {e.op} {fmt(e.right, p + 1)}"
        return f"({s})" if p < parent else s
    if isinstance(e, FpMul):
        if e.style == "lib":
            return f"mul({fmt(e.a)}, {fmt(e.b)})"
        if e.style == "helper":
            return f"_mul({fmt(e.a)}, {fmt(e.b)})"
        s = f"{fmt(e.a, 6)} * {fmt(e.b, 7)} / 1e18"
        return f"({s})" if 6 < parent else s
    if isinstance(e, FpAdd):
        if e.style == "lib":
            return f"add({fmt(e.a)}, {fmt(e.b)})"
        s = f"{fmt(e.a, 5)} + {fmt(e.b, 6)}"
        return f"({s})" if 5 < parent else s
    if isinstance(e, Wrap):
        return f"SD59x18.wrap({fmt(e.e)})"
    if isinstance(e, Unwrap):
        return f"SD59x18.unwrap({fmt(e.e)})"
    if isinstance(e, Cast):
        return f"{e.type}({fmt(e.e)})"
    if isinstance(e, NewArray):
        return f"new {e.elem}[]({fmt(e.length)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(fmt(a) for a in e.args)})"
    raise TypeError(e)


def _fmt_assign(s: Assign) -> str:
    t, v = s.target, s.value
    if isinstance(v, BinOp) and v.op == "+" and v.left == t:
        return f"{fmt(t)} += {fmt(v.right)};"
    if isinstance(v, FpAdd) and v.style == "op" and v.a == t:
        return f"{fmt(t)} += {fmt(v.b, 6)};"
    return f"{fmt(t)} = {fmt(v)};"


def fmt_stmts(body, indent: int) -> list[str]:
    pad = "    " * indent
    out = []
    for s in body:
        if isinstance(s, Decl):
            init = "" if s.init is None else f" = {fmt(s.init)}"
            out.append(f"{pad}{s.type} {s.name}{init};")
        elif isinstance(s, Assign):
            out.append(pad + _fmt_assign(s))
        elif isinstance(s, For):
            out.append(f"{pad}for (uint256 {s.var} = {fmt(s.start)}; {fmt(s.cond)}; {s.var}++) {{")
            out.extend(fmt_stmts(s.body, indent + 1))
            out.append(pad + "}")
        elif isinstance(s, If):
            out.append(f"{pad}if ({fmt(s.cond)}) {{")
            out.extend(fmt_stmts(s.body, indent + 1))
            out.append(pad + "}")
        elif isinstance(s, Require):
            out.append(f'{pad}require({fmt(s.cond)}, "{s.message}");')
        elif isinstance(s, Return):
            out.append(f"{pad}return {fmt(s.value)};")
        else:
            raise TypeError(s)
    return out


_LIB_PREAMBLE = """\
type SD59x18 is int256;

function mul(SD59x18 a, SD59x18 b) pure returns (SD59x18) {
    return SD59x18.wrap(SD59x18.unwrap(a) * SD59x18.unwrap(b) / 1e18);
}

function add(SD59x18 a, SD59x18 b) pure returns (SD59x18) {
    return SD59x18.wrap(SD59x18.unwrap(a) + SD59x18.unwrap(b));
}
"""

_HELPER = """\
    function _mul(int256 a, int256 b) private pure returns (int256) {
        return a * b / 1e18;
    }
"""


def _fp_styles(contract: Contract) -> set[str]:
    styles = set()
    for f in contract.functions:
        for s in walk_stmts(f.body):
            for e in stmt_exprs(s):
                for x in walk_expr(e):
                    if isinstance(x, (FpMul, FpAdd, Wrap, Unwrap)):
                        styles.add(getattr(x, "style", "lib"))
    return styles


def _fmt_state(v: StateVar) -> str:
    init = ""
    if v.init is not None:
        head, *rest = v.init
        elem = v.type.split("[")[0]
        init = " = [" + ", ".join([f"{elem}({head})"] + [str(x) for x in rest]) + "]"
    return f"    {v.type} {v.qualifiers} {v.name}{init};"


def _fmt_function(f: Function) -> list[str]:
    params = ", ".join(f"{t} {n}" for t, n in f.params)
    quals = " ".join(q for q in (f.visibility, f.mutability) if q)
    rets = f" returns ({', '.join(f.returns)})" if f.returns else ""
    return [f"    function {f.name}({params}) {quals}{rets} {{", *fmt_stmts(f.body, 2), "    }"]


def print_contract(c: Contract) -> str:
    """Render ``c`` as Solidity source. Only the helpers actually used are emitted."""
    styles = _fp_styles(c)
    lines = list(c.header) + [""]
    if c.uses_udvt and "lib" in styles:
        lines += _LIB_PREAMBLE.splitlines() + [""]
    lines.append(f"contract {c.name} {{")
    lines += [f"    {k.type} private constant {k.name} = {k.value};" for k in c.constants]
    lines += [_fmt_state(v) for v in c.state]
    lines += ["", "    constructor() {", *fmt_stmts(c.constructor, 2), "    }"]
    for f in c.functions:
        lines.append("")
        lines += _fmt_function(f)
    if "helper" in styles:
        lines.append("")
        lines += _HELPER.rstrip("\n").splitlines()
    lines.append("}")
    return "\n".join(lines) + "\n"
