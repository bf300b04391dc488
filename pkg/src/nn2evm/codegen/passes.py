"""Optimization passes over the contract IR and the four lowering pipelines.

Level A is the baseline. Each later level appends passes:

* B: drop ``SD59x18`` wrapping and redundant buffers/copies
* C: inline single-use temporaries, scalar loads/stores and the multiply helper
* D: fuse loops, keep values in locals, hoist loop invariants, CSE

No pass may add, drop or reorder :class:`~.ir.FpMul`/:class:`~.ir.FpAdd`
evaluations; the interpreter-based trace test enforces this.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Callable

from .ir import (
    Assign,
    BinOp,
    Call,
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
    assigned_names,
    count_name_uses,
    has_fp,
    map_expr,
    map_stmt_exprs,
    names_in,
    stmt_exprs,
    substitute,
    walk_expr,
    walk_stmts,
)

LEVELS = ("A", "B", "C", "D")


def _per_function(fn_pass: Callable[[Function, Contract], Function]) -> Callable[[Contract], Contract]:
    def run(c: Contract) -> Contract:
        return replace(c, functions=tuple(fn_pass(f, c) for f in c.functions))

    run.__name__ = fn_pass.__name__
    run.__doc__ = fn_pass.__doc__
    return run


def _map_body(body, fn: Callable[[tuple], tuple]) -> tuple:
    """Apply a block transform to ``body`` and, recursively, to every nested block."""
    out = []
    for s in body:
        if isinstance(s, (For, If)):
            s = replace(s, body=_map_body(s.body, fn))
        out.append(s)
    return fn(tuple(out))


def _type_env(f: Function, c: Contract) -> dict[str, str]:
    env = {k.name: k.type for k in c.constants}
    env.update({v.name: f"{v.type} storage" for v in c.state})
    env.update({n: t for t, n in f.params})
    for s in walk_stmts(f.body):
        if isinstance(s, Decl):
            env[s.name] = s.type
        elif isinstance(s, For):
            env[s.var] = "uint256"
    return env


def _base_name(e):
    while isinstance(e, Index):
        e = e.base
    return e.id if isinstance(e, Name) else None


def _written_arrays(body) -> set[str]:
    out = set()
    for s in walk_stmts(body):
        if isinstance(s, Assign) and isinstance(s.target, Index):
            out.add(_base_name(s.target))
    return out


# -- level B -----------------------------------------------------------------


def _strip(e):
    if isinstance(e, (Wrap, Unwrap)):
        return e.e
    if isinstance(e, FpMul) and e.style == "lib":
        return replace(e, style="helper")
    if isinstance(e, FpAdd) and e.style == "lib":
        return replace(e, style="op")
    if isinstance(e, NewArray) and e.elem == "SD59x18":
        return replace(e, elem="int256")
    return e


def _strip_stmt(s):
    s = map_stmt_exprs(s, lambda e: map_expr(e, _strip), deep=False)
    if isinstance(s, Decl):
        s = replace(s, type=s.type.replace("SD59x18", "int256"))
    if isinstance(s, (For, If)):
        s = replace(s, body=tuple(_strip_stmt(x) for x in s.body))
    return s


def strip_conversions(c: Contract) -> Contract:
    """Operate on raw ``int256`` directly instead of the wrapped fixed-point type."""
    fns = tuple(replace(f, body=tuple(_strip_stmt(s) for s in f.body)) for f in c.functions)
    return replace(c, functions=fns, uses_udvt=False)


@_per_function
def elide_copies(f: Function, c: Contract) -> Function:
    """``dst = new T[](len(src)); for i: dst[i] = src[i]`` becomes ``dst = src``."""
    env = _type_env(f, c)

    def block(stmts):
        out, k = [], 0
        while k < len(stmts):
            s = stmts[k]
            nxt = stmts[k + 1] if k + 1 < len(stmts) else None
            if (
                isinstance(s, Decl)
                and isinstance(s.init, NewArray)
                and isinstance(nxt, For)
                and nxt.start == Lit(0)
                and len(nxt.body) == 1
                and isinstance(nxt.body[0], Assign)
            ):
                a, v = nxt.body[0], Name(nxt.var)
                src = a.value.base if isinstance(a.value, Index) else None
                if (
                    isinstance(src, Name)
                    and a.target == Index(Name(s.name), v)
                    and a.value == Index(src, v)
                    and s.init.length == Length(src)
                    and nxt.cond == BinOp("<", v, Length(src))
                    and env.get(src.id, "").split()[0] == s.type.split()[0]
                ):
                    rest = stmts[k + 2 :]
                    aliasing = "memory" in env.get(src.id, "")
                    if not aliasing or not ({s.name, src.id} & _written_arrays(rest)):
                        out.append(replace(s, init=src))
                        k += 2
                        continue
            out.append(s)
            k += 1
        return tuple(out)

    return replace(f, body=_map_body(f.body, block))


@_per_function
def fuse_buffers(f: Function, c: Contract) -> Function:
    """Write an element-wise map back into its source buffer instead of a fresh one."""

    def block(stmts):
        stmts = list(stmts)
        for k in range(len(stmts) - 2):
            s, loop, after = stmts[k], stmts[k + 1], stmts[k + 2]
            if not (isinstance(s, Decl) and isinstance(s.init, NewArray) and isinstance(loop, For)):
                continue
            if not (isinstance(after, Assign) and after.value == Name(s.name) and isinstance(after.target, Name)):
                continue
            i = Name(loop.var)
            reads = {
                x.base.id
                for st in walk_stmts(loop.body)
                for e in stmt_exprs(st)
                for x in walk_expr(e)
                if isinstance(x, Index) and isinstance(x.base, Name) and x.base.id != s.name
            }
            if len(reads) != 1:
                continue
            (src,) = reads
            src_decl = next((d for d in stmts[:k] if isinstance(d, Decl) and d.name == src), None)
            if src_decl is None or not isinstance(src_decl.init, NewArray) or src_decl.init.length != s.init.length:
                continue
            indexed = [
                x
                for st in walk_stmts(loop.body)
                for e in stmt_exprs(st)
                for x in walk_expr(e)
                if isinstance(x, Index) and x.base in (Name(src), Name(s.name))
            ]
            if any(x.index != i for x in indexed) or count_name_uses(stmts[k + 3 :], src):
                continue
            if _written_arrays(loop.body) != {s.name}:
                continue
            body = tuple(map_stmt_exprs(st, lambda e: substitute(e, Name(s.name), Name(src))) for st in loop.body)
            stmts[k : k + 3] = [replace(loop, body=body), replace(after, value=Name(src))]
            return block(tuple(stmts))
        return tuple(stmts)

    return replace(f, body=_map_body(f.body, block))


# -- level C -----------------------------------------------------------------


@_per_function
def scalar_replace(f: Function, c: Contract) -> Function:
    """Use ``a[i]`` directly where a local only shuttles it through a loop body."""

    def block(stmts):
        if len(stmts) < 2:
            return stmts
        first, last = stmts[0], stmts[-1]
        if not (isinstance(first, Decl) and isinstance(first.init, Index) and isinstance(last, Assign)):
            return stmts
        slot, v = first.init, Name(first.name)
        if last.target != slot or last.value != v:
            return stmts
        middle = stmts[1:-1]
        if (names_in(slot) | {_base_name(slot)}) & (assigned_names(middle) - {first.name}):
            return stmts
        if _written_arrays(middle) - {first.name}:
            return stmts
        return tuple(map_stmt_exprs(s, lambda e: substitute(e, v, slot)) for s in middle)

    return replace(f, body=_map_body(f.body, block))


def _fp_nodes(e) -> int:
    return sum(1 for x in walk_expr(e) if isinstance(x, (FpMul, FpAdd)))


def _ancestors_fp(e, target) -> int | None:
    """FP nodes strictly above the unique occurrence of ``target`` in ``e``."""
    if e == target:
        return 0
    from .ir import children

    for ch in children(e):
        n = _ancestors_fp(ch, target)
        if n is not None:
            return n + isinstance(e, (FpMul, FpAdd))
    return None


def _stmt_fp(s) -> int:
    return sum(_fp_nodes(e) for st in walk_stmts((s,)) for e in stmt_exprs(st))


def _use_is_nested(s, name: str) -> bool:
    return isinstance(s, (For, If)) and count_name_uses(s.body, name) > 0


@_per_function
def inline_temporaries(f: Function, c: Contract) -> Function:
    """Substitute a local into its only use when that use is in the next statement."""

    def block(stmts):
        stmts = list(stmts)
        changed = True
        while changed:
            changed = False
            for k in range(len(stmts) - 1):
                d, nxt = stmts[k], stmts[k + 1]
                if not isinstance(d, Decl) or d.init is None or isinstance(d.init, (NewArray, Call)):
                    continue
                rest = stmts[k + 1 :]
                if count_name_uses(rest, d.name) != 1 or count_name_uses((nxt,), d.name) != 1:
                    continue
                if d.name in assigned_names(rest):
                    continue
                if _use_is_nested(nxt, d.name):
                    # the value would be recomputed per iteration
                    if has_fp(d.init) or (names_in(d.init) | _reads_arrays(d.init)) & assigned_names(nxt.body):
                        continue
                if has_fp(d.init):
                    e = next(iter(stmt_exprs_with_use(nxt, d.name)))
                    if _stmt_fp(nxt) != _ancestors_fp(e, Name(d.name)):
                        continue
                stmts[k + 1] = map_stmt_exprs(nxt, lambda e: substitute(e, Name(d.name), d.init))
                del stmts[k]
                changed = True
                break
        return tuple(stmts)

    return replace(f, body=_map_body(f.body, block))


def stmt_exprs_with_use(s, name: str):
    for st in walk_stmts((s,)):
        for e in stmt_exprs(st):
            if Name(name) in walk_expr(e):
                yield e


def _reads_arrays(e) -> set[str]:
    return {x.base.id for x in walk_expr(e) if isinstance(x, Index) and isinstance(x.base, Name)}


def inline_mul(c: Contract) -> Contract:
    """Expand the multiply helper in place."""

    def fix(e):
        return replace(e, style="inline") if isinstance(e, FpMul) and e.style == "helper" else e

    fns = tuple(replace(f, body=tuple(map_stmt_exprs(s, lambda e: map_expr(e, fix)) for s in f.body)) for f in c.functions)
    return replace(c, functions=fns)


# -- level D -----------------------------------------------------------------


def _fresh_arrays(stmts) -> set[str]:
    """Memory arrays declared in ``stmts`` from a fresh allocation and never rebound."""
    out = {s.name for s in stmts if isinstance(s, Decl) and isinstance(s.init, NewArray)}
    rebound = {s.target.id for s in walk_stmts(stmts) if isinstance(s, Assign) and isinstance(s.target, Name)}
    return out - rebound


def _only_at(body, arrays, var: str) -> bool:
    """True when every access to ``arrays`` in ``body`` is ``a[var]``."""
    for a in arrays:
        masked = tuple(map_stmt_exprs(s, lambda e, a=a: substitute(e, Index(Name(a), Name(var)), Lit(0))) for s in body)
        if count_name_uses(masked, a):
            return False
    return True


def _local_decls(body) -> set[str]:
    """Names whose scope is ``body``: declarations and nested loop variables."""
    return {s.name if isinstance(s, Decl) else s.var for s in walk_stmts(body) if isinstance(s, (Decl, For))}


def _fusable(a: For, b: For, fresh: set[str]) -> bool:
    if (a.var, a.start, a.cond) != (b.var, b.start, b.cond):
        return False
    la, lb = _local_decls(a.body), _local_decls(b.body)
    da = {s.name for s in walk_stmts(a.body) if isinstance(s, Decl)}
    db = {s.name for s in walk_stmts(b.body) if isinstance(s, Decl)}
    if da & lb or db & la:
        return False
    wa, wb = _written_arrays(a.body), _written_arrays(b.body)
    # scalars written by either loop must be its own per-iteration locals
    if assigned_names(a.body) - wa - la or assigned_names(b.body) - wb - lb:
        return False
    if names_in(a.cond) & (wa | wb):
        return False
    shared = wa | wb
    return shared <= fresh and _only_at(a.body + b.body, shared, a.var)


@_per_function
def fuse_loops(f: Function, c: Contract) -> Function:
    """Merge adjacent loops over one range when iteration ``i`` of the second needs only iteration ``i`` of the first."""

    def block(stmts):
        stmts = list(stmts)
        k = 0
        while k < len(stmts) - 1:
            a, b = stmts[k], stmts[k + 1]
            if isinstance(a, For) and isinstance(b, For) and _fusable(a, b, _fresh_arrays(stmts[:k])):
                stmts[k : k + 2] = [replace(a, body=a.body + b.body)]
                continue
            k += 1
        return tuple(stmts)

    return replace(f, body=_map_body(f.body, block))


@_per_function
def sink_stores(f: Function, c: Contract) -> Function:
    """``a[i] = v; if (p(a[i])) a[i] = e;`` becomes ``if (p(v)) v = e; a[i] = v;``."""

    def block(stmts):
        stmts = list(stmts)
        declared = set()
        for k in range(len(stmts) - 1):
            st, nxt = stmts[k], stmts[k + 1]
            if isinstance(st, Decl):
                declared.add(st.name)
            if not (isinstance(st, Assign) and isinstance(st.target, Index) and isinstance(st.value, Name) and isinstance(nxt, If)):
                continue
            slot, v = st.target, st.value
            if v.id not in declared or count_name_uses(stmts[k + 2 :], v.id):
                continue
            if not isinstance(slot.base, Name) or not isinstance(slot.index, Name):
                continue
            if not all(isinstance(x, Assign) and not isinstance(x.value, Call) for x in nxt.body):
                continue
            if (names_in(slot)) & assigned_names(nxt.body) - {slot.base.id}:
                continue
            if not _only_at((nxt,), {slot.base.id}, slot.index.id):
                continue
            stmts[k : k + 2] = [map_stmt_exprs(nxt, lambda e: substitute(e, slot, v)), st]
        return tuple(stmts)

    return replace(f, body=_map_body(f.body, block))


_ARITH = {"+", "*", "-"}
_CMP = {"<", "<=", ">", "=="}


def _hoist_type(e, env, variant) -> str | None:
    """``uint256``/``bool`` if ``e`` is a pure invariant expression worth hoisting."""

    def uint(x) -> bool:
        if isinstance(x, Lit):
            return True
        if isinstance(x, Name):
            return x.id not in variant and env.get(x.id) == "uint256"
        if isinstance(x, Index):
            base = x.base
            return (
                isinstance(base, Name)
                and base.id not in variant
                and env.get(base.id, "").startswith("uint256[")
                and env[base.id].endswith(("memory", "readonly"))
                and uint(x.index)
            )
        if isinstance(x, BinOp) and x.op in _ARITH:
            return uint(x.left) and uint(x.right)
        return False

    def boolean(x) -> bool:
        if isinstance(x, BinOp) and x.op in _CMP:
            return uint(x.left) and uint(x.right)
        if isinstance(x, BinOp) and x.op in ("&&", "||"):
            return boolean(x.left) and boolean(x.right)
        return False

    if not isinstance(e, (BinOp, Index)):
        return None
    if uint(e):
        return "uint256"
    if boolean(e):
        return "bool"
    return None


def _size(e) -> int:
    return sum(1 for _ in walk_expr(e))


class _Fresh:
    def __init__(self, taken):
        self.taken = set(taken)
        self.n = 0

    def __call__(self) -> str:
        while f"t{self.n}" in self.taken:
            self.n += 1
        name = f"t{self.n}"
        self.taken.add(name)
        return name


def _worth_hoisting(e) -> bool:
    return any(isinstance(x, Index) or (isinstance(x, BinOp) and x.op == "*") for x in walk_expr(e))


def _maximal_invariants(e, env, variant, acc: list):
    if _hoist_type(e, env, variant):
        if _worth_hoisting(e) and e not in acc:
            acc.append(e)
        return
    from .ir import children

    for ch in children(e):
        _maximal_invariants(ch, env, variant, acc)


def _substitute_all(s, mapping):
    # larger expressions first so they win over their own subexpressions
    for expr, name in sorted(mapping.items(), key=lambda kv: -_size(kv[0])):
        s = map_stmt_exprs(s, lambda e, a=expr, b=name: substitute(e, a, Name(b)))
    return s


def _hoist_from(loop: For, env, fresh) -> tuple[list, For]:
    pre = []
    mapping = {}
    # move whole invariant declarations out first
    moved = True
    while moved:
        moved = False
        variant = assigned_names(loop.body) | {loop.var}
        for k, s in enumerate(loop.body):
            if isinstance(s, Decl) and s.init is not None:
                rest = loop.body[:k] + loop.body[k + 1 :]
                if s.name in assigned_names(rest):
                    continue
                if _hoist_type(s.init, env, variant - {s.name}):
                    pre.append(s)
                    mapping[s.init] = s.name
                    loop = replace(loop, body=tuple(_substitute_all(x, {s.init: s.name}) for x in rest))
                    moved = True
                    break
    variant = assigned_names(loop.body) | {loop.var}
    found: list = []
    _maximal_invariants(loop.cond, env, variant, found)
    for s in walk_stmts(loop.body):
        for e in stmt_exprs(s):
            _maximal_invariants(e, env, variant, found)
    for e in sorted(found, key=_size):
        if e in mapping:
            continue
        reduced = e
        for prev, name in sorted(mapping.items(), key=lambda kv: -_size(kv[0])):
            reduced = substitute(reduced, prev, Name(name))
        name = fresh()
        ty = _hoist_type(e, env, variant)
        env[name] = ty
        pre.append(Decl(ty, name, reduced))
        mapping[e] = name
    if mapping:
        loop = replace(
            loop,
            cond=_substitute_all(Require(loop.cond, ""), mapping).cond,
            body=tuple(_substitute_all(s, mapping) for s in loop.body),
        )
    return pre, loop


@_per_function
def hoist_invariants(f: Function, c: Contract) -> Function:
    """Loop-invariant code motion for index arithmetic and width lookups.

    Only ``uint256``/``bool`` expressions over locals and storage the function
    never writes move, and only if they load or multiply. They cannot revert:
    each hoisted lookup is indexed below the layer count.
    """
    env = _type_env(f, c)
    written = assigned_names(f.body)
    for v in c.state:
        if v.name not in written:
            env[v.name] = f"{v.type} readonly"
    fresh = _Fresh(env)

    def place(out, d):
        # as early as possible, so later copies of the value can reuse it
        deps = names_in(d.init)
        k = len(out)
        while k > 0 and not (deps & assigned_names((out[k - 1],))):
            k -= 1
        out.insert(k, d)

    def block(stmts):
        out = []
        for s in stmts:
            if isinstance(s, For):
                s = replace(s, body=block(s.body))
                pre, s = _hoist_from(s, env, fresh)
                for d in pre:
                    place(out, d)
            elif isinstance(s, If):
                s = replace(s, body=block(s.body))
            out.append(s)
        return tuple(out)

    return replace(f, body=block(f.body))


def _terms(e) -> list:
    if isinstance(e, BinOp) and e.op == "+":
        return _terms(e.left) + _terms(e.right)
    return [e]


def _sum(terms):
    out = terms[0]
    for t in terms[1:]:
        out = BinOp("+", out, t)
    return out


def _reuse_sum(e, init, name: str, env):
    """Replace ``init`` in ``e``, also inside reassociated ``uint256`` sums.

    Checked unsigned addition of non-negative terms overflows in any order
    or in none, so regrouping cannot change behaviour.
    """
    e = substitute(e, init, Name(name))
    want = _terms(init)
    if len(want) < 2 or env.get(name) != "uint256":
        return e

    def fix(x):
        if not (isinstance(x, BinOp) and x.op == "+"):
            return x
        have = _terms(x)
        rest = list(have)
        for t in want:
            if t not in rest:
                return x
            rest.remove(t)
        return _sum([Name(name)] + rest) if rest else Name(name)

    return map_expr(e, fix)


@_per_function
def eliminate_common(f: Function, c: Contract) -> Function:
    """Block-local CSE: reuse a declared ``uint256``/``bool`` local for later copies of its value."""
    env = _type_env(f, c)
    def block(stmts):
        stmts = list(stmts)
        k = 0
        while k < len(stmts):
            d = stmts[k]
            if isinstance(d, Decl) and d.init is not None and d.type in ("uint256", "bool") and isinstance(d.init, (BinOp, Index)):
                deps = names_in(d.init) | {d.name}
                m = k + 1
                while m < len(stmts):
                    s = stmts[m]
                    if isinstance(s, Decl) and s.init == d.init:
                        alias = s.name
                        del stmts[m]
                        stmts[m:] = [map_stmt_exprs(x, lambda e: substitute(e, Name(alias), Name(d.name))) for x in stmts[m:]]
                        continue
                    if deps & assigned_names((s,)):
                        # only the right-hand side still sees the old values
                        if isinstance(s, Assign):
                            stmts[m] = replace(s, value=_reuse_sum(s.value, d.init, d.name, env))
                        break
                    stmts[m] = map_stmt_exprs(s, lambda e: _reuse_sum(e, d.init, d.name, env))
                    m += 1
            k += 1
        return tuple(stmts)

    return replace(f, body=_map_body(f.body, block))


PIPELINES: dict[str, tuple] = {
    "A": (),
    "B": (strip_conversions, elide_copies, fuse_buffers),
    "C": (strip_conversions, elide_copies, fuse_buffers, scalar_replace, inline_temporaries, inline_mul),
    "D": (
        strip_conversions,
        elide_copies,
        fuse_buffers,
        scalar_replace,
        inline_temporaries,
        inline_mul,
        fuse_loops,
        sink_stores,
        hoist_invariants,
        eliminate_common,
    ),
}


def lower(c: Contract, level: str) -> Contract:
    try:
        passes = PIPELINES[level]
    except KeyError:
        raise ValueError(f"unknown optimization level {level!r}; expected one of {LEVELS}") from None
    for p in passes:
        c = p(c)
    return c
