"""Inline calls to functions defined in the same script.

``y = g(a)`` with a local ``def g(p): ...`` becomes a :class:`Block` that
binds fresh copies of ``g``'s parameters and locals, runs the body (each
``return e`` assigns a fresh result variable and leaves the block), and then
assigns the result to ``y``. Calls nested ``depth`` levels deep, including
recursive ones, are left as ordinary external calls.
"""

from __future__ import annotations

import itertools
from dataclasses import replace

from .nodes import (
    Assign,
    Block,
    Call,
    Expr,
    ExprStmt,
    FuncDef,
    If,
    ListLit,
    MethodCall,
    Return,
    ScriptAst,
    Stmt,
    Subscript,
    TupleExpr,
    Var,
    While,
    walk,
)


def inline_functions(tree: ScriptAst, depth: int) -> ScriptAst:
    if depth < 0:
        raise ValueError("inline depth must be >= 0")
    if depth == 0:
        return tree
    functions = tree.functions()
    if not functions:
        return tree
    return ScriptAst(_Inliner(functions).stmts(tree.statements, depth))


def _assigned(stmts: tuple[Stmt, ...]) -> set[str]:
    names: set[str] = set()
    for st in walk(stmts, into_functions=False):
        if isinstance(st, Assign):
            names.update(st.targets)
    return names


def _rename_expr(e: Expr, ren: dict[str, str]) -> Expr:
    if isinstance(e, Var):
        return Var(ren.get(e.name, e.name))
    if isinstance(e, ListLit):
        return ListLit(tuple(_rename_expr(i, ren) for i in e.items))
    if isinstance(e, TupleExpr):
        return TupleExpr(tuple(_rename_expr(i, ren) for i in e.items))
    if isinstance(e, Call):
        return Call(
            e.callee,
            tuple(_rename_expr(a, ren) for a in e.args),
            tuple((k, _rename_expr(v, ren)) for k, v in e.kwargs),
        )
    if isinstance(e, MethodCall):
        return MethodCall(
            _rename_expr(e.receiver, ren),  # type: ignore[arg-type]
            e.method,
            tuple(_rename_expr(a, ren) for a in e.args),
            tuple((k, _rename_expr(v, ren)) for k, v in e.kwargs),
        )
    if isinstance(e, Subscript):
        return Subscript(_rename_expr(e.receiver, ren), e.columns)  # type: ignore[arg-type]
    return e


def _rename(stmts: tuple[Stmt, ...], ren: dict[str, str], result: str) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for st in stmts:
        if isinstance(st, Assign):
            out.append(Assign(tuple(ren.get(t, t) for t in st.targets), _rename_expr(st.value, ren), st.line))
        elif isinstance(st, ExprStmt):
            out.append(ExprStmt(_rename_expr(st.value, ren), st.line))
        elif isinstance(st, If):
            out.append(If(_rename_expr(st.cond, ren), _rename(st.body, ren, result), _rename(st.orelse, ren, result), st.line))
        elif isinstance(st, While):
            out.append(
                While(
                    _rename_expr(st.cond, ren),
                    _rename(st.body, ren, result),
                    _rename(st.orelse, ren, result),
                    _rename(st.setup, ren, result),
                    st.line,
                )
            )
        elif isinstance(st, Block):
            out.append(Block(_rename(st.body, ren, result), st.line))
        elif isinstance(st, Return):
            if st.value is not None:
                out.append(Assign((result,), _rename_expr(st.value, ren), st.line))
            out.append(Return(None, st.line))
        else:
            # nested defs keep their own scope; break/continue/pass as is
            out.append(st)
    return tuple(out)


class _Inliner:
    def __init__(self, functions: dict[str, FuncDef]) -> None:
        self.functions = functions
        self.ids = itertools.count(1)

    def stmts(self, stmts: tuple[Stmt, ...], depth: int) -> tuple[Stmt, ...]:
        out: list[Stmt] = []
        for st in stmts:
            out.extend(self.stmt(st, depth))
        return tuple(out)

    def stmt(self, st: Stmt, depth: int) -> list[Stmt]:
        if isinstance(st, (Assign, ExprStmt)):
            value = st.value
            if isinstance(value, Call) and value.callee in self.functions and depth > 0:
                targets = st.targets if isinstance(st, Assign) else ()
                return self.expand(self.functions[value.callee], value, targets, st.line, depth)
            return [st]
        if isinstance(st, If):
            return [replace(st, body=self.stmts(st.body, depth), orelse=self.stmts(st.orelse, depth))]
        if isinstance(st, While):
            return [
                replace(
                    st,
                    body=self.stmts(st.body, depth),
                    orelse=self.stmts(st.orelse, depth),
                    setup=self.stmts(st.setup, depth),
                )
            ]
        if isinstance(st, Block):
            return [replace(st, body=self.stmts(st.body, depth))]
        return [st]

    def expand(self, fn: FuncDef, call: Call, targets: tuple[str, ...], line: int, depth: int) -> list[Stmt]:
        n = next(self.ids)
        prefix = f"${fn.name}#{n}."
        params = fn.params + ((fn.vararg,) if fn.vararg else ())
        local = set(params) | _assigned(fn.body)
        ren = {v: prefix + v for v in sorted(local)}
        result = prefix + "<return>"

        binds: list[Stmt] = []
        positional = list(call.args)
        for p, a in zip(fn.params, positional):
            binds.append(Assign((ren[p],), a, line))
        extra = positional[len(fn.params):]
        kwargs = dict(call.kwargs)
        for p in fn.params:
            if p in kwargs:
                binds.append(Assign((ren[p],), kwargs.pop(p), line))
        if fn.vararg and extra:
            binds.append(Assign((ren[fn.vararg],), TupleExpr(tuple(extra)), line))
        leftovers = [*([] if fn.vararg else extra), *kwargs.values()]
        if leftovers:
            # arguments with no matching parameter (e.g. **kwargs) still flow
            # into every parameter
            for p in fn.params:
                binds.append(Assign((ren[p],), TupleExpr((Var(ren[p]), *leftovers)), line))

        body = _rename(fn.body, ren, result)
        body = self.stmts(body, depth - 1)
        out: list[Stmt] = [Block((*binds, *body), line)]
        if targets:
            out.append(Assign(targets, Var(result), line))
        return out
