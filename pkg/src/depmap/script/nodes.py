"""Syntax tree for the analyzed script language.

The tree is produced by lowering Python source (see :mod:`.parser`). After
lowering, call arguments, receivers and branch conditions are *atomic*:
variables, literals, or list/tuple literals of atomic values. Nested
expressions are spilled into temporaries named ``$N``, which cannot collide
with user identifiers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class NumLit:
    value: object = None


@dataclass(frozen=True)
class ListLit:
    items: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class TupleExpr:
    items: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Call:
    callee: str
    args: tuple[Expr, ...] = ()
    kwargs: tuple[tuple[str, Expr], ...] = ()

    @property
    def name(self) -> str:
        return self.callee.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class MethodCall:
    receiver: Var
    method: str
    args: tuple[Expr, ...] = ()
    kwargs: tuple[tuple[str, Expr], ...] = ()

    @property
    def name(self) -> str:
        return self.method


@dataclass(frozen=True)
class Subscript:
    """Column projection ``x[["a", "b"]]`` or ``x["a"]``."""

    receiver: Var
    columns: tuple[str, ...]


Expr = Union[Var, StrLit, NumLit, ListLit, TupleExpr, Call, MethodCall, Subscript]


# --- statements ------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    targets: tuple[str, ...]
    value: Expr
    line: int = 0


@dataclass(frozen=True)
class ExprStmt:
    value: Expr
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: Expr
    body: tuple[Stmt, ...]
    orelse: tuple[Stmt, ...] = ()
    line: int = 0


@dataclass(frozen=True)
class While:
    """Loop. ``setup`` runs at the loop head before every test of ``cond``."""

    cond: Expr
    body: tuple[Stmt, ...]
    orelse: tuple[Stmt, ...] = ()
    setup: tuple[Stmt, ...] = ()
    line: int = 0


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    vararg: str | None = None
    line: int = 0


@dataclass(frozen=True)
class Return:
    value: Expr | None = None
    line: int = 0


@dataclass(frozen=True)
class Break:
    line: int = 0


@dataclass(frozen=True)
class Continue:
    line: int = 0


@dataclass(frozen=True)
class Pass:
    """Statement with no data-flow effect (imports, asserts, class bodies...)."""

    line: int = 0


@dataclass(frozen=True)
class Block:
    """Body of an inlined call; ``return`` inside it jumps to its end."""

    body: tuple[Stmt, ...]
    line: int = 0


Stmt = Union[Assign, ExprStmt, If, While, FuncDef, Return, Break, Continue, Pass, Block]


@dataclass(frozen=True)
class ScriptAst:
    statements: tuple[Stmt, ...] = ()

    def functions(self) -> dict[str, FuncDef]:
        out: dict[str, FuncDef] = {}
        for st in walk(self.statements):
            if isinstance(st, FuncDef):
                out[st.name] = st
        return out


def walk(stmts: tuple[Stmt, ...], *, into_functions: bool = True):
    """Yield every statement, depth first, in source order."""
    for st in stmts:
        yield st
        if isinstance(st, If):
            yield from walk(st.body, into_functions=into_functions)
            yield from walk(st.orelse, into_functions=into_functions)
        elif isinstance(st, While):
            yield from walk(st.setup, into_functions=into_functions)
            yield from walk(st.body, into_functions=into_functions)
            yield from walk(st.orelse, into_functions=into_functions)
        elif isinstance(st, Block):
            yield from walk(st.body, into_functions=into_functions)
        elif isinstance(st, FuncDef) and into_functions:
            yield from walk(st.body, into_functions=into_functions)


def expr_vars(e: Expr) -> list[str]:
    """Variables an atomic-argument expression reads, receiver included."""
    if isinstance(e, Var):
        return [e.name]
    if isinstance(e, (ListLit, TupleExpr)):
        return [v for item in e.items for v in expr_vars(item)]
    if isinstance(e, Call):
        return [v for a in (*e.args, *(kv[1] for kv in e.kwargs)) for v in expr_vars(a)]
    if isinstance(e, MethodCall):
        return [e.receiver.name, *(v for a in (*e.args, *(kv[1] for kv in e.kwargs)) for v in expr_vars(a))]
    if isinstance(e, Subscript):
        return [e.receiver.name]
    return []
