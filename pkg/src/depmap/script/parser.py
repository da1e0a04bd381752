"""Lower Python source into the analyzed script language.

Python's own parser does the lexing and parsing; this module maps its tree
onto the small statement/expression set in :mod:`.nodes`.

Supported directly: assignments (including tuple targets and chained
targets), calls and method calls, string-list subscripts, ``if``/``while``,
local ``def`` and ``return``. Everything else is lowered conservatively:

* ``for`` loops and comprehensions become ``while`` loops whose target is
  drawn from the iterable by an opaque call;
* ``with`` binds its ``as`` name to an opaque call on the context value;
* ``try`` branches between the body and the handlers; ``match`` branches
  between its cases;
* operators, attribute reads and non-column subscripts become opaque calls
  over their operands;
* imports, ``class`` bodies, asserts, ``raise``, ``del`` and the like are
  no-ops.

A dotted call ``a.f(...)`` is a method call when ``a`` is bound somewhere in
the script and a plain dotted call (``pd.read_csv``) otherwise.
"""

from __future__ import annotations

import ast

from .nodes import (
    Assign,
    Break,
    Call,
    Continue,
    Expr,
    ExprStmt,
    FuncDef,
    If,
    ListLit,
    MethodCall,
    NumLit,
    Pass,
    Return,
    ScriptAst,
    Stmt,
    StrLit,
    Subscript,
    TupleExpr,
    Var,
    While,
)

_UNKNOWN = NumLit(None)


class ScriptSyntaxError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        super().__init__(message if line is None else f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


def parse_script(text: str) -> ScriptAst:
    """Parse and lower ``text``. Raises :class:`ScriptSyntaxError`."""
    try:
        tree = ast.parse(text)
    except SyntaxError as exc:
        raise ScriptSyntaxError(exc.msg, exc.lineno, exc.offset) from None
    except ValueError as exc:  # e.g. null bytes
        raise ScriptSyntaxError(str(exc), None, None) from None
    return _Lowerer(_bound_names(tree)).module(tree)


def _bound_names(tree: ast.AST) -> set[str]:
    names: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
            names.add(node.id)
        elif isinstance(node, ast.arg):
            names.add(node.arg)
        elif isinstance(node, ast.ExceptHandler) and node.name:
            names.add(node.name)
    return names


def _dotted(node: ast.expr) -> list[str] | None:
    parts: list[str] = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if not isinstance(node, ast.Name):
        return None
    parts.append(node.id)
    return parts[::-1]


def _root_name(node: ast.expr) -> str | None:
    while isinstance(node, (ast.Attribute, ast.Subscript, ast.Starred)):
        node = node.value
    return node.id if isinstance(node, ast.Name) else None


def _string_columns(node: ast.expr) -> tuple[str, ...] | None:
    if isinstance(node, ast.Constant) and isinstance(node.value, str) and node.value:
        return (node.value,)
    if isinstance(node, (ast.List, ast.Tuple)) and node.elts:
        cols = []
        for e in node.elts:
            if not (isinstance(e, ast.Constant) and isinstance(e.value, str) and e.value):
                return None
            cols.append(e.value)
        return tuple(cols)
    return None


class _Lowerer:
    def __init__(self, bound: set[str]) -> None:
        self.bound = bound
        self.counter = 0
        self.prelude: list[Stmt] = []

    def fresh(self) -> str:
        self.counter += 1
        return f"${self.counter}"

    # -- statements ---------------------------------------------------------

    def module(self, tree: ast.Module) -> ScriptAst:
        return ScriptAst(self.block(tree.body))

    def block(self, body: list[ast.stmt]) -> tuple[Stmt, ...]:
        out: list[Stmt] = []
        for node in body:
            out.extend(self.stmt(node))
            if isinstance(node, (ast.Return, ast.Break, ast.Continue)):
                break  # the rest of the block is dead
        return tuple(out)

    def _with_prelude(self, fn, *args) -> tuple[list[Stmt], object]:
        saved = self.prelude
        self.prelude = []
        try:
            result = fn(*args)
            return self.prelude, result
        finally:
            self.prelude = saved

    def stmt(self, node: ast.stmt) -> list[Stmt]:
        line = getattr(node, "lineno", 0)
        pre, lowered = self._with_prelude(self._stmt, node, line)
        return [*pre, *lowered]

    def _stmt(self, node: ast.stmt, line: int) -> list[Stmt]:
        if isinstance(node, ast.Assign):
            return self.assign(node.targets, node.value, line)
        if isinstance(node, ast.AnnAssign):
            if node.value is None:
                return [Pass(line)]
            return self.assign([node.target], node.value, line)
        if isinstance(node, ast.AugAssign):
            name = _root_name(node.target)
            operand = self.atom(node.value)
            if name is None:
                return [ExprStmt(Call("<op>", (operand,)), line)]
            return [Assign((name,), Call("<op>", (Var(name), operand)), line)]
        if isinstance(node, ast.Expr):
            if isinstance(node.value, ast.Constant):
                return [Pass(line)]
            return [ExprStmt(self.value(node.value), line)]
        if isinstance(node, ast.If):
            cond = self.atom(node.test)
            return [If(cond, self.block(node.body), self.block(node.orelse), line)]
        if isinstance(node, ast.While):
            setup, cond = self._with_prelude(self.atom, node.test)
            return [While(cond, self.block(node.body), self.block(node.orelse), tuple(setup), line)]
        if isinstance(node, (ast.For, ast.AsyncFor)):
            it = self.atom(node.iter)
            pre_bind, binds = self._with_prelude(self.bind, node.target, Call("<next>", (it,)), line)
            setup = (*pre_bind, *binds)
            return [While(_UNKNOWN, self.block(node.body), self.block(node.orelse), setup, line)]
        if isinstance(node, (ast.With, ast.AsyncWith)):
            out: list[Stmt] = []
            for item in node.items:
                ctx = self.atom(item.context_expr)
                if item.optional_vars is not None:
                    out.extend(self.bind(item.optional_vars, Call("<enter>", (ctx,)), line))
            out.extend(self.block(node.body))
            return out
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            a = node.args
            params = tuple(p.arg for p in (*a.posonlyargs, *a.args, *a.kwonlyargs))
            vararg = a.vararg.arg if a.vararg else None
            return [FuncDef(node.name, params, self.block(node.body), vararg, line)]
        if isinstance(node, ast.Return):
            return [Return(self.value(node.value) if node.value is not None else None, line)]
        if isinstance(node, ast.Break):
            return [Break(line)]
        if isinstance(node, ast.Continue):
            return [Continue(line)]
        if isinstance(node, ast.Try) or type(node).__name__ == "TryStar":
            handlers: tuple[Stmt, ...] = ()
            for h in reversed(node.handlers):
                body = self.block(h.body)
                if h.name:
                    body = (Assign((h.name,), Call("<exception>"), line), *body)
                handlers = (If(_UNKNOWN, body, handlers, line),) if handlers else body
            main = self.block(node.body) + self.block(node.orelse)
            return [If(_UNKNOWN, main, handlers, line), *self.block(node.finalbody)]
        if isinstance(node, ast.Match):
            subject = self.atom(node.subject)
            chain: tuple[Stmt, ...] = ()
            for case in reversed(node.cases):
                binds: list[Stmt] = []
                for sub in ast.walk(case.pattern):
                    for attr in ("name", "rest"):
                        n = getattr(sub, attr, None)
                        if isinstance(n, str):
                            binds.append(Assign((n,), Call("<match>", (subject,)), line))
                chain = (If(_UNKNOWN, (*binds, *self.block(case.body)), chain, line),)
            return list(chain)
        # imports, class bodies, assert, raise, del, global, nonlocal, pass
        return [Pass(line)]

    def assign(self, targets: list[ast.expr], value: ast.expr, line: int) -> list[Stmt]:
        if len(targets) == 1:
            t = targets[0]
            if (
                isinstance(t, (ast.Tuple, ast.List))
                and isinstance(value, (ast.Tuple, ast.List))
                and len(t.elts) == len(value.elts)
                and not any(isinstance(e, ast.Starred) for e in (*t.elts, *value.elts))
            ):
                # pairwise: evaluate all right-hand sides before binding
                vals = [self.atom(v) for v in value.elts]
                out: list[Stmt] = []
                for te, v in zip(t.elts, vals):
                    out.extend(self.bind(te, v, line))
                return out
            return self.bind(t, self.value(value), line)
        tmp = self.fresh()
        out = [Assign((tmp,), self.value(value), line)]
        for t in targets:
            out.extend(self.bind(t, Var(tmp), line))
        return out

    def bind(self, target: ast.expr, value: Expr, line: int) -> list[Stmt]:
        """Assign ``value`` to an arbitrary assignment target."""
        if isinstance(target, ast.Name):
            return [Assign((target.id,), value, line)]
        if isinstance(target, (ast.Tuple, ast.List)):
            names: list[str] = []
            updates: list[Stmt] = []
            for e in target.elts:
                if isinstance(e, ast.Starred):
                    e = e.value
                if isinstance(e, ast.Name):
                    names.append(e.id)
                else:
                    tmp = self.fresh()
                    names.append(tmp)
                    updates.extend(self.bind(e, Var(tmp), line))
            return [Assign(tuple(names), value, line), *updates]
        if isinstance(target, ast.Starred):
            return self.bind(target.value, value, line)
        # obj.attr = v / obj[k] = v update the root object
        root = _root_name(target)
        if isinstance(value, (Var, StrLit, NumLit)):
            arg = value
        else:
            arg = Var(self.fresh())
            self.prelude.append(Assign((arg.name,), value, line))
        extra: tuple[Expr, ...] = ()
        if isinstance(target, ast.Subscript):
            extra = (self.atom(target.slice),)
        if root is None:
            return [ExprStmt(Call("<store>", (arg, *extra)), line)]
        return [Assign((root,), Call("<store>", (Var(root), arg, *extra)), line)]

    # -- expressions ----------------------------------------------------------

    def atom(self, node: ast.expr) -> Expr:
        """Lower ``node`` to an atomic expression, spilling into a temporary."""
        if isinstance(node, ast.Name):
            return Var(node.id)
        if isinstance(node, ast.Constant):
            return StrLit(node.value) if isinstance(node.value, str) else NumLit(node.value)
        if isinstance(node, (ast.List, ast.Set)):
            return ListLit(tuple(self.atom(e) for e in node.elts))
        if isinstance(node, ast.Tuple):
            return TupleExpr(tuple(self.atom(e) for e in node.elts))
        if isinstance(node, ast.Starred):
            return self.atom(node.value)
        if isinstance(node, ast.Attribute):
            parts = _dotted(node)
            if parts is not None and parts[0] not in self.bound:
                return Var(".".join(parts))  # module constant, never bound
        value = self.value(node)
        tmp = self.fresh()
        self.prelude.append(Assign((tmp,), value, getattr(node, "lineno", 0)))
        return Var(tmp)

    def receiver(self, node: ast.expr) -> Var:
        e = self.atom(node)
        if isinstance(e, Var):
            return e
        tmp = self.fresh()
        self.prelude.append(Assign((tmp,), e, getattr(node, "lineno", 0)))
        return Var(tmp)

    def args(self, node: ast.Call) -> tuple[tuple[Expr, ...], tuple[tuple[str, Expr], ...]]:
        args = tuple(self.atom(a) for a in node.args)
        kwargs = tuple((k.arg or "**", self.atom(k.value)) for k in node.keywords)
        return args, kwargs

    def value(self, node: ast.expr) -> Expr:
        """Lower ``node`` to an expression whose operands are atomic."""
        if isinstance(node, ast.Call):
            return self.call(node)
        if isinstance(node, ast.Subscript):
            recv = self.receiver(node.value)
            cols = _string_columns(node.slice)
            if cols is not None:
                return Subscript(recv, cols)
            return Call("<getitem>", (recv, self.atom(node.slice)))
        if isinstance(node, ast.Attribute):
            parts = _dotted(node)
            if parts is not None and parts[0] not in self.bound:
                return Var(".".join(parts))
            return Call("<getattr>", (self.receiver(node.value),))
        if isinstance(node, ast.BinOp):
            return Call("<op>", (self.atom(node.left), self.atom(node.right)))
        if isinstance(node, ast.BoolOp):
            return Call("<op>", tuple(self.atom(v) for v in node.values))
        if isinstance(node, ast.Compare):
            return Call("<op>", (self.atom(node.left), *(self.atom(c) for c in node.comparators)))
        if isinstance(node, ast.UnaryOp):
            return Call("<op>", (self.atom(node.operand),))
        if isinstance(node, ast.IfExp):
            return Call("<ifexp>", (self.atom(node.test), self.atom(node.body), self.atom(node.orelse)))
        if isinstance(node, ast.Dict):
            items = [self.atom(k) for k in node.keys if k is not None] + [self.atom(v) for v in node.values]
            return Call("<dict>", tuple(items))
        if isinstance(node, ast.JoinedStr):
            parts = [self.atom(v.value) for v in node.values if isinstance(v, ast.FormattedValue)]
            return Call("<fstring>", tuple(parts))
        if isinstance(node, ast.NamedExpr):
            v = self.value(node.value)
            self.prelude.append(Assign((node.target.id,), v, node.lineno))
            return Var(node.target.id)
        if isinstance(node, (ast.ListComp, ast.SetComp, ast.GeneratorExp, ast.DictComp)):
            return self.comprehension(node)
        if isinstance(node, ast.Await):
            return self.value(node.value)
        if isinstance(node, (ast.Name, ast.Constant, ast.List, ast.Tuple, ast.Set, ast.Starred)):
            return self.atom(node)
        # lambda, yield, slices...: opaque over every name mentioned
        names = sorted({n.id for n in ast.walk(node) if isinstance(n, ast.Name)})
        return Call("<expr>", tuple(Var(n) for n in names))

    def call(self, node: ast.Call) -> Expr:
        func = node.func
        if isinstance(func, ast.Name):
            args, kwargs = self.args(node)
            return Call(func.id, args, kwargs)
        if isinstance(func, ast.Attribute):
            parts = _dotted(func)
            if parts is not None and parts[0] not in self.bound:
                args, kwargs = self.args(node)
                return Call(".".join(parts[-3:]), args, kwargs)
            if parts is not None and len(parts) == 2:
                recv = Var(parts[0])
            else:
                recv = self.receiver(func.value)
            args, kwargs = self.args(node)
            return MethodCall(recv, func.attr, args, kwargs)
        fn = self.receiver(func)
        args, kwargs = self.args(node)
        return Call("<call>", (fn, *args), kwargs)

    def comprehension(self, node: ast.expr) -> Expr:
        line = getattr(node, "lineno", 0)
        acc = self.fresh()
        self.prelude.append(Assign((acc,), ListLit(), line))

        def build(gens: list[ast.comprehension]) -> tuple[Stmt, ...]:
            if not gens:
                if isinstance(node, ast.DictComp):
                    pre, kv = self._with_prelude(lambda: (self.atom(node.key), self.atom(node.value)))
                    return (*pre, Assign((acc,), Call("<append>", (Var(acc), *kv)), line))
                pre, elt = self._with_prelude(self.atom, node.elt)
                return (*pre, Assign((acc,), Call("<append>", (Var(acc), elt)), line))
            gen = gens[0]
            pre_it, it = self._with_prelude(self.atom, gen.iter)
            pre_bind, binds = self._with_prelude(self.bind, gen.target, Call("<next>", (it,)), line)
            body = build(gens[1:])
            for cond in reversed(gen.ifs):
                pre, c = self._with_prelude(self.atom, cond)
                body = (*pre, If(c, body, (), line))
            return (*pre_it, While(_UNKNOWN, body, (), (*pre_bind, *binds), line))

        self.prelude.extend(build(list(node.generators)))
        return Var(acc)
