"""Table and column extraction from query artifacts.

Two small dialects are understood:

SQL  ``[INSERT INTO out] SELECT cols|* [INTO out] FROM t [a] [JOIN u [b] ON ...]*
     [WHERE ...] [GROUP BY ...] [HAVING ...] [ORDER BY ...] [LIMIT n]``
pipe ``[.set-or-replace out <|] t | where ... | project a, b | join (u) on k | ...``

Every column token is attributed to the table it names: qualified columns
(``t.c``/``alias.c``) go to that table, unqualified ones to every table in
scope. Columns in join keys and filters count as read. One level of
subquery is flattened into the outer query; anything nested deeper falls
back to reading every column of the tables involved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    EMPTY_COLUMNS,
    ActivityAnalysis,
    ColumnSet,
    Diagnostic,
    MappingSet,
    column_union,
    normalize_symbol,
)


class QuerySyntaxError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        super().__init__(message if line is None else f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class QueryAst:
    dialect: str  # "sql" | "pipe"
    reads: tuple[tuple[str, ColumnSet], ...]
    projection: tuple[str, ...] | str  # "*" for star
    output_symbol: str | None = None
    diagnostics: tuple[Diagnostic, ...] = ()

    def read_map(self) -> dict[str, ColumnSet]:
        out: dict[str, ColumnSet] = {}
        for t, c in self.reads:
            out[t] = c if t not in out else column_union(out[t], c)
        return out


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # ident | qident | string | number | op | punct | pipe
    text: str
    line: int
    column: int

    def is_kw(self, *words: str) -> bool:
        return self.kind == "ident" and self.text.upper() in words


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*|//[^\n]*|/\*.*?\*/)
  | (?P<string>'(?:[^'\\]|\\.|'')*'|"(?:[^"\\]|\\.)*")
  | (?P<qident>\[[^\]]+\]|`[^`]+`)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>\$?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><\||<=|>=|<>|!=|==|=~|!~|[=<>+\-*/%!~])
  | (?P<punct>[(),.;|])
    """,
    re.VERBOSE | re.DOTALL,
)


def tokenize(text: str, *, sql: bool = True) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        end = m.start() + len(value)
        if kind not in ("ws", "comment"):
            if kind == "qident":
                tokens.append(Token("qident", value[1:-1], line, m.start() - line_start + 1))
            elif kind == "string" and value.startswith('"') and sql:
                # SQL double quotes delimit identifiers
                tokens.append(Token("qident", value[1:-1], line, m.start() - line_start + 1))
            elif kind == "punct" and value == "|":
                tokens.append(Token("pipe", value, line, m.start() - line_start + 1))
            else:
                tokens.append(Token(kind, value, line, m.start() - line_start + 1))
        chunk = text[pos:end]
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = end
    return tokens


def _unquote(s: str) -> str:
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        return s[1:-1]
    return s


class _Cursor:
    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.i = 0

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of query")
        self.i += 1
        return tok  # type: ignore[return-value]

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.is_kw(*words)

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind in ("punct", "op", "pipe") and tok.text == text

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if tok is None or not tok.is_kw(word):
            self.error(f"expected {word}")
        return self.next()

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.next()

    def error(self, message: str):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            raise QuerySyntaxError(message, last.line if last else 1, last.column if last else 1)
        raise QuerySyntaxError(f"{message}, found {tok.text!r}", tok.line, tok.column)

    def done(self) -> bool:
        return self.i >= len(self.tokens)


# ---------------------------------------------------------------------------
# Attribution scope shared by both dialects
# ---------------------------------------------------------------------------


@dataclass
class _Scope:
    """Tables visible to column references, with alias resolution."""

    tables: list[str] = field(default_factory=list)
    aliases: dict[str, list[str]] = field(default_factory=dict)  # lower-case alias -> tables
    columns: dict[str, ColumnSet] = field(default_factory=dict)
    hidden: list[str] = field(default_factory=list)  # read, but not visible to outer columns
    refs: list[tuple[str | None, str]] = field(default_factory=list)  # (qualifier, column|'*')
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def add_table(self, table: str, alias: str | None = None) -> None:
        table = normalize_symbol(table)
        if table not in self.tables:
            self.tables.append(table)
            self.columns.setdefault(table, EMPTY_COLUMNS)
        self.aliases.setdefault(table.lower(), [table])
        if alias:
            self.aliases[alias.lower()] = [table]

    def add_group(
        self, alias: str | None, tables: list[str], columns: dict[str, ColumnSet], *, visible: bool = True
    ) -> None:
        for t in tables:
            if visible and t not in self.tables:
                self.tables.append(t)
            elif not visible and t not in self.tables and t not in self.hidden:
                self.hidden.append(t)
            self.columns[t] = column_union(self.columns.get(t, EMPTY_COLUMNS), columns.get(t, EMPTY_COLUMNS))
        if alias:
            self.aliases[alias.lower()] = list(tables)

    def ref(self, qualifier: str | None, column: str) -> None:
        self.refs.append((qualifier, column))

    def resolve(self) -> None:
        for qualifier, column in self.refs:
            if qualifier is None:
                targets = self.tables
            else:
                targets = self.aliases.get(qualifier.lower())
                if targets is None:
                    self.diagnostics.append(
                        Diagnostic("unresolved-qualifier", f"{qualifier}.{column} names no table in scope")
                    )
                    targets = self.tables
            cols = ColumnSet.all() if column == "*" else ColumnSet.of([column])
            for t in targets:
                self.columns[t] = column_union(self.columns.get(t, EMPTY_COLUMNS), cols)
        self.refs.clear()

    def reads(self) -> tuple[tuple[str, ColumnSet], ...]:
        order = self.tables + [t for t in self.hidden if t not in self.tables]
        return tuple((t, self.columns.get(t, EMPTY_COLUMNS)) for t in order)


# ---------------------------------------------------------------------------
# SQL
# ---------------------------------------------------------------------------

_SQL_CLAUSES = {
    "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET", "INTO", "JOIN", "INNER",
    "LEFT", "RIGHT", "FULL", "CROSS", "OUTER", "ON", "USING", "UNION", "EXCEPT", "INTERSECT",
}
_SQL_WORDS = _SQL_CLAUSES | {
    "SELECT", "AS", "AND", "OR", "NOT", "IN", "IS", "NULL", "LIKE", "ILIKE", "BETWEEN", "BY",
    "DISTINCT", "ALL", "CASE", "WHEN", "THEN", "ELSE", "END", "ASC", "DESC", "TRUE", "FALSE",
    "TOP", "EXISTS", "INSERT", "NULLS", "FIRST", "LAST", "INTERVAL", "ANY", "SOME",
}
_JOIN_START = {"JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS"}


def _is_name(tok: Token | None) -> bool:
    return tok is not None and (tok.kind == "qident" or (tok.kind == "ident" and tok.text.upper() not in _SQL_WORDS))


class _SqlParser:
    def __init__(self, tokens: list[Token]) -> None:
        self.c = _Cursor(tokens)
        self.diagnostics: list[Diagnostic] = []

    def dotted(self) -> str:
        parts = [self.c.next().text]
        while self.c.at(".") and _is_name(self.c.peek(1)):
            self.c.next()
            parts.append(self.c.next().text)
        return ".".join(parts)

    def symbol(self) -> str:
        tok = self.c.peek()
        if tok is not None and tok.kind == "string":
            self.c.next()
            return _unquote(tok.text)
        if not _is_name(tok):
            self.c.error("expected a name")
        return self.dotted()

    def parse(self) -> QueryAst:
        output = None
        if self.c.at_kw("INSERT"):
            self.c.next()
            self.c.expect_kw("INTO")
            output = self.symbol()
            if self.c.at("("):  # column list
                self.skip_parens()
        if not self.c.at_kw("SELECT"):
            self.c.error("expected SELECT")
        scope, projection, into = self.select(depth=0)
        while self.c.at(";"):
            self.c.next()
        if not self.c.done():
            self.c.error("unsupported trailing input")
        scope.resolve()
        diags = tuple(self.diagnostics + scope.diagnostics)
        return QueryAst("sql", scope.reads(), projection, into or output, diags)

    def skip_parens(self) -> None:
        self.c.expect("(")
        depth = 1
        while depth:
            tok = self.c.next()
            if tok.text == "(" and tok.kind == "punct":
                depth += 1
            elif tok.text == ")" and tok.kind == "punct":
                depth -= 1

    def select(self, depth: int) -> tuple[_Scope, tuple[str, ...] | str, str | None]:
        self.c.expect_kw("SELECT")
        scope = _Scope()
        while self.c.at_kw("DISTINCT", "ALL"):
            self.c.next()
        if self.c.at_kw("TOP"):
            self.c.next()
            self.c.next()
        items = self.region({"FROM", "INTO"})
        projection, aliases = self.select_list(items, scope, depth)
        into = None
        if self.c.at_kw("INTO"):
            self.c.next()
            into = self.symbol()
        if not self.c.at_kw("FROM"):
            self.c.error("expected FROM")
        self.c.next()
        self.from_item(scope, depth)
        while True:
            if self.c.at(","):
                self.c.next()
                self.from_item(scope, depth)
            elif self.c.at_kw(*_JOIN_START):
                while self.c.at_kw("INNER", "LEFT", "RIGHT", "FULL", "CROSS", "OUTER"):
                    self.c.next()
                self.c.expect_kw("JOIN")
                self.from_item(scope, depth)
                if self.c.at_kw("ON"):
                    self.c.next()
                    self.expression(self.region(set()), scope, depth, aliases=set())
                elif self.c.at_kw("USING"):
                    self.c.next()
                    self.c.expect("(")
                    while not self.c.at(")"):
                        tok = self.c.next()
                        if _is_name(tok):
                            scope.ref(None, tok.text)
                    self.c.expect(")")
            else:
                break
        if self.c.at_kw("WHERE"):
            self.c.next()
            self.expression(self.region(set()), scope, depth, aliases=set())
        if self.c.at_kw("GROUP"):
            self.c.next()
            self.c.expect_kw("BY")
            self.expression(self.region(set()), scope, depth, aliases)
        if self.c.at_kw("HAVING"):
            self.c.next()
            self.expression(self.region(set()), scope, depth, aliases)
        if self.c.at_kw("ORDER"):
            self.c.next()
            self.c.expect_kw("BY")
            self.expression(self.region(set()), scope, depth, aliases)
        for kw in ("LIMIT", "OFFSET"):
            if self.c.at_kw(kw):
                self.c.next()
                self.region(set())
        if self.c.at_kw("UNION", "EXCEPT", "INTERSECT"):
            self.c.error("set operations are not supported")
        return scope, projection, into

    def region(self, stop: set[str]) -> list[Token]:
        """Tokens up to the next clause keyword at parenthesis depth 0."""
        out: list[Token] = []
        depth = 0
        while not self.c.done():
            tok = self.c.peek()
            assert tok is not None
            if depth == 0:
                if tok.kind == "punct" and tok.text in (")", ";"):
                    break
                if tok.is_kw(*(_SQL_CLAUSES | stop)):
                    break
            if tok.kind == "punct" and tok.text == "(":
                depth += 1
            elif tok.kind == "punct" and tok.text == ")":
                depth -= 1
            out.append(self.c.next())
        return out

    def from_item(self, scope: _Scope, depth: int) -> None:
        if self.c.at("("):
            self.c.next()
            if not self.c.at_kw("SELECT"):
                self.c.error("expected SELECT in subquery")
            inner, _, _ = self.select(depth + 1)
            self.c.expect(")")
            alias = self.alias()
            self.merge_subquery(scope, inner, alias, depth + 1)
            return
        table = self.symbol()
        scope.add_table(table, self.alias())

    def alias(self) -> str | None:
        if self.c.at_kw("AS"):
            self.c.next()
            return self.c.next().text
        if _is_name(self.c.peek()):
            return self.c.next().text
        return None

    def merge_subquery(
        self, scope: _Scope, inner: _Scope, alias: str | None, depth: int, *, visible: bool = True
    ) -> None:
        inner.resolve()
        self.diagnostics.extend(inner.diagnostics)
        columns = dict(inner.columns)
        if depth > 1:
            self.diagnostics.append(
                Diagnostic("nested-subquery", f"subquery nested {depth} deep; reading all columns of {inner.tables}")
            )
            columns = {t: ColumnSet.all() for t in [*inner.tables, *inner.hidden]}
        scope.add_group(alias, [*inner.tables, *inner.hidden], columns, visible=visible)

    def select_list(self, items: list[Token], scope: _Scope, depth: int) -> tuple[tuple[str, ...] | str, set[str]]:
        names: list[str] = []
        aliases: set[str] = set()
        star = False
        for item in _split_commas(items):
            if not item:
                continue
            alias = None
            body = item
            if len(item) >= 3 and item[-2].is_kw("AS"):
                alias, body = item[-1].text, item[:-2]
            elif len(item) >= 2 and _is_name(item[-1]) and _operand_end(item[-2]):
                alias, body = item[-1].text, item[:-1]
            if len(body) == 1 and body[0].kind == "op" and body[0].text == "*":
                star = True
                scope.ref(None, "*")
                continue
            if len(body) == 3 and body[2].text == "*" and body[1].text == ".":
                star = True
                scope.ref(body[0].text, "*")
                continue
            self.expression(body, scope, depth, aliases=set())
            if alias:
                aliases.add(alias.lower())
                names.append(alias)
            elif body and _is_name(body[-1]):
                names.append(body[-1].text)
            else:
                names.append("".join(t.text for t in body))
        return ("*" if star else tuple(names)), aliases

    def expression(self, tokens: list[Token], scope: _Scope, depth: int, aliases: set[str]) -> None:
        i = 0
        n = len(tokens)
        while i < n:
            tok = tokens[i]
            nxt = tokens[i + 1] if i + 1 < n else None
            if tok.kind == "punct" and tok.text == "(" and nxt is not None and nxt.is_kw("SELECT"):
                j = _matching_paren(tokens, i)
                sub = _SqlParser(tokens[i + 1 : j])
                inner, _, _ = sub.select(depth + 1)
                if not sub.c.done():
                    sub.c.error("unexpected input in subquery")
                self.diagnostics.extend(sub.diagnostics)
                self.merge_subquery(scope, inner, None, depth + 1, visible=False)
                i = j + 1
                continue
            if tok.is_kw("AS"):
                i += 2  # CAST(x AS type): the type is not a column
                continue
            if _is_name(tok):
                if nxt is not None and nxt.kind == "punct" and nxt.text == "(":
                    i += 1  # function name
                    continue
                # a.b.c: the last segment is the column, the one before the qualifier
                parts = [tok.text]
                j = i + 1
                while j + 1 < n and tokens[j].text == "." and tokens[j].kind == "punct":
                    if tokens[j + 1].kind == "op" and tokens[j + 1].text == "*":
                        parts.append("*")
                        j += 2
                        break
                    if not _is_name(tokens[j + 1]):
                        break
                    parts.append(tokens[j + 1].text)
                    j += 2
                if len(parts) == 1:
                    if parts[0].lower() not in aliases:
                        scope.ref(None, parts[0])
                else:
                    scope.ref(parts[-2], parts[-1])
                i = j
                continue
            i += 1


def _split_commas(tokens: list[Token]) -> list[list[Token]]:
    out: list[list[Token]] = [[]]
    depth = 0
    for tok in tokens:
        if tok.kind == "punct" and tok.text == "(":
            depth += 1
        elif tok.kind == "punct" and tok.text == ")":
            depth -= 1
        if depth == 0 and tok.kind == "punct" and tok.text == ",":
            out.append([])
        else:
            out[-1].append(tok)
    return out


def _operand_end(tok: Token) -> bool:
    return _is_name(tok) or tok.is_kw("END") or tok.kind in ("number", "string") or (tok.kind == "punct" and tok.text == ")")


def _matching_paren(tokens: list[Token], i: int) -> int:
    depth = 0
    for j in range(i, len(tokens)):
        t = tokens[j]
        if t.kind == "punct" and t.text == "(":
            depth += 1
        elif t.kind == "punct" and t.text == ")":
            depth -= 1
            if depth == 0:
                return j
    raise QuerySyntaxError("unbalanced parenthesis", tokens[i].line, tokens[i].column)


def parse_sql(text: str) -> QueryAst:
    tokens = tokenize(text)
    if not tokens:
        raise QuerySyntaxError("empty query", 1, 1)
    return _SqlParser(tokens).parse()


# ---------------------------------------------------------------------------
# Pipe dialect
# ---------------------------------------------------------------------------

_PIPE_WORDS = {
    "and", "or", "not", "by", "on", "kind", "asc", "desc", "true", "false", "null", "in",
    "has", "contains", "startswith", "endswith", "between", "nulls", "first", "last",
    "with", "withsource", "typeof", "dynamic",
}
_OUTPUT_COMMANDS = {".set", ".append", ".set-or-append", ".set-or-replace"}


class _PipeParser:
    def __init__(self, tokens: list[Token]) -> None:
        self.c = _Cursor(tokens)
        self.diagnostics: list[Diagnostic] = []
        self.projection: tuple[str, ...] | str = "*"

    def name(self) -> str:
        tok = self.c.next()
        if tok.kind == "string":
            return _unquote(tok.text)
        if tok.kind not in ("ident", "qident"):
            self.c.error("expected a table name")
        parts = [tok.text]
        while self.c.at(".") and self.c.peek(1) is not None and self.c.peek(1).kind in ("ident", "qident"):
            self.c.next()
            parts.append(self.c.next().text)
        return ".".join(parts)

    def word(self) -> str:
        """An identifier with glued dashes, e.g. ``project-away``."""
        tok = self.c.next()
        text = tok.text
        end = tok.column + len(tok.text)
        while True:
            dash, nxt = self.c.peek(), self.c.peek(1)
            if not (dash and nxt and dash.text == "-" and nxt.kind == "ident"):
                break
            if dash.line != tok.line or dash.column != end or nxt.column != end + 1:
                break
            self.c.next()
            self.c.next()
            text += "-" + nxt.text
            end = nxt.column + len(nxt.text)
        return text

    def parse(self) -> QueryAst:
        output = None
        if self.c.at("."):
            self.c.next()
            cmd = "." + self.word()
            if cmd not in _OUTPUT_COMMANDS:
                self.c.error(f"unsupported command {cmd}")
            while self.c.peek() is not None and self.c.peek(1) is not None and self.c.peek(1).text == "=":
                self.c.next(); self.c.next(); self.c.next()  # async / with(...) options
            if self.c.at_kw("ASYNC"):
                self.c.next()
            output = self.name()
            self.c.expect("<|")
        scope = _Scope()
        self.tabular(scope, depth=0)
        while self.c.at(";"):
            self.c.next()
        if not self.c.done():
            self.c.error("unsupported trailing input")
        if self.projection == "*":
            scope.ref(None, "*")  # the result keeps every column
        scope.resolve()
        return QueryAst("pipe", scope.reads(), self.projection, output, tuple(self.diagnostics + scope.diagnostics))

    def tabular(self, scope: _Scope, depth: int) -> None:
        if self.c.at("("):
            self.c.next()
            self.tabular(scope, depth + 1)
            self.c.expect(")")
        else:
            scope.add_table(self.name())
        defined: set[str] = set()
        while self.c.at("|"):
            self.c.next()
            self.operator(scope, depth, defined)

    def operator(self, scope: _Scope, depth: int, defined: set[str]) -> None:
        if self.c.peek() is None or self.c.peek().kind != "ident":
            self.c.error("expected an operator")
        op = self.word().lower()
        if op in ("join", "lookup"):
            while self.c.peek() is not None and self.c.peek(1) is not None and self.c.peek(1).text == "=":
                self.c.next(); self.c.next(); self.c.next()  # kind=inner hint.x=y
            if self.c.at("("):
                self.c.next()
                inner = _Scope()
                self.tabular(inner, depth + 1)
                self.c.expect(")")
                inner.resolve()
                cols = inner.columns
                if depth + 1 > 1:
                    self.diagnostics.append(
                        Diagnostic("nested-subquery", f"subquery nested {depth + 1} deep; reading all columns")
                    )
                    cols = {t: ColumnSet.all() for t in inner.tables}
                scope.add_group(None, inner.tables, cols)
            else:
                scope.add_table(self.name())
            if self.c.at_kw("ON"):
                self.c.next()
                self.columns(self.region(), scope, defined)
            return
        if op == "union":
            while not self.c.done() and not self.c.at("|") and not self.c.at(")"):
                if self.c.at(","):
                    self.c.next()
                    continue
                if self.c.at("("):
                    self.c.next()
                    inner = _Scope()
                    self.tabular(inner, depth + 1)
                    self.c.expect(")")
                    inner.resolve()
                    scope.add_group(None, inner.tables, inner.columns)
                else:
                    scope.add_table(self.name())
            return
        if op == "project-away":
            self.columns(self.region(), scope, defined)
            return
        body = self.region()
        if op in ("project", "project-rename", "project-reorder", "extend", "summarize", "distinct"):
            groups = [body]
            if op == "summarize":
                cut = next((i for i, t in enumerate(body) if t.kind == "ident" and t.text.lower() == "by"), None)
                if cut is not None:
                    groups = [body[cut + 1:], body[:cut]]  # output order: keys, then aggregates
            names: list[str] = []
            for group in groups:
                for item in _split_commas(group):
                    if len(item) >= 2 and item[1].kind == "op" and item[1].text == "=" and item[0].kind in ("ident", "qident"):
                        defined.add(item[0].text)
                        names.append(item[0].text)
                        self.columns(item[2:], scope, defined)
                    else:
                        self.columns(item, scope, defined)
                        if len(item) == 1 and item[0].kind in ("ident", "qident"):
                            names.append(item[0].text)
                        elif item and item[-1].kind in ("ident", "qident"):
                            names.append(item[-1].text)
            if depth == 0:
                if op in ("project", "summarize", "distinct"):
                    self.projection = tuple(names)
                elif op == "extend" and self.projection != "*":
                    self.projection = (*self.projection, *names)
            return
        if op in ("where", "filter", "sort", "order", "top", "take", "limit", "count", "sample", "mv-expand", "parse", "make-series"):
            self.columns(body, scope, defined)
            return
        self.c.error(f"unsupported operator {op}")

    def region(self) -> list[Token]:
        out: list[Token] = []
        depth = 0
        while not self.c.done():
            tok = self.c.peek()
            assert tok is not None
            if depth == 0 and (tok.kind == "pipe" or (tok.kind == "punct" and tok.text in (")", ";"))):
                break
            if tok.kind == "punct" and tok.text == "(":
                depth += 1
            elif tok.kind == "punct" and tok.text == ")":
                depth -= 1
            out.append(self.c.next())
        return out

    def columns(self, tokens: list[Token], scope: _Scope, defined: set[str]) -> None:
        n = len(tokens)
        for i, tok in enumerate(tokens):
            if tok.kind not in ("ident", "qident"):
                continue
            if tok.kind == "ident" and (tok.text.lower() in _PIPE_WORDS or tok.text.startswith("$")):
                continue
            nxt = tokens[i + 1] if i + 1 < n else None
            if nxt is not None and nxt.kind == "punct" and nxt.text == "(":
                continue  # function call
            if nxt is not None and nxt.kind == "op" and nxt.text == "=" and tok.kind == "ident" and i > 0 and tokens[i - 1].text == ",":
                defined.add(tok.text)
                continue
            if tok.text in defined:
                continue
            scope.ref(None, tok.text)


def parse_pipe(text: str) -> QueryAst:
    tokens = tokenize(text, sql=False)
    if not tokens:
        raise QuerySyntaxError("empty query", 1, 1)
    return _PipeParser(tokens).parse()


def parse_query(text: str, suffix: str) -> QueryAst:
    if suffix == ".kql":
        return parse_pipe(text)
    return parse_sql(text)


def extract_sources(
    q: QueryAst,
    *,
    activity_id: str = "query",
    declared_outputs: tuple[str, ...] | None = None,
) -> ActivityAnalysis:
    """Turn a parsed query into an activity analysis.

    The written symbol is the query's own ``INTO``/command target if any,
    else the manifest-declared outputs, else ``<activity-id>:unknown-out``.
    """
    reads = q.read_map()
    mapping = MappingSet(reads)
    diagnostics = [Diagnostic(d.code, d.message, activity_id, d.line, d.column) for d in q.diagnostics]
    if q.output_symbol:
        outputs: tuple[str, ...] = (normalize_symbol(q.output_symbol),)
    elif declared_outputs:
        outputs = tuple(normalize_symbol(o) for o in declared_outputs)
    else:
        outputs = (f"{activity_id}:unknown-out",)
        diagnostics.append(
            Diagnostic("unknown-output", f"query declares no output; recorded as {outputs[0]}", activity_id)
        )
    return ActivityAnalysis(
        mapping=mapping,
        reads=dict(sorted(reads.items())),
        writes={o: mapping for o in sorted(outputs)},
        has_sink=False,
        diagnostics=tuple(sorted(set(diagnostics), key=Diagnostic.sort_key)),
    )
