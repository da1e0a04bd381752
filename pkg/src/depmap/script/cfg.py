"""Control-flow graphs with statements on edges.

A CFG is ``(L, E)`` with integer locations and edges ``(l, stmt, l')``.
Branches, merges and loop back-edges are connected by :class:`Skip` edges,
so every simple statement of the tree labels exactly one edge.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .nodes import Block, Break, Continue, If, Return, ScriptAst, Stmt, While


@dataclass(frozen=True)
class Skip:
    """Unlabelled control transfer (branch, merge, back-edge, jump)."""

    reason: str = ""


@dataclass(frozen=True)
class Edge:
    src: int
    stmt: Stmt | Skip
    dst: int


@dataclass
class Cfg:
    n_locations: int
    edges: list[Edge]
    entry: int = 0
    exit: int = 0
    _succ: dict[int, list[Edge]] = field(default_factory=dict, repr=False)
    _pred: dict[int, list[Edge]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        succ: dict[int, list[Edge]] = defaultdict(list)
        pred: dict[int, list[Edge]] = defaultdict(list)
        for e in self.edges:
            succ[e.src].append(e)
            pred[e.dst].append(e)
        self._succ = dict(succ)
        self._pred = dict(pred)

    @property
    def locations(self) -> range:
        return range(self.n_locations)

    def out_edges(self, loc: int) -> list[Edge]:
        return self._succ.get(loc, [])

    def in_edges(self, loc: int) -> list[Edge]:
        return self._pred.get(loc, [])

    def reachable(self) -> set[int]:
        seen = {self.entry}
        stack = [self.entry]
        while stack:
            for e in self.out_edges(stack.pop()):
                if e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return seen


class _Builder:
    def __init__(self) -> None:
        self.n = 1
        self.edges: list[Edge] = []

    def new(self) -> int:
        self.n += 1
        return self.n - 1

    def edge(self, src: int, stmt: Stmt | Skip, dst: int) -> None:
        self.edges.append(Edge(src, stmt, dst))

    def seq(self, stmts: tuple[Stmt, ...], cur: int, jumps: _Jumps) -> int | None:
        """Thread ``stmts`` from ``cur``; return the fall-through location.

        ``None`` means control cannot fall through (ended by a jump).
        """
        for st in stmts:
            if cur is None:
                break
            cur = self.stmt(st, cur, jumps)
        return cur

    def stmt(self, st: Stmt, cur: int, jumps: _Jumps) -> int | None:
        if isinstance(st, If):
            then_end = self.seq(st.body, cur, jumps)
            else_end = self.seq(st.orelse, cur, jumps) if st.orelse else cur
            ends = [e for e in (then_end, else_end) if e is not None]
            if not ends:
                return None
            merge = self.new()
            for e in ends:
                self.edge(e, Skip("merge"), merge)
            return merge
        if isinstance(st, While):
            head = self.new()
            self.edge(cur, Skip("loop-entry"), head)
            test = self.seq(st.setup, head, jumps)
            assert test is not None
            inner = _Jumps(breaks=[], continues=[], returns=jumps.returns)
            body_end = self.seq(st.body, test, inner)
            for src in ([body_end] if body_end is not None else []) + inner.continues:
                self.edge(src, Skip("back-edge"), head)
            after_else = self.seq(st.orelse, test, jumps) if st.orelse else test
            if after_else is None and not inner.breaks:
                return None
            after = self.new()
            if after_else is not None:
                self.edge(after_else, Skip("loop-exit"), after)
            for src in inner.breaks:
                self.edge(src, Skip("break"), after)
            return after
        if isinstance(st, Block):
            inner = _Jumps(breaks=jumps.breaks, continues=jumps.continues, returns=[])
            end = self.seq(st.body, cur, inner)
            if end is None and not inner.returns:
                return None
            done = self.new()
            if end is not None:
                self.edge(end, Skip("block-end"), done)
            for src in inner.returns:
                self.edge(src, Skip("return"), done)
            return done
        if isinstance(st, (Return, Break, Continue)):
            nxt = self.new()
            self.edge(cur, st, nxt)
            target = {Return: jumps.returns, Break: jumps.breaks, Continue: jumps.continues}[type(st)]
            target.append(nxt)
            return None
        nxt = self.new()
        self.edge(cur, st, nxt)
        return nxt


@dataclass
class _Jumps:
    breaks: list[int]
    continues: list[int]
    returns: list[int]


def build_cfg(tree: ScriptAst) -> Cfg:
    """Build the CFG of a script. A straight-line script is a single chain."""
    b = _Builder()
    jumps = _Jumps(breaks=[], continues=[], returns=[])
    end = b.seq(tree.statements, 0, jumps)
    # break/continue outside a loop is a Python syntax error; returns at
    # top level end the script
    pending = jumps.returns + jumps.breaks + jumps.continues
    if end is None or pending:
        exit_ = b.new()
        if end is not None:
            b.edge(end, Skip("exit"), exit_)
        for src in pending:
            b.edge(src, Skip("return"), exit_)
    else:
        exit_ = end
    return Cfg(b.n, b.edges, 0, exit_)
