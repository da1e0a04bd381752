"""Abstract interpretation of scripts over the source-mapping lattice.

The abstract state maps each variable to the set of data sources (with
referenced columns) its value may derive from. Statement semantics:

input       ``y = read("f")``          y gets {f^All} joined in; f is read
project     ``y = x[["a", "b"]]``      y gets x's sources constrained to {a, b}
external    ``y = f(x1, ...)``         y gets its old value joined with all
            ``y = r.m(x1, ...)``       argument (and receiver) sources
sink        ``r.fit(x1, ...)``         argument sources join the model mapping
                                       and the receiver; any target gets the
                                       receiver's new value
output      ``x.to_csv("f")``          x's sources flow into written symbol f

The solver is a worklist over CFG locations that joins states at merge
points and iterates loops to the least fixpoint.
"""

from __future__ import annotations

import random
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field

from ..model import (
    EMPTY_MAPPING,
    ActivityAnalysis,
    ColumnSet,
    Diagnostic,
    MappingSet,
    column_constrain,
    mapping_join,
    normalize_symbol,
)
from .cfg import Cfg, Skip
from .config import AnalyzerConfig
from .nodes import (
    Assign,
    Call,
    Expr,
    ExprStmt,
    ListLit,
    MethodCall,
    StrLit,
    Subscript,
    TupleExpr,
    Var,
)

MAX_REVISITS = 10_000

_PATH_KWARGS = ("path", "filepath_or_buffer", "path_or_buf", "filepath", "file", "fname", "source")


class FixpointError(RuntimeError):
    """The solver kept changing states; some transfer is not monotone."""


class AbstractState(Mapping[str, MappingSet]):
    """Immutable variable -> MappingSet map. Missing variables are bottom."""

    __slots__ = ("_env",)

    def __init__(self, env: Mapping[str, MappingSet] | None = None) -> None:
        self._env = {k: v for k, v in (env or {}).items() if v}

    @classmethod
    def _wrap(cls, env: dict[str, MappingSet]) -> AbstractState:
        out = cls.__new__(cls)
        out._env = env
        return out

    def __getitem__(self, var: str) -> MappingSet:
        return self._env[var]

    def get(self, var: str, default=EMPTY_MAPPING) -> MappingSet:  # type: ignore[override]
        return self._env.get(var, default)

    def __iter__(self):
        return iter(self._env)

    def __len__(self) -> int:
        return len(self._env)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, AbstractState):
            return self._env == other._env
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def set(self, var: str, value: MappingSet) -> AbstractState:
        """``σ[var ↦ value]`` (strong update)."""
        if self._env.get(var, EMPTY_MAPPING) == value:
            return self
        env = dict(self._env)
        if value:
            env[var] = value
        else:
            env.pop(var, None)
        return AbstractState._wrap(env)

    def join(self, other: AbstractState) -> AbstractState:
        if other is self or not other._env:
            return self
        if not self._env:
            return other
        env = dict(self._env)
        changed = False
        for var, value in other._env.items():
            prev = env.get(var)
            merged = value if prev is None else mapping_join(prev, value)
            if merged is not prev and merged != prev:
                env[var] = merged
                changed = True
        return AbstractState._wrap(env) if changed else self

    def __le__(self, other: AbstractState) -> bool:
        return all(v <= other.get(k) for k, v in self._env.items())

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{k} ↦ {self._env[k]!r}" for k in sorted(self._env)) + "}"


EMPTY_STATE = AbstractState()


@dataclass
class TransferResult:
    state: AbstractState
    mapping: MappingSet
    reads: dict[str, ColumnSet] = field(default_factory=dict)
    writes: dict[str, MappingSet] = field(default_factory=dict)
    sink: bool = False


def _sources(e: Expr, state: AbstractState) -> MappingSet:
    if isinstance(e, Var):
        return state.get(e.name)
    if isinstance(e, (ListLit, TupleExpr)):
        out = EMPTY_MAPPING
        for item in e.items:
            out = mapping_join(out, _sources(item, state))
        return out
    return EMPTY_MAPPING


def _arg_sources(call: Call | MethodCall, state: AbstractState) -> MappingSet:
    out = EMPTY_MAPPING
    for a in call.args:
        out = mapping_join(out, _sources(a, state))
    for _, a in call.kwargs:
        out = mapping_join(out, _sources(a, state))
    return out


def _path_arg(call: Call | MethodCall) -> Expr | None:
    if call.args:
        return call.args[0]
    kw = dict(call.kwargs)
    for name in _PATH_KWARGS:
        if name in kw:
            return kw[name]
    return None


def _weak_assign(state: AbstractState, targets: tuple[str, ...], value: MappingSet) -> AbstractState:
    for t in targets:
        state = state.set(t, mapping_join(state.get(t), value))
    return state


def transfer(
    stmt,
    state: AbstractState,
    mapping: MappingSet = EMPTY_MAPPING,
    config: AnalyzerConfig | None = None,
    *,
    activity_id: str = "script",
    diagnostics: list[Diagnostic] | None = None,
) -> TransferResult:
    """Apply one statement's abstract semantics."""
    config = config or AnalyzerConfig()
    if isinstance(stmt, Assign):
        targets, value, line = stmt.targets, stmt.value, stmt.line
    elif isinstance(stmt, ExprStmt):
        targets, value, line = (), stmt.value, stmt.line
    else:
        return TransferResult(state, mapping)

    def diag(code: str, message: str) -> None:
        if diagnostics is not None:
            diagnostics.append(Diagnostic(code, message, activity_id, line or None))

    if isinstance(value, Subscript):
        src = state.get(value.receiver.name)
        local: list[Diagnostic] = []
        projected = src.map_columns(lambda s, c: column_constrain(c, value.columns, local, s))
        for d in local:
            diag(d.code, d.message)
        for t in targets:
            state = state.set(t, projected)
        return TransferResult(state, mapping)

    if not isinstance(value, (Call, MethodCall)):
        return TransferResult(_weak_assign(state, targets, _sources(value, state)), mapping)

    name = value.name
    receiver = value.receiver.name if isinstance(value, MethodCall) else None

    if name in config.source_fns:
        arg = _path_arg(value)
        if isinstance(arg, StrLit) and normalize_symbol(arg.value):
            symbol = normalize_symbol(arg.value)
        else:
            symbol = f"{activity_id}:unknown-in"
            diag("unknown-input", f"{name}() argument is not a string literal; recorded as {symbol}")
        read = MappingSet.single(symbol, ColumnSet.all())
        return TransferResult(_weak_assign(state, targets, read), mapping, reads={symbol: ColumnSet.all()})

    args = _arg_sources(value, state)

    if name in config.sink_fns:
        # estimators return themselves, so targets also get the receiver
        trained = args if receiver is None else mapping_join(state.get(receiver), args)
        new_state = state if receiver is None else state.set(receiver, trained)
        new_state = _weak_assign(new_state, targets, trained)
        return TransferResult(new_state, mapping_join(mapping, args), sink=True)

    flowing = args if receiver is None else mapping_join(state.get(receiver), args)

    if name in config.output_fns and receiver is not None:
        arg = _path_arg(value)
        if isinstance(arg, StrLit) and normalize_symbol(arg.value):
            symbol = normalize_symbol(arg.value)
        else:
            symbol = f"{activity_id}:unknown-out"
            diag("unknown-output", f"{name}() target is not a string literal; recorded as {symbol}")
        written = state.get(receiver)
        return TransferResult(_weak_assign(state, targets, flowing), mapping, writes={symbol: written})

    return TransferResult(_weak_assign(state, targets, flowing), mapping)


def solve(
    cfg: Cfg,
    config: AnalyzerConfig | None = None,
    *,
    activity_id: str = "script",
    rng: random.Random | None = None,
    initial: dict[int, AbstractState] | None = None,
) -> dict[int, AbstractState]:
    """Worklist fixpoint: the abstract state at every reachable location.

    ``rng`` picks worklist entries at random instead of FIFO (used to check
    order independence). ``initial`` seeds states, e.g. with a previous
    solution to check stability.
    """
    config = config or AnalyzerConfig()
    states: dict[int, AbstractState] = dict(initial or {})
    states[cfg.entry] = states.get(cfg.entry, EMPTY_STATE)
    work: deque[int] = deque(sorted(states))
    queued = set(work)
    visited: set[int] = set()
    revisits = 0
    while work:
        if rng is None:
            loc = work.popleft()
        else:
            i = rng.randrange(len(work))
            work.rotate(-i)
            loc = work.popleft()
        queued.discard(loc)
        if loc in visited:
            revisits += 1
            if revisits > MAX_REVISITS:
                raise FixpointError(f"no fixpoint after {MAX_REVISITS} revisits in {activity_id}")
        visited.add(loc)
        here = states[loc]
        for edge in cfg.out_edges(loc):
            if isinstance(edge.stmt, Skip):
                out = here
            else:
                out = transfer(edge.stmt, here, EMPTY_MAPPING, config, activity_id=activity_id).state
            old = states.get(edge.dst)
            new = out if old is None else old.join(out)
            if old is None or new is not old:
                states[edge.dst] = new
                if edge.dst not in queued:
                    queued.add(edge.dst)
                    work.append(edge.dst)
    return states


def analyze_script(
    cfg: Cfg,
    config: AnalyzerConfig | None = None,
    *,
    activity_id: str = "script",
    rng: random.Random | None = None,
) -> ActivityAnalysis:
    """Least-fixpoint analysis of a script CFG."""
    config = config or AnalyzerConfig()
    states = solve(cfg, config, activity_id=activity_id, rng=rng)
    return collect(cfg, states, config, activity_id=activity_id)


def collect(
    cfg: Cfg,
    states: Mapping[int, AbstractState],
    config: AnalyzerConfig,
    *,
    activity_id: str = "script",
) -> ActivityAnalysis:
    """Gather the model mapping, reads and writes from solved states."""
    mapping = EMPTY_MAPPING
    reads: dict[str, ColumnSet] = {}
    writes: dict[str, MappingSet] = {}
    has_sink = False
    diagnostics: list[Diagnostic] = []
    for edge in cfg.edges:
        if isinstance(edge.stmt, Skip) or edge.src not in states:
            continue
        r = transfer(edge.stmt, states[edge.src], mapping, config, activity_id=activity_id, diagnostics=diagnostics)
        mapping = r.mapping
        has_sink = has_sink or r.sink
        for s, c in r.reads.items():
            reads[s] = c if s not in reads else reads[s] | c
        for s, m in r.writes.items():
            writes[s] = mapping_join(writes.get(s, EMPTY_MAPPING), m)
    unique = sorted(set(diagnostics), key=Diagnostic.sort_key)
    return ActivityAnalysis(mapping, dict(sorted(reads.items())), dict(sorted(writes.items())), has_sink, tuple(unique))
