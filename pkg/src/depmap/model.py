"""Domain types shared by the analyzers: column sets, data sources, mapping
sets, activities and activity graphs.

Everything here is an immutable value. The lattice operations
(:func:`column_union`, :func:`column_constrain`, :func:`mapping_join`) are
pure functions.
"""

from __future__ import annotations

import enum
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import PurePosixPath


def normalize_symbol(symbol: str) -> str:
    """Trim surrounding whitespace and leading ``./`` prefixes. Nothing else."""
    symbol = symbol.strip()
    while symbol.startswith("./"):
        symbol = symbol[2:]
    return symbol


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    activity: str | None = None
    line: int | None = None
    column: int | None = None

    def to_json(self) -> dict:
        out: dict = {"code": self.code, "message": self.message}
        if self.activity is not None:
            out["activity"] = self.activity
        if self.line is not None:
            out["line"] = self.line
        if self.column is not None:
            out["column"] = self.column
        return out

    def sort_key(self) -> tuple:
        return (self.activity or "", self.line or 0, self.column or 0, self.code, self.message)


# ---------------------------------------------------------------------------
# Column sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnSet:
    """Either every column of a source (``names is None``) or a finite set."""

    names: frozenset[str] | None = None

    @classmethod
    def all(cls) -> ColumnSet:
        return _ALL

    @classmethod
    def of(cls, names: Iterable[str]) -> ColumnSet:
        names = frozenset(names)
        for n in names:
            if not isinstance(n, str) or not n:
                raise ValueError(f"column names must be non-empty strings, got {n!r}")
        return cls(names)

    @property
    def is_all(self) -> bool:
        return self.names is None

    def __le__(self, other: ColumnSet) -> bool:
        if other.names is None:
            return True
        if self.names is None:
            return False
        return self.names <= other.names

    def __or__(self, other: ColumnSet) -> ColumnSet:
        return column_union(self, other)

    def covers(self, column: str) -> bool:
        return self.names is None or column in self.names

    def to_json(self) -> str | list[str]:
        return "*" if self.names is None else sorted(self.names)

    def __repr__(self) -> str:
        if self.names is None:
            return "All"
        return "{" + ",".join(sorted(self.names)) + "}"


_ALL = ColumnSet(None)
EMPTY_COLUMNS = ColumnSet(frozenset())


def column_union(a: ColumnSet, b: ColumnSet) -> ColumnSet:
    if a.names is None or b.names is None:
        return _ALL
    if a.names is b.names or b.names <= a.names:
        return a
    if a.names <= b.names:
        return b
    return ColumnSet(a.names | b.names)


def column_constrain(
    a: ColumnSet,
    columns: Iterable[str],
    diagnostics: list[Diagnostic] | None = None,
    symbol: str | None = None,
) -> ColumnSet:
    """Restrict a column set to the projected columns.

    The result is always ``Explicit(columns)``. Keeping the requested
    columns when they do not intersect ``a`` is what makes the projection
    transfer monotone; an empty intersection is reported as a diagnostic
    because it usually means the column came from a source we never saw.
    """
    wanted = frozenset(columns)
    if not wanted:
        raise ValueError("projection requires at least one column")
    if a.names is not None and not (a.names & wanted) and diagnostics is not None:
        diagnostics.append(
            Diagnostic(
                "empty-projection",
                f"projection {sorted(wanted)} does not intersect known columns "
                f"{sorted(a.names)} of {symbol or 'source'}; keeping requested columns",
            )
        )
    return ColumnSet.of(wanted)


# ---------------------------------------------------------------------------
# Data sources and mapping sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataSourceRef:
    symbol: str
    columns: ColumnSet = field(default_factory=ColumnSet.all)

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbol", normalize_symbol(self.symbol))
        if not self.symbol:
            raise ValueError("data source symbol must be non-empty")

    def __repr__(self) -> str:
        return f"{self.symbol}^{self.columns!r}"


class MappingSet(Mapping[str, ColumnSet]):
    """A set of data sources with at most one entry per symbol.

    Inserting a symbol twice unions the column sets. Instances are never
    mutated after construction, so they hash and compare by value.
    """

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries: Mapping[str, ColumnSet] | Iterable[DataSourceRef] = ()) -> None:
        merged: dict[str, ColumnSet] = {}
        items = entries.items() if isinstance(entries, Mapping) else ((r.symbol, r.columns) for r in entries)
        for symbol, cols in items:
            symbol = normalize_symbol(symbol)
            if not symbol:
                raise ValueError("data source symbol must be non-empty")
            prev = merged.get(symbol)
            merged[symbol] = cols if prev is None else column_union(prev, cols)
        self._entries = merged
        self._hash: int | None = None

    @classmethod
    def _wrap(cls, entries: dict[str, ColumnSet]) -> MappingSet:
        out = cls.__new__(cls)
        out._entries = entries
        out._hash = None
        return out

    @classmethod
    def single(cls, symbol: str, columns: ColumnSet | None = None) -> MappingSet:
        return cls({symbol: columns if columns is not None else ColumnSet.all()})

    def __getitem__(self, symbol: str) -> ColumnSet:
        return self._entries[symbol]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, MappingSet):
            return self._entries == other._entries
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __or__(self, other: MappingSet) -> MappingSet:
        return mapping_join(self, other)

    def __le__(self, other: MappingSet) -> bool:
        return all(s in other._entries and c <= other._entries[s] for s, c in self._entries.items())

    def refs(self) -> list[DataSourceRef]:
        return [DataSourceRef(s, self._entries[s]) for s in sorted(self._entries)]

    def without(self, symbols: Iterable[str]) -> MappingSet:
        drop = set(symbols)
        if not drop & self._entries.keys():
            return self
        return MappingSet._wrap({s: c for s, c in self._entries.items() if s not in drop})

    def restrict(self, keep: Callable[[str], bool]) -> MappingSet:
        return MappingSet._wrap({s: c for s, c in self._entries.items() if keep(s)})

    def map_columns(self, fn: Callable[[str, ColumnSet], ColumnSet]) -> MappingSet:
        return MappingSet._wrap({s: fn(s, c) for s, c in self._entries.items()})

    def to_json(self) -> list[dict]:
        return [{"symbol": s, "columns": self._entries[s].to_json()} for s in sorted(self._entries)]

    def __repr__(self) -> str:
        return "{" + ", ".join(repr(r) for r in self.refs()) + "}"


EMPTY_MAPPING = MappingSet()


def mapping_join(a: MappingSet, b: MappingSet) -> MappingSet:
    """Symbol-wise union; shared symbols get their column sets unioned."""
    if not b:
        return a
    if not a or a is b:
        return b
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    out: dict[str, ColumnSet] | None = None
    for symbol, cols in small._entries.items():
        prev = big._entries.get(symbol)
        merged = cols if prev is None else column_union(prev, cols)
        if prev is not merged:
            if out is None:
                out = dict(big._entries)
            out[symbol] = merged
    return big if out is None else MappingSet._wrap(out)


def join_all(sets: Iterable[MappingSet]) -> MappingSet:
    out = EMPTY_MAPPING
    for s in sets:
        out = mapping_join(out, s)
    return out


# ---------------------------------------------------------------------------
# Activities and graphs
# ---------------------------------------------------------------------------


class ActivityKind(str, enum.Enum):
    SCRIPT = "script"
    QUERY = "query"


@dataclass(frozen=True)
class Activity:
    id: str
    kind: ActivityKind
    path: str
    inputs: tuple[str, ...] | None = None
    outputs: tuple[str, ...] | None = None
    model: bool | None = None
    text: str | None = None
    load_error: str | None = None

    @property
    def suffix(self) -> str:
        return PurePosixPath(self.path).suffix.lower()


@dataclass(frozen=True)
class ActivityGraph:
    """Activities connected through the symbols they read and write.

    ``reads`` and ``writes`` are empty until the graph has been analyzed
    (see :meth:`with_io`); edges are implied by shared symbols.
    """

    id: str
    activities: tuple[Activity, ...]
    reads: Mapping[str, frozenset[str]] = field(default_factory=dict)
    writes: Mapping[str, frozenset[str]] = field(default_factory=dict)
    start: str | None = None

    def activity(self, activity_id: str) -> Activity:
        for a in self.activities:
            if a.id == activity_id:
                return a
        raise KeyError(activity_id)

    def with_io(
        self,
        reads: Mapping[str, Iterable[str]],
        writes: Mapping[str, Iterable[str]],
        start: str | None,
    ) -> ActivityGraph:
        return ActivityGraph(
            self.id,
            self.activities,
            {k: frozenset(v) for k, v in reads.items()},
            {k: frozenset(v) for k, v in writes.items()},
            start,
        )

    def deps(self, symbol: str) -> list[str]:
        """Ids of activities that write ``symbol``, in manifest order."""
        return [a.id for a in self.activities if symbol in self.writes.get(a.id, ())]

    def derived(self, symbol: str) -> bool:
        return any(symbol in w for w in self.writes.values())

    def edges(self) -> set[tuple[str, str]]:
        out = set()
        for a, w in self.writes.items():
            for b, r in self.reads.items():
                if w & r:
                    out.add((a, b))
        return out


@dataclass(frozen=True)
class Repository:
    root: str
    graphs: tuple[ActivityGraph, ...]
    diagnostics: tuple[Diagnostic, ...] = ()

    def graph(self, graph_id: str) -> ActivityGraph:
        for g in self.graphs:
            if g.id == graph_id:
                return g
        raise KeyError(graph_id)


@dataclass(frozen=True)
class ActivityAnalysis:
    """Result of analyzing one activity.

    ``mapping`` holds the sources reaching a model call, ``reads`` every
    source symbol the activity reads, and ``writes`` the sources flowing into
    each symbol it writes.
    """

    mapping: MappingSet = EMPTY_MAPPING
    reads: Mapping[str, ColumnSet] = field(default_factory=dict)
    writes: Mapping[str, MappingSet] = field(default_factory=dict)
    has_sink: bool = False
    diagnostics: tuple[Diagnostic, ...] = ()
    fallback: bool = False

    def outputs(self) -> MappingSet:
        return join_all(self.writes.values())
