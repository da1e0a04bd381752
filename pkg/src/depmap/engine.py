"""Per-graph backward propagation and cross-graph transitive inference.

Within one activity graph, propagation starts at the model activity, keeps
the initial (non-derived) sources it finds and follows derived symbols back
to the activities that write them. Across graphs, a graph whose sources
include another graph's model output inherits that graph's sources.
"""

from __future__ import annotations

import threading
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .model import (
    EMPTY_MAPPING,
    Activity,
    ActivityAnalysis,
    ActivityGraph,
    ActivityKind,
    ColumnSet,
    Diagnostic,
    MappingSet,
    join_all,
    mapping_join,
)
from .query import QuerySyntaxError, extract_sources, parse_query
from .script import AnalyzerConfig, ScriptSyntaxError, analyze_source

_SINK = "\0sink"  # demand token: the model mapping of the start activity


class AnalysisCache:
    """Write-once memo of activity analyses, safe to share between threads."""

    def __init__(self) -> None:
        self._data: dict[tuple[str, str], ActivityAnalysis | None] = {}
        self._lock = threading.Lock()

    def get_or_compute(self, key: tuple[str, str], compute) -> ActivityAnalysis | None:
        with self._lock:
            if key in self._data:
                return self._data[key]
        value = compute()
        with self._lock:
            return self._data.setdefault(key, value)

    def __len__(self) -> int:
        return len(self._data)


@dataclass(frozen=True)
class GraphResult:
    graph_id: str
    start: str | None
    zeta: MappingSet
    derived_seen: frozenset[str]
    outputs: Mapping[str, MappingSet]
    diagnostics: tuple[Diagnostic, ...] = ()
    visits: int = 0
    error: str | None = None

    @property
    def output_symbols(self) -> frozenset[str]:
        return frozenset(self.outputs)


def _fallback(activity: Activity, diag: Diagnostic) -> ActivityAnalysis:
    inputs = activity.inputs or ()
    mapping = MappingSet({s: ColumnSet.all() for s in inputs})
    return ActivityAnalysis(
        mapping=mapping,
        reads={s: ColumnSet.all() for s in sorted(inputs)},
        writes={o: mapping for o in sorted(activity.outputs or ())},
        has_sink=bool(activity.model),
        diagnostics=(diag,),
        fallback=True,
    )


def _substitute(m: MappingSet, symbol: str, replacements: Iterable[str]) -> MappingSet:
    if symbol not in m:
        return m
    cols = m[symbol]
    return mapping_join(m.without([symbol]), MappingSet({r: cols for r in replacements}))


def _resolve_declared(activity: Activity, a: ActivityAnalysis) -> ActivityAnalysis:
    """Bind synthetic unknown-in/out symbols to unmatched manifest declarations."""
    reads, writes, mapping = dict(a.reads), dict(a.writes), a.mapping
    diags = list(a.diagnostics)
    unknown_in = f"{activity.id}:unknown-in"
    if unknown_in in reads and activity.inputs:
        spare = [s for s in activity.inputs if s not in reads]
        if spare:
            del reads[unknown_in]
            for s in spare:
                reads[s] = ColumnSet.all()
            mapping = _substitute(mapping, unknown_in, spare)
            writes = {k: _substitute(v, unknown_in, spare) for k, v in writes.items()}
            diags.append(Diagnostic("resolved-input", f"{unknown_in} bound to declared inputs {spare}", activity.id))
    unknown_out = f"{activity.id}:unknown-out"
    if unknown_out in writes and activity.outputs:
        spare = [s for s in activity.outputs if s not in writes]
        if spare:
            flowing = writes.pop(unknown_out)
            for s in spare:
                writes[s] = flowing
            diags.append(Diagnostic("resolved-output", f"{unknown_out} bound to declared outputs {spare}", activity.id))
    if activity.inputs is not None:
        declared, found = set(activity.inputs), set(reads)
        if declared != found:
            diags.append(
                Diagnostic(
                    "declared-io-mismatch",
                    f"declared inputs differ from analyzed reads: declared only {sorted(declared - found)}, "
                    f"analyzed only {sorted(found - declared)}",
                    activity.id,
                )
            )
    if activity.outputs is not None:
        declared, found = set(activity.outputs), set(writes)
        if declared != found:
            diags.append(
                Diagnostic(
                    "declared-io-mismatch",
                    f"declared outputs differ from analyzed writes: declared only {sorted(declared - found)}, "
                    f"analyzed only {sorted(found - declared)}",
                    activity.id,
                )
            )
    return ActivityAnalysis(
        mapping,
        dict(sorted(reads.items())),
        dict(sorted(writes.items())),
        a.has_sink,
        tuple(sorted(set(diags), key=Diagnostic.sort_key)),
        a.fallback,
    )


def analyze_activity(
    activity: Activity,
    config: AnalyzerConfig | None = None,
    *,
    cache: AnalysisCache | None = None,
    graph_id: str = "",
) -> ActivityAnalysis | None:
    """Analyze one artifact; ``None`` when its file could not be read."""
    config = config or AnalyzerConfig()

    def compute() -> ActivityAnalysis | None:
        if activity.text is None:
            return None
        try:
            if activity.kind is ActivityKind.SCRIPT:
                result = analyze_source(activity.text, config, activity_id=activity.id)
                if activity.model is not None and activity.model != result.has_sink:
                    result = ActivityAnalysis(
                        result.mapping, result.reads, result.writes, activity.model,
                        result.diagnostics, result.fallback,
                    )
            else:
                q = parse_query(activity.text, activity.suffix)
                result = extract_sources(q, activity_id=activity.id, declared_outputs=activity.outputs)
        except (ScriptSyntaxError, QuerySyntaxError) as exc:
            return _fallback(
                activity,
                Diagnostic(
                    "unanalyzable",
                    f"{exc.message}; using declared inputs {list(activity.inputs or ())} with all columns",
                    activity.id,
                    exc.line,
                    exc.column,
                ),
            )
        return _resolve_declared(activity, result)

    if cache is None:
        return compute()
    return cache.get_or_compute((graph_id, activity.id), compute)


def find_start(graph: ActivityGraph, analyses: Mapping[str, ActivityAnalysis]) -> tuple[str | None, str | None]:
    """The model activity, or ``(None, error)``."""
    flagged = [a.id for a in graph.activities if a.model and a.id in analyses]
    if len(flagged) == 1:
        return flagged[0], None
    if len(flagged) > 1:
        return None, f"ambiguous start: activities {flagged} are all marked as the model"
    sinks = [a.id for a in graph.activities if a.id in analyses and analyses[a.id].has_sink]
    if not sinks:
        return None, "no model: no activity trains a model"
    if len(sinks) > 1:
        return None, f"ambiguous start: activities {sinks} all train a model; mark one with \"model\": true"
    return sinks[0], None


def analyze_graph(
    graph: ActivityGraph,
    config: AnalyzerConfig | None = None,
    *,
    cache: AnalysisCache | None = None,
) -> GraphResult:
    """Backward propagation from the model activity to initial sources.

    Each activity is (re)processed only for symbols it has not yet been
    asked to produce; the model activity is processed for its model
    mapping. When no activity gains a new demand the result is a fixpoint,
    which also bounds the work on cyclic graphs.
    """
    config = config or AnalyzerConfig()
    diagnostics: list[Diagnostic] = []
    analyses: dict[str, ActivityAnalysis] = {}
    for act in graph.activities:
        a = analyze_activity(act, config, cache=cache, graph_id=graph.id)
        if a is None:
            diagnostics.append(
                Diagnostic("missing-artifact", f"{act.path} could not be read; activity excluded", act.id)
            )
            continue
        analyses[act.id] = a
        diagnostics.extend(a.diagnostics)

    start, error = find_start(graph, analyses)
    g = graph.with_io(
        {k: set(v.reads) for k, v in analyses.items()},
        {k: set(v.writes) for k, v in analyses.items()},
        start,
    )
    if start is None:
        diagnostics.append(Diagnostic("graph-error", error or "no model"))
        return GraphResult(graph.id, None, EMPTY_MAPPING, frozenset(), {}, _sorted(diagnostics), 0, error)

    zeta = EMPTY_MAPPING
    derived_seen: set[str] = set()
    demands: dict[str, set[str]] = {start: {_SINK}}
    done: dict[str, set[str]] = {}
    nodes: deque[str] = deque([start])
    queued = {start}
    visits = 0
    while nodes:
        act = nodes.popleft()
        queued.discard(act)
        visits += 1
        seen = done.setdefault(act, set())
        new = demands[act] - seen
        seen |= new
        analysis = analyses[act]
        found = join_all(
            analysis.mapping if d == _SINK else analysis.writes.get(d, EMPTY_MAPPING) for d in sorted(new)
        )
        initial: dict[str, ColumnSet] = {}
        for symbol, cols in found.items():
            if g.derived(symbol):
                derived_seen.add(symbol)
                for producer in g.deps(symbol):
                    want = demands.setdefault(producer, set())
                    if symbol not in want:
                        want.add(symbol)
                        if producer not in queued:
                            queued.add(producer)
                            nodes.append(producer)
            else:
                initial[symbol] = cols
        zeta = mapping_join(zeta, MappingSet(initial))

    outputs = dict(analyses[start].writes)
    return GraphResult(graph.id, start, zeta, frozenset(derived_seen), outputs, _sorted(diagnostics), visits)


def _sorted(diags: Iterable[Diagnostic]) -> tuple[Diagnostic, ...]:
    return tuple(sorted(set(diags), key=Diagnostic.sort_key))


def output_producers(results: Mapping[str, GraphResult]) -> dict[str, list[str]]:
    """Model-output symbol -> ids of the graphs producing it."""
    producers: dict[str, list[str]] = {}
    for gid in sorted(results):
        for o in results[gid].outputs:
            producers.setdefault(o, []).append(gid)
    return producers


def ambiguous_producer(symbol: str, graph_ids: Sequence[str]) -> Diagnostic:
    return Diagnostic("ambiguous-producer", f"{symbol} is a model output of graphs {list(graph_ids)}; joining all")


def infer_transitive(
    results: Mapping[str, GraphResult],
    *,
    order: Sequence[str] | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> dict[str, MappingSet]:
    """Replace every other-graph model output in a graph's sources by that
    graph's own sources, repeatedly, until nothing changes.

    The result is the least fixpoint of the substitution, so it does not
    depend on ``order`` (the graph visiting order) and cycles between graphs
    terminate. Final maps contain no symbol that any graph produces.
    """
    producers = output_producers(results)
    if diagnostics is not None:
        for o, gids in sorted(producers.items()):
            if len(gids) > 1:
                diagnostics.append(ambiguous_producer(o, gids))

    order = list(order) if order is not None else sorted(results)
    base = {gid: r.zeta.without(producers) for gid, r in results.items()}
    links = {
        gid: sorted({a for o in r.zeta if o in producers for a in producers[o] if a != gid})
        for gid, r in results.items()
    }
    final = dict(base)
    changed = True
    while changed:
        changed = False
        for gid in order:
            new = join_all([base[gid], *(final[a] for a in links[gid])])
            if new != final[gid]:
                final[gid] = new
                changed = True
    return final
