"""Synthetic repositories with planted dependency maps, and timing runs.

A generated graph is a chain of producer activities (scripts or queries)
feeding one model script. Every producer's output is consumed by a later
activity, so all of its initial reads reach the model; optional side flows
read a source and write it somewhere nobody consumes, so they must not. A
fraction of graphs also read an earlier graph's prediction file.

Scripts and queries are padded with inert logging calls and comments until
their whitespace-delimited lexeme count reaches the requested size.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from scipy.stats import spearmanr, theilslopes

from .engine import AnalysisCache, GraphResult, analyze_graph, infer_transitive
from .ingest import MANIFEST_FILENAME, SCHEMA_VERSION, ActivityDecl, GraphDecl, ManifestDoc, build_repository, load_manifest
from .model import ColumnSet, MappingSet, join_all

HARDWARE_NOTE = (
    "# timings are wall-clock medians on the machine that ran this file; "
    "absolute values depend on hardware and are comparable only in order of magnitude"
)
CSV_COLUMNS = ("model_id", "avg_act_size", "no_act", "no_dep", "zeta_size", "t_ms", "correct")

# Geometric-mean shape of a desk-scale team's repository: 31 models with
# 4.8 activities, 40.8 dependencies and 4630.2 tokens per activity.
DESK_SCALE_SHAPE = {
    "n_graphs": 31,
    "activities_per_graph": 4.8,
    "avg_activity_tokens": 4630.2,
    "deps_per_graph": 40.8,
    "cross_graph_fraction": 0.2,
    "spread": 0.5,
}


@dataclass(frozen=True)
class BenchSpec:
    """Workload shape. Per-graph sizes are lognormal around the given
    geometric means when ``spread`` > 0 and exactly these sizes otherwise."""

    n_graphs: int
    activities_per_graph: float
    avg_activity_tokens: float
    deps_per_graph: float
    cross_graph_fraction: float = 0.0
    seed: int = 0
    spread: float = 0.0
    query_fraction: float = 0.3

    def __post_init__(self) -> None:
        for name in ("n_graphs", "activities_per_graph", "avg_activity_tokens", "deps_per_graph"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 1:
                raise ValueError(f"{name} must be a number >= 1, got {value!r}")
        if not isinstance(self.n_graphs, int):
            raise ValueError("n_graphs must be an integer")
        for name in ("cross_graph_fraction", "query_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not -(2**63) <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit integer, got {self.seed!r}")
        if self.spread < 0:
            raise ValueError("spread must be >= 0")

    @classmethod
    def from_json(cls, data: dict, seed: int | None = None) -> BenchSpec:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown BenchSpec keys {sorted(unknown)}")
        if seed is not None:
            data = {**data, "seed": seed}
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path, seed: int | None = None) -> BenchSpec:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")), seed)

    def to_json(self) -> dict:
        return asdict(self)


def desk_scale_spec(seed: int = 0) -> BenchSpec:
    return BenchSpec(**DESK_SCALE_SHAPE, seed=seed)


def count_tokens(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class GraphShape:
    n_activities: int
    n_deps: int
    avg_tokens: float


@dataclass
class GroundTruth:
    zeta: dict[str, MappingSet] = field(default_factory=dict)
    final: dict[str, MappingSet] = field(default_factory=dict)
    shapes: dict[str, GraphShape] = field(default_factory=dict)
    model_activity: dict[str, str] = field(default_factory=dict)


@dataclass
class _Source:
    symbol: str
    table: bool
    columns: list[str]


@dataclass
class _Act:
    index: int
    query: bool
    output: str | None
    initial: list[tuple[_Source, frozenset[str] | None]] = field(default_factory=list)
    derived: list[str] = field(default_factory=list)
    side: _Source | None = None
    cross: str | None = None


def _centered_normals(rng: random.Random, n: int) -> list[float]:
    z = [rng.gauss(0.0, 1.0) for _ in range(n)]
    mean = sum(z) / n if n else 0.0
    return [v - mean for v in z]


def _padding_line(rng: random.Random, comment: str, tag: str, script: bool) -> str:
    n, m = rng.randint(1, 999), rng.randint(1, 99)
    if script and rng.random() < 0.5:
        return f'logger.info("{tag} checkpoint %d of %d", {n}, {m})'
    words = rng.sample(_PAD_WORDS, 6)
    return f"{comment} step {n}: {' '.join(words)}"


_PAD_WORDS = (
    "keep columns aligned with upstream schema before the join and after dedup "
    "filter stale partitions refresh cached statistics validate row counts"
).split()


def _pad(rng: random.Random, lines: list[str], target: int, comment: str, tag: str, script: bool, movable: list[int]) -> str:
    """Insert padding after any index in ``movable`` until ``target`` lexemes."""
    total = count_tokens("\n".join(lines))
    extra: dict[int, list[str]] = {}
    while total < target:
        line = _padding_line(rng, comment, tag, script)
        extra.setdefault(rng.choice(movable), []).append(line)
        total += count_tokens(line)
    out: list[str] = []
    for i, line in enumerate(lines):
        out.append(line)
        out.extend(extra.get(i, ()))
    return "\n".join(out) + "\n"


def _script_text(rng: random.Random, gid: str, act: _Act, model: bool, target: int) -> str:
    lines = ["import logging", "", "import pandas as pd"]
    if model:
        lines.append("from sklearn.ensemble import RandomForestClassifier")
    lines += ["", f'logger = logging.getLogger("{gid}.a{act.index}")', ""]
    helper = rng.random() < 0.5
    if helper:
        lines += ["", "def tidy(frame):", "    cleaned = frame.dropna()", "    return cleaned", ""]
    movable = [len(lines) - 1]
    parts: list[str] = []
    for i, (src, cols) in enumerate(act.initial):
        lines.append(f'raw_{i} = pd.read_csv("{src.symbol}")')
        movable.append(len(lines) - 1)
        if cols is None:
            lines.append(f"part_{i} = raw_{i}.dropna()")
        else:
            sel = ", ".join(f'"{c}"' for c in sorted(cols))
            if helper and rng.random() < 0.5:
                lines.append(f"part_{i} = tidy(raw_{i}[[{sel}]])")
            else:
                lines.append(f"part_{i} = raw_{i}[[{sel}]]")
        movable.append(len(lines) - 1)
        parts.append(f"part_{i}")
    for i, symbol in enumerate(act.derived):
        lines.append(f'up_{i} = pd.read_parquet("{symbol}")')
        movable.append(len(lines) - 1)
        parts.append(f"up_{i}")
    if act.cross:
        lines.append(f'previous = pd.read_csv("{act.cross}")')
        parts.append("previous")
    if act.side is not None:
        lines.append(f'aux = pd.read_csv("{act.side.symbol}")')
        lines.append(f'aux.describe().to_csv("{gid}/side_a{act.index}.csv")')
    rng.shuffle(parts)
    lines.append(f"frame = {parts[0]}")
    for p in parts[1:]:
        lines.append(f'frame = frame.merge({p}, on="key", how="left")')
        movable.append(len(lines) - 1)
    if model:
        n = rng.choice((50, 100, 200, 400))
        lines += [
            f"model = RandomForestClassifier(n_estimators={n})",
            "model.fit(frame)",
            "pred = model.predict(frame)",
            f'pred.to_csv("{gid}/prediction.csv")',
        ]
    else:
        lines.append(f'frame.to_parquet("{act.output}")')
    return _pad(rng, lines, target, "#", gid, True, movable)


def _query_text(rng: random.Random, gid: str, act: _Act, target: int) -> tuple[str, str, dict[str, frozenset[str]]]:
    """Returns (text, suffix, planted column sets of initial tables)."""
    tables = [(s.symbol, s.columns, cols) for s, cols in act.initial]
    derived = list(act.derived)
    names = [t[0] for t in tables] + derived
    order = list(range(len(names)))
    rng.shuffle(order)
    names = [names[i] for i in order]
    joined = len(names) > 1
    truth: dict[str, set[str]] = {s: set() for s, _, _ in tables}
    first_initial = next((n for n in names if n in truth), None)
    where_col = None
    if first_initial is not None and rng.random() < 0.6:
        schema = next(c for s, c, _ in tables if s == first_initial)
        where_col = rng.choice(schema)
    if rng.random() < 0.5:
        lines = [f"INSERT INTO {act.output}"]
        selects = []
        for s, _, cols in tables:
            alias = f"t{names.index(s)}"
            selects += [f"{alias}.{c}" for c in sorted(cols or ())]
            truth[s] |= set(cols or ())
        if not selects:
            selects = ["t0.key"]
            if names[0] in truth:
                truth[names[0]].add("key")
        lines.append("SELECT " + ", ".join(selects))
        lines.append(f"FROM {names[0]} AS t0")
        for i, n in enumerate(names[1:], start=1):
            lines.append(f"JOIN {n} AS t{i} ON t0.key = t{i}.key")
        if where_col:
            lines.append(f"WHERE t{names.index(first_initial)}.{where_col} > {rng.randint(0, 99)}")
            truth[first_initial].add(where_col)
        if joined:
            for s in truth:
                truth[s].add("key")
        comment, suffix = "--", ".sql"
    else:
        used: set[str] = set()
        for _, _, cols in tables:
            used |= set(cols or ())
        if where_col:
            used.add(where_col)
        if joined:
            used.add("key")
        project = sorted(used - ({where_col} if where_col and rng.random() < 0.5 else set())) or ["key"]
        used |= set(project)
        lines = [f".set-or-append {act.output} <|", names[0]]
        for n in names[1:]:
            lines.append(f"| join kind=inner ({n}) on key")
        if where_col:
            lines.append(f"| where {where_col} > {rng.randint(0, 99)}")
        lines.append("| project " + ", ".join(project))
        truth = {s: set(used) for s in truth}
        comment, suffix = "//", ".kql"
    text = _pad(rng, lines, target, comment, gid, False, list(range(len(lines))))
    return text, suffix, {s: frozenset(c) for s, c in truth.items()}


def generate_repo(spec: BenchSpec, directory: str | Path) -> GroundTruth:
    """Write a manifest and artifacts under ``directory`` and return the
    dependency maps they imply by construction."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)
    n = spec.n_graphs
    za, zd, zt = (_centered_normals(rng, n) for _ in range(3))
    ratio = spec.deps_per_graph / spec.activities_per_graph
    consumers = set(rng.sample(range(1, n), min(n - 1, round(spec.cross_graph_fraction * n)))) if n > 1 else set()

    truth = GroundTruth()
    graphs: list[GraphDecl] = []
    files: dict[str, str] = {}
    for g in range(n):
        gid = f"m{g:02d}"
        n_act = max(1, round(spec.activities_per_graph * math.exp(spec.spread * za[g])))
        tokens = max(40, round(spec.avg_activity_tokens * math.exp(spec.spread * zt[g])))
        want_deps = round(n_act * ratio * math.exp(spec.spread * zd[g]))

        acts: list[_Act] = []
        for j in range(n_act):
            model = j == n_act - 1
            query = not model and rng.random() < spec.query_fraction
            out = None if model else (f"{gid}_stage{j}" if query else f"{gid}/stage{j}.parquet")
            acts.append(_Act(j, query, out))
        for j, act in enumerate(acts[:-1]):
            eligible = [c for c in acts[j + 1:] if not c.query or act.query]
            rng.choice(eligible).derived.append(act.output)  # type: ignore[arg-type]
        if g in consumers:
            acts[-1].cross = f"m{rng.randrange(g):02d}/prediction.csv"

        fixed = sum(len(a.derived) for a in acts) + (1 if acts[-1].cross else 0)
        budget = max(n_act, want_deps - fixed)
        counts = [1] * n_act
        for _ in range(budget - n_act):
            counts[rng.randrange(n_act)] += 1

        pool: list[_Source] = []

        def fresh(table: bool) -> _Source:
            i = len(pool)
            schema = ["key", *(f"c{k}" for k in range(rng.randint(6, 14)))]
            sym = f"{gid}_raw{i}" if table else f"data/{gid}/src{i}.csv"
            pool.append(_Source(sym, table, schema))
            return pool[-1]

        for act, count in zip(acts, counts):
            chosen: list[_Source] = []
            for _ in range(count):
                reusable = [s for s in pool if s not in chosen and (s.table or not act.query)]
                src = rng.choice(reusable) if reusable and rng.random() < 0.3 else fresh(act.query or rng.random() < 0.3)
                chosen.append(src)
            for src in chosen:
                if not act.query and rng.random() < 0.1:
                    act.initial.append((src, None))
                else:
                    k = rng.randint(1, min(4, len(src.columns) - 1))
                    cols = frozenset(rng.sample(src.columns[1:], k)) | ({"key"} if not act.query else set())
                    act.initial.append((src, cols))
            if not act.query and rng.random() < 0.3:
                act.side = _Source(f"data/{gid}/aux{act.index}.csv", False, ["key"])

        decls = []
        zeta_parts: list[MappingSet] = []
        sizes = []
        deps = 0
        for act in acts:
            jitter = rng.uniform(0.8, 1.2)
            target = max(20, round(tokens * jitter))
            if act.query:
                text, suffix, planted = _query_text(rng, gid, act, target)
                zeta_parts.append(MappingSet({s: ColumnSet.of(c) for s, c in planted.items()}))
            else:
                text, suffix = _script_text(rng, gid, act, act.index == n_act - 1, target), ".py"
                zeta_parts.append(
                    MappingSet({s.symbol: ColumnSet.all() if c is None else ColumnSet.of(c) for s, c in act.initial})
                )
            if act.cross:
                zeta_parts.append(MappingSet({act.cross: ColumnSet.all()}))
            deps += len({s.symbol for s, _ in act.initial}) + len(act.derived) + bool(act.cross) + bool(act.side)
            sizes.append(count_tokens(text))
            kind = "query" if act.query else "script"
            folder = "queries" if act.query else "scripts"
            path = f"{gid}/{folder}/a{act.index}{suffix}"
            files[path] = text
            decls.append(ActivityDecl(f"a{act.index}", kind, path))
        graphs.append(GraphDecl(gid, tuple(decls)))

        zeta = join_all(zeta_parts)
        truth.zeta[gid] = zeta
        truth.model_activity[gid] = f"a{n_act - 1}"
        truth.shapes[gid] = GraphShape(n_act, deps, sum(sizes) / len(sizes))
        own = zeta.without(s for s in zeta if s.endswith("/prediction.csv"))
        inherited = [truth.final[s.split("/")[0]] for s in zeta if s.endswith("/prediction.csv")]
        truth.final[gid] = join_all([own, *inherited])

    for rel, text in sorted(files.items()):
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(text.encode("utf-8"))
    (root / MANIFEST_FILENAME).write_bytes(ManifestDoc(SCHEMA_VERSION, tuple(graphs)).dumps().encode("utf-8"))
    return truth


@dataclass(frozen=True)
class BenchRow:
    model_id: str
    avg_act_size: float
    no_act: int
    no_dep: int
    zeta_size: int
    t_ms: float
    correct: bool


@dataclass
class BenchResult:
    rows: list[BenchRow]
    spearman_rho: float
    spearman_p: float
    inter_graph: tuple[str, ...] = ()  # models whose map changed in cross-graph inference

    def geomean_ms(self) -> float:
        return statistics.geometric_mean(r.t_ms for r in self.rows)

    def all_correct(self) -> bool:
        return all(r.correct for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(HARDWARE_NOTE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.model_id, f"{r.avg_act_size:.1f}", r.no_act, r.no_dep, r.zeta_size, f"{r.t_ms:.2f}", r.correct])
        return buf.getvalue()


def _time_graph(doc: ManifestDoc, root: Path, gid: str) -> tuple[float, GraphResult]:
    t0 = time.perf_counter()
    (g,) = build_repository(ManifestDoc(doc.schema_version, tuple(x for x in doc.graphs if x.id == gid)), root).graphs
    result = analyze_graph(g, cache=AnalysisCache())
    return time.perf_counter() - t0, result


def run_bench(
    spec: BenchSpec,
    repetitions: int = 3,
    *,
    directory: str | Path | None = None,
    workers: int = 1,
) -> BenchResult:
    """Generate the corpus, then time each model's mapping.

    A model's time covers reading its artifacts, analyzing its graph with a
    cold cache and the cross-graph inference step, median of
    ``repetitions`` runs. ``workers`` > 1 times graphs concurrently, which
    measures throughput rather than clean per-model latency.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(directory) if directory is not None else Path(tmp)
        truth = generate_repo(spec, root)
        doc = load_manifest(root)
        gids = [g.id for g in doc.graphs]
        samples: dict[str, list[float]] = {gid: [] for gid in gids}
        results: dict[str, GraphResult] = {}
        for _ in range(repetitions):
            if workers > 1:
                with ThreadPoolExecutor(workers) as pool:
                    timed = list(pool.map(lambda gid: _time_graph(doc, root, gid), gids))
            else:
                timed = [_time_graph(doc, root, gid) for gid in gids]
            for gid, (dt, res) in zip(gids, timed):
                samples[gid].append(dt)
                results[gid] = res
        t0 = time.perf_counter()
        final = infer_transitive(results)
        transitive = time.perf_counter() - t0

    rows = []
    for gid in gids:
        r = results[gid]
        ok = (
            r.zeta == truth.zeta[gid]
            and final[gid] == truth.final[gid]
            and r.start == truth.model_activity[gid]
        )
        shape = truth.shapes[gid]
        t_ms = (statistics.median(samples[gid]) + transitive) * 1000.0
        rows.append(BenchRow(gid, shape.avg_tokens, shape.n_activities, shape.n_deps, len(final[gid]), t_ms, ok))
    if len(rows) > 2 and len({r.zeta_size for r in rows}) > 1:
        rho, p = spearmanr([r.zeta_size for r in rows], [r.t_ms for r in rows])
        rho, p = float(rho), float(p)
    else:
        rho, p = float("nan"), float("nan")
    inter = tuple(gid for gid in gids if final[gid] != results[gid].zeta)
    return BenchResult(rows, rho, p, inter)


@dataclass(frozen=True)
class SweepResult:
    """Model time against |ζ| on graphs of identical size."""

    zeta_sizes: list[int]
    t_ms: list[float]
    spearman_rho: float
    spearman_p: float
    relative_effect: float
    correct: bool


def _sweep_script(j: int, reads: int, keep: set[int], model: bool) -> list[str]:
    lines = ["import logging", "", "import pandas as pd", "", f'logger = logging.getLogger("sweep.a{j}")', ""]
    lines.append(f'frame = pd.read_parquet("sweep/stage{j - 1}.parquet")' if j else "frame = pd.DataFrame()")
    lines.append("side = pd.DataFrame()")
    for i in range(reads):
        lines.append(f'raw_{i:02d} = pd.read_csv("data/a{j}/src{i:02d}.csv")')
        lines.append(f'part_{i:02d} = raw_{i:02d}[["key", "value"]]')
        target = "frame" if i in keep else "side"
        lines.append(f'{target} = {target}.merge(part_{i:02d}, on="key", how="left")')
    lines.append(f'side.to_csv("sweep/side{j}.csv")')
    if model:
        lines += ["model = LinearRegression()", "model.fit(frame)"]
    else:
        lines.append(f'frame.to_parquet("sweep/stage{j}.parquet")')
    return lines


def zeta_sweep(
    points: int = 20,
    activities: int = 5,
    reads_per_activity: int = 12,
    tokens: int = 4630,
    repetitions: int = 5,
    seed: int = 0,
) -> SweepResult:
    """Time graphs that differ only in how many of their reads reach the model.

    Every point has the same activities, statements and lexemes; the reads
    that do not reach the model are written to a file nobody consumes.
    ``relative_effect`` is the Theil-Sen slope of time over |ζ| times the
    |ζ| range, divided by the median time.
    """
    total = activities * reads_per_activity
    sizes = sorted({round(1 + i * (total - 1) / max(1, points - 1)) for i in range(points)})
    order = random.Random(seed).sample(range(len(sizes)), len(sizes))  # interleave sizes against drift
    measured: dict[int, float] = {}
    correct = True
    with tempfile.TemporaryDirectory() as tmp:
        for idx in order:
            k = sizes[idx]
            picks = random.Random(seed * 7919 + k).sample(range(total), k)
            root = Path(tmp) / f"k{k}"
            decls, expected = [], set()
            for j in range(activities):
                keep = {p - j * reads_per_activity for p in picks if p // reads_per_activity == j}
                expected |= {f"data/a{j}/src{i:02d}.csv" for i in keep}
                lines = _sweep_script(j, reads_per_activity, keep, j == activities - 1)
                text = _pad(random.Random(seed + j), lines, tokens, "#", "sweep", True, [len(lines) - 1])
                path = root / f"a{j}.py"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(text, encoding="utf-8")
                decls.append(ActivityDecl(f"a{j}", "script", f"a{j}.py"))
            doc = ManifestDoc(SCHEMA_VERSION, (GraphDecl("sweep", tuple(decls)),))
            (root / MANIFEST_FILENAME).write_text(doc.dumps(), encoding="utf-8")
            samples = []
            for _ in range(repetitions):
                dt, result = _time_graph(doc, root, "sweep")
                samples.append(dt * 1000.0)
            correct = correct and set(result.zeta) == expected
            measured[k] = statistics.median(samples)
    times = [measured[k] for k in sizes]
    rho, p = spearmanr(sizes, times)
    slope = theilslopes(times, sizes)[0]
    effect = float(slope * (sizes[-1] - sizes[0]) / statistics.median(times))
    return SweepResult(sizes, times, float(rho), float(p), effect, correct)
