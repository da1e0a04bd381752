from __future__ import annotations

import random
import time

from hypothesis import given, settings
from hypothesis import strategies as st

from depmap.engine import AnalysisCache, GraphResult, analyze_graph, infer_transitive
from depmap.ingest import load_repository
from depmap.model import Activity, ActivityGraph, ActivityKind, ColumnSet, MappingSet, join_all
from depmap.report import run_analysis

from .repos import act, read_write, write_repo

ALL = ColumnSet.all()


def cs(*names: str) -> ColumnSet:
    return ColumnSet.of(names)


# Hand-applied rules on the two-graph repository. The query projects
# loc and name after joining on id, so both tables contribute {id, loc, name};
# the training script constrains file2 to target before fitting.
A1_ZETA = MappingSet({"file2.csv": cs("target"), "table1": cs("id", "loc", "name"), "table2": cs("id", "loc", "name")})
A2_FINAL = MappingSet(
    {
        "file2.csv": cs("name", "target"),
        "labels.csv": cs("label"),
        "table1": cs("id", "loc", "name"),
        "table2": cs("id", "loc", "name"),
    }
)


def test_two_graph_repository(two_graphs):
    t0 = time.perf_counter()
    repo = load_repository(two_graphs)
    results = {g.id: analyze_graph(g) for g in repo.graphs}
    final = infer_transitive(results)
    elapsed = time.perf_counter() - t0

    a1, a2 = results["A1"], results["A2"]
    assert a1.start == "Train1" and a2.start == "Train2"
    assert a1.zeta == A1_ZETA
    assert a1.derived_seen == {"file1.csv"}
    assert a1.output_symbols == {"output.csv"}
    assert set(a2.zeta) == {"output.csv", "file2.csv", "labels.csv"}
    assert final["A2"] == A2_FINAL
    assert final["A1"] == A1_ZETA
    assert elapsed < 1.0


def scripts_graph(gid: str, scripts: dict[str, str], **flags) -> ActivityGraph:
    acts = tuple(
        Activity(aid, ActivityKind.SCRIPT, f"{aid}.py", model=flags.get(aid), text=text) for aid, text in scripts.items()
    )
    return ActivityGraph(gid, acts)


def test_two_cycle_terminates():
    g = scripts_graph("C2", {"a": read_write(["s2", "ta.csv"], ["s1"]), "b": read_write(["s1", "tb.csv"], ["s2"], fit=True)})
    r = analyze_graph(g)
    assert r.start == "b"
    assert r.zeta == MappingSet({"ta.csv": ALL, "tb.csv": ALL})
    assert r.derived_seen == {"s1", "s2"}


def test_three_cycle_terminates():
    g = scripts_graph(
        "C3",
        {
            "a": read_write(["s3", "ta.csv"], ["s1"], cols={"ta.csv": ["x"]}),
            "b": read_write(["s1", "tb.csv"], ["s2"]),
            "c": read_write(["s2", "tc.csv"], ["s3"], fit=True, cols={"tc.csv": ["y", "z"]}),
        },
    )
    r = analyze_graph(g)
    assert r.zeta == MappingSet({"ta.csv": cs("x"), "tb.csv": ALL, "tc.csv": cs("y", "z")})
    assert r.visits <= 3 * 4


def test_single_activity_graph_is_its_own_mapping():
    g = scripts_graph("S", {"t": read_write(["a.csv", "b.csv"], fit=True, cols={"a.csv": ["p"]})})
    r = analyze_graph(g)
    assert r.zeta == MappingSet({"a.csv": cs("p"), "b.csv": ALL})
    assert r.visits == 1


def test_only_the_slice_feeding_the_demanded_output_is_followed():
    # the producer writes two files from disjoint reads; the model needs one
    producer = "\n".join(
        [
            "import pandas as pd",
            'a = pd.read_csv("a.csv")',
            'b = pd.read_csv("b.csv")',
            'a.to_csv("used.csv")',
            'b.to_csv("unused.csv")',
        ]
    )
    g = scripts_graph("P", {"p": producer, "t": read_write(["used.csv"], fit=True)})
    assert set(analyze_graph(g).zeta) == {"a.csv"}


def test_unparsable_script_falls_back_to_declared_inputs(tmp_path):
    write_repo(
        tmp_path,
        {"G": [act("prep", "prep.py", inputs=["raw.csv"], outputs=["clean.csv"]), act("t", "t.py")]},
        {"prep.py": "def broken(:\n", "t.py": read_write(["clean.csv", "extra.csv"], fit=True)},
    )
    r = analyze_graph(load_repository(tmp_path).graph("G"))
    assert r.zeta == MappingSet({"raw.csv": ALL, "extra.csv": ALL})
    (d,) = [d for d in r.diagnostics if d.code == "unanalyzable"]
    assert d.activity == "prep" and d.line == 1


def test_graph_errors():
    no_model = scripts_graph("N", {"a": read_write(["x.csv"], ["y.csv"])})
    r = analyze_graph(no_model)
    assert r.start is None and r.error.startswith("no model")
    assert r.zeta == MappingSet()

    two = scripts_graph("T", {"a": read_write(["x.csv"], fit=True), "b": read_write(["y.csv"], fit=True)})
    r = analyze_graph(two)
    assert r.start is None and r.error.startswith("ambiguous start")

    chosen = scripts_graph("O", {"a": read_write(["x.csv"], fit=True), "b": read_write(["y.csv"], fit=True)}, b=True)
    r = analyze_graph(chosen)
    assert r.start == "b" and set(r.zeta) == {"y.csv"}


def test_error_graphs_are_still_reported(tmp_path):
    write_repo(tmp_path, {"G": [act("a", "a.py")]}, {"a.py": read_write(["x.csv"], ["y.csv"])})
    (m,) = run_analysis(tmp_path, clock=lambda: "t").models
    assert m.model_activity_id is None and m.sources == MappingSet()
    assert [d.code for d in m.diagnostics] == ["graph-error"]


def test_cache_is_shared_and_keyed_by_graph():
    g = scripts_graph("S", {"t": read_write(["a.csv"], fit=True)})
    cache = AnalysisCache()
    first = analyze_graph(g, cache=cache)
    assert len(cache) == 1
    assert analyze_graph(g, cache=cache) == first
    analyze_graph(ActivityGraph("S2", g.activities), cache=cache)
    assert len(cache) == 2


# per-graph propagation against plain reachability

@st.composite
def script_graphs(draw):
    n = draw(st.integers(1, 6))
    files = [f"f{i}.csv" for i in range(4)]
    inter = [f"s{i}" for i in range(5)]
    scripts, io = {}, {}
    for i in range(n):
        reads = draw(st.lists(st.sampled_from(files + inter), min_size=1, max_size=3, unique=True))
        writes = draw(st.lists(st.sampled_from(inter), max_size=2, unique=True))
        scripts[f"a{i}"] = read_write(reads, writes, fit=(i == 0))
        io[f"a{i}"] = (reads, writes)
    return scripts_graph("R", scripts), io


def reachable_sources(io: dict[str, tuple[list[str], list[str]]]) -> set[str]:
    produced = {w for _, ws in io.values() for w in ws}
    sources, wanted, seen = set(), list(io["a0"][0]), set()
    while wanted:
        s = wanted.pop()
        if s in seen:
            continue
        seen.add(s)
        if s not in produced:
            sources.add(s)
            continue
        for reads, writes in io.values():
            if s in writes:
                wanted.extend(reads)
    return sources


@settings(max_examples=200, deadline=None)
@given(script_graphs())
def test_propagation_matches_reachability(case):
    graph, io = case
    r = analyze_graph(graph)
    assert r.start == "a0"
    assert set(r.zeta) == reachable_sources(io)
    symbols = {s for reads, writes in io.values() for s in (*reads, *writes)}
    assert r.visits <= len(io) * (len(symbols) + 1)


# cross-graph inference

def result(gid: str, zeta: dict[str, ColumnSet], outputs: list[str]) -> GraphResult:
    z = MappingSet(zeta)
    return GraphResult(gid, "m", z, frozenset(), {o: z for o in outputs})


def literal_rule(results: dict[str, GraphResult], rng: random.Random) -> dict[str, MappingSet]:
    """Fire ``zeta_B := (zeta_B - o) | zeta_A`` for random eligible (A, B, o) until none is left."""
    zeta = {g: r.zeta for g, r in results.items()}
    outputs = {g: set(r.outputs) for g, r in results.items()}
    while True:
        eligible = [
            (a, b, o) for a in zeta for b in zeta if a != b for o in sorted(outputs[a] & set(zeta[b]))
        ]
        if not eligible:
            return zeta
        a, b, o = rng.choice(eligible)
        zeta[b] = join_all([zeta[b].without([o]), zeta[a]])


def chain() -> dict[str, GraphResult]:
    return {
        "A": result("A", {"raw_a": cs("x")}, ["oa"]),
        "B": result("B", {"oa": ALL, "raw_b": cs("y")}, ["ob"]),
        "C": result("C", {"ob": ALL, "raw_c": ALL}, ["oc"]),
    }


def random_topology(rng: random.Random, acyclic: bool) -> dict[str, GraphResult]:
    n = rng.randint(2, 7)
    raws = [f"raw{i}" for i in range(6)]
    out = {}
    for i in range(n):
        zeta = {r: cs(*rng.sample("pqrs", rng.randint(1, 3))) for r in rng.sample(raws, rng.randint(0, 3))}
        upstream = range(i) if acyclic else [j for j in range(n) if j != i]
        for j in upstream:
            if rng.random() < 0.4:
                zeta[f"o{j}"] = ALL
        # a second producer of some symbol only in the cyclic family: the literal
        # rule substitutes an ambiguous symbol once, by whichever producer fires first
        extra = not acyclic and rng.random() < 0.1
        outputs = [f"o{i}"] + ([f"o{rng.randrange(n)}"] if extra else [])
        out[f"G{i}"] = result(f"G{i}", zeta, outputs)
    return out


def test_chain_fires_twice_for_the_tail():
    final = infer_transitive(chain())
    assert final["C"] == MappingSet({"raw_a": cs("x"), "raw_b": cs("y"), "raw_c": ALL})
    assert final["B"] == MappingSet({"raw_a": cs("x"), "raw_b": cs("y")})
    assert final["A"] == MappingSet({"raw_a": cs("x")})


def test_no_shared_symbols_is_a_no_op():
    results = {"A": result("A", {"x": ALL}, ["oa"]), "B": result("B", {"y": ALL}, ["ob"])}
    assert infer_transitive(results) == {"A": results["A"].zeta, "B": results["B"].zeta}


def test_acyclic_topologies_match_literal_rule_application():
    rng = random.Random(11)
    for _ in range(20):
        results = random_topology(rng, acyclic=True)
        expected = infer_transitive(results)
        for _ in range(10):
            order = list(results)
            rng.shuffle(order)
            assert infer_transitive(results, order=order) == expected
            assert literal_rule(results, rng) == expected


def test_cyclic_topologies_are_confluent_and_pure():
    rng = random.Random(12)
    for _ in range(20):
        results = random_topology(rng, acyclic=False)
        expected = infer_transitive(results)
        produced = {o for r in results.values() for o in r.outputs}
        for gid, z in expected.items():
            assert not set(z) & produced
            assert results[gid].zeta.without(produced) <= z
        for _ in range(10):
            order = list(results)
            rng.shuffle(order)
            assert infer_transitive(results, order=order) == expected


def test_ambiguous_producers_are_joined_and_reported():
    results = {
        "A": result("A", {"ra": ALL}, ["shared"]),
        "B": result("B", {"rb": ALL}, ["shared"]),
        "C": result("C", {"shared": ALL, "rc": ALL}, ["oc"]),
    }
    diags: list = []
    final = infer_transitive(results, diagnostics=diags)
    assert set(final["C"]) == {"ra", "rb", "rc"}
    assert [d.code for d in diags] == ["ambiguous-producer"]
    assert "['A', 'B']" in diags[0].message
