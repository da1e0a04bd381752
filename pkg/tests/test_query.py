from __future__ import annotations

import random
import re

import pytest

from depmap.model import ColumnSet, MappingSet
from depmap.query import QuerySyntaxError, extract_sources, parse_pipe, parse_query, parse_sql

ALL = ColumnSet.all()


def cs(*names: str) -> ColumnSet:
    return ColumnSet.of(names)


def reads(q) -> dict[str, ColumnSet]:
    return dict(q.read_map())


def test_sql_join_attributes_qualified_columns_and_keys():
    q = parse_sql("SELECT t1.loc, t2.name FROM table1 t1 JOIN table2 t2 ON t1.id = t2.id")
    assert reads(q) == {"table1": cs("loc", "id"), "table2": cs("name", "id")}


def test_sql_star():
    q = parse_sql("SELECT * FROM t")
    assert reads(q) == {"t": ALL} and q.projection == "*"


def test_sql_where_columns_are_read():
    assert reads(parse_sql("SELECT a FROM t WHERE b > 3")) == {"t": cs("a", "b")}


def test_pipe_examples():
    assert reads(parse_pipe("table1 | project loc")) == {"table1": cs("loc")}
    assert reads(parse_pipe("table1 | where age > 10 | project loc")) == {"table1": cs("loc", "age")}
    assert reads(parse_pipe("t1 | join (t2) on id | project name")) == {"t1": cs("id", "name"), "t2": cs("id", "name")}


def test_pipe_without_projection_reads_everything():
    assert reads(parse_pipe("t | where a > 1")) == {"t": ALL}


def test_one_level_subquery_is_flattened():
    q = parse_sql("SELECT s.a FROM (SELECT a, b FROM t WHERE c > 1) AS s")
    assert reads(q) == {"t": cs("a", "b", "c")}
    assert not q.diagnostics


def test_deeper_nesting_falls_back_to_all_columns():
    q = parse_sql("SELECT x.a FROM (SELECT a FROM (SELECT a FROM t) AS y) AS x")
    assert reads(q) == {"t": ALL}
    assert [d.code for d in q.diagnostics] == ["nested-subquery"]


def test_where_in_subquery_keeps_its_own_columns():
    q = parse_sql("SELECT a FROM t WHERE k IN (SELECT k FROM u)")
    assert reads(q) == {"t": cs("a", "k"), "u": cs("k")}


def test_output_precedence():
    q = parse_sql("SELECT a INTO dest FROM t")
    assert list(extract_sources(q, declared_outputs=("other",)).writes) == ["dest"]
    q = parse_sql("SELECT a FROM t")
    assert list(extract_sources(q, declared_outputs=("file1.csv",)).writes) == ["file1.csv"]
    a = extract_sources(q, activity_id="q1")
    assert list(a.writes) == ["q1:unknown-out"]
    assert [d.code for d in a.diagnostics] == ["unknown-output"]
    assert a.writes["q1:unknown-out"] == a.mapping


def test_extract_sources_shape():
    a = extract_sources(parse_sql("SELECT * FROM t"), declared_outputs=("o",))
    assert a.mapping == MappingSet({"t": ALL})
    assert not a.has_sink
    assert a.writes == {"o": a.mapping}


def test_suffix_selects_dialect():
    assert parse_query("t | project a", ".kql").dialect == "pipe"
    assert parse_query("SELECT a FROM t", ".sql").dialect == "sql"


@pytest.mark.parametrize(
    "text, parse",
    [
        ("SELECT FROM", parse_sql),
        ("SELECT a FROM t UNION SELECT a FROM u", parse_sql),
        ("t | frobnicate x", parse_pipe),
        ("", parse_pipe),
    ],
)
def test_syntax_errors_carry_positions(text, parse):
    with pytest.raises(QuerySyntaxError) as info:
        parse(text)
    assert info.value.line >= 1


def test_comments_are_ignored():
    q = parse_sql("-- header\nSELECT a /* inline */ FROM t -- trailing\n")
    assert reads(q) == {"t": cs("a")}
    q = parse_pipe("// header\nt\n// middle\n| project a\n")
    assert reads(q) == {"t": cs("a")}


EQUIVALENT = [
    ("SELECT loc FROM table1", "table1 | project loc"),
    ("SELECT * FROM t", "t"),
    ("SELECT a FROM t WHERE b > 3", "t | where b > 3 | project a"),
    ("SELECT name FROM t1 JOIN t2 ON t1.id = t2.id", "t1 | join (t2) on id | project name"),
    ("SELECT a, b FROM t WHERE c = 'x' AND d < 2", "t | where c == 'x' and d < 2 | project a, b"),
    ("SELECT DISTINCT a FROM t", "t | distinct a"),
    ("SELECT a, COUNT(*) AS n FROM t GROUP BY a", "t | summarize n = count() by a"),
    ("SELECT TOP 10 a FROM t ORDER BY b", "t | sort by b | take 10 | project a"),
    ("SELECT a FROM t1 JOIN t2 ON t1.k = t2.k WHERE b > 0", "t1 | join (t2) on k | where b > 0 | project a"),
    ("INSERT INTO out SELECT a FROM t", ".set-or-append out <| t | project a"),
]


@pytest.mark.parametrize("sql, pipe", EQUIVALENT)
def test_sql_and_pipe_agree(sql, pipe):
    a, b = parse_sql(sql), parse_pipe(pipe)
    assert reads(a) == reads(b)
    assert a.output_symbol == b.output_symbol
    assert (a.projection == "*") == (b.projection == "*")
    if a.projection != "*":
        assert set(a.projection) == set(b.projection)


# grammar-directed random queries

TABLES = ["orders", "users", "items", "events", "stock"]
COLS = ["id", "k", "a", "b", "c", "price", "qty"]


def random_sql(rng: random.Random) -> tuple[str, list[str], set[str]]:
    tables = rng.sample(TABLES, rng.randint(1, 3))
    aliases = [f"x{i}" for i in range(len(tables))]
    used: set[str] = set()

    def col() -> str:
        c = rng.choice(COLS)
        used.add(c)
        return f"{rng.choice(aliases)}.{c}" if rng.random() < 0.5 else c

    select = ", ".join(col() for _ in range(rng.randint(1, 4)))
    text = f"SELECT {select} FROM {tables[0]} {aliases[0]}"
    for t, al in zip(tables[1:], aliases[1:]):
        key = rng.choice(COLS)
        used.add(key)
        text += f" {rng.choice(['JOIN', 'LEFT JOIN', 'INNER JOIN'])} {t} AS {al} ON {aliases[0]}.{key} = {al}.{key}"
    if rng.random() < 0.6:
        text += f" WHERE {col()} > {rng.randint(0, 9)}"
        if rng.random() < 0.5:
            text += f" AND {col()} = 'v'"
    if rng.random() < 0.3:
        text += f" ORDER BY {col()}"
    return text, tables, used


def random_pipe(rng: random.Random) -> tuple[str, list[str], set[str]]:
    tables = rng.sample(TABLES, rng.randint(1, 3))
    used: set[str] = set()
    text = tables[0]
    for t in tables[1:]:
        key = rng.choice(COLS)
        used.add(key)
        text += f" | join kind=inner ({t}) on {key}"
    for _ in range(rng.randint(0, 2)):
        c = rng.choice(COLS)
        used.add(c)
        text += f" | where {c} > {rng.randint(0, 9)}"
    cols = rng.sample(COLS, rng.randint(1, 3))
    used |= set(cols)
    text += " | project " + ", ".join(cols)
    return text, tables, used


@pytest.mark.parametrize("gen, parse", [(random_sql, parse_sql), (random_pipe, parse_pipe)])
def test_random_queries_drop_no_table_or_column(gen, parse):
    rng = random.Random(1234)
    for _ in range(400):
        text, tables, used = gen(rng)
        q = parse(text)
        got = reads(q)
        assert set(tables) <= set(got), text
        union = ColumnSet.of(())
        for cols in got.values():
            union = union | cols
        for c in used:
            assert union.covers(c), (text, c)


def test_table_tokens_cross_checked_against_text():
    rng = random.Random(99)
    for _ in range(200):
        text, _, _ = random_sql(rng)
        after = set(re.findall(r"(?:FROM|JOIN)\s+(\w+)", text))
        assert after <= set(reads(parse_sql(text))), text
