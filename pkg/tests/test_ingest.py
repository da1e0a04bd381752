from __future__ import annotations

import json

import pytest

from depmap.engine import analyze_graph
from depmap.ingest import ManifestError, load_manifest, load_repository, parse_manifest
from depmap.report import AnalysisError, MissingManifestError, run_analysis

from .repos import act, read_write, write_repo


def manifest(*activities: dict) -> dict:
    return {"schema_version": 1, "graphs": [{"id": "G", "activities": list(activities)}]}


def test_minimal_manifest():
    doc = parse_manifest(manifest(act("t", "train.py")))
    (a,) = doc.graphs[0].activities
    assert (a.id, a.kind, a.path, a.inputs, a.outputs, a.model) == ("t", "script", "train.py", None, None, None)


def test_dumps_round_trips():
    doc = parse_manifest(manifest(act("q", "q.sql", outputs=["o"]), act("t", "t.py", inputs=["o"], model=True)))
    again = parse_manifest(json.loads(doc.dumps()))
    assert again == doc
    assert again.dumps() == doc.dumps()


def test_empty_graph_list_is_valid(tmp_path):
    write_repo(tmp_path, {}, {})
    assert run_analysis(tmp_path, clock=lambda: "t").models == ()


@pytest.mark.parametrize(
    "path, fragment",
    [("../secret.py", "escapes"), ("/etc/train.py", "relative"), ("a/../../b.py", "escapes")],
)
def test_paths_outside_the_root_are_rejected(path, fragment):
    with pytest.raises(ManifestError) as info:
        parse_manifest(manifest(act("leaky", path)))
    assert fragment in info.value.message
    assert info.value.field == "graphs[0].activities[0].path"


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"graphs": []}, "schema_version"),
        ({"schema_version": 1}, "graphs"),
        ({"schema_version": 1, "graphs": [], "extra": 1}, "$"),
        (manifest({"id": "x", "kind": "notebook", "path": "a.py"}), "graphs[0].activities[0].kind"),
        (manifest(act("x", "a.txt", kind="script")), "graphs[0].activities[0].path"),
        (manifest(act("x", "a.py"), act("x", "b.py")), "graphs[0].activities[1].id"),
        (manifest(act("x", "a.py", inputs="file.csv")), "graphs[0].activities[0].inputs"),
        (manifest(act("x", "a.py", model="yes")), "graphs[0].activities[0].model"),
    ],
)
def test_invalid_manifests_name_the_field(doc, field):
    with pytest.raises(ManifestError) as info:
        parse_manifest(doc)
    assert info.value.field == field


def test_missing_and_malformed_manifest(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path)
    with pytest.raises(MissingManifestError):
        run_analysis(tmp_path)
    (tmp_path / "depmap.json").write_text("{not json")
    with pytest.raises(AnalysisError, match="invalid manifest"):
        run_analysis(tmp_path)
    with pytest.raises(AnalysisError, match="not a directory"):
        run_analysis(tmp_path / "nowhere")


def test_unreadable_artifact_is_a_diagnostic_not_an_error(tmp_path):
    write_repo(tmp_path, {"G": [act("q", "gone.sql", outputs=["o.csv"]), act("t", "t.py")]},
               {"t.py": read_write(["o.csv", "raw.csv"], fit=True)})
    repo = load_repository(tmp_path)
    assert [d.code for d in repo.diagnostics] == ["unreadable-artifact"]
    result = analyze_graph(repo.graph("G"))
    assert result.start == "t"
    assert "missing-artifact" in {d.code for d in result.diagnostics}
    # with its producer gone, o.csv is no longer derived and counts as a source
    assert set(result.zeta) == {"o.csv", "raw.csv"}


def test_declared_and_analyzed_io_mismatch_lists_both_sides(tmp_path):
    write_repo(tmp_path, {"G": [act("t", "t.py", inputs=["a.csv", "ghost.csv"])]},
               {"t.py": read_write(["a.csv", "b.csv"], fit=True)})
    result = analyze_graph(load_repository(tmp_path).graph("G"))
    (d,) = [d for d in result.diagnostics if d.code == "declared-io-mismatch"]
    assert "declared only ['ghost.csv']" in d.message and "analyzed only ['b.csv']" in d.message
    assert d.activity == "t"
    # analysis stays authoritative
    assert set(result.zeta) == {"a.csv", "b.csv"}


def test_symbols_are_normalized(tmp_path):
    doc = parse_manifest(manifest(act("t", "t.py", inputs=["./data/x.csv"])))
    assert doc.graphs[0].activities[0].inputs == ("data/x.csv",)
