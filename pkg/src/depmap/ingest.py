"""Repository loading: the ``depmap.json`` manifest and artifact files.

Manifest layout (UTF-8 JSON)::

    {
      "schema_version": 1,
      "graphs": [
        {"id": "A1",
         "activities": [
           {"id": "q", "kind": "query", "path": "queries/q.kql",
            "outputs": ["file1.csv"]},
           {"id": "train", "kind": "script", "path": "Train1.py",
            "inputs": ["file1.csv", "file2.csv"], "model": true}]}
      ]
    }

``inputs``/``outputs``/``model`` are optional. Declarations are advisory:
analysis of the artifacts is authoritative, declarations are used when an
artifact cannot be analyzed and for mismatch diagnostics.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

from .model import Activity, ActivityGraph, ActivityKind, Diagnostic, Repository, normalize_symbol

MANIFEST_FILENAME = "depmap.json"
SCHEMA_VERSION = 1

_SCRIPT_SUFFIXES = {".py"}
_QUERY_SUFFIXES = {".sql", ".kql"}


class ManifestError(Exception):
    """Invalid manifest. ``field`` is a JSON path like ``graphs[0].activities[1].path``."""

    def __init__(self, message: str, field: str = "") -> None:
        super().__init__(f"{field}: {message}" if field else message)
        self.message = message
        self.field = field


@dataclass(frozen=True)
class ActivityDecl:
    id: str
    kind: str
    path: str
    inputs: tuple[str, ...] | None = None
    outputs: tuple[str, ...] | None = None
    model: bool | None = None

    def to_json(self) -> dict:
        out: dict = {"id": self.id, "kind": self.kind, "path": self.path}
        if self.inputs is not None:
            out["inputs"] = list(self.inputs)
        if self.outputs is not None:
            out["outputs"] = list(self.outputs)
        if self.model is not None:
            out["model"] = self.model
        return out


@dataclass(frozen=True)
class GraphDecl:
    id: str
    activities: tuple[ActivityDecl, ...]

    def to_json(self) -> dict:
        return {"id": self.id, "activities": [a.to_json() for a in self.activities]}


@dataclass(frozen=True)
class ManifestDoc:
    schema_version: int
    graphs: tuple[GraphDecl, ...]

    def to_json(self) -> dict:
        return {"schema_version": self.schema_version, "graphs": [g.to_json() for g in self.graphs]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _require(cond: bool, message: str, field: str) -> None:
    if not cond:
        raise ManifestError(message, field)


def _str_list(value, field: str) -> tuple[str, ...]:
    _require(isinstance(value, list), "must be a list of strings", field)
    out = []
    for i, v in enumerate(value):
        _require(isinstance(v, str) and normalize_symbol(v) != "", "must be a non-empty string", f"{field}[{i}]")
        out.append(normalize_symbol(v))
    return tuple(out)


def check_relative_path(path: str, field: str) -> str:
    _require(isinstance(path, str) and path.strip() != "", "must be a non-empty string", field)
    p = PurePosixPath(path.replace("\\", "/"))
    _require(not p.is_absolute() and not path.startswith(("/", "\\")), f"path {path!r} must be relative", field)
    _require(".." not in p.parts, f"path {path!r} escapes the repository root", field)
    return str(p)


def parse_manifest(data: object) -> ManifestDoc:
    """Validate decoded manifest JSON."""
    _require(isinstance(data, dict), "manifest must be a JSON object", "$")
    assert isinstance(data, dict)
    unknown = set(data) - {"schema_version", "graphs"}
    _require(not unknown, f"unknown keys {sorted(unknown)}", "$")
    _require(data.get("schema_version") == SCHEMA_VERSION, f"must be {SCHEMA_VERSION}", "schema_version")
    graphs_raw = data.get("graphs")
    _require(isinstance(graphs_raw, list), "must be a list", "graphs")
    graphs = []
    graph_ids: set[str] = set()
    for gi, g in enumerate(graphs_raw):
        gf = f"graphs[{gi}]"
        _require(isinstance(g, dict), "must be an object", gf)
        unknown = set(g) - {"id", "activities"}
        _require(not unknown, f"unknown keys {sorted(unknown)}", gf)
        gid = g.get("id")
        _require(isinstance(gid, str) and gid != "", "must be a non-empty string", f"{gf}.id")
        _require(gid not in graph_ids, f"duplicate graph id {gid!r}", f"{gf}.id")
        graph_ids.add(gid)
        acts_raw = g.get("activities")
        _require(isinstance(acts_raw, list), "must be a list", f"{gf}.activities")
        acts = []
        act_ids: set[str] = set()
        for ai, a in enumerate(acts_raw):
            af = f"{gf}.activities[{ai}]"
            _require(isinstance(a, dict), "must be an object", af)
            unknown = set(a) - {"id", "kind", "path", "inputs", "outputs", "model"}
            _require(not unknown, f"unknown keys {sorted(unknown)}", af)
            aid = a.get("id")
            _require(isinstance(aid, str) and aid != "", "must be a non-empty string", f"{af}.id")
            _require(aid not in act_ids, f"duplicate activity id {aid!r}", f"{af}.id")
            act_ids.add(aid)
            kind = a.get("kind")
            _require(kind in ("script", "query"), "must be 'script' or 'query'", f"{af}.kind")
            path = check_relative_path(a.get("path"), f"{af}.path")
            suffix = PurePosixPath(path).suffix.lower()
            allowed = _SCRIPT_SUFFIXES if kind == "script" else _QUERY_SUFFIXES
            _require(suffix in allowed, f"{kind} artifacts must end in one of {sorted(allowed)}", f"{af}.path")
            inputs = _str_list(a["inputs"], f"{af}.inputs") if "inputs" in a else None
            outputs = _str_list(a["outputs"], f"{af}.outputs") if "outputs" in a else None
            model = a.get("model")
            _require(model is None or isinstance(model, bool), "must be a boolean", f"{af}.model")
            acts.append(ActivityDecl(aid, kind, path, inputs, outputs, model))
        graphs.append(GraphDecl(gid, tuple(acts)))
    return ManifestDoc(SCHEMA_VERSION, tuple(graphs))


def load_manifest(root: str | Path) -> ManifestDoc:
    path = Path(root) / MANIFEST_FILENAME
    if not path.is_file():
        raise FileNotFoundError(f"no {MANIFEST_FILENAME} in {root}")
    try:
        data = json.loads(path.read_bytes().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"malformed JSON: {exc}", "$") from None
    return parse_manifest(data)


def resolve_inside(root: Path, relative: str) -> Path:
    """Resolve ``relative`` under ``root``; refuse anything that leaves it."""
    base = root.resolve()
    target = (base / relative).resolve()
    if os.path.commonpath([base, target]) != str(base):
        raise PermissionError(f"{relative!r} resolves outside the repository root")
    return target


def build_repository(doc: ManifestDoc, root: str | Path) -> Repository:
    """Read every artifact. Unreadable ones are recorded, not fatal."""
    root = Path(root)
    graphs = []
    diagnostics: list[Diagnostic] = []
    for g in doc.graphs:
        acts = []
        for a in g.activities:
            text = error = None
            try:
                text = resolve_inside(root, a.path).read_bytes().decode("utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                error = f"cannot read {a.path}: {exc.strerror if isinstance(exc, OSError) and exc.strerror else exc}"
                diagnostics.append(Diagnostic("unreadable-artifact", error, a.id))
            acts.append(
                Activity(a.id, ActivityKind(a.kind), a.path, a.inputs, a.outputs, a.model, text, error)
            )
        graphs.append(ActivityGraph(g.id, tuple(acts)))
    return Repository(str(root.resolve()), tuple(graphs), tuple(diagnostics))


def load_repository(root: str | Path) -> Repository:
    return build_repository(load_manifest(root), root)


def artifact_paths(doc: ManifestDoc) -> list[str]:
    return sorted({a.path for g in doc.graphs for a in g.activities})
