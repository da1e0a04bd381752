"""Whole-repository analysis and the canonical JSON report."""

from __future__ import annotations

import hashlib
import json
import os
import time
from collections.abc import Callable
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .engine import AnalysisCache, GraphResult, ambiguous_producer, analyze_graph, infer_transitive, output_producers
from .ingest import MANIFEST_FILENAME, ManifestError, artifact_paths, build_repository, load_manifest, resolve_inside
from .model import Diagnostic, MappingSet
from .script.config import CONFIG_FILENAME, AnalyzerConfig


class AnalysisError(Exception):
    """The request cannot be served: no repository, no or bad manifest."""


class MissingManifestError(AnalysisError):
    pass


@dataclass(frozen=True)
class ModelEntry:
    graph_id: str
    model_activity_id: str | None
    sources: MappingSet
    diagnostics: tuple[Diagnostic, ...]

    def to_json(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "model_activity_id": self.model_activity_id,
            "sources": self.sources.to_json(),
            "diagnostics": [d.to_json() for d in self.diagnostics],
        }


@dataclass(frozen=True)
class DependencyReport:
    generated_at: str
    repo_root: str
    models: tuple[ModelEntry, ...]

    def to_json(self) -> dict:
        return {
            "generated_at": self.generated_at,
            "repo_root": self.repo_root,
            "models": [m.to_json() for m in self.models],
        }

    def dumps(self) -> bytes:
        """Canonical bytes: sorted keys, fixed separators, trailing newline."""
        text = json.dumps(self.to_json(), sort_keys=True, indent=2, ensure_ascii=False)
        return (text + "\n").encode("utf-8")


def report_timestamp() -> str:
    """UTC now, or ``SOURCE_DATE_EPOCH`` when set (reproducible output)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    seconds = int(epoch) if epoch and epoch.strip().isdigit() else int(time.time())
    return datetime.fromtimestamp(seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _check_root(repo_root: str | Path) -> Path:
    root = Path(repo_root)
    if not root.is_dir():
        raise AnalysisError(f"repository path {str(repo_root)!r} is not a directory")
    if not (root / MANIFEST_FILENAME).is_file():
        raise MissingManifestError(f"no {MANIFEST_FILENAME} in {str(repo_root)!r}")
    return root


def content_hash(repo_root: str | Path) -> str:
    """sha256 over the manifest, analyzer config and every artifact's bytes."""
    root = _check_root(repo_root)
    h = hashlib.sha256()
    manifest = (root / MANIFEST_FILENAME).read_bytes()
    h.update(b"manifest\0" + manifest + b"\0")
    config = root / CONFIG_FILENAME
    if config.is_file():
        h.update(b"config\0" + config.read_bytes() + b"\0")
    try:
        paths = artifact_paths(load_manifest(root))
    except ManifestError:
        paths = []
    for rel in paths:
        h.update(rel.encode("utf-8") + b"\0")
        try:
            data = resolve_inside(root, rel).read_bytes()
            h.update(hashlib.sha256(data).digest())
        except OSError:
            h.update(b"<unreadable>")
    return h.hexdigest()


def analyze_repository(
    repo_root: str | Path,
    config: AnalyzerConfig | None = None,
) -> tuple[str, list[ModelEntry]]:
    root = _check_root(repo_root)
    try:
        doc = load_manifest(root)
        config = config or AnalyzerConfig.load(root)
    except ManifestError as exc:
        raise AnalysisError(f"invalid manifest: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise AnalysisError(f"invalid {CONFIG_FILENAME}: {exc}") from None
    repo = build_repository(doc, root)
    cache = AnalysisCache()
    results: dict[str, GraphResult] = {g.id: analyze_graph(g, config, cache=cache) for g in repo.graphs}
    modelled = {k: r for k, r in results.items() if r.start is not None}
    final = infer_transitive(modelled)
    ambiguous = {o: gids for o, gids in output_producers(modelled).items() if len(gids) > 1}

    models = []
    for g in repo.graphs:
        r = results[g.id]
        diags = list(r.diagnostics)
        for symbol, gids in ambiguous.items():
            if g.id in gids or symbol in r.zeta:
                diags.append(ambiguous_producer(symbol, gids))
        sources = final.get(g.id, r.zeta)
        models.append(
            ModelEntry(g.id, r.start, sources, tuple(sorted(set(diags), key=Diagnostic.sort_key)))
        )
    models.sort(key=lambda m: (m.graph_id, m.model_activity_id or ""))
    return repo.root, models


def run_analysis(
    repo_root: str | Path,
    filter: str | None = None,
    *,
    config: AnalyzerConfig | None = None,
    clock: Callable[[], str] = report_timestamp,
) -> DependencyReport:
    """Ingest, analyze every graph, apply cross-graph inference, then filter.

    ``filter`` keeps models whose graph id or model activity id equals it.
    Raises :class:`AnalysisError` for request-level failures; problems with
    single activities are reported as diagnostics instead.
    """
    root, models = analyze_repository(repo_root, config)
    if filter is not None:
        models = [m for m in models if filter in (m.graph_id, m.model_activity_id)]
    return DependencyReport(clock(), root, tuple(models))
