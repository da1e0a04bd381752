"""Static mapping of ML models to the initial data sources they depend on."""

from __future__ import annotations

from .engine import AnalysisCache, GraphResult, analyze_activity, analyze_graph, infer_transitive
from .ingest import ManifestError, build_repository, load_manifest, load_repository
from .model import ColumnSet, DataSourceRef, Diagnostic, MappingSet, mapping_join
from .report import AnalysisError, DependencyReport, run_analysis
from .script import AnalyzerConfig, analyze_source

__all__ = [
    "AnalysisCache",
    "AnalysisError",
    "AnalyzerConfig",
    "ColumnSet",
    "DataSourceRef",
    "DependencyReport",
    "Diagnostic",
    "GraphResult",
    "ManifestError",
    "MappingSet",
    "analyze_activity",
    "analyze_graph",
    "analyze_source",
    "build_repository",
    "infer_transitive",
    "load_manifest",
    "load_repository",
    "mapping_join",
    "run_analysis",
]
