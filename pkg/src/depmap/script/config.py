from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

CONFIG_FILENAME = "analyzer.json"


@dataclass(frozen=True)
class AnalyzerConfig:
    """Names that give calls source/sink/output meaning.

    A call matches by its last name segment: ``pd.read_csv`` and
    ``spark_session.read_csv`` both match ``read_csv``.
    """

    source_fns: frozenset[str] = frozenset({"read_csv", "read_parquet", "read_json"})
    sink_fns: frozenset[str] = frozenset({"fit", "fit_transform", "train"})
    output_fns: frozenset[str] = frozenset({"to_csv", "to_parquet", "write"})
    inline_depth: int = 3

    def __post_init__(self) -> None:
        for name in ("source_fns", "sink_fns", "output_fns"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        overlap = (
            (self.source_fns & self.sink_fns)
            | (self.source_fns & self.output_fns)
            | (self.sink_fns & self.output_fns)
        )
        if overlap:
            raise ValueError(f"function names used in more than one role: {sorted(overlap)}")
        if self.inline_depth < 0:
            raise ValueError("inlineDepth must be >= 0")

    @classmethod
    def from_json(cls, data: dict) -> AnalyzerConfig:
        defaults = cls()
        unknown = set(data) - {"sourceFunctions", "sinkFunctions", "outputFunctions", "inlineDepth"}
        if unknown:
            raise ValueError(f"unknown analyzer config keys: {sorted(unknown)}")
        return cls(
            source_fns=frozenset(data.get("sourceFunctions", defaults.source_fns)),
            sink_fns=frozenset(data.get("sinkFunctions", defaults.sink_fns)),
            output_fns=frozenset(data.get("outputFunctions", defaults.output_fns)),
            inline_depth=int(data.get("inlineDepth", defaults.inline_depth)),
        )

    def to_json(self) -> dict:
        return {
            "sourceFunctions": sorted(self.source_fns),
            "sinkFunctions": sorted(self.sink_fns),
            "outputFunctions": sorted(self.output_fns),
            "inlineDepth": self.inline_depth,
        }

    @classmethod
    def load(cls, path: str | Path) -> AnalyzerConfig:
        """Read ``analyzer.json``; a missing file gives the defaults."""
        path = Path(path)
        if path.is_dir():
            path = path / CONFIG_FILENAME
        if not path.exists():
            return cls()
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")))
