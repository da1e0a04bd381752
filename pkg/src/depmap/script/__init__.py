"""Script analysis: parse, inline local functions, build a CFG, solve."""

from __future__ import annotations

from ..model import ActivityAnalysis
from .analysis import AbstractState, FixpointError, analyze_script, solve, transfer
from .cfg import Cfg, Edge, Skip, build_cfg
from .config import AnalyzerConfig
from .inline import inline_functions
from .parser import ScriptSyntaxError, parse_script


def analyze_source(text: str, config: AnalyzerConfig | None = None, *, activity_id: str = "script") -> ActivityAnalysis:
    """Run the whole script pipeline on source text.

    Raises :class:`ScriptSyntaxError` when ``text`` does not parse.
    """
    config = config or AnalyzerConfig()
    tree = inline_functions(parse_script(text), config.inline_depth)
    return analyze_script(build_cfg(tree), config, activity_id=activity_id)


__all__ = [
    "AbstractState",
    "AnalyzerConfig",
    "Cfg",
    "Edge",
    "FixpointError",
    "ScriptSyntaxError",
    "Skip",
    "analyze_script",
    "analyze_source",
    "build_cfg",
    "inline_functions",
    "parse_script",
    "solve",
    "transfer",
]
