"""``depmap`` command line: analyze, serve, bench.

Exit codes: 0 success, 1 analysis error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .report import AnalysisError, run_analysis

EXIT_OK, EXIT_ANALYSIS, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depmap", description="Map ML models to the initial data sources they depend on.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    analyze = sub.add_parser("analyze", help="write the dependency report of a repository")
    analyze.add_argument("--repo", required=True, help="repository root containing depmap.json")
    analyze.add_argument("--filter", help="keep only the model with this graph id or activity id")
    analyze.add_argument("--out", help="output file (default: stdout)")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--bind", required=True, help="HOST:PORT")
    serve.add_argument("--cache-ttl", type=float, default=300.0, help="seconds a cached report is kept")

    bench = sub.add_parser("bench", help="generate a synthetic corpus and time it")
    bench.add_argument("--spec", required=True, help="BenchSpec JSON file")
    bench.add_argument("--seed", required=True, type=int)
    bench.add_argument("--repetitions", type=int, default=3)
    bench.add_argument("--workers", type=int, default=1, help="time graphs concurrently (throughput mode)")
    bench.add_argument("--keep", help="generate the corpus into this directory and keep it")
    bench.add_argument("--out", help="CSV output file (default: stdout)")
    return parser


def _write(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    if args.command == "analyze":
        try:
            report = run_analysis(args.repo, args.filter)
            _write(report.dumps(), args.out)
        except (AnalysisError, OSError) as exc:
            print(f"depmap: {exc}", file=sys.stderr)
            return EXIT_ANALYSIS
        return EXIT_OK

    if args.command == "serve":
        from .service import parse_bind, serve

        try:
            parse_bind(args.bind)
        except ValueError as exc:
            print(f"depmap: {exc}", file=sys.stderr)
            return EXIT_USAGE
        serve(args.bind, args.cache_ttl)
        return EXIT_OK

    from .bench import BenchSpec, run_bench

    try:
        spec = BenchSpec.load(args.spec, seed=args.seed)
    except (OSError, ValueError, TypeError) as exc:
        print(f"depmap: invalid bench spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run_bench(spec, args.repetitions, directory=args.keep, workers=args.workers)
    _write(result.to_csv().encode("utf-8"), args.out)
    return EXIT_OK if result.all_correct() else EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
