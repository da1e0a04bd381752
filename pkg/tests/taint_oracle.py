"""Random loop-free scripts and a concrete taint-tracking interpreter.

Programs are real Python executed against a fake ``pd`` whose frames carry,
per column, the set of ``(source, column)`` pairs the values came from.
External functions merge their inputs column by column; projection keeps
the named columns that exist; ``fit`` records its arguments' provenance,
trains the estimator in place and returns a snapshot of it; ``to_csv`` records what is written.

Estimators are never aliased or passed as arguments: in-place mutation seen
through an alias is outside the analyzed script language.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

COLUMNS = ["a", "b", "c", "d", "e", "k"]
SOURCES = ["s0.csv", "s1.csv", "s2.csv", "s3.csv"]
OUTPUTS = ["o0.csv", "o1.csv"]

Pairs = set[tuple[str, str]]


class Frame:
    def __init__(self, cols: dict[str, frozenset[tuple[str, str]]] | None = None) -> None:
        self.cols = dict(cols or {})

    def provenance(self) -> Pairs:
        return {p for ps in self.cols.values() for p in ps}

    def __getitem__(self, key):
        keys = key if isinstance(key, list) else [key]
        return Frame({c: self.cols[c] for c in keys if c in self.cols})

    def merge(self, *others, **kw):
        return merge(self, *others, *kw.values())

    def dropna(self):
        return Frame(self.cols)

    def predict(self, *args):
        return merge(self, *args)

    def to_csv(self, path):
        _ACTIVE.writes.setdefault(path, set()).update(self.provenance())


def merge(*values) -> Frame:
    out: dict[str, frozenset[tuple[str, str]]] = {}
    for v in values:
        if isinstance(v, Frame):
            for c, ps in v.cols.items():
                out[c] = out.get(c, frozenset()) | ps
        elif isinstance(v, (tuple, list)):
            for c, ps in merge(*v).cols.items():
                out[c] = out.get(c, frozenset()) | ps
    return Frame(out)


@dataclass
class Trace:
    mapping: Pairs = field(default_factory=set)
    writes: dict[str, Pairs] = field(default_factory=dict)
    reads: set[str] = field(default_factory=set)


_ACTIVE = Trace()


class Model(Frame):
    def __init__(self, trace: Trace) -> None:
        super().__init__()
        self._trace = trace

    def fit(self, *args):
        trained = merge(*args)
        self._trace.mapping |= trained.provenance()
        for c, ps in trained.cols.items():
            self.cols[c] = self.cols.get(c, frozenset()) | ps
        return Frame(self.cols)  # a snapshot, so the result never aliases the estimator


def run(text: str, schemas: dict[str, list[str]], branch_seed: int) -> Trace:
    trace = Trace()
    choices = random.Random(branch_seed)

    class Pd:
        @staticmethod
        def read_csv(path):
            trace.reads.add(path)
            return Frame({c: frozenset({(path, c)}) for c in schemas[path]})

    namespace = {
        "pd": Pd,
        "combine": lambda *a: merge(*a),
        "split": lambda *a: (merge(*a), merge(*a)),
        "Model": lambda: Model(trace),
        "flag": lambda: choices.random() < 0.5,
    }
    global _ACTIVE
    _ACTIVE = trace
    exec(compile(text, "<generated>", "exec"), namespace)
    return trace


HELPERS = '''def prep(frame):
    part = frame[["a", "k"]]
    return part


def both(x, y):
    joined = x.merge(y)
    return joined.dropna()

'''


class Generator:
    """Loop-free programs over reads, projections, external calls, sinks,
    outputs, if/else, tuple assignment and calls to local helpers."""

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        self.n = 0
        self.helpers = rng.random() < 0.5

    def fresh(self) -> str:
        self.n += 1
        return f"v{self.n}"

    def program(self) -> str:
        lines = [HELPERS] if self.helpers else []
        models = [f"m{i}" for i in range(self.rng.randint(1, 2))]
        lines += [f"{m} = Model()" for m in models]
        frames: list[str] = []
        body = self.block(frames, models, depth=0, size=self.rng.randint(6, 18))
        return "\n".join(lines + body) + "\n"

    def block(self, frames: list[str], models: list[str], depth: int, size: int, indent: str = "") -> list[str]:
        out: list[str] = []
        for _ in range(size):
            out += [indent + line for line in self.statement(frames, models, depth)]
        if not out:
            out.append(indent + "pass")
        return out

    def statement(self, frames: list[str], models: list[str], depth: int) -> list[str]:
        rng = self.rng
        if not frames or rng.random() < 0.2:
            v = self.fresh() if not frames or rng.random() < 0.7 else rng.choice(frames)
            if v not in frames:
                frames.append(v)
            return [f'{v} = pd.read_csv("{rng.choice(SOURCES)}")']
        kind = rng.choice(
            ["project", "single", "external", "method", "fit", "fit_assign", "predict", "output", "alias", "tuple", "branch", "helper"]
        )
        u = rng.choice(frames)
        target = self.fresh() if rng.random() < 0.6 else rng.choice(frames)

        def bind(*names: str) -> None:
            for name in names:
                if name not in frames:
                    frames.append(name)

        if kind == "project":
            cols = rng.sample(COLUMNS, rng.randint(1, 3))
            bind(target)
            return [f"{target} = {u}[{cols!r}]"]
        if kind == "single":
            bind(target)
            return [f'{target} = {u}["{rng.choice(COLUMNS)}"]']
        if kind == "external":
            args = ", ".join(rng.sample(frames, min(len(frames), rng.randint(1, 3))))
            bind(target)
            return [f"{target} = combine({args})"]
        if kind == "method":
            other = rng.choice(frames)
            bind(target)
            return [f'{target} = {u}.merge({other}, on="k")' if rng.random() < 0.7 else f"{target} = {u}.dropna()"]
        if kind == "fit":
            args = ", ".join(rng.sample(frames, min(len(frames), rng.randint(1, 2))))
            return [f"{rng.choice(models)}.fit({args})"]
        if kind == "fit_assign":
            bind(target)
            return [f"{target} = {rng.choice(models)}.fit({u})"]
        if kind == "predict":
            bind(target)
            return [f"{target} = {rng.choice(models)}.predict({u})"]
        if kind == "output":
            return [f'{u}.to_csv("{rng.choice(OUTPUTS)}")']
        if kind == "alias":
            bind(target)
            return [f"{target} = {u}"]
        if kind == "tuple":
            t2 = self.fresh()
            other = rng.choice(frames)
            bind(target, t2)
            return [f"{target}, {t2} = split({u}, {other})"]
        if kind == "helper" and self.helpers:
            other = rng.choice(frames)
            bind(target)
            if rng.random() < 0.5:
                return [f"{target} = prep({u})"]
            return [f"{target} = both({u}, {other})"]
        if kind == "branch" and depth < 2:
            before = list(frames)
            then_frames, else_frames = list(frames), list(frames)
            lines = ["if flag():", *self.block(then_frames, models, depth + 1, rng.randint(1, 4), "    ")]
            if rng.random() < 0.8:
                lines += ["else:", *self.block(else_frames, models, depth + 1, rng.randint(1, 4), "    ")]
                # only names bound on both paths are safe to use afterwards
                frames[:] = [f for f in then_frames if f in else_frames]
            else:
                frames[:] = before
            return lines
        bind(target)
        return [f"{target} = {u}.dropna()"]


def random_case(seed: int) -> tuple[str, dict[str, list[str]]]:
    rng = random.Random(seed)
    schemas = {s: sorted(rng.sample(COLUMNS, rng.randint(2, len(COLUMNS)))) for s in SOURCES}
    return Generator(rng).program(), schemas
