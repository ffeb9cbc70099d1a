"""Benchmark corpus with expected outcomes, and a random program generator."""

from __future__ import annotations

import os
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .ast import Program
from .frontend import load_program
from .pipeline import PipelineConfig, Report, run_pipeline
from .semantics import oracle_check_ct

VERDICTS = ("proved", "leaks_found", "inconclusive")
_LINE = re.compile(r'^\s*([A-Za-z_][\w-]*)\s*=\s*"([^"]*)"\s*$')

DEFAULT_CORPUS = os.path.join(os.path.dirname(__file__), "..", "..", "corpus")


@dataclass(frozen=True)
class CorpusCase:
    name: str
    path: str
    verdict: str
    profile: str
    width: int
    leaks: tuple[str, ...] = ()   # "label:var" of every expected confirmed leak

    def program(self) -> Program:
        with open(self.path, encoding="utf-8") as fh:
            return load_program(fh.read())


def load_manifest(path: str) -> list[CorpusCase]:
    """Read ``name = "verdict profile width [leaks=l:v,...]"`` lines."""
    base = os.path.dirname(os.path.abspath(path))
    cases: list[CorpusCase] = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            m = _LINE.match(line)
            if not m:
                raise ValueError(f"{path}:{n}: expected name = \"verdict profile width\"")
            name, spec = m.groups()
            parts = spec.split()
            if len(parts) not in (3, 4) or parts[0] not in VERDICTS:
                raise ValueError(f"{path}:{n}: malformed entry {spec!r}")
            leaks: tuple[str, ...] = ()
            if len(parts) == 4:
                if not parts[3].startswith("leaks="):
                    raise ValueError(f"{path}:{n}: unexpected field {parts[3]!r}")
                leaks = tuple(parts[3][len("leaks="):].split(","))
            cases.append(CorpusCase(name, os.path.join(base, f"{name}.wh"), parts[0],
                                    parts[1], int(parts[2]), leaks))
    return sorted(cases, key=lambda c: c.name)


@dataclass
class CaseResult:
    case: CorpusCase
    report: Report | None
    oracle_secure: bool | None
    mismatches: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches


def check_case(case: CorpusCase, cfg: PipelineConfig | None = None,
               oracle: bool = True) -> CaseResult:
    """Compare the pipeline against the manifest and the oracle."""
    cfg = replace(cfg or PipelineConfig(), width=case.width)
    p = case.program()
    r = run_pipeline(p, cfg, case.name)
    res = CaseResult(case, r, None)
    if r.verdict != case.verdict:
        res.mismatches.append(f"verdict: expected {case.verdict}, got {r.verdict}")
    if r.profile != case.profile:
        res.mismatches.append(f"profile: expected {case.profile}, got {r.profile}")
    got = tuple(sorted(f"{s.source.label}:{s.source.var}" for s in r.leaks()))
    if case.verdict == "leaks_found" and got != tuple(sorted(case.leaks)):
        res.mismatches.append(f"leaks: expected {','.join(case.leaks)}, got {','.join(got)}")
    if oracle:
        o = oracle_check_ct(p, case.width)
        res.oracle_secure = o.secure
        if case.verdict == "proved" and not o.secure:
            res.mismatches.append("oracle: found a leak in a case expected to be proved")
        if case.verdict == "leaks_found" and o.secure:
            res.mismatches.append("oracle: no leak found in a case expected to leak")
        if r.verdict == "proved" and not o.secure:
            res.mismatches.append("oracle: pipeline proved an insecure program")
    return res


@dataclass
class CorpusSummary:
    results: list[CaseResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def table(self) -> str:
        rows = [f"{'case':34s} {'expected':24s} {'got':24s} {'oracle':7s} result"]
        for r in self.results:
            c = r.case
            got = f"{r.report.verdict} {r.report.profile}" if r.report else "error"
            orc = "-" if r.oracle_secure is None else ("secure" if r.oracle_secure else "leak")
            rows.append(f"{c.name:34s} {c.verdict + ' ' + c.profile:24s} {got:24s} {orc:7s} "
                        f"{'pass' if r.passed else 'FAIL'}")
            rows += [f"    {m}" for m in r.mismatches]
        n = sum(r.passed for r in self.results)
        rows.append(f"{n}/{len(self.results)} cases pass")
        return "\n".join(rows)


def run_corpus(manifest: str, cfg: PipelineConfig | None = None, oracle: bool = True,
               jobs: int = 1) -> CorpusSummary:
    """Run every manifest case; rows come out in case-name order."""
    cases = load_manifest(manifest)

    def one(case: CorpusCase) -> CaseResult:
        try:
            return check_case(case, cfg, oracle)
        except Exception as exc:  # a crash is a failed case, not a failed run
            return CaseResult(case, None, None, [f"error: {type(exc).__name__}: {exc}"])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, cases))
    else:
        results = [one(c) for c in cases]
    return CorpusSummary(results)


# -- random programs ---------------------------------------------------------------

FEATURES = frozenset({"branches", "loops", "arrays", "calls"})
ARRAY_LEN = 2
_OPS = ("+", "-", "*", "&", "|", "^", "<<", ">>", "==", "!=", "<", "<=", "&&", "||")


class _Gen:
    def __init__(self, rng: random.Random, budget: int, features: frozenset[str]):
        self.rng = rng
        self.budget = budget
        self.features = features
        self.counters = 0
        self.scalars = ["v0", "v1", "v2"]
        self.arrays: list[str] = []

    def atom(self) -> str:
        r = self.rng.random()
        if r < 0.25:
            return str(self.rng.randrange(4))
        return self.rng.choice(self.scalars)

    def expr(self, depth: int = 2) -> str:
        if depth == 0 or self.rng.random() < 0.35:
            return self.atom()
        if self.rng.random() < 0.1:
            return f"{self.rng.choice(('~', '!'))}{self.atom()}"
        op = self.rng.choice(_OPS)
        return f"({self.expr(depth - 1)} {op} {self.expr(depth - 1)})"

    def index(self) -> str:
        # mostly in bounds by masking; occasionally raw (may get stuck)
        e = self.expr(1)
        return e if self.rng.random() < 0.1 else f"({e}) & {ARRAY_LEN - 1}"

    def stmt(self, depth: int, helpers: list[tuple[str, int]]) -> list[str]:
        self.budget -= 1
        choices = ["assign", "assign"]
        if "arrays" in self.features and self.arrays:
            choices += ["load", "store"]
        if "branches" in self.features and depth < 2:
            choices.append("if")
        if "loops" in self.features and depth < 2:
            choices.append("loop")
        if "calls" in self.features and helpers:
            choices.append("call")
        kind = self.rng.choice(choices)
        target = self.rng.choice(self.scalars)
        if kind == "assign":
            return [f"{target} := {self.expr()};"]
        if kind == "load":
            return [f"{target} := {self.rng.choice(self.arrays)}[{self.index()}];"]
        if kind == "store":
            return [f"{self.rng.choice(self.arrays)}[{self.index()}] := {self.expr(1)};"]
        if kind == "if":
            then = self.block(depth + 1, helpers, 2)
            orelse = self.block(depth + 1, helpers, 1) if self.rng.random() < 0.5 else []
            out = [f"if ({self.expr()}) then", *then]
            if orelse:
                out += ["else", *orelse]
            return out + ["fi"]
        if kind == "loop":
            c = f"c{self.counters}"
            self.counters += 1
            bound = self.rng.choice(("2", "3", "(v0 & 3)", f"({self.atom()} & 3)"))
            body = self.block(depth + 1, helpers, 2)
            return [f"{c} := 0;", f"while ({c} < {bound}) do", *body,
                    f"{c} := {c} + 1;", "od"]
        name, arity = self.rng.choice(helpers)
        args = [self.rng.choice(self.arrays)] if arity else []
        args += [self.expr(1)]
        return [f"{target} := {name}({', '.join(args)});"]

    def block(self, depth: int, helpers, n: int) -> list[str]:
        out: list[str] = []
        for _ in range(self.rng.randint(1, n)):
            if self.budget <= 0 and out:
                break
            out += self.stmt(depth, helpers)
        return out


def generate_random_program(seed: int, budget: int = 10,
                            features=FEATURES) -> Program:
    """A small normalized program with public and secret inputs and bounded loops.

    Every loop is driven by a fresh counter compared with a bound of at most
    3, so every run terminates.
    """
    return load_program(random_program_text(seed, budget, features))


def random_program_text(seed: int, budget: int = 10, features=FEATURES) -> str:
    rng = random.Random(seed)
    features = frozenset(features)
    use_arrays = "arrays" in features
    helpers: list[tuple[str, int]] = []
    procs: list[str] = []
    if "calls" in features:
        g = _Gen(rng, 3, features - {"calls", "loops"})
        g.scalars = ["x", "r"]
        params = "x"
        if use_arrays and rng.random() < 0.5:
            g.arrays = ["a"]
            params = f"a[{ARRAY_LEN}], x"
        body = g.block(0, [], 3)
        procs.append("\n".join([f"def h0({params}){{", "  var r;", "  r := x;",
                                *("  " + s for s in body), "  return r;", "}"]))
        helpers.append(("h0", 1 if g.arrays else 0))
    g = _Gen(rng, budget, features)
    params = ["pub p", "sec k"]
    if use_arrays:
        g.arrays = ["pa", "sa", "la"]
        params += [f"pub pa[{ARRAY_LEN}]", f"sec sa[{ARRAY_LEN}]"]
    g.scalars = ["v0", "v1", "v2"]
    body = ["v0 := p;", "v1 := k;", "v2 := 0;"]
    while g.budget > 0:
        body += g.stmt(0, helpers)
    if use_arrays and not any(re.search(r":= \w+\[", line) for line in body):
        body.append(f"v2 := pa[p & {ARRAY_LEN - 1}];")  # arrays requested: at least one load
    decls = ["var v0, v1, v2" + "".join(f", c{i}" for i in range(g.counters)) + ";"]
    if use_arrays:
        decls.append(f"array la[{ARRAY_LEN}];")
    procs.append("\n".join([f"def main({', '.join(params)}){{", *("  " + d for d in decls),
                            *("  " + s for s in body), "  return v0;", "}"]))
    return "\n\n".join(procs) + "\n"
