"""Command-line front end: ``ctprover <command> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .frontend import FrontendError, load_program, pretty_print
from .pipeline import DeadlineExceeded, PipelineConfig, Stage, report_json, run_pipeline
from .product import build_cross_product, build_semi_product
from .semantics import InputError, OracleLimits, format_trace, oracle_check_ct, run
from .semantics.ops import WIDTHS
from .taint import analyze
from .verifier import SolverSpawnError

EXIT_PROVED, EXIT_LEAKS, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3
VERDICT_EXIT = {"proved": EXIT_PROVED, "leaks_found": EXIT_LEAKS, "inconclusive": EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return load_program(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _parse_binding(items: list[str]) -> dict[str, object]:
    out: dict[str, object] = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--in expects name=value, got {item!r}")
        try:
            v = json.loads(value)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad value for {name}: {value!r}") from exc
        if not (isinstance(v, int) or (isinstance(v, list) and all(isinstance(x, int) for x in v))):
            raise UsageError(f"{name} must be an integer or a list of integers")
        out[name] = v
    return out


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc


def cmd_run(a) -> int:
    p = _load(a.file)
    out = run(p, _parse_binding(a.inputs), a.width, a.fuel)
    for e in out.trace:
        print(e)
    print(f"# status: {out.status.value}")
    if out.returns:
        print("# returns: " + ", ".join(str(v) for v in out.returns))
    return 0 if out.complete else 1


def cmd_oracle(a) -> int:
    p = _load(a.file)
    limits = OracleLimits(max_pairs=a.max_pairs, seed=a.seed)
    res = oracle_check_ct(p, a.width, limits)
    mode = "exhaustive" if res.exhaustive else "sampled"
    if res.secure:
        print(f"secure ({mode}, {res.complete_runs} complete runs of {res.runs})")
        return 0
    print(f"leak ({mode}): traces differ at event {res.position}")
    for tag, inputs, r in (("run 1", res.inputs1, res.run1), ("run 2", res.inputs2, res.run2)):
        print(f"# {tag}: {json.dumps(inputs, sort_keys=True)}")
        print(format_trace(r.trace))
    return 1


def cmd_dump(a) -> int:
    from .preanalysis import build_callgraph, build_icfg

    p = _load(a.file)
    if a.icfg:
        print(build_icfg(p).dump())
    else:
        for caller, label, callee in build_callgraph(p).edges:
            print(f"{caller} -> {callee} @{label}")
    return 0


def cmd_taint(a) -> int:
    p = _load(a.file)
    tmap = analyze(p)
    if a.dump:
        print(tmap.dump())
    from .frontend import collect_sources
    from .taint import resolve_step1

    if not a.dump or a.sources:
        for s in resolve_step1(collect_sources(p), tmap):
            print(f"{s.label}\t{s.var}\t{s.kind.value}\t{s.status.value}")
    return 0


def cmd_product(a) -> int:
    p = _load(a.file)
    build = build_semi_product if a.kind == "semi" else build_cross_product
    pp = build(p, analyze(p))
    _write(a.output, pretty_print(pp.program))
    if a.output and a.output != "-":
        base = a.output[:-3] if a.output.endswith(".wh") else a.output
        _write(base + ".guards.json", pp.guards_json())
    return 0


def cmd_verify(a) -> int:
    p = _load(a.file)
    cfg = PipelineConfig(width=a.width, unroll=a.unroll, stage=Stage.parse(a.step),
                         no_step2=a.no_step2, solver=a.solver, timeout_vc=a.timeout_vc,
                         deadline=a.deadline, emit_smt=a.emit_smt)
    name = os.path.splitext(os.path.basename(a.file))[0]
    try:
        report = run_pipeline(p, cfg, name)
    except DeadlineExceeded as exc:
        report = exc.report
        print("deadline exceeded; partial report follows", file=sys.stderr)
    text = report_json(report)
    if a.json:
        _write(a.json, text)
    print(f"{name}: {report.verdict} (sources {report.profile})")
    for r in report.sources:
        s = r.source
        line = f"  {s.label}:{s.var} {s.kind.value} {s.status.value}"
        if r.reason:
            line += f" [{r.reason}]"
        print(line)
        if r.witness is not None:
            w = r.witness
            print(f"    run 1 {json.dumps(w.inputs1, sort_keys=True)}: "
                  + " ".join(str(e) for e in w.trace1))
            print(f"    run 2 {json.dumps(w.inputs2, sort_keys=True)}: "
                  + " ".join(str(e) for e in w.trace2))
            print(f"    first difference at event {w.index}")
    return VERDICT_EXIT[report.verdict]


def cmd_corpus(a) -> int:
    from .corpus import run_corpus

    if not os.path.exists(a.manifest):
        raise UsageError(f"manifest {a.manifest} not found")
    cfg = PipelineConfig(solver=a.solver, unroll=a.unroll, no_step2=a.no_step2)
    summary = run_corpus(a.manifest, cfg, oracle=not a.no_oracle, jobs=a.jobs)
    print(summary.table())
    return 0 if summary.passed else 1


def _width(text: str) -> int:
    w = int(text)
    if w not in WIDTHS:
        raise argparse.ArgumentTypeError(f"width must be one of {', '.join(map(str, WIDTHS))}")
    return w


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctprover", description="Constant-time verification for While programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a program and print its observation trace")
    r.add_argument("file")
    r.add_argument("--in", dest="inputs", action="append", default=[], metavar="NAME=VALUE")
    r.add_argument("--width", type=_width, default=8)
    r.add_argument("--fuel", type=int, default=1 << 20)
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="brute-force constant-time check")
    o.add_argument("file")
    o.add_argument("--width", type=_width, default=4)
    o.add_argument("--max-pairs", type=int, default=1_000_000)
    o.add_argument("--seed", type=int, default=7)
    o.set_defaults(func=cmd_oracle)

    d = sub.add_parser("dump", help="print the call graph or the interprocedural CFG")
    d.add_argument("file")
    d.add_argument("--icfg", action="store_true")
    d.set_defaults(func=cmd_dump)

    t = sub.add_parser("taint", help="lightweight taint analysis")
    t.add_argument("file")
    t.add_argument("--dump", action="store_true", help="print the facts at every label")
    t.add_argument("--sources", action="store_true", help="also list sources with --dump")
    t.set_defaults(func=cmd_taint)

    pr = sub.add_parser("product", help="emit the Boolean or the shadow product")
    pr.add_argument("file")
    pr.add_argument("--kind", choices=("semi", "cross"), default="semi")
    pr.add_argument("-o", "--output", default=None)
    pr.set_defaults(func=cmd_product)

    v = sub.add_parser("verify", help="run the three-stage prover")
    v.add_argument("file")
    v.add_argument("--width", type=_width, default=8)
    v.add_argument("--unroll", type=int, default=16)
    v.add_argument("--step", choices=("all", "1", "2", "3"), default="all")
    v.add_argument("--solver", default="enum", help="enum or cmd:<path>")
    v.add_argument("--timeout-vc", type=float, default=30.0)
    v.add_argument("--deadline", type=float, default=600.0)
    v.add_argument("--json", default=None)
    v.add_argument("--no-step2", action="store_true")
    v.add_argument("--emit-smt", default=None, metavar="DIR")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("corpus", help="check the corpus against its manifest")
    c.add_argument("--manifest", default="corpus/expected.txt")
    c.add_argument("--solver", default="enum")
    c.add_argument("--unroll", type=int, default=16)
    c.add_argument("--no-step2", action="store_true")
    c.add_argument("--no-oracle", action="store_true")
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_corpus)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        if getattr(a, "unroll", 0) < 0:
            raise UsageError("--unroll must be non-negative")
        return a.func(a)
    except (UsageError, FrontendError, InputError, SolverSpawnError, ValueError) as exc:
        print(f"ctprover: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
