"""The three-stage prover: sparse taint, Boolean product, shadow product."""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field

from .frontend.sources import Source, SourceStatus, collect_sources
from .ast import Program
from .product import ProductProgram, build_cross_product, build_semi_product
from .semantics.interp import Event
from .taint import TaintMap, analyze, resolve_step1
from .verifier import (
    Budget, ConfirmedLeak, DeadlineExceeded, Verdict, make_backend, prune_invariants,
    verify_guards, witness_replay,
)

SCHEMA_VERSION = 1
STAGE_SPLIT = (0.05, 0.35, 0.60)


class Stage(str, enum.Enum):
    STEP1_ONLY = "1"
    UP_TO_STEP2 = "2"
    FULL = "all"

    @staticmethod
    def parse(text: str) -> "Stage":
        return Stage.FULL if text in ("3", "all") else Stage(text)


@dataclass(frozen=True)
class PipelineConfig:
    width: int = 8
    unroll: int = 16
    stage: Stage = Stage.FULL
    no_step2: bool = False
    solver: str = "enum"
    timeout_vc: float = 30.0
    deadline: float | None = 600.0
    emit_smt: str | None = None
    bmc: bool = True

    def __post_init__(self):
        if self.width not in (4, 8, 16, 32, 64):
            raise ValueError("width must be one of 4, 8, 16, 32, 64")
        if self.unroll < 0:
            raise ValueError("unroll bound must be non-negative")

    def echo(self) -> dict:
        return {
            "width": self.width, "unroll": self.unroll, "stage": self.stage.value,
            "no_step2": self.no_step2, "solver": self.solver, "timeout_vc": self.timeout_vc,
            "deadline": self.deadline,
        }


@dataclass
class SourceReport:
    source: Source
    stage: int | None = None
    witness: ConfirmedLeak | None = None
    reason: str | None = None

    def to_json(self) -> dict:
        s = self.source
        out = {"label": s.label, "var": s.var, "kind": s.kind.value, "proc": s.proc,
               "status": s.status.value, "stage": self.stage}
        if self.reason:
            out["reason"] = self.reason
        if self.witness is not None:
            w = self.witness
            out["witness"] = {
                "inputs1": w.inputs1, "inputs2": w.inputs2,
                "trace1": [_event(e) for e in w.trace1], "trace2": [_event(e) for e in w.trace2],
                "divergence": w.index,
            }
        return out


def _event(e: Event) -> list:
    return [e.kind.value, e.label, e.value]


@dataclass
class Report:
    name: str
    config: PipelineConfig
    sources: list[SourceReport] = field(default_factory=list)
    counts: dict[str, int | None] = field(
        default_factory=lambda: {"step1": None, "step2": None, "step3": None})
    unresolved_after_step1: int | None = None
    times: dict[str, float] = field(default_factory=dict)
    stage_reached: int = 0
    complete: bool = True
    taint: TaintMap | None = field(default=None, repr=False)
    refined: dict[str, TaintMap] = field(default_factory=dict, repr=False)

    @property
    def verdict(self) -> str:
        statuses = [r.source.status for r in self.sources]
        if any(s is SourceStatus.CONFIRMED_LEAK for s in statuses):
            return "leaks_found"
        if self.complete and all(s.resolved for s in statuses):
            return "proved"
        return "inconclusive"

    @property
    def profile(self) -> str:
        """``x:y:z`` with ``-`` for a stage that did not run."""
        return ":".join("-" if self.counts[k] is None else str(self.counts[k])
                        for k in ("step1", "step2", "step3"))

    def leaks(self) -> list[SourceReport]:
        return [r for r in self.sources if r.source.status is SourceStatus.CONFIRMED_LEAK]

    def by_key(self) -> dict[tuple[int, str], SourceReport]:
        return {r.source.key: r for r in self.sources}


def report_json(r: Report, timings: bool = True) -> str:
    """Stable-keyed JSON; leave ``timings`` off for byte-comparable output."""
    data = {
        "schema_version": SCHEMA_VERSION,
        "program": r.name,
        "width": r.config.width,
        "config": r.config.echo(),
        "counts": dict(r.counts),
        "unresolved_after_step1": r.unresolved_after_step1,
        "stage_reached": r.stage_reached,
        "complete": r.complete,
        "verdict": r.verdict,
        "sources": [s.to_json() for s in r.sources],
    }
    if timings:
        data["times"] = {k: round(v, 6) for k, v in r.times.items()}
    return json.dumps(data, indent=2, sort_keys=True)


def refine(tmap: TaintMap, verdicts: dict[int, Verdict], pp: ProductProgram,
           sources: list[Source]) -> tuple[TaintMap, set[tuple[int, str]]]:
    """Remove the fact of every source whose guards all verified."""
    resolved: set[tuple[int, str]] = set()
    for s in sources:
        guards = pp.guards_of(s.label)
        if guards and all(verdicts.get(g.label) is not None and verdicts[g.label].valid
                          for g in guards):
            tmap = tmap.remove(s.label, s.var)
            resolved.add(s.key)
    return tmap, resolved


def _unresolved(reports: list[SourceReport]) -> list[SourceReport]:
    return [r for r in reports if r.source.status is SourceStatus.UNRESOLVED]


def _reason(verdicts: dict[int, Verdict], pp: ProductProgram, label: int) -> str | None:
    for g in sorted(pp.guards_of(label), key=lambda g: g.label):
        v = verdicts.get(g.label)
        if v is not None and not v.valid:
            return v.reason.value if v.reason else v.kind.value
    return None


def run_pipeline(p: Program, cfg: PipelineConfig | None = None, name: str = "main",
                 taint: TaintMap | None = None) -> Report:
    """Classify every potential source of ``p``; raises DeadlineExceeded with ``.report``.

    ``taint`` replaces the stage-one analysis (for ablations); it must be sound.
    """
    cfg = cfg or PipelineConfig()
    report = Report(name, cfg)
    try:
        _run(p, cfg, report, taint)
    except DeadlineExceeded as exc:
        report.complete = False
        for r in report.sources:
            if r.source.status is SourceStatus.UNRESOLVED:
                r.reason = "Timeout"
        exc.report = report
        raise
    return report


def _run(p: Program, cfg: PipelineConfig, report: Report, taint: TaintMap | None) -> None:
    backend = make_backend(cfg.solver, cfg.timeout_vc, cfg.emit_smt)
    start = time.monotonic()
    total = cfg.deadline

    def budget(upto: int) -> Budget:
        if total is None:
            return Budget()
        return Budget(start + total * sum(STAGE_SPLIT[:upto]))

    # stage 1
    t0 = time.monotonic()
    report.stage_reached = 1
    sources = collect_sources(p)
    tmap = analyze(p) if taint is None else taint
    report.taint = tmap
    sources = resolve_step1(sources, tmap)
    report.sources = [SourceReport(s, 1 if s.status.resolved else None) for s in sources]
    report.counts["step1"] = len(sources)
    report.unresolved_after_step1 = len(_unresolved(report.sources))
    report.times["step1"] = time.monotonic() - t0
    budget(1).check()
    if not _unresolved(report.sources) or cfg.stage is Stage.STEP1_ONLY:
        return

    # stage 2
    if not cfg.no_step2:
        t0 = time.monotonic()
        report.stage_reached = 2
        b = budget(2)
        pp = build_semi_product(p, tmap)
        pp = prune_invariants(pp, backend, cfg.width, b)
        verdicts = verify_guards(pp, backend, cfg.width, cfg.unroll, bmc=False, budget=b)
        pending = [r.source for r in _unresolved(report.sources)]
        tmap, resolved = refine(tmap, verdicts, pp, pending)
        report.refined["step2"] = tmap
        for r in _unresolved(report.sources):
            if r.source.key in resolved:
                r.source = r.source.with_status(SourceStatus.RESOLVED_STEP2)
                r.stage = 2
        report.counts["step2"] = len(_unresolved(report.sources))
        report.times["step2"] = time.monotonic() - t0
        if not _unresolved(report.sources) or cfg.stage is Stage.UP_TO_STEP2:
            return
    elif cfg.stage is Stage.UP_TO_STEP2:
        return

    # stage 3
    t0 = time.monotonic()
    report.stage_reached = 3
    b = budget(3)
    pp = build_cross_product(p, tmap)
    pp = prune_invariants(pp, backend, cfg.width, b)
    verdicts = verify_guards(pp, backend, cfg.width, cfg.unroll, bmc=cfg.bmc, budget=b)
    pending = [r.source for r in _unresolved(report.sources)]
    tmap, resolved = refine(tmap, verdicts, pp, pending)
    report.refined["step3"] = tmap
    for r in _unresolved(report.sources):
        s = r.source
        r.stage = 3
        if s.key in resolved:
            r.source = s.with_status(SourceStatus.RESOLVED_STEP3)
            continue
        leak = None
        for g in sorted(pp.guards_of(s.label), key=lambda g: g.label):
            v = verdicts.get(g.label)
            if v is not None and v.invalid:
                w = witness_replay(pp, v.model, cfg.width)
                if isinstance(w, ConfirmedLeak):
                    leak = w
                    break
        if leak is not None:
            r.source = s.with_status(SourceStatus.CONFIRMED_LEAK)
            r.witness = leak
        else:
            r.source = s.with_status(SourceStatus.UNKNOWN)
            r.reason = _reason(verdicts, pp, s.label) or "Spurious"
            if any(verdicts.get(g.label) is not None and verdicts[g.label].invalid
                   for g in pp.guards_of(s.label)):
                r.reason = "SpuriousWitness"
    report.counts["step3"] = sum(1 for r in report.sources
                                 if r.source.status in (SourceStatus.CONFIRMED_LEAK,
                                                        SourceStatus.UNKNOWN))
    report.times["step3"] = time.monotonic() - t0


__all__ = [
    "DeadlineExceeded", "PipelineConfig", "Report", "SourceReport", "Stage", "refine",
    "report_json", "run_pipeline",
]
