"""Invariant pruning, guard verification and witness replay."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from ..product import Candidate, CandidateStatus, ProductKind, ProductProgram
from ..semantics.interp import Event, run, traces_prefix_equal
from .backends import (
    VALID, Backend, SmtLibBackend, UnknownReason, Verdict, VerdictKind,
)
from .symexec import VC, Mode, VCConfig, VCKind, gen_vcs
from .terms import InlineBlowup

WITNESS_FUEL = 1 << 16


class DeadlineExceeded(RuntimeError):
    """The global time budget ran out."""


@dataclass
class Budget:
    """Absolute wall-clock deadline shared by every VC of a run."""

    until: float | None = None

    @staticmethod
    def seconds(s: float | None) -> "Budget":
        return Budget(None if s is None else time.monotonic() + s)

    def check(self) -> None:
        if self.until is not None and time.monotonic() > self.until:
            raise DeadlineExceeded("time budget exhausted")


def check_all(vcs: list[VC], backend: Backend, budget: Budget | None = None,
              jobs: int | None = None) -> dict[str, Verdict]:
    """Verdict for every VC; solver processes run concurrently."""
    budget = budget or Budget()
    if jobs is None:
        jobs = 4 if isinstance(backend, SmtLibBackend) else 1

    def one(vc: VC) -> Verdict:
        budget.check()
        return backend.check(vc)

    if jobs <= 1 or len(vcs) <= 1:
        return {vc.id: one(vc) for vc in vcs}
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return dict(zip((vc.id for vc in vcs), pool.map(one, vcs)))


def prune_invariants(pp: ProductProgram, backend: Backend, width: int = 8,
                     budget: Budget | None = None, max_terms: int | None = None) -> ProductProgram:
    """Drop candidates until the survivors are jointly initial and inductive."""
    active = {lab: [i for i, c in enumerate(cs) if c.status is not CandidateStatus.DROPPED]
              for lab, cs in pp.candidate_invariants.items()}
    active = {lab: idx for lab, idx in active.items() if idx}
    cfg = VCConfig(mode=Mode.INVARIANT, guards=False)
    if max_terms is not None:
        cfg = replace(cfg, max_terms=max_terms)
    rounds = sum(len(v) for v in active.values())
    for _ in range(rounds + 1):
        if not active:
            break
        try:
            vcs = gen_vcs(pp, width, cfg, active)
        except InlineBlowup:
            active = {}
            break
        verdicts = check_all(vcs, backend, budget)
        failed = {vc.key for vc in vcs if not verdicts[vc.id].valid}
        if not failed:
            break
        active = {lab: [i for i in idx if (lab, i) not in failed] for lab, idx in active.items()}
        active = {lab: idx for lab, idx in active.items() if idx}
    cands: dict[int, list[Candidate]] = {}
    for lab, cs in pp.candidate_invariants.items():
        keep = set(active.get(lab, ()))
        cands[lab] = [Candidate(c.expr, CandidateStatus.CONFIRMED if i in keep
                                else CandidateStatus.DROPPED) for i, c in enumerate(cs)]
    return replace(pp, candidate_invariants=cands)


def model_to_inputs(pp: ProductProgram, model: dict[str, int]) -> dict[str, object]:
    """Input binding for every entry parameter of the product (unset symbols are 0)."""
    out: dict[str, object] = {}
    for q in pp.program.entry_proc.params:
        if q.is_array:
            out[q.name] = [model.get(f"{q.name}[{j}]", 0) for j in range(q.size)]
        else:
            out[q.name] = model.get(q.name, 0)
    return out


def _guard_vcs(pp: ProductProgram, width: int, cfg: VCConfig) -> tuple[list[VC], str | None]:
    try:
        return gen_vcs(pp, width, cfg), None
    except InlineBlowup as exc:
        return [], str(exc)


def verify_guards(pp: ProductProgram, backend: Backend, width: int = 8, unroll: int = 16,
                  bmc: bool = True, budget: Budget | None = None,
                  max_terms: int | None = None) -> dict[int, Verdict]:
    """Verdict per guard label: prove in invariant mode, then search with unrolling."""
    budget = budget or Budget()
    extra = {} if max_terms is None else {"max_terms": max_terms}
    labels = sorted(pp.guard_index)
    out: dict[int, Verdict] = {}
    if not labels:
        return out
    active = {lab: [i for i, c in enumerate(cs) if c.status is CandidateStatus.CONFIRMED]
              for lab, cs in pp.candidate_invariants.items()}
    inv_cfg = VCConfig(mode=Mode.INVARIANT, invariants=False, **extra)
    try:
        vcs = gen_vcs(pp, width, inv_cfg, active)
        inv = check_all(vcs, backend, budget)
        inv_by_label = {vc.key: inv[vc.id] for vc in vcs}
    except InlineBlowup as exc:
        inv_by_label = {}
        blowup = str(exc)
    else:
        blowup = ""
    for lab in labels:
        v = inv_by_label.get(lab)
        if v is not None and v.valid:
            out[lab] = VALID
    todo = [lab for lab in labels if lab not in out]
    if not todo:
        return out
    if not bmc:
        for lab in todo:
            out[lab] = Verdict.unknown(UnknownReason.INLINE_BLOWUP, blowup) if blowup else \
                _demote(inv_by_label.get(lab))
        return out
    vcs, err = _guard_vcs(pp, width, VCConfig(mode=Mode.BMC, unroll=unroll, **extra))
    if err:
        for lab in todo:
            out[lab] = Verdict.unknown(UnknownReason.INLINE_BLOWUP, err)
        return out
    wanted = set(todo)
    vcs = [vc for vc in vcs if vc.kind is VCKind.UNWIND or vc.key in wanted]
    res = check_all(vcs, backend, budget)
    unwinds = [res[vc.id] for vc in vcs if vc.kind is VCKind.UNWIND]
    unwind_ok = all(v.valid for v in unwinds)
    # an undecided unwinding check is reported as such, not as a bound hit
    undecided = next((v for v in unwinds if not v.valid and not v.invalid), None)
    for vc in vcs:
        if vc.kind is not VCKind.GUARD:
            continue
        v = res[vc.id]
        if v.invalid:
            out[vc.key] = Verdict(VerdictKind.INVALID, model_to_inputs(pp, v.model or {}))
        elif v.valid and unwind_ok:
            out[vc.key] = VALID
        elif v.valid and undecided is not None and not any(u.invalid for u in unwinds):
            out[vc.key] = undecided
        elif v.valid:
            out[vc.key] = Verdict.unknown(UnknownReason.UNWIND_BOUND_HIT,
                                          f"no counterexample within {unroll} iterations")
        else:
            out[vc.key] = v
    return out


def _demote(v: Verdict | None) -> Verdict:
    if v is None or v.invalid:
        return Verdict.unknown(UnknownReason.SOLVER_UNKNOWN, "not provable with the invariants")
    return v


# -- witnesses ---------------------------------------------------------------------

@dataclass(frozen=True)
class ConfirmedLeak:
    inputs1: dict
    inputs2: dict
    trace1: tuple[Event, ...]
    trace2: tuple[Event, ...]
    index: int

    confirmed = True


@dataclass(frozen=True)
class Spurious:
    reason: str
    inputs1: dict = field(default_factory=dict)
    inputs2: dict = field(default_factory=dict)

    confirmed = False


def split_model(pp: ProductProgram, binding: dict[str, object]) -> tuple[dict, dict]:
    """Two input bindings of the original program: originals and shadows."""
    if pp.kind is not ProductKind.CROSS:
        raise ValueError("only cross-product models describe pairs of runs")
    shadow_of = {orig: sh for sh, orig in pp.shadow_secrets.items()}
    run1: dict[str, object] = {}
    run2: dict[str, object] = {}
    for q in pp.original.entry_proc.params:
        run1[q.name] = binding[q.name]
        run2[q.name] = binding[shadow_of[q.name]] if q.name in shadow_of else binding[q.name]
    return run1, run2


def witness_replay(pp: ProductProgram, binding: dict[str, object], width: int = 8,
                   fuel: int = WITNESS_FUEL) -> ConfirmedLeak | Spurious:
    """Run the original program on both halves of a cross-product model."""
    in1, in2 = split_model(pp, binding)
    r1 = run(pp.original, in1, width, fuel)
    r2 = run(pp.original, in2, width, fuel)
    if not (r1.complete and r2.complete):
        return Spurious(f"runs end {r1.status.value}/{r2.status.value}", in1, in2)
    idx = traces_prefix_equal(r1.trace, r2.trace)
    if idx is None:
        return Spurious("traces are equal", in1, in2)
    return ConfirmedLeak(in1, in2, tuple(r1.trace), tuple(r2.trace), idx)
