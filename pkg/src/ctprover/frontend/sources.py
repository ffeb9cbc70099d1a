from __future__ import annotations

import enum
from dataclasses import dataclass

from ..ast import If, Load, Program, Store, Var, While, iter_stmts
from .normalize import call_order


class SourceKind(str, enum.Enum):
    BRANCH_COND = "branch_cond"
    LOOP_COND = "loop_cond"
    LOAD_INDEX = "load_index"
    STORE_INDEX = "store_index"


class SourceStatus(str, enum.Enum):
    UNRESOLVED = "unresolved"
    RESOLVED_STEP1 = "resolved_step1"
    RESOLVED_STEP2 = "resolved_step2"
    RESOLVED_STEP3 = "resolved_step3"
    CONFIRMED_LEAK = "confirmed_leak"
    UNKNOWN = "unknown"

    @property
    def resolved(self) -> bool:
        return self.name.startswith("RESOLVED")


# position along the pipeline; statuses may only move forward
STATUS_RANK = {
    SourceStatus.UNRESOLVED: 0,
    SourceStatus.RESOLVED_STEP1: 1,
    SourceStatus.RESOLVED_STEP2: 2,
    SourceStatus.RESOLVED_STEP3: 3,
    SourceStatus.CONFIRMED_LEAK: 3,
    SourceStatus.UNKNOWN: 3,
}


@dataclass(frozen=True)
class Source:
    """A potential side-channel source: variable ``var`` observed at ``label``."""

    label: int
    var: str
    kind: SourceKind
    proc: str
    status: SourceStatus = SourceStatus.UNRESOLVED

    @property
    def key(self) -> tuple[int, str]:
        return (self.label, self.var)

    def with_status(self, status: SourceStatus) -> "Source":
        if STATUS_RANK[status] < STATUS_RANK[self.status]:
            raise ValueError(f"status cannot move from {self.status.value} back to {status.value}")
        return Source(self.label, self.var, self.kind, self.proc, status)


def collect_sources(p: Program) -> list[Source]:
    """One source per If, While, Load and Store with a variable operand.

    Only procedures reachable from the entry contribute. Accesses with a
    literal index still leak a (constant) value but have no variable to
    track, so they are not sources.
    """
    reachable = set(call_order_reachable(p))
    out: list[Source] = []
    for proc in p.procedures:
        if proc.name not in reachable:
            continue
        for s in iter_stmts(proc.body):
            kind = None
            operand = None
            if isinstance(s, If):
                kind, operand = SourceKind.BRANCH_COND, s.cond
            elif isinstance(s, While):
                kind, operand = SourceKind.LOOP_COND, s.cond
            elif isinstance(s, Load):
                kind, operand = SourceKind.LOAD_INDEX, s.index
            elif isinstance(s, Store):
                kind, operand = SourceKind.STORE_INDEX, s.index
            if kind is not None and isinstance(operand, Var):
                out.append(Source(s.label, operand.name, kind, proc.name))
    out.sort(key=lambda src: src.label)
    return out


def call_order_reachable(p: Program) -> list[str]:
    """Procedures reachable from the entry (callees first)."""
    from ..ast import Call

    seen: list[str] = []

    def visit(name: str) -> None:
        if name in seen:
            return
        for s in iter_stmts(p.proc(name).body):
            if isinstance(s, Call):
                visit(s.callee)
        seen.append(name)

    call_order(p)
    visit(p.entry)
    return seen
