"""Reference dense implementation of the taint inference rules.

Every statement maps a fact set to a fact set; loops iterate to the least
fixed point and calls are analysed once per distinct entry context.
"""

from __future__ import annotations

from ..ast import (
    Assert, Assign, Assume, Call, If, Load, Program, Seq, Skip, Stmt, Store, Var, While,
    expr_vars,
)
from .facts import FactSet, TaintFact, TaintMap, scalar, whole_array


def _has(T: FactSet, name: str) -> bool:
    return TaintFact(name) in T or TaintFact(name, True) in T


def _without(T: FactSet, name: str) -> FactSet:
    return frozenset(f for f in T if not (f.name == name and not f.array))


def entry_facts(p: Program) -> FactSet:
    entry = p.entry_proc
    return frozenset(TaintFact(q.name, q.is_array) for q in entry.params if q.annot == "sec")


class DenseAnalyzer:
    def __init__(self, program: Program | None = None):
        self.program = program
        self.labels: dict[int, FactSet] = {}
        self.summaries: dict[tuple[str, FactSet], FactSet] = {}
        self.max_iterations = 0

    def record(self, label: int, T: FactSet) -> None:
        self.labels[label] = self.labels.get(label, frozenset()) | T

    # the rules, one statement at a time
    def transfer(self, s: Stmt, T: FactSet) -> FactSet:
        if isinstance(s, Seq):
            for c in s.stmts:
                T = self.transfer(c, T)
            return T
        self.record(s.label, T)
        if isinstance(s, (Skip, Assert, Assume)):
            return T
        if isinstance(s, Load):
            if TaintFact(s.array, True) in T:
                return T | {scalar(s.target)}
            return _without(T, s.target)
        if isinstance(s, Store):
            if isinstance(s.value, Var) and _has(T, s.value.name):
                return T | {whole_array(s.array)}
            return T
        if isinstance(s, Assign):
            if any(_has(T, v) for v in expr_vars(s.expr)):
                return T | {scalar(s.target)}
            return _without(T, s.target)
        if isinstance(s, If):
            return self.transfer(s.then, T) | self.transfer(s.orelse, T)
        if isinstance(s, While):
            return self.lfp(s, T)
        if isinstance(s, Call):
            return self.call(s, T)
        raise TypeError(s)  # pragma: no cover

    def lfp(self, loop: While, T: FactSet) -> FactSet:
        """Loop-head facts: least H with H = T | transfer(body, H)."""
        H = T
        n = 0
        while True:
            n += 1
            self.record(loop.label, H)
            nxt = T | self.transfer(loop.body, H)
            if nxt == H:
                break
            H = nxt
        self.max_iterations = max(self.max_iterations, n)
        return H

    def call(self, s: Call, T: FactSet) -> FactSet:
        if self.program is None:
            raise ValueError("analysing a call needs the enclosing program")
        callee = self.program.proc(s.callee)
        t_in = frozenset(
            TaintFact(q.name, q.is_array)
            for q, a in zip(callee.params, s.args)
            if isinstance(a, Var) and _has(T, a.name)
        )
        t_out = self.procedure(callee.name, t_in)
        out = set(T)
        for t in s.targets:
            out.discard(scalar(t))
        for t, r in zip(s.targets, callee.returns):
            if scalar(r) in t_out:
                out.add(scalar(t))
        for q, a in zip(callee.params, s.args):
            if q.is_array and whole_array(q.name) in t_out:
                out.add(whole_array(a.name))
        return frozenset(out)

    def procedure(self, name: str, t_in: FactSet) -> FactSet:
        key = (name, t_in)
        if key not in self.summaries:
            self.summaries[key] = self.transfer(self.program.proc(name).body, t_in)
        return self.summaries[key]


def transfer(s: Stmt, T: FactSet, program: Program | None = None) -> FactSet:
    """Apply the taint rules for ``s`` to the fact set ``T``."""
    return DenseAnalyzer(program).transfer(s, frozenset(T))


def lfp(loop: While, T: FactSet, program: Program | None = None) -> FactSet:
    return DenseAnalyzer(program).lfp(loop, frozenset(T))


def analyze_dense(p: Program) -> TaintMap:
    """Dense fixpoint over the whole program; unreachable labels map to the empty set."""
    a = DenseAnalyzer(p)
    a.procedure(p.entry, entry_facts(p))
    facts = {s.label: frozenset() for proc in p.procedures for s in _labeled(proc.body)}
    facts.update(a.labels)
    return TaintMap(facts, a.summaries, a.max_iterations)


def _labeled(b: Seq):
    from ..ast import iter_stmts

    return iter_stmts(b)
