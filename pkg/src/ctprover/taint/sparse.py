"""Sparse taint propagation along def-use chains.

Each definition site (a label, or a procedure's entry pseudo-label) carries
one taint bit per variable it defines. A tainted definition seeds only the
statements that read it; arrays are never untainted, so an array is tainted
at a label iff some tainted definition of it reaches that label.
"""

from __future__ import annotations

from collections import defaultdict

from ..ast import Assign, Call, Load, Program, Store, Var, expr_vars
from ..preanalysis import DefUse, ICFG, build_icfg, def_use
from .dense import entry_facts
from .facts import FactSet, TaintFact, TaintMap


class SparseAnalyzer:
    def __init__(self, p: Program, g: ICFG | None = None, du: DefUse | None = None):
        self.p = p
        self.g = g or build_icfg(p)
        self.du = du or def_use(p, self.g)
        self.labels: dict[int, set[TaintFact]] = defaultdict(set)
        self.summaries: dict[tuple[str, FactSet], FactSet] = {}
        # use sites of each (def label, variable) within a procedure
        self.users: dict[tuple[int, str], list[int]] = defaultdict(list)
        for v, chains in self.du.chains.items():
            for d, u in sorted(chains):
                self.users[(d, v)].append(u)

    def procedure(self, name: str, t_in: FactSet) -> FactSet:
        key = (name, t_in)
        if key in self.summaries:
            return self.summaries[key]
        proc = self.p.proc(name)
        cfg = self.g.procs[name]
        ent = self.du.entry_label[name]
        ext = self.du.exit_label[name]
        arrays = set(proc.arrays())
        tainted: set[tuple[int, str]] = {(ent, f.name) for f in t_in}

        def reaches_tainted(label: int, v: str) -> bool:
            return any((d, v) in tainted for d in self.du.reaching_defs(label, v))

        def operand_tainted(label: int, e) -> bool:
            return any(reaches_tainted(label, v) for v in expr_vars(e))

        def evaluate(label: int) -> list[tuple[int, str]]:
            """Definitions at ``label`` that are tainted under the current facts."""
            s = cfg.stmts[label]
            if isinstance(s, Assign):
                return [(label, s.target)] if operand_tainted(label, s.expr) else []
            if isinstance(s, Load):
                return [(label, s.target)] if reaches_tainted(label, s.array) else []
            if isinstance(s, Store):
                return [(label, s.array)] if operand_tainted(label, s.value) else []
            if isinstance(s, Call):
                callee = self.p.proc(s.callee)
                ctx = frozenset(
                    TaintFact(q.name, q.is_array)
                    for q, a in zip(callee.params, s.args)
                    if isinstance(a, Var) and reaches_tainted(label, a.name)
                )
                out_facts = self.procedure(callee.name, ctx)
                names = {f.name for f in out_facts}
                out = [(label, t) for t, r in zip(s.targets, callee.returns) if r in names]
                out += [(label, a.name) for q, a in zip(callee.params, s.args)
                        if q.is_array and q.name in names]
                return out
            return []

        # seed: every statement reading a tainted entry definition, and every
        # call (its callee must be analysed in the context it sees)
        work: list[int] = []
        for f in t_in:
            work.extend(u for u in self.users[(ent, f.name)] if u >= 0)
        work.extend(lab for lab, s in cfg.stmts.items() if isinstance(s, Call))
        queued = set(work)
        while work:
            lab = work.pop()
            queued.discard(lab)
            for d in evaluate(lab):
                if d in tainted:
                    continue
                tainted.add(d)
                for u in self.users[d]:
                    if u >= 0 and u not in queued:
                        queued.add(u)
                        work.append(u)

        # materialize the per-label fact sets of this context
        for lab in cfg.stmts:
            facts = self.labels[lab]
            for v, defs in self.du.reaching.get(lab, {}).items():
                if any((d, v) in tainted for d in defs):
                    facts.add(TaintFact(v, v in arrays))
        out: set[TaintFact] = set()
        for v, defs in self.du.reaching.get(ext, {}).items():
            if any((d, v) in tainted for d in defs):
                out.add(TaintFact(v, v in arrays))
        result = frozenset(out)
        self.summaries[key] = result
        return result


def analyze(p: Program, g: ICFG | None = None, du: DefUse | None = None) -> TaintMap:
    """Taint facts for every label of ``p`` (unreachable labels get the empty set)."""
    a = SparseAnalyzer(p, g, du)
    a.procedure(p.entry, entry_facts(p))
    facts = {lab: frozenset(a.labels.get(lab, ())) for lab in a.g.node_proc}
    return TaintMap(facts, a.summaries)

