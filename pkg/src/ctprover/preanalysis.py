"""Call graph, interprocedural CFG and def-use chains."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .ast import (
    Call, If, Load, Procedure, Program, Seq, Stmt, Store, While, expr_vars, iter_stmts,
    stmt_defs, stmt_uses,
)
from .frontend.errors import RecursionRejectedError


class CycleDetected(RecursionRejectedError):
    pass


# -- call graph ------------------------------------------------------------------

@dataclass
class CallGraph:
    nodes: list[str]
    edges: list[tuple[str, int, str]]  # (caller, call-site label, callee)

    def callees(self, name: str) -> list[str]:
        return sorted({c for (f, _, c) in self.edges if f == name})

    def topological(self) -> list[str]:
        """Callers before callees."""
        indeg = {n: 0 for n in self.nodes}
        succ: dict[str, set[str]] = defaultdict(set)
        for f, _, g in self.edges:
            if g not in succ[f]:
                succ[f].add(g)
                indeg[g] += 1
        ready = [n for n in self.nodes if indeg[n] == 0]
        out: list[str] = []
        while ready:
            n = ready.pop(0)
            out.append(n)
            for g in sorted(succ[n], key=self.nodes.index):
                indeg[g] -= 1
                if indeg[g] == 0:
                    ready.append(g)
        if len(out) != len(self.nodes):
            raise CycleDetected("call graph has a cycle")
        return out


def build_callgraph(p: Program) -> CallGraph:
    """Call graph restricted to procedures reachable from the entry."""
    reach: list[str] = []
    edges: list[tuple[str, int, str]] = []
    work = [p.entry]
    while work:
        name = work.pop(0)
        if name in reach:
            continue
        reach.append(name)
        for s in iter_stmts(p.proc(name).body):
            if isinstance(s, Call):
                edges.append((name, s.label, s.callee))
                if s.callee not in reach:
                    work.append(s.callee)
    order = [q.name for q in p.procedures if q.name in reach]
    g = CallGraph(order, edges)
    g.topological()  # raises on cycles
    return g


# -- control flow ------------------------------------------------------------------

@dataclass
class ProcCFG:
    name: str
    entry: int
    exits: set[int]                       # nodes whose fallthrough leaves the procedure
    succ: dict[int, list[int]]
    pred: dict[int, list[int]]
    stmts: dict[int, Stmt]

    def reachable_from(self, label: int) -> set[int]:
        """Nodes reachable by a non-empty path from ``label``."""
        seen: set[int] = set()
        work = list(self.succ[label])
        while work:
            n = work.pop()
            if n in seen:
                continue
            seen.add(n)
            work.extend(self.succ[n])
        return seen


@dataclass
class ICFG:
    procs: dict[str, ProcCFG]
    call_edges: list[tuple[int, int]] = field(default_factory=list)    # call site -> callee entry
    return_edges: list[tuple[int, int]] = field(default_factory=list)  # callee exit -> return site
    node_proc: dict[int, str] = field(default_factory=dict)

    @property
    def nodes(self) -> list[int]:
        return sorted(self.node_proc)

    def intra_edges(self) -> list[tuple[int, int]]:
        return sorted((a, b) for cfg in self.procs.values() for a, bs in cfg.succ.items() for b in bs)

    def dump(self) -> str:
        lines = [f"{a} -> {b}" for a, b in self.intra_edges()]
        lines += [f"{a} -> {b} [call]" for a, b in sorted(self.call_edges)]
        lines += [f"{a} -> {b} [return]" for a, b in sorted(self.return_edges)]
        return "\n".join(lines)


def _proc_cfg(proc: Procedure) -> ProcCFG:
    succ: dict[int, list[int]] = {}
    stmts: dict[int, Stmt] = {}

    def link(frm: list[int], to: int) -> None:
        for f in frm:
            if to not in succ[f]:
                succ[f].append(to)

    def block(b: Seq, incoming: list[int]) -> tuple[int | None, list[int]]:
        """Wire a block; return (first node, dangling exits)."""
        first = None
        cur = incoming
        for s in b.stmts:
            head, cur = stmt(s, cur)
            if first is None:
                first = head
        return first, cur

    def stmt(s: Stmt, incoming: list[int]) -> tuple[int, list[int]]:
        if isinstance(s, Seq):
            first, out = block(s, incoming)
            return first, out
        succ[s.label] = []
        stmts[s.label] = s
        link(incoming, s.label)
        if isinstance(s, If):
            _, t_out = block(s.then, [s.label])
            _, e_out = block(s.orelse, [s.label])
            return s.label, t_out + e_out
        if isinstance(s, While):
            _, b_out = block(s.body, [s.label])
            link(b_out, s.label)
            return s.label, [s.label]
        return s.label, [s.label]

    entry, exits = block(proc.body, [])
    pred: dict[int, list[int]] = {n: [] for n in succ}
    for a, bs in succ.items():
        for b in bs:
            pred[b].append(a)
    return ProcCFG(proc.name, entry, set(exits), succ, pred, stmts)


def build_icfg(p: Program) -> ICFG:
    """One node per labeled statement of every procedure."""
    g = ICFG({})
    for proc in p.procedures:
        cfg = _proc_cfg(proc)
        g.procs[proc.name] = cfg
        for n in cfg.stmts:
            g.node_proc[n] = proc.name
    for cfg in g.procs.values():
        for lab, s in cfg.stmts.items():
            if isinstance(s, Call):
                callee = g.procs[s.callee]
                g.call_edges.append((lab, callee.entry))
                for ret_site in cfg.succ[lab]:
                    for ex in sorted(callee.exits):
                        g.return_edges.append((ex, ret_site))
    return g


# -- def-use ----------------------------------------------------------------------

def entry_pseudo(i: int) -> int:
    """Pseudo label of procedure ``i``'s entry (parameter and local initialization)."""
    return -(2 * i + 1)


def exit_pseudo(i: int) -> int:
    """Pseudo label of procedure ``i``'s exit (reads of the return variables)."""
    return -(2 * i + 2)


def array_defs(s: Stmt, arrays: set[str]) -> set[str]:
    if isinstance(s, Store):
        return {s.array}
    if isinstance(s, Call):
        return {a.name for a in s.args if getattr(a, "name", None) in arrays}
    return set()


def array_uses(s: Stmt, arrays: set[str]) -> set[str]:
    if isinstance(s, Load):
        return {s.array}
    if isinstance(s, Call):
        return {a.name for a in s.args if getattr(a, "name", None) in arrays}
    return set()


def scalar_uses(s: Stmt, scalars: set[str]) -> set[str]:
    return stmt_uses(s) & scalars


@dataclass
class DefUse:
    defs: dict[str, set[int]]                 # variable -> defining labels
    uses: dict[str, set[int]]                 # variable -> using labels
    chains: dict[str, set[tuple[int, int]]]   # variable -> (def label, use label)
    reaching: dict[int, dict[str, frozenset[int]]]  # label -> var -> defs reaching its entry
    entry_label: dict[str, int]
    exit_label: dict[str, int]

    def reaching_defs(self, label: int, var: str) -> frozenset[int]:
        return self.reaching.get(label, {}).get(var, frozenset())


def _proc_def_use(proc: Procedure, cfg: ProcCFG, ent: int, ext: int):
    scalars = set(proc.scalars())
    arrays = set(proc.arrays())
    gen: dict[int, dict[str, int]] = {}
    for lab, s in cfg.stmts.items():
        d = {v: lab for v in stmt_defs(s) & scalars}
        d.update({a: lab for a in array_defs(s, arrays)})
        gen[lab] = d
    init = {v: frozenset({ent}) for v in scalars | arrays}

    def out_of(lab: int, inn: dict[str, frozenset[int]]) -> dict[str, frozenset[int]]:
        out = dict(inn)
        for v, d in gen[lab].items():
            if v in arrays:
                out[v] = inn.get(v, frozenset()) | {d}  # weak: arrays are never killed
            else:
                out[v] = frozenset({d})
        return out

    IN: dict[int, dict[str, frozenset[int]]] = {n: {} for n in cfg.stmts}
    OUT: dict[int, dict[str, frozenset[int]]] = {}
    order = sorted(cfg.stmts)
    work = list(order)
    while work:
        n = work.pop(0)
        inn: dict[str, frozenset[int]] = dict(init) if n == cfg.entry else {}
        for pr in cfg.pred[n]:
            for v, ds in OUT.get(pr, {}).items():
                inn[v] = inn.get(v, frozenset()) | ds
        new_out = out_of(n, inn)
        IN[n] = inn
        if OUT.get(n) != new_out:
            OUT[n] = new_out
            for s in cfg.succ[n]:
                if s not in work:
                    work.append(s)
    exit_in: dict[str, frozenset[int]] = {}
    for n in cfg.exits:
        for v, ds in OUT.get(n, {}).items():
            exit_in[v] = exit_in.get(v, frozenset()) | ds
    return IN, exit_in, scalars, arrays


def def_use(p: Program, g: ICFG | None = None) -> DefUse:
    """Reaching-definition chains per procedure (arrays index-insensitive)."""
    g = g or build_icfg(p)
    du = DefUse(defaultdict(set), defaultdict(set), defaultdict(set), {}, {}, {})
    for i, proc in enumerate(p.procedures):
        ent, ext = entry_pseudo(i), exit_pseudo(i)
        du.entry_label[proc.name] = ent
        du.exit_label[proc.name] = ext
        cfg = g.procs[proc.name]
        IN, exit_in, scalars, arrays = _proc_def_use(proc, cfg, ent, ext)
        for v in scalars | arrays:
            du.defs[v].add(ent)
        for lab, s in cfg.stmts.items():
            du.reaching[lab] = IN[lab]
            for v in stmt_defs(s) & scalars:
                du.defs[v].add(lab)
            for a in array_defs(s, arrays):
                du.defs[a].add(lab)
            used = scalar_uses(s, scalars) | array_uses(s, arrays)
            for v in used:
                du.uses[v].add(lab)
                for d in IN[lab].get(v, ()):
                    du.chains[v].add((d, lab))
        du.reaching[ext] = exit_in
        for r in proc.returns:
            du.uses[r].add(ext)
            for d in exit_in.get(r, ()):
                du.chains[r].add((d, ext))
    return du


def loop_feeders(loop: While, arrays: frozenset[str] | set[str] = frozenset()) -> list[str]:
    """Scalars defined in the loop body that transitively feed its condition.

    Dependence is followed through assignments, loads (index and array),
    stores (into the array) and calls, restricted to the body, and from the
    condition of an enclosing branch to everything its arms define.
    ``arrays`` names the arrays in scope so call arguments can be told apart.
    """
    deps: dict[str, set[str]] = defaultdict(set)

    def walk(b: Seq, ctrl: frozenset[str]) -> None:
        for s in b.stmts:
            if isinstance(s, If):
                inner = ctrl | expr_vars(s.cond)
                walk(s.then, inner)
                walk(s.orelse, inner)
                continue
            if isinstance(s, While):
                inner = ctrl | expr_vars(s.cond)
                walk(s.body, inner)
                continue
            written: set[str] = set()
            if isinstance(s, Load):
                deps[s.target] |= expr_vars(s.index) | {s.array}
                written = {s.target}
            elif isinstance(s, Store):
                deps[s.array] |= expr_vars(s.value) | expr_vars(s.index)
                written = {s.array}
            elif isinstance(s, Call):
                args: set[str] = set()
                for a in s.args:
                    args |= expr_vars(a)
                for t in s.targets:
                    deps[t] |= args
                written = set(s.targets)
                for a in s.args:
                    if getattr(a, "name", None) in arrays:
                        deps[a.name] |= args  # the callee may write the array from any argument
                        written.add(a.name)
            else:
                for v in stmt_defs(s):
                    deps[v] |= stmt_uses(s)
                written = stmt_defs(s)
            for v in written:
                deps[v] |= ctrl

    walk(loop.body, frozenset())
    defined = set(deps)
    seen: set[str] = set()
    work = list(expr_vars(loop.cond))
    while work:
        v = work.pop()
        if v in seen:
            continue
        seen.add(v)
        work.extend(deps.get(v, ()))
    order: list[str] = []
    for s in iter_stmts(loop.body):
        names = list(stmt_defs(s))
        if isinstance(s, Call):
            names = list(s.targets)
        for v in names:
            if v in seen and v in defined and v not in arrays and v not in order:
                order.append(v)
    return order
