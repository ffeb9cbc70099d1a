"""Taint-directed product programs.

``build_semi_product`` pairs every variable ``x`` with a 0/1 companion
``b$x`` recording whether ``x`` may depend on a secret; a guard asserts
``!b$x`` at each tainted source. ``build_cross_product`` pairs ``x`` with a
shadow ``sh$x`` computed from an independent copy of the secret inputs; a
guard asserts ``x == sh$x``. Statements whose operands are untainted are
simplified (the companion becomes 0, or the shadow becomes a copy).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

from .ast import (
    Assert, Assign, Assume, BinOp, Call, Decl, Expr, If, IntLit, Load, Param,
    Procedure, Program, Seq, Skip, Stmt, Store, UnOp, Var, While, expr_vars, iter_stmts,
)
from .frontend.normalize import bounds_assert
from .preanalysis import loop_feeders
from .taint.facts import TaintFact, TaintMap

BOOL_PREFIX = "b$"
SHADOW_PREFIX = "sh$"
COPY_TEMP = "sh$$copy"


class ProductKind(str, enum.Enum):
    SEMI = "semi"
    CROSS = "cross"


class GuardRole(str, enum.Enum):
    PRE = "pre"      # before an If, Load or Store
    BEGIN = "begin"  # first statement of a loop body
    EXIT = "exit"    # immediately after a loop


class CandidateStatus(str, enum.Enum):
    CANDIDATE = "candidate"
    CONFIRMED = "confirmed"
    DROPPED = "dropped"


@dataclass(frozen=True)
class Guard:
    label: int          # label of the assert in the product
    source_label: int   # label of the source in the original program
    var: str
    role: GuardRole


@dataclass(frozen=True)
class Candidate:
    expr: Expr
    status: CandidateStatus = CandidateStatus.CANDIDATE


@dataclass
class ProductProgram:
    program: Program
    kind: ProductKind
    original: Program
    guard_index: dict[int, Guard]
    candidate_invariants: dict[int, list[Candidate]]
    origin: dict[int, int]                  # product label -> original label
    companions: frozenset[str] = frozenset()
    shadow_secrets: dict[str, str] = field(default_factory=dict)  # shadow param -> original

    def guards_of(self, source_label: int) -> list[Guard]:
        return [g for g in self.guard_index.values() if g.source_label == source_label]

    def loop_candidates(self, label: int, status: CandidateStatus | None = None) -> list[Expr]:
        return [c.expr for c in self.candidate_invariants.get(label, [])
                if status is None or c.status is status]

    def guards_json(self) -> str:
        data = {
            str(lab): {"source_label": g.source_label, "var": g.var, "role": g.role.value}
            for lab, g in sorted(self.guard_index.items())
        }
        return json.dumps({"kind": self.kind.value, "guards": data}, indent=2, sort_keys=True)


def companion_name(kind: ProductKind, name: str) -> str:
    return (BOOL_PREFIX if kind is ProductKind.SEMI else SHADOW_PREFIX) + name


def xi(e: Expr, comp=lambda n: BOOL_PREFIX + n) -> Expr:
    """Taint of an expression: 0 for literals, ``b$x`` for variables, ``|`` otherwise."""
    if isinstance(e, IntLit):
        return IntLit(0)
    if isinstance(e, Var):
        return Var(comp(e.name))
    if isinstance(e, UnOp):
        return xi(e.operand, comp)
    if isinstance(e, BinOp):
        a, b = xi(e.left, comp), xi(e.right, comp)
        if a == IntLit(0):
            return b
        if b == IntLit(0) or a == b:
            return a
        return BinOp("|", a, b)
    raise TypeError(f"expression {e!r} is not flat")


def Xi(e: Expr, comp=lambda n: SHADOW_PREFIX + n) -> Expr:
    """The same computation over shadow variables."""
    if isinstance(e, IntLit):
        return e
    if isinstance(e, Var):
        return Var(comp(e.name))
    if isinstance(e, UnOp):
        return UnOp(e.op, Xi(e.operand, comp))
    if isinstance(e, BinOp):
        return BinOp(e.op, Xi(e.left, comp), Xi(e.right, comp))
    raise TypeError(f"expression {e!r} is not flat")


def gen_invariants(loop: While, kind: ProductKind, arrays=frozenset()) -> list[Expr]:
    """Candidate loop invariants for the variables feeding the loop condition."""
    out: list[Expr] = []
    for y in loop_feeders(loop, arrays):
        if kind is ProductKind.SEMI:
            out.append(UnOp("!", Var(BOOL_PREFIX + y)))
        else:
            out.append(BinOp("==", Var(y), Var(SHADOW_PREFIX + y)))
    return out


def all_tainted(p: Program) -> TaintMap:
    """A taint map claiming every variable is tainted everywhere."""
    facts = {}
    for proc in p.procedures:
        scope = frozenset(TaintFact(n, size is not None) for n, size in proc.sizes().items())
        for s in iter_stmts(proc.body):
            facts[s.label] = scope
    return TaintMap(facts)


class _Builder:
    def __init__(self, p: Program, tmap: TaintMap, kind: ProductKind):
        self.p = p
        self.tmap = tmap
        self.kind = kind
        self.counter = 0
        self.origin: dict[int, int] = {}
        self.guards: dict[int, Guard] = {}
        self.cands: dict[int, list[Candidate]] = {}
        self.companions: set[str] = set()
        names = {n for proc in p.procedures for n in proc.sizes()}
        for n in names:
            c = self.comp(n)
            if c in names:
                raise ValueError(f"companion name {c!r} collides with a program identifier")
            self.companions.add(c)
        self.companions.add(COPY_TEMP)

    # -- helpers
    @property
    def semi(self) -> bool:
        return self.kind is ProductKind.SEMI

    def comp(self, name: str) -> str:
        return companion_name(self.kind, name)

    def fresh(self) -> int:
        n = self.counter
        self.counter += 1
        return n

    def mk(self, cls, *args, origin: int | None = None, **kw) -> Stmt:
        lab = self.fresh()
        if origin is not None:
            self.origin[lab] = origin
        return cls(*args, label=lab, **kw)

    def copy(self, s: Stmt) -> Stmt:
        lab = self.fresh()
        self.origin[lab] = s.label
        return replace(s, label=lab)

    def tainted(self, label: int, var: str) -> bool:
        return self.tmap.tainted(label, var)

    def any_tainted(self, label: int, e: Expr) -> bool:
        return any(self.tainted(label, v) for v in expr_vars(e))

    def guard(self, s: Stmt, var: Expr, role: GuardRole) -> list[Stmt]:
        if not isinstance(var, Var) or not self.tainted(s.label, var.name):
            return []
        v = var.name
        if self.semi:
            g = self.mk(Assert, UnOp("!", Var(self.comp(v))))
        else:
            g = self.mk(Assert, BinOp("==", Var(v), Var(self.comp(v))))
        self.guards[g.label] = Guard(g.label, s.label, v, role)
        return [g]

    def cexpr(self, e: Expr) -> Expr:
        return xi(e, self.comp) if self.semi else Xi(e, self.comp)

    # -- statements
    def block(self, b: Seq, sizes: dict) -> Seq:
        out: list[Stmt] = []
        stmts = b.stmts
        pre_guarded: set[int] = set()
        for i, s in enumerate(stmts):
            nxt = stmts[i + 1] if i + 1 < len(stmts) else None
            if (isinstance(s, Assert) and isinstance(nxt, (Load, Store))
                    and s == bounds_assert(nxt.index, sizes.get(nxt.array))):
                # the access guard goes before its bounds check
                out.extend(self.guard(nxt, nxt.index, GuardRole.PRE))
                pre_guarded.add(i + 1)
                out.append(self.copy(s))
                continue
            out.extend(self.stmt(s, sizes, i in pre_guarded))
        return Seq(tuple(out))

    def stmt(self, s: Stmt, sizes: dict, guarded: bool = False) -> list[Stmt]:
        if isinstance(s, (Skip, Assert, Assume)):
            return [self.copy(s)]
        if isinstance(s, Assign):
            return [self.copy(s), self.assign_companion(s)]
        if isinstance(s, Load):
            pre = [] if guarded else self.guard(s, s.index, GuardRole.PRE)
            return pre + [self.copy(s)] + self.load_companion(s, sizes)
        if isinstance(s, Store):
            pre = [] if guarded else self.guard(s, s.index, GuardRole.PRE)
            return pre + [self.copy(s)] + self.store_companion(s, sizes)
        if isinstance(s, If):
            pre = self.guard(s, s.cond, GuardRole.PRE)
            lab = self.fresh()
            self.origin[lab] = s.label
            then = self.block(s.then, sizes)
            orelse = self.block(s.orelse, sizes)
            return pre + [If(s.cond, then, orelse, label=lab)]
        if isinstance(s, While):
            lab = self.fresh()
            self.origin[lab] = s.label
            arrays = frozenset(k for k, v in sizes.items() if v is not None)
            cands = [Candidate(e) for e in gen_invariants(s, self.kind, arrays)]
            cands += [Candidate(e) for e in s.invariants if Candidate(e) not in cands]
            self.cands[lab] = cands
            begin = self.guard(s, s.cond, GuardRole.BEGIN)
            body = self.block(s.body, sizes)
            loop = While(s.cond, Seq(tuple(begin) + body.stmts),
                         tuple(c.expr for c in cands), label=lab)
            return [loop] + self.guard(s, s.cond, GuardRole.EXIT)
        if isinstance(s, Call):
            return [self.call(s)]
        raise TypeError(s)  # pragma: no cover

    def assign_companion(self, s: Assign) -> Stmt:
        c = self.comp(s.target)
        if not self.any_tainted(s.label, s.expr):
            return self.mk(Assign, c, IntLit(0) if self.semi else Var(s.target))
        return self.mk(Assign, c, self.cexpr(s.expr))

    def load_companion(self, s: Load, sizes: dict) -> list[Stmt]:
        c = self.comp(s.target)
        if self.semi:
            if self.tainted(s.label, s.array):
                return [self.mk(Load, c, self.comp(s.array), s.index)]
            return [self.mk(Assign, c, IntLit(0))]
        if not self.tainted(s.label, s.array) and not self.any_tainted(s.label, s.index):
            return [self.mk(Assign, c, Var(s.target))]
        return self.shadow_bounds(s.index, sizes[s.array]) + [
            self.mk(Load, c, self.comp(s.array), self.cexpr(s.index))]

    def store_companion(self, s: Store, sizes: dict) -> list[Stmt]:
        ca = self.comp(s.array)
        if self.semi:
            return [self.mk(Store, ca, s.index, self.cexpr(s.value)
                            if self.any_tainted(s.label, s.value) else IntLit(0))]
        if not self.any_tainted(s.label, s.value) and not self.any_tainted(s.label, s.index):
            return [self.mk(Store, ca, s.index, s.value)]
        return self.shadow_bounds(s.index, sizes[s.array]) + [
            self.mk(Store, ca, self.cexpr(s.index), self.cexpr(s.value))]

    def shadow_bounds(self, index: Expr, size: int) -> list[Stmt]:
        if isinstance(index, IntLit):
            return []
        # a shadow run that would index out of range is not a complete run
        return [self.mk(Assume, BinOp("<", self.cexpr(index), IntLit(size)))]

    def call(self, s: Call) -> Stmt:
        targets: list[str] = []
        for t in s.targets:
            targets += [t, self.comp(t)]
        args: list[Expr] = []
        for a in s.args:
            args += [a, Var(self.comp(a.name))]
        return self.mk(Call, tuple(targets), s.callee, tuple(args), origin=s.label)

    # -- procedures
    def procedure(self, proc: Procedure) -> Procedure:
        sizes = proc.sizes()
        if proc.name == self.p.entry:
            return self.entry(proc, sizes)
        params: list[Param] = []
        for q in proc.params:
            params += [q, Param(self.comp(q.name), q.size)]
        locals_ = proc.locals + tuple(Decl(self.comp(d.name), d.size) for d in proc.locals)
        rets: list[str] = []
        for r in proc.returns:
            rets += [r, self.comp(r)]
        return Procedure(proc.name, tuple(params), locals_, self.block(proc.body, sizes), tuple(rets))

    def entry(self, proc: Procedure, sizes: dict) -> Procedure:
        head: list[Stmt] = []
        params = list(proc.params)
        comp_locals: list[Decl] = [Decl(self.comp(d.name), d.size) for d in proc.locals]
        need_copy = False
        for q in proc.params:
            c = self.comp(q.name)
            if self.semi:
                comp_locals.append(Decl(c, q.size))
                bit = IntLit(1 if q.annot == "sec" else 0)
                if q.is_array:
                    head += [self.mk(Store, c, IntLit(i), bit) for i in range(q.size)]
                else:
                    head.append(self.mk(Assign, c, bit))
            elif q.annot == "sec":
                params.append(Param(c, q.size, "sec"))
            else:
                comp_locals.append(Decl(c, q.size))
                if q.is_array:
                    need_copy = True
                    for i in range(q.size):
                        head.append(self.mk(Load, COPY_TEMP, q.name, IntLit(i)))
                        head.append(self.mk(Store, c, IntLit(i), Var(COPY_TEMP)))
                else:
                    head.append(self.mk(Assign, c, Var(q.name)))
        if need_copy:
            comp_locals.append(Decl(COPY_TEMP))
        body = self.block(proc.body, sizes)
        return Procedure(proc.name, tuple(params), proc.locals + tuple(comp_locals),
                         Seq(tuple(head) + body.stmts), proc.returns)

    def build(self) -> ProductProgram:
        procs = tuple(self.procedure(proc) for proc in self.p.procedures)
        prog = Program(procs, self.p.entry)
        shadows = {}
        if not self.semi:
            shadows = {self.comp(n): n for n in self.p.secret_inputs}
        return ProductProgram(prog, self.kind, self.p, self.guards, self.cands, self.origin,
                              frozenset(self.companions), shadows)


def build_semi_product(p: Program, tmap: TaintMap) -> ProductProgram:
    """Program paired with its Boolean taint abstraction."""
    return _Builder(p, tmap, ProductKind.SEMI).build()


def build_cross_product(p: Program, tmap: TaintMap) -> ProductProgram:
    """Program paired with a shadow copy sharing the public inputs."""
    return _Builder(p, tmap, ProductKind.CROSS).build()


def erase(pp: ProductProgram) -> Program:
    """Drop every companion statement, parameter and local; inverse of the construction."""
    comp = pp.companions

    def block(b: Seq) -> Seq:
        out: list[Stmt] = []
        for s in b.stmts:
            if s.label not in pp.origin:
                continue
            lab = pp.origin[s.label]
            if isinstance(s, If):
                out.append(If(s.cond, block(s.then), block(s.orelse), label=lab))
            elif isinstance(s, While):
                orig_inv = _original_invariants(pp, lab)
                out.append(While(s.cond, block(s.body), orig_inv, label=lab))
            elif isinstance(s, Call):
                out.append(Call(tuple(t for t in s.targets if t not in comp), s.callee,
                                tuple(a for a in s.args if a.name not in comp), label=lab))
            else:
                out.append(replace(s, label=lab))
        return Seq(tuple(out))

    procs = []
    for proc in pp.program.procedures:
        procs.append(Procedure(
            proc.name,
            tuple(q for q in proc.params if q.name not in comp),
            tuple(d for d in proc.locals if d.name not in comp),
            block(proc.body),
            tuple(r for r in proc.returns if r not in comp),
        ))
    return Program(tuple(procs), pp.program.entry)


def _original_invariants(pp: ProductProgram, label: int) -> tuple[Expr, ...]:
    for s in iter_stmts(Seq(tuple(q.body for q in pp.original.procedures))):
        if s.label == label and isinstance(s, While):
            return s.invariants
    return ()


def with_candidates(pp: ProductProgram, cands: dict[int, list[Candidate]]) -> ProductProgram:
    return replace(pp, candidate_invariants=cands)
