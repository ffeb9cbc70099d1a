"""Verification-condition generation by symbolic execution of a product.

Calls are inlined and arrays are blasted into one term per element. Guard
asserts yield proof obligations and are not assumed afterwards, so every
guard is valid or not independently of the others. Bounds checks, user
asserts and non-zero divisors become path assumptions, because a run that
gets stuck on them is not a complete run.

Loops are handled in one of two modes:

* invariant mode: establish the candidate invariants, havoc everything the
  body assigns, assume the invariants, check the body once and re-establish
  the invariants; the exit path assumes the invariants and the negated
  condition;
* bounded mode: unroll ``unroll`` times and then require the condition to be
  false (an unwinding check); the exit path assumes it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..ast import (
    Assert, Assign, Assume, BinOp, Call, Expr, If, IntLit, Load, Program, Seq, Skip,
    Stmt, Store, UnOp, Var, While, iter_stmts,
)
from ..product import CandidateStatus, ProductProgram
from .terms import DEFAULT_MAX_TERMS, TermManager


class Mode(str, enum.Enum):
    INVARIANT = "invariant"
    BMC = "bmc"


class VCKind(str, enum.Enum):
    GUARD = "GuardValidity"
    INIT = "InvariantInit"
    INDUCTIVE = "InvariantInductive"
    UNWIND = "UnwindingCheck"


@dataclass(frozen=True)
class VCConfig:
    mode: Mode = Mode.INVARIANT
    unroll: int = 16
    max_terms: int = DEFAULT_MAX_TERMS
    guards: bool = True        # emit guard obligations
    invariants: bool = True    # emit invariant obligations (invariant mode)


@dataclass
class VC:
    """Valid iff ``formula`` is non-zero under every assignment of its symbols."""

    id: str
    kind: VCKind
    key: object          # guard label, (loop label, candidate index) or loop label
    formula: int
    tm: TermManager = field(repr=False)

    @property
    def assert_id(self) -> str:
        return self.id


@dataclass
class _State:
    env: dict[str, int]
    arrays: dict[str, tuple[int, ...]]
    pc: int

    def copy(self) -> "_State":
        return _State(dict(self.env), dict(self.arrays), self.pc)


def boolean_variables(p: Program) -> set[str]:
    """Scalars and arrays that only ever hold 0 or 1 (a sound over-approximation)."""
    cand: set[str] = set()
    entry = p.entry_proc
    for proc in p.procedures:
        cand.update(proc.sizes())
    cand -= {q.name for q in entry.params}
    defs: list[tuple[str, object]] = []  # (variable, source) pairs
    for proc in p.procedures:
        for s in iter_stmts(proc.body):
            if isinstance(s, Assign):
                defs.append((s.target, s.expr))
            elif isinstance(s, Load):
                defs.append((s.target, Var(s.array)))
            elif isinstance(s, Store):
                defs.append((s.array, s.value))
            elif isinstance(s, Call):
                callee = p.proc(s.callee)
                for q, a in zip(callee.params, s.args):
                    defs.append((q.name, a))
                    if q.is_array:
                        defs.append((a.name, Var(q.name)))
                for t, r in zip(s.targets, callee.returns):
                    defs.append((t, Var(r)))

    def boolish(e) -> bool:
        if isinstance(e, IntLit):
            return e.value in (0, 1)
        if isinstance(e, Var):
            return e.name in cand
        if isinstance(e, UnOp):
            return e.op == "!"
        if isinstance(e, BinOp):
            if e.op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
                return True
            if e.op == "&":
                return boolish(e.left) or boolish(e.right)
            if e.op in ("|", "^"):
                return boolish(e.left) and boolish(e.right)
        return False

    changed = True
    while changed:
        changed = False
        for v, e in defs:
            if v in cand and not boolish(e):
                cand.discard(v)
                changed = True
    return cand


class SymbolicExecutor:
    def __init__(self, pp: ProductProgram, width: int, cfg: VCConfig,
                 active: dict[int, list[int]] | None = None):
        self.pp = pp
        self.p = pp.program
        self.cfg = cfg
        self.tm = TermManager(width, cfg.max_terms)
        self.bools = boolean_variables(self.p)
        self.alias: dict[str, str] = {}
        self.sizes: dict[str, int | None] = {}
        for proc in self.p.procedures:
            self.sizes.update(proc.sizes())
        # candidate indices assumed at each loop (default: every non-dropped one)
        if active is None:
            active = {
                lab: [i for i, c in enumerate(cs) if c.status is not CandidateStatus.DROPPED]
                for lab, cs in pp.candidate_invariants.items()
            }
        self.active = active
        self.obligations: dict[tuple[VCKind, object], int] = {}
        self.inputs: dict[str, object] = {}

    # -- obligations
    def oblige(self, kind: VCKind, key: object, st: _State, cond: int) -> None:
        ob = self.tm.implies(st.pc, cond)
        k = (kind, key)
        prev = self.obligations.get(k)
        self.obligations[k] = ob if prev is None else self.tm.and_(prev, ob)

    def assume(self, st: _State, cond: int) -> None:
        st.pc = self.tm.and_(st.pc, self.tm.truth(cond))

    # -- expressions
    def root(self, name: str) -> str:
        while name in self.alias:
            name = self.alias[name]
        return name

    def expr(self, e: Expr, st: _State) -> int:
        tm = self.tm
        if isinstance(e, IntLit):
            return tm.const(e.value)
        if isinstance(e, Var):
            return st.env[e.name]
        if isinstance(e, UnOp):
            return tm.un(e.op, self.expr(e.operand, st))
        if isinstance(e, BinOp):
            a = self.expr(e.left, st)
            b = self.expr(e.right, st)
            if e.op in ("/", "%"):
                self.assume(st, tm.bin("!=", b, tm.zero))
            return tm.bin(e.op, a, b)
        raise TypeError(f"cannot execute {e!r}")

    def read(self, arr: str, idx: int, st: _State) -> int:
        tm = self.tm
        elems = st.arrays[self.root(arr)]
        if tm.is_const(idx):
            i = tm.value(idx)
            if i >= len(elems):
                st.pc = tm.zero
                return tm.zero
            return elems[i]
        self.assume(st, tm.bin("<", idx, tm.const(len(elems))))
        out = elems[-1]
        for i in range(len(elems) - 2, -1, -1):
            out = tm.ite(tm.bin("==", idx, tm.const(i)), elems[i], out)
        return out

    def write(self, arr: str, idx: int, val: int, st: _State) -> None:
        tm = self.tm
        r = self.root(arr)
        elems = list(st.arrays[r])
        if tm.is_const(idx):
            i = tm.value(idx)
            if i >= len(elems):
                st.pc = tm.zero
                return
            elems[i] = val
        else:
            self.assume(st, tm.bin("<", idx, tm.const(len(elems))))
            for i in range(len(elems)):
                elems[i] = tm.ite(tm.bin("==", idx, tm.const(i)), val, elems[i])
        st.arrays[r] = tuple(elems)

    # -- statements
    def block(self, b: Seq, st: _State) -> _State:
        for s in b.stmts:
            if st.pc == self.tm.zero:
                break
            st = self.stmt(s, st)
        return st

    def stmt(self, s: Stmt, st: _State) -> _State:
        tm = self.tm
        if isinstance(s, Seq):
            return self.block(s, st)
        if isinstance(s, Skip):
            return st
        if isinstance(s, Assign):
            st.env[s.target] = self.expr(s.expr, st)
            return st
        if isinstance(s, Load):
            st.env[s.target] = self.read(s.array, self.expr(s.index, st), st)
            return st
        if isinstance(s, Store):
            self.write(s.array, self.expr(s.index, st), self.expr(s.value, st), st)
            return st
        if isinstance(s, Assert):
            c = tm.truth(self.expr(s.expr, st))
            if s.label in self.pp.guard_index:
                # a guard is never assumed: each source is resolved on its own,
                # so no guard may lean on another one holding
                if self.cfg.guards:
                    self.oblige(VCKind.GUARD, s.label, st, c)
                return st
            self.assume(st, c)
            return st
        if isinstance(s, Assume):
            self.assume(st, self.expr(s.expr, st))
            return st
        if isinstance(s, If):
            c = tm.truth(st.env[s.cond.name])
            if tm.is_const(c):
                return self.block(s.then if tm.value(c) else s.orelse, st)
            st_t = st.copy()
            st_e = st.copy()
            self.assume(st_t, c)
            self.assume(st_e, tm.not_(c))
            st_t = self.block(s.then, st_t)
            st_e = self.block(s.orelse, st_e)
            return self.merge(c, st_t, st_e)
        if isinstance(s, While):
            if self.cfg.mode is Mode.INVARIANT:
                return self.loop_invariant(s, st)
            return self.loop_bounded(s, st)
        if isinstance(s, Call):
            return self.call(s, st)
        raise TypeError(s)  # pragma: no cover

    def merge(self, c: int, a: _State, b: _State) -> _State:
        tm = self.tm
        if a.pc == tm.zero:
            return b
        if b.pc == tm.zero:
            return a
        env = {}
        for k in a.env.keys() | b.env.keys():
            va, vb = a.env.get(k), b.env.get(k)
            if va is None or vb is None:
                env[k] = va if vb is None else vb
            else:
                env[k] = tm.ite(c, va, vb)
        arrays = {}
        for k in a.arrays.keys() | b.arrays.keys():
            xa, xb = a.arrays.get(k), b.arrays.get(k)
            if xa is None or xb is None:
                arrays[k] = xa if xb is None else xb
            elif xa is xb:
                arrays[k] = xa
            else:
                arrays[k] = tuple(tm.ite(c, u, v) for u, v in zip(xa, xb))
        return _State(env, arrays, tm.or_(a.pc, b.pc))

    def call(self, s: Call, st: _State) -> _State:
        callee = self.p.proc(s.callee)
        for q, a in zip(callee.params, s.args):
            if q.is_array:
                self.alias[q.name] = self.root(a.name)
            else:
                st.env[q.name] = self.expr(a, st)
        for d in callee.locals:
            if d.is_array:
                self.alias.pop(d.name, None)
                st.arrays[d.name] = (self.tm.zero,) * d.size
            else:
                st.env[d.name] = self.tm.zero
        st = self.block(callee.body, st)
        vals = [st.env[r] for r in callee.returns]
        for t, v in zip(s.targets, vals):
            st.env[t] = v
        return st

    # -- loops
    def assigned(self, body: Seq) -> tuple[set[str], set[str]]:
        scalars: set[str] = set()
        arrays: set[str] = set()
        for s in iter_stmts(body):
            if isinstance(s, (Assign, Load)):
                scalars.add(s.target)
            elif isinstance(s, Store):
                arrays.add(self.root(s.array))
            elif isinstance(s, Call):
                scalars.update(s.targets)
                callee = self.p.proc(s.callee)
                for q, a in zip(callee.params, s.args):
                    if q.is_array:
                        arrays.add(self.root(a.name))
        return scalars, arrays

    def invariants(self, loop: While) -> list[tuple[int, Expr]]:
        cands = self.pp.candidate_invariants.get(loop.label, [])
        return [(i, cands[i].expr) for i in self.active.get(loop.label, [])]

    def loop_invariant(self, loop: While, st: _State) -> _State:
        tm = self.tm
        invs = self.invariants(loop)
        for i, inv in invs:
            if self.cfg.invariants:
                self.oblige(VCKind.INIT, (loop.label, i), st, tm.truth(self.expr(inv, st)))
            self.assume(st, self.expr(inv, st))
        scalars, arrays = self.assigned(loop.body)
        for v in sorted(scalars):
            st.env[v] = tm.fresh(f"havoc.{v}", v in self.bools)
        for a in sorted(arrays):
            st.arrays[a] = tuple(tm.fresh(f"havoc.{a}[{j}]", a in self.bools)
                                 for j in range(len(st.arrays[a])))
        for _, inv in invs:
            self.assume(st, self.expr(inv, st))
        c = tm.truth(st.env[loop.cond.name])
        body = st.copy()
        self.assume(body, c)
        body = self.block(loop.body, body)
        if self.cfg.invariants:
            for i, inv in invs:
                if body.pc != tm.zero:
                    self.oblige(VCKind.INDUCTIVE, (loop.label, i), body,
                                tm.truth(self.expr(inv, body)))
        self.assume(st, tm.not_(c))
        return st

    def loop_bounded(self, loop: While, st: _State) -> _State:
        tm = self.tm
        for _ in range(self.cfg.unroll):
            c = tm.truth(st.env[loop.cond.name])
            if c == tm.zero or st.pc == tm.zero:
                return st
            body = st.copy()
            self.assume(body, c)
            body = self.block(loop.body, body)
            exit_ = st
            self.assume(exit_, tm.not_(c))
            st = self.merge(c, body, exit_)
        c = tm.truth(st.env[loop.cond.name])
        self.oblige(VCKind.UNWIND, loop.label, st, tm.not_(c))
        self.assume(st, tm.not_(c))
        return st

    # -- driver
    def initial_state(self) -> _State:
        tm = self.tm
        entry = self.p.entry_proc
        st = _State({}, {}, tm.one)
        for q in entry.params:
            if q.is_array:
                st.arrays[q.name] = tuple(tm.sym(f"{q.name}[{j}]") for j in range(q.size))
            else:
                st.env[q.name] = tm.sym(q.name)
            self.inputs[q.name] = q
        for d in entry.locals:
            if d.is_array:
                st.arrays[d.name] = (tm.zero,) * d.size
            else:
                st.env[d.name] = tm.zero
        return st

    def run(self) -> list[VC]:
        st = self.initial_state()
        self.block(self.p.entry_proc.body, st)
        # obligations never reached on any path hold trivially
        if self.cfg.guards:
            for lab in self.pp.guard_index:
                self.obligations.setdefault((VCKind.GUARD, lab), self.tm.one)
        if self.cfg.mode is Mode.INVARIANT and self.cfg.invariants:
            for lab, idxs in self.active.items():
                for i in idxs:
                    self.obligations.setdefault((VCKind.INIT, (lab, i)), self.tm.one)
                    self.obligations.setdefault((VCKind.INDUCTIVE, (lab, i)), self.tm.one)
        out: list[VC] = []
        for (kind, key), f in sorted(self.obligations.items(), key=lambda kv: _vc_id(*kv[0])):
            out.append(VC(_vc_id(kind, key), kind, key, f, self.tm))
        return out


def _vc_id(kind: VCKind, key) -> str:
    if kind is VCKind.GUARD:
        return f"{key}"
    if kind is VCKind.UNWIND:
        return f"unwind_{key}"
    lab, i = key
    return f"{'init' if kind is VCKind.INIT else 'ind'}_{lab}_{i}"


def gen_vcs(pp: ProductProgram, width: int = 8, cfg: VCConfig | None = None,
            active: dict[int, list[int]] | None = None) -> list[VC]:
    """Proof obligations of ``pp`` (one per guard, candidate and loop as applicable)."""
    return SymbolicExecutor(pp, width, cfg or VCConfig(), active).run()
