"""Normalization to three-address form with unique names and bounds checks."""

from __future__ import annotations

from dataclasses import replace

from ..ast import (
    ArrayRead, Assert, Assign, Assume, Atom, BinOp, Call, Decl, Expr, If, IntLit,
    Load, Param, Procedure, Program, Seq, Skip, Stmt, Store, UnOp, Var, While,
    iter_stmts, map_vars, relabel,
)
from .errors import (
    ArityMismatchError, ArrayAliasError, FrontendError, RecursionRejectedError,
    TypeMismatchError, UnknownIdentifierError,
)


def call_order(p: Program) -> list[str]:
    """Procedures reachable from the entry, callees before callers.

    Raises RecursionRejectedError on a cycle and UnknownIdentifierError on a
    call to an undefined procedure.
    """
    names = {proc.name for proc in p.procedures}
    state: dict[str, int] = {}
    order: list[str] = []

    def visit(name: str, stack: list[str]) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            cycle = " -> ".join(stack[stack.index(name):] + [name])
            raise RecursionRejectedError(f"recursive call chain {cycle}")
        state[name] = 1
        for s in iter_stmts(p.proc(name).body):
            if isinstance(s, Call):
                if s.callee not in names:
                    raise UnknownIdentifierError(f"call to undefined procedure {s.callee!r}")
                visit(s.callee, stack + [name])
        state[name] = 2
        order.append(name)

    visit(p.entry, [])
    for proc in p.procedures:  # unreachable procedures are still checked
        visit(proc.name, [])
    return order


def bounds_assert(index: Atom, length: int) -> Assert:
    return Assert(BinOp("<", index, IntLit(length)))


class _Names:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.counter = 0

    def temp(self) -> str:
        while True:
            self.counter += 1
            name = f"$t{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def fresh_like(self, base: str) -> str:
        k = 1
        while f"{base}${k}" in self.taken:
            k += 1
        name = f"{base}${k}"
        self.taken.add(name)
        return name


def _all_names(p: Program) -> set[str]:
    out: set[str] = set()
    for proc in p.procedures:
        out.update(proc.sizes())
    return out


def _rename_unique(p: Program, names: _Names) -> Program:
    """Rename identifiers that clash with an earlier procedure's identifiers."""
    order = [p.entry] + [q.name for q in p.procedures if q.name != p.entry]
    seen: set[str] = set()
    renamed: dict[str, Procedure] = {}
    for pname in order:
        proc = p.proc(pname)
        mapping: dict[str, str] = {}
        local_seen: set[str] = set()
        for n in [q.name for q in proc.params] + [d.name for d in proc.locals]:
            if n in local_seen:
                raise FrontendError(f"{n!r} declared twice in {pname!r}")
            local_seen.add(n)
            mapping[n] = names.fresh_like(n) if n in seen else n
        seen.update(mapping.values())
        if all(k == v for k, v in mapping.items()):
            renamed[pname] = proc
            continue
        renamed[pname] = _rename_proc(proc, lambda n, m=mapping: m.get(n, n))
    return replace(p, procedures=tuple(renamed[q.name] for q in p.procedures))


def _rename_proc(proc: Procedure, f) -> Procedure:
    def go(s: Stmt) -> Stmt:
        if isinstance(s, Seq):
            return Seq(tuple(go(c) for c in s.stmts))
        if isinstance(s, Assign):
            return replace(s, target=f(s.target), expr=map_vars(s.expr, f))
        if isinstance(s, Load):
            return replace(s, target=f(s.target), array=f(s.array), index=map_vars(s.index, f))
        if isinstance(s, Store):
            return replace(s, array=f(s.array), index=map_vars(s.index, f), value=map_vars(s.value, f))
        if isinstance(s, (Assert, Assume)):
            return replace(s, expr=map_vars(s.expr, f))
        if isinstance(s, If):
            return replace(s, cond=map_vars(s.cond, f), then=go(s.then), orelse=go(s.orelse))
        if isinstance(s, While):
            return replace(s, cond=map_vars(s.cond, f), body=go(s.body),
                           invariants=tuple(map_vars(i, f) for i in s.invariants))
        if isinstance(s, Call):
            return replace(s, targets=tuple(f(t) for t in s.targets),
                           args=tuple(map_vars(a, f) for a in s.args))
        return s

    return Procedure(
        proc.name,
        tuple(replace(q, name=f(q.name)) for q in proc.params),
        tuple(replace(d, name=f(d.name)) for d in proc.locals),
        go(proc.body),
        tuple(f(r) for r in proc.returns),
    )


class _ProcNormalizer:
    def __init__(self, prog: Program, proc: Procedure, names: _Names):
        self.prog = prog
        self.proc = proc
        self.names = names
        self.sizes = proc.sizes()
        self.temps: list[str] = []

    # -- identifier checks
    def scalar(self, name: str) -> str:
        if name not in self.sizes:
            raise UnknownIdentifierError(f"unknown identifier {name!r} in {self.proc.name!r}")
        if self.sizes[name] is not None:
            raise TypeMismatchError(f"array {name!r} used as a scalar in {self.proc.name!r}")
        return name

    def array(self, name: str) -> int:
        if name not in self.sizes:
            raise UnknownIdentifierError(f"unknown array {name!r} in {self.proc.name!r}")
        size = self.sizes[name]
        if size is None:
            raise TypeMismatchError(f"scalar {name!r} indexed in {self.proc.name!r}")
        return size

    def temp(self) -> str:
        t = self.names.temp()
        self.temps.append(t)
        self.sizes[t] = None
        return t

    # -- expressions
    def atom(self, e: Expr, out: list[Stmt]) -> Atom:
        if isinstance(e, IntLit):
            return e
        if isinstance(e, Var):
            return Var(self.scalar(e.name))
        t = self.temp()
        self.assign_to(t, e, out)
        return Var(t)

    def flat(self, e: Expr, out: list[Stmt]) -> Expr:
        """Reduce ``e`` to an atom or one operator over atoms."""
        if isinstance(e, BinOp):
            return BinOp(e.op, self.atom(e.left, out), self.atom(e.right, out))
        if isinstance(e, UnOp):
            return UnOp(e.op, self.atom(e.operand, out))
        if isinstance(e, ArrayRead):
            return self.atom(e, out)
        return self.atom(e, out)

    def assign_to(self, target: str, e: Expr, out: list[Stmt]) -> None:
        if isinstance(e, ArrayRead):
            self.load(target, e.array, e.index, out)
        else:
            out.append(Assign(target, self.flat(e, out)))

    def load(self, target: str, arr: str, index: Expr, out: list[Stmt]) -> None:
        size = self.array(arr)
        idx = self.atom(index, out)
        self.bounds(idx, size, out)
        out.append(Load(target, arr, idx))

    @staticmethod
    def bounds(idx: Atom, size: int, out: list[Stmt]) -> None:
        chk = bounds_assert(idx, size)
        if not (out and out[-1] == chk):
            out.append(chk)

    def cond_var(self, e: Expr, out: list[Stmt]) -> Var:
        if isinstance(e, Var):
            return Var(self.scalar(e.name))
        t = self.temp()
        self.assign_to(t, e, out)
        return Var(t)

    # -- statements
    def block(self, b: Seq) -> Seq:
        out: list[Stmt] = []
        for s in b.stmts:
            self.stmt(s, out)
        if not out:
            out.append(Skip())
        return Seq(tuple(out))

    def stmt(self, s: Stmt, out: list[Stmt]) -> None:
        if isinstance(s, Seq):
            for c in s.stmts:
                self.stmt(c, out)
        elif isinstance(s, Skip):
            out.append(Skip())
        elif isinstance(s, Assign):
            self.assign_to(self.scalar(s.target), s.expr, out)
        elif isinstance(s, Load):
            self.load(self.scalar(s.target), s.array, s.index, out)
        elif isinstance(s, Store):
            size = self.array(s.array)
            idx = self.atom(s.index, out)
            val = self.atom(s.value, out)
            self.bounds(idx, size, out)
            out.append(Store(s.array, idx, val))
        elif isinstance(s, (Assert, Assume)):
            out.append(type(s)(self.flat(s.expr, out)))
        elif isinstance(s, If):
            c = self.cond_var(s.cond, out)
            out.append(If(c, self.block(s.then), self.block(s.orelse)))
        elif isinstance(s, While):
            if isinstance(s.cond, Var):
                c = Var(self.scalar(s.cond.name))
                body = self.block(s.body)
            else:
                c = self.cond_var(s.cond, out)
                tail: list[Stmt] = []
                self.assign_to(c.name, s.cond, tail)
                body = self.block(Seq(s.body.stmts + tuple(tail)))
            out.append(While(c, body, s.invariants))
        elif isinstance(s, Call):
            self.call(s, out)
        else:  # pragma: no cover
            raise TypeError(s)

    def call(self, s: Call, out: list[Stmt]) -> None:
        callee = self.prog.proc(s.callee)
        if len(s.args) != len(callee.params):
            raise ArityMismatchError(
                f"{s.callee} expects {len(callee.params)} arguments, got {len(s.args)}")
        if len(s.targets) != len(callee.returns):
            raise ArityMismatchError(
                f"{s.callee} returns {len(callee.returns)} values, call binds {len(s.targets)}")
        args: list[Expr] = []
        arrays_passed: list[str] = []
        for a, prm in zip(s.args, callee.params):
            if prm.is_array:
                if not isinstance(a, Var):
                    raise TypeMismatchError(f"argument for array parameter {prm.name!r} must be an array")
                size = self.array(a.name)
                if size != prm.size:
                    raise TypeMismatchError(
                        f"array {a.name!r} has length {size}, {s.callee}.{prm.name} expects {prm.size}")
                if a.name in arrays_passed:
                    raise ArrayAliasError(f"array {a.name!r} passed twice to {s.callee}")
                arrays_passed.append(a.name)
                args.append(a)
            else:
                atom = self.atom(a, out)
                if isinstance(atom, IntLit):
                    t = self.temp()
                    out.append(Assign(t, atom))
                    atom = Var(t)
                args.append(atom)
        targets = tuple(self.scalar(t) for t in s.targets)
        if len(set(targets)) != len(targets):
            raise FrontendError(f"call to {s.callee} binds a variable twice")
        out.append(Call(targets, s.callee, tuple(args)))

    def run(self) -> Procedure:
        for r in self.proc.returns:
            if r not in self.sizes:
                raise UnknownIdentifierError(f"unknown return variable {r!r} in {self.proc.name!r}")
            if self.sizes[r] is not None:
                raise TypeMismatchError(f"array {r!r} cannot be returned from {self.proc.name!r}")
        for prm in self.proc.params:
            if prm.is_array and prm.size <= 0:
                raise TypeMismatchError(f"array {prm.name!r} needs a positive length")
        body = self.block(self.proc.body)
        locals_ = self.proc.locals + tuple(Decl(t) for t in self.temps)
        return Procedure(self.proc.name, self.proc.params, locals_, body, self.proc.returns)


def normalize(p: Program) -> Program:
    """Return the normalized, relabeled form of ``p``.

    The result has flat three-address statements, variable conditions,
    globally unique identifiers and a bounds assert before every load/store.
    """
    call_order(p)
    names = _Names(_all_names(p))
    p = _rename_unique(p, names)
    procs = tuple(_ProcNormalizer(p, proc, names).run() for proc in p.procedures)
    return relabel(replace(p, procedures=procs))


def check_normalized(p: Program) -> list[str]:
    """List violations of the normal-form invariants (empty when normalized)."""
    from ..ast import is_flat

    problems: list[str] = []
    seen: dict[str, str] = {}

    def block(b: Seq, sizes: dict) -> None:
        prev: Stmt | None = None
        for s in b.stmts:
            if isinstance(s, (If, While)) and not isinstance(s.cond, Var):
                problems.append(f"label {s.label}: condition is not a variable")
            if isinstance(s, Assign) and not is_flat(s.expr):
                problems.append(f"label {s.label}: non-flat assignment")
            if isinstance(s, (Assert, Assume)) and not is_flat(s.expr):
                problems.append(f"label {s.label}: non-flat assertion")
            if isinstance(s, (Load, Store)):
                if not isinstance(s.index, (Var, IntLit)):
                    problems.append(f"label {s.label}: non-atomic index")
                if prev != bounds_assert(s.index, sizes.get(s.array)):
                    problems.append(f"label {s.label}: missing bounds assert")
            if isinstance(s, Store) and not isinstance(s.value, (Var, IntLit)):
                problems.append(f"label {s.label}: non-atomic stored value")
            if isinstance(s, If):
                block(s.then, sizes)
                block(s.orelse, sizes)
            elif isinstance(s, While):
                block(s.body, sizes)
            prev = s

    for proc in p.procedures:
        for n in proc.sizes():
            if n in seen:
                problems.append(f"{n!r} declared in both {seen[n]} and {proc.name}")
            seen[n] = proc.name
        block(proc.body, proc.sizes())
    labels = [s.label for proc in p.procedures for s in iter_stmts(proc.body)]
    if len(set(labels)) != len(labels) or any(lab < 0 for lab in labels):
        problems.append("labels are not unique non-negative integers")
    return problems
