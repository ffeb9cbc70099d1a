"""Reference interpreter with the branch/loop/load/store leakage model."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..ast import (
    Assert, Assign, Assume, BinOp, Call, Expr, If, IntLit, Load, Procedure,
    Program, Seq, Skip, Stmt, Store, UnOp, Var, While,
)
from . import ops

DEFAULT_FUEL = 1 << 20


class EventKind(str, enum.Enum):
    BRANCH = "branch"
    LOOP = "loop"
    LOAD = "load"
    STORE = "store"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    label: int
    value: int

    def __str__(self) -> str:
        return f"{self.label}:{self.kind.value}={self.value}"


Trace = tuple[Event, ...]


class Status(str, enum.Enum):
    COMPLETED = "completed"
    STUCK = "stuck"        # failed assert, or division by zero
    BLOCKED = "blocked"    # false assume: no transition exists
    FUEL = "fuel_exhausted"


@dataclass(frozen=True)
class RunOutcome:
    status: Status
    trace: Trace
    returns: tuple[int, ...] = ()
    label: int | None = None  # statement that got stuck/blocked
    steps: int = 0

    @property
    def complete(self) -> bool:
        return self.status is Status.COMPLETED


class InputError(ValueError):
    pass


class _Halt(Exception):
    def __init__(self, status: Status, label: int | None):
        self.status = status
        self.label = label


Hook = Callable[[int, Stmt, dict], None]


def bind_inputs(proc: Procedure, inputs: Mapping[str, object], width: int) -> dict:
    """Validate an input binding against the entry signature."""
    m = ops.mask(width)
    frame: dict = {}
    names = {p.name for p in proc.params}
    extra = set(inputs) - names
    if extra:
        raise InputError(f"unknown inputs: {sorted(extra)}")
    for p in proc.params:
        if p.name not in inputs:
            raise InputError(f"missing input {p.name!r}")
        v = inputs[p.name]
        if p.is_array:
            if isinstance(v, int) or len(v) != p.size:
                raise InputError(f"input {p.name!r} must be a list of {p.size} values")
            frame[p.name] = [int(x) & m for x in v]
        else:
            if not isinstance(v, int):
                raise InputError(f"input {p.name!r} must be a scalar")
            frame[p.name] = v & m
    return frame


class Interpreter:
    def __init__(self, program: Program, width: int = 8, fuel: int = DEFAULT_FUEL,
                 hook: Hook | None = None):
        if width not in ops.WIDTHS:
            raise ValueError(f"width must be one of {ops.WIDTHS}")
        if fuel <= 0:
            raise ValueError("fuel must be positive")
        self.program = program
        self.width = width
        self.mask = ops.mask(width)
        self.fuel = fuel
        self.hook = hook
        self.trace: list[Event] = []
        self.steps = 0

    def run(self, inputs: Mapping[str, object]) -> RunOutcome:
        entry = self.program.entry_proc
        frame = bind_inputs(entry, inputs, self.width)
        self._init_locals(entry, frame)
        try:
            self._block(entry.body, frame)
        except _Halt as h:
            return RunOutcome(h.status, tuple(self.trace), (), h.label, self.steps)
        rets = tuple(frame[r] for r in entry.returns)
        return RunOutcome(Status.COMPLETED, tuple(self.trace), rets, None, self.steps)

    # -- helpers
    @staticmethod
    def _init_locals(proc: Procedure, frame: dict) -> None:
        for d in proc.locals:
            frame[d.name] = [0] * d.size if d.is_array else 0

    def _tick(self, s: Stmt, frame: dict) -> None:
        if self.steps >= self.fuel:
            raise _Halt(Status.FUEL, s.label)
        self.steps += 1
        if self.hook is not None:
            self.hook(s.label, s, frame)

    def eval(self, e: Expr, frame: dict, label: int) -> int:
        if isinstance(e, IntLit):
            return e.value & self.mask
        if isinstance(e, Var):
            return frame[e.name]
        if isinstance(e, BinOp):
            a = self.eval(e.left, frame, label)
            b = self.eval(e.right, frame, label)
            try:
                return ops.binop(e.op, a, b, self.width)
            except ops.DivisionByZero:
                raise _Halt(Status.STUCK, label) from None
        if isinstance(e, UnOp):
            return ops.unop(e.op, self.eval(e.operand, frame, label), self.width)
        raise TypeError(f"cannot evaluate {e!r}; normalize the program first")

    def _index(self, arr: list, idx: int, label: int) -> int:
        # bounds asserts normally fire first; this guards hand-built programs
        if idx >= len(arr):
            raise _Halt(Status.STUCK, label)
        return idx

    def _block(self, b: Seq, frame: dict) -> None:
        for s in b.stmts:
            self._stmt(s, frame)

    def _stmt(self, s: Stmt, frame: dict) -> None:
        if isinstance(s, Seq):
            self._block(s, frame)
            return
        if isinstance(s, While):
            self._while(s, frame)
            return
        self._tick(s, frame)
        if isinstance(s, Skip):
            pass
        elif isinstance(s, Assign):
            frame[s.target] = self.eval(s.expr, frame, s.label)
        elif isinstance(s, Load):
            idx = self.eval(s.index, frame, s.label)
            self.trace.append(Event(EventKind.LOAD, s.label, idx))
            arr = frame[s.array]
            frame[s.target] = arr[self._index(arr, idx, s.label)]
        elif isinstance(s, Store):
            idx = self.eval(s.index, frame, s.label)
            self.trace.append(Event(EventKind.STORE, s.label, idx))
            arr = frame[s.array]
            arr[self._index(arr, idx, s.label)] = self.eval(s.value, frame, s.label)
        elif isinstance(s, Assert):
            if self.eval(s.expr, frame, s.label) == 0:
                raise _Halt(Status.STUCK, s.label)
        elif isinstance(s, Assume):
            if self.eval(s.expr, frame, s.label) == 0:
                raise _Halt(Status.BLOCKED, s.label)
        elif isinstance(s, If):
            c = int(self.eval(s.cond, frame, s.label) != 0)
            self.trace.append(Event(EventKind.BRANCH, s.label, c))
            self._block(s.then if c else s.orelse, frame)
        elif isinstance(s, Call):
            self._call(s, frame)
        else:  # pragma: no cover
            raise TypeError(s)

    def _while(self, s: While, frame: dict) -> None:
        while True:
            self._tick(s, frame)
            c = int(self.eval(s.cond, frame, s.label) != 0)
            self.trace.append(Event(EventKind.LOOP, s.label, c))
            if not c:
                return
            self._block(s.body, frame)

    def _call(self, s: Call, frame: dict) -> None:
        callee = self.program.proc(s.callee)
        inner: dict = {}
        for prm, arg in zip(callee.params, s.args):
            if prm.is_array:
                inner[prm.name] = frame[arg.name]  # by reference
            else:
                inner[prm.name] = self.eval(arg, frame, s.label)
        self._init_locals(callee, inner)
        self._block(callee.body, inner)
        for t, r in zip(s.targets, callee.returns):
            frame[t] = inner[r]


def run(program: Program, inputs: Mapping[str, object], width: int = 8,
        fuel: int = DEFAULT_FUEL, hook: Hook | None = None) -> RunOutcome:
    """Execute ``program`` on ``inputs`` and collect its observation trace."""
    return Interpreter(program, width, fuel, hook).run(inputs)


def traces_prefix_equal(t1: Sequence[Event], t2: Sequence[Event]) -> int | None:
    """Index of the first differing event, or None when the traces are equal."""
    for i, (a, b) in enumerate(zip(t1, t2)):
        if a != b:
            return i
    if len(t1) != len(t2):
        return min(len(t1), len(t2))
    return None


def format_trace(trace: Sequence[Event]) -> str:
    return "\n".join(str(e) for e in trace)
