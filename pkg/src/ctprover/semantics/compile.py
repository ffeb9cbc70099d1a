"""Compile a normalized program into flat bytecode for the batch kernels.

Calls are inlined. Every scalar and array element lives in one slot of a
per-run memory vector; constants occupy pre-initialized slots. An
instruction is a row ``(op, a, b, c, d, label, tick)`` of an int64 matrix.
The ``tick`` column charges one unit of fuel, placed so that fuel is spent
exactly where the reference interpreter spends it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ast import (
    Assert, Assign, Assume, BinOp, BINARY_OPS, Call, Expr, If, IntLit, Load,
    Procedure, Program, Seq, Skip, Stmt, Store, UnOp, UNARY_OPS, Var, While,
)
from . import ops

NOP, MOV, BIN, UN, LOAD, STORE, BR, LOOP, JMP, ASSERT, ASSUME, HALT, ITE = range(13)
OPNAMES = ("nop", "mov", "bin", "un", "load", "store", "br", "loop", "jmp",
           "assert", "assume", "halt", "ite")

# BIN sub-op: index into BINARY_OPS; adding TOTAL selects total division
TOTAL = 64
BIN_CODE = {op: i for i, op in enumerate(BINARY_OPS)}
UN_CODE = {op: i for i, op in enumerate(UNARY_OPS)}

# kernel status codes
ST_RUNNING, ST_COMPLETED, ST_STUCK, ST_BLOCKED, ST_FUEL = range(5)

# event kinds folded into the trace hash
EV_BRANCH, EV_LOOP, EV_LOAD, EV_STORE = 1, 2, 3, 4

DEFAULT_MAX_CODE = 200_000


class InlineBlowup(RuntimeError):
    """Raised when inlining calls exceeds the configured code-size cap."""


@dataclass
class InputSlot:
    name: str
    base: int
    length: int  # 1 for scalars
    is_array: bool


@dataclass
class Compiled:
    code: np.ndarray            # (n, 7) int64
    init: np.ndarray            # (nslots,) uint64 initial memory
    inputs: list[InputSlot]
    returns: list[int]          # slots of the entry's return variables
    width: int
    slot_names: list[str] = field(default_factory=list)

    @property
    def nslots(self) -> int:
        return int(self.init.shape[0])

    def input_bits(self) -> int:
        return sum(s.length for s in self.inputs) * self.width

    def memory(self, rows: int) -> np.ndarray:
        return np.tile(self.init, (rows, 1))

    def disassemble(self) -> str:
        lines = []
        for i, row in enumerate(self.code):
            op, a, b, c, d, lab, tick = (int(v) for v in row)
            lines.append(f"{i:4d} {OPNAMES[op]:6s} {a} {b} {c} {d}  @{lab}{' *' if tick else ''}")
        return "\n".join(lines)


class _Builder:
    def __init__(self, program: Program, width: int, max_code: int):
        self.program = program
        self.width = width
        self.mask = ops.mask(width)
        self.max_code = max_code
        self.code: list[list[int]] = []
        self.init: list[int] = []
        self.names: list[str] = []
        self.consts: dict[int, int] = {}
        self.pending_tick = False
        self.cur_label = -1

    # -- slots
    def alloc(self, name: str, n: int = 1) -> int:
        base = len(self.init)
        self.init.extend([0] * n)
        self.names.extend([name] if n == 1 else [f"{name}[{i}]" for i in range(n)])
        return base

    def const(self, v: int) -> int:
        v &= self.mask
        if v not in self.consts:
            slot = self.alloc(f"#{v}")
            self.init[slot] = v
            self.consts[v] = slot
        return self.consts[v]

    # -- emission
    def emit(self, op: int, a: int = 0, b: int = 0, c: int = 0, d: int = 0) -> int:
        if len(self.code) >= self.max_code:
            raise InlineBlowup(f"compiled code exceeds {self.max_code} instructions")
        tick = 1 if self.pending_tick else 0
        self.pending_tick = False
        self.code.append([op, a, b, c, d, self.cur_label, tick])
        return len(self.code) - 1

    def begin(self, label: int) -> None:
        self.cur_label = label
        self.pending_tick = True

    def end(self) -> None:
        if self.pending_tick:
            self.emit(NOP)

    # -- expressions
    def atom(self, e: Expr, env: dict) -> int:
        if isinstance(e, IntLit):
            return self.const(e.value)
        if isinstance(e, Var):
            return env[e.name]
        raise TypeError(f"expected an atom, got {e!r}")

    def expr_into(self, dst: int, e: Expr, env: dict) -> None:
        if isinstance(e, BinOp):
            self.emit(BIN, dst, self.atom(e.left, env), self.atom(e.right, env), BIN_CODE[e.op])
        elif isinstance(e, UnOp):
            self.emit(UN, dst, self.atom(e.operand, env), 0, UN_CODE[e.op])
        else:
            self.emit(MOV, dst, self.atom(e, env))

    def expr_slot(self, e: Expr, env: dict, scratch: int) -> int:
        if isinstance(e, (IntLit, Var)):
            return self.atom(e, env)
        self.expr_into(scratch, e, env)
        return scratch

    # -- statements
    def block(self, b: Seq, env: dict, scratch: int) -> None:
        for s in b.stmts:
            self.stmt(s, env, scratch)

    def stmt(self, s: Stmt, env: dict, scratch: int) -> None:
        if isinstance(s, Seq):
            self.block(s, env, scratch)
            return
        if isinstance(s, While):
            self.begin(s.label)
            head = self.emit(LOOP, env[s.cond.name])
            self.block(s.body, env, scratch)
            self.cur_label = s.label
            self.emit(JMP, 0, head)
            self.code[head][2] = len(self.code)
            return
        self.begin(s.label)
        if isinstance(s, Skip):
            pass
        elif isinstance(s, Assign):
            self.expr_into(env[s.target], s.expr, env)
        elif isinstance(s, Load):
            base, length = env[s.array]
            self.emit(LOAD, env[s.target], base, self.atom(s.index, env), length)
        elif isinstance(s, Store):
            base, length = env[s.array]
            self.emit(STORE, base, self.atom(s.index, env), self.atom(s.value, env), length)
        elif isinstance(s, (Assert, Assume)):
            slot = self.expr_slot(s.expr, env, scratch)
            self.emit(ASSERT if isinstance(s, Assert) else ASSUME, slot)
        elif isinstance(s, If):
            br = self.emit(BR, env[s.cond.name])
            self.block(s.then, env, scratch)
            self.cur_label = s.label
            jmp = self.emit(JMP)
            self.code[br][2] = len(self.code)
            self.block(s.orelse, env, scratch)
            self.code[jmp][2] = len(self.code)
            return
        elif isinstance(s, Call):
            self.call(s, env, scratch)
            return
        else:  # pragma: no cover
            raise TypeError(s)
        self.end()

    def call(self, s: Call, env: dict, scratch: int) -> None:
        callee = self.program.proc(s.callee)
        inner = self.frame(callee, arrays_from={
            prm.name: env[a.name] for prm, a in zip(callee.params, s.args) if prm.is_array})
        zero = self.const(0)
        for prm, a in zip(callee.params, s.args):
            if not prm.is_array:
                self.emit(MOV, inner[prm.name], self.atom(a, env))
        for d in callee.locals:
            if d.is_array:
                base, length = inner[d.name]
                for i in range(length):
                    self.emit(MOV, base + i, zero)
            else:
                self.emit(MOV, inner[d.name], zero)
        self.end()
        self.block(callee.body, inner, inner["$scratch"])
        self.cur_label = s.label
        for t, r in zip(s.targets, callee.returns):
            self.emit(MOV, env[t], inner[r])

    def frame(self, proc: Procedure, arrays_from: dict | None = None) -> dict:
        env: dict = {}
        for prm in proc.params:
            if prm.is_array:
                if arrays_from is not None:
                    env[prm.name] = arrays_from[prm.name]
                else:
                    env[prm.name] = (self.alloc(prm.name, prm.size), prm.size)
            else:
                env[prm.name] = self.alloc(prm.name)
        for d in proc.locals:
            env[d.name] = (self.alloc(d.name, d.size), d.size) if d.is_array else self.alloc(d.name)
        env["$scratch"] = self.alloc(f"{proc.name}$scratch")
        return env


def compile_program(program: Program, width: int = 8,
                    max_code: int = DEFAULT_MAX_CODE) -> Compiled:
    """Inline and compile ``program`` (which must be normalized)."""
    if width not in ops.WIDTHS:
        raise ValueError(f"width must be one of {ops.WIDTHS}")
    b = _Builder(program, width, max_code)
    entry = program.entry_proc
    env = b.frame(entry)
    inputs = []
    for prm in entry.params:
        if prm.is_array:
            base, length = env[prm.name]
            inputs.append(InputSlot(prm.name, base, length, True))
        else:
            inputs.append(InputSlot(prm.name, env[prm.name], 1, False))
    b.block(entry.body, env, env["$scratch"])
    b.cur_label = -1
    b.emit(HALT)
    return Compiled(
        code=np.asarray(b.code, dtype=np.int64).reshape(-1, 7),
        init=np.asarray(b.init, dtype=np.uint64),
        inputs=inputs,
        returns=[env[r] for r in entry.returns],
        width=width,
        slot_names=b.names,
    )


def fill_inputs(c: Compiled, mem: np.ndarray, values: np.ndarray) -> None:
    """Write an (rows, n_input_elements) matrix of input values into memory."""
    col = 0
    for s in c.inputs:
        mem[:, s.base:s.base + s.length] = values[:, col:col + s.length]
        col += s.length


def inputs_to_vector(c: Compiled, binding: dict) -> list[int]:
    out: list[int] = []
    for s in c.inputs:
        v = binding[s.name]
        out.extend(int(x) for x in v) if s.is_array else out.append(int(v))
    return out


def vector_to_inputs(c: Compiled, vec) -> dict:
    out: dict = {}
    col = 0
    for s in c.inputs:
        vals = [int(x) for x in vec[col:col + s.length]]
        out[s.name] = vals if s.is_array else vals[0]
        col += s.length
    return out
