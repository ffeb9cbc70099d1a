"""Deciding verification conditions: exhaustive enumeration or an SMT solver."""

from __future__ import annotations

import enum
import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np

from ..semantics.compile import (
    ASSERT, BIN, BIN_CODE, HALT, ITE, TOTAL, UN, UN_CODE, Compiled, InputSlot,
)
from ..semantics.kernels import first_violation
from .symexec import VC
from .terms import BIN as T_BIN, CONST, ITE as T_ITE, SYM, UN as T_UN, TermManager


class VerdictKind(str, enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


class UnknownReason(str, enum.Enum):
    SOLVER_UNKNOWN = "SolverUnknown"
    UNWIND_BOUND_HIT = "UnwindBoundHit"
    TIMEOUT = "Timeout"
    ENUMERATION_CAP = "EnumerationCap"
    INLINE_BLOWUP = "InlineBlowup"
    SPURIOUS = "SpuriousWitness"
    BACKEND_ERROR = "BackendError"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    model: dict[str, int] | None = None
    reason: UnknownReason | None = None
    detail: str = ""

    @property
    def valid(self) -> bool:
        return self.kind is VerdictKind.VALID

    @property
    def invalid(self) -> bool:
        return self.kind is VerdictKind.INVALID

    @staticmethod
    def unknown(reason: UnknownReason, detail: str = "") -> "Verdict":
        return Verdict(VerdictKind.UNKNOWN, None, reason, detail)


VALID = Verdict(VerdictKind.VALID)


class SolverSpawnError(RuntimeError):
    pass


class ModelParseError(ValueError):
    pass


# -- enumeration ---------------------------------------------------------------

def compile_formula(tm: TermManager, formula: int) -> tuple[Compiled, list[int]]:
    """Straight-line bytecode asserting ``formula``; inputs are its symbols."""
    order = tm.cone(formula)
    slot = {n: i for i, n in enumerate(order)}
    init = np.zeros(len(order) + 1, dtype=np.uint64)
    code: list[list[int]] = []
    syms: list[int] = []
    for n in order:
        node = tm.nodes[n]
        k = node[0]
        d = slot[n]
        if k == CONST:
            init[d] = node[1]
        elif k == SYM:
            syms.append(n)
        elif k == T_BIN:
            code.append([BIN, d, slot[node[2]], slot[node[3]], BIN_CODE[node[1]] + TOTAL, -1, 0])
        elif k == T_UN:
            code.append([UN, d, slot[node[2]], 0, UN_CODE[node[1]], -1, 0])
        else:
            code.append([ITE, d, slot[node[1]], slot[node[2]], slot[node[3]], -1, 0])
    code.append([ASSERT, slot[formula], 0, 0, 0, -1, 0])
    code.append([HALT, 0, 0, 0, 0, -1, 0])
    syms.sort()
    inputs = [InputSlot(tm.symbols[s].name, slot[s], 1, False) for s in syms]
    c = Compiled(np.asarray(code, dtype=np.int64), init, inputs, [], tm.width)
    return c, syms


@dataclass
class EnumerateBackend:
    """Decide a VC by evaluating it on every assignment of its symbols."""

    cap: int = 1 << 20             # exhaustive up to this many assignments
    samples: int = 1 << 15         # random assignments tried beyond the cap
    seed: int = 7
    chunk: int = 1 << 16
    use_numba: bool | None = None
    name: str = field(default="enum", init=False)

    def check(self, vc: VC) -> Verdict:
        tm = vc.tm
        if tm.is_const(vc.formula):
            return VALID if tm.value(vc.formula) else Verdict(VerdictKind.INVALID, {})
        c, syms = compile_formula(tm, vc.formula)
        doms = [2 if tm.symbols[s].boolean else (1 << tm.width) for s in syms]
        total = 1
        for d in doms:
            total *= d
        names = [tm.symbols[s].name for s in syms]
        if total <= self.cap:
            for lo in range(0, total, self.chunk):
                hi = min(total, lo + self.chunk)
                rows = _decode(np.arange(lo, hi, dtype=np.uint64), doms)
                bad = self._first_failure(c, rows)
                if bad is not None:
                    return Verdict(VerdictKind.INVALID, dict(zip(names, map(int, bad))))
            return VALID
        rng = np.random.default_rng(self.seed)
        for lo in range(0, self.samples, self.chunk):
            n = min(self.chunk, self.samples - lo)
            rows = np.stack([rng.integers(0, d, size=n, dtype=np.uint64) for d in doms], axis=1)
            bad = self._first_failure(c, rows)
            if bad is not None:
                return Verdict(VerdictKind.INVALID, dict(zip(names, map(int, bad))))
        return Verdict.unknown(UnknownReason.ENUMERATION_CAP,
                               f"{total} assignments exceed the cap of {self.cap}")

    def _first_failure(self, c: Compiled, rows: np.ndarray):
        r = first_violation(c, rows, self.use_numba)
        return rows[r] if r >= 0 else None


def _decode(idx: np.ndarray, doms: list[int]) -> np.ndarray:
    """Mixed-radix digits of ``idx``, first domain most significant."""
    cols = []
    rem = idx.copy()
    for d in reversed(doms):
        cols.append(rem % np.uint64(d))
        rem //= np.uint64(d)
    return np.stack(cols[::-1], axis=1) if cols else np.zeros((idx.size, 0), np.uint64)


# -- SMT-LIB -------------------------------------------------------------------------

_SMT_BIN = {
    "+": "bvadd", "-": "bvsub", "*": "bvmul", "/": "bvudiv", "%": "bvurem",
    "&": "bvand", "|": "bvor", "^": "bvxor",
}
_SMT_CMP = {"==": "=", "!=": "distinct", "<": "bvult", "<=": "bvule", ">": "bvugt", ">=": "bvuge"}


def _q(name: str) -> str:
    return f"|{name}|"


def to_smtlib(vc: VC) -> str:
    """QF_BV script whose satisfiability means the VC is violated."""
    tm = vc.tm
    w = tm.width
    zero, one = f"(_ bv0 {w})", f"(_ bv1 {w})"

    def b2v(b: str) -> str:
        return f"(ite {b} {one} {zero})"

    names: dict[int, str] = {}
    lines = ["(set-logic QF_BV)", "(set-option :produce-models true)"]
    defs: list[str] = []
    for n in tm.cone(vc.formula):
        node = tm.nodes[n]
        k = node[0]
        if k == CONST:
            names[n] = f"(_ bv{node[1]} {w})"
            continue
        if k == SYM:
            sym = tm.symbols[n]
            names[n] = _q(sym.name)
            lines.append(f"(declare-const {names[n]} (_ BitVec {w}))")
            if sym.boolean:
                defs.append(f"(assert (bvule {names[n]} {one}))")
            continue
        if k == T_BIN:
            op, a, b = node[1], names[node[2]], names[node[3]]
            if op in _SMT_BIN:
                e = f"({_SMT_BIN[op]} {a} {b})"
            elif op == "<<":
                e = f"(bvshl {a} (bvurem {b} (_ bv{w} {w})))"
            elif op == ">>":
                e = f"(bvlshr {a} (bvurem {b} (_ bv{w} {w})))"
            elif op in _SMT_CMP:
                e = b2v(f"({_SMT_CMP[op]} {a} {b})")
            elif op == "&&":
                e = b2v(f"(and (distinct {a} {zero}) (distinct {b} {zero}))")
            else:
                e = b2v(f"(or (distinct {a} {zero}) (distinct {b} {zero}))")
        elif k == T_UN:
            op, a = node[1], names[node[2]]
            e = {"~": f"(bvnot {a})", "-": f"(bvneg {a})"}.get(op) or b2v(f"(= {a} {zero})")
        else:
            c, a, b = names[node[1]], names[node[2]], names[node[3]]
            e = f"(ite (distinct {c} {zero}) {a} {b})"
        names[n] = _q(f"n{n}")
        defs.append(f"(define-fun {names[n]} () (_ BitVec {w}) {e})")
    lines += defs
    lines.append(f"(assert (not (distinct {names[vc.formula]} {zero})))")
    lines += ["(check-sat)", "(get-model)", ""]
    return "\n".join(lines)


_TOKEN = re.compile(r"\(|\)|\|[^|]*\||[^\s()]+")


def _sexprs(text: str):
    stack: list[list] = [[]]
    for tok in _TOKEN.findall(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ModelParseError("unbalanced parenthesis in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


def _bv_value(v) -> int:
    if isinstance(v, str):
        if v.startswith("#x"):
            return int(v[2:], 16)
        if v.startswith("#b"):
            return int(v[2:], 2)
    if isinstance(v, list) and len(v) == 3 and v[0] == "_" and v[1].startswith("bv"):
        return int(v[1][2:])
    raise ModelParseError(f"unexpected model value {v!r}")


def parse_model(text: str, declared: set[str] | None = None) -> dict[str, int]:
    """Values of the constants in a ``get-model`` response.

    Solvers may echo defined functions too; with ``declared`` given, only
    those names are read and anything else is ignored.
    """
    model: dict[str, int] = {}

    def walk(x) -> None:
        if isinstance(x, list):
            if len(x) == 5 and x[0] == "define-fun" and x[2] == []:
                name = x[1][1:-1] if x[1].startswith("|") else x[1]
                if declared is None or name in declared:
                    model[name] = _bv_value(x[4])
                return
            for y in x:
                walk(y)

    walk(_sexprs(text))
    return model


def find_solver() -> str | None:
    """A QF_BV solver on PATH (z3, cvc5 or bitwuzla), if any."""
    for name in ("z3", "cvc5", "bitwuzla"):
        path = shutil.which(name)
        if path:
            return path
    return None


@dataclass
class SmtLibBackend:
    """Run ``<path> file.smt2`` once per VC and read sat/unsat/unknown."""

    path: str
    timeout: float = 30.0
    emit_dir: str | None = None
    extra_args: tuple[str, ...] = ()
    name: str = field(default="smt", init=False)

    def command(self, file: str) -> list[str]:
        args = list(self.extra_args)
        base = os.path.basename(self.path)
        if base.startswith("cvc5") and "--produce-models" not in args:
            args.append("--produce-models")
        return [self.path, *args, file]

    def check(self, vc: VC) -> Verdict:
        tm = vc.tm
        if tm.is_const(vc.formula):
            return VALID if tm.value(vc.formula) else Verdict(VerdictKind.INVALID, {})
        text = to_smtlib(vc)
        if self.emit_dir:
            os.makedirs(self.emit_dir, exist_ok=True)
            with open(os.path.join(self.emit_dir, f"vc_{vc.id}.smt2"), "w") as fh:
                fh.write(text)
        with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
            fh.write(text)
            file = fh.name
        try:
            proc = subprocess.run(self.command(file), capture_output=True, text=True,
                                  timeout=self.timeout)
        except subprocess.TimeoutExpired:
            return Verdict.unknown(UnknownReason.TIMEOUT, f"after {self.timeout}s")
        except OSError as exc:
            raise SolverSpawnError(f"cannot run {self.path}: {exc}") from exc
        finally:
            os.unlink(file)
        out = proc.stdout.strip().splitlines()
        first = out[0].strip() if out else ""
        if first == "unsat":
            return VALID
        if first == "sat":
            declared = {tm.symbols[s].name for s in tm.support(vc.formula)}
            model = parse_model("\n".join(out[1:]), declared)
            return Verdict(VerdictKind.INVALID, model)
        if first == "unknown":
            return Verdict.unknown(UnknownReason.SOLVER_UNKNOWN)
        return Verdict.unknown(UnknownReason.BACKEND_ERROR, (proc.stderr or first)[:200])


Backend = EnumerateBackend | SmtLibBackend


def check(vc: VC, backend: Backend) -> Verdict:
    """Decide one VC."""
    return backend.check(vc)


def make_backend(spec: str = "enum", timeout: float = 30.0, emit_dir: str | None = None) -> Backend:
    """Parse ``enum`` or ``cmd:<path>`` into a backend."""
    if spec == "enum":
        return EnumerateBackend()
    if spec.startswith("cmd:"):
        path = shutil.which(spec[4:])
        if path is None:
            raise SolverSpawnError(f"solver {spec[4:]!r} not found or not executable")
        return SmtLibBackend(path, timeout=timeout, emit_dir=emit_dir)
    raise ValueError(f"unknown solver spec {spec!r} (use 'enum' or 'cmd:<path>')")
