"""Labeled AST for the While language.

Every node is a frozen dataclass. Statement labels are excluded from
equality, so ``p1 == p2`` is structural equality modulo labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Union

BINARY_OPS = (
    "+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>",
    "==", "!=", "<", "<=", ">", ">=", "&&", "||",
)
UNARY_OPS = ("~", "!", "-")
COMPARISON_OPS = frozenset({"==", "!=", "<", "<=", ">", ">=", "&&", "||"})


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class ArrayRead:
    """``a[e]`` as a sub-expression; only present before normalization."""

    array: str
    index: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "Expr"


Expr = Union[IntLit, Var, ArrayRead, BinOp, UnOp]
Atom = Union[IntLit, Var]


def is_atom(e: Expr) -> bool:
    return isinstance(e, (IntLit, Var))


def is_flat(e: Expr) -> bool:
    if is_atom(e):
        return True
    if isinstance(e, BinOp):
        return is_atom(e.left) and is_atom(e.right)
    if isinstance(e, UnOp):
        return is_atom(e.operand)
    return False


def expr_vars(e: Expr) -> set[str]:
    """Scalar variables read by ``e`` (array names of reads excluded)."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, IntLit):
        return set()
    if isinstance(e, ArrayRead):
        return expr_vars(e.index)
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    return expr_vars(e.operand)


def expr_arrays(e: Expr) -> set[str]:
    if isinstance(e, ArrayRead):
        return {e.array} | expr_arrays(e.index)
    if isinstance(e, BinOp):
        return expr_arrays(e.left) | expr_arrays(e.right)
    if isinstance(e, UnOp):
        return expr_arrays(e.operand)
    return set()


def map_vars(e: Expr, f) -> Expr:
    """Rename every scalar and array identifier in ``e`` through ``f``."""
    if isinstance(e, Var):
        return Var(f(e.name))
    if isinstance(e, IntLit):
        return e
    if isinstance(e, ArrayRead):
        return ArrayRead(f(e.array), map_vars(e.index, f))
    if isinstance(e, BinOp):
        return BinOp(e.op, map_vars(e.left, f), map_vars(e.right, f))
    return UnOp(e.op, map_vars(e.operand, f))


# -- statements --------------------------------------------------------------

def _label():
    return field(default=-1, compare=False, kw_only=True)


@dataclass(frozen=True)
class Skip:
    label: int = _label()


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    label: int = _label()


@dataclass(frozen=True)
class Load:
    """``target := array[index]``."""

    target: str
    array: str
    index: Expr
    label: int = _label()


@dataclass(frozen=True)
class Store:
    """``array[index] := value``."""

    array: str
    index: Expr
    value: Expr
    label: int = _label()


@dataclass(frozen=True)
class Assert:
    expr: Expr
    label: int = _label()


@dataclass(frozen=True)
class Assume:
    expr: Expr
    label: int = _label()


@dataclass(frozen=True)
class Seq:
    """An unlabeled block of statements (nested blocks are flattened)."""

    stmts: tuple["Stmt", ...]


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Seq
    orelse: Seq
    label: int = _label()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: Seq
    invariants: tuple[Expr, ...] = ()
    label: int = _label()


@dataclass(frozen=True)
class Call:
    targets: tuple[str, ...]
    callee: str
    args: tuple[Expr, ...]
    label: int = _label()


Stmt = Union[Skip, Assign, Load, Store, Assert, Assume, Seq, If, While, Call]


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    name: str
    size: int | None = None
    annot: str | None = None  # "pub" / "sec" on entry parameters only

    @property
    def is_array(self) -> bool:
        return self.size is not None


@dataclass(frozen=True)
class Decl:
    name: str
    size: int | None = None

    @property
    def is_array(self) -> bool:
        return self.size is not None


@dataclass(frozen=True)
class Procedure:
    name: str
    params: tuple[Param, ...]
    locals: tuple[Decl, ...]
    body: Seq
    returns: tuple[str, ...]

    def sizes(self) -> dict[str, int | None]:
        """Every identifier in scope mapped to its array length (None = scalar)."""
        out: dict[str, int | None] = {p.name: p.size for p in self.params}
        out.update((d.name, d.size) for d in self.locals)
        return out

    def arrays(self) -> dict[str, int]:
        return {k: v for k, v in self.sizes().items() if v is not None}

    def scalars(self) -> list[str]:
        return [k for k, v in self.sizes().items() if v is None]


@dataclass(frozen=True)
class Program:
    procedures: tuple[Procedure, ...]
    entry: str = "main"

    def proc(self, name: str) -> Procedure:
        for p in self.procedures:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def entry_proc(self) -> Procedure:
        return self.proc(self.entry)

    @property
    def public_inputs(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.entry_proc.params if p.annot == "pub")

    @property
    def secret_inputs(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.entry_proc.params if p.annot == "sec")


# -- traversal ---------------------------------------------------------------

def iter_stmts(s: Stmt) -> Iterator[Stmt]:
    """Preorder walk over labeled statements (blocks themselves are skipped)."""
    if isinstance(s, Seq):
        for c in s.stmts:
            yield from iter_stmts(c)
        return
    yield s
    if isinstance(s, If):
        yield from iter_stmts(s.then)
        yield from iter_stmts(s.orelse)
    elif isinstance(s, While):
        yield from iter_stmts(s.body)


def program_stmts(p: Program) -> Iterator[tuple[Procedure, Stmt]]:
    for proc in p.procedures:
        for s in iter_stmts(proc.body):
            yield proc, s


def stmt_index(p: Program) -> dict[int, tuple[Procedure, Stmt]]:
    return {s.label: (proc, s) for proc, s in program_stmts(p)}


def seq(*stmts: Stmt) -> Seq:
    """Build a block, splicing nested blocks and dropping nothing."""
    out: list[Stmt] = []
    for s in stmts:
        if isinstance(s, Seq):
            out.extend(s.stmts)
        else:
            out.append(s)
    return Seq(tuple(out))


def relabel(p: Program, start: int = 0) -> Program:
    """Assign sequential labels in a deterministic preorder walk."""
    counter = [start]

    def fresh() -> int:
        n = counter[0]
        counter[0] += 1
        return n

    def go(s: Stmt) -> Stmt:
        if isinstance(s, Seq):
            return Seq(tuple(go(c) for c in s.stmts))
        lab = fresh()
        if isinstance(s, If):
            return replace(s, then=go(s.then), orelse=go(s.orelse), label=lab)
        if isinstance(s, While):
            return replace(s, body=go(s.body), label=lab)
        return replace(s, label=lab)

    procs = tuple(replace(proc, body=go(proc.body)) for proc in p.procedures)
    return replace(p, procedures=procs)


def stmt_defs(s: Stmt) -> set[str]:
    """Scalars written by a single (non-compound) statement."""
    if isinstance(s, (Assign, Load)):
        return {s.target}
    if isinstance(s, Call):
        return set(s.targets)
    return set()


def stmt_uses(s: Stmt) -> set[str]:
    """Scalars read by the statement itself (not by nested blocks)."""
    if isinstance(s, Assign):
        return expr_vars(s.expr)
    if isinstance(s, Load):
        return expr_vars(s.index)
    if isinstance(s, Store):
        return expr_vars(s.index) | expr_vars(s.value)
    if isinstance(s, (Assert, Assume)):
        return expr_vars(s.expr)
    if isinstance(s, (If, While)):
        return expr_vars(s.cond)
    if isinstance(s, Call):
        out: set[str] = set()
        for a in s.args:
            out |= expr_vars(a)
        return out
    return set()
