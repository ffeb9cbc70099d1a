"""Pretty-printer emitting re-parseable ``.wh`` text."""

from __future__ import annotations

from ..ast import (
    ArrayRead, Assert, Assign, Assume, BinOp, Call, Expr, If, IntLit, Load,
    Procedure, Program, Seq, Skip, Stmt, Store, UnOp, Var, While,
)

INDENT = "  "


def expr_str(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ArrayRead):
        return f"{e.array}[{expr_str(e.index)}]"
    if isinstance(e, BinOp):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    return f"{e.op}{_operand(e.operand)}"


def _operand(e: Expr) -> str:
    s = expr_str(e)
    return f"({s})" if isinstance(e, (BinOp, UnOp)) else s


def _block(b: Seq, depth: int, out: list[str]) -> None:
    for s in b.stmts:
        _stmt(s, depth, out)


def _stmt(s: Stmt, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    if isinstance(s, Seq):
        _block(s, depth, out)
    elif isinstance(s, Skip):
        out.append(f"{pad}skip;")
    elif isinstance(s, Assign):
        out.append(f"{pad}{s.target} := {expr_str(s.expr)};")
    elif isinstance(s, Load):
        out.append(f"{pad}{s.target} := {s.array}[{expr_str(s.index)}];")
    elif isinstance(s, Store):
        out.append(f"{pad}{s.array}[{expr_str(s.index)}] := {expr_str(s.value)};")
    elif isinstance(s, Assert):
        out.append(f"{pad}assert {expr_str(s.expr)};")
    elif isinstance(s, Assume):
        out.append(f"{pad}assume {expr_str(s.expr)};")
    elif isinstance(s, If):
        out.append(f"{pad}if {expr_str(s.cond)} then")
        _block(s.then, depth + 1, out)
        out.append(f"{pad}else")
        _block(s.orelse, depth + 1, out)
        out.append(f"{pad}fi")
    elif isinstance(s, While):
        head = f"{pad}while {expr_str(s.cond)}"
        for inv in s.invariants:
            head += f" invariant {_operand(inv)}"
        out.append(head + " do")
        _block(s.body, depth + 1, out)
        out.append(f"{pad}od")
    elif isinstance(s, Call):
        args = ", ".join(expr_str(a) for a in s.args)
        if s.targets:
            out.append(f"{pad}{', '.join(s.targets)} := {s.callee}({args});")
        else:
            out.append(f"{pad}{s.callee}({args});")
    else:  # pragma: no cover
        raise TypeError(s)


def proc_str(proc: Procedure) -> str:
    params = []
    for p in proc.params:
        txt = p.name if p.size is None else f"{p.name}[{p.size}]"
        params.append(f"{p.annot} {txt}" if p.annot else txt)
    out = [f"def {proc.name}({', '.join(params)}){{"]
    for d in proc.locals:
        if d.size is None:
            out.append(f"{INDENT}var {d.name};")
        else:
            out.append(f"{INDENT}array {d.name}[{d.size}];")
    _block(proc.body, 1, out)
    rets = ", ".join(proc.returns)
    out.append(f"{INDENT}return {rets};" if rets else f"{INDENT}return;")
    out.append("}")
    return "\n".join(out)


def pretty_print(p: Program) -> str:
    return "\n\n".join(proc_str(proc) for proc in p.procedures) + "\n"
