"""w-bit unsigned operator semantics shared by the interpreter and the VC layer."""

from __future__ import annotations

WIDTHS = (4, 8, 16, 32, 64)


class DivisionByZero(ArithmeticError):
    pass


def mask(width: int) -> int:
    return (1 << width) - 1


def binop(op: str, a: int, b: int, width: int, total: bool = False) -> int:
    """Apply ``op`` to w-bit operands.

    With ``total=False`` division and remainder by zero raise
    :class:`DivisionByZero` (the interpreter maps this to the error state).
    With ``total=True`` they follow SMT-LIB ``bvudiv``/``bvurem``.
    """
    m = mask(width)
    if op == "+":
        return (a + b) & m
    if op == "-":
        return (a - b) & m
    if op == "*":
        return (a * b) & m
    if op in ("/", "%"):
        if b == 0:
            if not total:
                raise DivisionByZero(op)
            return m if op == "/" else a
        return a // b if op == "/" else a % b
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    if op == "^":
        return a ^ b
    if op == "<<":
        return (a << (b % width)) & m
    if op == ">>":
        return a >> (b % width)
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "&&":
        return int(a != 0 and b != 0)
    if op == "||":
        return int(a != 0 or b != 0)
    raise ValueError(f"unknown operator {op!r}")


def unop(op: str, a: int, width: int) -> int:
    m = mask(width)
    if op == "~":
        return ~a & m
    if op == "!":
        return int(a == 0)
    if op == "-":
        return -a & m
    raise ValueError(f"unknown operator {op!r}")
