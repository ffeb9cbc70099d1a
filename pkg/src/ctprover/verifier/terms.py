"""Hash-consed DAG of fixed-width bitvector terms.

Terms are integer ids into a :class:`TermManager`. Every term denotes a
w-bit unsigned value; comparisons and logical operators produce 0/1.
Division and remainder follow the total SMT-LIB convention; the symbolic
executor adds a non-zero-divisor assumption wherever the program divides.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..ast import BINARY_OPS, COMPARISON_OPS
from ..semantics import ops

CONST, SYM, BIN, UN, ITE = range(5)

DEFAULT_MAX_TERMS = 2_000_000


class InlineBlowup(RuntimeError):
    """The term DAG grew past the configured cap."""


@dataclass(frozen=True)
class Symbol:
    name: str
    boolean: bool = False  # domain {0, 1} instead of the full width


class TermManager:
    def __init__(self, width: int, max_terms: int = DEFAULT_MAX_TERMS):
        if width not in ops.WIDTHS:
            raise ValueError(f"width must be one of {ops.WIDTHS}")
        self.width = width
        self.mask = ops.mask(width)
        self.max_terms = max_terms
        self.nodes: list[tuple] = []
        self.table: dict[tuple, int] = {}
        self.symbols: dict[int, Symbol] = {}
        self.by_name: dict[str, int] = {}
        self._bool: list[bool] = []
        self.zero = self.const(0)
        self.one = self.const(1)

    # -- construction
    def _intern(self, key: tuple, boolean: bool) -> int:
        t = self.table.get(key)
        if t is not None:
            return t
        if len(self.nodes) >= self.max_terms:
            raise InlineBlowup(f"term DAG exceeds {self.max_terms} nodes")
        t = len(self.nodes)
        self.nodes.append(key)
        self._bool.append(boolean)
        self.table[key] = t
        return t

    def const(self, v: int) -> int:
        v &= self.mask
        return self._intern((CONST, v), v in (0, 1))

    def sym(self, name: str, boolean: bool = False) -> int:
        if name in self.by_name:
            raise ValueError(f"symbol {name!r} already declared")
        t = self._intern((SYM, name), boolean)
        self.symbols[t] = Symbol(name, boolean)
        self.by_name[name] = t
        return t

    def fresh(self, base: str, boolean: bool = False) -> int:
        k = len(self.symbols)
        name = f"{base}!{k}"
        while name in self.by_name:
            k += 1
            name = f"{base}!{k}"
        return self.sym(name, boolean)

    def is_const(self, t: int) -> bool:
        return self.nodes[t][0] == CONST

    def value(self, t: int) -> int:
        return self.nodes[t][1]

    def is_bool(self, t: int) -> bool:
        return self._bool[t]

    def bin(self, op: str, a: int, b: int) -> int:
        if op not in BINARY_OPS:
            raise ValueError(op)
        ca, cb = self.is_const(a), self.is_const(b)
        if ca and cb:
            return self.const(ops.binop(op, self.value(a), self.value(b), self.width, total=True))
        s = self._simplify(op, a, b, ca, cb)
        if s is not None:
            return s
        if op in ("+", "*", "&", "|", "^", "==", "!=", "&&", "||") and b < a:
            a, b = b, a  # canonical order for commutative operators
        boolean = op in COMPARISON_OPS or (
            op in ("&", "|", "^") and self._bool[a] and self._bool[b]) or (
            op == "&" and (self._bool[a] or self._bool[b]))
        return self._intern((BIN, op, a, b), boolean)

    def _simplify(self, op: str, a: int, b: int, ca: bool, cb: bool) -> int | None:
        va = self.value(a) if ca else None
        vb = self.value(b) if cb else None
        if a == b:
            if op in ("^", "-"):
                return self.zero
            if op in ("==", "<=", ">="):
                return self.one
            if op in ("!=", "<", ">"):
                return self.zero
            if op in ("&", "|"):
                return a
        if op == "&&":
            if va == 0 or vb == 0:
                return self.zero
            if ca:
                return self.truth(b)
            if cb:
                return self.truth(a)
            if a == b:
                return self.truth(a)
        if op == "||":
            if (ca and va != 0) or (cb and vb != 0):
                return self.one
            if ca:
                return self.truth(b)
            if cb:
                return self.truth(a)
            if a == b:
                return self.truth(a)
        if op in ("+", "|", "^", "-", "<<", ">>") and vb == 0:
            return a
        if op in ("+", "|", "^") and va == 0:
            return b
        if op == "&" and (va == 0 or vb == 0):
            return self.zero
        if op == "&" and vb == self.mask:
            return a
        if op == "&" and va == self.mask:
            return b
        if op == "*" and (va == 0 or vb == 0):
            return self.zero
        if op == "*" and vb == 1:
            return a
        if op == "*" and va == 1:
            return b
        if op == "^":
            # cancel x ^ (x ^ y) and (x ^ y) ^ x
            for x, y in ((a, b), (b, a)):
                n = self.nodes[y]
                if n[0] == BIN and n[1] == "^":
                    if n[2] == x:
                        return n[3]
                    if n[3] == x:
                        return n[2]
        if op in ("==", "!=") and self._bool[a] and self._bool[b]:
            if vb == 1 or va == 1:
                t = a if vb == 1 else b
                return t if op == "==" else self.un("!", t)
            if vb == 0 or va == 0:
                t = a if vb == 0 else b
                return self.un("!", t) if op == "==" else t
        if op == "!=" and vb == 0 and self._bool[a]:
            return a
        return None

    def un(self, op: str, a: int) -> int:
        if self.is_const(a):
            return self.const(ops.unop(op, self.value(a), self.width))
        n = self.nodes[a]
        if op == "!" and n[0] == UN and n[1] == "!" and self._bool[n[2]]:
            return n[2]
        if op == "~" and n[0] == UN and n[1] == "~":
            return n[2]
        if op == "!" and n[0] == BIN and n[1] in _NEGATED:
            return self.bin(_NEGATED[n[1]], n[2], n[3])
        return self._intern((UN, op, a), op == "!")

    def ite(self, c: int, a: int, b: int) -> int:
        if a == b:
            return a
        if self.is_const(c):
            return a if self.value(c) != 0 else b
        c = self.truth(c)
        if self._bool[c]:
            if a == self.one and b == self.zero:
                return c
            if a == self.zero and b == self.one:
                return self.un("!", c)
        n = self.nodes[c]
        if n[0] == UN and n[1] == "!":
            c, a, b = n[2], b, a
            c = self.truth(c)
        return self._intern((ITE, c, a, b), self._bool[a] and self._bool[b])

    # -- logic helpers (all 0/1-valued)
    def truth(self, t: int) -> int:
        return t if self._bool[t] else self.bin("!=", t, self.zero)

    def not_(self, t: int) -> int:
        return self.un("!", t)

    def and_(self, a: int, b: int) -> int:
        return self.bin("&&", a, b)

    def or_(self, a: int, b: int) -> int:
        return self.bin("||", a, b)

    def implies(self, a: int, b: int) -> int:
        return self.or_(self.not_(a), b)

    # -- inspection
    def support(self, t: int) -> list[int]:
        """Symbols the term depends on, in creation order."""
        seen: set[int] = set()
        out: list[int] = []
        stack = [t]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            node = self.nodes[n]
            if node[0] == SYM:
                out.append(n)
            elif node[0] == BIN:
                stack += [node[2], node[3]]
            elif node[0] == UN:
                stack.append(node[2])
            elif node[0] == ITE:
                stack += [node[1], node[2], node[3]]
        return sorted(out)

    def cone(self, t: int) -> list[int]:
        """All nodes reachable from ``t``, children before parents."""
        seen: set[int] = set()
        order: list[int] = []
        stack: list[tuple[int, bool]] = [(t, False)]
        while stack:
            n, done = stack.pop()
            if done:
                order.append(n)
                continue
            if n in seen:
                continue
            seen.add(n)
            stack.append((n, True))
            node = self.nodes[n]
            if node[0] == BIN:
                stack += [(node[3], False), (node[2], False)]
            elif node[0] == UN:
                stack.append((node[2], False))
            elif node[0] == ITE:
                stack += [(node[3], False), (node[2], False), (node[1], False)]
        return order

    def evaluate(self, t: int, env: dict[int, int]) -> int:
        """Value of ``t`` with symbols bound by ``env`` (missing symbols are 0)."""
        vals: dict[int, int] = {}
        for n in self.cone(t):
            node = self.nodes[n]
            k = node[0]
            if k == CONST:
                vals[n] = node[1]
            elif k == SYM:
                vals[n] = env.get(n, 0) & self.mask
            elif k == BIN:
                vals[n] = ops.binop(node[1], vals[node[2]], vals[node[3]], self.width, total=True)
            elif k == UN:
                vals[n] = ops.unop(node[1], vals[node[2]], self.width)
            else:
                vals[n] = vals[node[2]] if vals[node[1]] else vals[node[3]]
        return vals[t]

    def show(self, t: int, depth: int = 6) -> str:
        node = self.nodes[t]
        k = node[0]
        if k == CONST:
            return str(node[1])
        if k == SYM:
            return node[1]
        if depth == 0:
            return f"t{t}"
        if k == BIN:
            return f"({self.show(node[2], depth - 1)} {node[1]} {self.show(node[3], depth - 1)})"
        if k == UN:
            return f"{node[1]}{self.show(node[2], depth - 1)}"
        return (f"ite({self.show(node[1], depth - 1)}, {self.show(node[2], depth - 1)}, "
                f"{self.show(node[3], depth - 1)})")


_NEGATED = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
