"""Recursive-descent parser for the ``.wh`` surface syntax (see docs/grammar.md)."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..ast import (
    ArrayRead, Assert, Assign, Assume, BinOp, Call, Decl, Expr, If, IntLit,
    Load, Param, Procedure, Program, Seq, Skip, Stmt, Store, UnOp, Var, While,
)
from .errors import AnnotationError, DuplicateProcedureError, MissingEntryError, WhileSyntaxError

KEYWORDS = {
    "def", "return", "var", "array", "skip", "assert", "assume", "if", "then",
    "else", "fi", "while", "do", "od", "invariant", "pub", "sec",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>0[xX][0-9a-fA-F]+|[0-9]+)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>:=|<<|>>|<=|>=|==|!=|&&|\|\||[-+*/%&|^~!<>()\[\]{},;])
    """,
    re.VERBOSE,
)

# binary precedence levels, loosest first
_LEVELS = (
    ("||",), ("&&",), ("|",), ("^",), ("&",), ("==", "!="),
    ("<", "<=", ">", ">="), ("<<", ">>"), ("+", "-"), ("*", "/", "%"),
)


@dataclass
class Token:
    kind: str  # "num" | "ident" | "kw" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise WhileSyntaxError(line, pos - line_start + 1, "a token", text[pos])
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            toks.append(Token("kw" if tok in KEYWORDS else "ident", tok, line, pos - line_start + 1))
        elif kind in ("num", "op"):
            toks.append(Token(kind, tok, line, pos - line_start + 1))
        pos = m.end()
    toks.append(Token("eof", "<eof>", line, pos - line_start + 1))
    return toks


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise WhileSyntaxError(self.tok.line, self.tok.col, repr(text), self.tok.text)
        return self.advance()

    def ident(self) -> str:
        if self.tok.kind != "ident":
            raise WhileSyntaxError(self.tok.line, self.tok.col, "identifier", self.tok.text)
        return self.advance().text

    def number(self) -> int:
        if self.tok.kind != "num":
            raise WhileSyntaxError(self.tok.line, self.tok.col, "integer literal", self.tok.text)
        return int(self.advance().text, 0)

    # -- program structure
    def program(self, entry: str) -> Program:
        procs: list[Procedure] = []
        seen: set[str] = set()
        while self.tok.kind != "eof":
            proc = self.procedure()
            if proc.name in seen:
                raise DuplicateProcedureError(f"procedure {proc.name!r} defined twice")
            seen.add(proc.name)
            procs.append(proc)
        if entry not in seen:
            raise MissingEntryError(f"no entry procedure {entry!r}")
        for proc in procs:
            for prm in proc.params:
                if proc.name == entry and prm.annot is None:
                    raise AnnotationError(f"entry parameter {prm.name!r} needs pub or sec")
                if proc.name != entry and prm.annot is not None:
                    raise AnnotationError(
                        f"parameter {prm.name!r} of non-entry procedure {proc.name!r} is annotated")
        return Program(tuple(procs), entry)

    def procedure(self) -> Procedure:
        self.expect("def")
        name = self.ident()
        self.expect("(")
        params: list[Param] = []
        if not self.at(")"):
            params.append(self.param())
            while self.at(","):
                self.advance()
                params.append(self.param())
        self.expect(")")
        self.expect("{")
        decls: list[Decl] = []
        body = self.block(("return",), decls)
        self.expect("return")
        rets: list[str] = []
        if not self.at(";"):
            rets.append(self.ident())
            while self.at(","):
                self.advance()
                rets.append(self.ident())
        self.expect(";")
        self.expect("}")
        return Procedure(name, tuple(params), tuple(decls), body, tuple(rets))

    def param(self) -> Param:
        annot = None
        if self.at("pub") or self.at("sec"):
            annot = self.advance().text
        name = self.ident()
        size = None
        if self.at("["):
            self.advance()
            size = self.number()
            self.expect("]")
        return Param(name, size, annot)

    def block(self, stop: tuple[str, ...], decls: list[Decl]) -> Seq:
        stmts: list[Stmt] = []
        while not any(self.at(s) for s in stop):
            if self.tok.kind == "eof":
                raise WhileSyntaxError(self.tok.line, self.tok.col, " or ".join(stop), "<eof>")
            if self.at("var") or self.at("array"):
                decls.extend(self.decl())
                continue
            stmts.append(self.statement(decls))
        if not stmts:
            stmts.append(Skip())
        return Seq(tuple(stmts))

    def decl(self) -> list[Decl]:
        is_array = self.advance().text == "array"
        out = []
        while True:
            name = self.ident()
            size = None
            if is_array:
                self.expect("[")
                size = self.number()
                self.expect("]")
            out.append(Decl(name, size))
            if not self.at(","):
                break
            self.advance()
        self.expect(";")
        return out

    def statement(self, decls: list[Decl]) -> Stmt:
        t = self.tok
        if self.at("skip"):
            self.advance()
            self.expect(";")
            return Skip()
        if self.at("assert") or self.at("assume"):
            self.advance()
            e = self.expr()
            self.expect(";")
            return Assert(e) if t.text == "assert" else Assume(e)
        if self.at("if"):
            self.advance()
            cond = self.expr()
            self.expect("then")
            then = self.block(("else", "fi"), decls)
            orelse = Seq((Skip(),))
            if self.at("else"):
                self.advance()
                orelse = self.block(("fi",), decls)
            self.expect("fi")
            return If(cond, then, orelse)
        if self.at("while"):
            self.advance()
            cond = self.expr()
            invs = []
            while self.at("invariant"):
                self.advance()
                invs.append(self.expr())
            self.expect("do")
            body = self.block(("od",), decls)
            self.expect("od")
            return While(cond, body, tuple(invs))
        if t.kind != "ident":
            raise WhileSyntaxError(t.line, t.col, "statement", t.text)
        # call without targets: f(args);
        if self.peek().text == "(":
            callee = self.ident()
            args = self.call_args()
            self.expect(";")
            return Call((), callee, args)
        first = self.ident()
        if self.at("["):
            self.advance()
            idx = self.expr()
            self.expect("]")
            self.expect(":=")
            val = self.expr()
            self.expect(";")
            return Store(first, idx, val)
        targets = [first]
        while self.at(","):
            self.advance()
            targets.append(self.ident())
        self.expect(":=")
        if self.tok.kind == "ident" and self.peek().text == "(":
            callee = self.ident()
            args = self.call_args()
            self.expect(";")
            return Call(tuple(targets), callee, args)
        if len(targets) > 1:
            raise WhileSyntaxError(self.tok.line, self.tok.col, "procedure call", self.tok.text)
        e = self.expr()
        self.expect(";")
        if isinstance(e, ArrayRead):
            return Load(first, e.array, e.index)
        return Assign(first, e)

    def call_args(self) -> tuple[Expr, ...]:
        self.expect("(")
        args: list[Expr] = []
        if not self.at(")"):
            args.append(self.expr())
            while self.at(","):
                self.advance()
                args.append(self.expr())
        self.expect(")")
        return tuple(args)

    # -- expressions
    def expr(self, level: int = 0) -> Expr:
        if level == len(_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _LEVELS[level]:
            op = self.advance().text
            right = self.expr(level + 1)
            left = BinOp(op, left, right)
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text in ("~", "!", "-"):
            op = self.advance().text
            return UnOp(op, self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            return IntLit(self.number())
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            name = self.ident()
            if self.at("["):
                self.advance()
                idx = self.expr()
                self.expect("]")
                return ArrayRead(name, idx)
            return Var(name)
        raise WhileSyntaxError(t.line, t.col, "expression", t.text)


def parse(text: str, entry: str = "main") -> Program:
    """Parse ``.wh`` source. The result may still need :func:`normalize`."""
    return Parser(text).program(entry)
