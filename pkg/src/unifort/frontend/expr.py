"""Precedence-climbing expression parser."""

from __future__ import annotations

from typing import Optional

from ..diagnostics import Origin, TranspileError
from .ast import Apply, BinOp, Component, Logical, Macro, Name, Num, Slice, Str, UnOp
from .lexer import Token, tokenize

# binding power of binary operators; higher binds tighter
BINARY = {
    ".eqv.": 1, ".neqv.": 1,
    ".or.": 2,
    ".and.": 3,
    "==": 5, "/=": 5, "<": 5, "<=": 5, ">": 5, ">=": 5,
    "//": 6,
    "+": 7, "-": 7,
    "*": 8, "/": 8,
    "**": 9,
}
NOT_LEVEL = 4
UNARY_LEVEL = 7
COMPARISONS = {"==", "/=", "<", "<=", ">", ">="}


class TokenStream:
    def __init__(self, tokens: list[Token], origin: Optional[Origin] = None,
                 macro_names: frozenset = frozenset()):
        self.tokens = tokens
        self.i = 0
        self.origin = origin
        self.macro_names = macro_names

    @classmethod
    def from_text(cls, text: str, origin=None, macro_names=frozenset()):
        return cls(tokenize(text, origin), origin, macro_names)

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.i += 1
        return tok

    def at(self, value: str, kind: str | None = None) -> bool:
        tok = self.peek()
        return tok.value == value and (kind is None or tok.kind == kind) and tok.kind != "str"

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.i += 1
            return True
        return False

    def expect(self, value: str) -> Token:
        if not self.at(value):
            self.error(f"expected {value!r} but found {self.peek().text or 'end of statement'!r}")
        return self.next()

    def expect_name(self) -> str:
        tok = self.next()
        if tok.kind != "name":
            self.error(f"expected a name but found {tok.text or 'end of statement'!r}")
        return tok.value

    def at_end(self) -> bool:
        return self.peek().kind == "eof"

    def expect_end(self):
        if not self.at_end():
            self.error(f"unexpected {self.peek().text!r}")

    def error(self, message: str):
        raise TranspileError.single("syntax", message, self.origin)

    def rest_text(self, source: str) -> str:
        return source[self.peek().pos:]

    # -- expressions ------------------------------------------------------

    def expr(self, min_level: int = 0):
        left = self._prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.value not in BINARY:
                break
            level = BINARY[tok.value]
            if level < min_level:
                break
            self.next()
            if tok.value == "**":
                right = self.expr(level)
            else:
                right = self.expr(level + 1)
            left = BinOp(tok.value, left, right)
            if tok.value in COMPARISONS and self.peek().value in COMPARISONS:
                self.error("comparison operators are not associative")
        return left

    def _prefix(self):
        tok = self.peek()
        if tok.kind == "op" and tok.value in ("-", "+"):
            self.next()
            return UnOp(tok.value, self.expr(UNARY_LEVEL + 1))
        if tok.kind == "op" and tok.value == ".not.":
            self.next()
            return UnOp(".not.", self.expr(NOT_LEVEL + 1))
        return self._primary()

    def _primary(self):
        tok = self.next()
        if tok.kind == "num":
            return Num(tok.value)
        if tok.kind == "str":
            return Str(tok.value)
        if tok.kind == "logical":
            return Logical(tok.value == ".true.")
        if tok.kind == "op" and tok.value == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "name":
            if self.at("("):
                args = self.arg_list()
                if tok.text in self.macro_names:
                    node = Macro(tok.text, args)
                else:
                    node = Apply(tok.value, args)
            else:
                node = Name(tok.value)
            while self.at("%"):
                self.next()
                node = Component(node, self.expect_name())
            return node
        self.i -= 1
        self.error(f"unexpected {tok.text or 'end of statement'!r} in expression")

    def arg_list(self) -> tuple:
        """Parse ``( arg, ... )`` where each argument may be a slice."""
        self.expect("(")
        args = []
        if self.accept(")"):
            return ()
        while True:
            args.append(self._arg())
            if self.accept(")"):
                return tuple(args)
            self.expect(",")

    def _arg(self):
        if self.at(":"):
            self.next()
            upper = None if self.at(",") or self.at(")") else self.expr()
            return Slice(None, upper)
        first = self.expr()
        if self.accept(":"):
            upper = None if self.at(",") or self.at(")") else self.expr()
            if self.at(":"):
                self.error("strided slices are not supported")
            return Slice(first, upper)
        return first


def parse_expr(text: str, origin: Optional[Origin] = None, macro_names: frozenset = frozenset()):
    ts = TokenStream.from_text(text, origin, macro_names)
    e = ts.expr()
    ts.expect_end()
    return e
