"""Recursive-descent parser for the exp-polynomial expression language.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { "*" , unary } ;
    unary   = ("+" | "-") , unary | power ;
    power   = primary , [ "^" , INTEGER ] ;
    primary = NUMBER | IMAGINARY | "i" | "z"
            | "(" , expr , ")"
            | "exp" , "(" , expr , ")"
            | "e" , "^" , ( "{" , expr , "}" | "(" , expr , ")" | unary ) ;

``NUMBER`` is a decimal literal such as ``2``, ``0.5`` or ``1e-3``;
``IMAGINARY`` is a NUMBER immediately followed by ``i`` (``2i``, ``0.5i``).
Exponents of ``e``/``exp`` must evaluate to polynomials in ``z``.  There is
no implicit multiplication: ``2z`` is rejected, write ``2*z``.
"""

from __future__ import annotations

import re
from typing import NamedTuple

from .errors import ParseError
from .exppoly import ExpPoly

MAX_POWER = 1000

_NUMBER = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
_WORD = re.compile(r"[A-Za-z_]+")


class Token(NamedTuple):
    kind: str  # NUM, IMAG, Z, E, EXP, OP, END
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            end = m.end()
            if end < n and text[end] == "i" and not (end + 1 < n and text[end + 1].isalpha()):
                tokens.append(Token("IMAG", m.group(0), i))
                i = end + 1
            else:
                tokens.append(Token("NUM", m.group(0), i))
                i = end
            continue
        m = _WORD.match(text, i)
        if m:
            word = m.group(0)
            kind = {"z": "Z", "e": "E", "exp": "EXP", "i": "IMAG"}.get(word)
            if kind is None:
                raise ParseError(f"unknown identifier {word!r}", i)
            tokens.append(Token(kind, "1" if word == "i" else word, i))
            i = m.end()
            continue
        if ch in "+-*^(){}":
            tokens.append(Token("OP", ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(Token("END", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at_op(self, ch: str) -> bool:
        return self.tok.kind == "OP" and self.tok.text == ch

    def expect_op(self, ch: str) -> Token:
        if not self.at_op(ch):
            raise ParseError(f"expected {ch!r}, found {self.tok.text or 'end of input'!r}", self.tok.pos)
        return self.advance()

    def parse(self) -> ExpPoly:
        if self.tok.kind == "END":
            raise ParseError("empty expression", 0)
        value = self.expr()
        if self.tok.kind != "END":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return value

    def expr(self) -> ExpPoly:
        value = self.term()
        while self.at_op("+") or self.at_op("-"):
            op = self.advance().text
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> ExpPoly:
        value = self.unary()
        while self.at_op("*"):
            self.advance()
            value = value * self.unary()
        return value

    def unary(self) -> ExpPoly:
        if self.at_op("-"):
            self.advance()
            return -self.unary()
        if self.at_op("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> ExpPoly:
        base = self.primary()
        if self.at_op("^"):
            self.advance()
            t = self.tok
            if t.kind != "NUM" or not t.text.isdigit():
                raise ParseError("exponent of '^' must be a non-negative integer literal", t.pos)
            self.advance()
            k = int(t.text)
            if k > MAX_POWER:
                raise ParseError(f"power {k} exceeds the limit {MAX_POWER}", t.pos)
            base = base ** k
        return base

    def primary(self) -> ExpPoly:
        t = self.tok
        if t.kind == "NUM":
            self.advance()
            return ExpPoly.const(float(t.text))
        if t.kind == "IMAG":
            self.advance()
            return ExpPoly.const(complex(0.0, float(t.text)))
        if t.kind == "Z":
            self.advance()
            return ExpPoly.z()
        if self.at_op("("):
            self.advance()
            value = self.expr()
            self.expect_op(")")
            return value
        if t.kind == "EXP":
            self.advance()
            self.expect_op("(")
            arg_pos = self.tok.pos
            arg = self.expr()
            self.expect_op(")")
            return self._exp(arg, arg_pos)
        if t.kind == "E":
            self.advance()
            self.expect_op("^")
            arg_pos = self.tok.pos
            if self.at_op("{"):
                self.advance()
                arg = self.expr()
                self.expect_op("}")
            elif self.at_op("("):
                self.advance()
                arg = self.expr()
                self.expect_op(")")
            else:
                arg = self.unary()
            return self._exp(arg, arg_pos)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.pos)

    @staticmethod
    def _exp(arg: ExpPoly, pos: int) -> ExpPoly:
        if not arg.is_polynomial():
            raise ParseError("exponent is not a polynomial in z", pos)
        return ExpPoly.exp_of(arg.as_poly())


def parse_exppoly(text: str) -> ExpPoly:
    """Parse ``text`` into a normalized :class:`ExpPoly`."""
    return _Parser(text).parse()


def parse_poly(text: str):
    """Parse text that must denote a polynomial; returns a ComplexPoly."""
    e = parse_exppoly(text)
    if not e.is_polynomial():
        raise ParseError("expected a polynomial in z", 0)
    return e.as_poly()
