"""Surface syntax for content-model expressions.

parse_expr_text is the inverse of model.render_expr: parsing a rendered
expression gives back the expression (sequences, alternatives and
permutations compare flattened).  The token scanner here is shared with
the module-file parser, so it also knows `//` and `/* */` comments and
the statement punctuation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import (
    Capture,
    CharSet,
    CharsToken,
    Empty,
    Expr,
    Greedy,
    Insert,
    Literal,
    LocalSubst,
    NoneExpr,
    NumericChar,
    Opt,
    Plus,
    Range,
    Ref,
    SetIntersect,
    SetMinus,
    SetUnion,
    Star,
    TightPlus,
    TightStar,
    alt,
    perm,
    seq,
    tight_seq,
)


class ExprSyntaxError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True, slots=True)
class Tok:
    kind: str  # ident | string | class | number | hash | sym | end
    value: str
    line: int
    column: int


_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*(?:\.[A-Za-z0-9_-]+)*")
_NUMBER_RE = re.compile(r"0x[0-9a-fA-F]+")

# multi-character symbols first so they win over their prefixes
_SYMBOLS = ("~*", "~+", "^(", "..", "->",
            "|", "&", ",", "~", "?", "*", "+", ">", "-",
            "[", "]", "(", ")", "@", "/", "=", ";", "{", "}")


def lex(text: str) -> list[Tok]:
    toks: list[Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        c = text[i]
        if c in " \t\n\r":
            advance(1)
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            advance((end if end >= 0 else n) - i)
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise ExprSyntaxError("unterminated comment", line, col)
            advance(end + 2 - i)
            continue
        if c in "\"'":
            end = text.find(c, i + 1)
            if end < 0:
                raise ExprSyntaxError("unterminated literal", line, col)
            kind = "string" if c == '"' else "class"
            toks.append(Tok(kind, text[i + 1:end], line, col))
            advance(end + 1 - i)
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            toks.append(Tok("number", m.group(), line, col))
            advance(len(m.group()))
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            toks.append(Tok("ident", m.group(), line, col))
            advance(len(m.group()))
            continue
        if c == "#":
            m = _IDENT_RE.match(text, i + 1)
            if m:
                toks.append(Tok("hash", m.group(), line, col))
                advance(1 + len(m.group()))
                continue
            raise ExprSyntaxError("stray #", line, col)
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Tok("sym", sym, line, col))
                advance(len(sym))
                break
        else:
            raise ExprSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Tok("end", "", line, col))
    return toks


class TokenCursor:
    """Shared scanner state for the expression and module parsers."""

    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.i = 0

    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def at_sym(self, *values: str) -> bool:
        return self.cur.kind == "sym" and self.cur.value in values

    def at_ident(self, *values: str) -> bool:
        return self.cur.kind == "ident" and (not values
                                             or self.cur.value in values)

    def take(self) -> Tok:
        t = self.cur
        self.i += 1
        return t

    def expect_sym(self, value: str) -> Tok:
        if not self.at_sym(value):
            self.fail(f"expected {value!r}")
        return self.take()

    def expect_ident(self) -> str:
        if self.cur.kind != "ident":
            self.fail("expected a name")
        return self.take().value

    def fail(self, message: str) -> None:
        t = self.cur
        got = t.value if t.kind != "end" else "end of input"
        raise ExprSyntaxError(f"{message}, got {got!r}", t.line, t.column)


def parse_expr(c: TokenCursor) -> Expr:
    return _alt(c)


def _alt(c: TokenCursor) -> Expr:
    items = [_perm(c)]
    while c.at_sym("|"):
        c.take()
        items.append(_perm(c))
    return alt(*items)


def _perm(c: TokenCursor) -> Expr:
    items = [_seq(c)]
    while c.at_sym("&"):
        c.take()
        items.append(_seq(c))
    return perm(*items)


def _seq(c: TokenCursor) -> Expr:
    items = [_tight(c)]
    while c.at_sym(","):
        c.take()
        items.append(_tight(c))
    return seq(*items)


def _tight(c: TokenCursor) -> Expr:
    items = [_set(c)]
    while c.at_sym("~"):
        c.take()
        items.append(_set(c))
    return tight_seq(*items)


def _set(c: TokenCursor) -> Expr:
    left = _range(c)
    while c.at_ident("U", "A") or c.at_sym("-"):
        op = c.take().value
        right = _range(c)
        if op == "U":
            left = SetUnion(left, right)
        elif op == "A":
            left = SetIntersect(left, right)
        else:
            left = SetMinus(left, right)
    return left


def _range(c: TokenCursor) -> Expr:
    lo = _greedy(c)
    if c.at_sym(".."):
        c.take()
        return Range(lo, _greedy(c))
    return lo


def _greedy(c: TokenCursor) -> Expr:
    if c.at_sym(">"):
        c.take()
        return Greedy(_greedy(c))
    return _postfix(c)


def _postfix(c: TokenCursor) -> Expr:
    e = _atom(c)
    while True:
        if c.at_sym("?"):
            c.take()
            e = Opt(e)
        elif c.at_sym("*"):
            c.take()
            e = Star(e)
        elif c.at_sym("+"):
            c.take()
            e = Plus(e)
        elif c.at_sym("~*"):
            c.take()
            e = TightStar(e)
        elif c.at_sym("~+"):
            c.take()
            e = TightPlus(e)
        elif c.at_sym("^("):
            c.take()
            replacement = parse_expr(c)
            c.expect_sym("/")
            target = c.expect_ident()
            c.expect_sym(")")
            e = LocalSubst(e, replacement, target)
        else:
            return e


def _atom(c: TokenCursor) -> Expr:
    t = c.cur
    if t.kind == "ident":
        c.take()
        return Ref(t.value)
    if t.kind == "string":
        c.take()
        return Literal(t.value)
    if t.kind == "class":
        c.take()
        return CharSet(t.value)
    if t.kind == "number":
        c.take()
        return NumericChar(int(t.value, 16))
    if t.kind == "hash":
        c.take()
        if t.value == "chars":
            return CharsToken()
        if t.value == "empty":
            return Empty()
        if t.value == "none":
            return NoneExpr()
        raise ExprSyntaxError(f"unknown #{t.value}", t.line, t.column)
    if c.at_sym("@"):
        c.take()
        return Insert(c.expect_ident())
    if c.at_sym("["):
        c.take()
        name = c.expect_ident()
        body = parse_expr(c)
        c.expect_sym("]")
        return Capture(name, body)
    if c.at_sym("("):
        c.take()
        e = parse_expr(c)
        c.expect_sym(")")
        return e
    c.fail("expected an expression")
    raise AssertionError  # unreachable


def parse_expr_text(text: str) -> Expr:
    c = TokenCursor(lex(text))
    e = parse_expr(c)
    if c.cur.kind != "end":
        c.fail("trailing input after expression")
    return e
