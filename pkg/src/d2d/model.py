"""Core data model: tokens, content-model expressions, document nodes.

Everything here is an immutable value object.  Token equality ignores
source positions so expected-token lists in tests stay readable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Union


# ---------------------------------------------------------------------------
# Source positions and tokens


@dataclass(frozen=True, slots=True)
class Position:
    line: int  # 1-based
    column: int  # 1-based
    offset: int  # 0-based char offset

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


START = Position(1, 1, 0)


class TokenKind(Enum):
    CHARS = auto()  # character data (adjacent runs are NOT merged)
    COMMENT = auto()  # comment body, lead-in/lead-out stripped
    OPEN = auto()  # #tag
    CLOSE = auto()  # #/tag, or parenthesis close; tag None = wildcard
    CLOSE_FORCED = auto()  # #///tag; tag None = wildcard
    EMPTY = auto()  # #tag/
    EMPTY_FORCED = auto()  # #tag///
    WARNING = auto()  # tokenizer-level diagnostic, recoverable
    ERROR = auto()  # tokenizer-level diagnostic
    EOF = auto()


@dataclass(frozen=True, slots=True)
class Token:
    kind: TokenKind
    tag: str | None = None  # OPEN/CLOSE/EMPTY families; None = wildcard
    text: str = ""  # CHARS/COMMENT payload, WARNING/ERROR message
    pos: Position = field(default=START, compare=False)

    def __repr__(self) -> str:
        bits = [self.kind.name]
        if self.tag is not None:
            bits.append(self.tag)
        elif self.kind in (TokenKind.CLOSE, TokenKind.CLOSE_FORCED):
            bits.append("*")
        if self.text:
            bits.append(repr(self.text))
        return f"Token({', '.join(bits)})"


# Factories keep token-heavy test tables compact.

def chars(text: str, pos: Position = START) -> Token:
    return Token(TokenKind.CHARS, text=text, pos=pos)


def comment(text: str, pos: Position = START) -> Token:
    return Token(TokenKind.COMMENT, text=text, pos=pos)


def open_(tag: str, pos: Position = START) -> Token:
    return Token(TokenKind.OPEN, tag=tag, pos=pos)


def close(tag: str | None, pos: Position = START) -> Token:
    return Token(TokenKind.CLOSE, tag=tag, pos=pos)


def close_forced(tag: str | None, pos: Position = START) -> Token:
    return Token(TokenKind.CLOSE_FORCED, tag=tag, pos=pos)


def empty(tag: str, pos: Position = START) -> Token:
    return Token(TokenKind.EMPTY, tag=tag, pos=pos)


def empty_forced(tag: str, pos: Position = START) -> Token:
    return Token(TokenKind.EMPTY_FORCED, tag=tag, pos=pos)


def warning(message: str, pos: Position = START) -> Token:
    return Token(TokenKind.WARNING, text=message, pos=pos)


def error(message: str, pos: Position = START) -> Token:
    return Token(TokenKind.ERROR, text=message, pos=pos)


def eof(pos: Position = START) -> Token:
    return Token(TokenKind.EOF, pos=pos)


# ---------------------------------------------------------------------------
# Content-model expressions
#
# One expression language serves both levels.  Token-level models may use
# Ref, CharsToken, Empty, NoneExpr, Seq, Alt, Perm, Opt, Star, Plus and
# Insert.  Character-level models may use the literal/class/tight variants
# but not Ref, Perm or Insert; the grammar validator enforces the split.
# Seq is the `,` operator: plain sequencing over tokens, optional-whitespace
# sequencing over characters.  n-ary constructors (Seq, Alt, Perm, TightSeq,
# union/intersection/difference chains) are kept flat, never nested in
# themselves.


@dataclass(frozen=True, slots=True)
class Ref:
    name: str  # possibly dotted (import path)


@dataclass(frozen=True, slots=True)
class CharsToken:
    """#chars: a slot absorbing any run of character-data tokens."""


@dataclass(frozen=True, slots=True)
class Empty:
    """#empty: matches the empty sequence."""


@dataclass(frozen=True, slots=True)
class NoneExpr:
    """#none: matches nothing at all."""


@dataclass(frozen=True, slots=True)
class Seq:
    items: tuple[Expr, ...]  # len >= 2, no direct Seq children


@dataclass(frozen=True, slots=True)
class Alt:
    items: tuple[Expr, ...]  # len >= 2, no direct Alt children


@dataclass(frozen=True, slots=True)
class Perm:
    items: tuple[Expr, ...]  # len >= 2; branches in any order, each once


@dataclass(frozen=True, slots=True)
class Opt:
    item: Expr


@dataclass(frozen=True, slots=True)
class Star:
    item: Expr


@dataclass(frozen=True, slots=True)
class Plus:
    item: Expr


@dataclass(frozen=True, slots=True)
class Insert:
    """@path: splice the referenced definition's model in place."""

    name: str


@dataclass(frozen=True, slots=True)
class Literal:
    text: str  # "..." exact character sequence, no escapes


@dataclass(frozen=True, slots=True)
class CharSet:
    members: str  # '...' any single char out of members


@dataclass(frozen=True, slots=True)
class NumericChar:
    codepoint: int  # 0xHEX single-char class


@dataclass(frozen=True, slots=True)
class Range:
    lo: Expr  # class-valued
    hi: Expr


@dataclass(frozen=True, slots=True)
class SetUnion:
    left: Expr  # class-valued, `U`
    right: Expr


@dataclass(frozen=True, slots=True)
class SetIntersect:
    left: Expr  # class-valued, `A`
    right: Expr


@dataclass(frozen=True, slots=True)
class SetMinus:
    left: Expr  # class-valued, `-`
    right: Expr


@dataclass(frozen=True, slots=True)
class TightSeq:
    items: tuple[Expr, ...]  # `~`: adjacency, no implicit whitespace


@dataclass(frozen=True, slots=True)
class TightStar:
    item: Expr  # `~*`


@dataclass(frozen=True, slots=True)
class TightPlus:
    item: Expr  # `~+`


@dataclass(frozen=True, slots=True)
class Greedy:
    """>T: of all hypotheses for T keep only those reaching farthest."""

    item: Expr


@dataclass(frozen=True, slots=True)
class Capture:
    """[id T]: wrap whatever T matches in an element named id."""

    name: str
    item: Expr


@dataclass(frozen=True, slots=True)
class LocalSubst:
    """base^(replacement/target): rewrite Ref(target) inside base.

    Resolved away by the module loader; the analyses and parsers never
    see this variant.
    """

    base: Expr
    replacement: Expr
    target: str


Expr = Union[
    Ref, CharsToken, Empty, NoneExpr,
    Seq, Alt, Perm, Opt, Star, Plus, Insert,
    Literal, CharSet, NumericChar, Range,
    SetUnion, SetIntersect, SetMinus,
    TightSeq, TightStar, TightPlus, Greedy, Capture, LocalSubst,
]


def seq(*items: Expr) -> Expr:
    """Flattening Seq constructor; unwraps the singleton."""
    flat: list[Expr] = []
    for it in items:
        flat.extend(it.items) if isinstance(it, Seq) else flat.append(it)
    return flat[0] if len(flat) == 1 else Seq(tuple(flat))


def alt(*items: Expr) -> Expr:
    flat: list[Expr] = []
    for it in items:
        flat.extend(it.items) if isinstance(it, Alt) else flat.append(it)
    return flat[0] if len(flat) == 1 else Alt(tuple(flat))


def perm(*items: Expr) -> Expr:
    flat: list[Expr] = []
    for it in items:
        flat.extend(it.items) if isinstance(it, Perm) else flat.append(it)
    return flat[0] if len(flat) == 1 else Perm(tuple(flat))


def tight_seq(*items: Expr) -> Expr:
    flat: list[Expr] = []
    for it in items:
        flat.extend(it.items) if isinstance(it, TightSeq) else flat.append(it)
    return flat[0] if len(flat) == 1 else TightSeq(tuple(flat))


# -- rendering --------------------------------------------------------------
#
# Precedence, loosest binding first.  render/parse round-trip: the ddf
# expression parser applied to render_expr(e) yields e again.

_PREC_ALT = 1
_PREC_PERM = 2
_PREC_SEQ = 3
_PREC_TIGHT = 4
_PREC_SET = 5
_PREC_RANGE = 6
_PREC_GREEDY = 7
_PREC_POSTFIX = 8
_PREC_ATOM = 9


def _prec(e: Expr) -> int:
    match e:
        case Alt():
            return _PREC_ALT
        case Perm():
            return _PREC_PERM
        case Seq():
            return _PREC_SEQ
        case TightSeq():
            return _PREC_TIGHT
        case SetUnion() | SetIntersect() | SetMinus():
            return _PREC_SET
        case Range():
            return _PREC_RANGE
        case Greedy():
            return _PREC_GREEDY
        case Opt() | Star() | Plus() | TightStar() | TightPlus() | LocalSubst():
            return _PREC_POSTFIX
        case _:
            return _PREC_ATOM


_SET_OP = {SetUnion: "U", SetIntersect: "A", SetMinus: "-"}


def render_expr(e: Expr) -> str:
    """Serialize an expression to ddf surface syntax, minimal parentheses."""
    return _render(e, 0)


def _render(e: Expr, context: int) -> str:
    p = _prec(e)
    match e:
        case Ref(name):
            s = name
        case Insert(name):
            s = "@" + name
        case CharsToken():
            s = "#chars"
        case Empty():
            s = "#empty"
        case NoneExpr():
            s = "#none"
        case Literal(text):
            s = '"' + text + '"'
        case CharSet(members):
            s = "'" + members + "'"
        case NumericChar(cp):
            s = f"0x{cp:X}"
        case Capture(name, item):
            s = f"[{name} {_render(item, 0)}]"
        case Alt(items):
            s = "|".join(_render(it, p + 1) for it in items)
        case Perm(items):
            s = "&".join(_render(it, p + 1) for it in items)
        case Seq(items):
            s = ",".join(_render(it, p + 1) for it in items)
        case TightSeq(items):
            s = "~".join(_render(it, p + 1) for it in items)
        case SetUnion(l, r) | SetIntersect(l, r) | SetMinus(l, r):
            # spaced so the operator never fuses with an operand when re-read
            s = _render(l, p) + " " + _SET_OP[type(e)] + " " + _render(r, p + 1)
        case Range(lo, hi):
            s = _render(lo, p + 1) + ".." + _render(hi, p + 1)
        case Greedy(item):
            s = ">" + _render(item, p)
        case Opt(item):
            s = _render(item, p) + "?"
        case Star(item):
            s = _render(item, p) + "*"
        case Plus(item):
            s = _render(item, p) + "+"
        case TightStar(item):
            s = _render(item, p) + "~*"
        case TightPlus(item):
            s = _render(item, p) + "~+"
        case LocalSubst(base, replacement, target):
            s = (_render(base, p) + "^(" + _render(replacement, 0)
                 + "/" + target + ")")
        case _:  # pragma: no cover - all variants handled above
            raise TypeError(f"unrenderable expression: {e!r}")
    return "(" + s + ")" if p < context else s


# ---------------------------------------------------------------------------
# Document nodes


@dataclass(frozen=True, slots=True)
class Element:
    tag: str
    children: tuple[Node, ...] = ()
    incomplete: bool = False  # closed by a forced close (or never closed)


@dataclass(frozen=True, slots=True)
class Chars:
    text: str


@dataclass(frozen=True, slots=True)
class Missing:
    """Placeholder for content the model required but the text lacked."""

    model: Expr


@dataclass(frozen=True, slots=True)
class Skipped:
    """A token the parser had to ignore to keep going."""

    token: Token


@dataclass(frozen=True, slots=True)
class CommentNode:
    text: str


@dataclass(frozen=True, slots=True)
class PermRecord:
    """Result of a permutation: which branch (by index) matched what.

    `filled` is kept in arrival order; emission flattens it in that order.
    """

    model: Expr  # the Perm expression
    filled: tuple[tuple[int, tuple[Node, ...]], ...]


Node = Union[Element, Chars, Missing, Skipped, CommentNode, PermRecord]


def element(tag: str, *children: Node, incomplete: bool = False) -> Element:
    return Element(tag, children, incomplete)


def merge_chars(nodes: list[Node]) -> list[Node]:
    """Fuse adjacent character-data nodes; used when packing elements."""
    out: list[Node] = []
    for n in nodes:
        if isinstance(n, Chars) and out and isinstance(out[-1], Chars):
            out[-1] = Chars(out[-1].text + n.text)
        else:
            out.append(n)
    return out


def has_recovery(node: Node) -> bool:
    """True when the tree records any skipped or missing material."""
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, (Missing, Skipped)):
            return True
        if isinstance(n, Element):
            stack.extend(n.children)
        elif isinstance(n, PermRecord):
            for _, nodes in n.filled:
                stack.extend(nodes)
    return False


# ---------------------------------------------------------------------------
# Definitions and resolved grammars


class DefKind(Enum):
    TAGS = auto()  # content model over tokens
    CHARS = auto()  # content model over characters


class IncompleteAction(Enum):
    MARK = auto()  # default: incomplete="true" attribute
    WARN = auto()
    ERROR = auto()


@dataclass(frozen=True, slots=True)
class Definition:
    name: str  # flat (import-qualified) name
    kind: DefKind
    expr: Expr
    xml_tag: str | None = None  # tag hint; None = last name segment
    xml_ns: str | None = None  # ns hint
    incomplete_action: IncompleteAction | None = None  # None = parser default

    @property
    def emit_tag(self) -> str:
        return self.xml_tag or self.name.rsplit(".", 1)[-1]


@dataclass(frozen=True, slots=True)
class Grammar:
    """A resolved, flat rule table plus the designated root."""

    root: str
    defs: dict[str, Definition] = field(hash=False)

    def __contains__(self, name: str) -> bool:
        return name in self.defs

    def __getitem__(self, name: str) -> Definition:
        return self.defs[name]
