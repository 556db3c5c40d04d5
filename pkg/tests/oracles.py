"""Brute-force reference implementations used only by the test suite.

Nothing here is optimized and nothing here shares code with the package
under test: first sets come from language derivatives, nullability from a
set-based matcher, character matching from direct set recursion.  The real
modules must agree with these on every generated case.
"""

from __future__ import annotations

import itertools
import random

from d2d.model import (
    Alt,
    Capture,
    CharSet,
    CharsToken,
    Empty,
    Expr,
    Greedy,
    Literal,
    NoneExpr,
    NumericChar,
    Opt,
    Perm,
    Plus,
    Range,
    Ref,
    Seq,
    SetIntersect,
    SetMinus,
    SetUnion,
    Star,
    TightPlus,
    TightSeq,
    TightStar,
)

CHARS_SYMBOL = "#chars"  # token-class symbol; cannot collide with tag names


# -- tag-level token matching ------------------------------------------------

def consumable(e: Expr, seq: tuple[str, ...]) -> set[int]:
    """All prefix lengths of seq that e can consume."""
    if isinstance(e, Ref):
        return {1} if seq[:1] == (e.name,) else set()
    if isinstance(e, CharsToken):
        run = 0
        while run < len(seq) and seq[run] == CHARS_SYMBOL:
            run += 1
        return set(range(run + 1))
    if isinstance(e, Empty):
        return {0}
    if isinstance(e, NoneExpr):
        return set()
    if isinstance(e, Seq):
        positions = {0}
        for item in e.items:
            positions = {p + d for p in positions
                         for d in consumable(item, seq[p:])}
        return positions
    if isinstance(e, Alt):
        out: set[int] = set()
        for item in e.items:
            out |= consumable(item, seq)
        return out
    if isinstance(e, Opt):
        return consumable(e.item, seq) | {0}
    if isinstance(e, Star):
        positions = {0}
        frontier = {0}
        while frontier:
            new = {p + d for p in frontier
                   for d in consumable(e.item, seq[p:]) if d > 0}
            frontier = new - positions
            positions |= new
        return positions
    if isinstance(e, Plus):
        first_step = consumable(e.item, seq)
        rest = Star(e.item)
        return {p + d for p in first_step for d in consumable(rest, seq[p:])}
    if isinstance(e, Perm):
        out = set()
        for order in itertools.permutations(e.items):
            out |= consumable(Seq(tuple(order)), seq)
        return out
    raise TypeError(f"not a tag-level expression: {type(e).__name__}")


def accepts(e: Expr, seq: tuple[str, ...]) -> bool:
    return len(seq) in consumable(e, seq)


def nullable(e: Expr) -> bool:
    return accepts(e, ())


# -- first sets via language derivatives --------------------------------------

def _derivative(e: Expr, a: str) -> Expr:
    """An expression for {w | a·w in L(e)}."""
    if isinstance(e, Ref):
        return Empty() if e.name == a else NoneExpr()
    if isinstance(e, CharsToken):
        return CharsToken() if a == CHARS_SYMBOL else NoneExpr()
    if isinstance(e, (Empty, NoneExpr)):
        return NoneExpr()
    if isinstance(e, Seq):
        head, tail = e.items[0], e.items[1:]
        rest: Expr = Seq(tail) if len(tail) > 1 else (
            tail[0] if tail else Empty())
        branches: list[Expr] = [Seq((_derivative(head, a), rest))]
        if nullable(head):
            branches.append(_derivative(rest, a))
        return Alt(tuple(branches))
    if isinstance(e, Alt):
        return Alt(tuple(_derivative(item, a) for item in e.items))
    if isinstance(e, Opt):
        return _derivative(e.item, a)
    if isinstance(e, Star):
        return Seq((_derivative(e.item, a), e))
    if isinstance(e, Plus):
        return Seq((_derivative(e.item, a), Star(e.item)))
    if isinstance(e, Perm):
        branches = []
        for j, item in enumerate(e.items):
            others = e.items[:j] + e.items[j + 1:]
            rest = Perm(others) if len(others) > 1 else (
                others[0] if others else Empty())
            branches.append(Seq((_derivative(item, a), rest)))
            if nullable(item):
                branches.append(_derivative(rest, a))
        return Alt(tuple(branches))
    raise TypeError(f"not a tag-level expression: {type(e).__name__}")


def _language_nonempty(e: Expr) -> bool:
    if isinstance(e, (Ref, CharsToken, Empty, Opt, Star)):
        return True
    if isinstance(e, NoneExpr):
        return False
    if isinstance(e, (Seq, Perm)):
        return all(_language_nonempty(item) for item in e.items)
    if isinstance(e, Alt):
        return any(_language_nonempty(item) for item in e.items)
    if isinstance(e, Plus):
        return _language_nonempty(e.item)
    raise TypeError(f"not a tag-level expression: {type(e).__name__}")


def alphabet_of(e: Expr) -> set[str]:
    if isinstance(e, Ref):
        return {e.name}
    if isinstance(e, CharsToken):
        return {CHARS_SYMBOL}
    if isinstance(e, (Seq, Alt, Perm)):
        out: set[str] = set()
        for item in e.items:
            out |= alphabet_of(item)
        return out
    if isinstance(e, (Opt, Star, Plus)):
        return alphabet_of(e.item)
    return set()


def first_symbols(e: Expr) -> set[str]:
    """Exact first set: symbols a with L(e) ∩ a·Σ* nonempty."""
    return {a for a in alphabet_of(e)
            if _language_nonempty(_derivative(e, a))}


def viable_continuations(e: Expr, consumed: tuple[str, ...]) -> set[str]:
    """Symbols s for which consumed + (s,) is still a viable prefix of L(e)."""
    d = e
    for sym in consumed:
        d = _derivative(d, sym)
    return {sym for sym in alphabet_of(e) | {CHARS_SYMBOL}
            if _language_nonempty(_derivative(d, sym))}


# -- character-level matching --------------------------------------------------

_WS_CHARS = " \t\n\r"


def char_in_class(e: Expr, c: str) -> bool:
    if isinstance(e, CharSet):
        return c in e.members
    if isinstance(e, NumericChar):
        return ord(c) == e.codepoint
    if isinstance(e, Range):
        return _single(e.lo) <= c <= _single(e.hi)
    if isinstance(e, SetUnion):
        return char_in_class(e.left, c) or char_in_class(e.right, c)
    if isinstance(e, SetIntersect):
        return char_in_class(e.left, c) and char_in_class(e.right, c)
    if isinstance(e, SetMinus):
        return char_in_class(e.left, c) and not char_in_class(e.right, c)
    raise TypeError(f"not a character class: {type(e).__name__}")


def is_char_class(e: Expr) -> bool:
    return isinstance(e, (CharSet, NumericChar, Range,
                          SetUnion, SetIntersect, SetMinus))


def _single(e: Expr) -> str:
    if isinstance(e, Literal) and len(e.text) == 1:
        return e.text
    if isinstance(e, NumericChar):
        return chr(e.codepoint)
    if isinstance(e, CharSet) and len(e.members) == 1:
        return e.members
    raise TypeError("range bound must denote a single character")


def _class_run_end(e: Expr, text: str, pos: int) -> int:
    while pos < len(text) and char_in_class(e, text[pos]):
        pos += 1
    return pos


def char_ends(e: Expr, text: str, pos: int) -> set[int]:
    """All end positions reachable by matching e at pos.

    Repetition over a plain character class is greedy (single maximal
    run); everything else is fully non-deterministic.
    """
    if is_char_class(e):
        if pos < len(text) and char_in_class(e, text[pos]):
            return {pos + 1}
        return set()
    if isinstance(e, Literal):
        if text.startswith(e.text, pos):
            return {pos + len(e.text)}
        return set()
    if isinstance(e, Empty):
        return {pos}
    if isinstance(e, NoneExpr):
        return set()
    if isinstance(e, TightSeq):
        positions = {pos}
        for item in e.items:
            positions = {q for p in positions for q in char_ends(item,
                                                                 text, p)}
        return positions
    if isinstance(e, Seq):  # loose: greedy whitespace run between items
        positions = {pos}
        for k, item in enumerate(e.items):
            if k:
                positions = {_class_run_end(CharSet(_WS_CHARS), text, p)
                             for p in positions}
            positions = {q for p in positions for q in char_ends(item,
                                                                 text, p)}
        return positions
    if isinstance(e, Alt):
        out: set[int] = set()
        for item in e.items:
            out |= char_ends(item, text, pos)
        return out
    if isinstance(e, Opt):
        return char_ends(e.item, text, pos) | {pos}
    if isinstance(e, TightStar):
        if is_char_class(e.item):
            return {_class_run_end(e.item, text, pos)}
        positions = {pos}
        frontier = {pos}
        while frontier:
            new = {q for p in frontier
                   for q in char_ends(e.item, text, p) if q > p}
            frontier = new - positions
            positions |= new
        return positions
    if isinstance(e, TightPlus):
        if is_char_class(e.item):
            end = _class_run_end(e.item, text, pos)
            return {end} if end > pos else set()
        once = char_ends(e.item, text, pos)
        return {q for p in once for q in char_ends(TightStar(e.item),
                                                   text, p)}
    if isinstance(e, Greedy):
        ends = char_ends(e.item, text, pos)
        return {max(ends)} if ends else set()
    if isinstance(e, Capture):
        return char_ends(e.item, text, pos)
    raise TypeError(f"not a character-level expression: {type(e).__name__}")


# -- random expression generators ----------------------------------------------

def random_tag_expr(rng: random.Random, refs: list[str],
                    depth: int) -> Expr:
    if depth <= 0:
        return rng.choice([
            Ref(rng.choice(refs)), CharsToken(), Empty(),
            Ref(rng.choice(refs)),
        ])
    kind = rng.randrange(8)
    sub = lambda: random_tag_expr(rng, refs, depth - 1)  # noqa: E731
    if kind == 0:
        return Seq(tuple(sub() for _ in range(rng.randint(2, 3))))
    if kind == 1:
        return Alt(tuple(sub() for _ in range(rng.randint(2, 3))))
    if kind == 2:
        return Perm(tuple(sub() for _ in range(2)))
    if kind == 3:
        return Opt(sub())
    if kind == 4:
        return Star(sub())
    if kind == 5:
        return Plus(sub())
    return random_tag_expr(rng, refs, 0)


def random_char_expr(rng: random.Random, depth: int,
                     alphabet: str = "abc") -> Expr:
    if depth <= 0:
        choices: list[Expr] = [
            Literal(rng.choice(alphabet)),
            Literal("".join(rng.choice(alphabet)
                            for _ in range(rng.randint(0, 2)))),
            CharSet("".join(sorted(set(
                rng.choice(alphabet) for _ in range(2))))),
            Range(Literal(alphabet[0]), Literal(rng.choice(alphabet))),
            NumericChar(ord(rng.choice(alphabet))),
        ]
        return rng.choice(choices)
    kind = rng.randrange(9)
    sub = lambda: random_char_expr(rng, depth - 1, alphabet)  # noqa: E731
    if kind == 0:
        return TightSeq(tuple(sub() for _ in range(2)))
    if kind == 1:
        return Seq(tuple(sub() for _ in range(2)))
    if kind == 2:
        return Alt(tuple(sub() for _ in range(rng.randint(2, 3))))
    if kind == 3:
        return Opt(sub())
    if kind == 4:
        return TightStar(sub())
    if kind == 5:
        return TightPlus(sub())
    if kind == 6:
        return Greedy(sub())
    if kind == 7:
        return Capture(f"c{rng.randrange(3)}", sub())
    return random_char_expr(rng, 0, alphabet)
