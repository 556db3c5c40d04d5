"""Non-deterministic character-level parsing for chars-kind definitions.

A hypothesis is (position, results-so-far).  Matching an expression maps
one hypothesis to the ordered set of hypotheses reachable from it; order
is derivation order (alternative branches in written order) and is what
makes tie-breaking among equally long matches deterministic.
"""

from __future__ import annotations

from typing import Callable

from .model import (
    Alt,
    Capture,
    Chars,
    CharSet,
    Definition,
    Empty,
    Expr,
    Greedy,
    Literal,
    Node,
    NoneExpr,
    NumericChar,
    Opt,
    Range,
    Seq,
    SetIntersect,
    SetMinus,
    SetUnion,
    TightPlus,
    TightSeq,
    TightStar,
    element,
)

Hypothesis = tuple[int, tuple[Node, ...]]

WS_CLASS = CharSet(" \t\n\r")  # whitespace admitted by the `,` connector

DEFAULT_STEP_BUDGET = 1_000_000

TraceFn = Callable[[Expr, Hypothesis, list[Hypothesis]], None]


class CharParseError(Exception):
    pass


class BudgetExceeded(CharParseError):
    pass


class _Budget:
    __slots__ = ("left",)

    def __init__(self, steps: int):
        self.left = steps

    def tick(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise BudgetExceeded()


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
    raise CharParseError("range bound must be a single character")


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
    raise CharParseError(f"not a character class: {type(e).__name__}")


def _class_run_end(e: Expr, buffer: str, pos: int) -> int:
    while pos < len(buffer) and char_in_class(e, buffer[pos]):
        pos += 1
    return pos


def _dedup(hs: list[Hypothesis]) -> list[Hypothesis]:
    seen: set[Hypothesis] = set()
    out = []
    for h in hs:
        if h not in seen:
            seen.add(h)
            out.append(h)
    return out


def cparse(e: Expr, h: Hypothesis, buffer: str,
           budget: _Budget | None = None,
           trace: TraceFn | None = None) -> list[Hypothesis]:
    """All hypotheses reachable by matching e at h, in derivation order."""
    if budget is None:
        budget = _Budget(DEFAULT_STEP_BUDGET)
    budget.tick()
    pos, results = h

    out: list[Hypothesis]
    if is_char_class(e):
        if pos < len(buffer) and char_in_class(e, buffer[pos]):
            out = [(pos + 1, results)]
        else:
            out = []
    elif isinstance(e, Literal):
        if buffer.startswith(e.text, pos):
            out = [(pos + len(e.text), results)]
        else:
            out = []
    elif isinstance(e, Empty):
        out = [h]
    elif isinstance(e, NoneExpr):
        out = []
    elif isinstance(e, TightSeq):
        hs = [h]
        for item in e.items:
            hs = cparse_m(item, hs, buffer, budget, trace)
        out = hs
    elif isinstance(e, Seq):
        # the `,` connector admits a whitespace run between the operands
        hs = [h]
        for k, item in enumerate(e.items):
            if k:
                hs = cparse_m(TightStar(WS_CLASS), hs, buffer, budget, trace)
            hs = cparse_m(item, hs, buffer, budget, trace)
        out = hs
    elif isinstance(e, Alt):
        out = []
        for item in e.items:
            out.extend(cparse(item, h, buffer, budget, trace))
        out = _dedup(out)
    elif isinstance(e, Opt):
        out = _dedup(cparse(e.item, h, buffer, budget, trace) + [h])
    elif isinstance(e, TightStar):
        if is_char_class(e.item):
            out = [(_class_run_end(e.item, buffer, pos), results)]
        else:
            out = _star_closure(e.item, h, buffer, budget, trace)
    elif isinstance(e, TightPlus):
        if is_char_class(e.item):
            end = _class_run_end(e.item, buffer, pos)
            out = [(end, results)] if end > pos else []
        else:
            once = cparse(e.item, h, buffer, budget, trace)
            out = []
            for h2 in once:
                out.extend(_star_closure(e.item, h2, buffer, budget, trace))
            out = _dedup(out)
    elif isinstance(e, Greedy):
        inner = cparse(e.item, h, buffer, budget, trace)
        if inner:
            best = max(p for p, _ in inner)
            out = [next(h2 for h2 in inner if h2[0] == best)]
        else:
            out = []
    elif isinstance(e, Capture):
        inner = cparse(e.item, (pos, ()), buffer, budget, trace)
        out = []
        for p2, r2 in inner:
            children = r2 if r2 else (Chars(buffer[pos:p2]),)
            out.append((p2, results + (element(e.name, *children),)))
        out = _dedup(out)
    else:
        raise CharParseError(
            f"operator not supported on the character level: "
            f"{type(e).__name__}")

    if trace is not None:
        trace(e, h, out)
    return out


def _star_closure(body: Expr, h: Hypothesis, buffer: str, budget: _Budget,
                  trace: TraceFn | None) -> list[Hypothesis]:
    # zero-width iterations are taken once but never re-expanded, so
    # accumulating captures cannot grow a hypothesis forever
    out = [h]
    seen = {h}
    frontier = [h]
    while frontier:
        next_frontier = []
        for h2 in frontier:
            for h3 in cparse(body, h2, buffer, budget, trace):
                if h3 in seen:
                    continue
                seen.add(h3)
                out.append(h3)
                if h3[0] > h2[0]:
                    next_frontier.append(h3)
        frontier = next_frontier
    return out


def cparse_m(e: Expr, hs: list[Hypothesis], buffer: str,
             budget: _Budget | None = None,
             trace: TraceFn | None = None) -> list[Hypothesis]:
    """Pointwise union of cparse over an ordered hypothesis set."""
    if budget is None:
        budget = _Budget(DEFAULT_STEP_BUDGET)
    out: list[Hypothesis] = []
    for h in hs:
        out.extend(cparse(e, h, buffer, budget, trace))
    return _dedup(out)


def run_char_parser(
        d: Definition, buffer: str, start: int = 0,
        step_budget: int = DEFAULT_STEP_BUDGET,
        trace: TraceFn | None = None) -> tuple[int, list[Node]] | None:
    """Longest-match invocation for one chars-kind definition.

    Returns (consumed, [element]) for the best hypothesis, or None when
    nothing matches; ties on length go to the first hypothesis in
    derivation order.
    """
    budget = _Budget(step_budget)
    try:
        hs = cparse(d.expr, (start, ()), buffer, budget, trace)
    except BudgetExceeded:
        raise CharParseError(
            f"step budget exceeded while parsing {d.name}") from None
    if not hs:
        return None
    best = max(p for p, _ in hs)
    results = next(r for p, r in hs if p == best)
    children = results if results else (Chars(buffer[start:best]),)
    return best - start, [element(d.name, *children)]
