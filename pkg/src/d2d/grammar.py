"""Static analysis over content models.

first sets and epsilon admissibility drive the parser's branch decisions;
validation reports where those decisions would be ambiguous.  All analysis
runs after `@`-insertions are expanded and local substitutions applied.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    Alt,
    Capture,
    CharSet,
    CharsToken,
    Definition,
    DefKind,
    Empty,
    Expr,
    Greedy,
    Insert,
    Literal,
    LocalSubst,
    NoneExpr,
    NumericChar,
    Opt,
    Perm,
    Plus,
    Range,
    Ref,
    render_expr,
    Seq,
    SetIntersect,
    SetMinus,
    SetUnion,
    Star,
    TightPlus,
    TightSeq,
    TightStar,
)

CHARS = "#chars"  # first-set marker: untagged character data acceptable


class GrammarError(Exception):
    """Definition-load error: unresolved reference or insertion cycle."""


@dataclass(frozen=True, slots=True)
class Diagnostic:
    definition: str  # fully qualified definition name
    path: str        # expression path within the definition
    overlap: frozenset[str]
    message: str

    def __str__(self) -> str:
        module, _, local = self.definition.rpartition(".")
        where = f"{module}:{local}" if module else local
        if self.overlap:
            tags = ", ".join(sorted(self.overlap))
            return f"{where}: {self.message} {{{tags}}}"
        return f"{where}: {self.message}"


_CHAR_LEVEL = (Literal, CharSet, NumericChar, Range, SetUnion, SetIntersect,
               SetMinus, TightSeq, TightStar, TightPlus, Greedy, Capture)


def language_nonempty(e: Expr, defs: dict[str, Definition],
                      _active: frozenset[str] = frozenset()) -> bool:
    """Whether e matches anything at all (#none poisons sequences)."""
    if isinstance(e, (Ref, CharsToken, Empty, Opt, Star)):
        return True
    if isinstance(e, NoneExpr):
        return False
    if isinstance(e, Insert):
        if e.name in _active:
            raise GrammarError(f"insertion cycle through @{e.name}")
        if e.name not in defs:
            raise GrammarError(f"unresolved insertion @{e.name}")
        return language_nonempty(defs[e.name].expr, defs, _active | {e.name})
    if isinstance(e, (Seq, Perm)):
        return all(language_nonempty(i, defs, _active) for i in e.items)
    if isinstance(e, Alt):
        return any(language_nonempty(i, defs, _active) for i in e.items)
    if isinstance(e, Plus):
        return language_nonempty(e.item, defs, _active)
    # character-level operation in tags context: validate_kind reports it;
    # at token level such an item can never match
    return False


def first(e: Expr, defs: dict[str, Definition],
          _active: frozenset[str] = frozenset()) -> frozenset[str]:
    """Tokens (tag names or #chars) that can begin a match of e.

    Exact: a sequence containing a never-matching item contributes
    nothing, since no match of the whole sequence exists.
    """
    if isinstance(e, Ref):
        return frozenset((e.name,))
    if isinstance(e, CharsToken):
        return frozenset((CHARS,))
    if isinstance(e, (Empty, NoneExpr)):
        return frozenset()
    if isinstance(e, Insert):
        if e.name in _active:
            raise GrammarError(f"insertion cycle through @{e.name}")
        if e.name not in defs:
            raise GrammarError(f"unresolved insertion @{e.name}")
        return first(defs[e.name].expr, defs, _active | {e.name})
    if isinstance(e, (Seq, Perm)):
        if not all(language_nonempty(i, defs, _active) for i in e.items):
            return frozenset()
        out: set[str] = set()
        if isinstance(e, Perm):
            for item in e.items:
                out |= first(item, defs, _active)
            return frozenset(out)
        for item in e.items:
            out |= first(item, defs, _active)
            if not pot_eps(item, defs, _active):
                break
        return frozenset(out)
    if isinstance(e, Alt):
        out = set()
        for item in e.items:
            out |= first(item, defs, _active)
        return frozenset(out)
    if isinstance(e, (Opt, Star, Plus)):
        return first(e.item, defs, _active)
    # character-level operation in tags context: never begins a token
    return frozenset()


def pot_eps(e: Expr, defs: dict[str, Definition],
            _active: frozenset[str] = frozenset()) -> bool:
    """Whether e accepts the empty token sequence.

    Ref is never epsilon-admissible: an element always produces a node.
    """
    if isinstance(e, Ref):
        return False
    if isinstance(e, CharsToken):
        return True  # a chars position may be satisfied by no characters
    if isinstance(e, Empty):
        return True
    if isinstance(e, NoneExpr):
        return False
    if isinstance(e, Insert):
        if e.name in _active:
            raise GrammarError(f"insertion cycle through @{e.name}")
        if e.name not in defs:
            raise GrammarError(f"unresolved insertion @{e.name}")
        return pot_eps(defs[e.name].expr, defs, _active | {e.name})
    if isinstance(e, (Seq, Perm)):
        return all(pot_eps(item, defs, _active) for item in e.items)
    if isinstance(e, Alt):
        return any(pot_eps(item, defs, _active) for item in e.items)
    if isinstance(e, (Opt, Star)):
        return True
    if isinstance(e, Plus):
        return pot_eps(e.item, defs, _active)
    # character-level operation in tags context: unmatchable, so never
    # epsilon-admissible
    return False


def expand_inserts(e: Expr, defs: dict[str, Definition],
                   _active: tuple[str, ...] = ()) -> Expr:
    """Replace every @name by the referred content model, recursively."""
    if isinstance(e, Insert):
        if e.name in _active:
            cycle = " -> ".join(_active + (e.name,))
            raise GrammarError(f"insertion cycle: {cycle}")
        if e.name not in defs:
            raise GrammarError(f"unresolved insertion @{e.name}")
        return expand_inserts(defs[e.name].expr, defs, _active + (e.name,))
    if isinstance(e, (Seq, Alt, Perm, TightSeq)):
        return type(e)(tuple(expand_inserts(i, defs, _active)
                             for i in e.items))
    if isinstance(e, (Opt, Star, Plus, TightStar, TightPlus, Greedy)):
        return type(e)(expand_inserts(e.item, defs, _active))
    if isinstance(e, Capture):
        return Capture(e.name, expand_inserts(e.item, defs, _active))
    if isinstance(e, LocalSubst):
        return LocalSubst(expand_inserts(e.base, defs, _active),
                          expand_inserts(e.replacement, defs, _active),
                          e.target)
    return e


def _seq_continuation_first(items: tuple[Expr, ...],
                            defs: dict[str, Definition]) -> frozenset[str]:
    out: set[str] = set()
    for item in items:
        out |= first(item, defs)
        if not pot_eps(item, defs):
            break
    return frozenset(out)


def _ext_first(e: Expr, defs: dict[str, Definition],
               _active: frozenset[str] = frozenset()) -> frozenset[str]:
    """Tokens that could extend an already-complete match of e.

    A repetition may take another item, and a nullable tail may still start;
    the greedy parser always consumes such a token inside e, so anything in
    this set that also follows e is a decision the parser gets wrong.
    """
    if isinstance(e, (Ref, CharsToken, Empty, NoneExpr)):
        return frozenset()
    if isinstance(e, Insert):
        if e.name in _active or e.name not in defs:
            return frozenset()
        return _ext_first(defs[e.name].expr, defs, _active | {e.name})
    if isinstance(e, Opt):
        return _ext_first(e.item, defs, _active) | first(e.item, defs)
    if isinstance(e, (Star, Plus)):
        return _ext_first(e.item, defs, _active) | first(e.item, defs)
    if isinstance(e, Alt):
        out: set[str] = set()
        for item in e.items:
            out |= _ext_first(item, defs, _active)
        return frozenset(out)
    if isinstance(e, Seq):
        out = set()
        for item in reversed(e.items):
            out |= _ext_first(item, defs, _active)
            if not pot_eps(item, defs):
                break
            out |= first(item, defs)
        return frozenset(out)
    if isinstance(e, Perm):
        out = set()
        for item in e.items:
            out |= _ext_first(item, defs, _active)
            if pot_eps(item, defs):
                out |= first(item, defs)
        return frozenset(out)
    return frozenset()


def validate_ll1(d: Definition,
                 defs: dict[str, Definition]) -> list[Diagnostic]:
    """Disjointness diagnostics for a tags-kind definition.

    An empty result means every branch decision the parser will face in
    this definition is determined by one token of lookahead.
    """
    if d.kind is not DefKind.TAGS:
        return []
    out: list[Diagnostic] = []

    def walk(e: Expr, path: str) -> None:
        if isinstance(e, (Alt, Perm)):
            word = "alt" if isinstance(e, Alt) else "perm"
            for a in range(len(e.items)):
                for b in range(a + 1, len(e.items)):
                    overlap = first(e.items[a], defs) & first(e.items[b],
                                                              defs)
                    if overlap:
                        out.append(Diagnostic(
                            d.name, f"{path}/{word}[{a},{b}]",
                            frozenset(overlap), "overlapping first set"))
            for k, item in enumerate(e.items):
                walk(item, f"{path}/{word}[{k}]")
        elif isinstance(e, Seq):
            for k, item in enumerate(e.items):
                risky = _ext_first(item, defs)
                if pot_eps(item, defs):
                    risky |= first(item, defs)
                cont = _seq_continuation_first(e.items[k + 1:], defs)
                overlap = risky & cont
                if overlap:
                    out.append(Diagnostic(
                        d.name, f"{path}/seq[{k}]",
                        frozenset(overlap), "overlapping first set"))
                walk(item, f"{path}/seq[{k}]")
        elif isinstance(e, (Opt, Star, Plus)):
            walk(e.item, f"{path}/{type(e).__name__.lower()}")

    walk(d.expr, d.name)
    return out


def validate_kind(d: Definition,
                  defs: dict[str, Definition]) -> list[Diagnostic]:
    """Check that a definition only uses operators of its level."""
    out: list[Diagnostic] = []

    def bad(e: Expr, why: str) -> None:
        out.append(Diagnostic(d.name, render_expr(e), frozenset(), why))

    def walk(e: Expr) -> None:
        if d.kind is DefKind.TAGS:
            if isinstance(e, _CHAR_LEVEL):
                bad(e, "character-level operation in a tags definition")
                return
        else:
            if isinstance(e, (Ref, CharsToken, Star, Plus, Perm, Empty,
                              NoneExpr, Insert)):
                bad(e, "tag-level operation in a chars definition")
                return
        if isinstance(e, (Seq, Alt, Perm, TightSeq)):
            for item in e.items:
                walk(item)
        elif isinstance(e, (Opt, Star, Plus, TightStar, TightPlus, Greedy)):
            walk(e.item)
        elif isinstance(e, Capture):
            walk(e.item)
        elif isinstance(e, (SetUnion, SetIntersect, SetMinus)):
            for side in (e.left, e.right):
                if not isinstance(side, (CharSet, NumericChar, Range,
                                         SetUnion, SetIntersect, SetMinus)):
                    bad(side, "set operand is not a character class")
                else:
                    walk(side)
        elif isinstance(e, Range):
            for bound in (e.lo, e.hi):
                if not (isinstance(bound, NumericChar)
                        or (isinstance(bound, CharSet)
                            and len(bound.members) == 1)):
                    bad(bound, "range bound is not a single character")
        elif isinstance(e, LocalSubst):
            bad(e, "unresolved local substitution")

    walk(d.expr)
    return out
