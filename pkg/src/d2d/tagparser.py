"""Token-stream to tree translation with automatic close inference.

The parser runs an LL(1) stack machine over the token stream.  Each stack
frame tracks one piece of pending content model; the bottom frame is never
popped, so every run produces a tree.  Recovery is total: a token that fits
nowhere becomes a Skipped node, and content the model required but never
saw becomes a Missing node.

Close tags may be omitted wherever the next token determines them.  An
Open or Chars token that does not fit the current frame triggers an upward
search (ascend): enclosing elements are packed as if explicitly closed
until a frame that accepts the token is found.  If no frame accepts it,
the stack is left exactly as it was and the token is skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .charparser import CharParseError, run_char_parser
from .charparser import TraceFn as CharTraceFn
from .grammar import CHARS, first, pot_eps
from .model import (
    Alt,
    Chars,
    CharsToken,
    CommentNode,
    Definition,
    DefKind,
    Element,
    Expr,
    IncompleteAction,
    Missing,
    Node,
    Opt,
    Perm,
    PermRecord,
    Plus,
    Ref,
    Seq,
    Skipped,
    Star,
    Token,
    TokenKind,
    merge_chars,
)

__all__ = ["ParseResult", "text2tree", "TraceFn", "DIAG_SLOT"]

TraceFn = Callable[[str], None]

# PermRecord slot index for diagnostic-only entries: a Missing for mandatory
# branches that were still open when no branch was active to receive it.
DIAG_SLOT = -1


@dataclass(frozen=True, slots=True)
class ParseResult:
    root: Element
    diagnostics: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Stack frames
#
# ElemFrame marks an open element; the frames above it build its content.
# SeqFrame holds the not-yet-matched tail of a sequence.  RepFrame collects
# repetitions of its body.  PermFrame tracks which permutation branches are
# filled; while a branch is being matched its frames sit above and `active`
# remembers which branch they belong to.


@dataclass(slots=True)
class _ElemFrame:
    tag: str
    nodes: list[Node] = field(default_factory=list)
    incomplete: bool = False

    def clone(self) -> _ElemFrame:
        return _ElemFrame(self.tag, list(self.nodes), self.incomplete)


@dataclass(slots=True)
class _SeqFrame:
    remaining: list[Expr]
    nodes: list[Node] = field(default_factory=list)

    def clone(self) -> _SeqFrame:
        return _SeqFrame(list(self.remaining), list(self.nodes))


@dataclass(slots=True)
class _RepFrame:
    body: Expr
    nodes: list[Node] = field(default_factory=list)

    def clone(self) -> _RepFrame:
        return _RepFrame(self.body, list(self.nodes))


@dataclass(slots=True)
class _PermFrame:
    expr: Perm
    filled: list[tuple[int, tuple[Node, ...]]] = field(default_factory=list)
    active: int | None = None

    def clone(self) -> _PermFrame:
        return _PermFrame(self.expr, list(self.filled), self.active)

    def unfilled(self) -> list[int]:
        done = {i for i, _ in self.filled}
        return [i for i in range(len(self.expr.items)) if i not in done]


_Frame = _ElemFrame | _SeqFrame | _RepFrame | _PermFrame


class _Parser:
    def __init__(
        self,
        tokens: list[Token],
        grammar_root: str,
        defs: dict[str, Definition],
        *,
        keep_comments: bool = False,
        default_incomplete: IncompleteAction = IncompleteAction.MARK,
        trace: TraceFn | None = None,
        char_trace: CharTraceFn | None = None,
    ) -> None:
        self.tokens = tokens
        self.pos = 0
        self.pending: list[Token] = []  # pushback, last in first out
        self.root = grammar_root
        self.defs = defs
        self.keep_comments = keep_comments
        self.default_incomplete = default_incomplete
        self.trace = trace
        self.char_trace = char_trace
        self.diagnostics: list[str] = []
        self.stack: list[_Frame] = [_SeqFrame([Ref(grammar_root)])]

    # -- token stream --------------------------------------------------------

    def _next(self) -> Token:
        if self.pending:
            return self.pending.pop()
        if self.pos < len(self.tokens):
            tok = self.tokens[self.pos]
            self.pos += 1
            return tok
        return Token(TokenKind.EOF)

    def _peek(self) -> Token:
        if self.pending:
            return self.pending[-1]
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return Token(TokenKind.EOF)

    def _push_back(self, tok: Token) -> None:
        self.pending.append(tok)

    # -- first sets over frames ------------------------------------------------

    def _first(self, e: Expr) -> frozenset[str]:
        return first(e, self.defs)

    def _seq_first(self, items: list[Expr]) -> frozenset[str]:
        out: set[str] = set()
        for item in items:
            out |= self._first(item)
            if not pot_eps(item, self.defs):
                break
        return frozenset(out)

    def _frame_first(self, f: _Frame) -> frozenset[str]:
        if isinstance(f, _SeqFrame):
            return self._seq_first(f.remaining)
        if isinstance(f, _RepFrame):
            return self._first(f.body)
        if isinstance(f, _PermFrame):
            out: set[str] = set()
            for i in f.unfilled():
                if i != f.active:
                    out |= self._first(f.expr.items[i])
            return frozenset(out)
        return frozenset()  # ElemFrame ends only at an explicit or inferred close

    # -- tracing -----------------------------------------------------------------

    def _log(self, tok: Token, action: str) -> None:
        if self.trace is None:
            return
        if tok.kind is TokenKind.CHARS:
            label = "CHARS %r" % tok.text
        elif tok.tag is not None:
            label = "%s %s" % (tok.kind.name, tok.tag)
        elif tok.kind in (TokenKind.CLOSE, TokenKind.CLOSE_FORCED):
            label = "%s *" % tok.kind.name
        else:
            label = tok.kind.name
        self.trace("%s | %d | %s" % (label, len(self.stack), action))

    # -- node attachment -----------------------------------------------------------

    def _attach_top(self, node: Node) -> None:
        top = self.stack[-1]
        if isinstance(top, _PermFrame):
            # stray material between branches lands in a diagnostic slot
            top.filled.append((DIAG_SLOT, (node,)))
        else:
            top.nodes.append(node)

    # -- descend: open content matching `sym` at the top of the stack ---------------

    def _descend_expr(self, e: Expr, sym: str) -> None:
        """Push frames matching `sym` inside `e`.  Requires sym in first(e)."""
        while True:
            if isinstance(e, Ref):
                self._enter_ref(e.name)
                return
            if isinstance(e, Seq):
                items = list(e.items)
                while items and sym not in self._first(items[0]):
                    items.pop(0)  # epsilon heads shed silently on the way down
                head = items.pop(0)
                if items:
                    self.stack.append(_SeqFrame(items))
                e = head
                continue
            if isinstance(e, Alt):
                for b in e.items:
                    if sym in self._first(b):
                        e = b
                        break
                else:  # pragma: no cover - caller checked first(e)
                    raise AssertionError("no alternative matches %s" % sym)
                continue
            if isinstance(e, Opt):
                e = e.item
                continue
            if isinstance(e, (Star, Plus)):
                self.stack.append(_RepFrame(e.item))
                e = e.item
                continue
            if isinstance(e, Perm):
                pf = _PermFrame(e)
                self.stack.append(pf)
                self._activate_perm(pf, sym)
                self._descend_top(sym)  # keep matching inside the branch
                return
            if isinstance(e, CharsToken):
                return  # chars attach to the enclosing frame, no frame of their own
            raise AssertionError("descend into %r" % (e,))  # pragma: no cover

    def _enter_ref(self, name: str) -> None:
        d = self.defs[name]
        if d.kind is DefKind.CHARS:
            self._run_char_def(d)
            return
        self.stack.append(_ElemFrame(name))
        self.stack.append(_SeqFrame([d.expr]))

    def _activate_perm(self, pf: _PermFrame, sym: str) -> None:
        for i in pf.unfilled():
            if sym in self._first(pf.expr.items[i]):
                pf.active = i
                self.stack.append(_SeqFrame([pf.expr.items[i]]))
                return
        raise AssertionError("perm activation without match")  # pragma: no cover

    def _descend_top(self, sym: str) -> None:
        """Advance the top frame to accept `sym`.  Requires sym in its first set."""
        top = self.stack[-1]
        if isinstance(top, _SeqFrame):
            while top.remaining and sym not in self._first(top.remaining[0]):
                top.remaining.pop(0)
            head = top.remaining.pop(0)
            self._descend_expr(head, sym)
        elif isinstance(top, _RepFrame):
            self._descend_expr(top.body, sym)
        elif isinstance(top, _PermFrame):
            self._activate_perm(top, sym)
            self._descend_top(sym)
        else:  # pragma: no cover - ElemFrame first set is empty
            raise AssertionError("descend at element frame")

    # -- character-level definitions ---------------------------------------------------

    def _run_char_def(self, d: Definition) -> None:
        """An Open for a character-level definition has been consumed; the
        following run of Chars tokens is the micro-parser's buffer."""
        parts: list[str] = []
        while self._peek().kind is TokenKind.CHARS:
            parts.append(self._next().text)
        buffer = "".join(parts)
        try:
            parsed = run_char_parser(d, buffer, trace=self.char_trace)
            fail_msg = "no character-level match for %s" % d.name
        except CharParseError as exc:
            parsed = None
            fail_msg = str(exc)
        if parsed is None:
            elem: Node = Element(d.name, (Missing(d.expr),))
            rest = buffer
            self.diagnostics.append(fail_msg)
        else:
            consumed, nodes = parsed
            elem = nodes[0]
            rest = buffer[consumed:]
        if rest and not rest.isspace():
            self._push_back(Token(TokenKind.CHARS, text=rest))
        else:
            # whitespace-only leftover is the separator before the next
            # command, not content
            nxt = self._peek()
            if nxt.kind in (TokenKind.CLOSE, TokenKind.CLOSE_FORCED) and nxt.tag in (
                d.name,
                None,
            ):
                self._next()  # explicit close is honoured but never required
                if nxt.kind is TokenKind.CLOSE_FORCED and isinstance(elem, Element):
                    elem = Element(elem.tag, elem.children, incomplete=True)
        self._attach_top(elem)

    # -- ascend: pack frames upward ----------------------------------------------------

    def _pack_elem(self, f: _ElemFrame, acc: list[Node], forced: bool) -> Element:
        if forced:
            d = self.defs.get(f.tag)
            action = (d.incomplete_action if d else None) or self.default_incomplete
            if action is not IncompleteAction.MARK:
                msg = "forced close of incomplete element %s" % f.tag
                if action is IncompleteAction.ERROR:
                    msg = "error: " + msg
                self.diagnostics.append(msg)
        return Element(
            f.tag,
            tuple(merge_chars(f.nodes + acc)),
            incomplete=f.incomplete or forced,
        )

    def _perm_record(self, f: _PermFrame, acc: list[Node]) -> PermRecord:
        """Close out a permutation: record the active branch's content (if
        any), then note still-mandatory branches as one Missing whose model
        is the &-join of what was never seen."""
        filled = list(f.filled)
        if f.active is not None:
            filled.append((f.active, tuple(merge_chars(acc))))
        rest = [
            f.expr.items[i]
            for i in f.unfilled()
            if i != f.active and not pot_eps(f.expr.items[i], self.defs)
        ]
        if rest:
            missing = Missing(rest[0] if len(rest) == 1 else Perm(tuple(rest)))
            if f.active is not None:
                i, nodes = filled[-1]
                filled[-1] = (i, nodes + (missing,))
            else:
                filled.append((DIAG_SLOT, (missing,)))
        return PermRecord(f.expr, tuple(filled))

    def _ascend_open(self, sym: str) -> list[_Frame] | None:
        """Search upward for a frame that accepts `sym`, packing elements and
        recording missing content on the way.  Returns the adopted stack, or
        None when no frame accepts the symbol (caller keeps the original)."""
        work = [f.clone() for f in self.stack]
        acc: list[Node] = []
        while len(work) > 1:
            f = work[-1]
            if isinstance(f, _ElemFrame):
                elem = self._pack_elem(f, acc, forced=False)
                work.pop()
                acc = [elem]
            elif isinstance(f, _RepFrame):
                if sym in self._first(f.body):
                    f.nodes.extend(acc)
                    return work
                work.pop()
                acc = f.nodes + acc
            elif isinstance(f, _SeqFrame):
                stopped = False
                while f.remaining:
                    head = f.remaining[0]
                    if sym in self._first(head):
                        f.nodes.extend(acc)
                        stopped = True
                        break
                    f.remaining.pop(0)
                    if not pot_eps(head, self.defs):
                        acc.append(Missing(head))
                if stopped:
                    return work
                work.pop()
                acc = f.nodes + acc
            else:  # PermFrame
                if f.active is not None:
                    hit = any(
                        sym in self._first(f.expr.items[i])
                        for i in f.unfilled()
                        if i != f.active
                    )
                    if hit:
                        f.filled.append((f.active, tuple(merge_chars(acc))))
                        f.active = None
                        return work
                else:
                    if any(
                        sym in self._first(f.expr.items[i]) for i in f.unfilled()
                    ):
                        return work
                record = self._perm_record(f, acc)
                work.pop()
                acc = [record]
        # bottom frame: walk the remaining sequence but never pop it
        f = work[0]
        assert isinstance(f, _SeqFrame)
        while f.remaining:
            head = f.remaining[0]
            if sym in self._first(head):
                f.nodes.extend(acc)
                return work
            f.remaining.pop(0)
            if not pot_eps(head, self.defs):
                acc.append(Missing(head))
        return None

    def _ascend_close(self, tag: str | None, forced: bool) -> list[_Frame] | None:
        """Close the innermost element named `tag` (any element when None),
        packing everything on the way.  Returns the adopted stack or None."""
        work = [f.clone() for f in self.stack]
        acc: list[Node] = []
        while len(work) > 1:
            f = work[-1]
            if isinstance(f, _ElemFrame):
                if tag is None or f.tag == tag:
                    elem = self._pack_elem(f, acc, forced)
                    work.pop()
                    below = work[-1]
                    if isinstance(below, _PermFrame):
                        below.filled.append((DIAG_SLOT, (elem,)))
                    else:
                        below.nodes.append(elem)
                    return work
                elem = self._pack_elem(f, acc, forced=False)
                work.pop()
                acc = [elem]
            elif isinstance(f, _RepFrame):
                work.pop()
                acc = f.nodes + acc
            elif isinstance(f, _SeqFrame):
                for head in f.remaining:
                    if not pot_eps(head, self.defs):
                        acc.append(Missing(head))
                work.pop()
                acc = f.nodes + acc
            else:  # PermFrame
                record = self._perm_record(f, acc)
                work.pop()
                acc = [record]
        return None

    # -- recovery ---------------------------------------------------------------------

    def _skip(self, tok: Token) -> None:
        self._attach_top(Skipped(tok))
        self._skip_chars()

    def _skip_chars(self) -> None:
        while self._peek().kind is TokenKind.CHARS:
            self._attach_top(Skipped(self._next()))

    # -- main loop ----------------------------------------------------------------------

    def run(self) -> ParseResult:
        while True:
            tok = self._next()
            kind = tok.kind
            if kind is TokenKind.EOF:
                self._log(tok, "ascend_C")
                self._unwind()
                break
            if kind is TokenKind.COMMENT:
                self._log(tok, "comment")
                if self.keep_comments:
                    self._attach_top(CommentNode(tok.text))
                continue
            if kind in (TokenKind.WARNING, TokenKind.ERROR):
                self._log(tok, "skip")
                self.diagnostics.append("%s: %s" % (kind.name.lower(), tok.text))
                self._attach_top(Skipped(tok))
                continue
            if kind in (TokenKind.EMPTY, TokenKind.EMPTY_FORCED):
                closer = (
                    TokenKind.CLOSE_FORCED
                    if kind is TokenKind.EMPTY_FORCED
                    else TokenKind.CLOSE
                )
                self._push_back(Token(closer, tag=tok.tag, pos=tok.pos))
                self._push_back(Token(TokenKind.OPEN, tag=tok.tag, pos=tok.pos))
                continue
            if kind is TokenKind.CHARS:
                self._do_chars(tok)
            elif kind is TokenKind.OPEN:
                self._do_open(tok)
            else:  # CLOSE / CLOSE_FORCED
                self._do_close(tok)
        return ParseResult(self._result(), tuple(self.diagnostics))

    def _do_open(self, tok: Token) -> None:
        sym = tok.tag
        assert sym is not None
        if sym in self._frame_first(self.stack[-1]):
            self._log(tok, "descend")
            self._descend_top(sym)
            return
        adopted = self._ascend_open(sym)
        if adopted is not None:
            self._log(tok, "ascend_O")
            self.stack = adopted
            self._descend_top(sym)
            return
        self._log(tok, "skip")
        self._skip(tok)

    def _do_chars(self, tok: Token) -> None:
        if CHARS in self._frame_first(self.stack[-1]):
            self._log(tok, "descend")
            self._attach_chars(tok)
            return
        adopted = self._ascend_open(CHARS)
        if adopted is not None:
            self._log(tok, "ascend_O")
            self.stack = adopted
            self._attach_chars(tok)
            return
        self._log(tok, "skip")
        self._attach_top(Skipped(tok))
        self._skip_chars()

    def _attach_chars(self, tok: Token) -> None:
        top = self.stack[-1]
        if isinstance(top, _PermFrame):
            # a branch that is itself #chars: activate it so the content
            # lands in the right record slot
            self._activate_perm(top, CHARS)
            top = self.stack[-1]
        top.nodes.append(Chars(tok.text))  # type: ignore[union-attr]

    def _do_close(self, tok: Token) -> None:
        forced = tok.kind is TokenKind.CLOSE_FORCED
        adopted = self._ascend_close(tok.tag, forced)
        if adopted is not None:
            self._log(tok, "ascend_C")
            self.stack = adopted
            return
        self._log(tok, "skip")
        self._skip(tok)

    def _unwind(self) -> None:
        """End of input: pack every open frame into the bottom one.  Elements
        closed here are not marked incomplete; required content that never
        arrived still becomes Missing."""
        acc: list[Node] = []
        while len(self.stack) > 1:
            f = self.stack.pop()
            if isinstance(f, _ElemFrame):
                acc = [self._pack_elem(f, acc, forced=False)]
            elif isinstance(f, _RepFrame):
                acc = f.nodes + acc
            elif isinstance(f, _SeqFrame):
                for head in f.remaining:
                    if not pot_eps(head, self.defs):
                        acc.append(Missing(head))
                acc = f.nodes + acc
            else:
                acc = [self._perm_record(f, acc)]
        bottom = self.stack[0]
        assert isinstance(bottom, _SeqFrame)
        bottom.nodes.extend(acc)
        for head in bottom.remaining:
            if not pot_eps(head, self.defs):
                bottom.nodes.append(Missing(head))
        bottom.remaining = []

    def _result(self) -> Element:
        bottom = self.stack[0]
        assert isinstance(bottom, _SeqFrame)
        nodes = merge_chars(bottom.nodes)
        if nodes and isinstance(nodes[0], Element) and nodes[0].tag == self.root:
            head = nodes[0]
            if len(nodes) == 1:
                return head
            # trailing material after the root closed folds into the root
            return Element(self.root, head.children + tuple(nodes[1:]), head.incomplete)
        return Element(self.root, tuple(nodes))


def text2tree(
    tokens: list[Token],
    root: str,
    defs: dict[str, Definition],
    *,
    keep_comments: bool = False,
    default_incomplete: IncompleteAction = IncompleteAction.MARK,
    trace: TraceFn | None = None,
    char_trace: CharTraceFn | None = None,
) -> ParseResult:
    """Translate a token stream into a tree rooted at `root`.

    Total: any token stream yields an Element tagged `root`.  Material that
    fits nowhere is preserved as Skipped nodes; content the models required
    but never received appears as Missing nodes.
    """
    if root not in defs:
        raise KeyError("unknown root definition: %s" % root)
    parser = _Parser(
        tokens,
        root,
        defs,
        keep_comments=keep_comments,
        default_incomplete=default_incomplete,
        trace=trace,
        char_trace=char_trace,
    )
    return parser.run()
