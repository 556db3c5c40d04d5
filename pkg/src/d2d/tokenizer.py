"""Rewrite-rule tokenizer: characters in, token stream out.

The scanner applies a fixed rule set under a longest-prefix-match
discipline: at each position every rule proposes the length it could
consume, the longest proposal wins, and ties go to the rule listed first.
Each rule has a stable name so the test suite can assert full rule
coverage.  The tokenizer never raises on malformed text; everything
irregular becomes a Warning or Error token in the stream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .model import (
    Position,
    Token,
    chars,
    close,
    close_forced,
    comment,
    empty,
    empty_forced,
    eof,
    error,
    open_,
    warning,
)

DEFAULT_PARENTHESIS_MAP = {
    "(": ")", "<": ">", "[": "]", "{": "}", ".": ".",
    "!": "!", "\\": "\\", ":": ":", "$": "$", "^": "^",
}

# Identifiers: letter first, then letters/digits/_/-; dots only as interior
# separators (so a trailing dot is read as a parenthesis, not ident tail).
IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*(?:\.[A-Za-z0-9_-]+)*")
_HEXREF_RE = re.compile(r"[0-9][0-9a-f]*")

_SPACE = " \t"
_NEWLINE = "\n\r"
_WS = _SPACE + _NEWLINE

EOF_KEYWORD = "eof"


@dataclass(frozen=True)
class TokenizerConfig:
    command_char: str = "#"
    comment_char: str = "/"
    parenthesis_map: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_PARENTHESIS_MAP))

    def __post_init__(self) -> None:
        if len(self.command_char) != 1 or len(self.comment_char) != 1:
            raise ValueError("command/comment chars must be single characters")
        if self.command_char == self.comment_char:
            raise ValueError("command and comment characters must differ")
        for k, v in self.parenthesis_map.items():
            if self.command_char in (k, v) or self.comment_char in (k, v):
                raise ValueError(
                    "parenthesis map must not contain the command or "
                    "comment character")


class _Step(NamedTuple):
    rule: str
    length: int  # characters consumed
    tokens: tuple[Token, ...]
    push: tuple[str, str] | None = None  # (expected closer, tag)
    pop: bool = False


class _Scanner:
    def __init__(self, text: str, cfg: TokenizerConfig):
        self.s = text
        self.cfg = cfg
        self.i = 0
        self.line = 1
        self.col = 1
        self.stack: list[tuple[str, str]] = []
        self.out: list[Token] = []
        self.rules_fired: list[str] = []

    # -- helpers ------------------------------------------------------------

    def _pos(self) -> Position:
        return Position(self.line, self.col, self.i)

    def _advance(self, n: int) -> None:
        for ch in self.s[self.i:self.i + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.i += n

    def _ident_at(self, j: int) -> str | None:
        m = IDENT_RE.match(self.s, j)
        return m.group() if m else None

    def _chars_run_end(self, j: int) -> int:
        """End of a character-data run starting at j.

        The run stops before the command character, before the innermost
        pending closing parenthesis, and before a comment lead-in.
        """
        s, n = self.s, len(self.s)
        cmd, cmt = self.cfg.command_char, self.cfg.comment_char
        closer = self.stack[-1][0] if self.stack else None
        while j < n:
            c = s[j]
            if c == cmd or c == closer:
                break
            if c == cmt and j + 1 < n and s[j + 1] in (cmt, "*"):
                break
            j += 1
        return j

    # -- rules, in table order ---------------------------------------------

    def _r_collapse(self) -> _Step | None:
        # command char + run of (command char | blank | newline) collapses
        # to a literal command char prefixed onto the following run
        s, i = self.s, self.i
        if s[i] != self.cfg.command_char:
            return None
        j = i + 1
        run = self.cfg.command_char + _WS
        while j < len(s) and s[j] in run:
            j += 1
        if j == i + 1:
            return None
        end = self._chars_run_end(j)
        text = self.cfg.command_char + s[j:end]
        return _Step("collapse", end - i, (chars(text, self._pos()),))

    def _r_line_comment(self) -> _Step | None:
        # the newline stays in the stream
        s, i = self.s, self.i
        cmt = self.cfg.comment_char
        if s[i:i + 2] != cmt + cmt:
            return None
        j = i + 2
        while j < len(s) and s[j] not in _NEWLINE:
            j += 1
        if j == len(s):
            return None  # unterminated; stray-char rule keeps us total
        return _Step("line-comment", j - i,
                     (comment(s[i + 2:j], self._pos()),))

    def _r_block_comment(self) -> _Step | None:
        s, i = self.s, self.i
        cmt = self.cfg.comment_char
        if s[i:i + 2] != cmt + "*":
            return None
        end = s.find("*" + cmt, i + 2)
        if end < 0:
            return None
        return _Step("block-comment", end + 2 - i,
                     (comment(s[i + 2:end], self._pos()),))

    def _tag_after_command(self) -> str | None:
        if self.s[self.i] != self.cfg.command_char:
            return None
        ident = self._ident_at(self.i + 1)
        if ident is None or ident == EOF_KEYWORD:
            return None
        return ident

    def _r_open_ws(self) -> _Step | None:
        tag = self._tag_after_command()
        if tag is None:
            return None
        j = self.i + 1 + len(tag)
        if j < len(self.s) and self.s[j] in _WS:
            return _Step("open-ws", len(tag) + 2, (open_(tag, self._pos()),))
        return None

    def _r_open_paren(self) -> _Step | None:
        tag = self._tag_after_command()
        if tag is None:
            return None
        j = self.i + 1 + len(tag)
        if j < len(self.s) and self.s[j] in self.cfg.parenthesis_map:
            closer = self.cfg.parenthesis_map[self.s[j]]
            return _Step("open-paren", len(tag) + 2,
                         (open_(tag, self._pos()),), push=(closer, tag))
        return None

    def _r_paren_close(self) -> _Step | None:
        if self.stack and self.s[self.i] == self.stack[-1][0]:
            return _Step("paren-close", 1,
                         (close(self.stack[-1][1], self._pos()),), pop=True)
        return None

    def _r_empty(self) -> _Step | None:
        tag = self._tag_after_command()
        if tag is None:
            return None
        j = self.i + 1 + len(tag)
        if self.s[j:j + 1] == self.cfg.comment_char:
            return _Step("empty", len(tag) + 2, (empty(tag, self._pos()),))
        return None

    def _r_empty_forced(self) -> _Step | None:
        tag = self._tag_after_command()
        if tag is None:
            return None
        j = self.i + 1 + len(tag)
        if self.s[j:j + 3] == self.cfg.comment_char * 3:
            return _Step("empty-forced", len(tag) + 4,
                         (empty_forced(tag, self._pos()),))
        return None

    def _r_open(self) -> _Step | None:
        tag = self._tag_after_command()
        if tag is None:
            return None
        return _Step("open", len(tag) + 1, (open_(tag, self._pos()),))

    def _charref(self, closed: bool) -> _Step | None:
        s, i = self.s, self.i
        if s[i] != self.cfg.command_char:
            return None
        m = _HEXREF_RE.match(s, i + 1)
        if not m:
            return None
        length = 1 + len(m.group()) + (1 if closed else 0)
        if closed and s[i + 1 + len(m.group()):i + 2 + len(m.group())] != \
                self.cfg.comment_char:
            return None
        rule = "charref-closed" if closed else "charref"
        cp = int(m.group(), 16)
        if cp > 0x10FFFF:
            tok = error("invalid character reference", self._pos())
        else:
            tok = chars(chr(cp), self._pos())
        return _Step(rule, length, (tok,))

    def _r_charref_closed(self) -> _Step | None:
        return self._charref(closed=True)

    def _r_charref(self) -> _Step | None:
        return self._charref(closed=False)

    def _close_family(self, forced: bool, want_ws: bool) -> _Step | None:
        s, i = self.s, self.i
        cmt = self.cfg.comment_char
        lead = self.cfg.command_char + (cmt * 3 if forced else cmt)
        if s[i:i + len(lead)] != lead:
            return None
        j = i + len(lead)
        tag = self._ident_at(j)  # None means wildcard
        if tag is not None:
            j += len(tag)
        rule = ("close" + ("-forced" if forced else "")
                + ("-wild" if tag is None else "")
                + ("-ws" if want_ws else ""))
        make = close_forced if forced else close
        if want_ws:
            if j < len(s) and s[j] in _WS:
                return _Step(rule, j + 1 - i, (make(tag, self._pos()),))
            return None
        return _Step(rule, j - i, (make(tag, self._pos()),))

    def _r_close_ws(self):
        return self._close_family(False, True)

    def _r_close_forced_ws(self):
        return self._close_family(True, True)

    def _r_close(self):
        return self._close_family(False, False)

    def _r_close_forced(self):
        return self._close_family(True, False)

    def _r_chars(self) -> _Step | None:
        end = self._chars_run_end(self.i)
        if end == self.i:
            return None
        return _Step("chars", end - self.i,
                     (chars(self.s[self.i:end], self._pos()),))

    def _r_bad_command(self) -> _Step | None:
        # a command char nothing else can consume; not in the rule table,
        # needed for totality
        if self.s[self.i] == self.cfg.command_char:
            return _Step("bad-command", 1,
                         (error("unrecognized command", self._pos()),))
        return None

    def _r_stray_char(self) -> _Step:
        # last resort (e.g. a lone comment char before an unterminated
        # comment); consumes exactly one character as data
        return _Step("stray-char", 1, (chars(self.s[self.i], self._pos()),))

    # -- driver -------------------------------------------------------------

    RULES: tuple[str, ...] = (
        "_r_collapse", "_r_line_comment", "_r_block_comment",
        "_r_open_ws", "_r_open_paren", "_r_paren_close",
        "_r_empty", "_r_empty_forced", "_r_open",
        "_r_charref_closed", "_r_charref",
        "_r_close_ws", "_r_close_forced_ws",
        "_r_close", "_r_close_forced",
        "_r_chars", "_r_bad_command", "_r_stray_char",
    )

    def _eof_keyword_at(self) -> bool:
        if self.s[self.i] != self.cfg.command_char:
            return False
        return self._ident_at(self.i + 1) == EOF_KEYWORD

    def run(self) -> list[Token]:
        s = self.s
        while True:
            if self.i >= len(s):
                self.out.append(error("premature end of file", self._pos()))
                self.rules_fired.append("premature-eof")
                break
            if self._eof_keyword_at():
                if self.stack:
                    self.out.append(warning("pending parentheses",
                                            self._pos()))
                    self.rules_fired.append("eof-pending-parens")
                    self.stack.clear()
                    continue
                if self.i + 1 + len(EOF_KEYWORD) < len(s):
                    self.out.append(
                        warning("discarding trailing characters",
                                self._pos()))
                    self.rules_fired.append("eof-trailing")
                self.out.append(eof(self._pos()))
                self.rules_fired.append("eof")
                break
            best: _Step | None = None
            for name in self.RULES:
                step = getattr(self, name)()
                if step is not None and (best is None
                                         or step.length > best.length):
                    best = step
            assert best is not None and best.length > 0
            self.out.extend(best.tokens)
            self.rules_fired.append(best.rule)
            if best.pop:
                self.stack.pop()
            if best.push is not None:
                self.stack.append(best.push)
            self._advance(best.length)
        return self.out


def tokenize(text: str, cfg: TokenizerConfig | None = None) -> list[Token]:
    """Tokenize a text corpus (the region after file-section framing)."""
    return _Scanner(text, cfg or TokenizerConfig()).run()


def tokenize_traced(
        text: str,
        cfg: TokenizerConfig | None = None) -> tuple[list[Token], list[str]]:
    """tokenize plus the sequence of rule names that fired (for coverage)."""
    sc = _Scanner(text, cfg or TokenizerConfig())
    toks = sc.run()
    return toks, sc.rules_fired


def dump_tokens(tokens: list[Token]) -> str:
    """One token per line: KIND<TAB>tag-or-text, control chars escaped."""
    lines = []
    for t in tokens:
        if t.tag is not None:
            payload = t.tag
        elif t.kind.name in ("CLOSE", "CLOSE_FORCED"):
            payload = "*"
        else:
            payload = (t.text.replace("\\", "\\\\").replace("\t", "\\t")
                       .replace("\n", "\\n").replace("\r", "\\r"))
        lines.append(f"{t.kind.name}\t{payload}")
    return "\n".join(lines) + ("\n" if lines else "")
