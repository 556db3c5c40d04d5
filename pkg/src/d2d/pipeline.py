"""File-section framing and the text-to-XML driver.

A processable file carries an arbitrary prefix (mail headers, notes --
discarded), zero or more local module sections, one `text using` header,
and the corpus:

    Hi Bob, here is the draft.
    #d2d 2.0 module extras { tags note = #chars ; }
    #d2d 2.0 text using base:doc
    #doc ... #eof

Local sections let a document ship its own definitions; they shadow the
used module name-by-name.  The `xslt text producing` header form is
recognized but rejected.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Callable

from .charparser import TraceFn as CharTraceFn
from .ddf import LoadError, Module, load_module, parse_module, resolve_layers
from .emitter import EmitConfig, emit_str
from .expr_syntax import ExprSyntaxError
from .grammar import GrammarError, expand_inserts, validate_kind, validate_ll1
from .model import Definition, DefKind, IncompleteAction, has_recovery
from .tagparser import ParseResult, TraceFn, text2tree
from .tokenizer import TokenizerConfig, tokenize


class SectionError(Exception):
    """File-section framing failure; message carries the line number."""


@dataclass(frozen=True)
class Sections:
    local_modules: tuple[str, ...]
    using: tuple[str, str]  # (module path, root tag)
    corpus: str
    local_lines: tuple[int, ...] = ()
    corpus_line: int = 1


_WS = " \t\r\n"
_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*(?:\.[A-Za-z0-9_-]+)*")


def _line(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in _WS:
        pos += 1
    return pos


class _HeaderScan:
    def __init__(self, text: str, command_char: str):
        self.text = text
        self.marker = re.compile(re.escape(command_char) + r"d2d(?=[ \t\r\n])")

    def classify(self, m: re.Match[str]) -> tuple[str, int]:
        """Classify the header at marker match m.

        Returns (keyword, keyword-end).  Raises SectionError for a bad
        version or an unrecognizable keyword.
        """
        at = _line(self.text, m.start())
        p = _skip_ws(self.text, m.end())
        v = p
        while v < len(self.text) and self.text[v] not in _WS:
            v += 1
        version = self.text[p:v]
        if version != "2.0":
            raise SectionError(
                "line %d: unsupported d2d version %r (expected 2.0)"
                % (at, version))
        p = _skip_ws(self.text, v)
        kw = _IDENT_RE.match(self.text, p)
        if kw is None or kw.group() not in ("module", "text", "xslt"):
            got = kw.group() if kw else self.text[p:p + 12]
            raise SectionError(
                "line %d: malformed d2d header: expected 'module', "
                "'text using' or 'xslt text producing', got %r" % (at, got))
        return kw.group(), kw.end()


def _module_section_end(text: str, pos: int) -> int | None:
    """End index of the module body starting at pos (just past its
    closing brace), honouring string/class literals and comments."""
    depth = 0
    seen_brace = False
    i = pos
    n = len(text)
    while i < n:
        c = text[i]
        if c in "\"'":
            end = text.find(c, i + 1)
            if end < 0:
                return None
            i = end + 1
        elif text.startswith("//", i):
            end = text.find("\n", i)
            i = n if end < 0 else end + 1
        elif text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                return None
            i = end + 2
        elif c == "{":
            depth += 1
            seen_brace = True
            i += 1
        elif c == "}":
            depth -= 1
            i += 1
            if seen_brace and depth == 0:
                return i
        else:
            i += 1
    return None


def split_sections(text: str, *, command_char: str = "#") -> Sections:
    """Split a document file into local module texts, the `using` target,
    and the corpus.  Everything before the first section header is
    discarded, as is anything between a module body and the next header.
    """
    scan = _HeaderScan(text, command_char)
    locals_: list[str] = []
    local_lines: list[int] = []
    pos = 0
    while True:
        m = scan.marker.search(text, pos)
        if m is None:
            raise SectionError(
                "no `%sd2d 2.0 text using` header found" % command_char)
        keyword, kw_end = scan.classify(m)
        at = _line(text, m.start())
        if keyword == "xslt":
            raise SectionError("line %d: unsupported: XSLT mode" % at)
        if keyword == "module":
            # the keyword doubles as the module definition's own lead-in
            kw_start = kw_end - len("module")
            end = _module_section_end(text, kw_start)
            if end is None:
                raise SectionError(
                    "line %d: unterminated local module section" % at)
            locals_.append(text[kw_start:end])
            local_lines.append(at)
            pos = end
            continue
        # `text using m:t`
        p = _skip_ws(text, kw_end)
        used = _IDENT_RE.match(text, p)
        if used is None or used.group() != "using":
            raise SectionError(
                "line %d: malformed d2d header: expected 'using'" % at)
        p = _skip_ws(text, used.end())
        mod = _IDENT_RE.match(text, p)
        if mod is None:
            raise SectionError(
                "line %d: malformed d2d header: expected a module name "
                "after 'using'" % at)
        p = _skip_ws(text, mod.end())
        if p >= len(text) or text[p] != ":":
            raise SectionError(
                "line %d: malformed d2d header: expected ':' between "
                "module name and root tag" % at)
        p = _skip_ws(text, p + 1)
        root = _IDENT_RE.match(text, p)
        if root is None:
            raise SectionError(
                "line %d: malformed d2d header: expected a root tag "
                "after ':'" % at)
        # whitespace runs at both corpus boundaries belong to the framing:
        # the separator after `t`, and the file-final run after `#eof`
        corpus_start = _skip_ws(text, root.end())
        _reject_headers_in_corpus(scan, text, corpus_start)
        corpus = text[corpus_start:]
        trimmed = corpus.rstrip(_WS)
        if trimmed.endswith(command_char + "eof"):
            corpus = trimmed
        return Sections(
            local_modules=tuple(locals_),
            using=(mod.group(), root.group()),
            corpus=corpus,
            local_lines=tuple(local_lines),
            corpus_line=_line(text, corpus_start),
        )


def _reject_headers_in_corpus(scan: _HeaderScan, text: str, pos: int) -> None:
    """A further well-formed section header anywhere after the text header
    is an error; malformed `Cd2d` runs are left to the tokenizer."""
    while True:
        m = scan.marker.search(text, pos)
        if m is None:
            return
        try:
            keyword, _ = scan.classify(m)
        except SectionError:
            pos = m.end()
            continue
        at = _line(text, m.start())
        if keyword == "module":
            raise SectionError(
                "line %d: module section after the text header" % at)
        if keyword == "text":
            raise SectionError(
                "line %d: second `text using` header" % at)
        raise SectionError(
            "line %d: xslt section after the text header" % at)


# ---------------------------------------------------------------------------
# Driving the full pipeline


@dataclass(frozen=True)
class PipelineConfig:
    module_path: tuple[Path, ...] = ()
    command_char: str = "#"
    comment_char: str = "/"
    keep_comments: bool = False
    default_incomplete: IncompleteAction = IncompleteAction.MARK
    emit: EmitConfig = field(default_factory=EmitConfig)
    trace: TraceFn | None = None
    char_trace: CharTraceFn | None = None


def build_scope(
    sections: Sections,
    search_path: tuple[Path, ...] = (),
    warn: Callable[[str], None] | None = None,
) -> dict[str, Definition]:
    """Resolve the used module plus local sections into one definition
    table with all @insertions expanded.  Raises SectionError or LoadError.
    """
    mods: list[Module] = []
    lines = sections.local_lines or tuple(
        1 for _ in sections.local_modules)
    for src, at in zip(sections.local_modules, lines):
        try:
            mods.append(parse_module(src))
        except (ExprSyntaxError, LoadError) as exc:
            raise SectionError(
                "local module section at line %d: %s" % (at, exc)) from exc
    used = sections.using[0]
    if not any(m.name == used for m in mods):
        mods.insert(0, load_module(used, search_path))
    table = resolve_layers(mods, search_path, warn)
    try:
        return {
            name: replace(d, expr=expand_inserts(d.expr, table))
            for name, d in table.items()
        }
    except GrammarError as exc:
        raise LoadError(str(exc)) from exc


def parse_document(
    text: str,
    cfg: PipelineConfig | None = None,
    warn: Callable[[str], None] | None = None,
) -> tuple[ParseResult, dict[str, Definition]]:
    """split + load + validate + tokenize + parse, no emission.

    Raises SectionError/LoadError/ValueError for everything up to
    tokenization; the parse itself is total.
    """
    cfg = cfg or PipelineConfig()
    sec = split_sections(text, command_char=cfg.command_char)
    defs = build_scope(sec, tuple(cfg.module_path), warn)
    root = sec.using[1]
    if root not in defs:
        raise LoadError(
            "root definition %s not found in module %s"
            % (root, sec.using[0]))
    if defs[root].kind is not DefKind.TAGS:
        raise LoadError("root definition %s is not a tags definition" % root)
    if warn is not None:
        for d in defs.values():
            for diag in validate_kind(d, defs) + validate_ll1(d, defs):
                warn("warning: %s" % diag)
    tokens = tokenize(
        sec.corpus,
        TokenizerConfig(
            command_char=cfg.command_char, comment_char=cfg.comment_char),
    )
    result = text2tree(
        tokens,
        root,
        defs,
        keep_comments=cfg.keep_comments,
        default_incomplete=cfg.default_incomplete,
        trace=cfg.trace,
        char_trace=cfg.char_trace,
    )
    return result, defs


def run(
    file: str | Path,
    cfg: PipelineConfig | None = None,
    out: IO[str] | None = None,
    err: IO[str] | None = None,
) -> int:
    """Process one document file to XML.

    Exit status: 0 clean, 1 when the tree carries Skipped/Missing nodes
    (the XML is still produced), 2 when nothing could be parsed at all.
    """
    cfg = cfg or PipelineConfig()
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    label = str(file)

    def warn(msg: str) -> None:
        err.write("%s: %s\n" % (label, msg))

    try:
        text = Path(file).read_text(encoding="utf-8")
    except OSError as exc:
        warn("cannot read: %s" % exc)
        return 2
    try:
        result, defs = parse_document(text, cfg, warn)
    except (SectionError, LoadError, ValueError) as exc:
        warn(str(exc))
        return 2
    for msg in result.diagnostics:
        warn(msg)
    out.write(emit_str(result.root, cfg.emit, defs))
    return 1 if has_recovery(result.root) else 0
