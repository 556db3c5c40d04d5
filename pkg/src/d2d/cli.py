"""Command-line front end.

    d2d parse FILE [-o OUT] [--module-path DIR]... [--indent] ...
    d2d check MODULE          validate a grammar module
    d2d tokens FILE           dump the corpus token stream
    d2d batch FILE... --out-dir DIR [--jobs N]

D2D_MODULE_PATH supplies search directories when no --module-path is
given (os.pathsep separated).
"""

from __future__ import annotations

import argparse
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .ddf import LoadError, load_module, parse_module, resolve
from .emitter import EmitConfig
from .expr_syntax import ExprSyntaxError
from .grammar import (GrammarError, expand_inserts, language_nonempty,
                      validate_kind, validate_ll1)
from .model import render_expr
from .pipeline import PipelineConfig, SectionError, run, split_sections
from .tokenizer import TokenizerConfig, dump_tokens, tokenize


def _module_path(args: argparse.Namespace) -> tuple[Path, ...]:
    given = getattr(args, "module_path", None)
    if given:
        return tuple(Path(p) for p in given)
    env = os.environ.get("D2D_MODULE_PATH", "")
    return tuple(Path(p) for p in env.split(os.pathsep) if p)


def _char_tracer(out):
    def trace(e, h, results) -> None:
        ends = ",".join(str(p) for p, _ in results) or "fail"
        out.write("cparse %s @%d -> %s\n" % (render_expr(e), h[0], ends))
    return trace


def _config(args: argparse.Namespace) -> PipelineConfig:
    trace = None
    if getattr(args, "trace", False):
        trace = lambda line: sys.stderr.write("trace: %s\n" % line)
    char_trace = None
    if getattr(args, "trace_chars", False):
        char_trace = _char_tracer(sys.stderr)
    return PipelineConfig(
        module_path=_module_path(args),
        command_char=args.command_char,
        comment_char=args.comment_char,
        keep_comments=getattr(args, "keep_comments", False),
        emit=EmitConfig(indent=getattr(args, "indent", False)),
        trace=trace,
        char_trace=char_trace,
    )


def _cmd_parse(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            return run(args.file, cfg, fh, sys.stderr)
    return run(args.file, cfg, sys.stdout, sys.stderr)


def _cmd_check(args: argparse.Namespace) -> int:
    sp = _module_path(args)
    name = args.module
    warn = lambda msg: sys.stderr.write("%s\n" % msg)
    try:
        if name.endswith(".ddf") or os.sep in name or Path(name).is_file():
            mod = parse_module(Path(name).read_text(encoding="utf-8"))
        else:
            mod = load_module(name, sp)
        table = resolve(mod, sp, warn)
        table = {
            n: replace(d, expr=expand_inserts(d.expr, table))
            for n, d in table.items()
        }
    except (OSError, ExprSyntaxError, LoadError, GrammarError) as exc:
        sys.stderr.write("%s: %s\n" % (name, exc))
        return 2
    issues = 0
    for d in table.values():
        for diag in validate_kind(d, table) + validate_ll1(d, table):
            print(diag)
            issues += 1
        if not language_nonempty(d.expr, table):
            print("%s: matches no input" % d.name)
            issues += 1
    print("%s: %d definitions, %d problems" % (mod.name, len(table), issues))
    return 1 if issues else 0


def _cmd_tokens(args: argparse.Namespace) -> int:
    try:
        text = Path(args.file).read_text(encoding="utf-8")
        sec = split_sections(text, command_char=args.command_char)
        toks = tokenize(sec.corpus, TokenizerConfig(
            command_char=args.command_char, comment_char=args.comment_char))
    except (OSError, SectionError, ValueError) as exc:
        sys.stderr.write("%s: %s\n" % (args.file, exc))
        return 2
    sys.stdout.write(dump_tokens(toks))
    return 0


def _cmd_batch(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(file: str) -> tuple[int, str]:
        out, err = io.StringIO(), io.StringIO()
        code = run(file, cfg, out, err)
        if code != 2:
            target = out_dir / (Path(file).stem + ".xml")
            target.write_text(out.getvalue(), encoding="utf-8")
        return code, err.getvalue()

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, args.files))
    else:
        results = [one(f) for f in args.files]
    for code, messages in results:
        sys.stderr.write(messages)
    return max((code for code, _ in results), default=0)


def _add_tok_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--command-char", default="#", metavar="C",
                   help="tag lead-in character (default #)")
    p.add_argument("--comment-char", default="/", metavar="C",
                   help="comment lead-in character (default /)")


def _add_parse_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--module-path", action="append", default=[],
                   metavar="DIR", help="module search directory (repeatable)")
    _add_tok_flags(p)
    p.add_argument("--keep-comments", action="store_true",
                   help="carry source comments into the XML")
    p.add_argument("--indent", action="store_true",
                   help="pretty-print element-only content")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="d2d",
        description="Translate lightweight tagged markup to XML.")
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("parse", help="translate one document file to XML")
    pp.add_argument("file")
    pp.add_argument("-o", "--output", metavar="OUT",
                    help="write the XML here instead of stdout")
    _add_parse_flags(pp)
    pp.add_argument("--trace", action="store_true",
                    help="log tag-parser steps to stderr")
    pp.add_argument("--trace-chars", action="store_true",
                    help="log character-parser steps to stderr")
    pp.set_defaults(fn=_cmd_parse)

    pc = sub.add_parser("check", help="load and validate a grammar module")
    pc.add_argument("module", help="module name (or a .ddf file path)")
    pc.add_argument("--module-path", action="append", default=[],
                    metavar="DIR")
    pc.set_defaults(fn=_cmd_check)

    pt = sub.add_parser("tokens", help="dump a document's token stream")
    pt.add_argument("file")
    _add_tok_flags(pt)
    pt.set_defaults(fn=_cmd_tokens)

    pb = sub.add_parser("batch", help="process many files into a directory")
    pb.add_argument("files", nargs="+", metavar="FILE")
    pb.add_argument("--out-dir", required=True, metavar="DIR")
    pb.add_argument("--jobs", type=int, default=1, metavar="N",
                    help="worker threads (default 1)")
    _add_parse_flags(pb)
    pb.set_defaults(fn=_cmd_batch)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
