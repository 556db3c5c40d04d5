"""ddf module files: parsing, import resolution, substitutions.

A module collects content-model definitions.  Importing a module under a
key makes its definitions reachable as `key.name`, transitively (imports
of the imported module re-export as `key.theirkey.name`, and so on).  An
import can carry substitutions, which rewrite references throughout the
imported module's expressions, and replacements, which rebind one of the
imported module's own imports to a different module altogether.

Resolution flattens the module hierarchy into one immutable table mapping
flat names to Definitions; every reference in every expression resolves
within that table or loading fails.

Statement syntax (the underlying format fixes only the expression
operators; the statement layer is this implementation's):

    module a.b.c {
      tags  name [tag "t"] [ns "uri"] [incomplete mark|warn|error] = EXPR ;
      chars name [hints] = EXPR ;
      import key = module.path ;
      import key = module.path with {
        subst ref.path -> EXPR [in name] ;
        replace key = module.path ;
      }
      subst ref.path -> EXPR [in name] ;
    }

A bare `subst` statement rewrites references inside this module's own
definitions; a subst inside an import's with-block rewrites the imported
module's expressions instead, with the replacement read in this module's
scope.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .expr_syntax import ExprSyntaxError, TokenCursor, lex, parse_expr
from .model import (
    Alt,
    Capture,
    Definition,
    DefKind,
    Expr,
    Greedy,
    IncompleteAction,
    Insert,
    LocalSubst,
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

__all__ = [
    "LoadError",
    "Substitution",
    "Import",
    "Module",
    "parse_module",
    "resolve",
    "resolve_layers",
    "apply_local_subst",
]


class LoadError(Exception):
    """Anything that prevents producing a complete definition table."""


@dataclass(frozen=True, slots=True)
class Substitution:
    target: str  # dotted reference, read in the imported module's scope
    replacement: Expr  # read in the importing module's scope
    scope: str | None = None  # definition name; None = whole import


@dataclass(frozen=True, slots=True)
class Import:
    key: str
    target: str  # dotted module path
    substitutions: tuple[Substitution, ...] = ()
    replacements: tuple[tuple[str, str], ...] = ()  # (inner key, new path)


@dataclass(slots=True)
class Module:
    name: str
    definitions: dict[str, Definition] = field(default_factory=dict)
    imports: list[Import] = field(default_factory=list)
    substitutions: list[Substitution] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Parsing

_INCOMPLETE = {
    "mark": IncompleteAction.MARK,
    "warn": IncompleteAction.WARN,
    "error": IncompleteAction.ERROR,
}


def _parse_hints(c: TokenCursor) -> tuple[str | None, str | None, IncompleteAction | None]:
    xml_tag = xml_ns = None
    action = None
    while True:
        if c.at_ident("tag"):
            c.take()
            if c.cur.kind != "string":
                c.fail("expected a quoted tag name")
            xml_tag = c.take().value
        elif c.at_ident("ns"):
            c.take()
            if c.cur.kind != "string":
                c.fail("expected a quoted namespace URI")
            xml_ns = c.take().value
        elif c.at_ident("incomplete"):
            c.take()
            word = c.expect_ident()
            if word not in _INCOMPLETE:
                c.fail("incomplete policy must be mark, warn or error")
            action = _INCOMPLETE[word]
        else:
            return xml_tag, xml_ns, action


def _parse_subst(c: TokenCursor) -> Substitution:
    target = c.expect_ident()
    c.expect_sym("->")
    replacement = parse_expr(c)
    scope = None
    if c.at_ident("in"):
        c.take()
        scope = c.expect_ident()
    return Substitution(target, replacement, scope)


def _parse_import(c: TokenCursor) -> Import:
    key = c.expect_ident()
    if "." in key:
        c.fail("import key must be a plain name")
    c.expect_sym("=")
    target = c.expect_ident()
    substs: list[Substitution] = []
    repls: list[tuple[str, str]] = []
    if c.at_ident("with"):
        c.take()
        c.expect_sym("{")
        while not c.at_sym("}"):
            if c.at_ident("subst"):
                c.take()
                substs.append(_parse_subst(c))
            elif c.at_ident("replace"):
                c.take()
                inner = c.expect_ident()
                c.expect_sym("=")
                repls.append((inner, c.expect_ident()))
            else:
                c.fail("expected subst or replace")
            c.expect_sym(";")
        c.take()
    else:
        c.expect_sym(";")
    return Import(key, target, tuple(substs), tuple(repls))


def parse_module(text: str, *, allow_trailing: bool = False) -> Module:
    """Parse one module body.  Raises ExprSyntaxError with line/column.

    allow_trailing tolerates material after the closing brace; document
    section bodies use this because the splitter hands over everything up
    to the next section header."""
    c = TokenCursor(lex(text))
    if not c.at_ident("module"):
        c.fail("expected module")
    c.take()
    name = c.expect_ident()
    c.expect_sym("{")
    mod = Module(name)
    while not c.at_sym("}"):
        if c.at_ident("tags", "chars"):
            kind = DefKind.TAGS if c.take().value == "tags" else DefKind.CHARS
            dname = c.expect_ident()
            if "." in dname:
                c.fail("definition name must be a plain name")
            if dname in mod.definitions:
                c.fail("duplicate definition %s (already defined in %s)" % (dname, name))
            xml_tag, xml_ns, action = _parse_hints(c)
            c.expect_sym("=")
            expr = parse_expr(c)
            c.expect_sym(";")
            mod.definitions[dname] = Definition(
                dname, kind, expr, xml_tag, xml_ns, action
            )
        elif c.at_ident("import"):
            c.take()
            imp = _parse_import(c)
            if any(i.key == imp.key for i in mod.imports):
                c.fail("duplicate import key %s" % imp.key)
            mod.imports.append(imp)
        elif c.at_ident("subst"):
            c.take()
            mod.substitutions.append(_parse_subst(c))
            c.expect_sym(";")
        else:
            c.fail("expected a definition, import or subst")
    c.take()
    if not allow_trailing and c.cur.kind != "end":
        c.fail("trailing input after module body")
    for imp in mod.imports:
        if imp.key in mod.definitions:
            raise LoadError(
                "import key %s collides with a definition in %s" % (imp.key, name)
            )
    return mod


# ---------------------------------------------------------------------------
# Expression rewriting

_TWO = (Seq, Alt, Perm, TightSeq)  # variadic containers


def _rewrite(e: Expr, ref_fn: Callable[[str], Expr | str]) -> Expr:
    """Structural rewrite.  ref_fn gets every reference-like name (Ref,
    Insert target, LocalSubst target); returning a str renames, returning
    an Expr replaces (Ref positions only)."""

    def walk(x: Expr) -> Expr:
        if isinstance(x, Ref):
            out = ref_fn(x.name)
            return Ref(out) if isinstance(out, str) else out
        if isinstance(x, Insert):
            out = ref_fn(x.name)
            if isinstance(out, str):
                return Insert(out)
            raise LoadError(
                "substitution cannot replace the insertion @%s" % x.name
            )
        if isinstance(x, _TWO):
            return type(x)(tuple(walk(i) for i in x.items))
        if isinstance(x, (Opt, Star, Plus, TightStar, TightPlus, Greedy)):
            return type(x)(walk(x.item))
        if isinstance(x, Capture):
            return Capture(x.name, walk(x.item))
        if isinstance(x, Range):
            return Range(walk(x.lo), walk(x.hi))
        if isinstance(x, (SetUnion, SetIntersect, SetMinus)):
            return type(x)(walk(x.left), walk(x.right))
        if isinstance(x, LocalSubst):
            out = ref_fn(x.target)
            target = out if isinstance(out, str) else x.target
            return LocalSubst(walk(x.base), walk(x.replacement), target)
        return x  # leaves: CharsToken, Empty, NoneExpr, Literal, CharSet, NumericChar

    return walk(e)


def _prefix_expr(e: Expr, prefix: str) -> Expr:
    if not prefix:
        return e
    return _rewrite(e, lambda name: prefix + name)


def _substitute(e: Expr, target: str, replacement: Expr) -> Expr:
    return _rewrite(e, lambda name: replacement if name == target else name)


def _expr_names(e: Expr) -> set[str]:
    names: set[str] = set()
    _rewrite(e, lambda name: (names.add(name), name)[1])
    return names


# ---------------------------------------------------------------------------
# Local substitutions: T ^ ( T' / id )


def apply_local_subst(e: Expr, warn: Callable[[str], None] | None = None) -> Expr:
    """Rewrite every Ref(id) inside each LocalSubst base to the replacement,
    innermost first.  The result contains no LocalSubst nodes.  A target id
    that never occurs in the base is reported through `warn` and the base
    is kept unchanged."""

    def walk(x: Expr) -> Expr:
        if isinstance(x, LocalSubst):
            base = walk(x.base)
            repl = walk(x.replacement)
            if x.target not in _expr_names(base):
                if warn is not None:
                    warn("local substitution target %s not referenced" % x.target)
                return base
            return _substitute(base, x.target, repl)
        if isinstance(x, _TWO):
            return type(x)(tuple(walk(i) for i in x.items))
        if isinstance(x, (Opt, Star, Plus, TightStar, TightPlus, Greedy)):
            return type(x)(walk(x.item))
        if isinstance(x, Capture):
            return Capture(x.name, walk(x.item))
        if isinstance(x, Range):
            return Range(walk(x.lo), walk(x.hi))
        if isinstance(x, (SetUnion, SetIntersect, SetMinus)):
            return type(x)(walk(x.left), walk(x.right))
        return x

    return walk(e)


# ---------------------------------------------------------------------------
# Module location and resolution


def _locate(path: str, search_path: tuple[Path, ...]) -> Path:
    rel = Path(*path.split(".")).with_suffix(".ddf")
    for root in search_path:
        cand = root / rel
        if cand.is_file():
            return cand
    raise LoadError(
        "module %s not found (looked for %s under %s)"
        % (path, rel, ", ".join(str(r) for r in search_path) or "<empty path>")
    )


class _Resolver:
    def __init__(self, search_path: tuple[Path, ...],
                 preloaded: dict[str, Module] | None = None):
        self.search_path = search_path
        self.preloaded = preloaded or {}  # in-document modules, by name
        self.parsed: dict[Path, Module] = {}
        self.table: dict[str, Definition] = {}

    def load(self, path: str) -> Module:
        if path in self.preloaded:
            return self.preloaded[path]
        file = _locate(path, self.search_path)
        if file not in self.parsed:
            try:
                mod = parse_module(file.read_text(encoding="utf-8"))
            except ExprSyntaxError as exc:
                raise LoadError("%s: %s" % (file, exc)) from exc
            if mod.name != path:
                raise LoadError(
                    "%s declares module %s, expected %s" % (file, mod.name, path)
                )
            self.parsed[file] = mod
        return self.parsed[file]

    def instantiate(self, mod: Module, prefix: str, active: tuple[str, ...]) -> list[str]:
        """Flatten one module instance (and its imports) into the table
        under `prefix`.  Returns the flat names this instance contributed,
        in definition order, imports first."""
        added: list[str] = []
        for imp in mod.imports:
            target = imp.target
            inner_prefix = prefix + imp.key + "."
            if target in active:
                raise LoadError(
                    "cyclic module import: %s" % " -> ".join(active + (target,))
                )
            sub = self.load(target)
            if imp.replacements:
                sub = _rebind_imports(sub, dict(imp.replacements))
            names = self.instantiate(sub, inner_prefix, active + (target,))
            for s in imp.substitutions:
                abs_target = inner_prefix + s.target
                replacement = _prefix_expr(s.replacement, prefix)
                scope = inner_prefix + s.scope if s.scope else None
                self._apply_subst(names, abs_target, replacement, scope)
            added.extend(names)
        for d in mod.definitions.values():
            flat = prefix + d.name
            self.table[flat] = dataclasses.replace(
                d, name=flat, expr=_prefix_expr(d.expr, prefix)
            )
            added.append(flat)
        for s in mod.substitutions:
            abs_target = prefix + s.target
            replacement = _prefix_expr(s.replacement, prefix)
            scope = prefix + s.scope if s.scope else None
            self._apply_subst(added, abs_target, replacement, scope)
        return added

    def _apply_subst(
        self, names: list[str], target: str, replacement: Expr, scope: str | None
    ) -> None:
        hit = False
        for n in names if scope is None else [scope]:
            d = self.table.get(n)
            if d is None:
                raise LoadError("substitution scope %s names no definition" % n)
            if target in _expr_names(d.expr):
                self.table[n] = dataclasses.replace(
                    d, expr=_substitute(d.expr, target, replacement)
                )
                hit = True
        if not hit:
            raise LoadError("substitution target %s not found" % target)


def _rebind_imports(mod: Module, repl: dict[str, str]) -> Module:
    unknown = set(repl) - {i.key for i in mod.imports}
    if unknown:
        raise LoadError(
            "replace names no import: %s" % ", ".join(sorted(unknown))
        )
    imports = [
        dataclasses.replace(i, target=repl.get(i.key, i.target)) for i in mod.imports
    ]
    return Module(mod.name, mod.definitions, imports, mod.substitutions)


def _finish(
    table: dict[str, Definition], warn: Callable[[str], None] | None
) -> dict[str, Definition]:
    for name, d in table.items():
        expr = apply_local_subst(d.expr, warn)
        if expr is not d.expr:
            table[name] = dataclasses.replace(d, expr=expr)
    for name, d in table.items():
        for ref in sorted(_expr_names(d.expr)):
            if ref not in table:
                raise LoadError(
                    "definition %s references %s, which does not exist" % (name, ref)
                )
    return table


def load_module(
    name: str,
    search_path: list[str | Path] | tuple[Path, ...] = (),
) -> Module:
    """Locate and parse a module file by dotted name, without resolving."""
    sp = tuple(Path(p) for p in search_path)
    return _Resolver(sp).load(name)


def resolve(
    root_module: Module,
    search_path: list[str | Path] | tuple[Path, ...] = (),
    warn: Callable[[str], None] | None = None,
) -> dict[str, Definition]:
    """Flatten a module and everything it imports into one definition
    table.  Raises LoadError for missing modules, dangling references,
    failed substitutions and import cycles."""
    return resolve_layers([root_module], search_path, warn)


def resolve_layers(
    layers: list[Module],
    search_path: list[str | Path] | tuple[Path, ...] = (),
    warn: Callable[[str], None] | None = None,
) -> dict[str, Definition]:
    """Resolve several modules into one scope.  Later layers shadow earlier
    ones name-by-name (used for local definition sections in documents)."""
    sp = tuple(Path(p) for p in search_path)
    r = _Resolver(sp, {mod.name: mod for mod in layers})
    for mod in layers:
        r.instantiate(mod, "", (mod.name,))
    return _finish(r.table, warn)
