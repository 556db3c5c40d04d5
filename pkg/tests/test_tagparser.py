"""Tag-level parsing: close inference, recovery, permutations."""

from __future__ import annotations

import random

import pytest

from d2d.model import (
    Alt,
    Capture,
    Chars,
    CharSet,
    CharsToken,
    CommentNode,
    Definition,
    DefKind,
    Element,
    IncompleteAction,
    Literal,
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
    TightPlus,
    TightSeq,
    Token,
    TokenKind,
    render_expr,
)
from d2d.tagparser import text2tree
from d2d.tokenizer import tokenize


def tags(name, expr):
    return Definition(name, DefKind.TAGS, expr)


def parse(text, root, defs, **kw):
    return text2tree(tokenize(text), root, defs, **kw)


DIGITS = CharSet("0123456789")


# -- basic shapes -------------------------------------------------------------


def test_empty_star_document():
    defs = {"doc": tags("doc", Star(Ref("p"))), "p": tags("p", CharsToken())}
    assert parse("#doc #eof", "doc", defs).root == Element("doc", ())


def test_inferred_closes_match_explicit():
    defs = {"doc": tags("doc", Plus(Ref("p"))), "p": tags("p", CharsToken())}
    expect = Element(
        "doc",
        (Element("p", (Chars("one "),)), Element("p", (Chars("two "),))),
    )
    assert parse("#doc #p one #p two #eof", "doc", defs).root == expect
    assert parse("#doc #p one #/p #p two #/p #/doc #eof", "doc", defs).root == expect


def test_unmatched_open_skipped_and_model_missing():
    defs = {
        "doc": tags("doc", Ref("p")),
        "p": tags("p", CharsToken()),
        "q": tags("q", CharsToken()),
    }
    r = parse("#doc #q #eof", "doc", defs)
    assert r.root == Element(
        "doc", (Skipped(Token(TokenKind.OPEN, tag="q")), Missing(Ref("p")))
    )


def test_missing_root_synthesized():
    defs = {"doc": tags("doc", CharsToken())}
    r = parse("hello #eof", "doc", defs)
    assert r.root.tag == "doc"
    assert Missing(Ref("doc")) in r.root.children
    assert any(isinstance(n, Skipped) for n in r.root.children)


def test_empty_token_equals_open_close():
    defs = {
        "doc": tags("doc", Seq((Ref("a"), Ref("b")))),
        "a": tags("a", Opt(CharsToken())),
        "b": tags("b", CharsToken()),
    }
    base = [Token(TokenKind.OPEN, tag="doc")]
    tail = [
        Token(TokenKind.OPEN, tag="b"),
        Token(TokenKind.CHARS, text="x"),
        Token(TokenKind.EOF),
    ]
    via_empty = text2tree(
        base + [Token(TokenKind.EMPTY, tag="a")] + tail, "doc", defs
    ).root
    via_pair = text2tree(
        base + [Token(TokenKind.OPEN, tag="a"), Token(TokenKind.CLOSE, tag="a")] + tail,
        "doc",
        defs,
    ).root
    assert via_empty == via_pair
    assert via_empty.children[0] == Element("a", ())
    forced = text2tree(
        base + [Token(TokenKind.EMPTY_FORCED, tag="a")] + tail, "doc", defs
    ).root
    assert forced.children[0] == Element("a", (), incomplete=True)


def test_alt_dispatch_first_match_wins():
    defs = {
        "doc": tags("doc", Alt((Ref("a"), Ref("b")))),
        "a": tags("a", CharsToken()),
        "b": tags("b", CharsToken()),
    }
    assert parse("#doc #b x #eof", "doc", defs).root.children[0].tag == "b"


def test_nested_inference_across_levels():
    # an open deep inside one branch closes several elements at once
    defs = {
        "doc": tags("doc", Plus(Ref("sec"))),
        "sec": tags("sec", Plus(Ref("p"))),
        "p": tags("p", CharsToken()),
    }
    r = parse("#doc #sec #p one #sec #p two #eof", "doc", defs)
    assert r.root == Element(
        "doc",
        (
            Element("sec", (Element("p", (Chars("one "),)),)),
            Element("sec", (Element("p", (Chars("two "),)),)),
        ),
    )


# -- close variants -----------------------------------------------------------


def test_wildcard_close_closes_one_level():
    defs = {
        "doc": tags("doc", Star(Ref("sec"))),
        "sec": tags("sec", Plus(Ref("p"))),
        "p": tags("p", CharsToken()),
    }
    r = parse("#doc #sec #p one #/ #p two #eof", "doc", defs)
    sec = r.root.children[0]
    assert isinstance(sec, Element) and sec.tag == "sec"
    assert [c.tag for c in sec.children] == ["p", "p"]


def test_forced_close_marks_only_target_incomplete():
    defs = {
        "doc": tags("doc", Star(Ref("sec"))),
        "sec": tags("sec", Plus(Ref("p"))),
        "p": tags("p", CharsToken()),
    }
    plain = parse("#doc #sec #p one #/sec #sec #p two #eof", "doc", defs).root
    forced = parse("#doc #sec #p one #///sec #sec #p two #eof", "doc", defs).root
    strip = lambda e: Element(
        e.tag,
        tuple(strip(c) if isinstance(c, Element) else c for c in e.children),
    )
    assert strip(forced) == strip(plain)
    assert forced.children[0].incomplete
    assert not forced.children[0].children[0].incomplete
    assert not forced.children[1].incomplete


def test_forced_close_policy_diagnostics():
    defs = {
        "doc": tags("doc", Star(Ref("p"))),
        "p": Definition(
            "p", DefKind.TAGS, CharsToken(), incomplete_action=IncompleteAction.WARN
        ),
    }
    r = parse("#doc #p one #///p #eof", "doc", defs)
    assert any("incomplete element p" in d for d in r.diagnostics)
    err_defs = {
        "doc": defs["doc"],
        "p": Definition(
            "p", DefKind.TAGS, CharsToken(), incomplete_action=IncompleteAction.ERROR
        ),
    }
    r2 = parse("#doc #p one #///p #eof", "doc", err_defs)
    assert any(d.startswith("error:") for d in r2.diagnostics)


def test_unmatched_close_skipped():
    defs = {"doc": tags("doc", CharsToken())}
    r = parse("#doc one #/nope two #eof", "doc", defs)
    kinds = [type(n).__name__ for n in r.root.children]
    assert kinds == ["Chars", "Skipped", "Skipped"]  # close, then its chars run


# -- missing-content synthesis -------------------------------------------------


def test_close_packs_whole_remaining_sequence_as_one_missing():
    model = Seq((Opt(Alt((Ref("a"), Ref("b")))), Ref("x"), Plus(Ref("d"))))
    defs = {
        "doc": tags("doc", model),
        "a": tags("a", CharsToken()),
        "b": tags("b", CharsToken()),
        "x": tags("x", CharsToken()),
        "d": tags("d", CharsToken()),
    }
    r = parse("#doc #/doc #eof", "doc", defs)
    assert r.root.children == (Missing(model),)
    assert render_expr(model) == "(a|b)?,x,d+"


def test_partial_sequence_missing_tail_only():
    model = Seq((Opt(Ref("a")), Ref("x"), Plus(Ref("d"))))
    defs = {
        "doc": tags("doc", model),
        "a": tags("a", CharsToken()),
        "x": tags("x", CharsToken()),
        "d": tags("d", CharsToken()),
    }
    r = parse("#doc #x one #/doc #eof", "doc", defs)
    assert r.root.children[-1] == Missing(Plus(Ref("d")))


def test_eof_unwind_synthesizes_missing():
    defs = {
        "doc": tags("doc", Seq((Ref("a"), Ref("b")))),
        "a": tags("a", CharsToken()),
        "b": tags("b", CharsToken()),
    }
    r = parse("#doc #a one #eof", "doc", defs)
    assert r.root.children[-1] == Missing(Ref("b"))
    # elements closed by end of input are not marked incomplete
    assert not r.root.incomplete
    assert not r.root.children[0].incomplete


# -- permutations ---------------------------------------------------------------


PERM_DEFS = {
    "doc": tags("doc", Perm((Ref("a"), Ref("b")))),
    "a": tags("a", CharsToken()),
    "b": tags("b", CharsToken()),
}


def test_perm_records_arrival_order():
    r1 = parse("#doc #a x #b y #eof", "doc", PERM_DEFS).root
    r2 = parse("#doc #b y #a x #eof", "doc", PERM_DEFS).root
    (rec1,) = r1.children
    (rec2,) = r2.children
    assert isinstance(rec1, PermRecord) and isinstance(rec2, PermRecord)
    assert [i for i, _ in rec1.filled] == [0, 1]
    assert [i for i, _ in rec2.filled] == [1, 0]
    assert rec1.filled[0][1] == (Element("a", (Chars("x "),)),)


def test_perm_missing_mandatory_branch():
    r = parse("#doc #a x #/doc #eof", "doc", PERM_DEFS).root
    (rec,) = r.children
    assert rec.filled[-1][1][-1] == Missing(Ref("b"))


def test_perm_missing_branches_joined():
    defs = {
        "doc": tags("doc", Perm((Ref("a"), Ref("b"), Ref("c")))),
        "a": tags("a", CharsToken()),
        "b": tags("b", CharsToken()),
        "c": tags("c", CharsToken()),
    }
    r = parse("#doc #a x #/doc #eof", "doc", defs).root
    (rec,) = r.children
    missing = rec.filled[-1][1][-1]
    assert isinstance(missing, Missing)
    assert render_expr(missing.model) == "b&c"


def test_perm_optional_branch_not_missing():
    defs = {
        "doc": tags("doc", Perm((Ref("a"), Opt(Ref("b"))))),
        "a": tags("a", CharsToken()),
        "b": tags("b", CharsToken()),
    }
    r = parse("#doc #a x #/doc #eof", "doc", defs).root
    (rec,) = r.children
    assert not any(isinstance(n, Missing) for _, ns in rec.filled for n in ns)


def test_perm_duplicate_branch_skipped():
    r = parse("#doc #a x #a y #b z #eof", "doc", PERM_DEFS).root
    (rec,) = r.children
    fill_a = dict(rec.filled)[0]
    elem_a = fill_a[0]
    assert Skipped(Token(TokenKind.OPEN, tag="a")) in elem_a.children
    assert dict(rec.filled)[1] == (Element("b", (Chars("z "),)),)


def test_perm_all_orders_three_branches():
    import itertools

    defs = {
        "doc": tags("doc", Perm((Ref("a"), Ref("b"), Ref("c")))),
        "a": tags("a", CharsToken()),
        "b": tags("b", CharsToken()),
        "c": tags("c", CharsToken()),
    }
    for order in itertools.permutations("abc"):
        text = "#doc " + " ".join("#%s %s1" % (t, t) for t in order) + " #eof"
        r = parse(text, "doc", defs).root
        (rec,) = r.children
        assert [defs["doc"].expr.items[i].name for i, _ in rec.filled] == list(order)
        assert not any(isinstance(n, Missing) for _, ns in rec.filled for n in ns)


# -- character-level definitions --------------------------------------------------


DATE = Definition(
    "date",
    DefKind.CHARS,
    TightSeq(
        (
            Capture("y", TightPlus(DIGITS)),
            Literal("-"),
            Capture("m", TightPlus(DIGITS)),
        )
    ),
)


def test_chars_definition_parses_following_text():
    defs = {"doc": tags("doc", Seq((Ref("date"), CharsToken()))), "date": DATE}
    r = parse("#doc #date 2013-07 rest #eof", "doc", defs)
    assert r.root == Element(
        "doc",
        (
            Element(
                "date",
                (Element("y", (Chars("2013"),)), Element("m", (Chars("07"),))),
            ),
            Chars(" rest "),
        ),
    )


def test_chars_definition_explicit_close_consumed():
    defs = {"doc": tags("doc", Seq((Ref("date"), CharsToken()))), "date": DATE}
    r = parse("#doc #date 2013-07#/date rest #eof", "doc", defs)
    assert isinstance(r.root.children[0], Element)
    assert r.root.children[1] == Chars("rest ")


def test_chars_definition_failure_recovers():
    defs = {"doc": tags("doc", Seq((Ref("date"), CharsToken()))), "date": DATE}
    r = parse("#doc #date nope #eof", "doc", defs)
    date_elem = r.root.children[0]
    assert date_elem == Element("date", (Missing(DATE.expr),))
    # the unconsumed text re-enters the stream and lands where chars fit
    assert r.root.children[1] == Chars("nope ")
    assert any("date" in d for d in r.diagnostics)


def test_chars_definition_leftover_reenters_stream():
    defs = {"doc": tags("doc", Seq((Ref("num"), CharsToken()))),
            "num": Definition("num", DefKind.CHARS, TightPlus(DIGITS))}
    r = parse("#doc #num 42nd #eof", "doc", defs)
    assert r.root.children[0] == Element("num", (Chars("42"),))
    assert r.root.children[1] == Chars("nd ")


def test_chars_definition_ws_leftover_is_separator():
    # the newline between the matched region and the next command never
    # re-enters as content
    defs = {"doc": tags("doc", Ref("num")),
            "num": Definition("num", DefKind.CHARS, TightPlus(DIGITS))}
    r = parse("#doc #num 42\n#eof", "doc", defs)
    assert r.root == Element("doc", (Element("num", (Chars("42"),)),))
    assert r.diagnostics == ()


def test_chars_definition_ws_then_explicit_close():
    defs = {"doc": tags("doc", Ref("num")),
            "num": Definition("num", DefKind.CHARS, TightPlus(DIGITS))}
    r = parse("#doc #num 42 #/num #eof", "doc", defs)
    assert r.root == Element("doc", (Element("num", (Chars("42"),)),))
    assert r.diagnostics == ()


# -- comments and tokenizer diagnostics ---------------------------------------------


def test_comments_dropped_by_default_kept_on_request():
    defs = {"doc": tags("doc", CharsToken())}
    plain = parse("#doc one /*note*/ two #eof", "doc", defs).root
    assert plain.children == (Chars("one  two "),)  # comment leaves its gaps
    kept = parse("#doc one /*note*/ two #eof", "doc", defs, keep_comments=True).root
    assert kept.children == (Chars("one "), CommentNode("note"), Chars(" two "))


def test_tokenizer_diagnostics_become_skipped_nodes():
    defs = {"doc": tags("doc", CharsToken())}
    r = parse("#doc one #9fffffff/ two #eof", "doc", defs)
    assert any(
        isinstance(n, Skipped) and n.token.kind is TokenKind.ERROR
        for n in r.root.children
    )
    assert any(d.startswith("error:") for d in r.diagnostics)


def test_premature_end_of_input():
    defs = {"doc": tags("doc", CharsToken())}
    r = parse("#doc one", "doc", defs)  # no #eof at all
    assert r.root.tag == "doc"
    assert Chars("one") in r.root.children


# -- skip behaviour ------------------------------------------------------------------


def test_skip_consumes_following_chars_run():
    defs = {"doc": tags("doc", Ref("p")), "p": tags("p", CharsToken())}
    r = parse("#doc #zz junk text #p ok #eof", "doc", defs)
    p = next(c for c in r.root.children if isinstance(c, Element))
    assert p == Element("p", (Chars("ok "),))
    skipped = [n for n in r.root.children if isinstance(n, Skipped)]
    assert skipped[0].token == Token(TokenKind.OPEN, tag="zz")
    assert [s.token.kind for s in skipped[1:]] == [TokenKind.CHARS]


def test_failed_ascend_leaves_stack_untouched():
    # after the skip the parser continues exactly where it was
    defs = {
        "doc": tags("doc", Seq((Ref("a"), Ref("b")))),
        "a": tags("a", Plus(Ref("w"))),
        "w": tags("w", CharsToken()),
        "b": tags("b", CharsToken()),
    }
    r = parse("#doc #a #w one #zz #w two #b x #eof", "doc", defs)
    a = r.root.children[0]
    assert [c.tag for c in a.children if isinstance(c, Element)] == ["w", "w"]
    # the bad open was skipped inside the element that was open at the time
    assert Skipped(Token(TokenKind.OPEN, tag="zz")) in a.children[0].children
    assert r.root.children[1] == Element("b", (Chars("x "),))


# -- totality and no-loss -------------------------------------------------------------


def _count_tokens(tokens):
    opens: dict[str, int] = {}
    chars_total = 0
    for t in tokens:
        if t.kind in (TokenKind.OPEN, TokenKind.EMPTY, TokenKind.EMPTY_FORCED):
            opens[t.tag] = opens.get(t.tag, 0) + 1
        elif t.kind is TokenKind.CHARS:
            chars_total += len(t.text)
    return opens, chars_total


def _count_tree(node: Node, opens: dict[str, int], seen: list[int]) -> None:
    if isinstance(node, Element):
        opens[node.tag] = opens.get(node.tag, 0) + 1
        for c in node.children:
            _count_tree(c, opens, seen)
    elif isinstance(node, Chars):
        seen[0] += len(node.text)
    elif isinstance(node, Skipped):
        t = node.token
        if t.kind in (TokenKind.OPEN, TokenKind.EMPTY, TokenKind.EMPTY_FORCED):
            opens[t.tag] = opens.get(t.tag, 0) + 1
        elif t.kind is TokenKind.CHARS:
            seen[0] += len(t.text)
    elif isinstance(node, PermRecord):
        for _, ns in node.filled:
            for c in ns:
                _count_tree(c, opens, seen)


FUZZ_DEFS = {
    "doc": tags("doc", Star(Alt((Ref("sec"), Ref("p"))))),
    "sec": tags("sec", Seq((Ref("p"), Star(Alt((Ref("p"), Ref("note"))))))),
    "p": tags("p", CharsToken()),
    "note": tags("note", Perm((Ref("p"), Opt(Ref("q"))))),
    "q": tags("q", CharsToken()),
}


def _random_tokens(rng: random.Random, n: int) -> list[Token]:
    tags_pool = ["doc", "sec", "p", "note", "q", "zz"]
    out: list[Token] = []
    for _ in range(n):
        roll = rng.random()
        tag = rng.choice(tags_pool)
        if roll < 0.35:
            out.append(Token(TokenKind.OPEN, tag=tag))
        elif roll < 0.55:
            out.append(Token(TokenKind.CHARS, text=rng.choice(["x ", "y y ", " "])))
        elif roll < 0.7:
            out.append(Token(TokenKind.CLOSE, tag=tag))
        elif roll < 0.78:
            out.append(Token(TokenKind.CLOSE, tag=None))
        elif roll < 0.84:
            out.append(Token(TokenKind.CLOSE_FORCED, tag=rng.choice(tags_pool + [None])))
        elif roll < 0.9:
            out.append(Token(TokenKind.EMPTY, tag=tag))
        elif roll < 0.95:
            out.append(Token(TokenKind.WARNING, text="w"))
        else:
            out.append(Token(TokenKind.ERROR, text="e"))
    out.append(Token(TokenKind.EOF))
    return out


def test_totality_random_token_streams():
    rng = random.Random(7)
    for _ in range(300):
        toks = _random_tokens(rng, rng.randrange(0, 40))
        r = text2tree(toks, "doc", FUZZ_DEFS)
        assert isinstance(r.root, Element) and r.root.tag == "doc"


def test_no_token_is_lost():
    rng = random.Random(11)
    for _ in range(200):
        toks = _random_tokens(rng, rng.randrange(0, 40))
        in_opens, in_chars = _count_tokens(toks)
        r = text2tree(toks, "doc", FUZZ_DEFS)
        out_opens: dict[str, int] = {}
        seen = [0]
        _count_tree(r.root, out_opens, seen)
        # the root element may be synthesized when the document never opened
        # it cleanly; everything else must balance exactly
        root_extra = out_opens.get("doc", 0) - in_opens.get("doc", 0)
        assert root_extra in (0, 1)
        out_opens.pop("doc", None)
        in_opens.pop("doc", None)
        assert out_opens == in_opens
        assert seen[0] == in_chars


# -- tracing ----------------------------------------------------------------------------


def test_trace_line_format():
    defs = {"doc": tags("doc", Ref("p")), "p": tags("p", CharsToken())}
    lines: list[str] = []
    text2tree(tokenize("#doc #p one #zz #eof"), "doc", defs, trace=lines.append)
    assert lines, "trace callback never invoked"
    import re

    pat = re.compile(r"^.+ \| \d+ \| (descend|ascend_O|ascend_C|skip|comment)$")
    for line in lines:
        assert pat.match(line), line
    actions = [l.rsplit("|", 1)[1].strip() for l in lines]
    assert "descend" in actions and "skip" in actions and "ascend_C" in actions


def test_unknown_root_rejected():
    with pytest.raises(KeyError):
        text2tree([Token(TokenKind.EOF)], "nope", {})
