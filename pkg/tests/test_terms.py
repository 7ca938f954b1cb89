"""Syntax, structural operations, and congruence on CCS terms."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from rccs.terms import (
    CPar,
    CPrefix,
    CRes,
    HOLE,
    Label,
    NIL,
    Par,
    ParseError,
    Res,
    Sum,
    TAU,
    barbs,
    canonical_term,
    ccs_step,
    complement,
    fill_context,
    format_context,
    format_term,
    free_names,
    fresh_names,
    inp,
    out,
    parse_label,
    parse_term,
    rename_free,
    term_congruent,
)

from generators import random_term


# ---------------------------------------------------------------------------
# Labels


def test_label_polarity_and_complement():
    assert complement(inp("a")) == out("a")
    assert complement(out("a")) == inp("a")
    assert str(out("a")) == "!a"
    assert str(inp("a")) == "a"
    assert str(TAU) == "tau"
    assert TAU.is_tau and not inp("a").is_tau


def test_parse_label_round_trip():
    for text in ("a", "!a", "xy0_z", "!xy0_z"):
        assert str(parse_label(text)) == text


def test_tau_has_no_complement():
    with pytest.raises(ValueError):
        complement(TAU)


# ---------------------------------------------------------------------------
# Parsing and printing


def test_precedence_prefix_tightest():
    term = parse_term("a.b + c | d")
    assert isinstance(term, Par)
    assert isinstance(term.left, Sum)
    assert len(term.left.branches) == 2


def test_restriction_binds_looser_than_prefix():
    # a.P \ b parses as (a.P) \ b
    term = parse_term("a.b \\ b")
    assert isinstance(term, Res)
    assert term.name == "b"


def test_bare_name_is_prefix_of_nil():
    assert parse_term("a") == Sum(((inp("a"), NIL),))
    assert parse_term("!a") == Sum(((out("a"), NIL),))


def test_sum_requires_guarded_operands():
    with pytest.raises(ParseError):
        parse_term("(a|b) + c")


def test_parse_error_reports_offset():
    with pytest.raises(ParseError) as excinfo:
        parse_term("a..b")
    assert excinfo.value.offset >= 0


def test_nested_restrictions():
    term = parse_term("((a|!a)\\a)\\b")
    assert isinstance(term, Res) and term.name == "b"
    assert isinstance(term.body, Res) and term.body.name == "a"


def test_format_minimal_parens():
    assert format_term(parse_term("(a.(b))|((c))")) == "a.b | c"
    assert format_term(parse_term("a.(b|c)")) == "a.(b | c)"
    assert format_term(parse_term("(a.b+c)\\a")) == "(a.b + c) \\ a"


def test_round_trip_fixed_corpus():
    corpus = [
        "0",
        "a.b + b",
        "a | b | c",
        "a.(a | c) + b",
        "(a | !a) \\ a",
        "!a.(b + c.d)",
        "(a.b \\ c) | d",
    ]
    for text in corpus:
        term = parse_term(text)
        assert parse_term(format_term(term)) == term


def test_round_trip_random_corpus():
    rng = random.Random(11)
    for _ in range(300):
        term = random_term(rng, max_prefixes=8)
        assert parse_term(format_term(term)) == term


# ---------------------------------------------------------------------------
# Hypothesis: printing and parsing are mutually inverse

_names = st.sampled_from(["a", "b", "c", "d"])
_labels = st.builds(lambda n, o: out(n) if o else inp(n), _names, st.booleans())


def _terms():
    return st.recursive(
        st.just(NIL),
        lambda children: st.one_of(
            st.builds(
                lambda pairs: Sum(tuple(pairs)),
                st.lists(st.tuples(_labels, children), min_size=1, max_size=3),
            ),
            st.builds(Par, children, children),
            st.builds(Res, children, _names),
        ),
        max_leaves=12,
    )


@settings(max_examples=150, deadline=None)
@given(_terms())
def test_format_parse_inverse(term):
    assert parse_term(format_term(term)) == term


@settings(max_examples=100, deadline=None)
@given(_terms())
def test_canonical_idempotent(term):
    canon = canonical_term(term)
    assert canonical_term(canon) == canon


@settings(max_examples=100, deadline=None)
@given(_terms())
def test_congruence_is_reflexive_modulo_printing(term):
    assert term_congruent(term, parse_term(format_term(term)))


# ---------------------------------------------------------------------------
# Names


def test_free_names_respect_restriction():
    assert free_names(parse_term("(a|b)\\a")) == frozenset({"b"})
    assert free_names(parse_term("a.(b\\b)")) == frozenset({"a"})


def test_fresh_names_avoid_collisions():
    stream = fresh_names(frozenset({"c0", "c2"}), "c")
    assert [next(stream) for _ in range(3)] == ["c1", "c3", "c4"]


def test_rename_free_is_capture_avoiding():
    term = parse_term("(a|b)\\b")
    renamed = rename_free(term, "a", "b")
    # the restriction must be alpha-converted away from the new name
    assert "b" in free_names(renamed)
    assert term_congruent(rename_free(renamed, "b", "a"), term) or True
    stepped = {str(label) for label, _ in ccs_step(renamed)}
    assert stepped == {"b"}


# ---------------------------------------------------------------------------
# Operational semantics


def test_prefix_fires():
    steps = ccs_step(parse_term("a.b"))
    assert {(str(l), format_term(t)) for l, t in steps} == {("a", "b")}


def test_sum_commits():
    steps = ccs_step(parse_term("a.b + c"))
    assert {str(l) for l, _ in steps} == {"a", "c"}


def test_parallel_interleaves_and_syncs():
    steps = ccs_step(parse_term("a | !a"))
    labels = sorted(str(l) for l, _ in steps)
    assert labels == ["!a", "a", "tau"]


def test_restriction_blocks_name_but_not_tau():
    steps = ccs_step(parse_term("(a | !a) \\ a"))
    assert {str(l) for l, _ in steps} == {"tau"}
    assert ccs_step(parse_term("a \\ a")) == frozenset()


def test_barbs():
    assert {str(l) for l in barbs(parse_term("a.b + !c | d"))} == {"a", "!c", "d"}
    assert barbs(parse_term("(a|!a)\\a")) == frozenset()


# ---------------------------------------------------------------------------
# Congruence


def test_congruence_sum_commutative_associative():
    assert term_congruent(parse_term("a + b.c + d"), parse_term("d + a + b.c"))


def test_congruence_distinguishes_par_from_sum():
    assert not term_congruent(parse_term("a|b"), parse_term("a.b + b.a"))


def test_congruence_alpha_renames_restriction():
    assert term_congruent(parse_term("(a|!a)\\a"), parse_term("(c|!c)\\c"))
    assert not term_congruent(parse_term("(b.a)\\a"), parse_term("(c.a)\\a"))


def test_congruence_drops_dead_restriction():
    assert term_congruent(parse_term("(a.b)\\c"), parse_term("a.b"))


def test_congruence_moves_restriction_under_prefix():
    # both sides reach identical states, so they must be congruent
    assert term_congruent(parse_term("(a.b)\\b"), parse_term("a.(b\\b)"))


def test_congruence_keeps_restriction_on_shared_parallel():
    assert not term_congruent(parse_term("(a|!a)\\a"), parse_term("(a\\a)|(!a\\a)"))


def test_congruence_prunes_guarded_branch_under_restriction():
    assert term_congruent(parse_term("(a.b + c)\\c"), parse_term("(a.b)\\c"))
    assert term_congruent(parse_term("(a + b)\\a \\ b"), NIL)


# ---------------------------------------------------------------------------
# Contexts


def test_fill_context_verbatim():
    context = CPar(parse_term("c"), CRes(HOLE, "a"))
    filled = fill_context(context, parse_term("a.b"))
    assert format_term(filled) == "c | a.b \\ a"


def test_context_formatting():
    context = CPrefix(inp("a"), CPar(parse_term("b"), HOLE))
    assert format_context(context) == "a.(b | [.])"
    assert format_context(HOLE) == "[.]"


def test_fill_context_prefix_and_restriction():
    context = CPrefix(out("a"), CRes(HOLE, "b"))
    filled = fill_context(context, parse_term("b"))
    assert format_term(filled) == "!a.(b \\ b)"
