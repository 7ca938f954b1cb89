"""Equivalence checkers: HHPB, level families, barbed bisimulations."""

from __future__ import annotations

import random

import pytest

from rccs.terms import (
    CPar,
    CPrefix,
    HOLE,
    format_context,
    inp,
    parse_term,
)
from rccs.machine import Thread, fwd_steps, parse_process
from rccs.structures import ConfStruct
from rccs.encoding import encode_ccs
from rccs.equivalences import (
    LevelFamilies,
    MainTheoremReport,
    TauEventInConfig,
    TripleRelation,
    Verdict,
    bounded_congruence,
    ccs_barbed_bisim,
    cs_bfb_barbed_bisim,
    discriminating_context,
    forw_backw_levels,
    hhpb,
    main_theorem_check,
    matchings,
    rccs_bfb_bisim,
)

from generators import random_singly_term


def T(text: str):
    return parse_term(text)


def enc(text: str) -> ConfStruct:
    return encode_ccs(T(text))


ROOT = (frozenset(), frozenset(), frozenset())


# ---------------------------------------------------------------------------
# Matchings


def test_matchings_require_equal_label_multisets():
    assert matchings(enc("a"), *_single(enc("a")), both_ways=True) != []
    left = enc("a")
    right = enc("b")
    (x1,) = [x for x in left.configs if x]
    (x2,) = [x for x in right.configs if x]
    assert matchings(left, x1, right, x2) == []


def _single(struct):
    (x,) = [x for x in struct.configs if len(x) == 1]
    return x, struct, x


def test_matchings_require_equal_label_multisets_positive():
    left = enc("a")
    right = enc("a")
    (x1,) = [x for x in left.configs if x]
    (x2,) = [x for x in right.configs if x]
    result = matchings(left, x1, right, x2)
    assert len(result) == 1


def test_matchings_one_directional_order():
    conc = enc("a|b")
    seq = enc("a.b")
    (x1,) = [x for x in conc.configs if len(x) == 2]
    (x2,) = [x for x in seq.configs if len(x) == 2]
    # unordered source maps into ordered target, but not back
    assert len(matchings(conc, x1, seq, x2, both_ways=False)) == 1
    assert matchings(seq, x2, conc, x1, both_ways=False) == []
    assert matchings(conc, x1, seq, x2, both_ways=True) == []


def test_matchings_count_permutations():
    left = enc("a|a")
    (x1,) = [x for x in left.configs if len(x) == 2]
    assert len(matchings(left, x1, left, x1)) == 2


# ---------------------------------------------------------------------------
# HHPB


def test_hhpb_identical_terms():
    verdict = hhpb(enc("a.(b|c)"), enc("a.(b|c)"))
    assert verdict.outcome == "equivalent"
    assert isinstance(verdict.witness, TripleRelation)
    assert ROOT in verdict.witness


def test_hhpb_distinguishes_concurrency_from_interleaving():
    verdict = hhpb(enc("a|b"), enc("a.b+b.a"))
    assert verdict.outcome == "distinguished"
    play = verdict.evidence["play"]
    assert play[-1]["answer"] is None
    assert any(move["direction"] == "backward" for move in play)


def test_hhpb_distinguishes_choice_depth():
    assert hhpb(enc("a.b+a"), enc("a.b+a.b")).outcome == "distinguished"
    assert hhpb(enc("a.(b|c)"), enc("a.(b.c+c.b)")).outcome == "distinguished"


def test_hhpb_commutative_parallel():
    assert hhpb(enc("a|b"), enc("b|a")).outcome == "equivalent"


def test_hhpb_label_mismatch_is_immediate():
    verdict = hhpb(enc("a"), enc("b"))
    assert verdict.outcome == "distinguished"


def test_hhpb_witness_keeps_all_compatible_bijections():
    # two conflicting a-events on each side admit two global matchings
    fig = ConfStruct(
        frozenset({"e1", "e1p"}),
        frozenset({frozenset(), frozenset({"e1"}), frozenset({"e1p"})}),
        {"e1": inp("a"), "e1p": inp("a")},
    )
    fig2 = ConfStruct(
        frozenset({"e2", "e2p"}),
        frozenset({frozenset(), frozenset({"e2"}), frozenset({"e2p"})}),
        {"e2": inp("a"), "e2p": inp("a")},
    )
    verdict = hhpb(fig, fig2)
    assert verdict.outcome == "equivalent"
    f1 = (frozenset({"e1"}), frozenset({"e2"}), frozenset({("e1", "e2")}))
    f2 = (frozenset({"e1"}), frozenset({"e2p"}), frozenset({("e1", "e2p")}))
    assert f1 in verdict.witness and f2 in verdict.witness


def test_hhpb_verdict_json():
    payload = hhpb(enc("a"), enc("b")).to_jsonable()
    assert payload["verdict"] == "distinguished"
    assert "evidence" in payload


# ---------------------------------------------------------------------------
# Level families


def test_levels_forward_only_distinction():
    families = forw_backw_levels(enc("a.b+a"), enc("a.b+a.b"))
    assert isinstance(families, LevelFamilies)
    assert len(families.forward[2]) == 2
    assert len(families.forward[1]) == 2
    assert families.forward[0] == frozenset()


def test_levels_backward_distinction():
    families = forw_backw_levels(enc("a|b"), enc("a.b+b.a"))
    assert len(families.forward[2]) == 2
    assert len(families.forward[1]) == 2
    assert ROOT in families.forward[0]
    assert families.backward[0] == families.forward[0]
    assert len(families.backward[1]) == 2
    assert families.backward[2] == frozenset()


def test_levels_backward_contained_in_forward():
    rng = random.Random(40)
    for _ in range(25):
        a = encode_ccs(random_singly_term(rng, max_prefixes=4))
        b = encode_ccs(random_singly_term(rng, max_prefixes=4))
        families = forw_backw_levels(a, b)
        for level, members in families.backward.items():
            assert members <= families.forward[level]


def test_levels_equivalent_structures_populate_root():
    families = forw_backw_levels(enc("a.b"), enc("a.b"))
    assert ROOT in families.forward[0]
    assert ROOT in families.backward[0]


# ---------------------------------------------------------------------------
# Barbed bisimulations


def test_ccs_barbed_equates_barb_equal_tau_free():
    assert ccs_barbed_bisim(T("a+b"), T("a|b")).outcome == "equivalent"


def test_ccs_barbed_distinguishes_barbs():
    verdict = ccs_barbed_bisim(T("a"), T("b"))
    assert verdict.outcome == "distinguished"
    assert "barbs_left" in verdict.evidence["play"][-1]


def test_ccs_barbed_matches_reductions():
    assert ccs_barbed_bisim(T("(a|!a)\\a"), T("0")).outcome == "distinguished"
    assert (
        ccs_barbed_bisim(T("(a|!a)\\a"), T("(b|!b)\\b")).outcome == "equivalent"
    )


def test_rccs_bfb_ignores_forward_only_differences():
    # without a context, a|b and a.b+b.a have the same barbs and no taus
    verdict = rccs_bfb_bisim(
        Thread((), T("a|b")), Thread((), T("a.b+b.a"))
    )
    assert verdict.outcome == "equivalent"


def test_rccs_bfb_sees_backward_tau():
    left = parse_process("{} |> ((a | !a) \\ b)")
    right = parse_process("{} |> a.0")
    assert rccs_bfb_bisim(left, right).outcome == "distinguished"


def test_rccs_bfb_distinguishes_after_tau_histories():
    # states reached by tau from (a|!a)\a and from (a.b|!a)\a differ in barbs
    left = Thread((), T("(a|!a)\\a"))
    right = Thread((), T("(a.b|!a)\\a"))
    assert rccs_bfb_bisim(left, right).outcome == "distinguished"


def test_cs_bfb_matches_rccs_bfb_on_worked_pairs():
    pairs = [
        ("a|b", "a.b+b.a"),
        ("(a|!a)\\a", "(b|!b)\\b"),
        ("(a|!a)\\a", "0"),
        ("a.b", "a.c"),
    ]
    for p, q in pairs:
        via_cs = cs_bfb_barbed_bisim(enc(p), enc(q)).outcome
        via_rccs = rccs_bfb_bisim(Thread((), T(p)), Thread((), T(q))).outcome
        assert via_cs == via_rccs, (p, q)


# ---------------------------------------------------------------------------
# Discriminating contexts and bounded congruence


def test_discriminating_context_shape():
    struct = enc("a|!b")
    (x,) = [c for c in struct.configs if len(c) == 2]
    context = discriminating_context(x, struct.labels, {"a", "b"})
    rendered = format_context(context)
    assert rendered == "!a + c0 | b + c1 | [.]"


def test_discriminating_context_rejects_tau():
    struct = enc("(a|!a)\\a")
    (x,) = [c for c in struct.configs if len(c) == 1]
    with pytest.raises(TauEventInConfig):
        discriminating_context(x, struct.labels, set())


def test_bounded_congruence_separates_concurrency():
    p = Thread((), T("a|b"))
    q = Thread((), T("a.b+b.a"))
    struct = enc("a|b")
    (x,) = [c for c in struct.configs if len(c) == 2]
    context = discriminating_context(x, struct.labels, {"a", "b"})
    verdict = bounded_congruence(p, q, [HOLE, context])
    assert verdict.outcome == "distinguished"
    assert verdict.evidence["context"] == format_context(context)


def test_bounded_congruence_positive_is_labelled_bounded():
    p = Thread((), T("a.b"))
    q = Thread((), T("a.b"))
    verdict = bounded_congruence(p, q, [HOLE])
    assert verdict.outcome == "bounded-equivalent"
    assert verdict.equivalent


# ---------------------------------------------------------------------------
# Main theorem


def test_main_theorem_worked_pairs():
    expectations = {
        ("a|b", "a.b+b.a"): "distinguished",
        ("a.(b|c)", "a.(b.c+c.b)"): "distinguished",
        ("a|b", "b|a"): "equivalent",
        ("a.b", "a.b"): "equivalent",
    }
    for (p, q), outcome in expectations.items():
        report = main_theorem_check(T(p), T(q))
        assert isinstance(report, MainTheoremReport)
        assert report.hhpb.outcome == outcome
        assert report.agree, (p, q)


def test_main_theorem_report_json():
    payload = main_theorem_check(T("a"), T("a")).to_jsonable()
    assert payload["agree"] is True
    assert payload["hhpb"]["verdict"] == "equivalent"
    assert payload["congruence"]["verdict"] == "bounded-equivalent"


def test_main_theorem_flags_non_singly_labelled():
    report = main_theorem_check(T("a+a.b"), T("a.b+a.b"))
    assert not report.singly_labelled
    assert report.agree
