"""Equivalence checkers: hereditary history preserving bisimulation,
its level-indexed approximations, and the barbed back-and-forth family.

All deciders are exhaustive fixpoint refinements over finite state
spaces, returning a Verdict that carries either a witness relation or
replayable evidence for the distinction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Iterable

from .terms import (
    CcsContext,
    CPar,
    HOLE,
    Label,
    NIL,
    Sum,
    Term,
    all_names,
    barbs,
    canonical_term,
    ccs_step,
    complement,
    format_context,
    format_term,
    fresh_names,
    inp,
    out,
    prefix_term,
)
from .machine import (
    Process,
    Thread,
    bwd_steps,
    format_process,
    fwd_steps,
    instantiate_context,
    normal_form,
    origin,
    rccs_barbs,
)
from .structures import (
    ConfStruct,
    _ekey,
    _lkey,
    barbs_at,
    causes,
    config_backsteps,
    config_steps,
    event_names,
    is_maximal,
)
from .encoding import NotSinglyLabelled, encode_ccs, is_singly_labelled


class TauEventInConfig(ValueError):
    """tau events have no complement and cannot be observed by a guard."""


# ---------------------------------------------------------------------------
# Verdicts


@dataclass
class Verdict:
    outcome: str  # "equivalent" | "distinguished" | "bounded-equivalent"
    witness: object = None
    evidence: object = None

    @property
    def equivalent(self) -> bool:
        return self.outcome in ("equivalent", "bounded-equivalent")

    def to_jsonable(self) -> dict:
        payload: dict = {"verdict": self.outcome}
        if self.evidence is not None:
            payload["evidence"] = self.evidence
        if self.witness is not None:
            payload["witness"] = _jsonable(self.witness)
        return payload


def _jsonable(value):
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((_jsonable(v) for v in value), key=str)
    return str(value)


@dataclass(frozen=True)
class TripleRelation:
    triples: frozenset  # of (config, config, frozenset of event pairs)

    def __contains__(self, triple) -> bool:
        return triple in self.triples

    def __len__(self) -> int:
        return len(self.triples)


# ---------------------------------------------------------------------------
# Matchings

_EMPTY = frozenset()
_ROOT = (_EMPTY, _EMPTY, _EMPTY)


def _strict_order(c: ConfStruct, x: frozenset) -> frozenset:
    """All pairs (e1, e2) with e1 strictly below e2 in x."""
    members = sorted(x, key=_ekey)
    return frozenset(
        (e1, e2)
        for e1 in members
        for e2 in members
        if e1 != e2 and causes(c, x, e1, e2)
    )


def _is_matching(
    order1: frozenset, order2: frozenset, pairs: Iterable, both_ways: bool
) -> bool:
    f = dict(pairs)
    for e1, e2 in order1:
        if e1 in f and e2 in f and (f[e1], f[e2]) not in order2:
            return False
    if both_ways:
        inv = {v: k for k, v in f.items()}
        for e1, e2 in order2:
            if e1 in inv and e2 in inv and (inv[e1], inv[e2]) not in order1:
                return False
    return True


def matchings(
    a: ConfStruct,
    x1: frozenset,
    b: ConfStruct,
    x2: frozenset,
    both_ways: bool = True,
) -> list[frozenset]:
    """Label-preserving, order-preserving bijections between x1 and x2."""
    if len(x1) != len(x2):
        return []
    groups1: dict = {}
    for e in x1:
        groups1.setdefault(_lkey(a.labels[e]), []).append(e)
    groups2: dict = {}
    for e in x2:
        groups2.setdefault(_lkey(b.labels[e]), []).append(e)
    if set(groups1) != set(groups2):
        return []
    if any(len(groups1[k]) != len(groups2[k]) for k in groups1):
        return []
    order1 = _strict_order(a, x1)
    order2 = _strict_order(b, x2)
    keys = sorted(groups1)
    chunks = [sorted(groups1[k], key=_ekey) for k in keys]
    results = []

    def assemble(index: int, pairs: tuple):
        if index == len(keys):
            if _is_matching(order1, order2, pairs, both_ways):
                results.append(frozenset(pairs))
            return
        left = chunks[index]
        for perm in permutations(sorted(groups2[keys[index]], key=_ekey)):
            assemble(index + 1, pairs + tuple(zip(left, perm)))

    assemble(0, ())
    return results


# ---------------------------------------------------------------------------
# HHPB


def _all_triples(a: ConfStruct, b: ConfStruct, both_ways: bool) -> set:
    triples = set()
    for x1 in a.configs:
        for x2 in b.configs:
            for f in matchings(a, x1, b, x2, both_ways):
                triples.add((x1, x2, f))
    return triples


def _hhpb_violation(triple, live: set, candidates: set, a: ConfStruct, b: ConfStruct):
    """The first unanswerable move at this triple, or None.

    Returns (side, direction, event, answers) where answers lists the
    once-valid answering triples (all necessarily already removed).
    """
    x1, x2, f = triple
    fwd = dict(f)
    inv = {v: k for k, v in fwd.items()}
    for e1, y1 in sorted(config_steps(a, x1), key=lambda s: _ekey(s[0])):
        answers = [
            (y1, y2, f | {(e1, e2)})
            for e2, y2 in config_steps(b, x2)
        ]
        answers = [t for t in answers if t in candidates]
        if not any(t in live for t in answers):
            return (1, "forward", e1, answers)
    for e2, y2 in sorted(config_steps(b, x2), key=lambda s: _ekey(s[0])):
        answers = [
            (y1, y2, f | {(e1, e2)})
            for e1, y1 in config_steps(a, x1)
        ]
        answers = [t for t in answers if t in candidates]
        if not any(t in live for t in answers):
            return (2, "forward", e2, answers)
    for e1, y1 in sorted(config_backsteps(a, x1), key=lambda s: _ekey(s[0])):
        e2 = fwd[e1]
        y2 = x2 - {e2}
        answer = (y1, y2, f - {(e1, e2)})
        answers = [answer] if y2 in b.configs and answer in candidates else []
        if not any(t in live for t in answers):
            return (1, "backward", e1, answers)
    for e2, y2 in sorted(config_backsteps(b, x2), key=lambda s: _ekey(s[0])):
        e1 = inv[e2]
        y1 = x1 - {e1}
        answer = (y1, y2, f - {(e1, e2)})
        answers = [answer] if y1 in a.configs and answer in candidates else []
        if not any(t in live for t in answers):
            return (2, "backward", e2, answers)
    return None


def _losing_play(removed: dict, root, names1: dict, names2: dict, a, b) -> list:
    play = []
    triple = root
    while True:
        _, (side, direction, event, answers) = removed[triple]
        struct, names = (a, names1) if side == 1 else (b, names2)
        move = {
            "side": side,
            "direction": direction,
            "event": names[event],
            "label": str(struct.labels[event]),
        }
        answered = [(removed[t][0], t) for t in answers]
        if not answered:
            move["answer"] = None
            play.append(move)
            return play
        _, best = min(answered, key=lambda item: item[0])
        ox1, ox2, _ = triple
        nx1, nx2, _ = best
        answer_event = next(iter((nx2 ^ ox2) if side == 1 else (nx1 ^ ox1)))
        other_names = names2 if side == 1 else names1
        move["answer"] = other_names[answer_event]
        play.append(move)
        triple = best


def hhpb(a: ConfStruct, b: ConfStruct) -> Verdict:
    """Hereditary history preserving bisimilarity by fixpoint refinement."""
    candidates = _all_triples(a, b, both_ways=False)
    live = set(candidates)
    removed: dict = {}
    rounds = 0
    while True:
        rounds += 1
        stale = []
        for triple in live:
            reason = _hhpb_violation(triple, live, candidates, a, b)
            if reason is not None:
                stale.append((triple, reason))
        if not stale:
            break
        for triple, reason in stale:
            live.discard(triple)
            removed[triple] = (rounds, reason)
    if _ROOT in live:
        return Verdict("equivalent", witness=TripleRelation(frozenset(live)))
    if _ROOT not in candidates:
        return Verdict(
            "distinguished", evidence={"reason": "no root triple", "play": []}
        )
    play = _losing_play(removed, _ROOT, event_names(a), event_names(b), a, b)
    return Verdict("distinguished", evidence={"play": play})


# ---------------------------------------------------------------------------
# Level-indexed approximations


@dataclass(frozen=True)
class LevelFamilies:
    forward: dict = field(hash=False)
    backward: dict = field(hash=False)
    forward_sym: dict = field(hash=False)
    backward_sym: dict = field(hash=False)


def _forward_member(
    triple, a: ConfStruct, b: ConfStruct, upper: frozenset, symmetric: bool
) -> bool:
    x1, x2, f = triple
    max1 = is_maximal(a, x1)
    max2 = is_maximal(b, x2)
    if max1 or max2:
        return max1 and max2
    for e1, y1 in config_steps(a, x1):
        if not any(
            (y1, y2, f | {(e1, e2)}) in upper for e2, y2 in config_steps(b, x2)
        ):
            return False
    if symmetric:
        for e2, y2 in config_steps(b, x2):
            if not any(
                (y1, y2, f | {(e1, e2)}) in upper
                for e1, y1 in config_steps(a, x1)
            ):
                return False
    return True


def _backward_member(
    triple, a: ConfStruct, b: ConfStruct, lower: frozenset, symmetric: bool
) -> bool:
    x1, x2, f = triple
    fwd = dict(f)
    inv = {v: k for k, v in fwd.items()}
    for e1, y1 in config_backsteps(a, x1):
        e2 = fwd[e1]
        y2 = x2 - {e2}
        if y2 not in b.configs or (y1, y2, f - {(e1, e2)}) not in lower:
            return False
    if symmetric:
        for e2, y2 in config_backsteps(b, x2):
            e1 = inv[e2]
            y1 = x1 - {e1}
            if y1 not in a.configs or (y1, y2, f - {(e1, e2)}) not in lower:
                return False
    return True


def forw_backw_levels(a: ConfStruct, b: ConfStruct) -> LevelFamilies:
    """Card-indexed forward/backward families, literal one-sided form
    plus a symmetrised variant."""
    depth = max(
        [len(x) for x in a.configs] + [len(x) for x in b.configs]
    )
    by_card: dict[int, list] = {i: [] for i in range(depth + 1)}
    for triple in _all_triples(a, b, both_ways=False):
        by_card[len(triple[0])].append(triple)

    families: dict[bool, tuple[dict, dict]] = {}
    for symmetric in (False, True):
        forward: dict[int, frozenset] = {}
        upper: frozenset = frozenset()
        for i in range(depth, -1, -1):
            forward[i] = frozenset(
                t
                for t in by_card[i]
                if _forward_member(t, a, b, upper, symmetric)
            )
            upper = forward[i]
        backward: dict[int, frozenset] = {0: forward[0]}
        for i in range(1, depth + 1):
            lower = forward[i - 1] & backward[i - 1]
            backward[i] = frozenset(
                t
                for t in forward[i]
                if _backward_member(t, a, b, lower, symmetric)
            )
        families[symmetric] = (forward, backward)
    return LevelFamilies(
        forward=families[False][0],
        backward=families[False][1],
        forward_sym=families[True][0],
        backward_sym=families[True][1],
    )


# ---------------------------------------------------------------------------
# Generic barbed pair refinement


def _pair_refine(
    states1: Iterable,
    states2: Iterable,
    moves1: dict,
    moves2: dict,
    obs1: dict,
    obs2: dict,
    start: tuple,
    render1: Callable,
    render2: Callable,
) -> Verdict:
    """Greatest symmetric relation matching observations and, per move
    kind, simulating moves in both directions."""
    removed: dict = {}
    live = set()
    for s in states1:
        for t in states2:
            if obs1[s] == obs2[t]:
                live.add((s, t))
            else:
                removed[(s, t)] = (0, ("barb", None, None, []))
    rounds = 0
    while True:
        rounds += 1
        stale = []
        for s, t in live:
            reason = None
            for kind in moves1[s]:
                for s2 in moves1[s][kind]:
                    answers = [(s2, t2) for t2 in moves2[t][kind]]
                    if not any(p in live for p in answers):
                        reason = (1, kind, s2, answers)
                        break
                if reason:
                    break
                for t2 in moves2[t][kind]:
                    answers = [(s2, t2) for s2 in moves1[s][kind]]
                    if not any(p in live for p in answers):
                        reason = (2, kind, t2, answers)
                        break
                if reason:
                    break
            if reason:
                stale.append(((s, t), reason))
        if not stale:
            break
        for pair, reason in stale:
            live.discard(pair)
            removed[pair] = (rounds, reason)
    if start in live:
        witness = sorted(
            (render1(s), render2(t)) for s, t in live
        )
        return Verdict("equivalent", witness=witness)
    path = []
    pair = start
    while True:
        _, (side, kind, successor, answers) = removed[pair]
        if side == "barb" or kind is None:
            s, t = pair
            path.append(
                {
                    "barbs_left": sorted(map(str, obs1[s])),
                    "barbs_right": sorted(map(str, obs2[t])),
                }
            )
            break
        step = {
            "side": side,
            "move": kind,
            "to": render1(successor) if side == 1 else render2(successor),
        }
        answered = [(removed[p][0], p) for p in answers if p in removed]
        if not answered:
            step["answer"] = None
            path.append(step)
            break
        _, best = min(answered, key=lambda item: item[0])
        step["answer"] = render2(best[1]) if side == 1 else render1(best[0])
        path.append(step)
        pair = best
    return Verdict("distinguished", evidence={"play": path})


def _closure(starts: Iterable, successors: Callable) -> set:
    seen = set()
    stack = list(starts)
    while stack:
        state = stack.pop()
        if state in seen:
            continue
        seen.add(state)
        stack.extend(successors(state))
    return seen


# ---------------------------------------------------------------------------
# Barbed bisimulations


def ccs_barbed_bisim(p: Term, q: Term) -> Verdict:
    """Reduction-closed, barb-preserving bisimulation on CCS terms."""
    p0 = canonical_term(p)
    q0 = canonical_term(q)

    def tau_succs(t: Term) -> frozenset:
        return frozenset(
            canonical_term(d) for label, d in ccs_step(t) if label.is_tau
        )

    states1 = _closure([p0], tau_succs)
    states2 = _closure([q0], tau_succs)
    moves1 = {s: {"tau": tau_succs(s)} for s in states1}
    moves2 = {s: {"tau": tau_succs(s)} for s in states2}
    obs1 = {s: barbs(s) for s in states1}
    obs2 = {s: barbs(s) for s in states2}
    return _pair_refine(
        states1, states2, moves1, moves2, obs1, obs2, (p0, q0),
        format_term, format_term,
    )


def rccs_bfb_bisim(r: Process, s: Process) -> Verdict:
    """Back-and-forth barbed bisimulation on reversible processes."""
    r0 = normal_form(r)
    s0 = normal_form(s)

    def tau_fwd(state: Process) -> frozenset:
        return frozenset(
            normal_form(t) for _, label, t in fwd_steps(state) if label.is_tau
        )

    def tau_bwd(state: Process) -> frozenset:
        return frozenset(
            normal_form(t) for _, label, t in bwd_steps(state) if label.is_tau
        )

    def both(state: Process):
        return tau_fwd(state) | tau_bwd(state)

    states1 = _closure([r0], both)
    states2 = _closure([s0], both)
    moves1 = {st: {"tau+": tau_fwd(st), "tau-": tau_bwd(st)} for st in states1}
    moves2 = {st: {"tau+": tau_fwd(st), "tau-": tau_bwd(st)} for st in states2}
    obs1 = {st: rccs_barbs(st) for st in states1}
    obs2 = {st: rccs_barbs(st) for st in states2}
    return _pair_refine(
        states1, states2, moves1, moves2, obs1, obs2, (r0, s0),
        format_process, format_process,
    )


def cs_bfb_barbed_bisim(a: ConfStruct, b: ConfStruct) -> Verdict:
    """Back-and-forth barbed bisimulation on configurations."""

    def renderer(struct: ConfStruct):
        names = event_names(struct)
        return lambda x: "{" + ",".join(sorted(names[e] for e in x)) + "}"

    def tau_fwd(struct: ConfStruct):
        return lambda x: frozenset(
            y
            for e, y in config_steps(struct, x)
            if isinstance(struct.labels[e], Label) and struct.labels[e].is_tau
        )

    def tau_bwd(struct: ConfStruct):
        return lambda x: frozenset(
            y
            for e, y in config_backsteps(struct, x)
            if isinstance(struct.labels[e], Label) and struct.labels[e].is_tau
        )

    fwd1, bwd1 = tau_fwd(a), tau_bwd(a)
    fwd2, bwd2 = tau_fwd(b), tau_bwd(b)
    moves1 = {x: {"tau+": fwd1(x), "tau-": bwd1(x)} for x in a.configs}
    moves2 = {x: {"tau+": fwd2(x), "tau-": bwd2(x)} for x in b.configs}
    obs1 = {x: barbs_at(a, x) for x in a.configs}
    obs2 = {x: barbs_at(b, x) for x in b.configs}
    return _pair_refine(
        a.configs, b.configs, moves1, moves2, obs1, obs2,
        (_EMPTY, _EMPTY), renderer(a), renderer(b),
    )


# ---------------------------------------------------------------------------
# Discriminating contexts and bounded congruence


def discriminating_context(
    x: frozenset, labels: dict, avoid: Iterable
) -> CcsContext:
    """A parallel guard per event: the label's complement summed with a
    fresh observer name."""
    order = sorted(x, key=lambda e: (_lkey(labels[e]), _ekey(e)))
    for event in order:
        label = labels[event]
        if not isinstance(label, Label) or label.is_tau:
            raise TauEventInConfig(f"event {event!r} carries {label!r}")
    stream = fresh_names(frozenset(avoid), "c")
    fresh = {event: name for event, name in zip(order, stream)}
    context: CcsContext = HOLE
    for event in reversed(order):
        guard = Sum(
            ((complement(labels[event]), NIL), (inp(fresh[event]), NIL))
        )
        context = CPar(guard, context)
    return context


def bounded_congruence(
    r: Process, s: Process, contexts: list[CcsContext]
) -> Verdict:
    """Back-and-forth barbed equivalence under each supplied context.

    A positive verdict is explicitly bounded: only the given contexts
    are checked.
    """
    orig_r = origin(r)
    orig_s = origin(s)
    checked = []
    for context in contexts:
        rr = instantiate_context(context, orig_r)
        ss = instantiate_context(context, orig_s)
        verdict = rccs_bfb_bisim(rr, ss)
        if verdict.outcome == "distinguished":
            return Verdict(
                "distinguished",
                evidence={
                    "context": format_context(context),
                    "inner": verdict.evidence,
                },
            )
        checked.append(format_context(context))
    return Verdict("bounded-equivalent", witness={"contexts": checked})


def _enumerated_parallel_contexts(names: Iterable[str], depth: int) -> list:
    components = []
    for name in sorted(names):
        components.append(prefix_term(inp(name)))
        components.append(prefix_term(out(name)))
    contexts = []

    def build(context: CcsContext, remaining: int):
        if remaining == 0:
            return
        for component in components:
            extended = CPar(component, context)
            contexts.append(extended)
            build(extended, remaining - 1)

    build(HOLE, depth)
    return contexts


@dataclass
class MainTheoremReport:
    hhpb: Verdict
    congruence: Verdict
    agree: bool
    context_count: int
    singly_labelled: bool = True

    def to_jsonable(self) -> dict:
        return {
            "hhpb": self.hhpb.to_jsonable(),
            "congruence": self.congruence.to_jsonable(),
            "agree": self.agree,
            "contexts": self.context_count,
            "singly_labelled": self.singly_labelled,
        }


def main_theorem_check(p: Term, q: Term, depth_bound: int = 2) -> MainTheoremReport:
    """Cross-check: the structures are hereditarily history preserving
    bisimilar exactly when no checked context separates the processes.

    The correspondence is only guaranteed for singly labelled terms; the
    report records whether that precondition held.
    """
    singly = is_singly_labelled(p) and is_singly_labelled(q)
    cp = encode_ccs(p)
    cq = encode_ccs(q)
    verdict = hhpb(cp, cq)
    avoid = all_names(p) | all_names(q)
    contexts: list[CcsContext] = [HOLE]
    seen = {format_context(HOLE)}
    for struct in (cp, cq):
        for x in struct.sorted_configs():
            if not x:
                continue
            if any(
                not isinstance(struct.labels[e], Label) or struct.labels[e].is_tau
                for e in x
            ):
                continue
            context = discriminating_context(x, struct.labels, avoid)
            key = format_context(context)
            if key not in seen:
                seen.add(key)
                contexts.append(context)
    for context in _enumerated_parallel_contexts(avoid, depth_bound):
        key = format_context(context)
        if key not in seen:
            seen.add(key)
            contexts.append(context)
    congruence = bounded_congruence(
        Thread((), p), Thread((), q), contexts
    )
    agree = (verdict.outcome == "equivalent") == (
        congruence.outcome != "distinguished"
    )
    return MainTheoremReport(
        hhpb=verdict,
        congruence=congruence,
        agree=agree,
        context_count=len(contexts),
        singly_labelled=singly,
    )
