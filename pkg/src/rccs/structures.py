"""Labelled configuration structures and their operations.

A structure is a finite event set, a total labelling, and a family of
finite configurations containing the empty set. Events carry
construction-tree identities: plain strings for external input, prefix
leaves, tagged coproduct injections and star-pairs for products, so
results are reproducible and projections readable off the identity.

Product events may carry pair labels and relabelling may produce the
internal zero label; both only exist transiently inside ``parallel``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .terms import Label, TAU, complement, parse_label


class EventCapExceeded(ValueError):
    """Structure exceeds the event cap (RCCS_EVENT_CAP, default 16)."""


class _Star:
    __slots__ = ()

    def __repr__(self) -> str:
        return "*"


STAR = _Star()


class _Zero:
    __slots__ = ()

    def __repr__(self) -> str:
        return "0"


ZERO = _Zero()


def _event_cap() -> int:
    raw = os.environ.get("RCCS_EVENT_CAP", "16")
    try:
        return int(raw)
    except ValueError:
        return 16


def _ekey(value) -> tuple:
    """Total order on heterogeneous event identities."""
    if value is STAR:
        return ("*",)
    if isinstance(value, tuple):
        return ("t", tuple(_ekey(item) for item in value))
    if isinstance(value, int):
        return ("i", value)
    return ("s", str(value))


def _lkey(label) -> tuple:
    if label is ZERO:
        return ("0",)
    if isinstance(label, tuple):
        return ("p", _lkey(label[0]), _lkey(label[1]))
    return ("l", label.kind, label.name or "")


class ConfStruct:
    """Immutable labelled configuration structure."""

    __slots__ = ("events", "configs", "labels", "_key")

    def __init__(
        self,
        events: Iterable,
        configs: Iterable[Iterable],
        labels: Mapping,
    ):
        self.events = frozenset(events)
        cap = _event_cap()
        if len(self.events) > cap:
            raise EventCapExceeded(
                f"{len(self.events)} events exceed the cap of {cap}"
            )
        self.configs = frozenset(frozenset(x) for x in configs)
        self.labels = dict(labels)
        if frozenset() not in self.configs:
            raise ValueError("the empty configuration is required")
        for x in self.configs:
            if not x <= self.events:
                raise ValueError(f"configuration {set(x)} uses unknown events")
        if set(self.labels) != set(self.events):
            raise ValueError("labelling must be total on the events")
        self._key = (
            self.events,
            self.configs,
            frozenset(self.labels.items()),
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfStruct) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"ConfStruct({len(self.events)} events, {len(self.configs)} configs)"

    def label_of(self, event):
        return self.labels[event]

    def sorted_events(self) -> list:
        return sorted(self.events, key=_ekey)

    def sorted_configs(self) -> list[frozenset]:
        return sorted(self.configs, key=lambda x: (len(x), sorted(map(_ekey, x))))


EMPTY_STRUCT = ConfStruct((), ((),), {})


# ---------------------------------------------------------------------------
# Axioms


@dataclass(frozen=True)
class AxiomReport:
    finiteness: tuple | None
    coincidence_freeness: tuple | None
    finite_completeness: tuple | None
    stability: tuple | None

    @property
    def ok(self) -> bool:
        return (
            self.finiteness is None
            and self.coincidence_freeness is None
            and self.finite_completeness is None
            and self.stability is None
        )

    def failures(self) -> dict:
        out = {}
        for name in (
            "finiteness",
            "coincidence_freeness",
            "finite_completeness",
            "stability",
        ):
            witness = getattr(self, name)
            if witness is not None:
                out[name] = witness
        return out


def _bounded(c: ConfStruct, x: frozenset, y: frozenset) -> bool:
    union = x | y
    return any(union <= z for z in c.configs)


def _check_coincidence(c: ConfStruct) -> tuple | None:
    for x in c.sorted_configs():
        members = sorted(x, key=_ekey)
        for i, e1 in enumerate(members):
            for e2 in members[i + 1 :]:
                if not any(
                    z <= x and ((e1 in z) != (e2 in z)) for z in c.configs
                ):
                    return (x, e1, e2)
    return None


def _check_finite_completeness(c: ConfStruct) -> tuple | None:
    """Pairwise-compatible families must have their union in the family."""
    configs = c.sorted_configs()
    n = len(configs)
    compatible = [
        [_bounded(c, configs[i], configs[j]) for j in range(n)] for i in range(n)
    ]
    witness: list[tuple] = []

    def extend(chosen: list[int], union: frozenset, start: int) -> bool:
        if len(chosen) >= 2 and union not in c.configs:
            witness.append(tuple(configs[i] for i in chosen))
            return False
        for j in range(start, n):
            if all(compatible[i][j] for i in chosen):
                if not extend(chosen + [j], union | configs[j], j + 1):
                    return False
        return True

    if not extend([], frozenset(), 0):
        return witness[0]
    return None


def _check_stability(c: ConfStruct) -> tuple | None:
    configs = c.sorted_configs()
    for i, x in enumerate(configs):
        for y in configs[i + 1 :]:
            if _bounded(c, x, y) and (x & y) not in c.configs:
                return (x, y)
    return None


def validate_axioms(c: ConfStruct) -> AxiomReport:
    return AxiomReport(
        finiteness=None,  # the representation is finite by construction
        coincidence_freeness=_check_coincidence(c),
        finite_completeness=_check_finite_completeness(c),
        stability=_check_stability(c),
    )


# ---------------------------------------------------------------------------
# Operations


def _pair(left, right):
    return ("pair", left, right)


def product(a: ConfStruct, b: ConfStruct) -> tuple[ConfStruct, dict, dict]:
    """Categorical product; returns the structure and both projections."""
    candidates = (
        [_pair(e1, STAR) for e1 in a.sorted_events()]
        + [_pair(STAR, e2) for e2 in b.sorted_events()]
        + [
            _pair(e1, e2)
            for e1 in a.sorted_events()
            for e2 in b.sorted_events()
        ]
    )
    labels = {}
    for event in candidates:
        _, left, right = event
        if right is STAR:
            labels[event] = a.labels[left]
        elif left is STAR:
            labels[event] = b.labels[right]
        else:
            labels[event] = (a.labels[left], b.labels[right])

    def proj1(x: Iterable) -> frozenset:
        return frozenset(e[1] for e in x if e[1] is not STAR)

    def proj2(x: Iterable) -> frozenset:
        return frozenset(e[2] for e in x if e[2] is not STAR)

    def proj_valid(z: frozenset) -> bool:
        return proj1(z) in a.configs and proj2(z) in b.configs

    def coincidence_ok(x: tuple) -> bool:
        xset = frozenset(x)
        subsets = [frozenset()]
        for event in x:
            subsets += [s | {event} for s in subsets]
        valid = [s for s in subsets if proj_valid(s)]
        for i, e1 in enumerate(x):
            for e2 in x[i + 1 :]:
                if not any(
                    s <= xset and ((e1 in s) != (e2 in s)) for s in valid
                ):
                    return False
        return True

    configs: list[frozenset] = []

    def search(start: int, chosen: tuple, used1: frozenset, used2: frozenset):
        if proj_valid(frozenset(chosen)) and coincidence_ok(chosen):
            configs.append(frozenset(chosen))
        for k in range(start, len(candidates)):
            event = candidates[k]
            _, left, right = event
            if left is not STAR and left in used1:
                continue
            if right is not STAR and right in used2:
                continue
            search(
                k + 1,
                chosen + (event,),
                used1 | ({left} if left is not STAR else frozenset()),
                used2 | ({right} if right is not STAR else frozenset()),
            )

    search(0, (), frozenset(), frozenset())
    struct = ConfStruct(candidates, configs, labels)
    p1 = {e: e[1] for e in candidates}
    p2 = {e: e[2] for e in candidates}
    return struct, p1, p2


def coproduct(a: ConfStruct, b: ConfStruct) -> ConfStruct:
    events = [("L", e) for e in a.sorted_events()] + [
        ("R", e) for e in b.sorted_events()
    ]
    labels = {("L", e): a.labels[e] for e in a.events}
    labels.update({("R", e): b.labels[e] for e in b.events})
    configs = {frozenset(("L", e) for e in x) for x in a.configs} | {
        frozenset(("R", e) for e in x) for x in b.configs
    }
    return ConfStruct(events, configs, labels)


def restrict_events(a: ConfStruct, keep: Iterable) -> ConfStruct:
    keep = frozenset(keep)
    if not keep <= a.events:
        raise ValueError("keep must be a subset of the events")
    return ConfStruct(
        keep,
        (x for x in a.configs if x <= keep),
        {e: a.labels[e] for e in keep},
    )


def restrict_name(a: ConfStruct, name: str) -> ConfStruct:
    keep = [
        e
        for e in a.events
        if not (isinstance(a.labels[e], Label) and a.labels[e].name == name)
    ]
    return restrict_events(a, keep)


def prefix(label: Label, a: ConfStruct) -> ConfStruct:
    k = 0
    while ("p", k) in a.events:
        k += 1
    event = ("p", k)
    labels = dict(a.labels)
    labels[event] = label
    configs = [frozenset()] + [x | {event} for x in a.configs]
    return ConfStruct(a.events | {event}, configs, labels)


def relabel(a: ConfStruct, mapping) -> ConfStruct:
    if callable(mapping):
        labels = {e: mapping(e) for e in a.events}
    else:
        labels = {e: mapping[e] for e in a.events}
    return ConfStruct(a.events, a.configs, labels)


def parallel(a: ConfStruct, b: ConfStruct) -> ConfStruct:
    """Product, then synchronisation relabelling, then zero removal."""
    prod, _, _ = product(a, b)

    def sync_label(event):
        label = prod.labels[event]
        if not isinstance(label, tuple):
            return label
        l1, l2 = label
        if (
            isinstance(l1, Label)
            and isinstance(l2, Label)
            and not l1.is_tau
            and not l2.is_tau
            and l2 == complement(l1)
        ):
            return TAU
        return ZERO

    relabelled = relabel(prod, sync_label)
    keep = [e for e in relabelled.events if relabelled.labels[e] is not ZERO]
    return restrict_events(relabelled, keep)


# ---------------------------------------------------------------------------
# Causality and the configuration LTS


def causes(c: ConfStruct, x: frozenset, e1, e2) -> bool:
    """e1 happens before e2 in x: every sub-configuration keeping e2 keeps e1."""
    if e1 not in x or e2 not in x or x not in c.configs:
        raise ValueError("causality is relative to a configuration")
    return all(e1 in z for z in c.configs if z <= x and e2 in z)


def _strictly_causes(c: ConfStruct, x: frozenset, e1, e2) -> bool:
    return e1 != e2 and causes(c, x, e1, e2)


def immediate_cause(c: ConfStruct, x: frozenset, e1, e2) -> bool:
    if not _strictly_causes(c, x, e1, e2):
        return False
    return not any(
        _strictly_causes(c, x, e1, mid) and _strictly_causes(c, x, mid, e2)
        for mid in x
        if mid not in (e1, e2)
    )


def remove_event(c: ConfStruct, event) -> ConfStruct:
    """The structure after executing one event: y is kept iff y + event was.

    Events left with no configuration (discarded alternatives) are
    dropped, so the residual is the structure of the remaining future.
    """
    if event not in c.events:
        raise ValueError("unknown event")
    configs = [x - {event} for x in c.configs if event in x]
    events = frozenset().union(*configs) if configs else frozenset()
    return ConfStruct(events, configs, {e: c.labels[e] for e in events})


def remove_config(c: ConfStruct, x: Iterable) -> ConfStruct:
    """Iterated event removal along an execution order of x."""
    x = frozenset(x)
    if x not in c.configs:
        raise ValueError("not a configuration")
    out = c
    remaining = set(x)
    while remaining:
        enabled = [
            e for e in sorted(remaining, key=_ekey) if frozenset((e,)) in out.configs
        ]
        if not enabled:
            raise ValueError(f"configuration {set(x)} has no execution order")
        out = remove_event(out, enabled[0])
        remaining.remove(enabled[0])
    return out


residual = remove_config


def config_steps(c: ConfStruct, x: frozenset) -> frozenset:
    if x not in c.configs:
        raise ValueError("not a configuration")
    return frozenset(
        (e, x | {e}) for e in c.events - x if (x | {e}) in c.configs
    )


def config_backsteps(c: ConfStruct, x: frozenset) -> frozenset:
    if x not in c.configs:
        raise ValueError("not a configuration")
    return frozenset((e, x - {e}) for e in x if (x - {e}) in c.configs)


def barbs_at(c: ConfStruct, x: frozenset) -> frozenset:
    return frozenset(
        c.labels[e]
        for e, _ in config_steps(c, x)
        if isinstance(c.labels[e], Label) and not c.labels[e].is_tau
    )


def is_maximal(c: ConfStruct, x: frozenset) -> bool:
    return not any(x < y for y in c.configs)


def top_configs(c: ConfStruct) -> frozenset:
    maximal = [x for x in c.configs if is_maximal(c, x)]
    depth = max(len(x) for x in maximal)
    return frozenset(x for x in maximal if len(x) == depth)


# ---------------------------------------------------------------------------
# Isomorphism


def _signature(c: ConfStruct, event) -> tuple:
    sizes = sorted(len(x) for x in c.configs if event in x)
    return (_lkey(c.labels[event]), tuple(sizes))


def iso(a: ConfStruct, b: ConfStruct) -> dict | None:
    """A label-preserving event bijection mapping configs onto configs."""
    if len(a.events) != len(b.events) or len(a.configs) != len(b.configs):
        return None
    if sorted(len(x) for x in a.configs) != sorted(len(x) for x in b.configs):
        return None
    sig_a: dict = {}
    for e in a.events:
        sig_a.setdefault(_signature(a, e), []).append(e)
    sig_b: dict = {}
    for e in b.events:
        sig_b.setdefault(_signature(b, e), []).append(e)
    if set(sig_a) != set(sig_b):
        return None
    if any(len(sig_a[s]) != len(sig_b[s]) for s in sig_a):
        return None

    order = sorted(a.events, key=lambda e: (len(sig_a[_signature(a, e)]), _ekey(e)))

    def compatible(mapping: dict) -> bool:
        domain = set(mapping)
        image = {
            frozenset(mapping[e] for e in x)
            for x in a.configs
            if x <= domain
        }
        return all(y in b.configs for y in image)

    def extend(index: int, mapping: dict, used: set):
        if index == len(order):
            image = {frozenset(mapping[e] for e in x) for x in a.configs}
            return dict(mapping) if image == b.configs else None
        e = order[index]
        for candidate in sorted(sig_b[_signature(a, e)], key=_ekey):
            if candidate in used:
                continue
            mapping[e] = candidate
            if compatible(mapping):
                found = extend(index + 1, mapping, used | {candidate})
                if found is not None:
                    return found
            del mapping[e]
        return None

    return extend(0, {}, set())


# ---------------------------------------------------------------------------
# Serialisation


def _event_id_str(event) -> str:
    if event is STAR:
        return "*"
    if isinstance(event, tuple):
        if event[0] == "p" and len(event) == 2:
            return f"p{event[1]}"
        if event[0] in ("L", "R") and len(event) == 2:
            return f"{event[0]}.{_event_id_str(event[1])}"
        if event[0] == "pair" and len(event) == 3:
            return f"({_event_id_str(event[1])},{_event_id_str(event[2])})"
    return str(event)


def _label_str(label) -> str:
    if not isinstance(label, Label):
        raise ValueError(f"label {label!r} is internal and not serialisable")
    return str(label)


def to_json(c: ConfStruct, extra: dict | None = None) -> str:
    names = {e: _event_id_str(e) for e in c.events}
    if len(set(names.values())) != len(names):
        names = {e: f"e{i}" for i, e in enumerate(c.sorted_events())}
    payload = {
        "events": [
            {"id": names[e], "label": _label_str(c.labels[e])}
            for e in sorted(c.events, key=lambda e: names[e])
        ],
        "configs": sorted(
            (sorted(names[e] for e in x) for x in c.configs),
            key=lambda ids: (len(ids), ids),
        ),
    }
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2)


def event_names(c: ConfStruct) -> dict:
    """The event-id rendering used by to_json, as a mapping."""
    names = {e: _event_id_str(e) for e in c.events}
    if len(set(names.values())) != len(names):
        names = {e: f"e{i}" for i, e in enumerate(c.sorted_events())}
    return names


def from_json(text: str) -> ConfStruct:
    payload = json.loads(text)
    if not isinstance(payload, dict):
        raise ValueError("expected a JSON object")
    events = []
    labels = {}
    for entry in payload.get("events", []):
        ident = entry["id"]
        events.append(ident)
        labels[ident] = parse_label(entry["label"])
    configs = [frozenset(x) for x in payload.get("configs", [])]
    return ConfStruct(events, configs, labels)


def to_dot(c: ConfStruct) -> str:
    names = event_names(c)

    def node_id(x: frozenset) -> str:
        return '"' + ("{" + ",".join(sorted(names[e] for e in x)) + "}") + '"'

    def node_label(x: frozenset) -> str:
        return "{" + ",".join(sorted(_label_str(c.labels[e]) for e in x)) + "}"

    lines = ["digraph configurations {"]
    for x in c.sorted_configs():
        lines.append(f'  {node_id(x)} [label="{node_label(x)}"];')
    for x in c.sorted_configs():
        for e, y in sorted(
            config_steps(c, x), key=lambda step: _ekey(step[0])
        ):
            lines.append(
                f'  {node_id(x)} -> {node_id(y)} [label="{_label_str(c.labels[e])}"];'
            )
    lines.append("}")
    return "\n".join(lines)
