"""Reversible CCS: monitored processes, the forward/backward LTS, congruence.

A process is a tree of threads (memory + CCS code), parallel nodes and
restriction nodes. Memories are stacks (index 0 = top) of events
``<id, label, alternative>`` and fork markers recording parallel splits.

State handling works on an execution form in which memories are fully
distributed over parallel code, thread-level restrictions are hoisted to
process level under fresh bound names, and all terms are locally
canonical. Backward steps work on a refolded view that undoes the
distribution so that fork markers and synchronisations are undone
jointly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .terms import (
    NIL,
    Label,
    Nil,
    Par,
    Res,
    Sum,
    TAU,
    Term,
    CcsContext,
    CPar,
    Hole,
    ParseError,
    all_names,
    canonical_term,
    complement,
    format_term,
    free_names,
    fresh_names,
    parse_label,
    rename_free,
)
from . import terms as _terms


class NotCoherent(ValueError):
    """The process cannot be rolled back to an empty-memory origin."""


class ReplayError(ValueError):
    def __init__(self, message: str, index: int):
        super().__init__(f"{message} at step {index}")
        self.index = index


class UnsupportedContext(ValueError):
    """Only hole and nested parallel contexts can monitor a process."""


# ---------------------------------------------------------------------------
# Memories and processes


@dataclass(frozen=True)
class Fork:
    __slots__ = ()


FORK = Fork()


@dataclass(frozen=True)
class MemEvent:
    ident: int
    label: Label
    alternative: Term = NIL

    def __post_init__(self) -> None:
        if self.ident < 1:
            raise ValueError("event identifiers are positive")
        if self.label.is_tau:
            raise ValueError("a single memory entry never carries tau")


Memory = tuple  # of MemEvent | Fork, top first


class Process:
    __slots__ = ()


@dataclass(frozen=True)
class Thread(Process):
    memory: Memory
    code: Term


@dataclass(frozen=True)
class ParP(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class ResP(Process):
    body: Process
    name: str


EMPTY: Memory = ()


def monitored(term: Term) -> Thread:
    """The empty-memory process for a CCS term."""
    return Thread(EMPTY, term)


@dataclass(frozen=True)
class TransitionRecord:
    direction: str  # "+" forward, "-" backward
    ident: int
    label: Label

    def __post_init__(self) -> None:
        if self.direction not in ("+", "-"):
            raise ValueError("direction is '+' or '-'")


def fwd_rec(ident: int, label: Label) -> TransitionRecord:
    return TransitionRecord("+", ident, label)


def bwd_rec(ident: int, label: Label) -> TransitionRecord:
    return TransitionRecord("-", ident, label)


# ---------------------------------------------------------------------------
# Basic queries


def ids(process: Process) -> frozenset[int]:
    if isinstance(process, Thread):
        return frozenset(
            item.ident for item in process.memory if isinstance(item, MemEvent)
        )
    if isinstance(process, ParP):
        return ids(process.left) | ids(process.right)
    if isinstance(process, ResP):
        return ids(process.body)
    raise TypeError(f"not a process: {process!r}")


def erase(process: Process) -> Term:
    """Forget the memories, keeping the term structure."""
    if isinstance(process, Thread):
        return process.code
    if isinstance(process, ParP):
        return Par(erase(process.left), erase(process.right))
    if isinstance(process, ResP):
        return Res(erase(process.body), process.name)
    raise TypeError(f"not a process: {process!r}")


def _memory_names(memory: Memory) -> frozenset[str]:
    acc: set[str] = set()
    for item in memory:
        if isinstance(item, MemEvent):
            acc.add(item.label.name)
            acc.update(free_names(item.alternative))
    return frozenset(acc)


def proc_free_names(process: Process) -> frozenset[str]:
    if isinstance(process, Thread):
        return free_names(process.code) | _memory_names(process.memory)
    if isinstance(process, ParP):
        return proc_free_names(process.left) | proc_free_names(process.right)
    if isinstance(process, ResP):
        return proc_free_names(process.body) - {process.name}
    raise TypeError(f"not a process: {process!r}")


def _proc_all_names(process: Process) -> frozenset[str]:
    if isinstance(process, Thread):
        acc = set(all_names(process.code)) | _memory_names(process.memory)
        for item in process.memory:
            if isinstance(item, MemEvent):
                acc.update(all_names(item.alternative))
        return frozenset(acc)
    if isinstance(process, ParP):
        return _proc_all_names(process.left) | _proc_all_names(process.right)
    if isinstance(process, ResP):
        return _proc_all_names(process.body) | {process.name}
    raise TypeError(f"not a process: {process!r}")


# ---------------------------------------------------------------------------
# Execution form: distributed memories, hoisted restrictions


def _canon_memory(memory: Memory) -> Memory:
    out = []
    for item in memory:
        if isinstance(item, MemEvent):
            out.append(
                MemEvent(item.ident, item.label, canonical_term(item.alternative))
            )
        else:
            out.append(FORK)
    return tuple(out)


@lru_cache(maxsize=None)
def exec_form(process: Process) -> Process:
    names = fresh_names(_proc_all_names(process), "rn")
    return _expand(process, names)


def _expand(process: Process, names) -> Process:
    if isinstance(process, Thread):
        return _expand_thread(
            _canon_memory(process.memory), canonical_term(process.code), names
        )
    if isinstance(process, ParP):
        return ParP(_expand(process.left, names), _expand(process.right, names))
    if isinstance(process, ResP):
        return ResP(_expand(process.body, names), process.name)
    raise TypeError(f"not a process: {process!r}")


def _expand_thread(memory: Memory, code: Term, names) -> Process:
    if isinstance(code, Res):
        fresh = next(names)
        body = rename_free(code.body, code.name, fresh)
        return ResP(_expand_thread(memory, body, names), fresh)
    if isinstance(code, Par):
        forked = (FORK,) + memory
        return ParP(
            _expand_thread(forked, code.left, names),
            _expand_thread(forked, code.right, names),
        )
    return Thread(memory, canonical_term(code))


# ---------------------------------------------------------------------------
# Normal form and congruence


@lru_cache(maxsize=None)
def normal_form(process: Process) -> Process:
    """Canonical representative modulo structural congruence.

    Memories distributed, restrictions hoisted, sums sorted, bound names
    renamed canonically, identifiers renumbered by first occurrence.
    """
    form = exec_form(process)
    form = _rename_binders(form, {}, fresh_names(proc_free_names(form), "pn"))
    mapping: dict[int, int] = {}
    _collect_ids(form, mapping)
    return _apply_id_map(form, mapping)


def _rename_binders(process: Process, subst: dict[str, str], names) -> Process:
    if isinstance(process, Thread):
        code = process.code
        memory = process.memory
        for old, new in subst.items():
            code = rename_free(code, old, new)
        memory = _rename_memory(memory, subst)
        return Thread(memory, code)
    if isinstance(process, ParP):
        return ParP(
            _rename_binders(process.left, subst, names),
            _rename_binders(process.right, subst, names),
        )
    if isinstance(process, ResP):
        fresh = next(names)
        inner = dict(subst)
        inner[process.name] = fresh
        return ResP(_rename_binders(process.body, inner, names), fresh)
    raise TypeError(f"not a process: {process!r}")


def _rename_memory(memory: Memory, subst: dict[str, str]) -> Memory:
    out = []
    for item in memory:
        if isinstance(item, MemEvent):
            label = item.label
            if label.name in subst:
                label = Label(label.kind, subst[label.name])
            alt = item.alternative
            for old, new in subst.items():
                alt = rename_free(alt, old, new)
            out.append(MemEvent(item.ident, label, alt))
        else:
            out.append(FORK)
    return tuple(out)


def _collect_ids(process: Process, mapping: dict[int, int]) -> None:
    if isinstance(process, Thread):
        for item in process.memory:
            if isinstance(item, MemEvent) and item.ident not in mapping:
                mapping[item.ident] = len(mapping) + 1
    elif isinstance(process, ParP):
        _collect_ids(process.left, mapping)
        _collect_ids(process.right, mapping)
    elif isinstance(process, ResP):
        _collect_ids(process.body, mapping)


def _apply_id_map(process: Process, mapping: dict[int, int]) -> Process:
    if isinstance(process, Thread):
        memory = tuple(
            MemEvent(mapping[item.ident], item.label, item.alternative)
            if isinstance(item, MemEvent)
            else FORK
            for item in process.memory
        )
        return Thread(memory, process.code)
    if isinstance(process, ParP):
        return ParP(
            _apply_id_map(process.left, mapping), _apply_id_map(process.right, mapping)
        )
    if isinstance(process, ResP):
        return ResP(_apply_id_map(process.body, mapping), process.name)
    raise TypeError(f"not a process: {process!r}")


def congruent(r: Process, s: Process) -> bool:
    return normal_form(r) == normal_form(s)


def substitute_id(process: Process, old: int, new: int) -> Process:
    mapping: dict[int, int] = {old: new}
    full = {i: mapping.get(i, i) for i in ids(process)}
    full[old] = new
    return _apply_id_map(process, full)


# ---------------------------------------------------------------------------
# Forward steps


@lru_cache(maxsize=None)
def fwd_steps(process: Process) -> frozenset[tuple[int, Label, Process]]:
    """All forward transitions, offering the least unused identifier."""
    form = exec_form(process)
    used = ids(form)
    fresh = 1
    while fresh in used:
        fresh += 1
    return frozenset(
        (fresh, label, exec_form(build(fresh))) for label, build in _fwd_items(form)
    )


def _fwd_items(process: Process) -> list:
    if isinstance(process, Thread):
        if isinstance(process.code, Nil):
            return []
        if not isinstance(process.code, Sum):
            raise TypeError(f"unexpanded thread code: {process.code!r}")
        items = []
        branches = process.code.branches
        for k, (label, cont) in enumerate(branches):
            rest = branches[:k] + branches[k + 1 :]
            alternative = Sum(rest) if rest else NIL
            items.append(
                (
                    label,
                    lambda i, m=process.memory, l=label, a=alternative, c=cont: Thread(
                        (MemEvent(i, l, a),) + m, c
                    ),
                )
            )
        return items
    if isinstance(process, ParP):
        left_items = _fwd_items(process.left)
        right_items = _fwd_items(process.right)
        items = [
            (label, lambda i, b=build, r=process.right: ParP(b(i), r))
            for label, build in left_items
        ]
        items += [
            (label, lambda i, b=build, l=process.left: ParP(l, b(i)))
            for label, build in right_items
        ]
        for llabel, lbuild in left_items:
            if llabel.is_tau:
                continue
            dual = complement(llabel)
            for rlabel, rbuild in right_items:
                if rlabel == dual:
                    items.append(
                        (TAU, lambda i, lb=lbuild, rb=rbuild: ParP(lb(i), rb(i)))
                    )
        return items
    if isinstance(process, ResP):
        return [
            (label, lambda i, b=build, n=process.name: ResP(b(i), n))
            for label, build in _fwd_items(process.body)
            if label.is_tau or label.name != process.name
        ]
    raise TypeError(f"not a process: {process!r}")


def rccs_barbs(process: Process) -> frozenset[Label]:
    return frozenset(
        label for _, label, _ in fwd_steps(process) if not label.is_tau
    )


# ---------------------------------------------------------------------------
# Backward steps


def _refold(process: Process) -> Process:
    """Undo memory distribution bottom-up so deep events become poppable.

    A hoisted restriction is pushed back into its thread's code only
    when the thread is a pending fork branch (memory top is a fork),
    since merging the branches is the one reason the restriction must
    cross the thread boundary again.
    """
    if isinstance(process, ParP):
        left = _refold(process.left)
        right = _refold(process.right)
        if (
            isinstance(left, Thread)
            and isinstance(right, Thread)
            and left.memory
            and right.memory
            and left.memory[0] is FORK
            and right.memory[0] is FORK
            and left.memory[1:] == right.memory[1:]
        ):
            return Thread(left.memory[1:], Par(left.code, right.code))
        return ParP(left, right)
    if isinstance(process, ResP):
        body = _refold(process.body)
        if (
            isinstance(body, Thread)
            and body.memory
            and body.memory[0] is FORK
            and process.name not in _memory_names(body.memory)
        ):
            return Thread(body.memory, Res(body.code, process.name))
        return ResP(body, process.name)
    return process


def _sum_restore(label: Label, code: Term, alternative: Term) -> Term | None:
    branch = (label, code)
    if isinstance(alternative, Nil):
        return Sum((branch,))
    if isinstance(alternative, Sum):
        return Sum((branch,) + alternative.branches)
    return None


@lru_cache(maxsize=None)
def bwd_steps(process: Process) -> frozenset[tuple[int, Label, Process]]:
    """All backward transitions; synchronisations are undone jointly."""
    form = _refold(exec_form(process))
    return frozenset(
        (ident, label, exec_form(target))
        for ident, label, target in _bwd_items(form)
    )


def _bwd_items(process: Process) -> list:
    if isinstance(process, Thread):
        if process.memory and isinstance(process.memory[0], MemEvent):
            event = process.memory[0]
            restored = _sum_restore(event.label, process.code, event.alternative)
            if restored is not None:
                return [
                    (event.ident, event.label, Thread(process.memory[1:], restored))
                ]
        return []
    if isinstance(process, ParP):
        left_items = _bwd_items(process.left)
        right_items = _bwd_items(process.right)
        left_ids = ids(process.left)
        right_ids = ids(process.right)
        items = [
            (i, label, ParP(target, process.right))
            for i, label, target in left_items
            if i not in right_ids
        ]
        items += [
            (i, label, ParP(process.left, target))
            for i, label, target in right_items
            if i not in left_ids
        ]
        for i, llabel, ltarget in left_items:
            if llabel.is_tau:
                continue
            dual = complement(llabel)
            for j, rlabel, rtarget in right_items:
                if i == j and rlabel == dual:
                    items.append((i, TAU, ParP(ltarget, rtarget)))
        return items
    if isinstance(process, ResP):
        return [
            (i, label, ResP(target, process.name))
            for i, label, target in _bwd_items(process.body)
            if label.is_tau or label.name != process.name
        ]
    raise TypeError(f"not a process: {process!r}")


# ---------------------------------------------------------------------------
# Origins and coherence


def _step_key(step: tuple[int, Label, Process]) -> tuple:
    ident, label, target = step
    return (ident, str(label), format_process(target))


def rollback(process: Process) -> tuple[Process, list[TransitionRecord]]:
    """Deterministic maximal backward reduction; returns the stuck process."""
    current = exec_form(process)
    records: list[TransitionRecord] = []
    while True:
        steps = bwd_steps(current)
        if not steps:
            return current, records
        ident, label, target = min(steps, key=_step_key)
        records.append(bwd_rec(ident, label))
        current = target


def origin(process: Process) -> Process:
    """The empty-memory ancestor, as a single thread; NotCoherent if stuck."""
    terminal, _ = rollback(process)
    candidate = Thread(EMPTY, canonical_term(erase(terminal)))
    if not congruent(terminal, candidate):
        raise NotCoherent(f"rollback stuck at {format_process(terminal)}")
    return candidate


def is_coherent(process: Process) -> bool:
    try:
        origin(process)
    except NotCoherent:
        return False
    return True


def all_rollback_terminals(process: Process) -> frozenset[Process]:
    """Normal forms of every maximal backward reduction (exhaustive)."""
    seen: set[Process] = set()
    terminals: set[Process] = set()
    stack = [exec_form(process)]
    while stack:
        current = stack.pop()
        key = normal_form(current)
        if key in seen:
            continue
        seen.add(key)
        steps = bwd_steps(current)
        if not steps:
            terminals.add(key)
        else:
            stack.extend(target for _, _, target in steps)
    return frozenset(terminals)


# ---------------------------------------------------------------------------
# Replay and parabolic traces


def replay(src: Process, trace: list[TransitionRecord]) -> Process:
    current = exec_form(src)
    for index, record in enumerate(trace):
        if record.direction == "+":
            if record.ident in ids(current):
                raise ReplayError(f"identifier {record.ident} already in use", index)
            steps = fwd_steps(current)
            matches = [
                (i, label, target)
                for i, label, target in steps
                if label == record.label
            ]
            if not matches:
                raise ReplayError("no matching forward transition", index)
            if len(matches) > 1:
                raise ReplayError("ambiguous forward transition", index)
            offered, _, target = matches[0]
            if offered != record.ident:
                target = substitute_id(target, offered, record.ident)
            current = target
        else:
            matches = [
                (i, label, target)
                for i, label, target in bwd_steps(current)
                if i == record.ident and label == record.label
            ]
            if not matches:
                raise ReplayError("no matching backward transition", index)
            if len(matches) > 1:
                raise ReplayError("ambiguous backward transition", index)
            current = matches[0][2]
    return current


def rearrange_parabolic(
    src: Process, trace: list[TransitionRecord]
) -> list[TransitionRecord]:
    """Rewrite a replayable trace into backward-then-forward shape.

    Adjacent forward/backward records on the same identifier cancel;
    backward records commute leftwards past independent forward records.
    The result replays from src to a target congruent to the original's.
    """
    goal = replay(src, trace)
    work = list(trace)
    changed = True
    while changed:
        changed = False
        k = 0
        while k + 1 < len(work):
            first, second = work[k], work[k + 1]
            if first.direction == "+" and second.direction == "-":
                if first.ident == second.ident:
                    if first.label != second.label:
                        raise ReplayError("mismatched cancellation pair", k)
                    del work[k : k + 2]
                else:
                    work[k], work[k + 1] = second, first
                changed = True
                k = max(k - 1, 0)
            else:
                k += 1
    result = replay(src, work)
    if not congruent(result, goal):
        raise ReplayError("rearranged trace reaches a different target", len(work))
    return work


# ---------------------------------------------------------------------------
# Contexts


def addfork(process: Process) -> Process:
    """Insert a fork marker at the base of every thread memory."""
    if isinstance(process, Thread):
        return Thread(process.memory + (FORK,), process.code)
    if isinstance(process, ParP):
        return ParP(addfork(process.left), addfork(process.right))
    if isinstance(process, ResP):
        return ResP(addfork(process.body), process.name)
    raise TypeError(f"not a process: {process!r}")


def instantiate_context(context: CcsContext, process: Process) -> Process:
    """Monitor a parallel context around an already-monitored process."""
    if isinstance(context, Hole):
        return process
    if isinstance(context, CPar):
        inner = instantiate_context(context.inner, process)
        return ParP(Thread((FORK,), context.term), addfork(inner))
    raise UnsupportedContext(
        "only hole and parallel contexts can be instantiated"
    )


# ---------------------------------------------------------------------------
# Concrete syntax

_PROC_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<name>[a-z][a-z0-9_]*)|(?P<num>[1-9][0-9]*)"
    r"|(?P<sym>\|>|\{\}|[!.+|()\\<>,*]|0)"
)


def _tokenize_process(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _PROC_TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _ProcessParser(_terms._TermParser):
    """Processes: ``punit ('|' punit)*`` where a unit is a possibly
    restricted thread ``memory |> code`` or a parenthesised process.

    Thread code is parsed at sum level; parenthesise parallel code.
    """

    def parse_process(self) -> Process:
        process = self.parse_punit()
        while self.peek()[1] == "|":
            self.next()
            process = ParP(process, self.parse_punit())
        return process

    def parse_punit(self) -> Process:
        kind, text, pos = self.peek()
        if text == "(":
            self.next()
            process = self.parse_process()
            self.expect(")")
        elif text in ("{}", "*", "<"):
            memory = self.parse_memory()
            self.expect("|>")
            process = Thread(memory, self.parse_code())
        else:
            raise ParseError("expected a process", pos)
        while self.peek()[1] == "\\":
            self.next()
            kind, text, pos = self.next()
            if kind != "name":
                raise ParseError("expected a name after '\\'", pos)
            process = ResP(process, text)
        return process

    def parse_memory(self) -> Memory:
        items = []
        while True:
            kind, text, pos = self.peek()
            if text == "{}":
                self.next()
                return tuple(items)
            if text == "*":
                self.next()
                items.append(FORK)
            elif text == "<":
                self.next()
                nkind, ntext, npos = self.next()
                if nkind != "num":
                    raise ParseError("expected an identifier", npos)
                self.expect(",")
                label = self.parse_action()
                if self.peek()[1] == ",":
                    self.next()
                    alternative = self.parse_par()
                else:
                    alternative = NIL
                self.expect(">")
                items.append(MemEvent(int(ntext), label, alternative))
            else:
                raise ParseError("expected a memory item", pos)
            self.expect(".")

    def parse_code(self) -> Term:
        kind, text, pos = self.peek()
        if text == "(":
            self.next()
            code = self.parse_par()
            self.expect(")")
            return code
        return self.parse_sum()


def parse_process(text: str) -> Process:
    parser = _ProcessParser(_tokenize_process(text))
    process = parser.parse_process()
    kind, _, pos = parser.peek()
    if kind != "eof":
        raise ParseError("trailing input", pos)
    return process


def format_memory(memory: Memory) -> str:
    parts = []
    for item in memory:
        if isinstance(item, MemEvent):
            if isinstance(item.alternative, Nil):
                parts.append(f"<{item.ident},{item.label}>")
            else:
                parts.append(
                    f"<{item.ident},{item.label},{format_term(item.alternative)}>"
                )
        else:
            parts.append("*")
    parts.append("{}")
    return ".".join(parts)


def format_process(process: Process) -> str:
    if isinstance(process, Thread):
        code = format_term(process.code)
        if isinstance(process.code, Par) or isinstance(process.code, Res):
            code = f"({code})"
        return f"{format_memory(process.memory)} |> {code}"
    if isinstance(process, ParP):
        left = format_process(process.left)
        right = format_process(process.right)
        if isinstance(process.left, ResP):
            left = f"({left})"
        if isinstance(process.right, (ParP, ResP)):
            right = f"({right})"
        return f"{left} | {right}"
    if isinstance(process, ResP):
        return f"({format_process(process.body)}) \\ {process.name}"
    raise TypeError(f"not a process: {process!r}")


def parse_trace(text: str) -> list[TransitionRecord]:
    """Line-oriented traces: ``+ i:label`` and ``- i:label``."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            direction, rest = line.split(None, 1)
            ident_text, label_text = rest.split(":", 1)
            records.append(
                TransitionRecord(
                    direction, int(ident_text.strip()), parse_label(label_text)
                )
            )
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad trace line {lineno}: {raw!r}", lineno) from exc
    return records


def format_trace(trace: list[TransitionRecord]) -> str:
    return "\n".join(f"{r.direction} {r.ident}:{r.label}" for r in trace)
