"""Labeled transition system substrate: action labels, transition tables,
traces, trace validation and the admissibility-preservation check.

Trace states are opaque hashable configurations. For plain scenario-level
traces they are ``StateId`` strings; for governed constructions they are
``ExtendedState`` / ``SplitState`` values. :func:`base_of` projects any of
them back to the scenario state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Any, FrozenSet, Hashable, Iterable, Iterator, Mapping, Optional, Tuple, Union

from .kernel import Disposition, ScenarioSpec, StateId


class Kind(IntEnum):
    # Value order is the enumeration order.
    AGENT = 0
    ENV = 1
    DEC = 2
    EXEC = 3


@dataclass(frozen=True)
class ActionLabel:
    """An arc label.

    ``disposition`` is set on governed arcs (the outcome of the atomic
    boundary, the recorded decision for dec/exec). ``origin`` is set on
    supervisor-resolution arcs and names the state the request was
    escalated from.
    """

    kind: Kind
    name: str
    disposition: Optional[Disposition] = None
    origin: Optional[StateId] = None

    @property
    def commits(self) -> bool:
        """Whether firing this arc applies the agent transition function."""
        if self.kind not in (Kind.AGENT, Kind.EXEC):
            return False
        return self.disposition in (None, Disposition.ALLOW)

    @property
    def is_resolution(self) -> bool:
        return self.origin is not None

    def sort_key(self) -> tuple:
        return (int(self.kind), self.name,
                self.disposition.value if self.disposition else "",
                self.origin or "")

    def __str__(self) -> str:
        core = self.name
        if self.origin is not None:
            core = f"resolve({self.name}@{self.origin})"
        if self.kind is Kind.DEC:
            core = f"dec({core})"
        elif self.kind is Kind.EXEC:
            core = f"exec({core})"
        if self.disposition is not None:
            core += f"[{self.disposition.value}]"
        return core

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind.name.lower(), "name": self.name}
        if self.disposition is not None:
            d["disposition"] = self.disposition.value
        if self.origin is not None:
            d["origin"] = self.origin
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ActionLabel":
        disp = d.get("disposition")
        return cls(Kind[d["kind"].upper()], d["name"],
                   Disposition(disp) if disp else None, d.get("origin"))


def agent(name: str, disposition: Optional[Disposition] = None) -> ActionLabel:
    return ActionLabel(Kind.AGENT, name, disposition)


def env(name: str) -> ActionLabel:
    return ActionLabel(Kind.ENV, name)


def dec(name: str, disposition: Optional[Disposition] = None) -> ActionLabel:
    return ActionLabel(Kind.DEC, name, disposition)


def exec_(name: str, disposition: Optional[Disposition] = None) -> ActionLabel:
    return ActionLabel(Kind.EXEC, name, disposition)


def base_of(config: Hashable) -> StateId:
    return config if isinstance(config, str) else config.base  # type: ignore[attr-defined]


class UndeclaredError(ValueError):
    """A trace mentions a state or label its table does not declare."""

    def __init__(self, index: int, what: str):
        self.index = index
        super().__init__(f"step {index}: undeclared {what}")


@dataclass(frozen=True)
class TransitionTable:
    rows: FrozenSet[Tuple[Hashable, ActionLabel, Hashable]]

    def __post_init__(self) -> None:
        seen = {}
        for src, label, tgt in self.rows:
            if label.kind is Kind.ENV:
                continue
            prior = seen.setdefault((src, label), tgt)
            if prior != tgt:
                raise ValueError(f"non-deterministic governed arc {label} from {src!r}")

    @property
    def states(self) -> FrozenSet[Hashable]:
        return frozenset(s for s, _, _ in self.rows) | frozenset(t for _, _, t in self.rows)

    @property
    def labels(self) -> FrozenSet[ActionLabel]:
        return frozenset(l for _, l, _ in self.rows)

    def __contains__(self, row) -> bool:
        return row in self.rows

    @classmethod
    def from_scenario(cls, spec: ScenarioSpec) -> "TransitionTable":
        """The ungoverned relation: every agent action fires T, plus env steps."""
        rows = {(s, agent(a), spec.transition[(s, a)])
                for s in spec.states for a in spec.agent_actions}
        rows |= {(s, env(e), t) for s, e, t in spec.env_transitions}
        return cls(frozenset(rows))


@dataclass(frozen=True)
class Trace:
    states: Tuple[Hashable, ...]
    labels: Tuple[ActionLabel, ...] = ()

    def __post_init__(self) -> None:
        if len(self.states) != len(self.labels) + 1:
            raise ValueError("a trace needs exactly one more state than labels")

    @classmethod
    def of(cls, *steps) -> "Trace":
        """Build from an alternating ``s0, a1, s1, ...`` sequence."""
        return cls(tuple(steps[0::2]), tuple(steps[1::2]))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def steps(self) -> Tuple[Any, ...]:
        out: list = [self.states[0]]
        for label, state in zip(self.labels, self.states[1:]):
            out += [label, state]
        return tuple(out)

    def triples(self) -> Iterator[Tuple[int, Hashable, ActionLabel, Hashable]]:
        for i, label in enumerate(self.labels, start=1):
            yield i, self.states[i - 1], label, self.states[i]

    def extend(self, label: ActionLabel, state: Hashable) -> "Trace":
        return Trace(self.states + (state,), self.labels + (label,))

    def prefix(self, n: int) -> "Trace":
        return Trace(self.states[: n + 1], self.labels[:n])

    def render(self) -> str:
        return " -> ".join(
            [str(base_of(self.states[0]))]
            + [f"{l} -> {base_of(s)}" for l, s in zip(self.labels, self.states[1:])]
        )


def first_invalid_step(trace: Trace, table: TransitionTable) -> Optional[int]:
    """1-based index of the first step that is not a row of ``table``.

    Raises :class:`UndeclaredError` when a state or label is unknown to the
    table altogether.
    """
    states, labels = table.states, table.labels
    if trace.states[0] not in states and len(trace) > 0:
        raise UndeclaredError(0, f"state {trace.states[0]!r}")
    for i, src, label, tgt in trace.triples():
        if label not in labels:
            raise UndeclaredError(i, f"label {label}")
        if tgt not in states:
            raise UndeclaredError(i, f"state {tgt!r}")
        if (src, label, tgt) not in table.rows:
            return i
    return None


def validate_trace(trace: Trace, table: TransitionTable) -> bool:
    return first_invalid_step(trace, table) is None


@dataclass(frozen=True)
class Preserved:
    ok = True

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Violated:
    index: int
    state: StateId
    action: str

    ok = False

    def __bool__(self) -> bool:
        return False

    def to_dict(self) -> dict:
        return {"index": self.index, "state": self.state, "action": self.action}


PreservationVerdict = Union[Preserved, Violated]


def check_preservation(trace: Trace, adm: Mapping[Tuple[StateId, str], bool]) -> PreservationVerdict:
    """First committing agent step fired in an inadmissible state, if any.

    Only arcs that actually apply the transition function count: bare agent
    arcs, atomic outcomes of Allow, and exec arcs of an Allow record. Env and
    dec arcs never violate.
    """
    for i, src, label, _ in trace.triples():
        if not label.commits:
            continue
        state = base_of(src)
        if not adm[(state, label.name)]:
            return Violated(i, state, label.name)
    return Preserved()


def all_violations(trace: Trace, adm) -> Iterable[Violated]:
    for i, src, label, _ in trace.triples():
        if label.commits and not adm[(base_of(src), label.name)]:
            yield Violated(i, base_of(src), label.name)
