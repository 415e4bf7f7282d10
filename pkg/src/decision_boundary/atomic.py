"""Atomic decision boundary.

``atomic_step`` computes the disposition and the successor extended state
as one function of the current state; the enumerator treats each call as a
single arc. ``resolve_atomic`` does the same for supervisor resolution.

For live concurrent runs, :class:`VersionedStateCell` realizes the single
arc with an optimistic compare-and-commit: a decision is only committed if
the state it was computed from is still current.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, FrozenSet, Hashable, List, NamedTuple, Optional, Tuple

from .kernel import Disposition, ExternalStateSpec, ScenarioSpec, StateId
from .model import ActionLabel, Kind


class ProtocolError(RuntimeError):
    """Resolution of a request that is not pending."""


class Starved(RuntimeError):
    """Compare-and-commit kept losing races until the retry budget ran out."""

    def __init__(self, action: str, attempts: int):
        self.action = action
        self.attempts = attempts
        super().__init__(f"{action}: no commit after {attempts} attempts")


@dataclass(frozen=True, order=True)
class PendingRequest:
    origin_state: StateId
    action: str

    def __str__(self) -> str:
        return f"({self.origin_state}, {self.action})"


@dataclass(frozen=True)
class ExtendedState:
    base: StateId
    pending: FrozenSet[PendingRequest] = frozenset()

    def sort_key(self) -> tuple:
        return (self.base, (), tuple(sorted(self.pending)))

    def to_dict(self) -> dict:
        return {"base": self.base,
                "pending": [[r.origin_state, r.action] for r in sorted(self.pending)]}

    def __str__(self) -> str:
        if not self.pending:
            return self.base
        return f"{self.base}+{{{', '.join(map(str, sorted(self.pending)))}}}"


class AtomicOutcome(NamedTuple):
    disposition: Disposition
    next: ExtendedState


def atomic_step(spec: ScenarioSpec, current: ExtendedState, action: str,
                external: Optional[ExternalStateSpec] = None) -> AtomicOutcome:
    """One indivisible decide-and-commit step.

    With ``external`` given, the disposition comes from the augmented
    decision over the store value read in ``current.base``; the read is part
    of the same step.
    """
    if action not in spec.agent_actions:
        raise ValueError(f"{action!r} is not an agent action of {spec.name}")
    s = current.base
    d = external.decision(s, action) if external else spec.decision[(s, action)]
    if d is Disposition.ALLOW:
        return AtomicOutcome(d, ExtendedState(spec.transition[(s, action)], current.pending))
    if d is Disposition.REFUSE:
        return AtomicOutcome(d, current)
    return AtomicOutcome(d, ExtendedState(s, current.pending | {PendingRequest(s, action)}))


def resolve_atomic(spec: ScenarioSpec, current: ExtendedState, request: PendingRequest,
                   verdict: Disposition) -> ExtendedState:
    if request not in current.pending:
        raise ProtocolError(f"request {request} is not pending in {current}")
    if verdict not in (Disposition.ALLOW, Disposition.REFUSE):
        raise ValueError("a supervisor verdict is Allow or Refuse")
    rest = current.pending - {request}
    if verdict is Disposition.ALLOW:
        return ExtendedState(spec.transition[(current.base, request.action)], rest)
    return ExtendedState(current.base, rest)


# -- live mode ---------------------------------------------------------------

class Commit(NamedTuple):
    version: int
    label: ActionLabel
    before: Hashable
    after: Hashable


class VersionedStateCell:
    """A shared state with a monotone version and a conditional commit.

    Every successful commit is appended to ``history`` under the same lock,
    so the history order is the linearization order.
    """

    def __init__(self, state: Hashable):
        self._lock = threading.Lock()
        self._state = state
        self._version = 0
        self.history: List[Commit] = []

    def read(self) -> Tuple[Hashable, int]:
        with self._lock:
            return self._state, self._version

    @property
    def version(self) -> int:
        return self._version

    def commit(self, expected_version: int, new_state: Hashable, label: ActionLabel) -> bool:
        with self._lock:
            if self._version != expected_version:
                return False
            before = self._state
            self._version += 1
            self._state = new_state
            self.history.append(Commit(self._version, label, before, new_state))
            return True

    def update(self, fn: Callable[[Hashable], Optional[Tuple[Hashable, ActionLabel]]],
               budget: int = 64, pause: Optional[Callable[[], None]] = None):
        """Read, compute ``fn(state)``, commit against the read version; retry on conflict.

        ``fn`` returning ``None`` means nothing to commit. Returns the
        committed ``(before, after, label)`` or ``None``.
        """
        for _ in range(budget):
            state, version = self.read()
            result = fn(state)
            if result is None:
                return None
            if pause is not None:
                pause()
            new_state, label = result
            if self.commit(version, new_state, label):
                return state, new_state, label
        raise Starved(getattr(fn, "__name__", "update"), budget)


DEFAULT_RETRY_BUDGET = 64


def live_admit_and_commit(cell: VersionedStateCell, spec: ScenarioSpec, action: str,
                          budget: int = DEFAULT_RETRY_BUDGET,
                          pause: Optional[Callable[[], None]] = None,
                          observe: Optional[Callable[[ExtendedState, AtomicOutcome], None]] = None,
                          ) -> AtomicOutcome:
    """Decide and commit ``action`` against one snapshot of ``cell``.

    ``pause`` runs between the read and the commit attempt; it exists so
    tests and the race harness can widen the window. A conflicting commit
    in that window invalidates the decision and the loop starts over from
    the fresh state. ``observe`` is called with the snapshot and the outcome
    once the commit has landed.
    """
    for _ in range(budget):
        state, version = cell.read()
        outcome = atomic_step(spec, state, action)
        if pause is not None:
            pause()
        label = ActionLabel(Kind.AGENT, action, outcome.disposition)
        # A refusal changes nothing but is still committed against a current snapshot.
        if cell.commit(version, outcome.next, label):
            if observe is not None:
                observe(state, outcome)
            return outcome
    raise Starved(action, budget)
