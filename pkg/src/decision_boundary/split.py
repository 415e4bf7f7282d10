"""Split evaluation pipeline: ``dec`` records a decision, environment steps
may run, ``exec`` applies the recorded decision to whatever state holds.

The recorded decision rides alongside the base state (``SplitState``), so
the same scenario tables serve both the atomic and the split construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import FrozenSet, Optional, Tuple

from .atomic import PendingRequest, ProtocolError
from .kernel import Disposition, ExternalStateSpec, ScenarioSpec, StateId

__all__ = [
    "ExternalStateSpec", "PreservationEvent", "RecordedDecision", "SplitError",
    "SplitState", "resolve_split", "split_dec", "split_dec_augmented",
    "split_env", "split_exec",
]


class SplitError(RuntimeError):
    """A split-pipeline step was taken out of order."""


class PreservationEvent(str, Enum):
    ADMISSIBLE = "admissible"
    VIOLATED = "violated"
    NO_FIRE = "no-fire"


@dataclass(frozen=True)
class RecordedDecision:
    action: str
    disposition: Disposition
    evaluated_in: StateId
    # Set when the record is a supervisor verdict for a pending request.
    request: Optional[PendingRequest] = None

    def sort_key(self) -> tuple:
        r = (self.request.origin_state, self.request.action) if self.request else ()
        return (self.action, self.disposition.value, self.evaluated_in, r)

    def to_dict(self) -> dict:
        d = {"action": self.action, "disposition": self.disposition.value,
             "evaluated_in": self.evaluated_in}
        if self.request is not None:
            d["request"] = [self.request.origin_state, self.request.action]
        return d


@dataclass(frozen=True)
class SplitState:
    base: StateId
    recorded: Optional[RecordedDecision] = None
    pending: FrozenSet[PendingRequest] = frozenset()

    def sort_key(self) -> tuple:
        rec = self.recorded.sort_key() if self.recorded else ()
        return (self.base, rec, tuple(sorted(self.pending)))

    def to_dict(self) -> dict:
        d: dict = {"base": self.base,
                   "pending": [[r.origin_state, r.action] for r in sorted(self.pending)]}
        if self.recorded is not None:
            d["recorded"] = self.recorded.to_dict()
        return d

    def __str__(self) -> str:
        out = self.base
        if self.recorded is not None:
            out += f"[{self.recorded.action}:{self.recorded.disposition.value}" \
                   f"@{self.recorded.evaluated_in}]"
        if self.pending:
            out += f"+{{{', '.join(map(str, sorted(self.pending)))}}}"
        return out


def _record(current: SplitState, action: str, d: Disposition) -> SplitState:
    if current.recorded is not None:
        raise SplitError("a decision is already outstanding")
    s = current.base
    if d is Disposition.ESCALATE:
        return replace(current, recorded=None,
                       pending=current.pending | {PendingRequest(s, action)})
    return replace(current, recorded=RecordedDecision(action, d, s))


def split_dec(spec: ScenarioSpec, current: SplitState, action: str) -> SplitState:
    if action not in spec.agent_actions:
        raise ValueError(f"{action!r} is not an agent action of {spec.name}")
    return _record(current, action, spec.decision[(current.base, action)])


def split_dec_augmented(spec: ScenarioSpec, current: SplitState, action: str,
                        external: ExternalStateSpec) -> SplitState:
    """``split_dec`` with the decision taken from the external store."""
    if action not in spec.agent_actions:
        raise ValueError(f"{action!r} is not an agent action of {spec.name}")
    return _record(current, action, external.decision(current.base, action))


def split_env(spec: ScenarioSpec, current: SplitState, env_action: str,
              target: Optional[StateId] = None) -> SplitState:
    targets = spec.env_targets(current.base, env_action)
    if not targets:
        raise SplitError(f"{env_action} is not enabled in {current.base}")
    if target is None:
        if len(targets) > 1:
            raise SplitError(f"{env_action} is nondeterministic in {current.base}; pass target")
        target = targets[0]
    elif target not in targets:
        raise SplitError(f"no env transition {current.base} -{env_action}-> {target}")
    return replace(current, base=target)


def split_exec(spec: ScenarioSpec, current: SplitState) -> Tuple[SplitState, PreservationEvent]:
    rec = current.recorded
    if rec is None:
        raise SplitError("exec without a recorded decision")
    if rec.disposition is not Disposition.ALLOW:
        return replace(current, recorded=None), PreservationEvent.NO_FIRE
    s = current.base
    event = PreservationEvent.ADMISSIBLE if spec.adm[(s, rec.action)] else PreservationEvent.VIOLATED
    return replace(current, base=spec.transition[(s, rec.action)], recorded=None), event


def resolve_split(spec: ScenarioSpec, current: SplitState, request: PendingRequest,
                  verdict: Disposition) -> SplitState:
    """Record a supervisor verdict; a later :func:`split_exec` applies it."""
    if request not in current.pending:
        raise ProtocolError(f"request {request} is not pending in {current}")
    if verdict not in (Disposition.ALLOW, Disposition.REFUSE):
        raise ValueError("a supervisor verdict is Allow or Refuse")
    if current.recorded is not None:
        raise SplitError("a decision is already outstanding")
    rec = RecordedDecision(request.action, verdict, current.base, request)
    return SplitState(current.base, rec, current.pending - {request})
