"""Decision domain, scenario tables and the checks that run over them.

A :class:`ScenarioSpec` is a finite, fully tabulated admission-control
problem: states (with named attributes), agent and environment actions,
the environment transition relation, and three total tables over
``states x agent_actions``: admissibility, decision, and transition.

Everything here is pure. Specs are treated as immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

StateId = str
Cell = Tuple[StateId, str]


class ScenarioError(ValueError):
    """A scenario (or one of its tables) is ill-formed."""

    def __init__(self, problems: Iterable[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class Disposition(str, Enum):
    ALLOW = "allow"
    REFUSE = "refuse"
    ESCALATE = "escalate"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Disposition":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown disposition {text!r}") from None


@dataclass(frozen=True)
class ExternalStateSpec:
    """An external store the decision function may consult.

    ``read`` gives the store value observed from each base state.
    ``effects`` says how each coupled environment action rewrites the value
    (value -> value). ``decide`` is the augmented decision table keyed by
    ``(value, action)``; the augmented decision for ``(s, a)`` is
    ``decide[(read[s], a)]``.
    """

    values: Tuple[str, ...]
    read: Dict[StateId, str]
    effects: Dict[str, Dict[str, str]] = field(default_factory=dict)
    decide: Dict[Tuple[str, str], Disposition] = field(default_factory=dict)

    def decision(self, state: StateId, action: str) -> Disposition:
        return self.decide[(self.read[state], action)]


@dataclass(frozen=True)
class PartitionDescriptor:
    """Split of state attributes into a local part and a global part.

    The local part is covered by the joint decide-and-commit snapshot; the
    global part is not. ``adm_dependency`` names the attributes admissibility
    reads.
    """

    local_attrs: FrozenSet[str]
    global_attrs: FrozenSet[str]
    adm_dependency: FrozenSet[str]

    def __init__(self, local_attrs: Iterable[str], global_attrs: Iterable[str],
                 adm_dependency: Iterable[str]):
        object.__setattr__(self, "local_attrs", frozenset(local_attrs))
        object.__setattr__(self, "global_attrs", frozenset(global_attrs))
        object.__setattr__(self, "adm_dependency", frozenset(adm_dependency))


@dataclass(frozen=True, eq=True)
class ScenarioSpec:
    name: str
    attributes: Dict[str, Tuple[str, ...]]
    states: Dict[StateId, Dict[str, str]]
    initial: StateId
    agent_actions: Tuple[str, ...]
    env_actions: Tuple[str, ...]
    env_transitions: FrozenSet[Tuple[StateId, str, StateId]]
    adm: Dict[Cell, bool]
    decision: Dict[Cell, Disposition]
    transition: Dict[Cell, StateId]
    external: Optional[ExternalStateSpec] = None
    partition: Optional[PartitionDescriptor] = None
    # How a supervisor picks its verdict at resolution time: "adm" grants
    # exactly when the request is admissible in the current state, "refuse"
    # always refuses.
    supervisor: str = "adm"

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        problems = _well_formedness_problems(self)
        if problems:
            raise ScenarioError(problems)

    # -- convenience accessors ------------------------------------------------

    @property
    def state_ids(self) -> Tuple[StateId, ...]:
        return tuple(self.states)

    def attr(self, state: StateId, name: str) -> str:
        return self.states[state][name]

    def env_targets(self, state: StateId, env_action: str) -> List[StateId]:
        return sorted(t for (s, e, t) in self.env_transitions
                      if s == state and e == env_action)

    def env_arcs(self, state: StateId) -> List[Tuple[str, StateId]]:
        return sorted((e, t) for (s, e, t) in self.env_transitions if s == state)

    def supervisor_verdict(self, state: StateId, action: str) -> Disposition:
        if self.supervisor == "refuse":
            return Disposition.REFUSE
        return Disposition.ALLOW if self.adm[(state, action)] else Disposition.REFUSE

    def replace(self, **changes) -> "ScenarioSpec":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return ScenarioSpec(**values)


def _well_formedness_problems(spec: ScenarioSpec) -> List[str]:
    problems: List[str] = []
    states = spec.states
    agents, envs = spec.agent_actions, spec.env_actions

    if not states:
        problems.append("scenario declares no states")
    if spec.initial not in states:
        problems.append(f"initial state {spec.initial!r} is not declared")
    overlap = set(agents) & set(envs)
    if overlap:
        problems.append("agent and env actions overlap: " + ", ".join(sorted(overlap)))
    for kind, names in (("agent", agents), ("env", envs)):
        if len(set(names)) != len(names):
            problems.append(f"duplicate {kind} action names")

    for sid, attrs in states.items():
        for name, value in attrs.items():
            if name not in spec.attributes:
                problems.append(f"state {sid}: undeclared attribute {name!r}")
            elif value not in spec.attributes[name]:
                problems.append(f"state {sid}: {name}={value} outside domain")

    cells = set(product(states, agents))
    for label, table in (("adm", spec.adm), ("decision", spec.decision),
                         ("transition", spec.transition)):
        missing = sorted(cells - set(table))
        if missing:
            problems.append(f"{label} table missing rows: "
                            + ", ".join(f"({s}, {a})" for s, a in missing))
        extra = sorted(set(table) - cells)
        if extra:
            problems.append(f"{label} table has undeclared rows: "
                            + ", ".join(f"({s}, {a})" for s, a in extra))
    for (s, a), target in spec.transition.items():
        if target not in states:
            problems.append(f"transition ({s}, {a}) -> undeclared state {target!r}")
    for s, e, t in spec.env_transitions:
        if s not in states or t not in states:
            problems.append(f"env transition ({s}, {e}, {t}) references an undeclared state")
        if e not in envs:
            problems.append(f"env transition ({s}, {e}, {t}) uses undeclared env action")

    if spec.external is not None:
        ext = spec.external
        for sid in states:
            if sid not in ext.read:
                problems.append(f"external read is not total: missing {sid}")
            elif ext.read[sid] not in ext.values:
                problems.append(f"external read {sid} -> undeclared value {ext.read[sid]!r}")
        for e, update in ext.effects.items():
            if e not in envs:
                problems.append(f"external effect on undeclared env action {e!r}")
            for src, dst in update.items():
                if src not in ext.values or dst not in ext.values:
                    problems.append(f"external effect {e}: {src}->{dst} uses undeclared value")
        for s, e, t in spec.env_transitions:
            update = ext.effects.get(e)
            if update is None or s not in ext.read or t not in ext.read:
                continue
            if update.get(ext.read[s]) != ext.read[t]:
                problems.append(f"external effect of {e} disagrees with ({s}, {e}, {t})")
        for v, a in product(ext.values, agents):
            if (v, a) not in ext.decide:
                problems.append(f"external decide table missing row ({v}, {a})")

    if spec.partition is not None:
        problems.extend(partition_problems(spec, spec.partition))

    if spec.supervisor not in ("adm", "refuse"):
        problems.append(f"unknown supervisor policy {spec.supervisor!r}")
    return problems


def partition_problems(spec: ScenarioSpec, partition: PartitionDescriptor) -> List[str]:
    problems = []
    attrs = set(spec.attributes)
    local, glob = partition.local_attrs, partition.global_attrs
    if local & glob:
        problems.append("partition: local and global attributes overlap: "
                        + ", ".join(sorted(local & glob)))
    if (local | glob) != attrs:
        problems.append("partition does not cover attributes exactly: "
                        f"declared {sorted(attrs)}, got {sorted(local | glob)}")
    unknown = partition.adm_dependency - attrs
    if unknown:
        problems.append("partition: adm_dependency names unknown attributes: "
                        + ", ".join(sorted(unknown)))
    actual = adm_dependency(spec)
    if not actual <= partition.adm_dependency:
        problems.append("partition: admissibility also reads "
                        + ", ".join(sorted(actual - partition.adm_dependency)))
    return problems


def adm_dependency(spec: ScenarioSpec) -> FrozenSet[str]:
    """Attributes whose value can change an admissibility verdict.

    An attribute matters if two states differing only in it disagree on
    ``Adm`` for some action.
    """
    needed = set()
    ids = list(spec.states)
    for attr in spec.attributes:
        others = [n for n in spec.attributes if n != attr]
        groups: Dict[tuple, List[StateId]] = {}
        for sid in ids:
            key = tuple(spec.states[sid].get(n) for n in others)
            groups.setdefault(key, []).append(sid)
        for members in groups.values():
            for a in spec.agent_actions:
                if len({spec.adm[(m, a)] for m in members}) > 1:
                    needed.add(attr)
                    break
            if attr in needed:
                break
    return frozenset(needed)


# -- consistency ---------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyViolation:
    condition: str  # one of "i", "ii", "iii", "iv"
    state: StateId
    action: str


@dataclass(frozen=True)
class ConsistencyVerdict:
    violations: Tuple[ConsistencyViolation, ...] = ()

    @property
    def consistent(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.consistent

    def conditions_at(self, state: StateId, action: str) -> FrozenSet[str]:
        return frozenset(v.condition for v in self.violations
                         if v.state == state and v.action == action)


def check_consistency(decision: Mapping[Cell, Disposition],
                      adm: Mapping[Cell, bool]) -> ConsistencyVerdict:
    """Check the four implications tying a decision table to admissibility.

    (i)   Allow  => Adm
    (ii)  Refuse => not Adm
    (iii) Adm    => not Refuse
    (iv)  not Adm => not Allow

    Every failing condition is reported separately, so a single bad cell
    usually shows up under two tags (an implication and its contrapositive).
    """
    if set(decision) != set(adm):
        missing = sorted(set(adm) ^ set(decision))
        raise ScenarioError("decision and adm tables cover different cells: "
                            + ", ".join(f"({s}, {a})" for s, a in missing))
    found = []
    for (s, a) in sorted(decision):
        d, ok = decision[(s, a)], adm[(s, a)]
        if d is Disposition.ALLOW and not ok:
            found.append(ConsistencyViolation("i", s, a))
        if d is Disposition.REFUSE and ok:
            found.append(ConsistencyViolation("ii", s, a))
        if ok and d is Disposition.REFUSE:
            found.append(ConsistencyViolation("iii", s, a))
        if not ok and d is Disposition.ALLOW:
            found.append(ConsistencyViolation("iv", s, a))
    return ConsistencyVerdict(tuple(found))


def derive_decision_from_adm(
    adm: Mapping[Cell, bool],
    escalate_on: Callable[[StateId, str], bool] = lambda s, a: False,
) -> Dict[Cell, Disposition]:
    """Build a decision table that is consistent with ``adm`` by construction."""
    table = {}
    for (s, a), ok in adm.items():
        if escalate_on(s, a):
            table[(s, a)] = Disposition.ESCALATE
        else:
            table[(s, a)] = Disposition.ALLOW if ok else Disposition.REFUSE
    return table


# -- assumption checks -------------------------------------------------------

@dataclass(frozen=True)
class AssumptionVerdict:
    grant_witness: Optional[Cell]  # (s, a) with Adm true and D = Allow
    env_witness: Optional[Tuple[StateId, str, str]]  # (s, a, e)
    env_target: Optional[StateId] = None

    @property
    def grants(self) -> bool:
        return self.grant_witness is not None

    @property
    def env_breaks(self) -> bool:
        return self.env_witness is not None

    @property
    def passed(self) -> bool:
        return self.grants and self.env_breaks

    def failure_reason(self) -> Optional[str]:
        if self.passed:
            return None
        parts = []
        if not self.grants:
            parts.append("(i) no admissible action is ever allowed")
        if not self.env_breaks:
            parts.append("(ii) no environment step makes an action inadmissible")
        return "non-triviality assumption unmet: " + "; ".join(parts)


def check_nontriviality(spec: ScenarioSpec) -> AssumptionVerdict:
    grant = None
    for s in spec.states:
        for a in spec.agent_actions:
            if spec.adm[(s, a)] and spec.decision[(s, a)] is Disposition.ALLOW:
                grant = (s, a)
                break
        if grant:
            break

    # Prefer an env witness whose source state is itself admissible for the
    # action, since that is the shape the violating trace needs.
    best = None
    for s in spec.states:
        for a in spec.agent_actions:
            for e, t in spec.env_arcs(s):
                if spec.adm[(t, a)]:
                    continue
                candidate = ((s, a, e), t)
                if spec.adm[(s, a)]:
                    return AssumptionVerdict(grant, candidate[0], t)
                if best is None:
                    best = candidate
    if best is None:
        return AssumptionVerdict(grant, None)
    return AssumptionVerdict(grant, best[0], best[1])
