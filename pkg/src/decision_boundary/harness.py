"""Verification harness.

* :func:`verify_theorem` - minimal violating trace of the split
  construction, and exhaustive absence for the atomic one.
* :func:`verify_escalation_closure` - the same comparison for supervisor
  resolution (primary boundary atomic in both constructions).
* :func:`verify_external_state` - split and fused constructions that
  decide from an external store.
* :func:`run_stochastic` - seeded random walks where the environment gets a
  step at each interleaving point with probability ``p``.
* :func:`classify_partial_atomicity` - Atomic / PartiallyAtomic / Split.

Live concurrent stress lives in :mod:`decision_boundary.live`.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

from .kernel import (
    Disposition,
    PartitionDescriptor,
    ScenarioError,
    ScenarioSpec,
    adm_dependency,
    check_nontriviality,
    partition_problems,
)
from .model import Kind, Trace, Violated, check_preservation
from .systems import DEFAULT_MAX_TRACES, Mode, System, commits_inadmissibly


# -- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    trace: Trace
    violation: Violated

    @property
    def length(self) -> int:
        return len(self.trace)


@dataclass(frozen=True)
class AbsentUpTo:
    depth: int
    traces_explored: int


@dataclass(frozen=True)
class Inconclusive:
    reason: str


Outcome = Union[Witness, AbsentUpTo, Inconclusive]


@dataclass(frozen=True)
class WitnessReport:
    scenario: str
    mode: str
    depth: int
    outcome: Outcome
    expected: Optional[str] = None  # "witness" | "absent", when there is an expectation

    @property
    def kind(self) -> str:
        return {Witness: "witness", AbsentUpTo: "absent",
                Inconclusive: "inconclusive"}[type(self.outcome)]

    @property
    def matched(self) -> bool:
        return self.expected is None or self.kind == self.expected


def default_depth(spec: ScenarioSpec) -> int:
    return len(spec.states) + 2


def _witness(spec: ScenarioSpec, trace: Trace) -> Witness:
    verdict = check_preservation(trace, spec.adm)
    # A witness that does not replay as a violation would be an enumerator bug.
    assert isinstance(verdict, Violated), trace.render()
    return Witness(trace, verdict)


def search(system: System, depth: int, max_traces: int = DEFAULT_MAX_TRACES,
           expected: Optional[str] = None) -> WitnessReport:
    """Minimal witness by breadth-first search, else full enumeration to certify absence."""
    spec = system.spec
    trace, _ = system.shortest_violation(depth)
    if trace is not None:
        outcome: Outcome = _witness(spec, trace)
    else:
        explored, found = system.count_and_find(depth, max_traces)
        assert found is None
        outcome = AbsentUpTo(depth, explored)
    return WitnessReport(spec.name, system.describe(), depth, outcome, expected)


def certify(system: System, depth: int, max_traces: int = DEFAULT_MAX_TRACES,
            expected: Optional[str] = None) -> WitnessReport:
    """Full enumeration first; a violation found on the way is reported as-is."""
    spec = system.spec
    explored, found = system.count_and_find(depth, max_traces)
    if found is None:
        outcome: Outcome = AbsentUpTo(depth, explored)
    else:
        trace, _ = system.shortest_violation(depth)
        outcome = _witness(spec, trace or found)
    return WitnessReport(spec.name, system.describe(), depth, outcome, expected)


def _inconclusive(spec, system_desc, depth, reason, expected) -> WitnessReport:
    return WitnessReport(spec.name, system_desc, depth, Inconclusive(reason), expected)


def verify_theorem(spec: ScenarioSpec, depth: Optional[int] = None,
                   max_traces: int = DEFAULT_MAX_TRACES) -> Tuple[WitnessReport, WitnessReport]:
    depth = default_depth(spec) if depth is None else depth
    verdict = check_nontriviality(spec)
    if not verdict.passed:
        reason = verdict.failure_reason() or ""
        return (_inconclusive(spec, "split", depth, reason, "witness"),
                _inconclusive(spec, "atomic", depth, reason, "absent"))
    return (search(System(spec, Mode.SPLIT), depth, max_traces, "witness"),
            certify(System(spec, Mode.ATOMIC), depth, max_traces, "absent"))


def _escalation_distance(spec: ScenarioSpec) -> Optional[int]:
    """Fewest arcs before an Escalate outcome can fire, or ``None``."""
    system = System(spec, Mode.ATOMIC)
    for config, dist in sorted(system.reachable().items(), key=lambda kv: kv[1]):
        for label, _ in system.successors(config):
            if label.kind is Kind.AGENT and label.disposition is Disposition.ESCALATE:
                return dist
    return None


def verify_escalation_closure(spec: ScenarioSpec, depth: Optional[int] = None,
                              max_traces: int = DEFAULT_MAX_TRACES
                              ) -> Tuple[WitnessReport, WitnessReport]:
    depth = default_depth(spec) if depth is None else depth
    split_sys = System(spec, Mode.ATOMIC, resolution=Mode.SPLIT)
    atomic_sys = System(spec, Mode.ATOMIC, resolution=Mode.ATOMIC)
    dist = _escalation_distance(spec)
    reason = None
    if dist is None:
        reason = "resolution unreachable: no reachable Escalate"
    elif depth < dist + 2:
        reason = f"resolution unreachable at depth {depth} (needs {dist + 2})"
    if reason is not None:
        return (_inconclusive(spec, split_sys.describe(), depth, reason, "witness"),
                _inconclusive(spec, atomic_sys.describe(), depth, reason, "absent"))
    return (search(split_sys, depth, max_traces, "witness"),
            certify(atomic_sys, depth, max_traces, "absent"))


def verify_external_state(spec: ScenarioSpec, depth: Optional[int] = None, fused: bool = False,
                          max_traces: int = DEFAULT_MAX_TRACES) -> WitnessReport:
    """Augmented split construction (``fused=False``) or the fused one."""
    depth = default_depth(spec) if depth is None else depth
    mode = Mode.ATOMIC if fused else Mode.SPLIT
    expected = "absent" if fused else "witness"
    if spec.external is None:
        return _inconclusive(spec, f"{mode}+external", depth,
                             "scenario declares no external store", expected)
    ext = spec.external
    augmented = spec.replace(decision={(s, a): ext.decision(s, a)
                                       for s in spec.states for a in spec.agent_actions})
    verdict = check_nontriviality(augmented)
    system = System(spec, mode, external=True)
    if not verdict.passed:
        return _inconclusive(spec, system.describe(), depth, verdict.failure_reason(), expected)
    if fused:
        return certify(system, depth, max_traces, expected)
    return search(system, depth, max_traces, expected)


# -- stochastic scheduling ---------------------------------------------------

class SchedulerKind(str, Enum):
    EXHAUSTIVE = "exhaustive"
    STOCHASTIC = "stochastic"
    LIVE_RACE = "live-race"


@dataclass(frozen=True)
class SchedulerConfig:
    kind: SchedulerKind = SchedulerKind.STOCHASTIC
    p: float = 0.5
    trials: int = 10_000
    seed: int = 0
    yield_injection: bool = True
    # agent requests per stochastic trial
    requests: int = 3
    # live-race knobs
    workers: int = 4
    env_workers: int = 2
    yield_seconds: float = 0.0002
    retry_budget: int = 64

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SchedulerKind(self.kind))
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.requests < 1:
            raise ValueError("requests must be at least 1")
        if self.workers < 1 or self.env_workers < 0:
            raise ValueError("need at least one agent worker and a non-negative env worker count")


@dataclass
class ViolationStats:
    scenario: str
    mode: str
    kind: str
    trials: int
    violations: int
    commits: int = 0
    p: Optional[float] = None
    seed: Optional[int] = None
    starved: int = 0
    replay_violations: Optional[int] = None
    replay_consistent: Optional[bool] = None
    elapsed: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def rate(self) -> float:
        return self.violations / self.trials if self.trials else 0.0


def run_stochastic(spec: ScenarioSpec, mode: Mode | str, config: SchedulerConfig,
                   system: Optional[System] = None) -> ViolationStats:
    """Random walks with an environment step at each interleaving point with probability p.

    A trial issues ``config.requests`` agent requests in a row. After each
    request-starting arc (an atomic step, a ``dec``, or a resolution) the
    environment gets one chance to fire a uniformly chosen enabled step;
    then any outstanding recorded decision executes. A trial counts once
    if any committed step in it was inadmissible.
    """
    if config.kind is not SchedulerKind.STOCHASTIC:
        raise ValueError("run_stochastic needs a stochastic scheduler config")
    system = system or System(spec, Mode(mode))
    rng = random.Random(config.seed)
    started = time.perf_counter()
    violations = commits = 0
    for _ in range(config.trials):
        c = system.initial()
        bad = False
        for _ in range(config.requests):
            starts = [arc for arc in system.successors(c)
                      if arc[0].kind in (Kind.AGENT, Kind.DEC)]
            if not starts:
                break
            label, nxt = rng.choice(starts)
            bad |= commits_inadmissibly(spec, c, label)
            commits += label.commits
            c = nxt
            if rng.random() < config.p:
                envs = [arc for arc in system.successors(c) if arc[0].kind is Kind.ENV]
                if envs:
                    c = rng.choice(envs)[1]
            for label, nxt in system.successors(c):
                if label.kind is Kind.EXEC:
                    bad |= commits_inadmissibly(spec, c, label)
                    commits += label.commits
                    c = nxt
                    break
        violations += bad
    return ViolationStats(spec.name, system.describe(), SchedulerKind.STOCHASTIC.value,
                          config.trials, violations, commits, config.p, config.seed,
                          elapsed=time.perf_counter() - started)


# -- partial atomicity ---------------------------------------------------------

class AtomicityClass(str, Enum):
    ATOMIC = "Atomic"
    PARTIALLY_ATOMIC = "PartiallyAtomic"
    SPLIT = "Split"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Classification:
    scenario: str
    verdict: AtomicityClass
    partition: PartitionDescriptor
    report: WitnessReport
    window_env: Tuple[str, ...]
    adm_reads_global: bool


def global_env_actions(spec: ScenarioSpec, partition: PartitionDescriptor) -> Tuple[str, ...]:
    """Environment actions that only ever change global attributes.

    Anything touching a local attribute is serialized with the per-object
    decide-and-commit, so it cannot land between decision and execution.
    """
    touching_local = set()
    for s, e, t in spec.env_transitions:
        before, after = spec.states[s], spec.states[t]
        if any(before.get(a) != after.get(a) for a in partition.local_attrs):
            touching_local.add(e)
    return tuple(e for e in spec.env_actions if e not in touching_local)


def classify_partial_atomicity(spec: ScenarioSpec,
                               partition: Optional[PartitionDescriptor] = None,
                               depth: Optional[int] = None,
                               mode: Mode | str = Mode.SPLIT,
                               max_traces: int = DEFAULT_MAX_TRACES) -> Classification:
    depth = default_depth(spec) if depth is None else depth
    mode = Mode(mode)
    if partition is None:
        partition = spec.partition or PartitionDescriptor(
            (), spec.attributes, adm_dependency(spec))
    problems = partition_problems(spec, partition)
    if problems:
        raise ScenarioError(problems)

    if mode is Mode.ATOMIC:
        window: Tuple[str, ...] = ()
        system = System(spec, Mode.ATOMIC)
    else:
        window = global_env_actions(spec, partition)
        system = System(spec, Mode.SPLIT, window_env=frozenset(window))
    report = search(system, depth, max_traces)
    reads_global = bool(partition.adm_dependency & partition.global_attrs)

    if isinstance(report.outcome, AbsentUpTo):
        verdict = AtomicityClass.ATOMIC
    elif isinstance(report.outcome, Witness):
        # Only global-only env steps fire in the window, so a witness means
        # admissibility reads a global attribute.
        assert reads_global or mode is Mode.ATOMIC
        verdict = (AtomicityClass.PARTIALLY_ATOMIC if partition.local_attrs
                   else AtomicityClass.SPLIT)
    else:
        raise AssertionError("search never returns Inconclusive")
    return Classification(spec.name, verdict, partition, report, window, reads_global)
