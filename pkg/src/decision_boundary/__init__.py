"""Model checker for the decision boundary of governed agent systems.

A scenario is a finite labeled transition system with an admissibility
table, a decision table and a transition function. The package builds the
atomic and the split decision architecture over it, searches for a
trace that commits an inadmissible transition, and runs stochastic and
live concurrent experiments against both.
"""

from .atomic import (
    ExtendedState,
    PendingRequest,
    ProtocolError,
    Starved,
    VersionedStateCell,
    atomic_step,
    live_admit_and_commit,
    resolve_atomic,
)
from .harness import (
    AbsentUpTo,
    AtomicityClass,
    Classification,
    Inconclusive,
    SchedulerConfig,
    SchedulerKind,
    ViolationStats,
    Witness,
    WitnessReport,
    classify_partial_atomicity,
    run_stochastic,
    verify_escalation_closure,
    verify_external_state,
    verify_theorem,
)
from .kernel import (
    Disposition,
    ExternalStateSpec,
    PartitionDescriptor,
    ScenarioError,
    ScenarioSpec,
    check_consistency,
    check_nontriviality,
    derive_decision_from_adm,
)
from .live import run_live_race
from .model import (
    ActionLabel,
    Kind,
    Preserved,
    Trace,
    TransitionTable,
    Violated,
    check_preservation,
    validate_trace,
)
from .scenarios import builtin, load_scenario
from .split import RecordedDecision, SplitState, resolve_split, split_dec, split_env, split_exec
from .systems import Mode, System, enumerate_traces

__all__ = [
    "AbsentUpTo",
    "ActionLabel",
    "AtomicityClass",
    "Classification",
    "Disposition",
    "ExtendedState",
    "ExternalStateSpec",
    "Inconclusive",
    "Kind",
    "Mode",
    "PartitionDescriptor",
    "PendingRequest",
    "Preserved",
    "ProtocolError",
    "RecordedDecision",
    "ScenarioError",
    "ScenarioSpec",
    "SchedulerConfig",
    "SchedulerKind",
    "SplitState",
    "Starved",
    "System",
    "Trace",
    "TransitionTable",
    "VersionedStateCell",
    "Violated",
    "ViolationStats",
    "Witness",
    "WitnessReport",
    "atomic_step",
    "builtin",
    "check_consistency",
    "check_nontriviality",
    "check_preservation",
    "classify_partial_atomicity",
    "derive_decision_from_adm",
    "enumerate_traces",
    "live_admit_and_commit",
    "load_scenario",
    "resolve_atomic",
    "resolve_split",
    "run_live_race",
    "run_stochastic",
    "split_dec",
    "split_env",
    "split_exec",
    "validate_trace",
    "verify_escalation_closure",
    "verify_external_state",
    "verify_theorem",
]
