from collections import Counter

import pytest

from decision_boundary.atomic import ExtendedState
from decision_boundary.kernel import Disposition
from decision_boundary.model import (
    ActionLabel,
    Kind,
    Preserved,
    Trace,
    TransitionTable,
    UndeclaredError,
    Violated,
    agent,
    check_preservation,
    dec,
    env,
    exec_,
    first_invalid_step,
    validate_trace,
)
from decision_boundary.scenarios import builtin, builtin_names
from decision_boundary.split import RecordedDecision, SplitState
from decision_boundary.systems import Mode, System, TraceOverflow, enumerate_traces

ALLOW = Disposition.ALLOW
WRITE, LOCK = "write(f)", "lock(f)"


@pytest.fixture(scope="module")
def filelock():
    return builtin("filelock")


def sigma_star(spec):
    rec = RecordedDecision(WRITE, ALLOW, "free-q0")
    return Trace.of(
        SplitState("free-q0"), dec(WRITE, ALLOW), SplitState("free-q0", rec),
        env(LOCK), SplitState("locked-q0", rec),
        exec_(WRITE, ALLOW), SplitState("locked-q1"),
    )


# -- traces and validation ---------------------------------------------------------

def test_filelock_witness_trace_validates(filelock):
    table = System(filelock, Mode.SPLIT).table()
    assert validate_trace(sigma_star(filelock), table)


def test_lone_initial_state_is_a_valid_trace(filelock):
    table = TransitionTable.from_scenario(filelock)
    t = Trace(("free-q0",))
    assert len(t) == 0
    assert validate_trace(t, table)


def test_non_row_triple_is_rejected_at_its_index(filelock):
    table = TransitionTable.from_scenario(filelock)
    # T(free-q0, write) is free-q1, so staying put is not a row
    t = Trace.of("free-q0", agent(WRITE), "free-q0")
    assert first_invalid_step(t, table) == 1
    assert not validate_trace(t, table)
    good = Trace.of("free-q0", agent(WRITE), "free-q1", env(LOCK), "locked-q1",
                    agent(WRITE), "free-q0")
    assert first_invalid_step(good, table) == 3


def test_undeclared_names_are_rejected_with_index(filelock):
    table = TransitionTable.from_scenario(filelock)
    with pytest.raises(UndeclaredError) as err:
        validate_trace(Trace.of("free-q0", env("unlock(f)"), "free-q0"), table)
    assert err.value.index == 1
    with pytest.raises(UndeclaredError) as err:
        validate_trace(Trace.of("free-q0", agent(WRITE), "nowhere"), table)
    assert err.value.index == 1


def test_trace_shape_is_checked():
    with pytest.raises(ValueError):
        Trace(("a", "b"), ())


def test_transition_table_rejects_nondeterministic_governed_rows():
    with pytest.raises(ValueError):
        TransitionTable(frozenset({("s", agent("a"), "t"), ("s", agent("a"), "u")}))
    # env rows may branch
    TransitionTable(frozenset({("s", env("e"), "t"), ("s", env("e"), "u")}))


def test_label_rendering_and_round_trip():
    label = ActionLabel(Kind.EXEC, WRITE, ALLOW, "free-q1")
    assert str(label) == "exec(resolve(write(f)@free-q1))[allow]"
    assert str(dec(WRITE, ALLOW)) == "dec(write(f))[allow]"
    for lab in (label, env(LOCK), agent(WRITE), dec(WRITE, Disposition.ESCALATE)):
        assert ActionLabel.from_dict(lab.to_dict()) == lab


# -- preservation --------------------------------------------------------------------

def test_sigma_star_violates_at_step_three(filelock):
    assert check_preservation(sigma_star(filelock), filelock.adm) == Violated(3, "locked-q0", WRITE)


def test_admissible_write_is_preserved(filelock):
    t = Trace.of("free-q0", agent(WRITE), "free-q1")
    verdict = check_preservation(t, filelock.adm)
    assert isinstance(verdict, Preserved) and verdict


def test_env_only_trace_is_preserved(filelock):
    t = Trace.of("free-q0", env(LOCK), "locked-q0", env(LOCK), "locked-q0")
    assert check_preservation(t, filelock.adm)


def test_dec_and_refused_steps_never_violate(filelock):
    t = Trace.of(
        ExtendedState("locked-q0"), agent(WRITE, Disposition.REFUSE), ExtendedState("locked-q0"))
    assert check_preservation(t, filelock.adm)
    t = Trace.of(SplitState("locked-q0"), dec(WRITE, Disposition.REFUSE),
                 SplitState("locked-q0", RecordedDecision(WRITE, Disposition.REFUSE, "locked-q0")))
    assert check_preservation(t, filelock.adm)


def test_violation_is_monotone_under_extension(filelock):
    sys_ = System(filelock, Mode.SPLIT)
    for t in sys_.traces(5):
        verdict = check_preservation(t, filelock.adm)
        if isinstance(verdict, Violated):
            for n in range(verdict.index, len(t) + 1):
                assert check_preservation(t.prefix(n), filelock.adm) == verdict


# -- enumeration ----------------------------------------------------------------------

def brute_force_count(spec, depth):
    """Count atomic traces straight from the scenario tables.

    Arcs out of a state: one decided arc per agent action (Allow moves
    through T, otherwise the base stays) and one per env row.
    """
    def arcs(s, pending):
        out = []
        for a in spec.agent_actions:
            d = spec.decision[(s, a)]
            if d is Disposition.ALLOW:
                out.append((spec.transition[(s, a)], pending))
            elif d is Disposition.REFUSE:
                out.append((s, pending))
            else:
                out.append((s, pending | {(s, a)}))
        for r in pending:
            verdict_allows = spec.adm[(s, r[1])]
            out.append((spec.transition[(s, r[1])] if verdict_allows else s, pending - {r}))
        for (src, _, t) in spec.env_transitions:
            if src == s:
                out.append((t, pending))
        return out

    def count(s, pending, d):
        if d == 0:
            return 1
        return 1 + sum(count(t, p, d - 1) for t, p in arcs(s, pending))

    return count(spec.initial, frozenset(), depth)


def test_filelock_atomic_depth_four_count(filelock):
    # two arcs out of every filelock state: write(f) and lock(f)
    assert brute_force_count(filelock, 4) == 1 + 2 + 4 + 8 + 16 == 31
    assert sum(1 for _ in enumerate_traces(filelock, "atomic", 4)) == 31


@pytest.mark.parametrize("name", ["filelock", "filelock-escalate", "rbac-revoke", "k8s-quota"])
@pytest.mark.parametrize("depth", [0, 1, 3])
def test_atomic_count_matches_brute_force(name, depth):
    spec = builtin(name)
    assert sum(1 for _ in enumerate_traces(spec, "atomic", depth)) == brute_force_count(spec, depth)


def test_depth_zero_is_the_initial_state(filelock):
    traces = list(enumerate_traces(filelock, "atomic", 0))
    assert traces == [Trace((ExtendedState("free-q0"),))]


def test_split_depth_three_contains_sigma_star(filelock):
    assert sigma_star(filelock) in set(enumerate_traces(filelock, "split", 3))


@pytest.mark.parametrize("mode", ["atomic", "split"])
def test_enumeration_is_deterministic_and_duplicate_free(filelock, mode):
    a = list(enumerate_traces(filelock, mode, 4))
    b = list(enumerate_traces(filelock, mode, 4))
    assert a == b
    assert not [t for t, n in Counter(a).items() if n > 1]


def test_enumeration_order_puts_agent_before_env(filelock):
    first_steps = [t.labels[0] for t in enumerate_traces(filelock, "atomic", 1) if len(t)]
    assert [l.kind for l in first_steps] == [Kind.AGENT, Kind.ENV]


@pytest.mark.parametrize("mode", ["atomic", "split"])
def test_prefix_closure(filelock, mode):
    traces = set(enumerate_traces(filelock, mode, 4))
    for t in traces:
        for n in range(len(t)):
            assert t.prefix(n) in traces


@pytest.mark.parametrize("name", sorted(builtin_names()))
def test_label_kinds_per_construction(name):
    spec = builtin(name)
    for t in enumerate_traces(spec, "atomic", 4):
        assert all(l.kind in (Kind.AGENT, Kind.ENV) for l in t.labels)
    for t in enumerate_traces(spec, "split", 4):
        assert all(l.kind is not Kind.AGENT for l in t.labels)


def test_enumerated_traces_validate_against_their_table(filelock):
    sys_ = System(filelock, Mode.SPLIT)
    table = sys_.table()
    assert all(validate_trace(t, table) for t in sys_.traces(4))


def test_overflow_guard_reports_partial_count(filelock):
    with pytest.raises(TraceOverflow) as err:
        list(enumerate_traces(filelock, "split", 8, max_traces=50))
    assert err.value.explored >= 50
    assert err.value.cap == 50
