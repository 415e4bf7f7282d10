import threading

import pytest

from decision_boundary.atomic import (
    Commit,
    ExtendedState,
    PendingRequest,
    ProtocolError,
    Starved,
    VersionedStateCell,
    atomic_step,
    live_admit_and_commit,
    resolve_atomic,
)
from decision_boundary.kernel import Disposition
from decision_boundary.model import env
from decision_boundary.scenarios import builtin, builtin_names

ALLOW, REFUSE, ESCALATE = Disposition.ALLOW, Disposition.REFUSE, Disposition.ESCALATE
WRITE = "write(f)"


def test_allow_on_free_file():
    spec = builtin("filelock")
    out = atomic_step(spec, ExtendedState("free-q0"), WRITE)
    assert out == (ALLOW, ExtendedState("free-q1"))
    assert spec.states["free-q1"] == {"locked": "none", "quota": "1"}


def test_refuse_on_locked_file():
    spec = builtin("filelock")
    cur = ExtendedState("locked-q0")
    assert atomic_step(spec, cur, WRITE) == (REFUSE, cur)


def test_escalate_at_quota_one():
    spec = builtin("filelock-escalate")
    out = atomic_step(spec, ExtendedState("free-q1"), WRITE)
    assert out == (ESCALATE, ExtendedState("free-q1", frozenset({PendingRequest("free-q1", WRITE)})))


def test_repeated_escalation_collapses_into_one_entry():
    spec = builtin("filelock-escalate")
    once = atomic_step(spec, ExtendedState("free-q1"), WRITE).next
    assert atomic_step(spec, once, WRITE).next == once


@pytest.mark.parametrize("name", sorted(builtin_names()))
def test_shape_law_over_every_state(name):
    spec = builtin(name)
    extra = frozenset({PendingRequest(spec.initial, spec.agent_actions[0])})
    for s in spec.states:
        for pending in (frozenset(), extra):
            cur = ExtendedState(s, pending)
            for a in spec.agent_actions:
                d, nxt = atomic_step(spec, cur, a)
                assert d is spec.decision[(s, a)]
                if d is ALLOW:
                    assert nxt == ExtendedState(spec.transition[(s, a)], pending)
                    # consistent tables never allow an inadmissible step
                    assert spec.adm[(s, a)]
                elif d is REFUSE:
                    assert nxt == cur
                else:
                    assert nxt == ExtendedState(s, pending | {PendingRequest(s, a)})
                assert pending <= nxt.pending


def test_unknown_action_is_rejected():
    with pytest.raises(ValueError):
        atomic_step(builtin("filelock"), ExtendedState("free-q0"), "lock(f)")


# -- resolution ------------------------------------------------------------------------------

REQ = PendingRequest("free-q0", WRITE)


def test_resolve_refuse_keeps_base():
    spec = builtin("filelock")
    cur = ExtendedState("locked-q1", frozenset({REQ}))
    assert resolve_atomic(spec, cur, REQ, REFUSE) == ExtendedState("locked-q1")


def test_resolve_allow_fires_in_current_state():
    spec = builtin("filelock")
    cur = ExtendedState("free-q1", frozenset({REQ}))
    assert resolve_atomic(spec, cur, REQ, ALLOW) == ExtendedState("free-q2")


def test_resolve_of_non_pending_request_is_a_protocol_error():
    spec = builtin("filelock")
    cur = ExtendedState("free-q1", frozenset({PendingRequest("free-q1", WRITE)}))
    snapshot = cur
    for verdict in (ALLOW, REFUSE):
        with pytest.raises(ProtocolError):
            resolve_atomic(spec, cur, REQ, verdict)
    assert cur == snapshot


def test_resolve_rejects_escalate_verdict():
    spec = builtin("filelock")
    with pytest.raises(ValueError):
        resolve_atomic(spec, ExtendedState("free-q0", frozenset({REQ})), REQ, ESCALATE)


# -- versioned cell ------------------------------------------------------------------------------

def test_commit_against_stale_version_is_refused():
    cell = VersionedStateCell("a")
    assert cell.commit(0, "b", env("e"))
    assert not cell.commit(0, "c", env("e"))
    assert cell.read() == ("b", 1)
    assert cell.history == [Commit(1, env("e"), "a", "b")]


def test_single_threaded_admit_matches_atomic_step():
    spec = builtin("filelock")
    cell = VersionedStateCell(ExtendedState(spec.initial))
    out = live_admit_and_commit(cell, spec, WRITE)
    assert out == atomic_step(spec, ExtendedState(spec.initial), WRITE)
    assert cell.read() == (out.next, 1)


def test_env_commit_in_the_window_forces_a_fresh_decision():
    spec = builtin("filelock")
    cell = VersionedStateCell(ExtendedState("free-q0"))
    fired = []

    def pause():
        if not fired:
            fired.append(True)
            state, version = cell.read()
            assert cell.commit(version, ExtendedState("locked-q0"), env("lock(f)"))

    out = live_admit_and_commit(cell, spec, WRITE, pause=pause)
    assert out == (REFUSE, ExtendedState("locked-q0"))
    assert [c.label.kind.name for c in cell.history] == ["ENV", "AGENT"]
    assert cell.history[-1].before == ExtendedState("locked-q0")


def test_starvation_is_reported():
    spec = builtin("filelock")
    cell = VersionedStateCell(ExtendedState("free-q0"))

    def always_conflict():
        state, version = cell.read()
        cell.commit(version, state, env("lock(f)"))

    with pytest.raises(Starved) as err:
        live_admit_and_commit(cell, spec, WRITE, budget=5, pause=always_conflict)
    assert err.value.attempts == 5


def test_versions_increase_under_contention():
    cell = VersionedStateCell(0)

    def bump():
        for _ in range(200):
            cell.update(lambda n: (n + 1, env("inc")), budget=10_000)

    threads = [threading.Thread(target=bump) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert cell.read() == (800, 800)
    assert [c.version for c in cell.history] == list(range(1, 801))
    assert all(c.after == c.before + 1 for c in cell.history)
