import pytest

from decision_boundary.atomic import PendingRequest, ProtocolError
from decision_boundary.kernel import Disposition
from decision_boundary.scenarios import builtin
from decision_boundary.split import (
    PreservationEvent,
    RecordedDecision,
    SplitError,
    SplitState,
    resolve_split,
    split_dec,
    split_dec_augmented,
    split_env,
    split_exec,
)

ALLOW, REFUSE, ESCALATE = Disposition.ALLOW, Disposition.REFUSE, Disposition.ESCALATE
WRITE, LOCK = "write(f)", "lock(f)"


@pytest.fixture(scope="module")
def filelock():
    return builtin("filelock")


def test_dec_records_allow(filelock):
    s = split_dec(filelock, SplitState("free-q0"), WRITE)
    assert s == SplitState("free-q0", RecordedDecision(WRITE, ALLOW, "free-q0"))


def test_dec_on_locked_file_records_refuse(filelock):
    s = split_dec(filelock, SplitState("locked-q0"), WRITE)
    assert s.recorded.disposition is REFUSE


def test_dec_escalation_goes_to_pending():
    spec = builtin("filelock-escalate")
    s = split_dec(spec, SplitState("free-q1"), WRITE)
    assert s.recorded is None
    assert s.pending == {PendingRequest("free-q1", WRITE)}


def test_second_dec_is_rejected(filelock):
    s = split_dec(filelock, SplitState("free-q0"), WRITE)
    with pytest.raises(SplitError):
        split_dec(filelock, s, WRITE)


def test_env_keeps_the_record(filelock):
    s = split_dec(filelock, SplitState("free-q0"), WRITE)
    after = split_env(filelock, s, LOCK)
    assert after.base == "locked-q0" and after.recorded == s.recorded
    # lock(f) on a locked file is a self-loop
    assert split_env(filelock, after, LOCK) == after


def test_two_env_steps_apply_in_order():
    spec = builtin("k8s-quota")
    s = split_dec(spec, SplitState(spec.initial), "create-pod")
    s = split_env(spec, s, "edit-pod-spec")
    s = split_env(spec, s, "update-resourcequota")
    assert s.base == "pending-invalid-exhausted"
    assert s.recorded.evaluated_in == "pending-valid-available"


def test_undeclared_env_step_is_rejected():
    spec = builtin("rbac-revoke")
    with pytest.raises(SplitError):
        split_env(spec, SplitState("none-clean"), "revoke")


def test_exec_after_env_violates(filelock):
    s = split_env(filelock, split_dec(filelock, SplitState("free-q0"), WRITE), LOCK)
    after, event = split_exec(filelock, s)
    assert event is PreservationEvent.VIOLATED
    assert after == SplitState("locked-q1")


def test_exec_without_interleaving_is_admissible(filelock):
    after, event = split_exec(filelock, split_dec(filelock, SplitState("free-q0"), WRITE))
    assert (after, event) == (SplitState("free-q1"), PreservationEvent.ADMISSIBLE)


def test_refused_record_never_fires(filelock):
    s = split_dec(filelock, SplitState("locked-q0"), WRITE)
    assert split_exec(filelock, s) == (SplitState("locked-q0"), PreservationEvent.NO_FIRE)


def test_exec_needs_a_record(filelock):
    with pytest.raises(SplitError):
        split_exec(filelock, SplitState("free-q0"))


# -- split resolution --------------------------------------------------------------------------

REQ = PendingRequest("free-q1", WRITE)


def test_split_resolution_gap(filelock):
    s = SplitState("free-q1", pending=frozenset({REQ}))
    s = resolve_split(filelock, s, REQ, ALLOW)
    assert s.pending == frozenset() and s.recorded.evaluated_in == "free-q1"
    s = split_env(filelock, s, LOCK)
    after, event = split_exec(filelock, s)
    assert event is PreservationEvent.VIOLATED
    assert after.base == "locked-q2"


def test_split_resolution_refuse(filelock):
    s = resolve_split(filelock, SplitState("free-q1", pending=frozenset({REQ})), REQ, REFUSE)
    assert s.pending == frozenset()
    assert split_exec(filelock, s) == (SplitState("free-q1"), PreservationEvent.NO_FIRE)


def test_split_resolution_without_interleaving(filelock):
    s = resolve_split(filelock, SplitState("free-q1", pending=frozenset({REQ})), REQ, ALLOW)
    assert split_exec(filelock, s)[1] is PreservationEvent.ADMISSIBLE


def test_split_resolution_of_non_pending_request(filelock):
    cur = SplitState("free-q1", pending=frozenset({PendingRequest("free-q0", WRITE)}))
    for verdict in (ALLOW, REFUSE):
        with pytest.raises(ProtocolError):
            resolve_split(filelock, cur, REQ, verdict)
    assert cur == SplitState("free-q1", pending=frozenset({PendingRequest("free-q0", WRITE)}))


# -- external store -------------------------------------------------------------------------------

def test_augmented_dec_reads_the_store():
    spec = builtin("opa-quota-store")
    s = split_dec_augmented(spec, SplitState("q0"), "write", spec.external)
    assert s.recorded.disposition is ALLOW
    s = split_env(spec, s, "exhaust-quota")
    assert split_exec(spec, s)[1] is PreservationEvent.VIOLATED


def test_fresh_store_value_refuses_at_dec():
    spec = builtin("opa-quota-store")
    s = split_dec_augmented(spec, SplitState("q2"), "write", spec.external)
    assert s.recorded.disposition is REFUSE


def test_augmented_without_interleaving_is_admissible():
    spec = builtin("opa-quota-store")
    s = split_dec_augmented(spec, SplitState("q1"), "write", spec.external)
    assert split_exec(spec, s)[1] is PreservationEvent.ADMISSIBLE
