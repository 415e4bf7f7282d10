import json
import subprocess
import sys

import pytest

from decision_boundary.cli import run
from decision_boundary.harness import AtomicityClass, ViolationStats, Witness
from decision_boundary.report import (
    RunReport,
    config_from_dict,
    config_to_dict,
    report_from_dict,
    report_to_dict,
)
from decision_boundary.scenarios import SPLIT_BUILTINS, builtin_names
from decision_boundary.systems import Mode, System


def cli(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def structured(capsys, *argv):
    code, out, _ = cli(capsys, *argv, "--format", "structured")
    report = RunReport.from_json(out)
    assert report.exit_status == code
    return report


def test_verify_filelock_human(capsys):
    code, out, _ = cli(capsys, "verify", "--scenario", "filelock", "--depth", "4",
                       "--which", "theorem")
    assert code == 0
    assert "[split] witness of length 3" in out
    assert ">>  3  exec(write(f))[allow]" in out
    assert "Adm(locked-q0, write(f)) = false" in out
    assert "no violating trace up to depth 4 (31 traces explored)" in out


@pytest.mark.parametrize("name", sorted(builtin_names()))
def test_verify_theorem_exit_zero_for_every_builtin(capsys, name):
    report = structured(capsys, "verify", "--scenario", name)
    assert report.exit_status == 0
    split, atomic = report.reports
    assert isinstance(split.outcome, Witness)
    assert atomic.kind == "absent"


@pytest.mark.parametrize("name", sorted(builtin_names()))
def test_verify_escalation_exit_codes(capsys, name):
    report = structured(capsys, "verify", "--scenario", name, "--which", "escalation")
    if name == "filelock-escalate":
        assert report.exit_status == 0
    else:
        assert report.exit_status == 3
        assert "resolution unreachable" in report.message


@pytest.mark.parametrize("name", sorted(builtin_names()))
def test_verify_external_exit_codes(capsys, name):
    report = structured(capsys, "verify", "--scenario", name, "--which", "external")
    assert report.exit_status == (0 if name == "opa-quota-store" else 3)


def test_escalation_on_plain_scenario_prints_reason(capsys):
    code, out, _ = cli(capsys, "verify", "--scenario", "filelock", "--which", "escalation")
    assert code == 3 and "resolution unreachable" in out


def test_unknown_scenario_exits_two(capsys):
    code, _, err = cli(capsys, "verify", "--scenario", "nope")
    assert code == 2 and "nope" in err


def test_bad_arguments_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["verify", "--scenario", "filelock", "--which", "everything"])
    assert exc.value.code == 2
    assert cli(capsys, "race", "--scenario", "filelock", "--p", "1.5")[0] == 2
    assert cli(capsys, "race", "--scenario", "filelock", "--trials", "0")[0] == 2
    assert cli(capsys, "verify", "--scenario", "filelock", "--depth", "-1")[0] == 2


def test_mismatch_exits_one(capsys, tmp_path):
    # a supervisor that always refuses closes the resolution gap
    code, text, _ = cli(capsys, "export", "--scenario", "filelock-escalate")
    path = tmp_path / "refusing.scn"
    path.write_text(text.replace("initial free-q0", "initial free-q0\nsupervisor refuse"))
    report = structured(capsys, "verify", "--scenario", str(path), "--which", "escalation")
    assert report.exit_status == 1


def test_scenario_file_path(capsys, tmp_path):
    _, text, _ = cli(capsys, "export", "--scenario", "rbac-revoke")
    path = tmp_path / "rbac.scn"
    path.write_text(text)
    assert cli(capsys, "verify", "--scenario", str(path))[0] == 0
    bad = tmp_path / "bad.scn"
    bad.write_text(text.replace("initial editor-clean", "initial nowhere"))
    code, _, err = cli(capsys, "verify", "--scenario", str(bad))
    assert code == 2 and "nowhere" in err


# -- race -------------------------------------------------------------------------------------

def test_race_pinned_split_count(capsys):
    report = structured(capsys, "race", "--scenario", "filelock", "--mode", "split",
                        "--stochastic", "--p", "0.5", "--trials", "10000", "--seed", "7")
    assert report.exit_status == 0
    assert report.reports[0].violations == 7445


def test_race_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("ADB_SEED", "7")
    report = structured(capsys, "race", "--scenario", "filelock", "--mode", "split",
                        "--p", "0.5", "--trials", "200")
    assert report.reports[0].seed == 7
    monkeypatch.setenv("ADB_SEED", "x")
    assert cli(capsys, "race", "--scenario", "filelock", "--trials", "10")[0] == 2


def test_race_sequential_split_is_clean(capsys):
    report = structured(capsys, "race", "--scenario", "filelock", "--p", "0",
                        "--trials", "500")
    assert report.exit_status == 0
    assert [s.violations for s in report.reports] == [0, 0]


def test_race_live_atomic(capsys):
    report = structured(capsys, "race", "--scenario", "filelock", "--mode", "atomic",
                        "--live", "--trials", "400")
    assert report.exit_status == 0
    assert report.reports[0].violations == 0
    assert report.reports[0].replay_consistent


def test_race_live_single_worker(capsys):
    report = structured(capsys, "race", "--scenario", "filelock", "--live", "--trials", "100",
                        "--workers", "1", "--env-workers", "0")
    assert report.exit_status == 0


# -- classify -----------------------------------------------------------------------------------

@pytest.mark.parametrize("argv, verdict", [
    (["--scenario", "k8s-quota"], "PartiallyAtomic"),
    (["--scenario", "k8s-quota-local"], "Atomic"),
    (["--scenario", "k8s-quota", "--adm", "spec"], None),
    (["--scenario", "filelock", "--mode", "atomic"], "Atomic"),
    (["--scenario", "filelock"], "Split"),
    (["--scenario", "rbac-revoke"], "Split"),
    (["--scenario", "filelock", "--local", "locked,quota", "--global", ""], "Atomic"),
])
def test_classify(capsys, argv, verdict):
    code, out, err = cli(capsys, "classify", *argv)
    if verdict is None:
        # declaring less than admissibility reads is an ill-formed partition
        assert code == 2 and "ill-formed partition" in err
    else:
        assert code == 0
        assert out.splitlines()[1].endswith(f": {verdict}")


def test_classify_needs_a_partition(capsys, tmp_path):
    _, text, _ = cli(capsys, "export", "--scenario", "rbac-revoke")
    path = tmp_path / "nopart.scn"
    path.write_text("\n".join(l for l in text.splitlines() if not l.startswith("partition")))
    code, _, err = cli(capsys, "classify", "--scenario", str(path))
    assert code == 2 and "partition" in err
    assert cli(capsys, "classify", "--scenario", str(path), "--local", "resource")[0] == 2
    code, out, _ = cli(capsys, "classify", "--scenario", str(path),
                       "--local", "", "--global", "role,resource")
    assert code == 0 and "Split" in out


def test_list_and_export(capsys):
    code, out, _ = cli(capsys, "list")
    assert code == 0 and set(out.split()) == set(builtin_names())
    code, out, _ = cli(capsys, "export", "--scenario", "filelock")
    assert code == 0 and out.startswith("scenario filelock")


# -- structured output --------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["verify", "--scenario", "filelock-escalate", "--which", "escalation"],
    ["verify", "--scenario", "opa-quota-store", "--which", "external"],
    ["verify", "--scenario", "rbac-revoke", "--which", "escalation"],
    ["classify", "--scenario", "k8s-quota"],
    ["race", "--scenario", "filelock", "--trials", "50", "--seed", "3"],
    ["race", "--scenario", "filelock", "--trials", "40", "--live"],
])
def test_structured_output_round_trips(capsys, argv):
    code, out, _ = cli(capsys, *argv, "--format", "structured")
    report = RunReport.from_json(out)
    assert report.to_dict() == json.loads(out)
    assert RunReport.from_json(report.to_json()) == report
    assert report.command == argv + ["--format", "structured"]
    assert report.exit_status == code


def test_report_objects_round_trip():
    from decision_boundary.harness import classify_partial_atomicity, verify_theorem
    from decision_boundary.scenarios import builtin

    for name in SPLIT_BUILTINS:
        for r in verify_theorem(builtin(name)):
            assert report_from_dict(json.loads(json.dumps(report_to_dict(r)))) == r
    c = classify_partial_atomicity(builtin("k8s-quota"))
    back = report_from_dict(json.loads(json.dumps(report_to_dict(c))))
    assert back == c and back.verdict is AtomicityClass.PARTIALLY_ATOMIC
    stats = ViolationStats("x", "split", "stochastic", 10, 3, 5, 0.5, 1, details={"a": 1})
    assert report_from_dict(report_to_dict(stats)) == stats


def test_every_reachable_configuration_round_trips():
    from decision_boundary.scenarios import builtin

    spec = builtin("filelock-escalate")
    for system in (System(spec, Mode.SPLIT), System(spec, Mode.ATOMIC),
                   System(spec, Mode.ATOMIC, resolution=Mode.SPLIT)):
        for config in system.reachable():
            assert config_from_dict(json.loads(json.dumps(config_to_dict(config)))) == config
    assert config_from_dict(config_to_dict("free-q0")) == "free-q0"


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "decision_boundary.cli", "verify",
                           "--scenario", "iam-bucket", "--depth", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "exec(s3-write)[allow]" in proc.stdout
