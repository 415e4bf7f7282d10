"""Builtin scenarios.

Each one models a governance mechanism at exactly the fidelity its
violating trace needs: a decision evaluated in one state, one environment
step, and the execution landing in a state where the action is no longer
admissible.
"""

from __future__ import annotations

from itertools import product
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

from ..kernel import (
    Disposition,
    ExternalStateSpec,
    PartitionDescriptor,
    ScenarioSpec,
    adm_dependency,
    derive_decision_from_adm,
)

Attrs = Dict[str, str]


def product_scenario(
    name: str,
    attributes: Mapping[str, Sequence[str]],
    initial: Attrs,
    agent: Mapping[str, Tuple[Callable[[Attrs], bool], Callable[[Attrs], Attrs]]],
    env: Mapping[str, Callable[[Attrs], Optional[Attrs]]],
    state_name: Callable[[Attrs], str],
    escalate_on: Optional[Callable[[Attrs, str], bool]] = None,
    partition: Optional[PartitionDescriptor] = None,
    external: Optional[Callable[[Dict[str, Attrs]], ExternalStateSpec]] = None,
) -> ScenarioSpec:
    """Tabulate a scenario over the full product of attribute domains.

    ``agent`` maps each action to ``(adm, apply)`` over attribute dicts;
    ``env`` maps each environment action to a function returning the
    successor attributes, or ``None`` where the action is disabled.
    """
    names = list(attributes)
    states: Dict[str, Attrs] = {}
    for values in product(*(attributes[n] for n in names)):
        attrs = dict(zip(names, values))
        states[state_name(attrs)] = attrs
    by_attrs = {tuple(sorted(a.items())): sid for sid, a in states.items()}

    def lookup(attrs: Attrs) -> str:
        return by_attrs[tuple(sorted(attrs.items()))]

    adm, transition = {}, {}
    for sid, attrs in states.items():
        for a, (ok, apply) in agent.items():
            adm[(sid, a)] = bool(ok(attrs))
            transition[(sid, a)] = lookup(apply(dict(attrs)))
    env_rows = set()
    for sid, attrs in states.items():
        for e, fn in env.items():
            out = fn(dict(attrs))
            if out is not None:
                env_rows.add((sid, e, lookup(out)))

    if escalate_on is None:
        decision = derive_decision_from_adm(adm)
    else:
        decision = derive_decision_from_adm(adm, lambda s, a: escalate_on(states[s], a))

    return ScenarioSpec(
        name=name,
        attributes={n: tuple(attributes[n]) for n in names},
        states=states,
        initial=lookup(initial),
        agent_actions=tuple(agent),
        env_actions=tuple(env),
        env_transitions=frozenset(env_rows),
        adm=adm,
        decision=decision,
        transition=transition,
        external=external(states) if external else None,
        partition=partition,
    )


# -- filelock ----------------------------------------------------------------

QUOTA_MAX = 2


def _filelock_name(s: Attrs) -> str:
    return f"{'free' if s['locked'] == 'none' else 'locked'}-q{s['quota']}"


def _filelock_write_ok(s: Attrs) -> bool:
    return s["locked"] == "none" and int(s["quota"]) < QUOTA_MAX


def _bump_quota(s: Attrs) -> Attrs:
    return {**s, "quota": str(min(int(s["quota"]) + 1, QUOTA_MAX))}


def filelock(escalate: bool = False) -> ScenarioSpec:
    return product_scenario(
        "filelock-escalate" if escalate else "filelock",
        {"locked": ("none", "f"), "quota": tuple(str(q) for q in range(QUOTA_MAX + 1))},
        {"locked": "none", "quota": "0"},
        agent={"write(f)": (_filelock_write_ok, _bump_quota)},
        env={"lock(f)": lambda s: {**s, "locked": "f"}},
        state_name=_filelock_name,
        escalate_on=(lambda s, a: s["quota"] == "1") if escalate else None,
    )


# -- RBAC role revocation ----------------------------------------------------

def rbac_revoke() -> ScenarioSpec:
    return product_scenario(
        "rbac-revoke",
        {"role": ("editor", "none"), "resource": ("clean", "modified")},
        {"role": "editor", "resource": "clean"},
        agent={"write(r)": (lambda s: s["role"] == "editor",
                            lambda s: {**s, "resource": "modified"})},
        env={"revoke": lambda s: {**s, "role": "none"} if s["role"] == "editor" else None},
        state_name=lambda s: f"{s['role']}-{s['resource']}",
    )


# -- OPA quota, with and without an external store ---------------------------

def _quota_scenario(name: str, action: str, env_action: str,
                    external: bool = False) -> ScenarioSpec:
    levels = tuple(str(q) for q in range(QUOTA_MAX + 1))

    def store(states: Dict[str, Attrs]) -> ExternalStateSpec:
        return ExternalStateSpec(
            values=levels,
            read={sid: attrs["used"] for sid, attrs in states.items()},
            effects={env_action: {v: str(QUOTA_MAX) for v in levels
                                  if int(v) < QUOTA_MAX}},
            decide={(v, action): Disposition.ALLOW if int(v) < QUOTA_MAX
                    else Disposition.REFUSE for v in levels},
        )

    return product_scenario(
        name,
        {"used": levels},
        {"used": "0"},
        agent={action: (lambda s: int(s["used"]) < QUOTA_MAX,
                        lambda s: {"used": str(min(int(s["used"]) + 1, QUOTA_MAX))})},
        # Another client's request takes whatever quota is left.
        env={env_action: lambda s: ({"used": str(QUOTA_MAX)}
                                    if int(s["used"]) < QUOTA_MAX else None)},
        state_name=lambda s: f"q{s['used']}",
        external=store if external else None,
    )


def opa_quota() -> ScenarioSpec:
    return _quota_scenario("opa-quota", "write", "exhaust-quota")


def opa_quota_store() -> ScenarioSpec:
    return _quota_scenario("opa-quota-store", "write", "exhaust-quota", external=True)


def cedar_quota() -> ScenarioSpec:
    """The OPA quota model under Cedar's vocabulary; the structure is identical."""
    return _quota_scenario("cedar-quota", "invoke", "entity-update")


# -- AWS IAM bucket policy change ---------------------------------------------

def iam_bucket() -> ScenarioSpec:
    return product_scenario(
        "iam-bucket",
        {"policy": ("permits", "denies"), "object": ("absent", "written")},
        {"policy": "permits", "object": "absent"},
        agent={"s3-write": (lambda s: s["policy"] == "permits",
                            lambda s: {**s, "object": "written"})},
        env={"change-bucket-policy":
             lambda s: {**s, "policy": "denies"} if s["policy"] == "permits" else None},
        state_name=lambda s: f"{s['policy']}-{s['object']}",
    )


# -- Kubernetes admission with a namespace ResourceQuota -----------------------

def k8s_quota(adm_reads_quota: bool = True) -> ScenarioSpec:
    """Pod admission: per-object fields are local, the namespace quota is global.

    With ``adm_reads_quota=False`` admissibility only looks at the pod spec,
    which is the configuration where partial atomicity is enough.
    """
    if adm_reads_quota:
        ok = lambda s: s["spec"] == "valid" and s["quota"] == "available"  # noqa: E731
        reads = ("spec", "quota")
    else:
        ok = lambda s: s["spec"] == "valid"  # noqa: E731
        reads = ("spec",)
    return product_scenario(
        "k8s-quota" if adm_reads_quota else "k8s-quota-local",
        {"pod": ("pending", "bound"), "spec": ("valid", "invalid"),
         "quota": ("available", "exhausted")},
        {"pod": "pending", "spec": "valid", "quota": "available"},
        agent={"create-pod": (ok, lambda s: {**s, "pod": "bound"})},
        env={
            "edit-pod-spec":
                lambda s: {**s, "spec": "invalid"} if s["spec"] == "valid" else None,
            "update-resourcequota":
                lambda s: {**s, "quota": "exhausted"} if s["quota"] == "available" else None,
        },
        state_name=lambda s: f"{s['pod']}-{s['spec']}-{s['quota']}",
        partition=PartitionDescriptor(("pod", "spec"), ("quota",), reads),
    )


def all_global(spec: ScenarioSpec) -> ScenarioSpec:
    """Attach the partition with no local part: a single shared state, nothing fused."""
    return spec.replace(partition=PartitionDescriptor((), spec.attributes, adm_dependency(spec)))


BUILTINS: Dict[str, Callable[[], ScenarioSpec]] = {
    "filelock": lambda: all_global(filelock()),
    "filelock-escalate": lambda: all_global(filelock(escalate=True)),
    "rbac-revoke": lambda: all_global(rbac_revoke()),
    "opa-quota": lambda: all_global(opa_quota()),
    "opa-quota-store": lambda: all_global(opa_quota_store()),
    "iam-bucket": lambda: all_global(iam_bucket()),
    "k8s-quota": k8s_quota,
    "k8s-quota-local": lambda: k8s_quota(adm_reads_quota=False),
    "cedar-quota": lambda: all_global(cedar_quota()),
}

# Builtins whose plain construction is a split system with a violating trace.
SPLIT_BUILTINS = ("filelock", "rbac-revoke", "opa-quota", "iam-bucket")


def builtin(name: str) -> ScenarioSpec:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin scenario {name!r}; "
                       f"known: {', '.join(sorted(BUILTINS))}") from None
    return factory()


def builtin_names() -> Iterable[str]:
    return tuple(BUILTINS)
