"""Line-oriented scenario files.

One statement per line, whitespace-separated tokens, ``#`` starts a
comment. Every table is written out row by row; there is no expression
language. See ``docs/scenario-format.md`` for the grammar.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from ..kernel import (
    Disposition,
    ExternalStateSpec,
    PartitionDescriptor,
    ScenarioError,
    ScenarioSpec,
    derive_decision_from_adm,
)

_TOKEN = re.compile(r"\S+")
_BOOL = {"true": True, "false": False}


class ParseError(ScenarioError):
    def __init__(self, line: int, column: int, message: str, source: str = "<text>"):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


class _Tok(str):
    col: int

    def __new__(cls, text: str, col: int):
        obj = super().__new__(cls, text)
        obj.col = col
        return obj


def _tokenize(line: str) -> List[_Tok]:
    toks = []
    for m in _TOKEN.finditer(line):
        if m.group().startswith("#"):
            break
        toks.append(_Tok(m.group(), m.start() + 1))
    return toks


# statement -> number of arguments (None: one or more)
_ARITY = {
    "scenario": 1, "attribute": None, "state": None, "initial": 1,
    "agent": 1, "env": 1, "adm": 3, "decide": 3, "escalate": 2, "apply": 3,
    "envstep": 3, "supervisor": 1,
}
_EXTERNAL_ARITY = {"values": None, "read": 2, "effect": 3, "decide": 3}
_PARTITION_KINDS = ("local", "global", "adm")


def loads(text: str, source: str = "<text>") -> ScenarioSpec:
    name: Optional[str] = None
    attributes: Dict[str, Tuple[str, ...]] = {}
    states: Dict[str, Dict[str, str]] = {}
    initial: Optional[str] = None
    agents: List[str] = []
    envs: List[str] = []
    env_rows = set()
    adm: Dict[Tuple[str, str], bool] = {}
    decision: Dict[Tuple[str, str], Disposition] = {}
    escalations = set()
    transition: Dict[Tuple[str, str], str] = {}
    supervisor = "adm"
    ext_values: Optional[Tuple[str, ...]] = None
    ext_read: Dict[str, str] = {}
    ext_effects: Dict[str, Dict[str, str]] = {}
    ext_decide: Dict[Tuple[str, str], Disposition] = {}
    part: Dict[str, Tuple[str, ...]] = {}
    seen_external = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokenize(raw)
        if not toks:
            continue

        def fail(tok, msg):
            raise ParseError(lineno, tok.col, msg, source)

        head, args = toks[0], toks[1:]

        if head == "external":
            seen_external = True
            if not args or args[0] not in _EXTERNAL_ARITY:
                fail(args[0] if args else head, "expected external values|read|effect|decide")
            sub, rest = args[0], args[1:]
            want = _EXTERNAL_ARITY[sub]
            if (want is None and not rest) or (want is not None and len(rest) != want):
                fail(sub, f"external {sub}: wrong number of fields")
            if sub == "values":
                if ext_values is not None:
                    fail(sub, "external values declared twice")
                ext_values = tuple(rest)
            elif sub == "read":
                if rest[0] in ext_read:
                    fail(rest[0], f"duplicate external read for {rest[0]}")
                ext_read[str(rest[0])] = str(rest[1])
            elif sub == "effect":
                update = ext_effects.setdefault(str(rest[0]), {})
                if rest[1] in update:
                    fail(rest[1], "duplicate external effect row")
                update[str(rest[1])] = str(rest[2])
            else:
                key = (str(rest[0]), str(rest[1]))
                if key in ext_decide:
                    fail(rest[0], "duplicate external decide row")
                ext_decide[key] = _disposition(rest[2], fail)
            continue

        if head == "partition":
            if len(args) < 1 or args[0] not in _PARTITION_KINDS:
                fail(args[0] if args else head, "expected partition local|global|adm")
            if args[0] in part:
                fail(args[0], f"partition {args[0]} declared twice")
            part[str(args[0])] = tuple(map(str, args[1:]))
            continue

        if head not in _ARITY:
            fail(head, f"unknown statement {head!r}")
        want = _ARITY[head]
        if (want is None and not args) or (want is not None and len(args) != want):
            fail(head, f"{head}: expected {want or 'one or more'} fields, got {len(args)}")

        if head == "scenario":
            if name is not None:
                fail(head, "scenario name declared twice")
            name = str(args[0])
        elif head == "attribute":
            if args[0] in attributes:
                fail(args[0], f"attribute {args[0]} declared twice")
            if len(args) < 2:
                fail(head, "attribute needs at least one value")
            attributes[str(args[0])] = tuple(map(str, args[1:]))
        elif head == "state":
            sid = str(args[0])
            if sid in states:
                fail(args[0], f"state {sid} declared twice")
            attrs = {}
            for tok in args[1:]:
                key, eq, value = tok.partition("=")
                if not eq:
                    fail(tok, "expected attribute=value")
                if key not in attributes:
                    fail(tok, f"undeclared attribute {key!r}")
                if value not in attributes[key]:
                    fail(tok, f"{value!r} is outside the domain of {key}")
                if key in attrs:
                    fail(tok, f"attribute {key} assigned twice")
                attrs[key] = value
            missing = [a for a in attributes if a not in attrs]
            if missing:
                fail(args[0], f"state {sid} leaves attributes unassigned: {', '.join(missing)}")
            states[sid] = attrs
        elif head == "initial":
            if initial is not None:
                fail(head, "initial state declared twice")
            initial = _state(args[0], states, fail)
        elif head in ("agent", "env"):
            act = str(args[0])
            if act in agents or act in envs:
                kind = "agent" if act in agents else "env"
                msg = (f"action {act} declared twice" if kind == head else
                       f"action {act} is both agent and env")
                fail(args[0], msg)
            (agents if head == "agent" else envs).append(act)
        elif head in ("adm", "decide", "apply", "escalate"):
            s = _state(args[0], states, fail)
            a = _named(args[1], agents, "agent action", fail)
            key = (s, a)
            if head == "adm":
                if key in adm:
                    fail(args[0], f"duplicate adm row ({s}, {a})")
                if args[2] not in _BOOL:
                    fail(args[2], "expected true or false")
                adm[key] = _BOOL[args[2]]
            elif head == "decide":
                if key in decision:
                    fail(args[0], f"duplicate decide row ({s}, {a})")
                decision[key] = _disposition(args[2], fail)
            elif head == "escalate":
                escalations.add(key)
            else:
                if key in transition:
                    fail(args[0], f"duplicate apply row ({s}, {a})")
                transition[key] = _state(args[2], states, fail)
        elif head == "envstep":
            s = _state(args[0], states, fail)
            e = _named(args[1], envs, "env action", fail)
            env_rows.add((s, e, _state(args[2], states, fail)))
        elif head == "supervisor":
            if args[0] not in ("adm", "refuse"):
                fail(args[0], "supervisor is adm or refuse")
            supervisor = str(args[0])

    if name is None:
        raise ParseError(1, 1, "missing 'scenario <name>'", source)
    if initial is None:
        raise ParseError(1, 1, "missing 'initial <state>'", source)
    if escalations and decision:
        raise ScenarioError(f"{source}: use either decide rows or escalate rows, not both")
    if not decision:
        decision = derive_decision_from_adm(adm, lambda s, a: (s, a) in escalations)

    external = None
    if seen_external:
        external = ExternalStateSpec(ext_values or (), ext_read, ext_effects, ext_decide)
    partition = None
    if part:
        absent = [k for k in _PARTITION_KINDS if k not in part]
        if absent:
            raise ScenarioError(f"{source}: partition block lacks: {', '.join(absent)}")
        partition = PartitionDescriptor(part["local"], part["global"], part["adm"])

    try:
        return ScenarioSpec(
            name=name, attributes=attributes, states=states, initial=initial,
            agent_actions=tuple(agents), env_actions=tuple(envs),
            env_transitions=frozenset(env_rows), adm=adm, decision=decision,
            transition=transition, external=external, partition=partition,
            supervisor=supervisor,
        )
    except ScenarioError as err:
        raise ScenarioError([f"{source}: {p}" for p in err.problems]) from None


def _state(tok, states, fail) -> str:
    if tok not in states:
        fail(tok, f"undeclared state {tok!r}")
    return str(tok)


def _named(tok, names, what, fail) -> str:
    if tok not in names:
        fail(tok, f"undeclared {what} {tok!r}")
    return str(tok)


def _disposition(tok, fail) -> Disposition:
    try:
        return Disposition.parse(tok)
    except ValueError:
        fail(tok, "expected allow, refuse or escalate")
        raise  # unreachable


def load_scenario(path: Union[str, Path]) -> ScenarioSpec:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), source=str(path))


def dumps(spec: ScenarioSpec) -> str:
    out = [f"scenario {spec.name}", ""]
    for attr, values in spec.attributes.items():
        out.append(f"attribute {attr} {' '.join(values)}")
    for sid, attrs in spec.states.items():
        out.append(" ".join(["state", sid] + [f"{k}={attrs[k]}" for k in spec.attributes if k in attrs]))
    out.append(f"initial {spec.initial}")
    if spec.supervisor != "adm":
        out.append(f"supervisor {spec.supervisor}")
    out.append("")
    out += [f"agent {a}" for a in spec.agent_actions]
    out += [f"env {e}" for e in spec.env_actions]
    out.append("")
    for sid in spec.states:
        for a in spec.agent_actions:
            out.append(f"adm {sid} {a} {'true' if spec.adm[(sid, a)] else 'false'}")
            out.append(f"decide {sid} {a} {spec.decision[(sid, a)].value}")
            out.append(f"apply {sid} {a} {spec.transition[(sid, a)]}")
    out.append("")
    for s, e, t in sorted(spec.env_transitions):
        out.append(f"envstep {s} {e} {t}")
    ext = spec.external
    if ext is not None:
        out.append("")
        out.append("external values " + " ".join(ext.values))
        for sid in spec.states:
            if sid in ext.read:
                out.append(f"external read {sid} {ext.read[sid]}")
        for e, update in ext.effects.items():
            for src, dst in update.items():
                out.append(f"external effect {e} {src} {dst}")
        for (v, a), d in ext.decide.items():
            out.append(f"external decide {v} {a} {d.value}")
    p = spec.partition
    if p is not None:
        out.append("")
        order = list(spec.attributes)
        for kind, attrs in (("local", p.local_attrs), ("global", p.global_attrs),
                            ("adm", p.adm_dependency)):
            out.append(" ".join(["partition", kind] + [a for a in order if a in attrs]))
    return "\n".join(out) + "\n"


def save_scenario(spec: ScenarioSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(spec), encoding="utf-8")
