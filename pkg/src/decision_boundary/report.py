"""Report rendering: human-readable tables and a lossless JSON form.

Every report object converts to a plain dict tagged with ``"type"`` and
back; :class:`RunReport` bundles the reports of one CLI invocation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Hashable, List, Mapping, Optional, Sequence, Union

from .atomic import ExtendedState, PendingRequest
from .harness import (
    AbsentUpTo,
    AtomicityClass,
    Classification,
    Inconclusive,
    ViolationStats,
    Witness,
    WitnessReport,
)
from .kernel import Disposition, PartitionDescriptor, ScenarioSpec
from .model import ActionLabel, Trace, Violated, base_of
from .split import RecordedDecision, SplitState

Report = Union[WitnessReport, ViolationStats, Classification]


# -- configurations and traces ---------------------------------------------------

def _requests_to_list(pending) -> list:
    return [[r.origin_state, r.action] for r in sorted(pending)]


def _requests_from_list(rows) -> frozenset:
    return frozenset(PendingRequest(s, a) for s, a in rows)


def config_to_dict(config: Hashable) -> dict:
    if isinstance(config, str):
        return {"type": "base", "base": config}
    if isinstance(config, ExtendedState):
        return {"type": "extended", **config.to_dict()}
    if isinstance(config, SplitState):
        return {"type": "split", **config.to_dict()}
    raise TypeError(f"not a configuration: {config!r}")


def config_from_dict(d: Mapping[str, Any]) -> Hashable:
    kind = d["type"]
    if kind == "base":
        return d["base"]
    pending = _requests_from_list(d.get("pending", ()))
    if kind == "extended":
        return ExtendedState(d["base"], pending)
    if kind == "split":
        rec = d.get("recorded")
        recorded = None
        if rec is not None:
            req = rec.get("request")
            recorded = RecordedDecision(rec["action"], Disposition(rec["disposition"]),
                                        rec["evaluated_in"],
                                        PendingRequest(*req) if req else None)
        return SplitState(d["base"], recorded, pending)
    raise ValueError(f"unknown configuration type {kind!r}")


def trace_to_dict(trace: Trace) -> dict:
    return {"states": [config_to_dict(s) for s in trace.states],
            "labels": [label.to_dict() for label in trace.labels]}


def trace_from_dict(d: Mapping[str, Any]) -> Trace:
    return Trace(tuple(config_from_dict(s) for s in d["states"]),
                 tuple(ActionLabel.from_dict(l) for l in d["labels"]))


# -- report objects --------------------------------------------------------------

def _outcome_to_dict(outcome) -> dict:
    if isinstance(outcome, Witness):
        return {"kind": "witness", "trace": trace_to_dict(outcome.trace),
                "violation": outcome.violation.to_dict()}
    if isinstance(outcome, AbsentUpTo):
        return {"kind": "absent", "depth": outcome.depth,
                "traces_explored": outcome.traces_explored}
    return {"kind": "inconclusive", "reason": outcome.reason}


def _outcome_from_dict(d: Mapping[str, Any]):
    if d["kind"] == "witness":
        v = d["violation"]
        return Witness(trace_from_dict(d["trace"]), Violated(v["index"], v["state"], v["action"]))
    if d["kind"] == "absent":
        return AbsentUpTo(d["depth"], d["traces_explored"])
    return Inconclusive(d["reason"])


def _partition_to_dict(p: PartitionDescriptor) -> dict:
    return {"local": sorted(p.local_attrs), "global": sorted(p.global_attrs),
            "adm": sorted(p.adm_dependency)}


def report_to_dict(report: Report) -> dict:
    if isinstance(report, WitnessReport):
        return {"type": "witness-report", "scenario": report.scenario, "mode": report.mode,
                "depth": report.depth, "expected": report.expected,
                "matched": report.matched, "outcome": _outcome_to_dict(report.outcome)}
    if isinstance(report, ViolationStats):
        return {"type": "violation-stats", **asdict(report)}
    if isinstance(report, Classification):
        return {"type": "classification", "scenario": report.scenario,
                "verdict": report.verdict.value,
                "partition": _partition_to_dict(report.partition),
                "window_env": list(report.window_env),
                "adm_reads_global": report.adm_reads_global,
                "report": report_to_dict(report.report)}
    raise TypeError(f"not a report: {report!r}")


def report_from_dict(d: Mapping[str, Any]) -> Report:
    kind = d["type"]
    if kind == "witness-report":
        return WitnessReport(d["scenario"], d["mode"], d["depth"],
                             _outcome_from_dict(d["outcome"]), d.get("expected"))
    if kind == "violation-stats":
        fields = {k: v for k, v in d.items() if k != "type"}
        return ViolationStats(**fields)
    if kind == "classification":
        p = d["partition"]
        return Classification(
            d["scenario"], AtomicityClass(d["verdict"]),
            PartitionDescriptor(p["local"], p["global"], p["adm"]),
            report_from_dict(d["report"]), tuple(d["window_env"]), d["adm_reads_global"])
    raise ValueError(f"unknown report type {kind!r}")


@dataclass
class RunReport:
    """Everything one CLI invocation produced."""

    command: List[str]
    scenario: Optional[str]
    mode: Optional[str]
    reports: List[Report] = field(default_factory=list)
    exit_status: int = 0
    message: Optional[str] = None

    def to_dict(self) -> dict:
        return {"command": list(self.command), "scenario": self.scenario, "mode": self.mode,
                "reports": [report_to_dict(r) for r in self.reports],
                "exit_status": self.exit_status, "message": self.message}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunReport":
        return cls(list(d["command"]), d.get("scenario"), d.get("mode"),
                   [report_from_dict(r) for r in d.get("reports", ())],
                   d["exit_status"], d.get("message"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


# -- human rendering ---------------------------------------------------------------

def _bool(value: bool) -> str:
    return "true" if value else "false"


def render_witness(trace: Trace, violation: Violated, spec: ScenarioSpec) -> List[str]:
    """The trace as a numbered table with Adm of the violated action in every source state."""
    action = violation.action
    rows = [("", "#", "step", "from", f"Adm(from, {action})", "to")]
    for i, src, label, tgt in trace.triples():
        mark = ">>" if i == violation.index else ""
        rows.append((mark, str(i), str(label), str(src),
                     _bool(spec.adm[(base_of(src), action)]), str(tgt)))
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  " + "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
             for r in rows]
    lines.append(f"  step {violation.index} commits {action} in {violation.state}, "
                 f"where Adm({violation.state}, {action}) = false")
    return lines


def render_witness_report(report: WitnessReport, spec: Optional[ScenarioSpec] = None) -> str:
    o = report.outcome
    status = "ok" if report.matched else f"MISMATCH (expected {report.expected})"
    if isinstance(o, Witness):
        head = f"[{report.mode}] witness of length {o.length} at depth {report.depth}: {status}"
        body = (render_witness(o.trace, o.violation, spec) if spec is not None
                else ["  " + o.trace.render()])
        return "\n".join([head] + body)
    if isinstance(o, AbsentUpTo):
        return (f"[{report.mode}] no violating trace up to depth {o.depth} "
                f"({o.traces_explored} traces explored): {status}")
    return f"[{report.mode}] inconclusive: {o.reason}"


def render_stats(stats: ViolationStats) -> str:
    parts = [f"[{stats.mode}] {stats.kind}", f"trials={stats.trials}"]
    if stats.p is not None:
        parts.append(f"p={stats.p}")
    if stats.seed is not None:
        parts.append(f"seed={stats.seed}")
    line = " ".join(parts) + (f": {stats.violations} violations ({stats.rate:.2%}), "
                              f"{stats.commits} commits")
    if stats.starved:
        line += f", {stats.starved} starved"
    if stats.replay_consistent is not None:
        line += (f", history replay {'consistent' if stats.replay_consistent else 'INCONSISTENT'}"
                 f" with {stats.replay_violations} violations")
    return line + f", {stats.elapsed:.2f}s"


def render_classification(c: Classification, spec: Optional[ScenarioSpec] = None) -> str:
    p = c.partition
    lines = [
        f"{c.scenario}: {c.verdict}",
        f"  local: {', '.join(sorted(p.local_attrs)) or '-'}",
        f"  global: {', '.join(sorted(p.global_attrs)) or '-'}",
        f"  admissibility reads: {', '.join(sorted(p.adm_dependency)) or '-'}"
        + (" (includes global state)" if c.adm_reads_global else ""),
        f"  env actions that can land between decision and execution: "
        f"{', '.join(c.window_env) or 'none'}",
    ]
    lines += ["  " + l for l in render_witness_report(c.report, spec).splitlines()]
    return "\n".join(lines)


def render(report: Report, spec: Optional[ScenarioSpec] = None) -> str:
    if isinstance(report, WitnessReport):
        return render_witness_report(report, spec)
    if isinstance(report, ViolationStats):
        return render_stats(report)
    return render_classification(report, spec)


def render_run(run: RunReport, spec: Optional[ScenarioSpec] = None,
               extra: Sequence[str] = ()) -> str:
    lines = [f"scenario: {run.scenario}"] if run.scenario else []
    lines += list(extra)
    lines += [render(r, spec) for r in run.reports]
    if run.message:
        lines.append(run.message)
    return "\n".join(lines)
