"""Governed LTS constructions over a scenario, and exhaustive exploration.

A :class:`System` fixes how governed actions reach the state:

* ``boundary`` - atomic (one arc decides and commits) or split (``dec`` arc,
  then environment steps, then ``exec`` arc);
* ``resolution`` - the same choice for supervisor resolution of escalated
  requests;
* ``external`` - decide with the external-store table instead of ``D``;
* ``window_env`` - which environment actions may fire while a recorded
  decision is outstanding (``None``: all of them).

Arcs out of a configuration are ordered by label kind (agent, env, dec,
exec), then action name, then target, so every traversal is reproducible.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, FrozenSet, Hashable, Iterator, List, Optional, Tuple

from .atomic import ExtendedState, atomic_step, resolve_atomic
from .kernel import ScenarioSpec
from .model import ActionLabel, Kind, Trace, TransitionTable, agent, dec, env
from .split import SplitState, resolve_split, split_dec, split_dec_augmented, split_exec

DEFAULT_MAX_TRACES = 2_000_000

Arc = Tuple[ActionLabel, Hashable]


class Mode(str, Enum):
    ATOMIC = "atomic"
    SPLIT = "split"

    def __str__(self) -> str:
        return self.value


class TraceOverflow(RuntimeError):
    """Enumeration hit its trace cap before finishing."""

    def __init__(self, explored: int, cap: int):
        self.explored = explored
        self.cap = cap
        super().__init__(f"trace cap {cap} exceeded after {explored} traces")


def _config_key(config) -> tuple:
    return config.sort_key() if hasattr(config, "sort_key") else (str(config),)


def commits_inadmissibly(spec: ScenarioSpec, src, label: ActionLabel) -> bool:
    return label.commits and not spec.adm[(src.base, label.name)]


@dataclass(frozen=True)
class System:
    spec: ScenarioSpec
    boundary: Mode = Mode.SPLIT
    resolution: Optional[Mode] = None
    external: bool = False
    window_env: Optional[FrozenSet[str]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "boundary", Mode(self.boundary))
        object.__setattr__(self, "resolution", Mode(self.resolution or self.boundary))
        if self.external and self.spec.external is None:
            raise ValueError(f"{self.spec.name} declares no external store")

    @property
    def uses_records(self) -> bool:
        return Mode.SPLIT in (self.boundary, self.resolution)

    def describe(self) -> str:
        text = str(self.boundary)
        if self.resolution is not self.boundary:
            text += f"/{self.resolution}-resolution"
        if self.external:
            text += "+external" + (" (fused)" if self.boundary is Mode.ATOMIC else "")
        if self.window_env is not None:
            text += " window=" + (",".join(sorted(self.window_env)) or "none")
        return text

    def initial(self):
        if self.uses_records:
            return SplitState(self.spec.initial)
        return ExtendedState(self.spec.initial)

    def successors(self, config) -> List[Arc]:
        spec = self.spec
        ext = spec.external if self.external else None
        s = config.base
        arcs: List[Arc] = []

        if isinstance(config, ExtendedState):
            for a in spec.agent_actions:
                out = atomic_step(spec, config, a, ext)
                arcs.append((agent(a, out.disposition), out.next))
            for r in sorted(config.pending):
                verdict = spec.supervisor_verdict(s, r.action)
                label = ActionLabel(Kind.AGENT, r.action, verdict, r.origin_state)
                arcs.append((label, resolve_atomic(spec, config, r, verdict)))
            for e, t in spec.env_arcs(s):
                arcs.append((env(e), ExtendedState(t, config.pending)))
        else:
            rec = config.recorded
            if rec is None:
                for a in spec.agent_actions:
                    if self.boundary is Mode.SPLIT:
                        d = ext.decision(s, a) if ext else spec.decision[(s, a)]
                        nxt = (split_dec_augmented(spec, config, a, ext) if ext
                               else split_dec(spec, config, a))
                        arcs.append((dec(a, d), nxt))
                    else:
                        out = atomic_step(spec, ExtendedState(s, config.pending), a, ext)
                        arcs.append((agent(a, out.disposition),
                                     SplitState(out.next.base, None, out.next.pending)))
                for r in sorted(config.pending):
                    verdict = spec.supervisor_verdict(s, r.action)
                    if self.resolution is Mode.SPLIT:
                        label = ActionLabel(Kind.DEC, r.action, verdict, r.origin_state)
                        arcs.append((label, resolve_split(spec, config, r, verdict)))
                    else:
                        label = ActionLabel(Kind.AGENT, r.action, verdict, r.origin_state)
                        nxt = resolve_atomic(spec, ExtendedState(s, config.pending), r, verdict)
                        arcs.append((label, SplitState(nxt.base, None, nxt.pending)))
            else:
                nxt, _ = split_exec(spec, config)
                origin = rec.request.origin_state if rec.request else None
                arcs.append((ActionLabel(Kind.EXEC, rec.action, rec.disposition, origin), nxt))
            for e, t in spec.env_arcs(s):
                if rec is not None and self.window_env is not None and e not in self.window_env:
                    continue
                arcs.append((env(e), replace(config, base=t)))

        arcs.sort(key=lambda arc: (arc[0].sort_key(), _config_key(arc[1])))
        return arcs

    # -- exploration ----------------------------------------------------------

    def traces(self, depth: int, max_traces: int = DEFAULT_MAX_TRACES) -> Iterator[Trace]:
        """Every trace with at most ``depth`` arcs, depth-first, each once."""
        if depth < 0:
            raise ValueError("depth must be non-negative")
        count = 0
        cache: Dict[Hashable, List[Arc]] = {}

        def walk(states, labels):
            nonlocal count
            count += 1
            if count > max_traces:
                raise TraceOverflow(count - 1, max_traces)
            yield Trace(tuple(states), tuple(labels))
            if len(labels) == depth:
                return
            here = states[-1]
            if here not in cache:
                cache[here] = self.successors(here)
            for label, nxt in cache[here]:
                states.append(nxt)
                labels.append(label)
                yield from walk(states, labels)
                states.pop()
                labels.pop()

        yield from walk([self.initial()], [])

    def count_and_find(self, depth: int, max_traces: int = DEFAULT_MAX_TRACES,
                       stop_at_first: bool = False) -> Tuple[int, Optional[Trace]]:
        """Enumerate every trace up to ``depth``; return the count and the
        first violating trace in enumeration order (if any).

        Cheaper than materializing :meth:`traces`: violation is checked once
        per arc on the current path, which is equivalent because the trace
        set is prefix-closed.
        """
        cache: Dict[Hashable, List[Arc]] = {}
        found: Optional[Trace] = None
        states: list = [self.initial()]
        labels: list = []
        count = 1
        stack = [iter(self._arcs(states[0], cache))] if depth > 0 else []
        while stack:
            try:
                label, nxt = next(stack[-1])
            except StopIteration:
                stack.pop()
                states.pop()
                if labels:
                    labels.pop()
                continue
            count += 1
            if count > max_traces:
                raise TraceOverflow(count - 1, max_traces)
            if found is None and commits_inadmissibly(self.spec, states[-1], label):
                found = Trace(tuple(states) + (nxt,), tuple(labels) + (label,))
                if stop_at_first:
                    return count, found
            states.append(nxt)
            labels.append(label)
            if len(labels) < depth:
                stack.append(iter(self._arcs(nxt, cache)))
            else:
                states.pop()
                labels.pop()
        return count, found

    def _arcs(self, config, cache) -> List[Arc]:
        arcs = cache.get(config)
        if arcs is None:
            arcs = cache[config] = self.successors(config)
        return arcs

    def shortest_violation(self, depth: int) -> Tuple[Optional[Trace], int]:
        """Breadth-first search for a minimal-length violating trace.

        Returns the trace (or ``None``) and the number of configurations
        expanded.
        """
        start = self.initial()
        parent: Dict[Hashable, Optional[Tuple[Hashable, ActionLabel]]] = {start: None}
        frontier = deque([(start, 0)])
        expanded = 0
        while frontier:
            config, dist = frontier.popleft()
            if dist >= depth:
                continue
            expanded += 1
            for label, nxt in self.successors(config):
                if commits_inadmissibly(self.spec, config, label):
                    return self._rebuild(parent, config).extend(label, nxt), expanded
                if nxt not in parent:
                    parent[nxt] = (config, label)
                    frontier.append((nxt, dist + 1))
        return None, expanded

    @staticmethod
    def _rebuild(parent, config) -> Trace:
        states, labels = [config], []
        while parent[config] is not None:
            config, label = parent[config]
            states.append(config)
            labels.append(label)
        return Trace(tuple(reversed(states)), tuple(reversed(labels)))

    def reachable(self, depth: Optional[int] = None) -> Dict[Hashable, int]:
        """Reachable configurations with their BFS distance from the start."""
        start = self.initial()
        dist = {start: 0}
        frontier = deque([start])
        while frontier:
            config = frontier.popleft()
            if depth is not None and dist[config] >= depth:
                continue
            for _, nxt in self.successors(config):
                if nxt not in dist:
                    dist[nxt] = dist[config] + 1
                    frontier.append(nxt)
        return dist

    def diameter(self) -> int:
        """Largest BFS distance of any reachable configuration."""
        return max(self.reachable().values())

    def table(self, depth: Optional[int] = None) -> TransitionTable:
        rows = set()
        for config in self.reachable(depth):
            for label, nxt in self.successors(config):
                rows.add((config, label, nxt))
        return TransitionTable(frozenset(rows))


def enumerate_traces(spec: ScenarioSpec, mode: Mode | str, depth: int,
                     max_traces: int = DEFAULT_MAX_TRACES) -> Iterator[Trace]:
    return System(spec, Mode(mode)).traces(depth, max_traces)
