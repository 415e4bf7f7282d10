"""Live race: real threads against one shared versioned cell.

The run is split into episodes. Each episode starts from a fresh cell at
the scenario's initial state; every agent worker makes one admission
attempt and every environment worker fires one enabled environment step,
all released together by a barrier.

Atomic mode goes through :func:`live_admit_and_commit`. Split mode reads
the state, decides, optionally yields (the injected window), then commits
the transition against whatever state is current at that point. That last
commit is itself a linearizable write; only the decision is stale.

Every episode's commit history is replayed afterwards: each commit must
continue from its predecessor and agree with the sequential semantics,
and the violation count obtained by replaying the history through
:func:`check_preservation` must equal the count observed live.
"""

from __future__ import annotations

import math
import random
import threading
import time
from typing import Callable, List, Optional, Sequence, Tuple

from .atomic import (
    Commit,
    ExtendedState,
    PendingRequest,
    Starved,
    VersionedStateCell,
    atomic_step,
    live_admit_and_commit,
)
from .harness import SchedulerConfig, SchedulerKind, ViolationStats
from .kernel import Disposition, ScenarioSpec
from .model import ActionLabel, Kind, Trace, all_violations, env
from .systems import Mode


class Tally:
    """Counters shared by all workers."""

    def __init__(self):
        self._lock = threading.Lock()
        self.values = {"attempts": 0, "violations": 0, "commits": 0, "starved": 0}

    def add(self, key: str, n: int = 1) -> None:
        with self._lock:
            self.values[key] += n


def _env_step(cell: VersionedStateCell, spec: ScenarioSpec, rng: random.Random,
              budget: int) -> None:
    def fire(cur: ExtendedState):
        arcs = spec.env_arcs(cur.base)
        if not arcs:
            return None
        e, t = rng.choice(arcs)
        return ExtendedState(t, cur.pending), env(e)

    cell.update(fire, budget)


def _split_attempt(cell: VersionedStateCell, spec: ScenarioSpec, action: str,
                   pause: Optional[Callable[[], None]], budget: int, tally: Tally) -> None:
    state, _ = cell.read()
    d = spec.decision[(state.base, action)]
    if d is Disposition.REFUSE:
        return
    if d is Disposition.ESCALATE:
        request = PendingRequest(state.base, action)
        cell.update(lambda cur: (ExtendedState(cur.base, cur.pending | {request}),
                                 ActionLabel(Kind.DEC, action, d)), budget)
        return
    if pause is not None:
        pause()

    def fire(cur: ExtendedState):
        return (ExtendedState(spec.transition[(cur.base, action)], cur.pending),
                ActionLabel(Kind.EXEC, action, Disposition.ALLOW))

    before, _, _ = cell.update(fire, budget)
    tally.add("commits")
    if not spec.adm[(before.base, action)]:
        tally.add("violations")


def _atomic_attempt(cell: VersionedStateCell, spec: ScenarioSpec, action: str,
                    pause: Optional[Callable[[], None]], budget: int, tally: Tally) -> None:
    def observe(snapshot: ExtendedState, outcome) -> None:
        if outcome.disposition is Disposition.ALLOW:
            tally.add("commits")
            if not spec.adm[(snapshot.base, action)]:
                tally.add("violations")

    live_admit_and_commit(cell, spec, action, budget, pause, observe)


def replay_history(spec: ScenarioSpec, history: Sequence[Commit],
                   initial: Optional[ExtendedState] = None) -> Tuple[bool, int]:
    """Replay a committed history sequentially.

    Returns ``(consistent, violations)``: whether every commit continues from
    its predecessor and matches the sequential step semantics, and how many
    committing steps fired in an inadmissible state.
    """
    state = initial or ExtendedState(spec.initial)
    states: List[ExtendedState] = [state]
    labels: List[ActionLabel] = []
    consistent = True
    last_version = 0
    for c in history:
        ok = c.before == state and c.version == last_version + 1
        label = c.label
        if label.kind is Kind.AGENT:
            out = atomic_step(spec, c.before, label.name)
            ok &= (out.disposition, out.next) == (label.disposition, c.after)
        elif label.kind is Kind.ENV:
            ok &= ((c.before.base, label.name, c.after.base) in spec.env_transitions
                   and c.after.pending == c.before.pending)
        elif label.kind is Kind.EXEC:
            ok &= c.after == ExtendedState(spec.transition[(c.before.base, label.name)],
                                           c.before.pending)
        else:  # split-mode escalation record
            added = c.after.pending - c.before.pending
            ok &= (c.after.base == c.before.base and c.before.pending <= c.after.pending
                   and all(r.action == label.name for r in added))
        consistent &= ok
        state = c.after
        last_version = c.version
        states.append(state)
        labels.append(label)
    violations = sum(1 for _ in all_violations(Trace(tuple(states), tuple(labels)), spec.adm))
    return consistent, violations


def run_live_race(spec: ScenarioSpec, mode: Mode | str, config: SchedulerConfig) -> ViolationStats:
    if config.kind is not SchedulerKind.LIVE_RACE:
        raise ValueError("run_live_race needs a live-race scheduler config")
    mode = Mode(mode)
    n_agents, n_env = config.workers, config.env_workers
    episodes = math.ceil(config.trials / n_agents)
    tally = Tally()
    start = threading.Barrier(n_agents + n_env + 1)
    done = threading.Barrier(n_agents + n_env + 1)
    box: dict = {}
    errors: List[BaseException] = []
    pause = (lambda: time.sleep(config.yield_seconds)) if config.yield_injection else None
    attempt = _atomic_attempt if mode is Mode.ATOMIC else _split_attempt

    def agent_worker(idx: int) -> None:
        rng = random.Random(config.seed * 1_000_003 + idx)
        for ep in range(episodes):
            start.wait()
            try:
                if ep * n_agents + idx < config.trials:
                    tally.add("attempts")
                    action = rng.choice(spec.agent_actions)
                    try:
                        attempt(box["cell"], spec, action, pause, config.retry_budget, tally)
                    except Starved:
                        tally.add("starved")
                    if n_env == 0:
                        # No environment threads: the environment runs serially here.
                        _env_step(box["cell"], spec, rng, config.retry_budget)
            except BaseException as exc:  # pragma: no cover - surfaced below
                errors.append(exc)
            done.wait()

    def env_worker(idx: int) -> None:
        rng = random.Random(config.seed * 1_000_003 + 500_000 + idx)
        for _ in range(episodes):
            start.wait()
            try:
                if config.yield_injection:
                    # Land sometimes inside the agents' window, sometimes after it.
                    time.sleep(rng.random() * 2 * config.yield_seconds)
                _env_step(box["cell"], spec, rng, config.retry_budget)
            except Starved:
                tally.add("starved")
            except BaseException as exc:  # pragma: no cover
                errors.append(exc)
            done.wait()

    threads = [threading.Thread(target=agent_worker, args=(i,), daemon=True)
               for i in range(n_agents)]
    threads += [threading.Thread(target=env_worker, args=(i,), daemon=True)
                for i in range(n_env)]
    began = time.perf_counter()
    for t in threads:
        t.start()
    replay_ok, replay_violations = True, 0
    for _ in range(episodes):
        box["cell"] = VersionedStateCell(ExtendedState(spec.initial))
        start.wait()
        done.wait()
        ok, bad = replay_history(spec, box["cell"].history)
        replay_ok &= ok
        replay_violations += bad
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    v = tally.values
    return ViolationStats(
        spec.name, str(mode), SchedulerKind.LIVE_RACE.value, v["attempts"], v["violations"],
        v["commits"], seed=config.seed, starved=v["starved"],
        replay_violations=replay_violations, replay_consistent=replay_ok,
        elapsed=time.perf_counter() - began,
        details={"episodes": episodes, "workers": n_agents, "env_workers": n_env,
                 "yield_injection": config.yield_injection},
    )
