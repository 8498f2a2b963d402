"""Rolling-horizon lifelong execution: plan, execute a prefix, repeat.

Every period the configured solver plans from the current configuration
to the current targets, ignoring conflicts at timesteps >= ``w``. The
first ``k`` steps are executed. Reaching a target counts toward
throughput and immediately draws the agent's next target, which the
planner sees from the next period on.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from typing import Sequence

from .cbs import cbs_solve
from .core import INF, Instance, Mode, Path, SolveResult, detect_conflicts
from .grid import GridGraph
from .pibt import PibtState, pibt_step
from .prp import LnsConfig, PrpConfig, lns_solve, prp_solve

log = logging.getLogger(__name__)

SOLVERS = ("prp", "lns", "cbs", "pibt")
FAIL_POLICIES = ("all-wait", "partial-plan")


class TargetStream:
    """Source of targets. ``next(agent, current)`` never returns ``current``
    unless the stream has no alternative."""

    def next(self, agent: int, current: int | None = None) -> int:
        raise NotImplementedError


class UniformStream(TargetStream):
    def __init__(self, graph: GridGraph, seed: int = 0):
        self.num_vertices = graph.num_vertices
        self.rng = random.Random(seed)

    def next(self, agent, current=None):
        while True:
            v = self.rng.randrange(self.num_vertices)
            if v != current or self.num_vertices == 1:
                return v


class DenseStream(TargetStream):
    def __init__(self, vertices: Sequence[int], seed: int = 0):
        if not vertices:
            raise ValueError("dense stream needs at least one vertex")
        self.vertices = list(vertices)
        self.rng = random.Random(seed)

    def next(self, agent, current=None):
        if len(set(self.vertices)) == 1:
            return self.vertices[0]
        while True:
            v = self.rng.choice(self.vertices)
            if v != current:
                return v


class ScriptedStream(TargetStream):
    """Per-agent cyclic target sequences."""

    def __init__(self, sequences: Sequence[Sequence[int]]):
        self.sequences = [list(s) for s in sequences]
        if any(not s for s in self.sequences):
            raise ValueError("every scripted sequence needs at least one target")
        self._pos = [0] * len(self.sequences)

    def next(self, agent, current=None):
        seq = self.sequences[agent]
        v = seq[self._pos[agent] % len(seq)]
        self._pos[agent] += 1
        return v


class StaticStream(TargetStream):
    """Always the same target per agent (one-shot problems)."""

    def __init__(self, targets: Sequence[int]):
        self.targets = list(targets)

    def next(self, agent, current=None):
        return self.targets[agent]


@dataclass
class RhcrConfig:
    solver: str = "prp"
    mode: Mode = Mode.CLASSIC
    k: float = 5
    w: float = 10
    node_budget: int | None = 20_000  # per single-agent search
    time_budget_ms: float | None = None  # per period, wall clock
    fail_policy: str = "partial-plan"
    replan: str = "periodic"  # "periodic" | "every-step"
    seed: int = 0
    restarts: int = 1
    lns_iterations: int = 10
    neighborhood_size: int = 4
    cbs_node_budget: int = 2_000
    checkpoints: tuple[int, ...] = (300, 500, 1000)
    # prp/lns priority order per period: "fixed" keeps agent-id order so an
    # agent does not lose priority as it nears its target; "distance" re-sorts
    priority: str = "fixed"

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.fail_policy not in FAIL_POLICIES:
            raise ValueError(f"unknown fail policy {self.fail_policy!r}")
        if self.priority not in ("fixed", "distance"):
            raise ValueError(f"unknown priority rule {self.priority!r}")
        if self.replan not in ("periodic", "every-step"):
            raise ValueError(f"unknown replan trigger {self.replan!r}")
        if self.replan == "every-step":
            self.k = 1
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.w < self.k:
            raise ValueError("w must be >= k")

    @property
    def period(self) -> float:
        return 1 if self.replan == "every-step" else self.k


@dataclass
class Event:
    t: int
    kind: str  # reach | plan_ok | plan_fail | fail_policy
    agent: int | None = None
    detail: dict = field(default_factory=dict)

    def __str__(self) -> str:
        agent = "-" if self.agent is None else self.agent
        extra = "".join(f" {k}={v}" for k, v in self.detail.items())
        return f"t={self.t} event={self.kind} agent={agent}{extra}"


@dataclass
class LifelongRun:
    graph: GridGraph
    positions: list[int]
    targets: list[int]
    trajectories: list[list[int]]
    throughput: int = 0
    events: list[Event] = field(default_factory=list)
    checkpoints: dict[int, int] = field(default_factory=dict)
    expansions: int = 0
    plan_failures: int = 0
    fail_policy_invocations: int = 0
    runtime: float = 0.0
    steps: int = 0

    def event_log(self) -> str:
        return "".join(f"{e}\n" for e in self.events)


def plan_period(problem: Instance, config: RhcrConfig, seed: int, deadline: float | None = None) -> SolveResult:
    """Run the configured solver once on ``problem``."""
    mode, w = config.mode, config.w
    order = list(range(problem.num_agents)) if config.priority == "fixed" else None
    if config.solver == "prp":
        return prp_solve(problem, PrpConfig(mode=mode, order=order, restarts=config.restarts, horizon=w,
                                            node_budget=config.node_budget, seed=seed, deadline=deadline))
    if config.solver == "lns":
        return lns_solve(problem, LnsConfig(mode=mode, order=order, iterations=config.lns_iterations,
                                            neighborhood_size=config.neighborhood_size, seed=seed, horizon=w,
                                            node_budget=config.node_budget, restarts=config.restarts,
                                            deadline=deadline))
    if config.solver == "cbs":
        return cbs_solve(problem, mode, horizon=w, node_budget=config.cbs_node_budget,
                         low_level_budget=config.node_budget, deadline=deadline)
    raise ValueError(f"solver {config.solver!r} does not plan whole periods")


def _valid_motion(graph: GridGraph, positions: Sequence[int], paths: Sequence[Sequence[int]], steps: int) -> bool:
    for v, p in zip(positions, paths):
        if not p or p[0] != v:
            return False
        for x in range(min(len(p), steps + 1) - 1):
            if p[x + 1] not in graph.neighbors(p[x]):
                return False
    return not detect_conflicts(paths, horizon=steps + 1)


def apply_fail_policy(graph: GridGraph, positions: Sequence[int], policy: str, partial: dict[int, Path] | None,
                      steps: int) -> list[Path]:
    """Paths covering the next ``steps`` steps after a planning failure.

    ``partial-plan`` moves agents with a partial path and holds the rest;
    it falls back to ``all-wait`` if that motion would collide.
    """
    wait = [tuple([v] * (steps + 1)) for v in positions]
    if policy == "all-wait" or not partial:
        return wait
    if policy != "partial-plan":
        raise ValueError(f"unknown fail policy {policy!r}")
    paths = list(wait)
    for i, p in partial.items():
        paths[i] = tuple(p[:steps + 1])
    if _valid_motion(graph, positions, paths, steps):
        return paths
    return wait


def _pad(path: Sequence[int], length: int) -> list[int]:
    return [path[x] if x < len(path) else path[-1] for x in range(length)]


def run_lifelong(graph: GridGraph, starts: Sequence[int], stream: TargetStream, config: RhcrConfig,
                 total_steps: int) -> LifelongRun:
    n = len(starts)
    if len(set(starts)) != n:
        raise ValueError("start configuration has a collision")
    positions = list(starts)
    targets = [stream.next(i, positions[i]) for i in range(n)]
    run = LifelongRun(graph, positions, targets, [[v] for v in positions])
    checkpoints = set(config.checkpoints)
    clock = time.perf_counter()
    pibt_state = PibtState(list(positions)) if config.solver == "pibt" else None
    pibt_rng = random.Random(config.seed)
    t = 0

    def commit(step_positions: Sequence[int]) -> None:
        nonlocal t
        t += 1
        for i, v in enumerate(step_positions):
            positions[i] = v
            run.trajectories[i].append(v)
        for i in range(n):
            if positions[i] == targets[i]:
                run.throughput += 1
                targets[i] = stream.next(i, positions[i])
                run.events.append(Event(t, "reach", i, {"next": targets[i]}))
        if t in checkpoints:
            run.checkpoints[t] = run.throughput

    while t < total_steps:
        if n == 0:
            t = total_steps
            break
        if pibt_state is not None:
            steps = int(min(config.period, total_steps - t))
            frozen = list(targets)
            for _ in range(steps):
                nxt = pibt_step(pibt_state, graph, frozen, None, pibt_rng, Mode.CLASSIC)
                commit(nxt)
            continue

        problem = Instance(graph, tuple(positions), tuple(targets))
        deadline = None
        if config.time_budget_ms is not None:
            deadline = time.perf_counter() + config.time_budget_ms / 1000.0
        result = plan_period(problem, config, seed=config.seed * 1_000_003 + t, deadline=deadline)
        run.expansions += result.stats.get("expansions", 0)

        if result.ok:
            longest = max(len(p) for p in result.paths) - 1
            steps = config.period if config.period != INF else max(longest, 1)
            steps = int(min(steps, total_steps - t))
            if _valid_motion(graph, positions, result.paths, steps):
                run.events.append(Event(t, "plan_ok", None, {"expansions": result.stats.get("expansions", 0)}))
                paths = result.paths
            else:
                result = SolveResult("invalid")
        if not result.ok:
            steps = config.period if config.period != INF else 1
            steps = int(min(steps, total_steps - t))
            run.plan_failures += 1
            run.fail_policy_invocations += 1
            run.events.append(Event(t, "plan_fail", result.failed_agent, {"status": result.status}))
            log.debug("t=%d planning failed (%s)", t, result.status)
            paths = apply_fail_policy(graph, positions, config.fail_policy, result.partial, steps)
            run.events.append(Event(t, "fail_policy", None, {"policy": config.fail_policy}))

        padded = [_pad(p, steps + 1) for p in paths]
        for s in range(1, steps + 1):
            commit([p[s] for p in padded])

    run.steps = t
    run.runtime = time.perf_counter() - clock
    if pibt_state is not None:
        run.expansions = 0
    return run


def throughput_at(run: LifelongRun, step: int) -> int:
    """Throughput after ``step`` executed steps, recomputed from the event log."""
    return sum(1 for e in run.events if e.kind == "reach" and e.t <= step)


def is_collision_free(trajectories: Sequence[Sequence[int]]) -> bool:
    return not detect_conflicts(trajectories)

