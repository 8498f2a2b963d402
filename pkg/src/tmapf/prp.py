"""Prioritized planning (PrP / PrPt) and large neighbourhood search (LNS / LNSt)."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import INF, Instance, Mode, Path, Solution, SolveResult, solution_cost
from .search import ReservationTable, astar, default_parking_filter

FilterFactory = Callable[..., Callable[[int], bool]]


@dataclass
class PrpConfig:
    mode: Mode = Mode.CLASSIC
    order: Sequence[int] | None = None
    restarts: int = 1
    horizon: float = INF
    node_budget: int | None = None
    seed: int = 0
    deadline: float | None = None
    parking_filter: FilterFactory = default_parking_filter

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class LnsConfig:
    mode: Mode = Mode.CLASSIC
    iterations: int = 100
    time_budget: float | None = None  # seconds
    neighborhood_size: int = 4
    destroy: tuple[str, ...] = ("random", "map")
    seed: int = 0
    horizon: float = INF
    node_budget: int | None = None
    restarts: int = 1
    deadline: float | None = None
    parking_filter: FilterFactory = default_parking_filter
    order: Sequence[int] | None = None  # priority order of the initial PrP run

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        if self.neighborhood_size < 1:
            raise ValueError("neighborhood size must be >= 1")
        unknown = set(self.destroy) - {"random", "map"}
        if unknown or not self.destroy:
            raise ValueError(f"destroy heuristics must be a non-empty subset of random/map, got {self.destroy}")


def default_order(instance: Instance) -> list[int]:
    """Farthest agent first; ties by agent id."""
    g = instance.graph
    dist = [g.distance(s, t) for s, t in zip(instance.starts, instance.targets)]
    return sorted(range(instance.num_agents), key=lambda i: (-dist[i], i))


def _plan_agent(instance: Instance, agent: int, table: ReservationTable, mode: Mode, horizon, node_budget,
                deadline, factory: FilterFactory, later: Sequence[int] = ()):
    accept = None
    if mode is Mode.TRANSIENT:
        accept = factory(instance.graph, agent, instance.starts, instance.targets, later)
    return astar(instance.graph, instance.starts[agent], instance.targets[agent], table, horizon=horizon,
                 mode=mode, parking_filter=accept, node_budget=node_budget, deadline=deadline)


def prp_solve(instance: Instance, config: PrpConfig | None = None) -> SolveResult:
    config = config or PrpConfig()
    n = instance.num_agents
    order = list(config.order) if config.order is not None else default_order(instance)
    if sorted(order) != list(range(n)):
        raise ValueError("priority order must be a permutation of the agents")
    rng = random.Random(config.seed)
    expansions = 0
    best: dict[int, Path] = {}
    best_failed = None
    status = "failed"

    for attempt in range(config.restarts):
        if attempt:
            order = order[:]
            rng.shuffle(order)
        table = ReservationTable()
        planned: dict[int, Path] = {}
        failed = None
        for pos, a in enumerate(order):
            res = _plan_agent(instance, a, table, config.mode, config.horizon, config.node_budget,
                              config.deadline, config.parking_filter, order[pos + 1:])
            expansions += res.expansions
            if not res.ok:
                failed = a
                if res.status == "budget":
                    status = "budget"
                break
            planned[a] = res.path
            table.reserve(res.path, park=True)
        if failed is None:
            paths = [planned[i] for i in range(n)]
            stats = {"expansions": expansions, "restarts": attempt + 1,
                     "cost": solution_cost(paths, instance.targets, config.mode)}
            return SolveResult("ok", Solution(paths, config.mode), stats=stats)
        if best_failed is None or len(planned) > len(best):
            best, best_failed = planned, failed
        if config.deadline is not None and time.perf_counter() > config.deadline:
            status = "budget"
            break

    return SolveResult(status, partial=best, failed_agent=best_failed,
                       stats={"expansions": expansions, "restarts": config.restarts})


def _map_based(instance: Instance, paths: list[Path], size: int, rng: random.Random) -> list[int]:
    counts: dict[int, int] = {}
    for p in paths:
        for v in p:
            counts[v] = counts.get(v, 0) + 1
    verts = sorted(counts)
    center = rng.choices(verts, weights=[counts[v] for v in verts])[0]
    dist = instance.graph.distance_table(center)
    near = sorted(range(len(paths)), key=lambda i: (min(dist[v] for v in paths[i]), i))
    return near[:size]


def lns_solve(instance: Instance, config: LnsConfig | None = None) -> SolveResult:
    config = config or LnsConfig()
    n = instance.num_agents
    deadline = config.deadline
    if config.time_budget is not None:
        own = time.perf_counter() + config.time_budget
        deadline = own if deadline is None else min(deadline, own)
    init = prp_solve(instance, PrpConfig(mode=config.mode, order=config.order, restarts=config.restarts,
                                         horizon=config.horizon, node_budget=config.node_budget, seed=config.seed,
                                         deadline=deadline, parking_filter=config.parking_filter))
    if not init.ok:
        init.stats["iterations"] = 0
        return init

    rng = random.Random(config.seed)
    paths = list(init.paths)
    cost = solution_cost(paths, instance.targets, config.mode)
    history = [cost]
    expansions = init.stats["expansions"]
    size = min(config.neighborhood_size, n)
    done = 0
    for _ in range(config.iterations):
        if deadline is not None and time.perf_counter() > deadline:
            break
        done += 1
        heuristic = rng.choice(config.destroy)
        if heuristic == "random":
            removed = rng.sample(range(n), size)
        else:
            removed = _map_based(instance, paths, size, rng)
        keep = set(range(n)) - set(removed)
        table = ReservationTable()
        for i in sorted(keep):
            table.reserve(paths[i], park=True)
        candidate = list(paths)
        ok = True
        for pos, a in enumerate(removed):
            res = _plan_agent(instance, a, table, config.mode, config.horizon, config.node_budget,
                              deadline, config.parking_filter, removed[pos + 1:])
            expansions += res.expansions
            if not res.ok:
                ok = False
                break
            candidate[a] = res.path
            table.reserve(res.path, park=True)
        if ok:
            new_cost = solution_cost(candidate, instance.targets, config.mode)
            if new_cost <= cost:
                paths, cost = candidate, new_cost
        history.append(cost)

    stats = {"expansions": expansions, "restarts": init.stats["restarts"], "iterations": done,
             "cost": cost, "initial_cost": history[0], "history": history}
    return SolveResult("ok", Solution(paths, config.mode), stats=stats)
