"""Conflict-Based Search with a classic (CBS) or transient (CBSt) low level."""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

from .core import INF, Conflict, Instance, Mode, Path, Solution, SolveResult, detect_conflicts, solution_cost
from .search import ReservationTable, astar, default_parking_filter

# ("v", vertex, t) forbids occupying vertex at t; ("e", u, w, t) forbids moving u -> w across t -> t+1
Constraint = tuple


@dataclass
class CtNode:
    constraints: dict[int, frozenset]
    paths: list[Path]
    cost: int
    conflicts: list[Conflict]

    @property
    def num_conflicts(self) -> int:
        return len(self.conflicts)


def _table(constraints) -> ReservationTable:
    table = ReservationTable()
    for c in constraints:
        if c[0] == "v":
            table.reserve_vertex(c[1], c[2])
        else:
            # blocking u -> w is the same as a recorded opposite move w -> u
            table.reserve_edge(c[2], c[1], c[3])
    return table


def cbs_solve(instance: Instance, mode: Mode | str = Mode.CLASSIC, horizon: float = INF,
              node_budget: int | None = 10_000, low_level_budget: int | None = None,
              deadline: float | None = None, parking_filter=default_parking_filter) -> SolveResult:
    """Best-first search over the constraint tree.

    Node order: cost, then fewer conflicts, then insertion order. The
    earliest conflict (ties by agent pair) is split into two children. The
    low level breaks cost ties toward fewer conflicts with the other paths.
    ``parking_filter`` is a factory ``(graph, agent, starts, targets) ->
    predicate`` used by the transient low level.
    """
    mode = Mode.parse(mode)
    n = instance.num_agents
    graph = instance.graph
    filters = [None] * n
    if mode is Mode.TRANSIENT:
        filters = [parking_filter(graph, i, instance.starts, instance.targets) for i in range(n)]
    stats = {"expansions": 0, "ct_expanded": 0, "ct_generated": 0}

    def low_level(agent: int, constraints, others=()) -> tuple[Path | None, str]:
        res = astar(graph, instance.starts[agent], instance.targets[agent], _table(constraints), horizon=horizon,
                    mode=mode, parking_filter=filters[agent], node_budget=low_level_budget, deadline=deadline,
                    avoid=others)
        stats["expansions"] += res.expansions
        return res.path, res.status

    root_paths = []
    for i in range(n):
        path, status = low_level(i, ())
        if path is None:
            kind = "unsolvable" if status == "exhausted" else "budget"
            return SolveResult(kind, failed_agent=i, stats=stats)
        root_paths.append(path)

    def make(constraints, paths) -> CtNode:
        return CtNode(constraints, paths, solution_cost(paths, instance.targets, mode),
                      detect_conflicts(paths, horizon))

    root = make({i: frozenset() for i in range(n)}, root_paths)
    tie = itertools.count()
    open_list = [(root.cost, root.num_conflicts, next(tie), root)]
    stats["ct_generated"] = 1

    while open_list:
        _, _, _, node = heapq.heappop(open_list)
        if not node.conflicts:
            stats["cost"] = node.cost
            return SolveResult("ok", Solution(node.paths, mode), stats=stats)
        if node_budget is not None and stats["ct_expanded"] >= node_budget:
            return SolveResult("budget", stats=stats)
        if deadline is not None and time.perf_counter() > deadline:
            return SolveResult("budget", stats=stats)
        stats["ct_expanded"] += 1

        conflict = node.conflicts[0]
        i, j = conflict.agents
        x = conflict.timestep
        if conflict.kind == "vertex":
            v = conflict.location[0]
            branches = ((i, ("v", v, x)), (j, ("v", v, x)))
        else:
            u, w = conflict.location
            branches = ((i, ("e", u, w, x)), (j, ("e", w, u, x)))

        for agent, con in branches:
            cons = dict(node.constraints)
            cons[agent] = node.constraints[agent] | {con}
            others = [p for k, p in enumerate(node.paths) if k != agent]
            path, _ = low_level(agent, cons[agent], others)
            if path is None:
                continue
            paths = list(node.paths)
            paths[agent] = path
            child = make(cons, paths)
            stats["ct_generated"] += 1
            heapq.heappush(open_list, (child.cost, child.num_conflicts, next(tie), child))

    return SolveResult("unsolvable", stats=stats)
