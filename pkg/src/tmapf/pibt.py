"""PIBT: one-step configuration generation by priority inheritance with backtracking.

In transient mode an agent that has visited its target drops to the
bottom of the priority order and prefers to stay put, but can still be
pushed aside by agents that inherit priority through it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .core import Instance, Mode, Solution, SolveResult
from .grid import GridGraph

NIL = -1


@dataclass
class PibtState:
    config: list[int]
    elevation: list[int] = field(default_factory=list)
    reached: list[bool] = field(default_factory=list)
    base: list[float] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.config)
        if len(set(self.config)) != n:
            raise ValueError("configuration has a vertex collision")
        if not self.elevation:
            self.elevation = [0] * n
        if not self.reached:
            self.reached = [False] * n
        if not self.base:
            # lower agent id -> slightly higher base priority
            self.base = [(n - i) / (n + 1) for i in range(n)]

    def priority(self, i: int) -> tuple[int, float]:
        """Sort key; larger means planned earlier. Reached agents rank last."""
        return (0 if self.reached[i] else 1, self.elevation[i] + self.base[i])


def pibt_step(state: PibtState, graph: GridGraph, targets: Sequence[int | None], dist_tables=None,
              rng: random.Random | int | None = None, mode: Mode | str = Mode.CLASSIC) -> list[int]:
    """Compute the next configuration and update priorities in ``state``.

    ``targets[i] is None`` marks an agent without a target. In transient
    mode ``state.reached`` is set on the first visit and never cleared here.
    """
    mode = Mode.parse(mode)
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    n = len(state.config)
    if dist_tables is None:
        dist_tables = [None if t is None else graph.distance_table(t) for t in targets]
    q_from = state.config
    q_to = [NIL] * n
    occupied_now = {v: i for i, v in enumerate(q_from)}
    occupied_next: dict[int, int] = {}
    idle = [targets[i] is None or (mode is Mode.TRANSIENT and state.reached[i]) for i in range(n)]

    def candidates(i: int) -> list[int]:
        here = q_from[i]
        cands = list(graph.neighbors(here))
        rng.shuffle(cands)
        if idle[i]:
            cands.sort(key=lambda u: u != here)
        else:
            d = dist_tables[i]
            cands.sort(key=lambda u: d[u])
        return cands

    def plan(i: int) -> bool:
        for v in candidates(i):
            if v in occupied_next:
                continue
            j = occupied_now.get(v, NIL)
            if j != NIL and q_to[j] == q_from[i]:
                continue
            q_to[i] = v
            occupied_next[v] = i
            if j != NIL and j != i and q_to[j] == NIL and not plan(j):
                continue
            return True
        q_to[i] = q_from[i]
        occupied_next[q_from[i]] = i
        return False

    for i in sorted(range(n), key=state.priority, reverse=True):
        if q_to[i] == NIL:
            plan(i)

    for i in range(n):
        t = targets[i]
        if t is not None and q_to[i] == t:
            state.elevation[i] = 0
            if mode is Mode.TRANSIENT:
                state.reached[i] = True
        elif not idle[i]:
            state.elevation[i] += 1
    state.config = q_to
    return q_to


def pibt_run(instance: Instance, mode: Mode | str = Mode.CLASSIC, steps: int | None = None,
             seed: int = 0) -> SolveResult:
    """Iterate PIBT until the goal condition of ``mode`` holds or ``steps`` runs out."""
    mode = Mode.parse(mode)
    graph = instance.graph
    steps = steps if steps is not None else 4 * graph.num_vertices
    rng = random.Random(seed)
    targets = list(instance.targets)
    tables = [graph.distance_table(t) for t in targets]
    state = PibtState(list(instance.starts))
    if mode is Mode.TRANSIENT:
        state.reached = [s == t for s, t in zip(instance.starts, targets)]
    history = [list(instance.starts)]

    def done() -> bool:
        if mode is Mode.TRANSIENT:
            return all(state.reached)
        return all(v == t for v, t in zip(state.config, targets))

    while not done():
        if len(history) > steps:
            paths = [tuple(c[i] for c in history) for i in range(instance.num_agents)]
            return SolveResult("budget", partial=dict(enumerate(paths)), stats={"steps": len(history) - 1})
        history.append(list(pibt_step(state, graph, targets, tables, rng, mode)))

    paths = [tuple(c[i] for c in history) for i in range(instance.num_agents)]
    return SolveResult("ok", Solution(paths, mode), stats={"steps": len(history) - 1, "expansions": 0})
