"""Space-time A* for one agent, in classic and transient form.

Classic search looks for a path that ends on the target and can stay
there. Transient search carries a visited flag in every state; a goal is
any state whose flag is set and whose vertex can be held forever. After
the flag is set moves cost nothing and the heuristic is zero, so the
search minimises the time of the first visit and then looks for any
admissible parking vertex.

Constraints at timesteps >= ``horizon`` are ignored. A popped state at
the last constrained timestep or later is completed along a shortest
path without further checks, except that a transient state that has
already visited its target must stand on an acceptable parking vertex.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

from .core import INF, Mode, Path
from .grid import UNREACHABLE, GridGraph

ParkingFilter = Callable[[int], bool]


class ReservationTable:
    """Space-time occupancy used to keep a new path clear of existing ones.

    An edge entry ``(u, w, t)`` records a move ``u -> w`` across ``t -> t+1``;
    it blocks the opposite move in the same step.
    """

    def __init__(self):
        self.vertices: set[tuple[int, int]] = set()
        self.edges: set[tuple[int, int, int]] = set()
        self.parked: dict[int, int] = {}
        self._times: dict[int, list[int]] = {}
        self.last_time = 0

    def copy(self) -> "ReservationTable":
        other = ReservationTable()
        other.vertices = set(self.vertices)
        other.edges = set(self.edges)
        other.parked = dict(self.parked)
        other._times = {v: list(ts) for v, ts in self._times.items()}
        other.last_time = self.last_time
        return other

    def reserve_vertex(self, v: int, t: int) -> None:
        if (v, t) not in self.vertices:
            self.vertices.add((v, t))
            self._times.setdefault(v, []).append(t)
            self.last_time = max(self.last_time, t)

    def reserve_edge(self, u: int, w: int, t: int) -> None:
        self.edges.add((u, w, t))
        self.last_time = max(self.last_time, t + 1)

    def park(self, v: int, t: int) -> None:
        prev = self.parked.get(v)
        self.parked[v] = t if prev is None else min(prev, t)
        self.last_time = max(self.last_time, t)

    def reserve(self, path: Sequence[int], park: bool = False) -> "ReservationTable":
        for t, v in enumerate(path):
            self.reserve_vertex(v, t)
            if t and path[t - 1] != v:
                self.reserve_edge(path[t - 1], v, t - 1)
        if park:
            self.park(path[-1], len(path) - 1)
        return self

    def move_blocked(self, u: int, w: int, x: int, horizon: float = INF) -> bool:
        t = x + 1
        if t >= horizon:
            return False
        if (w, t) in self.vertices:
            return True
        if u != w and (w, u, x) in self.edges:
            return True
        p = self.parked.get(w)
        return p is not None and p <= t

    def occupied(self, v: int, t: int) -> bool:
        if (v, t) in self.vertices:
            return True
        p = self.parked.get(v)
        return p is not None and p <= t

    def can_park(self, v: int, x: int, horizon: float = INF) -> bool:
        """True if ``v`` can be held from timestep ``x`` on (checked before the horizon)."""
        p = self.parked.get(v)
        if p is not None and p < horizon:
            return False
        for t in self._times.get(v, ()):
            if x <= t < horizon:
                return False
        return True


def reserve(table: ReservationTable, path: Sequence[int], park: bool = False) -> ReservationTable:
    return table.reserve(path, park)


@dataclass
class SearchResult:
    path: Path | None
    status: str  # "ok" | "exhausted" | "budget"
    expansions: int = 0
    generated: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(order=True)
class _Node:
    sort_key: tuple
    v: int = field(compare=False)
    x: int = field(compare=False)
    b: bool = field(compare=False)
    g: int = field(compare=False)
    parent: "_Node | None" = field(compare=False)


def default_parking_filter(graph: GridGraph, agent: int, starts: Sequence[int], targets: Sequence[int],
                           others: Iterable[int] | None = None) -> ParkingFilter:
    """Reject parking where it would lock out another agent.

    A vertex is refused if it is the start or target of one of ``others``
    (default: every other agent), lies on every shortest path of one of
    them, or is a cut vertex separating one of them from its target.
    """
    if others is None:
        others = (j for j in range(len(starts)) if j != agent)
    pairs = [(starts[j], targets[j]) for j in others if j != agent]
    blocked = {t for _, t in pairs} | {s for s, _ in pairs}
    for s, t in pairs:
        blocked.update(bottlenecks(graph, s, t))
    cache: dict[int, bool] = {}

    def accept(v: int) -> bool:
        ok = cache.get(v)
        if ok is None:
            ok = v not in blocked
            if ok:
                labels = graph.components_without(v)
                if labels is not None:
                    ok = all(s == v or labels[s] == labels[t] for s, t in pairs)
            cache[v] = ok
        return ok

    return accept


@lru_cache(maxsize=1 << 16)
def bottlenecks(graph: GridGraph, source: int, target: int) -> frozenset[int]:
    """Vertices that every shortest ``source``-``target`` path passes through."""
    ds = graph.distance_table(source).dist
    dt = graph.distance_table(target).dist
    total = ds[target]
    if total == UNREACHABLE:
        return frozenset()
    layers: dict[int, list[int]] = {}
    for v in range(graph.num_vertices):
        if ds[v] + dt[v] == total:
            layers.setdefault(ds[v], []).append(v)
    return frozenset(vs[0] for vs in layers.values() if len(vs) == 1)


def accept_any(v: int) -> bool:
    return True


def _descend(graph: GridGraph, dist: Sequence[float], v: int) -> list[int]:
    out = []
    while dist[v] > 0:
        v = min(u for u in graph.neighbors(v) if dist[u] == dist[v] - 1)
        out.append(v)
    return out


def _nearest(graph: GridGraph, v: int, accept: ParkingFilter) -> list[int] | None:
    parent = {v: None}
    queue = deque([v])
    while queue:
        a = queue.popleft()
        if accept(a):
            out = []
            while a != v:
                out.append(a)
                a = parent[a]
            return out[::-1]
        for b in graph.neighbors(a):
            if b not in parent:
                parent[b] = a
                queue.append(b)
    return None


class _ConflictCounter:
    """Counts conflicts of a single move against fixed paths (stay-at-end)."""

    def __init__(self, paths: Sequence[Sequence[int]], last: float):
        self.cells: dict[tuple[int, int], int] = {}
        self.moves: dict[tuple[int, int, int], int] = {}
        self.parked: dict[int, list[int]] = {}
        self.last = last
        self.last_time = 0
        for p in paths:
            for t, v in enumerate(p):
                self.cells[(v, t)] = self.cells.get((v, t), 0) + 1
                if t:
                    key = (p[t - 1], v, t - 1)
                    self.moves[key] = self.moves.get(key, 0) + 1
            self.parked.setdefault(p[-1], []).append(len(p) - 1)
            self.last_time = max(self.last_time, len(p) - 1)

    def count(self, u: int, w: int, x: int) -> int:
        t = x + 1
        if t > self.last:
            return 0
        n = self.cells.get((w, t), 0)
        n += sum(1 for p in self.parked.get(w, ()) if p < t)
        if u != w:
            n += self.moves.get((w, u, x), 0)
        return n


def _unwind(node: _Node) -> list[int]:
    out = []
    while node is not None:
        out.append(node.v)
        node = node.parent
    return out[::-1]


def astar(graph: GridGraph, start: int, target: int, table: ReservationTable | None = None,
          horizon: float = INF, mode: Mode | str = Mode.CLASSIC, heuristic: Sequence[float] | None = None,
          parking_filter: ParkingFilter | None = None, node_budget: int | None = None,
          deadline: float | None = None, distinguish_visited: bool = True,
          avoid: Sequence[Sequence[int]] = ()) -> SearchResult:
    """Single-agent space-time search.

    ``heuristic`` defaults to the exact distance table of ``target``.
    ``node_budget`` caps expansions; ``deadline`` is a ``time.perf_counter``
    value. Setting ``distinguish_visited=False`` drops the visited flag from
    the duplicate-detection key (only useful to demonstrate why it is needed).
    ``avoid`` holds paths of other agents; among equal-cost nodes the one
    with fewer conflicts against them is expanded first (the tie-break does
    not change the cost of the result).
    """
    mode = Mode.parse(mode)
    transient = mode is Mode.TRANSIENT
    table = table if table is not None else ReservationTable()
    h = heuristic if heuristic is not None else graph.distance_table(target).dist
    accept = parking_filter or accept_any
    # past the last constraint every timestep looks alike; with a finite
    # horizon time still matters since the horizon lifts all constraints
    last = horizon - 1  # last constrained timestep
    cap = table.last_time if horizon == INF else int(last)
    cat = _ConflictCounter(avoid, last) if avoid else None
    if cat is not None and horizon == INF:
        cap = max(cap, cat.last_time)

    if h[start] == UNREACHABLE:
        return SearchResult(None, "exhausted")

    b0 = transient and start == target
    f0 = 0 if b0 else h[start]
    counter = 0
    root = _Node((f0, 0, 0, -int(b0), start, counter), start, 0, b0, 0, None)
    open_list = [root]
    closed: set = set()
    expansions = 0
    generated = 1

    while open_list:
        node = heapq.heappop(open_list)
        v, x, b, g = node.v, node.x, node.b, node.g
        key = (v, x if x <= cap else cap + 1, b if distinguish_visited else False)
        if key in closed:
            continue
        closed.add(key)

        if x >= last:
            if not transient:
                tail = _descend(graph, h, v)
            elif b:
                tail = [] if accept(v) else None
            else:
                tail = _descend(graph, h, v)
                end = tail[-1] if tail else v
                rest = _nearest(graph, end, accept)
                tail = None if rest is None else tail + rest
            if tail is not None:
                return SearchResult(tuple(_unwind(node) + tail), "ok", expansions, generated)
        elif transient:
            if b and accept(v) and table.can_park(v, x, horizon):
                return SearchResult(tuple(_unwind(node)), "ok", expansions, generated)
        elif v == target and table.can_park(v, x, horizon):
            return SearchResult(tuple(_unwind(node)), "ok", expansions, generated)

        if x >= last:
            continue
        expansions += 1
        if node_budget is not None and expansions > node_budget:
            return SearchResult(None, "budget", expansions, generated)
        if deadline is not None and expansions % 128 == 0 and time.perf_counter() > deadline:
            return SearchResult(None, "budget", expansions, generated)

        nx_ = x + 1
        nkt = nx_ if nx_ <= cap else cap + 1
        for w in graph.neighbors(v):
            if table.move_blocked(v, w, x, horizon):
                continue
            if transient:
                nb = b or w == target
                ng = g if b else g + 1
                hw = 0 if nb else h[w]
            else:
                nb = False
                ng = g + 1
                hw = h[w]
            if hw == UNREACHABLE:
                continue
            if (w, nkt, nb if distinguish_visited else False) in closed:
                continue
            counter += 1
            generated += 1
            nc = node.sort_key[1] + (cat.count(v, w, x) if cat is not None else 0)
            heapq.heappush(open_list, _Node((ng + hw, nc, -ng, -int(nb), w, counter), w, nx_, nb, ng, node))

    return SearchResult(None, "exhausted", expansions, generated)
