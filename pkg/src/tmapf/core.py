"""Paths, conflicts, costs and solution validation.

A path is a tuple of vertex ids indexed by timestep. Once a path ends the
agent is treated as staying on its last vertex forever, so paths of
different lengths can be compared for conflicts.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

from .grid import GridGraph

Path = tuple[int, ...]

INF = math.inf


class Mode(str, enum.Enum):
    CLASSIC = "classic"
    TRANSIENT = "transient"

    @classmethod
    def parse(cls, value: "str | Mode") -> "Mode":
        if isinstance(value, Mode):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown mode {value!r}; expected 'classic' or 'transient'") from None


@dataclass(frozen=True)
class Instance:
    """A one-shot problem: graph plus per-agent start and target vertices.

    ``stream`` optionally carries the target stream for lifelong use.
    """

    graph: GridGraph
    starts: tuple[int, ...]
    targets: tuple[int, ...]
    stream: object | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "starts", tuple(self.starts))
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.starts) != len(self.targets):
            raise ValueError("starts and targets differ in length")
        if len(set(self.starts)) != len(self.starts):
            raise ValueError("starts must be pairwise distinct")
        n = self.graph.num_vertices
        for v in self.starts + self.targets:
            if not 0 <= v < n:
                raise ValueError(f"vertex {v} not in graph")

    @property
    def num_agents(self) -> int:
        return len(self.starts)


@dataclass(frozen=True)
class Conflict:
    kind: str  # "vertex" | "swap"
    agents: tuple[int, int]
    timestep: int
    location: tuple[int, ...]  # (v,) for vertex, (u, w) = agent_0's move for swap


@dataclass
class Solution:
    paths: list[Path]
    mode: Mode

    @property
    def soc(self) -> int:
        return soc(self.paths)

    @property
    def makespan(self) -> int:
        return makespan(self.paths)


def path_cost(path: Sequence[int]) -> int:
    if not path:
        raise ValueError("empty path")
    return len(path) - 1


def soc(paths: Sequence[Sequence[int]]) -> int:
    return sum(path_cost(p) for p in paths)


def makespan(paths: Sequence[Sequence[int]]) -> int:
    return max((path_cost(p) for p in paths), default=0)


def first_visit(path: Sequence[int], target: int) -> int | None:
    """Index of the first occurrence of ``target`` in ``path``."""
    for i, v in enumerate(path):
        if v == target:
            return i
    return None


def transient_cost(paths: Sequence[Sequence[int]], targets: Sequence[int]) -> int:
    """Sum over agents of the time until the target is first visited."""
    total = 0
    for p, t in zip(paths, targets):
        x = first_visit(p, t)
        if x is None:
            raise ValueError("path never visits its target")
        total += x
    return total


def solution_cost(paths, targets, mode: Mode) -> int:
    return soc(paths) if mode is Mode.CLASSIC else transient_cost(paths, targets)


def at(path: Sequence[int], x: int) -> int:
    return path[x] if x < len(path) else path[-1]


def detect_conflicts(paths: Sequence[Sequence[int]], horizon: float = INF) -> list[Conflict]:
    """All vertex and swap conflicts, earliest first.

    Only conflicts at timesteps before ``horizon`` count: a vertex conflict
    at x when x < horizon, a swap across x -> x+1 when x+1 < horizon.
    Agent ids are path indices.
    """
    n = len(paths)
    if n < 2:
        return []
    longest = max(len(p) for p in paths)
    end = longest if horizon == INF else min(longest, int(horizon))
    out: list[Conflict] = []
    for x in range(end):
        occupied: dict[int, list[int]] = {}
        for i, p in enumerate(paths):
            occupied.setdefault(at(p, x), []).append(i)
        for v in sorted(occupied):
            agents = occupied[v]
            for a in range(len(agents)):
                for b in range(a + 1, len(agents)):
                    out.append(Conflict("vertex", (agents[a], agents[b]), x, (v,)))
        if x + 1 >= longest or x + 1 >= horizon:
            continue
        moves: dict[tuple[int, int], list[int]] = {}
        for i, p in enumerate(paths):
            u, w = at(p, x), at(p, x + 1)
            if u != w:
                moves.setdefault((u, w), []).append(i)
        swaps = []
        for (u, w), movers in moves.items():
            for i in movers:
                for j in moves.get((w, u), ()):
                    if i < j:
                        swaps.append(Conflict("swap", (i, j), x, (u, w)))
        swaps.sort(key=lambda c: c.agents)
        out.extend(swaps)
    out.sort(key=lambda c: (c.timestep, c.agents, c.kind))
    return out


def validate(solution: Solution | Sequence[Sequence[int]], instance: Instance, mode: Mode | str | None = None,
             horizon: float = INF) -> list[str]:
    """Return every violation found; an empty list means the solution is valid."""
    if isinstance(solution, Solution):
        paths = solution.paths
        mode = Mode.parse(mode) if mode is not None else solution.mode
    else:
        paths = list(solution)
        mode = Mode.parse(mode or Mode.CLASSIC)
    graph = instance.graph
    problems: list[str] = []
    if len(paths) != instance.num_agents:
        return [f"expected {instance.num_agents} paths, got {len(paths)}"]
    for i, p in enumerate(paths):
        if not p:
            problems.append(f"path of a{i} is empty")
            continue
        if p[0] != instance.starts[i]:
            problems.append(f"path of a{i} does not start at s{i}")
        for x in range(len(p) - 1):
            if p[x + 1] not in graph.neighbors(p[x]):
                problems.append(f"path of a{i} jumps from {graph.cell(p[x])} to {graph.cell(p[x + 1])} at t={x}")
        t = instance.targets[i]
        if mode is Mode.CLASSIC and p[-1] != t:
            problems.append(f"path of a{i} does not end at t{i}")
        if mode is Mode.TRANSIENT and t not in p:
            problems.append(f"path of a{i} does not visit t{i}")
    if all(paths):
        for c in detect_conflicts(paths, horizon):
            i, j = c.agents
            problems.append(f"{c.kind} conflict between a{i} and a{j} at t={c.timestep}")
    return problems


_LINE = re.compile(r"^\s*(\d+)\s*:\s*(.*)$")
_CELL = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")


def format_paths(graph: GridGraph, paths: Sequence[Sequence[int]]) -> str:
    lines = []
    for i, p in enumerate(paths):
        cells = "->".join("({},{})".format(*graph.cell(v)) for v in p)
        lines.append(f"{i}: {cells}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_paths(graph: GridGraph, text: str) -> list[Path]:
    paths: dict[int, Path] = {}
    for lineno, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        m = _LINE.match(raw)
        if not m:
            raise ValueError(f"line {lineno}: expected 'agent_id: (x,y)->...'")
        cells = _CELL.findall(m.group(2))
        if not cells:
            raise ValueError(f"line {lineno}: no cells")
        try:
            paths[int(m.group(1))] = tuple(graph.vertex(int(x), int(y)) for x, y in cells)
        except KeyError as exc:
            raise ValueError(f"line {lineno}: {exc.args[0]}") from None
    if sorted(paths) != list(range(len(paths))):
        raise ValueError("agent ids must be 0..n-1")
    return [paths[i] for i in range(len(paths))]


@dataclass
class SolveResult:
    """Outcome of a one-shot solve.

    ``status`` is "ok", "failed" (search exhausted for some agent),
    "budget" (node or time budget ran out) or "unsolvable" (proved).
    ``partial`` holds mutually conflict-free paths for a subset of agents
    when the solve failed.
    """

    status: str
    solution: Solution | None = None
    partial: dict[int, Path] = field(default_factory=dict)
    failed_agent: int | None = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def paths(self) -> list[Path] | None:
        return None if self.solution is None else self.solution.paths
