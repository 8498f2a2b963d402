"""MovingAI map/scenario parsing and the grid graph used by every solver.

Vertices are the passable cells, numbered densely in row-major order.
Every vertex has a self-edge (wait move) and up to four orthogonal
neighbours. Distance tables are exact BFS distances, cached per target.
"""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Iterable, Sequence

import networkx as nx

UNREACHABLE = math.inf

PASSABLE_CHARS = frozenset(".G")
BLOCKED_CHARS = frozenset("@TO")

Cell = tuple[int, int]


class MapParseError(ValueError):
    """Raised for malformed ``.map`` text; the message names the line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class DistanceTable:
    target: int
    dist: tuple[float, ...]

    def __getitem__(self, v: int) -> float:
        return self.dist[v]

    def __len__(self) -> int:
        return len(self.dist)


class GridGraph:
    """Immutable 4-connected grid with implicit self-edges."""

    def __init__(self, width: int, height: int, passable: Sequence[bool]):
        if width <= 0 or height <= 0:
            raise ValueError("grid dimensions must be positive")
        if len(passable) != width * height:
            raise ValueError("passable mask does not match grid size")
        self.width = width
        self.height = height
        self.passable = tuple(bool(p) for p in passable)

        self._cell_to_vertex: dict[Cell, int] = {}
        self._vertex_to_cell: list[Cell] = []
        for y in range(height):
            for x in range(width):
                if self.passable[y * width + x]:
                    self._cell_to_vertex[(x, y)] = len(self._vertex_to_cell)
                    self._vertex_to_cell.append((x, y))

        nbrs = []
        for v, (x, y) in enumerate(self._vertex_to_cell):
            adj = [v]
            for dx, dy in ((0, -1), (-1, 0), (1, 0), (0, 1)):
                u = self._cell_to_vertex.get((x + dx, y + dy))
                if u is not None:
                    adj.append(u)
            nbrs.append(tuple(adj))
        self._neighbors: tuple[tuple[int, ...], ...] = tuple(nbrs)

        self._dist_cache: dict[int, DistanceTable] = {}
        self._cut_cache: dict[int, tuple[int, ...]] = {}
        self._articulation: frozenset[int] | None = None
        self._lock = threading.Lock()

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "GridGraph":
        height = len(rows)
        width = len(rows[0]) if rows else 0
        cells = []
        for row in rows:
            if len(row) != width:
                raise ValueError("ragged rows")
            cells.extend(ch in PASSABLE_CHARS for ch in row)
        return cls(width, height, cells)

    @property
    def num_vertices(self) -> int:
        return len(self._vertex_to_cell)

    def __len__(self) -> int:
        return self.num_vertices

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridGraph):
            return NotImplemented
        return (self.width, self.height, self.passable) == (other.width, other.height, other.passable)

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.passable))

    def __repr__(self) -> str:
        return f"GridGraph({self.width}x{self.height}, {self.num_vertices} vertices)"

    def vertex(self, x: int, y: int) -> int:
        try:
            return self._cell_to_vertex[(x, y)]
        except KeyError:
            raise KeyError(f"cell ({x},{y}) is not a passable cell") from None

    def has_cell(self, x: int, y: int) -> bool:
        return (x, y) in self._cell_to_vertex

    def cell(self, v: int) -> Cell:
        return self._vertex_to_cell[v]

    def neighbors(self, v: int) -> tuple[int, ...]:
        """Neighbours of ``v``, always starting with ``v`` itself."""
        return self._neighbors[v]

    def vertices(self) -> range:
        return range(self.num_vertices)

    def distance_table(self, target: int) -> DistanceTable:
        table = self._dist_cache.get(target)
        if table is None:
            table = self._bfs(target)
            with self._lock:
                table = self._dist_cache.setdefault(target, table)
        return table

    def distance(self, u: int, v: int) -> float:
        return self.distance_table(v)[u]

    def _bfs(self, target: int, removed: int | None = None) -> DistanceTable:
        if not 0 <= target < self.num_vertices:
            raise IndexError(f"vertex {target} out of range")
        dist = [UNREACHABLE] * self.num_vertices
        dist[target] = 0
        queue = deque([target])
        while queue:
            v = queue.popleft()
            d = dist[v] + 1
            for u in self._neighbors[v]:
                if dist[u] == UNREACHABLE and u != removed:
                    dist[u] = d
                    queue.append(u)
        return DistanceTable(target, tuple(dist))

    def articulation_points(self) -> frozenset[int]:
        if self._articulation is None:
            g = nx.Graph()
            g.add_nodes_from(self.vertices())
            g.add_edges_from((v, u) for v in self.vertices() for u in self._neighbors[v] if u > v)
            self._articulation = frozenset(nx.articulation_points(g))
        return self._articulation

    def components_without(self, v: int) -> tuple[int, ...] | None:
        """Component labels of the graph with ``v`` removed.

        Returns None when ``v`` is not a cut vertex (removal cannot
        disconnect anything). The removed vertex gets label -1.
        """
        if v not in self.articulation_points():
            return None
        labels = self._cut_cache.get(v)
        if labels is None:
            comp = [-1] * self.num_vertices
            label = 0
            for s in self.vertices():
                if s == v or comp[s] != -1:
                    continue
                comp[s] = label
                queue = deque([s])
                while queue:
                    a = queue.popleft()
                    for b in self._neighbors[a]:
                        if b != v and comp[b] == -1:
                            comp[b] = label
                            queue.append(b)
                label += 1
            labels = tuple(comp)
            with self._lock:
                self._cut_cache[v] = labels
        return labels

    def to_map_text(self) -> str:
        lines = ["type octile", f"height {self.height}", f"width {self.width}", "map"]
        for y in range(self.height):
            row = self.passable[y * self.width:(y + 1) * self.width]
            lines.append("".join("." if p else "@" for p in row))
        return "\n".join(lines) + "\n"


def _lines(text: str) -> list[str]:
    return text.replace("\r\n", "\n").split("\n")


def parse_map(text: str) -> GridGraph:
    lines = _lines(text)
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        key, _, value = raw.partition(" ")
        key = key.lower()
        if key == "map":
            break
        if key not in ("type", "height", "width"):
            raise MapParseError(i, f"unexpected header line {raw!r}")
        header[key] = value.strip()
    else:
        raise MapParseError(len(lines), "missing 'map' line")

    for key in ("type", "height", "width"):
        if key not in header:
            raise MapParseError(i, f"missing '{key}' header")
    try:
        height = int(header["height"])
        width = int(header["width"])
    except ValueError:
        raise MapParseError(i, "height/width must be integers") from None
    if height <= 0 or width <= 0:
        raise MapParseError(i, "height/width must be positive")

    rows = lines[i:]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise MapParseError(i + len(rows), f"expected {height} rows, found {len(rows)}")
    cells: list[bool] = []
    for r, row in enumerate(rows):
        lineno = i + r + 1
        row = row.rstrip("\r")
        if len(row) != width:
            raise MapParseError(lineno, f"expected width {width}, found {len(row)}")
        for ch in row:
            if ch in PASSABLE_CHARS:
                cells.append(True)
            elif ch in BLOCKED_CHARS:
                cells.append(False)
            else:
                raise MapParseError(lineno, f"unknown cell character {ch!r}")
    return GridGraph(width, height, cells)


def load_map(path: str | FsPath) -> GridGraph:
    return parse_map(FsPath(path).read_text())


@dataclass(frozen=True)
class ScenEntry:
    bucket: int
    map_name: str
    start: Cell
    goal: Cell
    optimal_length: float


def parse_scen(text: str, graph: GridGraph | None = None) -> list[ScenEntry]:
    """Parse a MovingAI ``.scen`` file; validate cells when ``graph`` is given."""
    lines = _lines(text)
    entries: list[ScenEntry] = []
    seen_version = False
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        if not seen_version:
            if not raw.lower().startswith("version"):
                raise ScenarioError(f"line {lineno}: expected version line")
            seen_version = True
            continue
        fields = raw.rstrip("\r").split("\t")
        if len(fields) != 9:
            raise ScenarioError(f"line {lineno}: expected 9 tab-separated fields, got {len(fields)}")
        try:
            bucket = int(fields[0])
            w, h, sx, sy, gx, gy = (int(f) for f in fields[2:8])
            opt = float(fields[8])
        except ValueError:
            raise ScenarioError(f"line {lineno}: non-numeric field") from None
        for cx, cy in ((sx, sy), (gx, gy)):
            if not (0 <= cx < w and 0 <= cy < h):
                raise ScenarioError(f"line {lineno}: cell ({cx},{cy}) out of bounds")
            if graph is not None:
                if not (0 <= cx < graph.width and 0 <= cy < graph.height):
                    raise ScenarioError(f"line {lineno}: cell ({cx},{cy}) outside map")
                if not graph.has_cell(cx, cy):
                    raise ScenarioError(f"line {lineno}: cell ({cx},{cy}) is blocked")
        entries.append(ScenEntry(bucket, fields[1], (sx, sy), (gx, gy), opt))
    if not seen_version:
        raise ScenarioError("missing version line")
    return entries


def cells_to_vertices(graph: GridGraph, cells: Iterable[Cell]) -> list[int]:
    return [graph.vertex(x, y) for x, y in cells]
