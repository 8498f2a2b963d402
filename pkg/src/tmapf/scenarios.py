"""Pathological and randomized instances, plus a small text fixture format.

Fixture format (one directive per line, ``#`` comments)::

    map <file relative to the fixture, or 'inline'>
    <map text when inline, terminated by 'end'>
    agent <id> start <x> <y> targets <x> <y>[; <x> <y> ...]

The first listed target is the one-shot target; the full list is the
agent's cyclic lifelong sequence.
"""

from __future__ import annotations

import itertools
import random
from importlib import resources
from pathlib import Path as FsPath
from typing import Iterable, Sequence

from .core import INF, Instance, Mode
from .grid import GridGraph, parse_map
from .lifelong import DenseStream, RhcrConfig, ScriptedStream, UniformStream, run_lifelong


def build_swap_corridor() -> Instance:
    """Four-cell corridor p1-p2-p3-p4 where a1 (p1 -> p3) and a2 (p3 -> p2)
    would have to swap. p4 is the side cell a2 can retreat to."""
    graph = GridGraph.from_rows(["...."])
    p1, p2, p3, p4 = range(4)
    stream = ScriptedStream([[p3, p1], [p2, p3]])
    return Instance(graph, (p1, p3), (p3, p2), stream=stream)


def make_swap_corridor() -> Instance:
    return load_fixture("swap_corridor.txt")


def fresh_stream(instance: Instance):
    """A new copy of a scripted instance's stream, rewound to the start."""
    stream = instance.stream
    if isinstance(stream, ScriptedStream):
        return ScriptedStream(stream.sequences)
    raise TypeError("instance has no scripted stream")


def ring_graph(size: int) -> GridGraph:
    """A hollow rectangle whose border cells form a cycle of ``size`` vertices."""
    if size < 8 or size % 2:
        raise ValueError("grid rings have an even length of at least 8")
    width = size // 2 - 1
    rows = ["." * width, "." + "@" * (width - 2) + ".", "." * width]
    return GridGraph.from_rows(rows)


def ring_order(graph: GridGraph) -> list[int]:
    """Vertices of a ring graph in cycle order starting from vertex 0."""
    order = [0]
    prev = None
    while True:
        v = order[-1]
        nxt = [u for u in graph.neighbors(v) if u != v and u != prev]
        u = min(nxt)
        if u == 0:
            return order
        prev = v
        order.append(u)


def _fixture_path(name: str):
    return resources.files("tmapf").joinpath("fixtures", name)


def load_fixture(path) -> Instance:
    """Load an instance fixture from a path or a packaged fixture name."""
    p = FsPath(path) if not isinstance(path, FsPath) else path
    if not p.exists():
        p = _fixture_path(str(path))
    text = p.read_text()
    return parse_fixture(text, base=FsPath(str(p)).parent)


def parse_fixture(text: str, base: FsPath | None = None) -> Instance:
    lines = text.replace("\r\n", "\n").split("\n")
    graph = None
    agents: dict[int, tuple] = {}
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw or raw.startswith("#"):
            continue
        head, _, rest = raw.partition(" ")
        if head == "map":
            if rest.strip() == "inline":
                body = []
                while i < len(lines) and lines[i].strip() != "end":
                    body.append(lines[i])
                    i += 1
                i += 1
                graph = parse_map("\n".join(body))
            else:
                graph = parse_map(((base or FsPath(".")) / rest.strip()).read_text())
        elif head == "agent":
            if graph is None:
                raise ValueError(f"line {i}: agent before map")
            parts = rest.split()
            if len(parts) < 7 or parts[1] != "start" or parts[4] != "targets":
                raise ValueError(f"line {i}: malformed agent line")
            aid = int(parts[0])
            start = graph.vertex(int(parts[2]), int(parts[3]))
            cells = " ".join(parts[5:]).split(";")
            seq = []
            for c in cells:
                x, y = c.split()
                seq.append(graph.vertex(int(x), int(y)))
            agents[aid] = (start, seq)
        else:
            raise ValueError(f"line {i}: unknown directive {head!r}")
    if graph is None:
        raise ValueError("fixture has no map")
    if sorted(agents) != list(range(len(agents))):
        raise ValueError("agent ids must be 0..n-1")
    starts = [agents[a][0] for a in range(len(agents))]
    seqs = [agents[a][1] for a in range(len(agents))]
    return Instance(graph, starts, [s[0] for s in seqs], stream=ScriptedStream(seqs))


def format_fixture(instance: Instance, sequences: Sequence[Sequence[int]] | None = None) -> str:
    g = instance.graph
    if sequences is None:
        stream = instance.stream
        sequences = stream.sequences if isinstance(stream, ScriptedStream) else [[t] for t in instance.targets]
    out = ["map inline", g.to_map_text().rstrip("\n"), "end"]
    for a, (s, seq) in enumerate(zip(instance.starts, sequences)):
        targets = "; ".join("{} {}".format(*g.cell(v)) for v in seq)
        out.append("agent {} start {} {} targets {}".format(a, *g.cell(s), targets))
    return "\n".join(out) + "\n"


def make_starvation_ring() -> Instance:
    return load_fixture("starvation_ring.txt")


def make_random_instance(graph: GridGraph, num_agents: int, stream_kind: str = "uniform", seed: int = 0,
                         num_targets: int = 10, dense_targets: Sequence[int] | None = None) -> Instance:
    """Distinct uniform starts plus a target stream.

    ``stream_kind`` is ``uniform`` (any vertex) or ``dense`` (a fixed list of
    ``num_targets`` vertices sampled without replacement, or ``dense_targets``).
    The one-shot targets are the stream's first draws.
    """
    if num_agents > graph.num_vertices:
        raise ValueError(f"{num_agents} agents do not fit on {graph.num_vertices} cells")
    rng = random.Random(seed)
    starts = rng.sample(range(graph.num_vertices), num_agents)
    if stream_kind == "uniform":
        stream = UniformStream(graph, seed=rng.randrange(2**31))
    elif stream_kind == "dense":
        if dense_targets is None:
            if num_targets > graph.num_vertices:
                raise ValueError("more dense targets than cells")
            dense_targets = rng.sample(range(graph.num_vertices), num_targets)
        stream = DenseStream(list(dense_targets), seed=rng.randrange(2**31))
    else:
        raise ValueError(f"unknown stream kind {stream_kind!r}")
    targets = [stream.next(i) for i in range(num_agents)]
    return Instance(graph, starts, targets, stream=stream)


def random_grid(width: int, height: int, obstacle_ratio: float, seed: int) -> GridGraph:
    """Random map whose passable cells form one connected component."""
    rng = random.Random(seed)
    while True:
        cells = [rng.random() >= obstacle_ratio for _ in range(width * height)]
        if not any(cells):
            continue
        g = GridGraph(width, height, cells)
        d = g.distance_table(0)
        if all(x != INF for x in d.dist):
            return g


# --- starvation ring search -------------------------------------------------

def ring_throughput(instance: Instance, solver: str, mode: Mode | str, w: float, steps: int,
                    sequences: Sequence[Sequence[int]] | None = None) -> int:
    seqs = sequences if sequences is not None else instance.stream.sequences
    cfg = RhcrConfig(solver=solver, mode=mode, k=1, w=w, replan="every-step", checkpoints=())
    run = run_lifelong(instance.graph, instance.starts, ScriptedStream(seqs), cfg, steps)
    return run.throughput


def ring_properties(instance: Instance, steps: int = 40, sequences=None) -> dict[str, bool]:
    """Check the behavioural contract of the starvation ring on a short run.

    ``classic_short_horizon_deadlock`` is reported but not required by
    :func:`find_starvation_ring`: a prioritized planner on a plain cycle
    always lets one agent step aside once the horizon reaches 2.
    """
    tp = lambda solver, mode, w: ring_throughput(instance, solver, mode, w, steps, sequences)  # noqa: E731
    return {
        "horizon_1_deadlock": tp("prp", "classic", 1) == 0 and tp("prp", "transient", 1) == 0,
        "transient_horizon_2_deadlock": tp("prp", "transient", 2) == 0,
        "classic_starves": all(abs(tp("prp", "classic", w) - steps // 2) <= 1 for w in (7, 8, INF)),
        "transient_flows": all(tp("prp", "transient", w) >= steps - 2 for w in (3, 4, 8, INF)),
        "classic_short_horizon_deadlock": all(tp("prp", "classic", w) == 0 for w in range(2, 6)),
    }


REQUIRED_RING_PROPERTIES = ("horizon_1_deadlock", "transient_horizon_2_deadlock", "classic_starves",
                            "transient_flows")


def ring_instance(size: int, s1: int, t1: int, s2: int, t2: int) -> Instance:
    """Two agents shuttling between ring positions (indices along the cycle)."""
    graph = ring_graph(size)
    order = ring_order(graph)
    vs = [order[s1], order[t1], order[s2], order[t2]]
    seqs = [[vs[1], vs[0]], [vs[3], vs[2]]]
    return Instance(graph, (vs[0], vs[2]), (vs[1], vs[3]), stream=ScriptedStream(seqs))


def find_starvation_ring(sizes: Iterable[int] = (8, 10), steps: int = 40,
                         required: Sequence[str] = REQUIRED_RING_PROPERTIES) -> Instance | None:
    """Brute-force the first ring layout that has every required property."""
    for size in sizes:
        for s1, t1, s2, t2 in itertools.permutations(range(size), 4):
            if s1 != 0:
                continue  # rotations are equivalent
            inst = ring_instance(size, s1, t1, s2, t2)
            props = ring_properties(inst, steps)
            if all(props[name] for name in required):
                return inst
    return None
