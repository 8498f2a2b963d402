import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import single_agent_paths
from tmapf.core import INF, Instance, Mode, detect_conflicts, first_visit, validate
from tmapf.grid import GridGraph
from tmapf.search import ReservationTable, accept_any, astar, bottlenecks, default_parking_filter, reserve

P1, P2, P3, P4 = range(4)


def corridor():
    return GridGraph.from_rows(["...."])


def test_reserved_vertex_blocks_move():
    table = reserve(ReservationTable(), [P1, P2])
    assert table.move_blocked(P3, P2, 0)


def test_reserved_edge_blocks_swap():
    table = reserve(ReservationTable(), [P1, P2])
    assert table.move_blocked(P2, P1, 0)
    assert not table.move_blocked(P3, P4, 0)


def test_parked_vertex_blocks_forever():
    table = reserve(ReservationTable(), [P1, P2], park=True)
    assert table.occupied(P2, 9)
    assert table.move_blocked(P3, P2, 8)
    assert not table.can_park(P2, 9)


def test_horizon_lifts_constraints():
    table = reserve(ReservationTable(), [P1, P2], park=True)
    assert table.move_blocked(P3, P2, 0, horizon=2)
    assert not table.move_blocked(P3, P2, 0, horizon=1)


def test_classic_unconstrained_corridor():
    res = astar(corridor(), P1, P3)
    assert res.path == (P1, P2, P3)
    assert res.ok and res.expansions > 0


# a1 waits once, then walks p1 -> p3 and stays there
A1 = (P1, P1, P2, P3)


def a1_table():
    return reserve(ReservationTable(), A1, park=True)


def corridor_instance():
    return Instance(corridor(), (P1, P3), (P3, P2))


def test_transient_steps_aside_after_visit():
    inst = corridor_instance()
    accept = default_parking_filter(inst.graph, 1, inst.starts, inst.targets)
    res = astar(inst.graph, P3, P2, a1_table(), mode=Mode.TRANSIENT, parking_filter=accept)
    assert res.path == (P3, P2, P3, P4)
    assert validate([A1, res.path], inst, Mode.TRANSIENT) == []


def test_transient_path_is_minimal_by_enumeration():
    inst = corridor_instance()
    feasible = []
    for p in single_agent_paths(inst.graph, P3, 6):
        if P2 in p and not detect_conflicts([A1, p]):
            feasible.append(p)
    assert feasible
    best = min(first_visit(p, P2) for p in feasible)
    res = astar(inst.graph, P3, P2, a1_table(), mode=Mode.TRANSIENT)
    assert first_visit(res.path, P2) == best == 1


def test_classic_fails_when_target_must_be_vacated():
    inst = corridor_instance()
    res = astar(inst.graph, P3, P2, a1_table(), mode=Mode.CLASSIC)
    assert res.path is None and res.status == "exhausted"
    # no path of up to 6 moves ends on p2 without a conflict
    assert not any(p[-1] == P2 and not detect_conflicts([A1, p]) for p in single_agent_paths(inst.graph, P3, 6))


def branching_corridor():
    g = GridGraph.from_rows([".....", "@@@.@"])
    s1, s2, t2, v1, t1 = (g.vertex(x, 0) for x in range(5))
    return g, (s1, s2, t2, v1, t1, g.vertex(3, 1))


def test_branching_corridor_second_agent():
    g, (s1, s2, t2, v1, t1, v2) = branching_corridor()
    first = astar(g, s1, t1)
    assert first.path == (s1, s2, t2, v1, t1)
    table = reserve(ReservationTable(), first.path, park=True)
    classic = astar(g, s2, t2, table, mode=Mode.CLASSIC)
    transient = astar(g, s2, t2, table, mode=Mode.TRANSIENT)
    assert classic.path == (s2, t2, v1, v2, v1, t2)
    assert transient.path == (s2, t2, v1, v2)


def test_dropping_visited_flag_loses_dead_end_target():
    # the target is a dead end and may not be used for parking, so the
    # agent has to come back through a cell it already passed
    g = GridGraph.from_rows(["..", ".@"])
    start, target = g.vertex(1, 0), g.vertex(0, 1)
    accept = lambda v: v != target  # noqa: E731
    full = astar(g, start, target, mode=Mode.TRANSIENT, parking_filter=accept)
    reduced = astar(g, start, target, mode=Mode.TRANSIENT, parking_filter=accept, distinguish_visited=False)
    assert full.path == (start, g.vertex(0, 0), target, g.vertex(0, 0))
    assert reduced.path is None


def test_budget_failure_is_distinct():
    g = GridGraph.from_rows(["." * 10] * 10)
    res = astar(g, 0, 99, node_budget=3)
    assert res.status == "budget" and res.path is None
    blocked = GridGraph.from_rows([".@."])
    assert astar(blocked, 0, 1).status == "exhausted"


def test_finite_horizon_completes_optimistically():
    table = a1_table()
    res = astar(corridor(), P3, P2, table, horizon=2, mode=Mode.CLASSIC)
    assert res.ok and res.path[-1] == P2
    assert not detect_conflicts([A1, res.path], horizon=2)


def test_parking_filter_rejects_bottlenecks_and_targets():
    g = GridGraph.from_rows(["....."])
    accept = default_parking_filter(g, 0, (0, 4), (2, 1))
    # agent 1 walks 4 -> 1: every cell in between is a bottleneck
    assert [accept(v) for v in range(5)] == [True, False, False, False, False]
    assert bottlenecks(g, 4, 1) == frozenset({1, 2, 3, 4})


def random_setup(seed):
    rng = random.Random(seed)
    rows = ["".join("@" if rng.random() < 0.2 else "." for _ in range(5)) for _ in range(4)]
    g = GridGraph.from_rows(rows)
    if g.num_vertices < 3:
        return None
    start, target = rng.sample(range(g.num_vertices), 2)
    table = ReservationTable()
    others = []
    for _ in range(rng.randint(0, 2)):
        p = [rng.choice([v for v in range(g.num_vertices) if v != start])]
        for _ in range(rng.randint(0, 5)):
            p.append(rng.choice(g.neighbors(p[-1])))
        if detect_conflicts(others + [p]):
            continue
        others.append(p)
        table.reserve(p, park=True)
    return g, start, target, table, others


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_empty_table_classic_cost_is_distance(seed):
    setup = random_setup(seed)
    if setup is None:
        return
    g, start, target, _, _ = setup
    res = astar(g, start, target)
    d = g.distance(start, target)
    if d == INF:
        assert not res.ok
    else:
        assert len(res.path) - 1 == d


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_transient_never_slower_and_paths_valid(seed):
    setup = random_setup(seed)
    if setup is None:
        return
    g, start, target, table, others = setup
    classic = astar(g, start, target, table.copy(), mode=Mode.CLASSIC, node_budget=5000)
    transient = astar(g, start, target, table.copy(), mode=Mode.TRANSIENT, parking_filter=accept_any,
                      node_budget=5000)
    starts = [p[0] for p in others] + [start]
    for mode, res in ((Mode.CLASSIC, classic), (Mode.TRANSIENT, transient)):
        if res.ok:
            targets = [p[-1] for p in others] + [target]
            assert validate(others + [res.path], Instance(g, starts, targets), mode) == []
    if classic.ok:
        assert transient.ok
        assert first_visit(transient.path, target) <= len(classic.path) - 1
