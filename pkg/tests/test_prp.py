import itertools
import random

import pytest

from oracles import has_mapf_solution, transient_optimum
from tmapf.core import Instance, Mode, first_visit, validate
from tmapf.grid import GridGraph
from tmapf.prp import LnsConfig, PrpConfig, default_order, lns_solve, prp_solve
from tmapf.scenarios import make_random_instance, make_swap_corridor, random_grid
from tmapf.search import astar


@pytest.mark.parametrize("order", [[0, 1], [1, 0]])
def test_corridor_every_order(order):
    inst = make_swap_corridor()
    transient = prp_solve(inst, PrpConfig(mode=Mode.TRANSIENT, order=order))
    assert transient.ok
    assert validate(transient.paths, inst, Mode.TRANSIENT) == []
    classic = prp_solve(inst, PrpConfig(mode=Mode.CLASSIC, order=order))
    assert not classic.ok
    assert classic.failed_agent == order[1]
    assert set(classic.partial) == {order[0]}


def test_corridor_oracle_agrees():
    inst = make_swap_corridor()
    assert not has_mapf_solution(inst.graph, inst.starts, inst.targets)
    assert transient_optimum(inst.graph, inst.starts, inst.targets) is not None


def test_single_agent_matches_astar():
    g = random_grid(8, 8, 0.2, 3)
    inst = Instance(g, (0,), (g.num_vertices - 1,))
    for mode in Mode:
        res = prp_solve(inst, PrpConfig(mode=mode))
        assert res.paths[0] == astar(g, 0, g.num_vertices - 1, mode=mode).path


def test_disjoint_corridors():
    g = GridGraph.from_rows(["......", "@@@@@@", "......"])
    inst = Instance(g, (g.vertex(0, 0), g.vertex(5, 2)), (g.vertex(5, 0), g.vertex(0, 2)))
    res = prp_solve(inst)
    assert res.ok and res.solution.soc == 10


def test_branching_corridor_transient_dominance():
    g = GridGraph.from_rows([".....", "@@@.@"])
    inst = Instance(g, (g.vertex(0, 0), g.vertex(1, 0)), (g.vertex(4, 0), g.vertex(2, 0)))
    classic = prp_solve(inst, PrpConfig(mode=Mode.CLASSIC, order=[0, 1]))
    transient = prp_solve(inst, PrpConfig(mode=Mode.TRANSIENT, order=[0, 1]))
    assert (classic.solution.soc, classic.solution.makespan) == (9, 5)
    assert (transient.solution.soc, transient.solution.makespan) == (7, 4)
    for i, t in enumerate(inst.targets):
        assert first_visit(transient.paths[i], t) <= len(classic.paths[i]) - 1


def test_default_order_farthest_first():
    g = GridGraph.from_rows(["......"])
    inst = Instance(g, (0, 1, 5), (2, 5, 4))
    assert default_order(inst) == [1, 0, 2]


def test_bad_configs():
    with pytest.raises(ValueError):
        PrpConfig(restarts=0)
    with pytest.raises(ValueError):
        PrpConfig(horizon=0)
    with pytest.raises(ValueError):
        LnsConfig(neighborhood_size=0)
    with pytest.raises(ValueError):
        LnsConfig(destroy=("agent",))
    with pytest.raises(ValueError):
        prp_solve(make_swap_corridor(), PrpConfig(order=[0, 0]))


def test_restarts_reshuffle_after_failure():
    # a1 parked at the junction blocks a0 for good; a0 first gets through
    g = GridGraph.from_rows(["...", "@.@"])
    inst = Instance(g, (g.vertex(0, 0), g.vertex(1, 1)), (g.vertex(2, 0), g.vertex(1, 0)))
    assert not prp_solve(inst, PrpConfig(order=[1, 0])).ok
    for seed in range(5):
        res = prp_solve(inst, PrpConfig(order=[1, 0], restarts=4, seed=seed))
        if res.ok:
            assert validate(res.paths, inst, Mode.CLASSIC) == []
            assert res.stats["restarts"] > 1
            return
    pytest.fail("no restart succeeded")


def small_instance(seed, agents=3):
    g = random_grid(8, 8, 0.15, seed)
    return make_random_instance(g, agents, seed=seed)


@pytest.mark.parametrize("mode", list(Mode))
def test_lns_zero_iterations_equals_prp(mode):
    inst = small_instance(1, 5)
    prp = prp_solve(inst, PrpConfig(mode=mode, seed=4))
    lns = lns_solve(inst, LnsConfig(mode=mode, iterations=0, seed=4))
    assert lns.paths == prp.paths


@pytest.mark.parametrize("mode", list(Mode))
def test_lns_improves_monotonically(mode):
    inst = small_instance(2, 3)
    res = lns_solve(inst, LnsConfig(mode=mode, iterations=200, neighborhood_size=2, seed=0))
    assert res.ok
    history = res.stats["history"]
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert res.stats["cost"] <= res.stats["initial_cost"]
    assert validate(res.paths, inst, mode) == []


def test_lns_time_budget_stops():
    inst = small_instance(4, 4)
    res = lns_solve(inst, LnsConfig(iterations=10**6, time_budget=0.05, restarts=5))
    assert res.ok and res.stats["iterations"] < 10**6


@pytest.mark.parametrize("solver", ["prp", "lns"])
def test_deterministic(solver):
    inst = small_instance(5, 6)
    for mode in Mode:
        if solver == "prp":
            run = lambda: prp_solve(inst, PrpConfig(mode=mode, restarts=3, seed=9))  # noqa: E731
        else:
            run = lambda: lns_solve(inst, LnsConfig(mode=mode, iterations=20, seed=9))  # noqa: E731
        assert run().paths == run().paths


@pytest.mark.parametrize("seed", range(20))
def test_solutions_validate(seed):
    inst = small_instance(seed, random.Random(seed).randint(2, 8))
    for mode in Mode:
        for res in (prp_solve(inst, PrpConfig(mode=mode, restarts=3, seed=seed)),
                    lns_solve(inst, LnsConfig(mode=mode, iterations=10, seed=seed, restarts=3))):
            if res.ok:
                assert validate(res.paths, inst, mode) == []
            else:
                assert not any(itertools.chain(validate(list(res.partial.values()),
                                                        Instance(inst.graph,
                                                                 [inst.starts[i] for i in res.partial],
                                                                 [inst.targets[i] for i in res.partial]),
                                                        Mode.TRANSIENT)))
