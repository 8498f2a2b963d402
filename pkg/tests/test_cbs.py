import pytest

from oracles import classic_optimum, solvable_oracle_instances, transient_optimum
from tmapf.cbs import cbs_solve
from tmapf.core import Instance, Mode, transient_cost, validate
from tmapf.grid import GridGraph
from tmapf.scenarios import make_swap_corridor
from tmapf.search import accept_any

permissive = lambda *args, **kwargs: accept_any  # noqa: E731


def test_corridor_classic_fails():
    res = cbs_solve(make_swap_corridor(), Mode.CLASSIC, node_budget=300)
    assert not res.ok
    assert res.status in ("unsolvable", "budget")


def test_corridor_transient_solved():
    inst = make_swap_corridor()
    res = cbs_solve(inst, Mode.TRANSIENT)
    assert res.ok
    assert validate(res.paths, inst, Mode.TRANSIENT) == []
    assert res.stats["cost"] == transient_cost(res.paths, inst.targets)


def test_corridor_transient_is_optimal_under_its_filter():
    inst = make_swap_corridor()
    res = cbs_solve(inst, Mode.TRANSIENT, parking_filter=permissive)
    assert res.stats["cost"] == transient_optimum(inst.graph, inst.starts, inst.targets)


def test_single_agent_no_ct_expansion():
    g = GridGraph.from_rows(["....", ".@@.", "...."])
    inst = Instance(g, (0,), (g.num_vertices - 1,))
    res = cbs_solve(inst)
    assert res.ok and res.stats["ct_expanded"] == 0
    assert len(res.paths[0]) - 1 == g.distance(0, g.num_vertices - 1)


def test_crossing_corridors():
    g = GridGraph.from_rows(["@.@", "...", "@.@"])
    c = g.vertex
    inst = Instance(g, (c(0, 1), c(1, 0)), (c(2, 1), c(1, 2)))
    res = cbs_solve(inst)
    assert res.stats["cost"] == classic_optimum(g, inst.starts, inst.targets) == 5
    assert validate(res.paths, inst, Mode.CLASSIC) == []


def test_unsolvable_root():
    g = GridGraph.from_rows([".@."])
    res = cbs_solve(Instance(g, (0,), (1,)))
    assert res.status == "unsolvable" and res.failed_agent == 0


def test_budget_status():
    res = cbs_solve(make_swap_corridor(), Mode.CLASSIC, node_budget=5)
    assert res.status == "budget"
    assert res.stats["ct_expanded"] == 5


@pytest.mark.parametrize("case", solvable_oracle_instances(seed=3, count=20), ids=lambda c: f"soc{c[1]}")
def test_matches_joint_state_oracle(case):
    inst, best, t_best = case
    res = cbs_solve(inst, Mode.CLASSIC, node_budget=20_000)
    assert res.ok and res.stats["cost"] == best
    assert validate(res.paths, inst, Mode.CLASSIC) == []
    tres = cbs_solve(inst, Mode.TRANSIENT, parking_filter=permissive, node_budget=20_000)
    assert tres.ok and tres.stats["cost"] == t_best
    assert validate(tres.paths, inst, Mode.TRANSIENT) == []


def test_finite_horizon_ignores_late_conflicts():
    inst = make_swap_corridor()
    res = cbs_solve(inst, Mode.CLASSIC, horizon=1)
    assert res.ok
    assert validate(res.paths, inst, Mode.CLASSIC, horizon=1) == []
