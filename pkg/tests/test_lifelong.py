import re

import pytest

from tmapf.core import INF, Instance, Mode, validate
from tmapf.grid import GridGraph
from tmapf.lifelong import (DenseStream, RhcrConfig, ScriptedStream, StaticStream, UniformStream, apply_fail_policy,
                            is_collision_free, run_lifelong, throughput_at)
from tmapf.prp import PrpConfig, prp_solve
from tmapf.scenarios import fresh_stream, make_random_instance, make_swap_corridor, random_grid

EVENT = re.compile(r"^t=\d+ event=(reach|plan_ok|plan_fail|fail_policy) agent=(\d+|-)( \w+=\S+)*$")


def test_zero_agents():
    g = GridGraph.from_rows(["..."])
    run = run_lifelong(g, [], StaticStream([]), RhcrConfig(), 20)
    assert run.throughput == 0 and run.trajectories == []


def test_all_wait_appends_waits():
    g = GridGraph.from_rows(["...."])
    paths = apply_fail_policy(g, [0, 3], "all-wait", None, 5)
    assert paths == [(0,) * 6, (3,) * 6]


def test_all_wait_run_on_unsolvable_periods():
    # two agents with one shared target: classic planning can never park both
    g = GridGraph.from_rows(["..."])
    cfg = RhcrConfig(solver="prp", mode=Mode.CLASSIC, k=5, w=INF, fail_policy="all-wait", checkpoints=())
    run = run_lifelong(g, [0, 2], StaticStream([1, 1]), cfg, 20)
    assert run.plan_failures == run.fail_policy_invocations == 4
    assert run.trajectories == [[0] * 21, [2] * 21]
    assert run.throughput == 0


def three_agent_setup():
    g = GridGraph.from_rows([".....", "....."])
    positions = [g.vertex(0, 0), g.vertex(2, 0), g.vertex(4, 1)]
    return g, positions


def test_partial_plan_moves_planned_agent():
    g, positions = three_agent_setup()
    move = (g.vertex(2, 0), g.vertex(2, 1), g.vertex(1, 1))
    paths = apply_fail_policy(g, positions, "partial-plan", {1: move}, 2)
    assert paths[1] == move
    assert paths[0] == (positions[0],) * 3 and paths[2] == (positions[2],) * 3
    inst = Instance(g, positions, [p[-1] for p in paths])
    assert validate(paths, inst, Mode.CLASSIC) == []


def test_partial_plan_degrades_on_collision():
    g, positions = three_agent_setup()
    bump = (g.vertex(2, 0), g.vertex(1, 0), g.vertex(0, 0))
    paths = apply_fail_policy(g, positions, "partial-plan", {1: bump}, 2)
    assert paths == [(v,) * 3 for v in positions]


def test_unknown_policy_rejected():
    g, positions = three_agent_setup()
    with pytest.raises(ValueError):
        apply_fail_policy(g, positions, "retry", {0: (positions[0],)}, 1)


@pytest.mark.parametrize("kwargs", [dict(k=0), dict(k=5, w=3), dict(solver="lacam"), dict(fail_policy="x"),
                                    dict(priority="random"), dict(replan="never")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        RhcrConfig(**kwargs)


def test_every_step_forces_unit_period():
    assert RhcrConfig(k=5, replan="every-step").period == 1


def test_colliding_starts_rejected():
    g = GridGraph.from_rows(["..."])
    with pytest.raises(ValueError):
        run_lifelong(g, [1, 1], StaticStream([0, 2]), RhcrConfig(), 5)


def test_static_stream_reproduces_one_shot_solution():
    g = random_grid(8, 8, 0.15, 11)
    inst = make_random_instance(g, 4, seed=4)
    one_shot = prp_solve(inst, PrpConfig(order=[0, 1, 2, 3]))
    assert one_shot.ok
    cfg = RhcrConfig(solver="prp", k=INF, w=INF, checkpoints=())
    length = max(len(p) for p in one_shot.paths)
    run = run_lifelong(g, inst.starts, StaticStream(inst.targets), cfg, length - 1)
    padded = [list(p) + [p[-1]] * (length - len(p)) for p in one_shot.paths]
    assert run.trajectories == padded


@pytest.mark.parametrize("solver", ["prp", "lns", "cbs", "pibt"])
@pytest.mark.parametrize("mode", list(Mode))
def test_runs_are_collision_free(solver, mode):
    g = random_grid(8, 8, 0.15, 2)
    inst = make_random_instance(g, 6, seed=2)
    cfg = RhcrConfig(solver=solver, mode=mode, k=3, w=6, node_budget=2000, cbs_node_budget=50,
                     lns_iterations=3, checkpoints=(10, 30))
    run = run_lifelong(g, inst.starts, inst.stream, cfg, 30)
    assert is_collision_free(run.trajectories)
    assert all(len(t) == 31 for t in run.trajectories)
    for traj in run.trajectories:
        assert all(b in g.neighbors(a) for a, b in zip(traj, traj[1:]))
    assert run.checkpoints == {10: throughput_at(run, 10), 30: run.throughput}


def test_throughput_non_decreasing_and_events_well_formed():
    inst = make_swap_corridor()
    cfg = RhcrConfig(solver="prp", mode=Mode.TRANSIENT, k=5, w=10, checkpoints=())
    run = run_lifelong(inst.graph, inst.starts, fresh_stream(inst), cfg, 60)
    values = [throughput_at(run, t) for t in range(61)]
    assert values == sorted(values) and values[-1] == run.throughput > 0
    lines = run.event_log().splitlines()
    assert lines and all(EVENT.match(line) for line in lines)
    assert sum(1 for line in lines if "event=reach" in line) == run.throughput


def test_reach_draws_next_target_immediately():
    g = GridGraph.from_rows(["...."])
    stream = ScriptedStream([[1, 3]])
    run = run_lifelong(g, [0], stream, RhcrConfig(k=1, w=5, checkpoints=()), 4)
    reaches = [(e.t, e.detail["next"]) for e in run.events if e.kind == "reach"]
    assert reaches == [(1, 3), (3, 1)]


def test_streams():
    g = GridGraph.from_rows(["...", "..."])
    u = UniformStream(g, seed=1)
    assert all(u.next(0, 2) != 2 for _ in range(50))
    d = DenseStream([1, 4], seed=1)
    draws = [d.next(0) for _ in range(50)]
    assert set(draws) == {1, 4}
    assert DenseStream([3]).next(0, 3) == 3
    s = ScriptedStream([[1, 2]])
    assert [s.next(0) for _ in range(3)] == [1, 2, 1]
    with pytest.raises(ValueError):
        ScriptedStream([[]])
    with pytest.raises(ValueError):
        DenseStream([])
