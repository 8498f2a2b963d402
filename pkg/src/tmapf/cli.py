"""Command line entry point: one-shot solves, lifelong runs, experiment matrices and replays.

Experiment configs are INI files. ``[experiment]`` holds defaults and every
``[run.<name>]`` section adds one block of the matrix (its keys override the
defaults)::

    [experiment]
    steps = 1000
    k = 5
    w = 10
    node_budget = 2000
    seeds = 0, 1, 2, 3, 4

    [run.empty]
    map = empty:48x48
    agents = 100
    stream = dense
    targets = 10, 20
    solvers = prp:classic, prp:transient, pibt

``map`` is a MovingAI ``.map`` path (relative to the config file),
``empty:WxH`` or ``random:WxH:ratio:seed``. A ``fixture`` key replaces map,
agents and stream with a scripted instance file or a packaged fixture name.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path as FsPath
from typing import Sequence

from .cbs import cbs_solve
from .core import INF, Instance, Mode, SolveResult, format_paths, parse_paths, solution_cost, validate
from .grid import GridGraph, MapParseError, ScenarioError, cells_to_vertices, load_map, parse_map, parse_scen
from .lifelong import FAIL_POLICIES, SOLVERS, RhcrConfig, ScriptedStream, run_lifelong
from .pibt import pibt_run
from .prp import LnsConfig, PrpConfig, lns_solve, prp_solve
from .scenarios import fresh_stream, load_fixture, make_random_instance, random_grid

log = logging.getLogger("tmapf")

WORKERS_ENV = "TMAPF_WORKERS"
KEY_COLUMNS = ["run", "map", "agents", "targets", "stream", "solver", "mode", "k", "w", "node_budget", "seed"]
LABELS = {"prp": "PrP", "lns": "LNS", "cbs": "CBS", "pibt": "PIBT"}


class CliError(Exception):
    pass


def parse_horizon(text: str) -> float:
    text = str(text).strip().lower()
    if text in ("inf", "infinity", "∞"):
        return INF
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'inf', got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def format_horizon(value: float) -> str:
    return "inf" if value == INF else str(int(value))


def solver_label(solver: str, mode: Mode | str) -> str:
    base = LABELS[solver]
    if solver == "pibt":
        return base
    return base + ("t" if Mode.parse(mode) is Mode.TRANSIENT else "")


# --- instances --------------------------------------------------------------

def _size(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


@lru_cache(maxsize=32)
def load_graph(spec: str, base: str = ".") -> GridGraph:
    """Graph from a map path or a generator spec (``empty:WxH``, ``random:WxH:ratio:seed``)."""
    kind, _, rest = spec.partition(":")
    if kind == "empty" and rest:
        w, h = _size(rest)
        return GridGraph(w, h, [True] * (w * h))
    if kind == "random" and rest:
        size, ratio, seed = rest.split(":")
        w, h = _size(size)
        return random_grid(w, h, float(ratio), int(seed))
    path = FsPath(spec)
    if not path.is_absolute():
        path = FsPath(base) / path
    try:
        return load_map(path)
    except OSError as exc:
        raise CliError(f"cannot read map {spec!r}: {exc.strerror or exc}") from None
    except MapParseError as exc:
        raise CliError(f"{spec}: {exc}") from None


def instance_from_args(args) -> Instance:
    if args.fixture:
        try:
            return load_fixture(args.fixture)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load fixture {args.fixture!r}: {exc}") from None
    if not args.map:
        raise CliError("either --map or --fixture is required")
    graph = load_graph(args.map)
    if args.scen:
        try:
            entries = parse_scen(FsPath(args.scen).read_text(), graph)
        except OSError as exc:
            raise CliError(f"cannot read scenario {args.scen!r}: {exc.strerror}") from None
        except ScenarioError as exc:
            raise CliError(f"{args.scen}: {exc}") from None
        n = args.agents if args.agents is not None else len(entries)
        if n > len(entries):
            raise CliError(f"scenario has only {len(entries)} entries")
        entries = entries[:n]
        starts = cells_to_vertices(graph, [e.start for e in entries])
        targets = cells_to_vertices(graph, [e.goal for e in entries])
        return Instance(graph, starts, targets)
    if args.agents is None:
        raise CliError("--agents is required with a generated instance")
    try:
        return make_random_instance(graph, args.agents, args.stream, seed=args.seed, num_targets=args.targets)
    except ValueError as exc:
        raise CliError(str(exc)) from None


# --- one-shot ---------------------------------------------------------------

def solve_one_shot(instance: Instance, solver: str, mode: Mode | str, horizon: float = INF,
                   node_budget: int | None = None, seed: int = 0, steps: int | None = None) -> SolveResult:
    mode = Mode.parse(mode)
    if solver == "prp":
        return prp_solve(instance, PrpConfig(mode=mode, horizon=horizon, node_budget=node_budget, seed=seed))
    if solver == "lns":
        return lns_solve(instance, LnsConfig(mode=mode, horizon=horizon, node_budget=node_budget, seed=seed))
    if solver == "cbs":
        return cbs_solve(instance, mode, horizon=horizon, low_level_budget=node_budget)
    if solver == "pibt":
        return pibt_run(instance, mode, steps=steps, seed=seed)
    raise CliError(f"unknown solver {solver!r}")


def cmd_solve(args) -> int:
    instance = instance_from_args(args)
    result = solve_one_shot(instance, args.solver, args.mode, args.w, args.node_budget, args.seed, args.steps)
    label = solver_label(args.solver, args.mode)
    if not result.ok:
        agent = "" if result.failed_agent is None else f" agent={result.failed_agent}"
        print(f"solver={label} status={result.status}{agent}")
        return 1
    errors = validate(result.solution, instance, args.mode)
    cost = solution_cost(result.paths, instance.targets, Mode.parse(args.mode))
    print(f"solver={label} status=ok cost={cost} makespan={result.solution.makespan} valid={not errors}")
    text = format_paths(instance.graph, result.paths)
    if args.out:
        FsPath(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for e in errors:
        print(f"invalid: {e}", file=sys.stderr)
    return 0 if not errors else 1


# --- lifelong ---------------------------------------------------------------

def rhcr_config(args) -> RhcrConfig:
    return RhcrConfig(solver=args.solver, mode=args.mode, k=args.k, w=args.w, node_budget=args.node_budget,
                      time_budget_ms=args.time_budget_ms, fail_policy=args.fail_policy, replan=args.replan,
                      seed=args.seed, checkpoints=tuple(c for c in (300, 500, 1000) if c <= args.steps))


def write_run(out: FsPath, run) -> None:
    """Store a lifelong run so that ``replay`` can render it."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "map.map").write_text(run.graph.to_map_text())
    (out / "paths.txt").write_text(format_paths(run.graph, run.trajectories))
    (out / "events.log").write_text(run.event_log())


def cmd_lifelong(args) -> int:
    instance = instance_from_args(args)
    if args.fixture:
        stream = fresh_stream(instance)
    else:
        stream = instance.stream
    if stream is None:
        raise CliError("instance has no target stream")
    try:
        config = rhcr_config(args)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    run = run_lifelong(instance.graph, instance.starts, stream, config, args.steps)
    label = solver_label(args.solver, args.mode)
    marks = " ".join(f"throughput@{t}={v}" for t, v in sorted(run.checkpoints.items()))
    print(f"solver={label} steps={run.steps} throughput={run.throughput} expansions={run.expansions} "
          f"plan_failures={run.plan_failures} runtime_s={run.runtime:.3f} {marks}".rstrip())
    if args.out:
        write_run(FsPath(args.out), run)
    return 0


# --- replay -----------------------------------------------------------------

GLYPHS = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def render_frames(graph: GridGraph, trajectories: Sequence[Sequence[int]]) -> list[str]:
    """One ASCII board per timestep; agent i is drawn as ``GLYPHS[i]`` (``*`` past the table)."""
    if not trajectories or not any(trajectories):
        return []
    length = max(len(p) for p in trajectories)
    frames = []
    for t in range(length):
        board = [["." if graph.has_cell(x, y) else "@" for x in range(graph.width)] for y in range(graph.height)]
        for i, p in enumerate(trajectories):
            if not p:
                continue
            x, y = graph.cell(p[min(t, len(p) - 1)])
            board[y][x] = GLYPHS[i] if i < len(GLYPHS) else "*"
        frames.append(f"t={t}\n" + "\n".join("".join(row) for row in board) + "\n")
    return frames


def load_run(path: FsPath) -> tuple[GridGraph, list]:
    try:
        graph = parse_map((path / "map.map").read_text())
        paths = parse_paths(graph, (path / "paths.txt").read_text())
    except OSError as exc:
        raise CliError(f"cannot read run directory {str(path)!r}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(f"corrupt run log in {str(path)!r}: {exc}") from None
    return graph, paths


def cmd_replay(args) -> int:
    graph, paths = load_run(FsPath(args.run))
    frames = render_frames(graph, paths)
    stop = len(frames) if args.last is None else min(len(frames), args.last + 1)
    out = sys.stdout
    for frame in frames[args.first:stop]:
        out.write(frame)
        out.write("\n")
    return 0


# --- experiments ------------------------------------------------------------

def _list(text: str, cast=str) -> list:
    return [cast(part.strip()) for part in str(text).split(",") if part.strip()]


def _optional_int(text: str | None) -> int | None:
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return int(text)


@dataclass
class Job:
    run: str
    map: str
    base: str
    fixture: str | None
    agents: int
    targets: int
    stream: str
    solver: str
    mode: str
    k: int
    w: float
    node_budget: int | None
    time_budget_ms: float | None
    fail_policy: str
    replan: str
    steps: int
    seed: int
    checkpoints: tuple[int, ...] = field(default_factory=tuple)

    def key(self) -> list:
        return [self.run, self.map if not self.fixture else f"fixture:{self.fixture}", self.agents, self.targets,
                self.stream, self.solver, self.mode, self.k, format_horizon(self.w),
                "" if self.node_budget is None else self.node_budget, self.seed]


@dataclass
class ExperimentConfig:
    jobs: list[Job]
    out: FsPath
    workers: int
    checkpoints: tuple[int, ...]


def read_experiment(path: str | FsPath, out: str | None = None, workers: int | None = None) -> ExperimentConfig:
    path = FsPath(path)
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise CliError(f"{path}: {exc}") from None
    base = str(path.parent)
    defaults = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    runs = [s for s in parser.sections() if s.startswith("run.")]
    if not runs:
        raise CliError(f"{path}: no [run.<name>] sections")

    jobs = []
    checkpoints: set[int] = set()
    for section in runs:
        opts = {**defaults, **dict(parser[section])}
        name = section[len("run."):]
        try:
            steps = int(opts.get("steps", 1000))
            cps = tuple(c for c in _list(opts.get("checkpoints", "300, 500, 1000"), int) if c <= steps)
            seeds = _list(opts.get("seeds", "0"), int)
            if not seeds:
                raise CliError(f"[{section}] seeds list is empty")
            fixture = opts.get("fixture") or None
            if fixture:
                fpath = FsPath(fixture)
                if not fpath.is_absolute() and (FsPath(base) / fpath).exists():
                    fixture = str(FsPath(base) / fpath)
                try:
                    scripted = load_fixture(fixture)
                except (OSError, ValueError) as exc:
                    raise CliError(f"[{section}] cannot load fixture {fixture!r}: {exc}") from None
                targets = max(len(s) for s in scripted.stream.sequences) if scripted.num_agents else 0
                map_spec, agent_list, target_list, stream = "", [scripted.num_agents], [targets], "scripted"
            else:
                map_spec = opts.get("map")
                if not map_spec:
                    raise CliError(f"[{section}] needs 'map' or 'fixture'")
                load_graph(map_spec, base)  # fail early on a bad map
                agent_list = _list(opts.get("agents", ""), int)
                target_list = _list(opts.get("targets", "10"), int)
                stream = opts.get("stream", "dense")
                if not agent_list:
                    raise CliError(f"[{section}] agents list is empty")
            solvers = []
            for item in _list(opts.get("solvers", "prp:classic, prp:transient")):
                solver, _, mode = item.partition(":")
                if solver not in SOLVERS:
                    raise CliError(f"[{section}] unknown solver {solver!r}")
                solvers.append((solver, Mode.parse(mode or "classic").value))
            fail_policy = opts.get("fail_policy", "partial-plan")
            if fail_policy not in FAIL_POLICIES:
                raise CliError(f"[{section}] unknown fail policy {fail_policy!r}")
            common = dict(run=name, map=map_spec, base=base, fixture=fixture, stream=stream,
                          k=int(opts.get("k", 5)), w=parse_horizon(opts.get("w", "10")),
                          node_budget=_optional_int(opts.get("node_budget", "2000")),
                          time_budget_ms=_optional_int(opts.get("time_budget_ms")),
                          fail_policy=fail_policy, replan=opts.get("replan", "periodic"),
                          steps=steps, checkpoints=cps)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise CliError(f"[{section}] {exc}") from None
        checkpoints.update(cps)
        for agents in agent_list:
            for targets in target_list:
                for solver, mode in solvers:
                    for seed in seeds:
                        jobs.append(Job(agents=agents, targets=targets, solver=solver, mode=mode, seed=seed,
                                        **common))

    if workers is None:
        workers = int(defaults.get("workers", os.environ.get(WORKERS_ENV, "1")))
    out_dir = FsPath(out) if out else FsPath(base) / defaults.get("out", "results")
    return ExperimentConfig(jobs, out_dir, max(1, workers), tuple(sorted(checkpoints)))


def execute_job(job: Job) -> dict:
    """Run one matrix cell. Never raises; a crash is reported in the result."""
    try:
        if job.fixture:
            instance = load_fixture(job.fixture)
            stream = ScriptedStream(instance.stream.sequences)
        else:
            graph = load_graph(job.map, job.base)
            instance = make_random_instance(graph, job.agents, job.stream, seed=job.seed, num_targets=job.targets)
            stream = instance.stream
        config = RhcrConfig(solver=job.solver, mode=job.mode, k=job.k, w=job.w, node_budget=job.node_budget,
                            time_budget_ms=job.time_budget_ms, fail_policy=job.fail_policy, replan=job.replan,
                            seed=job.seed, checkpoints=job.checkpoints)
        run = run_lifelong(instance.graph, instance.starts, stream, config, job.steps)
    except Exception as exc:  # one bad cell must not stop the matrix
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    return {"status": "ok", "throughput": run.throughput, "checkpoints": dict(run.checkpoints),
            "expansions": run.expansions, "plan_failures": run.plan_failures,
            "fail_policy_invocations": run.fail_policy_invocations, "runtime": run.runtime}


def result_columns(checkpoints: Sequence[int]) -> list[str]:
    return (KEY_COLUMNS + ["status", "throughput"] + [f"throughput_{c}" for c in checkpoints]
            + ["expansions", "plan_failures", "fail_policy_invocations"])


def results_csv(jobs: Sequence[Job], results: Sequence[dict], checkpoints: Sequence[int]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result_columns(checkpoints))
    for job, res in zip(jobs, results):
        row = job.key() + [res["status"]]
        if res["status"] == "ok":
            row.append(res["throughput"])
            row += [res["checkpoints"].get(c, "") for c in checkpoints]
            row += [res["expansions"], res["plan_failures"], res["fail_policy_invocations"]]
        else:
            row += [""] * (1 + len(checkpoints) + 3)
        writer.writerow(row)
    return buf.getvalue()


def timings_csv(jobs: Sequence[Job], results: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(KEY_COLUMNS + ["status", "runtime_s", "error"])
    for job, res in zip(jobs, results):
        runtime = f"{res['runtime']:.4f}" if res["status"] == "ok" else ""
        writer.writerow(job.key() + [res["status"], runtime, res.get("error", "")])
    return buf.getvalue()


def summary_table(rows: Sequence[dict]) -> str:
    """Mean final throughput over seeds: one block per run section, rows = agents x targets, columns = solvers."""
    blocks: dict[str, dict] = {}
    labels: list[str] = []
    for r in rows:
        if r["status"] != "ok":
            continue
        label = solver_label(r["solver"], r["mode"])
        if label not in labels:
            labels.append(label)
        cells = blocks.setdefault(f"{r['run']}: {r['map']}", {})
        cells.setdefault((int(r["agents"]), int(r["targets"])), {}).setdefault(label, []).append(
            float(r["throughput"]))
    lines = []
    for name, cells in blocks.items():
        lines.append(name)
        lines.append("\t".join(["A", "T"] + labels))
        for (agents, targets) in sorted(cells):
            vals = cells[(agents, targets)]
            out = [str(agents), str(targets)]
            for label in labels:
                xs = vals.get(label)
                out.append(f"{sum(xs) / len(xs):.1f}" if xs else "-")
            lines.append("\t".join(out))
        lines.append("")
    return "\n".join(lines)


def run_experiment(config: ExperimentConfig) -> tuple[str, list[dict]]:
    """Execute every job; results come back in config order whatever the worker count."""
    jobs = config.jobs
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(execute_job, jobs))
    else:
        results = [execute_job(j) for j in jobs]
    text = results_csv(jobs, results, config.checkpoints)
    config.out.mkdir(parents=True, exist_ok=True)
    (config.out / "results.csv").write_text(text)
    (config.out / "timings.csv").write_text(timings_csv(jobs, results))
    rows = list(csv.DictReader(io.StringIO(text)))
    (config.out / "summary.txt").write_text(summary_table(rows))
    return text, results


def cmd_experiment(args) -> int:
    config = read_experiment(args.config, out=args.out, workers=args.workers)
    log.info("running %d jobs on %d workers", len(config.jobs), config.workers)
    _, results = run_experiment(config)
    print((config.out / "summary.txt").read_text(), end="")
    failed = [j for j, r in zip(config.jobs, results) if r["status"] != "ok"]
    for job, res in zip(config.jobs, results):
        if res["status"] != "ok":
            print(f"failed: {','.join(map(str, job.key()))}: {res['error']}", file=sys.stderr)
    print(f"wrote {config.out / 'results.csv'}")
    if failed and not args.allow_failures:
        return 1
    return 0


# --- argument parsing -------------------------------------------------------

def _instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--map", help="MovingAI map path, empty:WxH or random:WxH:ratio:seed")
    p.add_argument("--scen", help="MovingAI scenario file (one-shot starts and targets)")
    p.add_argument("--fixture", help="scripted instance file or packaged fixture name")
    p.add_argument("--agents", type=int)
    p.add_argument("--stream", choices=("uniform", "dense"), default="uniform")
    p.add_argument("--targets", type=int, default=10, help="size of the dense target set")


def _solver_args(p: argparse.ArgumentParser, w_default: str) -> None:
    p.add_argument("--solver", choices=SOLVERS, default="prp")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="classic")
    p.add_argument("--w", type=parse_horizon, default=parse_horizon(w_default), help="planning horizon or 'inf'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--node-budget", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tmapf", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one-shot MAPF/TMAPF solve")
    _instance_args(p)
    _solver_args(p, "inf")
    p.add_argument("--steps", type=int, default=None, help="step cap for pibt")
    p.add_argument("--out", help="write paths here instead of stdout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("lifelong", help="single lifelong run")
    _instance_args(p)
    _solver_args(p, "10")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--time-budget-ms", type=float, default=None)
    p.add_argument("--fail-policy", choices=FAIL_POLICIES, default="partial-plan")
    p.add_argument("--replan", choices=("periodic", "every-step"), default="periodic")
    p.add_argument("--out", help="directory for map, trajectories and event log")
    p.set_defaults(func=cmd_lifelong, node_budget=20_000)

    p = sub.add_parser("experiment", help="run an experiment matrix from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, default=None, help=f"parallel runs (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--allow-failures", action="store_true", help="exit 0 even if some runs crashed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("replay", help="print a stored lifelong run as ASCII frames")
    p.add_argument("run", help="directory written by 'lifelong --out'")
    p.add_argument("--first", type=int, default=0)
    p.add_argument("--last", type=int, default=None)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"tmapf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
