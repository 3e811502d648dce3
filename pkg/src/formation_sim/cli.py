"""Command line entry point: ``formation-sim run|list|verify|plotdata``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import analysis
from .control import LILF
from .exceptions import FormationError, ParseError, UnknownScenario, ValidationError
from .scenarios import (
    BUILTIN_NAMES,
    apply_overrides,
    builtin_scenario,
    export_trajectory,
    randomize_initial,
    read_trajectory_csv,
    read_trajectory_json,
    resolve_scenario,
    summarize,
    trajectory_csv,
)
from .simulation import ARRIVED, COLLISION, COMPLETED, run

OUT_ENV = "FORMATION_SIM_OUT"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_NOT_ARRIVED = 2
EXIT_COLLISION = 3
EXIT_CONFIG = 4


def _load(args):
    scenario = resolve_scenario(args.scenario)
    overrides = list(getattr(args, "set", None) or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"sim.seed={args.seed}")
    if overrides:
        scenario = apply_overrides(scenario, overrides)
    if getattr(args, "randomize_init", None):
        scenario = randomize_initial(scenario, args.randomize_init)
    return scenario


def cmd_run(args) -> int:
    scenario = _load(args)
    out = Path(args.out or os.environ.get(OUT_ENV, "out")) / scenario.name
    out.mkdir(parents=True, exist_ok=True)
    log = run(scenario.config)
    traj = export_trajectory(log, out / f"trajectory.{args.format}", args.format)
    summary = summarize(log, scenario, out / "summary.json")
    written = [traj, out / "summary.json"]
    if args.plot:
        from .plotting import render_report

        written += render_report(log, out, scenario.config.environment.rho_m, scenario.name)
    safety = summary["safety"]
    print(f"scenario      {scenario.name}")
    print(f"outcome       {log.outcome}")
    print(f"arrival step  {summary['arrival_step']}")
    print(f"srm triggers  {summary['srm_triggers']}")
    print(f"min agent-agent distance     {safety['min_inter_agent_distance']}")
    print(f"min agent-obstacle distance  {safety['min_obstacle_distance']}")
    print(f"terminal max |w|/d           {safety['terminal_max_relative_error']:.4g}")
    for p in written:
        print(f"wrote {p}")
    if log.outcome in (ARRIVED, COMPLETED):
        return EXIT_OK
    return EXIT_COLLISION if log.outcome == COLLISION else EXIT_NOT_ARRIVED


def cmd_list(args) -> int:
    for name in BUILTIN_NAMES:
        s = builtin_scenario(name)
        print(f"{name:<10} N={s.config.topology.n}  {s.description}")
    return EXIT_OK


def verify_scenario(scenario, formation_tol=0.05, min_separation=0.1, max_runtime=1.0):
    """Run the standard battery on one scenario.

    Returns ``(check, passed, detail)`` rows; ``passed`` is ``None`` when
    a check does not apply to the scenario's control mode.
    """
    t0 = time.perf_counter()
    log = run(scenario.config)
    elapsed = time.perf_counter() - t0
    m = analysis.safety_metrics(log)
    tracking = scenario.config.control_mode == LILF
    k_max = scenario.config.k_max
    rows = [
        ("arrival", log.outcome == ARRIVED if tracking else None, f"outcome={log.outcome} step={log.arrival_step} k_max={k_max}"),
        ("terminal formation error", m.terminal_max_relative_error < formation_tol if tracking else None,
         f"max |w|/d over last 50 steps = {m.terminal_max_relative_error:.4g} (< {formation_tol})"),
        ("obstacle clearance", log.outcome != COLLISION and m.min_obstacle_distance > 0, f"min distance {m.min_obstacle_distance:.4g}"),
        ("agent separation", m.min_inter_agent_distance > min_separation, f"min distance {m.min_inter_agent_distance:.4g} (> {min_separation})"),
        ("runtime", elapsed < max_runtime, f"{elapsed:.3f} s (< {max_runtime} s)"),
        ("srm only on lmp", bool((~log.srm | log.lmp).all()), f"{int(log.srm.sum())} srm, {int(log.lmp.sum())} lmp flags"),
    ]
    same = trajectory_csv(run(scenario.config)) == trajectory_csv(log)
    rows.append(("determinism", same, "identical CSV on rerun" if same else "CSV differs on rerun"))
    return rows


def cmd_verify(args) -> int:
    scenario = _load(args)
    rows = verify_scenario(scenario)
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        tag = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        print(f"{tag}  {name:<{width}}  {detail}")
    return EXIT_OK if all(ok is not False for _, ok, _ in rows) else EXIT_FAIL


def cmd_plotdata(args) -> int:
    src = Path(args.log)
    paths = read_trajectory_json(src) if src.suffix == ".json" else read_trajectory_csv(src)
    out = Path(args.out or src.parent)
    out.mkdir(parents=True, exist_ok=True)
    for i, p in paths.items():
        target = out / f"agent_{i}.dat"
        with open(target, "w") as fh:
            fh.write("# x y\n")
            for x, y in p:
                fh.write(f"{float(x)!r} {float(y)!r}\n")
        print(f"wrote {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formation-sim", description="Leader-follower formation simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("scenario", help="built-in name or path to a scenario JSON file")
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field, e.g. srm.enabled=false")
        p.add_argument("--randomize-init", type=float, metavar="R", help="draw initial positions in a disc of radius R")

    p = sub.add_parser("run", help="run a scenario and write trajectory, summary and figures")
    scenario_args(p)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", dest="plot", action="store_false", help="skip the PNG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list", help="list built-in scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("verify", help="run the check battery on a scenario")
    scenario_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plotdata", help="split an exported trajectory into per-agent polyline files")
    p.add_argument("log", help="trajectory .csv or .json")
    p.add_argument("--out", help="output directory (default: next to the log)")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError, UnknownScenario) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
