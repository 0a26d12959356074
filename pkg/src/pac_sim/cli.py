"""CLI entry point for pac-sim."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pac_sim.actuation import ActuationError
from pac_sim.config import ConfigError, configure_logging, load_settings
from pac_sim.files import (
    InputError,
    build_problem,
    check_mode,
    fmt,
    load_markers,
    load_robot,
    load_scenario,
    load_sweep,
    parse_state,
    seed_state,
    tendon_command,
    write_centerline,
    write_csv,
    write_json,
    write_state,
)
from pac_sim.geometry import RigidTransform
from pac_sim.kinematics import KinematicsError, centerline, robot_fk
from pac_sim.models import (
    ModelKind,
    RobotDescription,
    RobotState,
    ScenarioFile,
    SweepFile,
)
from pac_sim.oracle import OracleError, compare_models, ground_truth
from pac_sim.plots import comparison_svg, workspace_svg
from pac_sim.solver import SolverError, free_coordinates, solve_statics, static_residual
from pac_sim.sweep import run_batch

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INPUT = 2

SCHEMAS = {"robot": RobotDescription, "scenario": ScenarioFile, "sweep": SweepFile}


def main(argv: list[str] | None = None) -> None:
    """CLI entry point."""
    sys.exit(run(argv))


def run(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        settings = load_settings()
        configure_logging(settings)
        workers = settings.workers if args.workers is None else args.workers
        if workers < 1:
            raise InputError(f"--workers must be at least 1, got {workers}")
        return args.handler(args, workers)
    except (InputError, ConfigError, KinematicsError, ActuationError) as e:
        print(f"  Error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, OracleError) as e:
        print(f"  Failed: {e}", file=sys.stderr)
        return EXIT_SOLVER


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pac-sim",
        description="PAC/PCC statics of tendon-driven soft arms",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def common(name: str, help: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help)
        sub.add_argument("--robot", type=Path, required=True, help="robot JSON file")
        sub.add_argument(
            "--scenario", type=Path, action="append", default=[], help="scenario JSON"
        )
        sub.add_argument("--model", choices=[m.value for m in ModelKind])
        sub.add_argument("--out", type=Path, help="output directory")
        sub.add_argument("--workers", type=int, help="parallel solves")
        return sub

    fk = common("fk", "sampled centerline and tip pose")
    fk.add_argument("--state", help="c0,c1,phi,dL per segment")
    fk.set_defaults(handler=cmd_fk)

    statics = common("statics", "quasi-static equilibrium of each scenario")
    statics.set_defaults(handler=cmd_statics)

    workspace = common("workspace", "tip cloud over a tendon-offset grid")
    workspace.add_argument("--sweep", type=Path, required=True, help="sweep JSON")
    workspace.set_defaults(handler=cmd_workspace)

    compare = common("compare", "PAC and PCC against ground truth")
    compare.add_argument("--markers", type=Path, help="marker CSV ground truth")
    compare.set_defaults(handler=cmd_compare)

    schema = commands.add_parser("schema", help="print the JSON schema of a file type")
    schema.add_argument("kind", choices=sorted(SCHEMAS))
    schema.set_defaults(handler=cmd_schema, workers=None)
    return parser


def _model(args: argparse.Namespace, scenario: ScenarioFile | None) -> ModelKind:
    if args.model:
        return ModelKind(args.model)
    return scenario.model if scenario is not None else ModelKind.PAC


def _out_dir(args: argparse.Namespace, scenario: ScenarioFile | None = None) -> Path:
    if args.out is not None:
        return args.out
    if scenario is not None and scenario.output_dir:
        return Path(scenario.output_dir)
    return Path("out")


def _print_pose(pose: RigidTransform) -> None:
    print("  Tip translation [m]: " + " ".join(fmt(v) for v in pose.translation))
    print("  Tip rotation:")
    for row in pose.rotation:
        print("    " + " ".join(fmt(v) for v in row))


def cmd_fk(args: argparse.Namespace, workers: int) -> int:
    robot = load_robot(args.robot)
    scenario = load_scenario(args.scenario[0]) if args.scenario else None
    model = _model(args, scenario)
    n = len(robot.segments)
    if args.state:
        state = parse_state(args.state, n)
    elif scenario is not None and scenario.initial_state is not None:
        state = scenario.initial_state
    else:
        state = RobotState.zeros(n)
    check_mode(state, model)
    labels, points = centerline(state, robot.segments)
    path = write_centerline(_out_dir(args, scenario) / "centerline.csv", labels, points)
    _print_pose(robot_fk(state, robot.segments)[-1])
    print(f"  Centerline written to {path}")
    return EXIT_OK


@dataclass
class _Outcome:
    state: RobotState
    iterations: int
    residual_norm: float


def cmd_statics(args: argparse.Namespace, workers: int) -> int:
    robot = load_robot(args.robot)
    if not args.scenario:
        raise InputError("statics needs at least one --scenario")
    scenarios = [load_scenario(p) for p in args.scenario]
    jobs = []
    for scenario in scenarios:
        model = _model(args, scenario)
        problem = build_problem(robot, scenario)
        check_mode(problem.initial_state, model)
        jobs.append((scenario, problem, model))

    def solve(job: tuple) -> _Outcome:
        scenario, problem, model = job
        state, report = solve_statics(problem, scenario.solver, model)
        return _Outcome(state, report.iterations, report.residual_norm)

    logger.info("solving %d scenarios with %d workers", len(jobs), workers)
    code = EXIT_OK
    for (scenario, problem, model), result in zip(jobs, run_batch(solve, jobs, workers)):
        out = _out_dir(args, scenario)
        if isinstance(result, SolverError):
            history = write_csv(
                out / f"{scenario.name}_history.csv",
                ["step", "residual_norm"],
                enumerate(result.history),
            )
            print(f"  {scenario.name}: FAILED ({result})")
            print(f"  Residual history written to {history}")
            code = max(code, EXIT_SOLVER)
            continue
        if isinstance(result, Exception):
            raise result
        tip = robot_fk(result.state, robot.segments)[-1]
        write_state(out / f"{scenario.name}_state.csv", result.state)
        write_json(out / f"{scenario.name}_state.json", result.state)
        labels, points = centerline(result.state, robot.segments)
        write_centerline(out / f"{scenario.name}_centerline.csv", labels, points)
        write_json(
            out / f"{scenario.name}_report.json",
            {
                "scenario": scenario.name,
                "model": model.value,
                "converged": True,
                "iterations": result.iterations,
                "residual_norm": fmt(result.residual_norm),
                "tip_translation": [fmt(v) for v in tip.translation],
                "tip_rotation": [[fmt(v) for v in row] for row in tip.rotation],
            },
        )
        print(
            f"  {scenario.name} ({model.value}): {result.iterations} steps,"
            f" |r| = {fmt(result.residual_norm)}, tip z = {fmt(tip.translation[2])} m"
        )
    return code


def _bounding_volume(cloud: np.ndarray) -> float:
    if cloud.shape[0] == 0:
        return 0.0
    return float(np.prod(cloud.max(axis=0) - cloud.min(axis=0)))


def cmd_workspace(args: argparse.Namespace, workers: int) -> int:
    robot = load_robot(args.robot)
    sweep = load_sweep(args.sweep)
    count = len(robot.routing())
    if count == 0:
        raise InputError("workspace sweep needs a robot with tendons")
    model = ModelKind(args.model) if args.model else sweep.model
    jobs = []
    for mass in sweep.tip_masses:
        for offsets in itertools.product(sweep.offsets, repeat=count):
            template = ScenarioFile(
                name="sweep",
                model=model,
                solver=sweep.solver,
                initial_state=seed_state(robot, offsets),
            )
            command = tendon_command(robot, None, list(offsets), sweep.kp, sweep.kd)
            problem = build_problem(robot, template, [(mass, None)], command)
            jobs.append((mass, offsets, problem))

    def solve(job: tuple) -> tuple[np.ndarray, float]:
        _, _, problem = job
        state, _ = solve_statics(problem, sweep.solver, model)
        free = free_coordinates(len(robot.segments), model)
        residual = float(np.linalg.norm(static_residual(state, problem)[free]))
        return robot_fk(state, robot.segments)[-1].translation, residual

    logger.info("workspace grid: %d points", len(jobs))
    results = run_batch(solve, jobs, workers)
    rows, clouds, failures = [], {}, 0
    for (mass, offsets, _), result in zip(jobs, results):
        label = f"{mass:g} kg"
        clouds.setdefault(label, [])
        if isinstance(result, Exception):
            if not isinstance(result, SolverError):
                raise result
            failures += 1
            rows.append((float(mass), *map(float, offsets), "", "", "", "", "failed"))
            continue
        tip, residual = result
        clouds[label].append(tip)
        rows.append((float(mass), *map(float, offsets), *map(float, tip), residual, "ok"))
    out = _out_dir(args)
    header = ["tip_mass", *(f"offset_{j}" for j in range(count)), "x", "y", "z"]
    path = write_csv(out / "workspace.csv", [*header, "residual", "status"], rows)
    arrays = {k: np.asarray(v, dtype=float).reshape(-1, 3) for k, v in clouds.items()}
    svg = workspace_svg(out / "workspace.svg", arrays)
    for label, cloud in arrays.items():
        volume = fmt(_bounding_volume(cloud))
        print(f"  {label}: {cloud.shape[0]} points, bounding volume {volume} m^3")
    if failures:
        print(f"  {failures} grid points did not converge")
    print(f"  Workspace written to {path} and {svg}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, workers: int) -> int:
    robot = load_robot(args.robot)
    if not args.scenario:
        raise InputError("compare needs at least one --scenario")
    if args.model:
        raise InputError("compare always solves both pac and pcc; drop --model")
    if args.markers and len(args.scenario) != 1:
        raise InputError("--markers applies to exactly one --scenario")
    markers = load_markers(args.markers, len(robot.segments)) if args.markers else None
    scenarios = [load_scenario(p) for p in args.scenario]
    jobs = [(s, build_problem(robot, s)) for s in scenarios]

    def compare(job: tuple) -> tuple:
        scenario, problem = job
        truth = markers if markers is not None else ground_truth(problem)
        pac, pcc = compare_models(problem, truth, options=scenario.solver)
        return truth, pac, pcc

    logger.info("comparing %d scenarios", len(jobs))
    out = _out_dir(args)
    rows, ratios, code = [], [], EXIT_OK
    for (scenario, _), result in zip(jobs, run_batch(compare, jobs, workers)):
        if isinstance(result, (SolverError, OracleError)):
            print(f"  {scenario.name}: FAILED ({result})")
            code = EXIT_SOLVER
            continue
        if isinstance(result, Exception):
            raise result
        truth, pac, pcc = result
        ratio = (
            pac.tip_position_error / pcc.tip_position_error
            if pcc.tip_position_error > 0.0
            else 1.0
        )
        ratios.append(ratio)
        for report in (pac, pcc):
            rows.append(
                (
                    scenario.name,
                    report.model.value,
                    report.tip_position_error,
                    "" if report.orientation_geodesic is None else report.orientation_geodesic,
                    "" if report.orientation_frobenius is None else report.orientation_frobenius,
                    float(np.mean(report.marker_errors)) if report.marker_errors else "",
                    ratio,
                )
            )
        comparison_svg(
            out / f"compare_{scenario.name}.svg",
            truth.curve(),
            centerline(pac.state, robot.segments)[1],
            centerline(pcc.state, robot.segments)[1],
            title=scenario.name,
        )
        print(
            f"  {scenario.name}: PAC {fmt(pac.tip_position_error)} m,"
            f" PCC {fmt(pcc.tip_position_error)} m, ratio {fmt(ratio)}"
        )
    path = write_csv(
        out / "compare.csv",
        [
            "scenario",
            "model",
            "tip_error",
            "orientation_geodesic",
            "orientation_frobenius",
            "marker_mean_error",
            "pac_pcc_ratio",
        ],
        rows,
    )
    if ratios:
        print(f"  Mean PAC/PCC tip-error ratio: {fmt(float(np.mean(ratios)))}")
    print(f"  Comparison written to {path}")
    return code


def cmd_schema(args: argparse.Namespace, workers: int | None) -> int:
    print(json.dumps(SCHEMAS[args.kind].model_json_schema(), indent=2))
    return EXIT_OK
