"""Command-line entry point.

One binary, four subcommands: ``sim`` runs the closed-loop benchmark,
``eval-waypoints`` scores an attainment table, ``eval-frames`` scores
timestamped trajectories, and ``ingest`` turns detection logs into a
table.  Every option can also come from a config document; command-line
values win.  All artifacts land in a per-invocation directory named by
the digest of the resolved configuration, under ``--out`` or the
``NAVBENCH_OUT_ROOT`` environment variable.

Exit codes: 0 success, 1 bad user input, 2 internal failure, 3 data
ambiguity (several equally valid associations).
"""

import argparse
import os
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

from . import __version__
from .errors import AssociationAmbiguityError, NavBenchError
from .framewise import framewise_metrics, load_trajectory
from .ingest import (
    DEFAULT_DWELL_MIN_S,
    DEFAULT_GAP_MAX_S,
    DEFAULT_SKEW_TOL_S,
    dump_schedule,
    ingest,
    load_schedule,
    load_station_map,
)
from .report import (
    DEFAULT_THRESHOLD_COUNT,
    RunManifest,
    config_digest,
    dump_curve,
    dump_json,
    evaluate_attainment,
    file_digest,
    framewise_to_document,
    ingest_to_document,
    report_to_document,
)
from .sim import LocalizerSpec, SimRunConfig, run_benchmark
from .task import (
    Mode,
    Scenario,
    bundled_scenario_path,
    dump_attainment,
    load_attainment,
    load_scenario_file,
)

OUT_ROOT_ENV = "NAVBENCH_OUT_ROOT"
DEFAULT_OUT_ROOT = "navbench-out"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INTERNAL = 2
EXIT_AMBIGUOUS = 3


class UsageError(Exception):
    """Bad command line or config document."""


class _Parser(argparse.ArgumentParser):
    # argparse would sys.exit(2) on bad flags; route через the 0/1/2/3
    # partition instead.
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# option plumbing

# dest -> default, per subcommand; argparse itself always parses to None so
# that "not given on the command line" is distinguishable from any value.
_DEFAULTS: Dict[str, Dict[str, object]] = {
    "sim": {
        "scenario": None,
        "localizer": "perfect",
        "seed": 0,
        "num_seeds": 1,
        "mode": None,
        "jobs": 1,
        "dt": 0.05,
        "rounds": None,
        "sigma_v": 0.0,
        "sigma_omega": 0.0,
        "rho": 0.0,
        "bias_pos_max": 0.0,
        "bias_ang_max": 0.0,
        "bias_seed": 0,
        "bias_cell": 1.0,
        "p_fail": 0.0,
        "map_reuse": False,
        "no_trajectories": False,
    },
    "eval-waypoints": {
        "scenario": None,
        "table": None,
        "x_max_pos": None,
        "x_max_ang": None,
        "thresholds": DEFAULT_THRESHOLD_COUNT,
    },
    "eval-frames": {
        "run": None,
        "gt": None,
        "with_map": None,
        "assoc_tol": 0.02,
        "align": False,
    },
    "ingest": {
        "log": None,
        "schedule": None,
        "station_map": None,
        "gap_max": DEFAULT_GAP_MAX_S,
        "dwell_min": DEFAULT_DWELL_MIN_S,
        "skew_tol": DEFAULT_SKEW_TOL_S,
        "rounds": None,
    },
}

_REQUIRED: Dict[str, Tuple[str, ...]] = {
    "sim": ("scenario",),
    "eval-waypoints": ("scenario", "table"),
    "eval-frames": ("run",),
    "ingest": ("log", "schedule", "station_map"),
}


def build_parser() -> _Parser:
    parser = _Parser(prog="navbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"navbench {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p):
        p.add_argument("--config", help="config document (key: value per option)")
        p.add_argument("--out", help=f"output root (default ${OUT_ROOT_ENV} or ./{DEFAULT_OUT_ROOT})")

    p = sub.add_parser("sim", parents=[], help="run the closed-loop waypoint benchmark")
    common(p)
    p.add_argument("--scenario", help="bundled scenario name or scenario file path")
    p.add_argument("--localizer", choices=["perfect", "drifting_odometry", "map_corrected"])
    p.add_argument("--seed", type=int, help="first seed")
    p.add_argument("--num-seeds", type=int, dest="num_seeds", help="number of consecutive seeds")
    p.add_argument("--mode", choices=["both", "with_map", "without_map"])
    p.add_argument("--jobs", type=int, help="parallel simulation workers")
    p.add_argument("--dt", type=float, help="integration step, seconds")
    p.add_argument("--rounds", type=int, help="override the scenario's round count")
    p.add_argument("--sigma-v", type=float, dest="sigma_v")
    p.add_argument("--sigma-omega", type=float, dest="sigma_omega")
    p.add_argument("--rho", type=float, help="map-corrected residual bound, meters/radians")
    p.add_argument("--bias-pos-max", type=float, dest="bias_pos_max")
    p.add_argument("--bias-ang-max", type=float, dest="bias_ang_max")
    p.add_argument("--bias-seed", type=int, dest="bias_seed")
    p.add_argument("--bias-cell", type=float, dest="bias_cell")
    p.add_argument("--p-fail", type=float, dest="p_fail")
    p.add_argument("--map-reuse", action="store_const", const=True, dest="map_reuse")
    p.add_argument(
        "--no-trajectories",
        action="store_const",
        const=True,
        dest="no_trajectories",
        help="skip per-step trajectory files",
    )

    p = sub.add_parser("eval-waypoints", help="score an attainment table")
    common(p)
    p.add_argument("--scenario", help="bundled scenario name or scenario file path")
    p.add_argument("--table", help="attainment table file")
    p.add_argument("--x-max-pos", type=float, dest="x_max_pos", help="position curve range, meters")
    p.add_argument("--x-max-ang", type=float, dest="x_max_ang", help="orientation curve range, radians")
    p.add_argument("--thresholds", type=int, help="points per curve")

    p = sub.add_parser("eval-frames", help="score timestamped trajectories frame by frame")
    common(p)
    p.add_argument("--run", action="append", help="trajectory file (repeatable)")
    p.add_argument("--gt", help="ground-truth trajectory file")
    p.add_argument("--with-map", action="append", dest="with_map", help="second run group (repeatable)")
    p.add_argument("--assoc-tol", type=float, dest="assoc_tol", help="timestamp association tolerance, s")
    p.add_argument("--align", action="store_const", const=True, help="rigidly align each run to the ground truth first")

    p = sub.add_parser("ingest", help="turn detection logs into an attainment table")
    common(p)
    p.add_argument("--log", action="append", help="detection log file (repeatable)")
    p.add_argument("--schedule", help="nominal arrival schedule file")
    p.add_argument("--station-map", dest="station_map", help="station to waypoint mapping file")
    p.add_argument("--gap-max", type=float, dest="gap_max", help="visit clustering gap, s")
    p.add_argument("--dwell-min", type=float, dest="dwell_min", help="minimum visit duration, s")
    p.add_argument("--skew-tol", type=float, dest="skew_tol", help="clock skew tolerance, s")
    p.add_argument("--rounds", type=int, help="round count (default: highest round in the schedule)")
    return parser


def _load_config_file(path: Optional[str]) -> Dict[str, object]:
    if path is None:
        return {}
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a mapping of options")
    return {str(k).replace("-", "_"): v for k, v in doc.items()}


def resolve_options(args: argparse.Namespace) -> Dict[str, object]:
    """Three-layer merge: defaults, then config file, then command line."""
    command = args.command
    defaults = _DEFAULTS[command]
    config = _load_config_file(args.config)
    unknown = set(config) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config option(s) for {command}: {', '.join(sorted(unknown))}")
    resolved = dict(defaults)
    resolved.update(config)
    for dest in defaults:
        cli_value = getattr(args, dest, None)
        if cli_value is not None:
            resolved[dest] = cli_value
    for dest in _REQUIRED[command]:
        if resolved[dest] in (None, []):
            flag = "--" + dest.replace("_", "-")
            raise UsageError(f"{flag} is required (flag or config entry)")
    return resolved


def _out_root(args: argparse.Namespace) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_ROOT_ENV)
    return Path(env) if env else Path(DEFAULT_OUT_ROOT)


def _prepare_outdir(args: argparse.Namespace, command: str, options: Dict[str, object]) -> Tuple[Path, str]:
    digest = config_digest({"command": command, **options})
    outdir = _out_root(args) / f"{command}-{digest[:16]}"
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir, digest


def _resolve_scenario(name_or_path: str) -> Tuple[Scenario, Optional[Path]]:
    path = Path(name_or_path)
    if path.is_file():
        return load_scenario_file(path), path
    if path.suffix or "/" in name_or_path:
        raise UsageError(f"scenario file not found: {name_or_path}")
    bundled = bundled_scenario_path(name_or_path)
    return load_scenario_file(bundled), bundled


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _dump_trajectory_planar(times: Sequence[float], poses) -> str:
    lines = [f"{t!r} {p.x!r} {p.y!r} {p.theta!r}" for t, p in zip(times, poses)]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# subcommands


def cmd_sim(args: argparse.Namespace) -> int:
    started = time.monotonic()
    options = resolve_options(args)
    scenario, scenario_path = _resolve_scenario(str(options["scenario"]))
    if options["rounds"] is not None:
        scenario = scenario.with_protocol(rounds=int(options["rounds"]))
    spec = LocalizerSpec(
        kind=str(options["localizer"]),
        sigma_v=float(options["sigma_v"]),
        sigma_omega=float(options["sigma_omega"]),
        rho=float(options["rho"]),
        bias_pos_max=float(options["bias_pos_max"]),
        bias_ang_max=float(options["bias_ang_max"]),
        bias_seed=int(options["bias_seed"]),
        bias_cell_m=float(options["bias_cell"]),
        p_fail=float(options["p_fail"]),
        map_reuse=bool(options["map_reuse"]),
    )
    mode_opt = options["mode"]
    if mode_opt is None:
        modes = [scenario.protocol.mode]
    elif mode_opt == "both":
        modes = [Mode.WITHOUT_MAP, Mode.WITH_MAP]
    else:
        modes = [Mode(str(mode_opt))]
    seeds = [int(options["seed"]) + k for k in range(int(options["num_seeds"]))]
    log_traj = not bool(options["no_trajectories"])

    runs = [
        SimRunConfig(
            scenario=scenario,
            localizer=spec,
            seed=seed,
            dt=float(options["dt"]),
            mode=mode,
            log_trajectories=log_traj,
        )
        for mode in modes
        for seed in seeds
    ]
    jobs = max(1, int(options["jobs"]))
    if jobs == 1:
        results = [run_benchmark(cfg) for cfg in runs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_benchmark, runs))

    outdir, digest = _prepare_outdir(args, "sim", options)
    for cfg, result in zip(runs, results):
        tag = f"{cfg.effective_mode.value}-{cfg.seed}"
        _write(outdir / f"table-{tag}.csv", dump_attainment(result.table))
        _write(outdir / f"schedule-{tag}.txt", dump_schedule(result.schedule))
        if result.trace is not None:
            _write(
                outdir / f"trajectory-true-{tag}.txt",
                _dump_trajectory_planar(result.trace.times, result.trace.true_poses),
            )
            _write(
                outdir / f"trajectory-estimated-{tag}.txt",
                _dump_trajectory_planar(result.trace.times, result.trace.estimated_poses),
            )
        arrived = sum(1 for o in result.outcomes.values() if o.value == "arrived")
        print(f"sim {tag}: {arrived}/{len(result.outcomes)} legs arrived -> {outdir / f'table-{tag}.csv'}")

    inputs = {}
    if scenario_path is not None:
        inputs[str(scenario_path)] = file_digest(scenario_path)
    manifest = RunManifest(
        command="sim",
        config_digest=digest,
        seeds=tuple(seeds),
        inputs=inputs,
        tool_version=__version__,
        duration_s=time.monotonic() - started,
    )
    _write(outdir / "manifest.json", dump_json(manifest.to_document()))
    return EXIT_OK


def cmd_eval_waypoints(args: argparse.Namespace) -> int:
    started = time.monotonic()
    options = resolve_options(args)
    scenario, scenario_path = _resolve_scenario(str(options["scenario"]))
    table_path = Path(str(options["table"]))
    table = load_attainment(
        table_path, scenario.protocol.rounds, universe=scenario.waypoint_universe()
    )
    report = evaluate_attainment(
        scenario,
        table,
        x_max_position_m=options["x_max_pos"],
        x_max_orientation_rad=options["x_max_ang"],
        threshold_count=int(options["thresholds"]),
    )
    document = report_to_document(report)

    outdir, digest = _prepare_outdir(args, "eval-waypoints", options)
    _write(outdir / "report.json", dump_json(document))
    for name, curve in report.curves.items():
        _write(outdir / f"curve-{name}.csv", dump_curve(curve))
    inputs = {str(table_path): file_digest(table_path)}
    if scenario_path is not None:
        inputs[str(scenario_path)] = file_digest(scenario_path)
    manifest = RunManifest(
        command="eval-waypoints",
        config_digest=digest,
        seeds=(),
        inputs=inputs,
        tool_version=__version__,
        duration_s=time.monotonic() - started,
    )
    _write(outdir / "manifest.json", dump_json(manifest.to_document()))

    comp = report.completeness
    print(f"completeness: {comp.completed}/{comp.total} = {comp.ratio:.4f}")
    for name in sorted(report.nauc):
        print(f"n-auc {name}: {report.nauc[name]:.4f}")
    if report.degenerate_waypoints:
        pairs = ", ".join(f"{s}/{w}" for s, w in report.degenerate_waypoints)
        print(f"degenerate heading mean at: {pairs}")
    print(f"report -> {outdir / 'report.json'}")
    return EXIT_OK


def cmd_eval_frames(args: argparse.Namespace) -> int:
    started = time.monotonic()
    options = resolve_options(args)
    run_paths = [Path(p) for p in options["run"]]
    gt_path = None if options["gt"] is None else Path(str(options["gt"]))
    map_paths = [Path(p) for p in (options["with_map"] or [])]
    assoc_tol = float(options["assoc_tol"])
    align = bool(options["align"])

    runs = [load_trajectory(p) for p in run_paths]
    gt = None if gt_path is None else load_trajectory(gt_path)
    groups = []
    if map_paths:
        map_runs = [load_trajectory(p) for p in map_paths]
        groups.append(("without_map", framewise_metrics(runs, gt, assoc_tol=assoc_tol, align=align)))
        groups.append(("with_map", framewise_metrics(map_runs, gt, assoc_tol=assoc_tol, align=align)))
    else:
        groups.append(("runs", framewise_metrics(runs, gt, assoc_tol=assoc_tol, align=align)))
    document = framewise_to_document(groups, assoc_tol_s=assoc_tol)

    outdir, digest = _prepare_outdir(args, "eval-frames", options)
    _write(outdir / "report.json", dump_json(document))
    inputs = {str(p): file_digest(p) for p in [*run_paths, *map_paths]}
    if gt_path is not None:
        inputs[str(gt_path)] = file_digest(gt_path)
    manifest = RunManifest(
        command="eval-frames",
        config_digest=digest,
        seeds=(),
        inputs=inputs,
        tool_version=__version__,
        duration_s=time.monotonic() - started,
    )
    _write(outdir / "manifest.json", dump_json(manifest.to_document()))

    for name, rep in groups:
        acc = (
            "accuracy n/a"
            if rep.position_accuracy is None
            else f"accuracy {rep.position_accuracy:.4f} m / {rep.rotation_accuracy:.4f} rad"
        )
        print(
            f"{name}: {rep.n_frames} frames, precision "
            f"{rep.position_precision:.4f} m / {rep.rotation_precision:.4f} rad, {acc}"
        )
    print(f"report -> {outdir / 'report.json'}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    started = time.monotonic()
    options = resolve_options(args)
    log_paths = [Path(p) for p in options["log"]]
    schedule_path = Path(str(options["schedule"]))
    station_path = Path(str(options["station_map"]))
    schedule = load_schedule(schedule_path)
    station_map = load_station_map(station_path)
    log_texts = [(str(p), p.read_text(encoding="utf-8")) for p in log_paths]
    result = ingest(
        log_texts,
        schedule,
        station_map,
        gap_max=float(options["gap_max"]),
        dwell_min=float(options["dwell_min"]),
        skew_tol=float(options["skew_tol"]),
        rounds=None if options["rounds"] is None else int(options["rounds"]),
    )
    document = ingest_to_document(result, [str(p) for p in log_paths])

    outdir, digest = _prepare_outdir(args, "ingest", options)
    _write(outdir / "attainment.csv", dump_attainment(result.table))
    _write(outdir / "report.json", dump_json(document))
    inputs = {str(p): file_digest(p) for p in [*log_paths, schedule_path, station_path]}
    manifest = RunManifest(
        command="ingest",
        config_digest=digest,
        seeds=(),
        inputs=inputs,
        tool_version=__version__,
        duration_s=time.monotonic() - started,
    )
    _write(outdir / "manifest.json", dump_json(manifest.to_document()))

    print(
        f"ingest: {document['matched']} matched, "
        f"{len(document['failed_visibility'])} failed visibility, "
        f"{len(document['missing'])} missing, {len(document['orphans'])} orphans"
    )
    print(f"table -> {outdir / 'attainment.csv'}")
    return EXIT_OK


_COMMANDS = {
    "sim": cmd_sim,
    "eval-waypoints": cmd_eval_waypoints,
    "eval-frames": cmd_eval_frames,
    "ingest": cmd_ingest,
}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return _COMMANDS[args.command](args)
    except AssociationAmbiguityError as exc:
        print(f"error: ambiguous data: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS
    except (UsageError, NavBenchError, OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
