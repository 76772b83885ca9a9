"""Command-line entry points: ``oto run``, ``oto bench``, ``oto detect``, ``oto craft``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import scenes
from .clouds import CloudFormatError, crafted_suite, format_cloud, parse_cloud
from .planner import CAP, PLANNERS, ExplorationMetrics, ExplorationResult, PlannerConfig, run_exploration
from .subregion import DetectionParams, run_detection
from .world import GridMap, Scene, SceneError, load_scene_file

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCOMPLETE = 2

# flags of their own, not overrides
_RESERVED = ("planner", "seed")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 rather than argparse's 2, which is
    reserved for runs that hit the step cap."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("planner parameters")
    for f in fields(PlannerConfig):
        if f.name in _RESERVED:
            continue
        flag = "--" + f.name.replace("_", "-")
        default = f.default
        if isinstance(default, bool):
            group.add_argument(flag, type=_bool, metavar="BOOL", default=None, dest=f.name)
        elif isinstance(default, tuple):
            group.add_argument(flag, type=float, nargs=len(default), metavar="M", default=None, dest=f.name)
        elif isinstance(default, int):
            group.add_argument(flag, type=int, default=None, dest=f.name)
        elif isinstance(default, float):
            group.add_argument(flag, type=float, default=None, dest=f.name)
        else:
            group.add_argument(flag, default=None, dest=f.name)


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for f in fields(PlannerConfig):
        if f.name in _RESERVED:
            continue
        value = getattr(args, f.name, None)
        if value is not None:
            out[f.name] = tuple(value) if isinstance(value, list) else value
    return out


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("OTO_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"OTO_SEED must be an integer, got {env!r}") from None


def resolve_scene(name: str) -> Scene:
    """Load a scene file, or a bundled corpus scene by name (``maze_64``)."""
    path = Path(name)
    try:
        if path.is_file():
            return load_scene_file(path)
        corpus = name if name.endswith(".txt") else name + ".txt"
        if corpus in scenes.corpus_names():
            return scenes.load_corpus(corpus)
    except SceneError as exc:
        raise CliError(f"{name}: {exc}") from None
    raise CliError(f"scene not found: {name}")


def _make_config(planner: str, seed: int, overrides: dict) -> PlannerConfig:
    try:
        return PlannerConfig(planner=planner, seed=seed, **overrides)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc)) from None


def metrics_json(metrics: ExplorationMetrics) -> str:
    """Wall-clock timings are left out so the file is a pure function of the inputs."""
    return json.dumps(metrics.to_dict(timing=False), sort_keys=True, indent=2) + "\n"


def timing_json(metrics: ExplorationMetrics) -> str:
    summary = {}
    for stage, times in sorted(metrics.stage_wall.items()):
        summary[stage] = {"calls": len(times), "total_s": float(sum(times)),
                          "median_s": float(statistics.median(times))}
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def trajectory_csv(trajectory: Sequence[tuple[float, float, float]]) -> str:
    buf = io.StringIO()
    buf.write("t,x,y\n")
    for t, x, y in trajectory:
        buf.write(f"{t:.6f},{x:.6f},{y:.6f}\n")
    return buf.getvalue()


def map_text(grid: GridMap) -> str:
    """Plain PGM (P2): 0 unknown, 1 free, 2 occupied; first row is the top."""
    lines = ["P2", f"{grid.width} {grid.height}", "2"]
    for iy in range(grid.height - 1, -1, -1):
        lines.append(" ".join(str(int(v)) for v in grid.cells[iy]))
    return "\n".join(lines) + "\n"


def write_run(result: ExplorationResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(metrics_json(result.metrics), encoding="utf-8")
    (out / "timing.json").write_text(timing_json(result.metrics), encoding="utf-8")
    (out / "trajectory.csv").write_text(trajectory_csv(result.trajectory), encoding="utf-8")
    (out / "map.pgm").write_text(map_text(result.grid), encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    scene = resolve_scene(args.scene)
    config = _make_config(args.planner, _seed(args.seed), _overrides(args))
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise CliError(f"--out {out} exists and is not a directory")
    result = run_exploration(scene, config)
    write_run(result, out)
    m = result.metrics
    print(f"{m.planner} seed={m.seed} termination={m.termination} distance={m.distance:.2f} m "
          f"sim_time={m.sim_time:.2f} s coverage={m.final_coverage:.4f}")
    return EXIT_INCOMPLETE if m.termination == CAP else EXIT_OK


@dataclass(frozen=True)
class BenchSpec:
    scenes: tuple[str, ...]
    planners: tuple[str, ...]
    seeds: tuple[int, ...]
    output: Optional[str] = None

    def __post_init__(self):
        if not self.scenes or not self.planners or not self.seeds:
            raise ValueError("scenes, planners and seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        bad = [p for p in self.planners if p not in PLANNERS]
        if bad:
            raise ValueError(f"unknown planner {bad[0]!r}")


BENCH_COLUMNS = (
    "scene", "planner", "runs", "status",
    "distance_mean", "distance_max", "distance_min",
    "sim_time_mean", "sim_time_max", "sim_time_min",
    "coverage_min", "workload_mean", "full_scan_workload_mean",
)
TIMING_COLUMNS = ("frontier_wall_ms", "full_scan_wall_ms")


def _bench_one(job: tuple[str, str, int, dict]) -> dict:
    scene_name, planner, seed, overrides = job
    try:
        config = PlannerConfig(planner=planner, seed=seed, shadow_full_scan=True, **overrides)
        m = run_exploration(resolve_scene(scene_name), config).metrics
    except Exception as exc:  # a failed run marks its row, it does not stop the sweep
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {"metrics": m.to_dict()}


def _median_ms(values: list) -> float:
    return 1e3 * statistics.median(values) if values else float("nan")


def bench_rows(spec: BenchSpec, overrides: Optional[dict] = None, jobs: int = 1,
               runs_dir: Optional[Path] = None) -> list[dict]:
    """Aggregate one row per (scene, planner) in spec order."""
    overrides = dict(overrides or {})
    overrides.pop("shadow_full_scan", None)
    work = [(s, p, seed, overrides) for s in spec.scenes for p in spec.planners for seed in spec.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_one, work))
    else:
        results = [_bench_one(w) for w in work]
    rows = []
    k = 0
    for s in spec.scenes:
        for p in spec.planners:
            runs = []
            failed = False
            for seed in spec.seeds:
                res = results[k]
                k += 1
                if "error" in res:
                    print(f"run failed: {s} {p} seed={seed}: {res['error']}", file=sys.stderr)
                    failed = True
                    continue
                m = res["metrics"]
                failed = failed or m["termination"] == CAP
                runs.append(m)
                if runs_dir is not None:
                    path = runs_dir / f"{Path(s).stem}__{p}__{seed}.json"
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_text(json.dumps({k2: v for k2, v in m.items() if k2 != "stage_wall"},
                                               sort_keys=True, indent=2) + "\n", encoding="utf-8")
            row = {"scene": s, "planner": p, "runs": len(runs), "status": "failed" if failed else "ok"}
            if runs:
                dist = [m["distance"] for m in runs]
                sim = [m["sim_time"] for m in runs]
                work_inc = [w for m in runs for w in m["frontier_workload"]]
                work_full = [w for m in runs for w in m["frontier_shadow_workload"]]
                row.update(
                    distance_mean=statistics.fmean(dist), distance_max=max(dist), distance_min=min(dist),
                    sim_time_mean=statistics.fmean(sim), sim_time_max=max(sim), sim_time_min=min(sim),
                    coverage_min=min(m["final_coverage"] for m in runs),
                    workload_mean=statistics.fmean(work_inc) if work_inc else 0.0,
                    full_scan_workload_mean=statistics.fmean(work_full) if work_full else 0.0,
                    frontier_wall_ms=_median_ms([t for m in runs for t in m["stage_wall"].get("frontier", [])]),
                    full_scan_wall_ms=_median_ms([t for m in runs
                                                  for t in m["stage_wall"].get("frontier_full", [])]),
                )
            rows.append(row)
    return rows


def format_bench(rows: list[dict], timing: bool = True) -> str:
    columns = BENCH_COLUMNS + (TIMING_COLUMNS if timing else ())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c, "")
            cells.append(f"{v:.6f}" if isinstance(v, float) else v)
        writer.writerow(cells)
    return buf.getvalue()


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        spec = BenchSpec(tuple(args.scenes), tuple(args.planners), tuple(args.seeds), args.out)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    for s in spec.scenes:
        resolve_scene(s)  # fail fast on bad paths
    overrides = _overrides(args)
    _make_config(spec.planners[0], spec.seeds[0], overrides)
    if args.jobs < 1:
        raise CliError("--jobs must be at least 1")
    rows = bench_rows(spec, overrides, args.jobs, Path(args.runs_dir) if args.runs_dir else None)
    text = format_bench(rows, timing=not args.no_timing)
    if spec.output:
        Path(spec.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_INCOMPLETE if any(r["status"] == "failed" for r in rows) else EXIT_OK


def detection_report(cloud, origin, params: DetectionParams, seed: int = 0) -> str:
    det = run_detection(cloud, origin, params, seed)
    lines = [f"points {len(cloud)}", f"samples {len(det.samples)}"]
    for j, (cnt, occ) in enumerate(zip(det.vote.counts, det.vote.occupied), start=1):
        lines.append(f"quadrant {j}: cnt={cnt} {'occupied' if occ else 'free'}")
    for p in det.planes:
        lines.append(f"plane quadrant {p.quadrant}: normal=({p.normal[0]:.4f}, {p.normal[1]:.4f}) "
                     f"offset={p.offset:.4f} x=[{p.x_min:.4f}, {p.x_max:.4f}] "
                     f"y=[{p.y_min:.4f}, {p.y_max:.4f}] inliers={p.inliers}")
    if det.region is None:
        lines.append("no enclosure")
    else:
        r = det.region
        lines.append(f"box x_min={r.x_min:.4f} x_max={r.x_max:.4f} y_min={r.y_min:.4f} y_max={r.y_max:.4f}")
    return "\n".join(lines) + "\n"


def cmd_detect(args: argparse.Namespace) -> int:
    path = Path(args.cloud)
    if not path.is_file():
        raise CliError(f"cloud file not found: {path}")
    try:
        cloud = parse_cloud(path.read_text(encoding="utf-8"))
    except CloudFormatError as exc:
        raise CliError(f"{path}: {exc}") from None
    try:
        params = DetectionParams(sample_radius=args.sample_radius, neighbours=args.neighbours,
                                 vote_threshold=args.vote_threshold,
                                 max_inclination_deg=args.max_inclination_deg)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.sample_radius <= 0 or args.neighbours < 3:
        raise CliError("--sample-radius must be positive and --neighbours at least 3")
    sys.stdout.write(detection_report(cloud, tuple(args.origin), params, _seed(args.seed)))
    return EXIT_OK


def cmd_craft(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for c in crafted_suite(args.seed):
        (out / f"{c.name}.xyz").write_text(format_cloud(c.cloud), encoding="utf-8")
        truth = "none" if c.box is None else " ".join(f"{v:g}" for v in c.box)
        print(f"{c.name}: box {truth}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oto", description="Frontier exploration planner and grid-world simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="explore one scene and write metrics, trajectory and map")
    run.add_argument("--scene", required=True, help="scene file, or the name of a bundled scene")
    run.add_argument("--planner", choices=PLANNERS, default="oto")
    run.add_argument("--seed", type=int, default=None, help="defaults to $OTO_SEED, else 0")
    run.add_argument("--out", required=True, help="output directory")
    _add_overrides(run)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="sweep scenes x planners x seeds into a CSV summary")
    bench.add_argument("--scenes", nargs="+", required=True)
    bench.add_argument("--planners", nargs="+", choices=PLANNERS, default=["oto", "greedy"])
    bench.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    bench.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--runs-dir", default=None, help="also write per-run metrics here")
    bench.add_argument("--no-timing", action="store_true", help="omit the wall-clock columns")
    _add_overrides(bench)
    bench.set_defaults(func=cmd_bench)

    detect = sub.add_parser("detect", help="run enclosed sub-region detection on a point cloud")
    detect.add_argument("--cloud", required=True, help="text file with one 'x y z' per line")
    detect.add_argument("--origin", type=float, nargs=3, default=(0.0, 0.0, 0.0), metavar=("X", "Y", "Z"))
    detect.add_argument("--sample-radius", type=float, default=1.0)
    detect.add_argument("--neighbours", type=int, default=50)
    detect.add_argument("--vote-threshold", type=int, default=4)
    detect.add_argument("--max-inclination-deg", type=float, default=15.0)
    detect.add_argument("--seed", type=int, default=None)
    detect.set_defaults(func=cmd_detect)

    craft = sub.add_parser("craft", help="write the crafted detection clouds as .xyz files")
    craft.add_argument("--out", required=True)
    craft.add_argument("--seed", type=int, default=0)
    craft.set_defaults(func=cmd_craft)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"oto {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"oto {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
