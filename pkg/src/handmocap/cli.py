"""Command-line interface tying the pipeline stages together.

Subcommands: simulate, annotate, calibrate, sync, protocol, evaluate.
Exit codes: 0 success, 1 runtime failure (one "error: ..." line on
stderr), 2 usage error (argparse). Every run with identical inputs and
seeds is bit-reproducible.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io as formats
from .annotation import annotate_frames
from .calibration import solve_pnp
from .errors import InvalidInputError, PipelineError
from .metrics import ErrorRecord, curve_export
from .model import N_JOINTS, default_shape
from .protocol import build_schedule
from .session import generate_synthetic_session
from .sync import align, gap_stats


def _cmd_simulate(args) -> int:
    config = formats.read_run_config(args.config)
    summary = generate_synthetic_session(config)
    print(f"wrote {summary.n_frames} frames: sensors {summary.sensor_log}, "
          f"ground truth {summary.ground_truth}")
    return 0


def _cmd_annotate(args) -> int:
    shape = (formats.read_shape(args.shape) if args.shape is not None
             else default_shape())
    frames = formats.read_sensor_log(args.sensors)
    results = annotate_frames(frames, shape,
                              feasibility_tol=args.feasibility_tol,
                              residual_tol=args.residual_tol)
    formats.write_annotations(results, args.out)
    counts = {}
    for r in results:
        counts[r.status] = counts.get(r.status, 0) + 1
    summary = ", ".join(f"{k}: {counts[k]}" for k in sorted(counts))
    print(f"annotated {len(results)} frames ({summary or 'empty'}) "
          f"-> {args.out}")
    return 0


def _cmd_calibrate(args) -> int:
    K = formats.read_intrinsics(args.intrinsics)
    corrs = formats.read_correspondences(args.corrs)
    result = solve_pnp(corrs, K)
    formats.write_transform(result.transform, args.out)
    print(f"calibrated from {len(corrs)} correspondences: "
          f"RMS {result.rms_px:.6g} px in {result.n_iter} iterations "
          f"-> {args.out}")
    return 0


def _cmd_sync(args) -> int:
    depth = formats.read_events(args.depth)
    sensors = formats.read_events(args.sensors)
    pairs = align(depth, sensors)
    formats.write_pairs(pairs, args.out)
    if pairs:
        stats = gap_stats(pairs)
        print(f"paired {len(pairs)} events: max gap {stats.max_us} us, "
              f"mean {stats.mean_us:.3g} us -> {args.out}")
    else:
        print(f"paired 0 events -> {args.out}")
    return 0


def _cmd_protocol(args) -> int:
    schedule = build_schedule(args.frames_per_transition)
    formats.write_schedule(schedule, args.out)
    print(f"schedule: {len(schedule.segments)} segments, "
          f"{schedule.total_frames} frames -> {args.out}")
    return 0


def _parse_subset(text: str | None):
    if text is None:
        return None
    try:
        ids = [int(t) for t in text.split(",") if t]
    except ValueError:
        raise InvalidInputError(f"bad joint subset {text!r}; expected "
                                "comma-separated ids 0..20") from None
    if not ids:
        raise InvalidInputError("joint subset is empty")
    return ids


def _parse_eps_grid(text: str) -> list[float]:
    """Either comma-separated values or start:stop:count (inclusive)."""
    try:
        if ":" in text:
            start_s, stop_s, count_s = text.split(":")
            start, stop, count = float(start_s), float(stop_s), int(count_s)
            if count < 2 or stop <= start:
                raise ValueError
            return list(np.linspace(start, stop, count))
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise InvalidInputError(
            f"bad eps grid {text!r}; expected e.g. '0.5,1,2' or "
            "'0:50:101'") from None


def _cmd_evaluate(args) -> int:
    gt = formats.read_annotations(args.gt)
    est = formats.read_annotations(args.est)
    if [r.timestamp_us for r in gt] != [r.timestamp_us for r in est]:
        raise InvalidInputError(
            "ground-truth and estimate timestamps do not match")
    if not gt:
        raise InvalidInputError("no frames to evaluate")
    subset = _parse_subset(args.subset)
    idx = np.arange(N_JOINTS) if subset is None else np.asarray(subset)
    if np.any((idx < 0) | (idx >= N_JOINTS)):
        raise InvalidInputError("joint subset ids must be in 0..20")
    records = []
    for g, e in zip(gt, est):
        d = np.linalg.norm(e.positions[idx] - g.positions[idx], axis=1)
        # An unrecovered joint counts as infinitely wrong, never as absent.
        d = np.where(np.isfinite(d), d, np.inf)
        records.append(ErrorRecord(g.timestamp_us, d))
    grid = _parse_eps_grid(args.eps_grid)
    rows = curve_export(records, grid)
    formats.write_curve(rows, args.out)
    eps, jw, fw = rows[-1]
    print(f"evaluated {len(records)} frames over {idx.size} joints: "
          f"joints_within({eps:g} mm) = {jw:.6g}, "
          f"frames_within = {fw:.6g} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="handmocap",
        description="Hand motion-capture annotation pipeline tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate",
                       help="generate a synthetic session from a config file")
    p.add_argument("--config", required=True,
                   help="run-config YAML (paths, seed, noise, budgets)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("annotate",
                       help="recover skeletons from a sensor log")
    p.add_argument("--shape", help="hand-shape YAML (default: builtin shape)")
    p.add_argument("--sensors", required=True, help="sensor log CSV")
    p.add_argument("--out", required=True, help="output annotation CSV")
    p.add_argument("--feasibility-tol", type=float, default=2.0,
                   help="PIP infeasibility projection tolerance, mm")
    p.add_argument("--residual-tol", type=float, default=1e-6,
                   help="residual below which a frame counts as exact, mm")
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("calibrate",
                       help="solve the tracker-to-camera transform")
    p.add_argument("--intrinsics", required=True, help="intrinsics YAML")
    p.add_argument("--corrs", required=True,
                   help="correspondence CSV (x,y,z,u,v)")
    p.add_argument("--out", required=True, help="output transform YAML")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("sync",
                       help="pair depth events with nearest sensor events")
    p.add_argument("--depth", required=True, help="depth events CSV")
    p.add_argument("--sensors", required=True, help="sensor events CSV")
    p.add_argument("--out", required=True, help="output pairs CSV")
    p.set_defaults(func=_cmd_sync)

    p = sub.add_parser("protocol", help="emit a capture schedule")
    p.add_argument("--frames-per-transition", type=int, default=3093,
                   help="frames per extremal-pair transition (default 3093)")
    p.add_argument("--out", required=True, help="output schedule CSV")
    p.set_defaults(func=_cmd_protocol)

    p = sub.add_parser("evaluate",
                       help="score an annotation CSV against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth annotation CSV")
    p.add_argument("--est", required=True, help="estimated annotation CSV")
    p.add_argument("--subset",
                   help="comma-separated joint ids 0..20 (default: all)")
    p.add_argument("--eps-grid", required=True,
                   help="error bounds, mm: '0.5,1,2' or start:stop:count")
    p.add_argument("--out", required=True, help="output curve CSV")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, FileNotFoundError, IsADirectoryError,
            PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
