"""Command-line entry point: ``pointtrack {track,eval,bench,synth,selftest}``.

Every verb accepts ``--config FILE``: a JSON object whose keys are flag
names (kebab or snake case). Flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .metrics import THRESHOLDS
from .params import VARIANTS
from .pipeline import BACKBONES, REFINERS
from .synth import MOTIONS
from .weights import WeightsError

EXIT_IO = 3
EXIT_VALUE = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pointtrack", description="Long-range point tracking on CPU.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track query points through a video")
    _add_common(p)
    p.add_argument("--video", required=True, help="PNG frame directory or LTW1 tensor file")
    p.add_argument("--queries", required=True, help="query JSON file")
    p.add_argument("--weights", help="LTW1 weights; seeded init when omitted")
    p.add_argument("--variant", choices=VARIANTS, default="B")
    p.add_argument("--refiner", choices=REFINERS, default="learned")
    p.add_argument("--iterations", type=int, default=4)
    p.add_argument("--backbone", choices=BACKBONES, default="learned")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, help="threads over query chunks (default: $POINTTRACK_WORKERS or 1)")
    p.add_argument("--no-history", action="store_true", help="omit per-iteration tracks")
    p.add_argument("--render-overlays", metavar="DIR", help="write one overlay PNG per frame")
    p.add_argument("--out", required=True, help="output track JSON")

    p = sub.add_parser("eval", help="score a track file against ground truth")
    _add_common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mode", choices=("strided", "first"), default="strided")
    p.add_argument("--aj-convention", choices=("frame", "tapvid"), default="frame")
    p.add_argument("--report", help="machine-readable JSON report path")
    p.add_argument("--figure", help="PNG bar chart of PCK per threshold")

    p = sub.add_parser("bench", help="throughput and FLOP report")
    _add_common(p)
    p.add_argument("--variant", choices=VARIANTS, default="B")
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--points", default="1,10,100,1000", help="comma-separated point counts")
    p.add_argument("--size", type=int, default=256, help="square frame size")
    p.add_argument("--iterations", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--figure", help="PNG throughput plot")

    p = sub.add_parser("synth", help="write a synthetic video with ground truth")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--motion", choices=MOTIONS, default="translate")
    p.add_argument("--speed", type=float, default=2.0)
    p.add_argument("--n-queries", type=int, default=16)
    p.add_argument("--png", action="store_true", help="also write 8-bit PNG frames")

    p = sub.add_parser("selftest", help="run built-in oracle checks")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    parser.verbs = sub.choices
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    if known.config and command in parser.verbs:
        with open(known.config, encoding="utf-8") as f:
            cfg = json.load(f)
        if not isinstance(cfg, dict):
            raise io.FormatError(f"{known.config}: config must be a JSON object")
        sub = parser.verbs[command]
        actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in actions or dest in ("config", "help"):
                raise io.FormatError(f"{known.config}: unknown option {key!r} for {command}")
            defaults[dest] = value
            # a required flag supplied by the config becomes optional
            actions[dest].required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _print_rows(rows) -> None:
    for row in rows:
        print("\t".join(str(v) for v in row))


def cmd_track(args) -> int:
    from .pipeline import run_track

    doc = run_track(
        args.video,
        args.queries,
        weights_path=args.weights,
        variant=args.variant,
        refiner=args.refiner,
        K=args.iterations,
        out_path=args.out,
        backbone=args.backbone,
        seed=args.seed,
        workers=args.workers,
        keep_history=not args.no_history,
        render_overlays=args.render_overlays,
    )
    print(f"tracked {len(doc['tracks'])} points -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    from .pipeline import run_eval

    report = run_eval(args.pred, args.gt, args.mode, args.aj_convention).as_dict()
    rows = [("metric", "value"), ("aj", f"{report['aj']:.4f}"), ("pck_avg", f"{report['pck_avg']:.4f}")]
    rows += [(f"pck@{d}", f"{report['pck_per_threshold'][str(d)]:.4f}") for d in THRESHOLDS]
    rows += [("oa", f"{report['oa']:.4f}"), ("n_points", report["n_points"])]
    _print_rows(rows)
    for flag in report["flags"]:
        print(f"note: {flag}", file=sys.stderr)
    report.update(mode=args.mode, aj_convention=args.aj_convention)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    if args.figure:
        from .plotting import plot_eval

        plot_eval(report, args.figure)
    return 0


def cmd_bench(args) -> int:
    from .bench import run_bench

    try:
        points = [int(v) for v in args.points.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"--points must be comma-separated integers, got {args.points!r}") from None
    if not points or min(points) < 1:
        raise ValueError("--points needs at least one positive count")
    report = run_bench(args.variant, args.frames, points, (args.size, args.size), args.iterations, args.seed, args.workers)
    _print_rows([("n_points", "seconds", "points_per_sec")])
    _print_rows((t["n_points"], f"{t['seconds']:.3f}", f"{t['points_per_sec']:.3f}") for t in report["timings"])
    print()
    _print_rows([("quantity", "value")])
    _print_rows((f"gflops.{k}", f"{v / 1e9:.4f}") for k, v in report["flops_per_point"].items())
    _print_rows(
        [
            ("local_corr_macs.analytic", report["local_corr_macs_analytic"]),
            ("local_corr_macs.counted", report["local_corr_macs_counted"]),
        ]
    )
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    if args.figure:
        from .plotting import plot_bench

        plot_bench(report, args.figure)
    return 0


def cmd_synth(args) -> int:
    from .pipeline import synth_queries
    from .synth import SynthSpec, synth_generate

    spec = SynthSpec(args.seed, args.frames, args.height, args.width, args.motion, args.speed, args.n_queries)
    video, gts = synth_generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.save_video(video, out / "video.ltw")
    if args.png:
        io.save_video(video, out / "frames")
    io.save_ground_truth(gts, video.size, out / "gt.json")
    ids, queries = synth_queries(gts)
    io.save_queries(queries, out / "queries.json", ids)
    print(f"wrote {video.num_frames} frames, {len(gts)} tracks, {len(queries)} queries to {out}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}\t{name}\t{detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


COMMANDS = {"track": cmd_track, "eval": cmd_eval, "bench": cmd_bench, "synth": cmd_synth, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except (WeightsError, io.FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALUE


if __name__ == "__main__":
    sys.exit(main())
