"""Command-line front end: ``cenntrack {train,track,score,cost,synth}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as fio
from .config import load_config
from .core import BACKEND, CellGrid, cell_to_gray, gray_to_cell
from .cost import CostParams, default_pipeline, edp_compare, frame_report, load_pipeline
from .metrics import auc, overlap, success_curve
from .synthetic import SyntheticSpec, generate
from .tracker import track
from .trainer import BoundingBox, TrainedModel, train

log = logging.getLogger("cenntrack")


def _pair(text, cast=float):
    try:
        a, b = (cast(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return a, b


def _box(text):
    try:
        x, y, w, h = (int(v) for v in text.split(","))
        return BoundingBox(x - 1, y - 1, w, h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad box {text!r}: {exc}")


def _sequence(args, need_gt=True):
    spec = fio.SequenceSpec(Path(args.frames), Path(args.gt) if args.gt else None,
                            args.start, args.stop)
    frames = spec.load_frames()
    boxes = spec.load_boxes(len(frames)) if need_gt else None
    return frames, boxes


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    frames, boxes = _sequence(args)
    first = CellGrid(gray_to_cell(frames[0]))
    model = train(first, boxes[0], cfg.trainer, cfg.solver)
    fio.atomic_write(args.out, model.to_json())
    hist = model.fitness_history
    for g in list(range(0, len(hist), 10)) + ([len(hist) - 1] if (len(hist) - 1) % 10 else []):
        print(f"generation {g:4d}  best fitness {hist[g]:.6f}")
    print(f"kernels {len(model.kernels)}  final threshold {model.final_threshold:+.2f}  "
          f"reference area {model.reference_response_area:g}")
    print(f"wrote {args.out}")
    return 0


def _load_model(path) -> TrainedModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise fio.InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return TrainedModel.from_json(text)
    except (ValueError, json.JSONDecodeError) as exc:
        raise fio.InputError(f"{path}: invalid model ({exc})") from None


def cmd_track(args) -> int:
    cfg = load_config(args.config)
    model = _load_model(args.model)
    if args.init_box is None and not args.gt:
        raise fio.InputError("track needs --gt or --init-box for the first frame")
    frames, _ = _sequence(args, need_gt=False)
    if args.init_box is not None:
        box0 = args.init_box
    else:
        box0 = fio.load_ground_truth(args.gt)[args.start]
    cells = (gray_to_cell(f) for f in frames)
    results = []
    masks = Path(args.masks) if args.masks else None
    for r in track(model, cells, box0, cfg.tracker, cfg.solver, keep_masks=masks is not None):
        log.info("frame %d box %s lost=%s area=%d", r.frame, r.box.as_tuple(), r.lost, r.area)
        if masks is not None and r.object_mask is not None:
            fio.write_frame(masks / f"mask_{r.frame:05d}.pgm", cell_to_gray(r.object_mask))
        results.append(r)
    fio.atomic_write(args.out, fio.results_csv(results))
    lost = sum(r.lost for r in results)
    print(f"tracked {len(results)} frames ({lost} lost), wrote {args.out}")
    return 0


def cmd_score(args) -> int:
    rows = fio.read_results(args.results)
    gt = fio.load_ground_truth(args.gt)
    if len(gt) < len(rows):
        raise fio.InputError(f"{args.gt}: {len(gt)} boxes for {len(rows)} result rows")
    tracked = fio.boxes_from_results(rows)
    truth = [gt[r["frame"] + args.start] if r["frame"] + args.start < len(gt) else None for r in rows]
    if any(t is None for t in truth):
        raise fio.InputError("result frame index beyond ground truth")
    ious = [overlap(t.as_tuple(), a.as_tuple()) for t, a in zip(tracked, truth)]
    curve = success_curve(ious)
    if args.out:
        fio.atomic_write(args.out, curve.to_csv())
    print(f"AUC {auc(curve):.4f}")
    return 0


def cmd_cost(args) -> int:
    cfg = load_config(args.config)
    if args.pipeline:
        try:
            steps, settings = load_pipeline(Path(args.pipeline).read_text())
        except OSError as exc:
            raise fio.InputError(f"{args.pipeline}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise fio.InputError(f"{args.pipeline}: invalid JSON ({exc})") from None
    else:
        steps, settings = default_pipeline()
    if not steps:
        raise fio.InputError("pipeline has no steps")
    params = cfg.cost
    overrides = {}
    if "n_cells" in settings:
        overrides["n_cells"] = int(settings["n_cells"])
    if args.n_cells is not None:
        overrides["n_cells"] = args.n_cells
    if args.power_mode:
        overrides["power_mode"] = args.power_mode
    params = CostParams(**{**params.__dict__, **overrides})
    frames = args.n_frames if args.n_frames is not None else int(settings.get("frames", 1))
    report = frame_report(steps, params, frames)
    print(report.to_text(), end="")
    if args.csv:
        fio.atomic_write(args.csv, report.to_csv())
    if args.cpu is not None:
        energy, delay = args.cpu
        print(f"EDP improvement (CPU / CeNN) = {edp_compare(report, energy, delay):.2f}")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(width=args.width, height=args.height, n_frames=args.n_frames,
                         size=args.size, start=args.start_pos, velocity=args.velocity,
                         shape=args.shape, background=args.background,
                         foreground=args.foreground, texture=args.texture,
                         vanish_at=args.vanish_at, seed=args.seed)
    frames, boxes = generate(spec)
    out = Path(args.out)
    for i, f in enumerate(frames):
        fio.write_frame(out / f"{i:05d}.{args.format}", f)
    fio.atomic_write(out / "groundtruth.txt", fio.format_ground_truth(boxes))
    print(f"wrote {len(frames)} frames and groundtruth.txt to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cenntrack", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"cenntrack (backend: {BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    def seq_args(sp, gt_required):
        sp.add_argument("--frames", required=True, help="directory of .pgm/.png frames")
        sp.add_argument("--gt", required=gt_required, help="ground-truth file (1-based x,y,w,h)")
        sp.add_argument("--start", type=int, default=0, help="first frame index")
        sp.add_argument("--stop", type=int, default=None, help="stop before this frame index")
        sp.add_argument("--config", help="run configuration JSON")

    sp = sub.add_parser("train", help="train a feature model on the first frame")
    seq_args(sp, True)
    sp.add_argument("--out", required=True, help="model JSON to write")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("track", help="track through a sequence")
    seq_args(sp, False)
    sp.add_argument("--model", required=True)
    sp.add_argument("--init-box", type=_box, help="1-based x,y,w,h for the first frame")
    sp.add_argument("--out", required=True, help="results CSV to write")
    sp.add_argument("--masks", help="directory for per-frame object mask PGMs")
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("score", help="success curve and AUC of a results CSV")
    sp.add_argument("--results", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--start", type=int, default=0, help="ground-truth line of result frame 0")
    sp.add_argument("--out", help="curve CSV to write")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("cost", help="per-frame time/energy report")
    sp.add_argument("--pipeline", help="pipeline JSON (default: shipped tracking schedule)")
    sp.add_argument("--config")
    sp.add_argument("--n-cells", type=int)
    sp.add_argument("--frames", dest="n_frames", type=int, help="frames in the sequence")
    sp.add_argument("--power-mode", choices=["lookup", "template"])
    sp.add_argument("--cpu", type=_pair, metavar="ENERGY_UJ,DELAY_US",
                    help="CPU per-frame figures for the EDP ratio")
    sp.add_argument("--csv", help="also write the report as CSV")
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("synth", help="generate a synthetic sequence")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-frames", type=int, default=100)
    sp.add_argument("--width", type=int, default=240)
    sp.add_argument("--height", type=int, default=48)
    sp.add_argument("--size", type=int, default=20)
    sp.add_argument("--start-pos", type=lambda s: _pair(s, int), default=(10, 14))
    sp.add_argument("--velocity", type=_pair, default=(2.0, 0.0))
    sp.add_argument("--shape", choices=["square", "disc"], default="square")
    sp.add_argument("--background", type=int, default=255)
    sp.add_argument("--foreground", type=int, default=0)
    sp.add_argument("--texture", type=float, default=0.0)
    sp.add_argument("--vanish-at", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["pgm", "png"], default="pgm")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (fio.InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
