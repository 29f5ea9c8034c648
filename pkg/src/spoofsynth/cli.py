"""Command line entry point: ``synth <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evalkit, mesher, pipeline
from .config import load_config
from .errors import SynthError

log = logging.getLogger("spoofsynth")


def _floats(text: str, n: int):
    vals = [float(v) for v in text.replace("x", ",").split(",")]
    if len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def parse_corners(text: str):
    """``"x,y;x,y;x,y;x,y"`` in TL, TR, BR, BL order."""
    pts = [_floats(p, 2) for p in text.strip().split(";") if p.strip()]
    if len(pts) != 4:
        raise argparse.ArgumentTypeError("need exactly four corners")
    return pts


def _params(args) -> pipeline.SynthesisParams:
    bend = args.bend if args.bend else None
    mode = pipeline.ROTATE_AND_BEND if bend else pipeline.ROTATE_ONLY
    return pipeline.SynthesisParams(args.yaw, args.pitch, bend, args.axis, mode)


def cmd_batch(args) -> int:
    cfg = load_config(args.config)
    if args.dump_layers:
        from dataclasses import replace
        cfg = replace(cfg, dump_layers=True)
    report = pipeline.run_batch(args.manifest, cfg, seed=args.seed, jobs=args.jobs, out_dir=args.out)
    print(f"{len(report.records)} records, {report.n_synthetic} synthetic, "
          f"{len(report.failures)} failed -> {report.manifest_path}")
    return 0 if report.ok else 1


def cmd_one(args) -> int:
    cfg = load_config(args.config)
    if args.texture_size:
        from dataclasses import replace
        cfg = replace(cfg, texture_size=tuple(int(v) for v in _floats(args.texture_size, 2)))
    ann = mesher.RegionAnnotation(args.image, mesher.Quad(args.corners), args.eye_px, "print", "cli")
    image = pipeline.read_image(args.image)
    fused, record = pipeline.synthesize_one(image, ann, _params(args), cfg, output_path=args.out)
    pipeline.write_image(fused, args.out, "jpeg" if args.out.lower().endswith((".jpg", ".jpeg")) else "png")
    print(json.dumps(record.to_dict()))
    return 0


def cmd_preview_mesh(args) -> int:
    cfg = load_config(args.config)
    mesh = mesher.build_planar_mesh(_floats(args.extent, 2), tuple(int(v) for v in _floats(args.grid, 2))
                                    if args.grid else cfg.grid)
    mesh = pipeline.deform_mesh(mesh, _params(args))
    Path(args.out).write_text(mesher.mesh_to_obj(mesh), encoding="utf-8")
    print(f"wrote {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles to {args.out}")
    return 0


def cmd_metrics(args) -> int:
    scores = evalkit.read_scores_csv(args.scores)
    dev = [r for r in scores if r.split == args.dev_split]
    test = [r for r in scores if r.split == args.test_split] or [r for r in scores if r.split != args.dev_split]
    out = {}
    test_eer, test_t = evalkit.eer(test)
    out["test_eer"] = evalkit.round_half_up(100 * test_eer)
    threshold = test_t
    if dev:
        dev_eer, threshold = evalkit.eer(dev)
        out["dev_eer"] = evalkit.round_half_up(100 * dev_eer)
        out["hter"] = evalkit.round_half_up(100 * evalkit.hter(dev, test))
    out["threshold"] = threshold
    if any(r.truth == "spoof" for r in test):
        out["pad"] = evalkit.pad_metrics(test, threshold).as_percent()
    if args.curve:
        with open(args.curve, "w", encoding="utf-8") as fh:
            fh.write("threshold,far,frr\n")
            for t, far, frr in evalkit.far_frr_curve(test):
                fh.write(f"{t!r},{far!r},{frr!r}\n")
    print(json.dumps(out, indent=2))
    return 0


def cmd_schedule(args) -> int:
    records = pipeline.read_manifest(args.manifest)
    live, spoof = evalkit.live_spoof_ids(records)
    sched = evalkit.make_schedule(live, spoof, args.batch, evalkit.parse_ratio(args.ratio),
                                  args.epochs, args.seed)
    per_epoch = sched.batches_per_epoch()
    fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for i, batch in enumerate(sched.batches):
            fh.write(json.dumps({"epoch": i // per_epoch, "batch": i % per_epoch,
                                 "samples": [list(s) for s in batch]}) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_merge_live(args) -> int:
    merged = evalkit.merge_external_live(pipeline.read_manifest(args.base), pipeline.read_manifest(args.external))
    pipeline.write_manifest(merged, args.out)
    print(f"{sum(r.label == 'live' for r in merged)} live records in {args.out}")
    return 0


def _add_pose(p):
    p.add_argument("--yaw", type=float, default=0.0, help="degrees, about the vertical axis")
    p.add_argument("--pitch", type=float, default=0.0, help="degrees; positive tips the top away")
    p.add_argument("--bend", type=float, default=0.0, help="bending angle in degrees (0: flat)")
    p.add_argument("--axis", choices=["vertical", "horizontal", "both"], default="vertical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synth", description="synthetic spoof image toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("batch", help="synthesize every spoof record of a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-layers", action="store_true", help="also write rendered layers as PNG")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("one", help="synthesize a single sample")
    p.add_argument("--image", required=True)
    p.add_argument("--corners", required=True, type=parse_corners, help='"x,y;x,y;x,y;x,y" as TL;TR;BR;BL')
    p.add_argument("--eye-px", type=float, default=63.0, help="eye-center distance in pixels")
    p.add_argument("--texture-size", help="WxH of the rectified texture")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    _add_pose(p)
    p.set_defaults(func=cmd_one)

    p = sub.add_parser("preview-mesh", help="write the deformed mesh as OBJ")
    p.add_argument("--extent", default="200,150", help="l,h")
    p.add_argument("--grid", help="m,n anchors")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    _add_pose(p)
    p.set_defaults(func=cmd_preview_mesh)

    p = sub.add_parser("metrics", help="EER/HTER/APCER/BPCER/ACER from a score CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--dev-split", default="dev")
    p.add_argument("--test-split", default="test")
    p.add_argument("--curve", help="dump the FAR/FRR curve as CSV")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("schedule", help="balanced mini-batch schedule as JSONL")
    p.add_argument("--manifest", required=True)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--ratio", default="1:3", help="live:spoof")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("merge-live", help="append external live samples to a manifest")
    p.add_argument("--base", required=True)
    p.add_argument("--external", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge_live)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SynthError, OSError, ValueError) as exc:
        print(f"synth: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
