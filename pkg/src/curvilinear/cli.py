"""Command-line interface.

Subcommands cover each pipeline stage (features, train, infer, reconstruct,
eval), the full orchestration (pipeline), and synthetic data generation
(synth).  Exit codes: 0 success, 2 usage or input error, 3 internal error.
The CURVILINEAR_LOG environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import evaluation, imgio, pipeline, scoremap, synth
from .config import config_hash, hash_word, make_config, PRESETS

log = logging.getLogger("curvilinear")

IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")


class InputError(Exception):
    """A problem the user can fix: bad paths, mismatched inputs."""


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration")
    group.add_argument("--preset", choices=sorted(PRESETS),
                       help="per-dataset parameter preset")
    group.add_argument("--config", metavar="FILE",
                       help="key=value configuration file")
    group.add_argument("--seed", type=int)
    group.add_argument("--rho", type=float,
                       help="retained pixel fraction; omit to calibrate")
    group.add_argument("--stride", type=int)
    group.add_argument("--thickness", type=int, help="structure thickness tau")
    group.add_argument("--patch-side", type=int, dest="patch_side")
    group.add_argument("--kernel-size", type=int, dest="kernel_size")
    group.add_argument("--scales", help="comma-separated filter variances")
    group.add_argument("--angles", help="comma-separated orientations, degrees")
    group.add_argument("--slack-penalty", type=float, dest="C",
                       help="ranking slack penalty C")
    group.add_argument("--epsilon", type=float)
    group.add_argument("--max-iter", type=int, dest="max_iter")
    group.add_argument("--samples", type=int, help="training patch count K")
    group.add_argument("--min-length", type=int, dest="min_length",
                       help="minimum new vertices per extracted path")
    group.add_argument("--channel", choices=("luma", "red", "green", "blue"))
    group.add_argument("--invert", action=argparse.BooleanOptionalAction,
                       default=None, help="structures darker than background")
    group.add_argument("--margin-mode", choices=("unit", "loss"),
                       dest="margin_mode")
    group.add_argument("--tolerance", type=float,
                       help="evaluation matching radius")
    group.add_argument("--graph-threshold", type=float, dest="graph_threshold")
    group.add_argument("--invert-weights", action=argparse.BooleanOptionalAction,
                       default=None, dest="invert_weights",
                       help="treat high scores as cheap to traverse")


CONFIG_KEYS = ("seed", "rho", "stride", "thickness", "patch_side", "kernel_size",
               "scales", "angles", "C", "epsilon", "max_iter", "samples",
               "min_length", "channel", "invert", "margin_mode", "tolerance",
               "graph_threshold", "invert_weights")


def _resolve_config(args):
    overrides = {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return make_config(preset=args.preset, config_file=args.config,
                       overrides=overrides)


def _require_file(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"cannot read input file: {path}")
    return path


def _image_stem(path) -> str:
    return Path(path).stem


def _find_gt(gt_dir: Path, stem: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        candidate = gt_dir / (stem + suffix)
        if candidate.is_file():
            return candidate
    raise InputError(f"missing ground truth for {stem!r} under {gt_dir}")


def _list_images(directory: Path) -> list[Path]:
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise InputError(f"no images found under {directory}")
    return files


def cmd_features(args) -> int:
    cfg = _resolve_config(args)
    word = hash_word(config_hash(cfg))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bank = pipeline.make_bank(cfg)
    for image_path in args.images:
        image_path = _require_file(image_path)
        image = pipeline.load_image(image_path, cfg)
        fmap = pipeline.compute_feature(image, cfg, bank)
        out = out_dir / (image_path.stem + ".cfm")
        imgio.write_cfm(out, fmap, reserved=word)
        if args.png:
            imgio.write_gray_png(out_dir / (image_path.stem + "_feature.png"),
                                 fmap, config_hash=config_hash(cfg))
        log.info("wrote %s", out)
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    images_dir = Path(args.images_dir or cfg.images_dir)
    gt_dir = Path(args.gt_dir or cfg.gt_dir)
    if not images_dir.is_dir():
        raise InputError(f"images directory not found: {images_dir}")
    if not gt_dir.is_dir():
        raise InputError(f"ground truth directory not found: {gt_dir}")
    if cfg.samples < 2:
        raise InputError("insufficient samples: need at least 2")
    images = []
    gts = []
    for image_path in _list_images(images_dir):
        gt_path = _find_gt(gt_dir, image_path.stem)
        images.append(pipeline.load_image(image_path, cfg))
        gts.append(imgio.read_mask(gt_path))
    result = pipeline.train_on_images(images, gts, cfg)
    pipeline.write_model_files(args.out, result)
    stats = result.bundle.model.stats
    print(f"model: {args.out}  samples={result.n_samples}  "
          f"iterations={stats.iterations}  slack={stats.slack:.6g}  "
          f"rho={result.rho}")
    return 0


def _load_model(args):
    model_path = _require_file(args.model)
    bundle, sidecar = pipeline.read_model_files(model_path)
    return bundle, sidecar


def _resolve_rho(args, cfg, sidecar) -> float:
    if cfg.rho > 0:
        return cfg.rho
    if "rho" in sidecar:
        return float(sidecar["rho"])
    raise InputError("no rho available: pass --rho or train with calibration")


def cmd_infer(args) -> int:
    cfg = _resolve_config(args)
    bundle, sidecar = _load_model(args)
    rho = _resolve_rho(args, cfg, sidecar)
    hash_hex = config_hash(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    basis = pipeline.make_basis_pattern(bundle.side, bundle.thickness)
    for image_path in args.images:
        image_path = _require_file(image_path)
        image = pipeline.load_image(image_path, cfg)
        fmap = pipeline.compute_feature(image, cfg)
        sm = scoremap.infer_scores(fmap, bundle.model, basis, bundle.angles,
                                   cfg.effective_stride)
        selected = scoremap.top_rank_binary_map(sm, rho)
        pi = scoremap.synthesize(sm, selected, basis)
        stem = image_path.stem
        score_raster, theta_raster = sm.to_rasters()
        word = hash_word(hash_hex)
        imgio.write_cfm(out_dir / f"{stem}_scores.cfm", score_raster, reserved=word)
        imgio.write_cfm(out_dir / f"{stem}_theta.cfm", theta_raster, reserved=word)
        imgio.write_cfm(out_dir / f"{stem}_pi.cfm", pi, reserved=word)
        imgio.write_mask_png(out_dir / f"{stem}_toprank.png", selected,
                             config_hash=hash_hex)
        log.info("inferred %s", stem)
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _resolve_config(args)
    bundle, sidecar = _load_model(args)
    rho = _resolve_rho(args, cfg, sidecar)
    hash_hex = config_hash(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for image_path in args.images:
        image_path = _require_file(image_path)
        image = pipeline.load_image(image_path, cfg)
        result = pipeline.process_image(image, bundle, cfg, rho)
        pipeline.write_reconstruction_files(out_dir / image_path.stem, image,
                                            result, hash_hex)
        print(f"{image_path.stem}: {len(result.reconstruction.paths)} paths")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    if len(args.pred) != len(args.gt):
        raise InputError(f"got {len(args.pred)} predictions for "
                         f"{len(args.gt)} ground truth maps")
    hashes = set()
    reports = []
    rhos = []
    names = []
    for pred_path, gt_path in zip(args.pred, args.gt):
        pred_path = _require_file(pred_path)
        gt_path = _require_file(gt_path)
        embedded = imgio.png_config_hash(pred_path)
        if embedded:
            hashes.add(embedded)
        pred = imgio.read_mask(pred_path)
        gt = imgio.read_mask(gt_path)
        reports.append(evaluation.tolerant_f1(pred, gt, cfg.effective_tolerance))
        rhos.append(evaluation.pixel_proportion(pred))
        names.append(pred_path.stem)
    if len(hashes) > 1 and not args.force:
        raise InputError("predictions carry mixed config hashes; "
                         "rerun with --force to evaluate anyway")
    rows = evaluation.metrics_rows(names, reports, rhos)
    csv_text = evaluation.metrics_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    print(evaluation.metrics_table(rows), file=sys.stderr)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _resolve_config(args)
    data_dir = Path(args.data_dir)
    if not data_dir.is_dir():
        raise InputError(f"data directory not found: {data_dir}")
    try:
        summary = pipeline.run_pipeline(data_dir, args.out_dir, cfg)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from exc
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    manifest = synth.make_dataset(
        args.out_dir, n_train=args.train, n_test=args.test, size=args.size,
        thickness=float(cfg.thickness), noise_sigma=args.noise, seed=cfg.seed,
        config_hash=config_hash(cfg))
    print(f"wrote {len(manifest['train'])} train / {len(manifest['test'])} test "
          f"images under {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvilinear",
        description="Reconstruct tree-like curvilinear structures from "
                    "grayscale images.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="write curvilinear feature maps")
    p.add_argument("images", nargs="+")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.add_argument("--png", action="store_true",
                   help="also write normalized PNG previews")
    p.set_defaults(func=cmd_features)
    _add_config_flags(p)

    p = sub.add_parser("train", help="train the patch ranking model")
    p.add_argument("--images-dir", dest="images_dir")
    p.add_argument("--gt-dir", dest="gt_dir")
    p.add_argument("--out", default="model.crsv")
    p.set_defaults(func=cmd_train)
    _add_config_flags(p)

    p = sub.add_parser("infer", help="score maps and structured synthesis")
    p.add_argument("images", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_infer)
    _add_config_flags(p)

    p = sub.add_parser("reconstruct", help="extract geodesic paths")
    p.add_argument("images", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_reconstruct)
    _add_config_flags(p)

    p = sub.add_parser("eval", help="tolerant precision/recall/F1")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--gt", nargs="+", required=True)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--force", action="store_true",
                   help="allow predictions with mixed config hashes")
    p.set_defaults(func=cmd_eval)
    _add_config_flags(p)

    p = sub.add_parser("pipeline", help="train, reconstruct, and score a dataset")
    p.add_argument("--data-dir", required=True, dest="data_dir")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_pipeline)
    _add_config_flags(p)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--train", type=int, default=4)
    p.add_argument("--test", type=int, default=4)
    p.add_argument("--size", type=int, default=160)
    p.add_argument("--noise", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)
    _add_config_flags(p)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CURVILINEAR_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
