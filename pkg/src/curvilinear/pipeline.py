"""End-to-end orchestration: feature, train, infer, reconstruct, evaluate.

Glue between the numerical modules and the artifact files the command-line
front end reads and writes.  All stage functions are deterministic given the
configuration and seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, graphrec, imgio, scoremap
from .config import RunConfig, config_hash, hash_word
from .imaging import FilterBank, feature_map
from .patch import (BasisPattern, estimate_orientation, extract_rotated_patch,
                    feature_vector, make_basis_pattern, patch_loss)
from .ranking import ModelBundle, RankingModel, train


def make_bank(cfg: RunConfig) -> FilterBank:
    return FilterBank(orientations=tuple(cfg.angles), variances=tuple(cfg.scales),
                      size=cfg.kernel_size)


def make_basis(cfg: RunConfig) -> BasisPattern:
    return make_basis_pattern(cfg.patch_side, cfg.thickness)


def load_image(path, cfg: RunConfig) -> np.ndarray:
    return imgio.read_gray(path, channel=cfg.channel)


def compute_feature(image: np.ndarray, cfg: RunConfig,
                    bank: FilterBank | None = None) -> np.ndarray:
    """Curvilinear feature map honoring the polarity flag."""
    if bank is None:
        bank = make_bank(cfg)
    image = np.asarray(image, dtype=np.float64)
    if cfg.invert:
        image = -image
    return feature_map(image, bank)


def sample_patches(fmap: np.ndarray, gt: np.ndarray, n_on: int, n_off: int,
                   cfg: RunConfig, rng: np.random.Generator,
                   basis: BasisPattern) -> tuple[np.ndarray, np.ndarray]:
    """Balanced oriented training patches from one image.

    Draws centers on and off the annotated structure, estimates each
    center's orientation from the feature map, and pairs the rotated feature
    vector with the template loss of the equally rotated ground truth.
    """
    gt = np.asarray(gt, dtype=bool)
    on_coords = np.column_stack(np.nonzero(gt))
    off_coords = np.column_stack(np.nonzero(~gt))
    picks = []
    for coords, want in ((on_coords, n_on), (off_coords, n_off)):
        if len(coords) and want > 0:
            take = min(want, len(coords))
            picks.append(coords[rng.choice(len(coords), size=take, replace=False)])
    if not picks:
        raise ValueError("no usable training centers")
    centers = np.concatenate(picks)
    value_range = (float(fmap.min()), float(fmap.max()))
    gt_float = gt.astype(np.float64)
    Z = np.empty((len(centers), basis.count))
    losses = np.empty(len(centers))
    for k, (r, c) in enumerate(centers):
        center = (int(r), int(c))
        theta = estimate_orientation(fmap, center, basis, cfg.angles, value_range)
        Z[k] = feature_vector(
            extract_rotated_patch(fmap, center, theta, basis.side), basis)
        losses[k] = patch_loss(
            extract_rotated_patch(gt_float, center, theta, basis.side), basis)
    return Z, losses


@dataclass
class TrainResult:
    bundle: ModelBundle
    rho: float
    hash: str
    n_samples: int


def train_on_images(images: list[np.ndarray], gts: list[np.ndarray],
                    cfg: RunConfig) -> TrainResult:
    """Train the ranking model and calibrate the retained fraction.

    Features are standardized per dimension over the training sample; the
    model stores the transform so inference applies it transparently.  When
    the configuration does not pin rho, it is chosen to maximize mean
    tolerant F1 of the top-rank maps on the training images.
    """
    if len(images) != len(gts) or not images:
        raise ValueError("need matching non-empty image and ground truth lists")
    if cfg.samples < 2:
        raise ValueError("insufficient samples: need at least 2")
    bank = make_bank(cfg)
    basis = make_basis(cfg)
    rng = np.random.default_rng(cfg.seed)
    per_image = max(1, cfg.samples // (2 * len(images)))

    fmaps = []
    blocks = []
    loss_blocks = []
    for image, gt in zip(images, gts):
        fmap = compute_feature(image, cfg, bank)
        fmaps.append(fmap)
        Z, losses = sample_patches(fmap, gt, per_image, per_image, cfg, rng, basis)
        blocks.append(Z)
        loss_blocks.append(losses)
    Z = np.concatenate(blocks)
    losses = np.concatenate(loss_blocks)

    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    std[std < 1e-12] = 1.0
    trained = train((Z - mean) / std, losses, C=cfg.C, epsilon=cfg.epsilon,
                    max_iter=cfg.max_iter, margin_mode=cfg.margin_mode)
    model = RankingModel(w=trained.w, C=cfg.C, mean=mean, std=std,
                         stats=trained.stats)
    bundle = ModelBundle(model=model, side=cfg.patch_side,
                         thickness=cfg.thickness, angles=tuple(cfg.angles))

    if cfg.rho > 0:
        rho = cfg.rho
    else:
        score_maps = [
            scoremap.infer_scores(fm, model, basis, cfg.angles, cfg.effective_stride)
            for fm in fmaps
        ]
        rho = scoremap.calibrate_rho(score_maps, gts, cfg.effective_tolerance)
    return TrainResult(bundle=bundle, rho=rho, hash=config_hash(cfg),
                       n_samples=len(losses))


def write_model_files(path, result: TrainResult) -> None:
    """Model binary plus human-readable training sidecar."""
    from .ranking import write_model
    write_model(path, result.bundle)
    stats = result.bundle.model.stats
    sidecar = {
        "config_hash": result.hash,
        "rho": result.rho,
        "n_samples": result.n_samples,
        "C": result.bundle.model.C,
        "iterations": stats.iterations,
        "slack": stats.slack,
        "objective": stats.objective,
        "lower_bound": stats.lower_bound,
        "converged": stats.converged,
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_model_files(path) -> tuple[ModelBundle, dict]:
    from .ranking import read_model
    bundle = read_model(path)
    sidecar_path = Path(str(path) + ".json")
    sidecar = {}
    if sidecar_path.exists():
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
    return bundle, sidecar


@dataclass
class ProcessResult:
    feature: np.ndarray
    score_map: scoremap.RankScoreMap | None
    selected: np.ndarray
    pi: np.ndarray
    reconstruction: graphrec.Reconstruction


def process_image(image: np.ndarray, bundle: ModelBundle, cfg: RunConfig,
                  rho: float) -> ProcessResult:
    """Feature, scores, synthesis, and path reconstruction for one image.

    A degenerate (constant) feature map means the image provably contains no
    oriented structure; the stages short-circuit to empty outputs.
    """
    basis = make_basis_pattern(bundle.side, bundle.thickness)
    if bundle.model.dim != basis.count:
        raise ValueError("model dimension does not match its template geometry")
    fmap = compute_feature(image, cfg)
    height, width = fmap.shape
    if fmap.max() == fmap.min():
        return ProcessResult(
            feature=fmap, score_map=None,
            selected=np.zeros((height, width), dtype=bool),
            pi=np.zeros((height, width)),
            reconstruction=graphrec.Reconstruction(paths=[], height=height,
                                                   width=width))
    sm = scoremap.infer_scores(fmap, bundle.model, basis, bundle.angles,
                               cfg.effective_stride)
    selected = scoremap.top_rank_binary_map(sm, rho)
    pi = scoremap.synthesize(sm, selected, basis)
    graph = graphrec.build_graph(pi, cfg.graph_threshold, cfg.invert_weights)
    rec = graphrec.reconstruct(graph, cfg.min_length, max_iter=cfg.max_iter)
    return ProcessResult(feature=fmap, score_map=sm, selected=selected,
                         pi=pi, reconstruction=rec)


def write_reconstruction_files(stem: Path, image: np.ndarray,
                               result: ProcessResult, hash_hex: str) -> dict:
    """Reconstruction JSON, overlay, mask, and structured map for one image."""
    rec_json = graphrec.reconstruction_to_dict(result.reconstruction, hash_hex)
    json_path = stem.with_name(stem.name + "_recon.json")
    with open(json_path, "w") as fh:
        json.dump(rec_json, fh, indent=2, sort_keys=True)
        fh.write("\n")
    overlay_path = stem.with_name(stem.name + "_overlay.png")
    imgio.write_rgb_png(overlay_path,
                        graphrec.render_overlay(image, result.reconstruction),
                        config_hash=hash_hex)
    mask_path = stem.with_name(stem.name + "_mask.png")
    imgio.write_mask_png(mask_path, result.reconstruction.mask(),
                         config_hash=hash_hex)
    pi_path = stem.with_name(stem.name + "_pi.cfm")
    imgio.write_cfm(pi_path, result.pi, reserved=hash_word(hash_hex))
    return {"json": json_path, "overlay": overlay_path, "mask": mask_path,
            "pi": pi_path}


def run_pipeline(data_dir, out_dir, cfg: RunConfig) -> dict:
    """Train on the manifest's train split, reconstruct and score the test split."""
    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {data_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    hash_hex = config_hash(cfg)
    timings = {}

    def load_pair(name):
        image = load_image(data_dir / "images" / f"{name}.png", cfg)
        gt = imgio.read_mask(data_dir / "gt" / f"{name}.png")
        return image, gt

    t0 = time.time()
    train_pairs = [load_pair(name) for name in manifest["train"]]
    result = train_on_images([p[0] for p in train_pairs],
                             [p[1] for p in train_pairs], cfg)
    write_model_files(out_dir / "model.crsv", result)
    timings["train"] = time.time() - t0

    names = list(manifest["test"])
    reports = []
    rhos = []
    t0 = time.time()
    for name in names:
        image, gt = load_pair(name)
        processed = process_image(image, result.bundle, cfg, result.rho)
        write_reconstruction_files(out_dir / name, image, processed, hash_hex)
        mask = processed.reconstruction.mask()
        reports.append(evaluation.tolerant_f1(mask, gt, cfg.effective_tolerance))
        rhos.append(evaluation.pixel_proportion(mask))
    timings["test"] = time.time() - t0

    rows = evaluation.metrics_rows(names, reports, rhos)
    with open(out_dir / "metrics.csv", "w") as fh:
        fh.write(evaluation.metrics_csv(rows))
    summary = {
        "config_hash": hash_hex,
        "rho": result.rho,
        "mean_f1": rows[-1]["f1"] if rows else 0.0,
        "mean_rho_percent": rows[-1]["rho_percent"] if rows else 0.0,
        "n_train": len(train_pairs),
        "n_test": len(names),
        "timings": {k: round(v, 3) for k, v in timings.items()},
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
