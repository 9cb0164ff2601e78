"""Synthetic line and tree-network images with ground truth.

Desk-scale stand-ins for annotated datasets: oriented bars for orientation
and filter tests, and random tree-shaped polyline networks rendered with a
soft thickness profile plus Gaussian noise for end-to-end pipeline runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import imgio

BACKGROUND = 0.15
CONTRAST = 0.7


def _profile(dist: np.ndarray, thickness: float) -> np.ndarray:
    """Soft bar cross-section: 1 inside the half-thickness, 1-px linear edge."""
    return np.clip(thickness / 2.0 + 0.5 - dist, 0.0, 1.0)


def render_bar(size: int, theta_deg: float, thickness: float = 5.0,
               center: tuple[float, float] | None = None,
               length: float | None = None) -> np.ndarray:
    """Render a bright bar at the given orientation on a dark background.

    ``theta_deg`` is measured from the column axis toward increasing row
    index, matching the patch-rotation convention.  Values are in [0, 1]
    without noise; the bar spans the whole image unless ``length`` is given.
    """
    if center is None:
        center = ((size - 1) / 2.0, (size - 1) / 2.0)
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = np.deg2rad(theta_deg)
    dr = rows - center[0]
    dc = cols - center[1]
    perp = np.abs(dc * (-np.sin(theta)) + dr * np.cos(theta))
    values = _profile(perp, thickness)
    if length is not None:
        along = np.abs(dc * np.cos(theta) + dr * np.sin(theta))
        values = values * np.clip(length / 2.0 + 0.5 - along, 0.0, 1.0)
    return BACKGROUND + CONTRAST * values


@dataclass
class Network:
    """A tree of polylines plus rendering parameters."""

    size: int
    thickness: float
    polylines: list = field(default_factory=list)

    def centerline_mask(self) -> np.ndarray:
        """Pixels touched by densely sampled polyline points."""
        mask = np.zeros((self.size, self.size), dtype=bool)
        for line in self.polylines:
            pts = np.asarray(line, dtype=np.float64)
            for (r0, c0), (r1, c1) in zip(pts[:-1], pts[1:]):
                seg_len = float(np.hypot(r1 - r0, c1 - c0))
                n = max(2, int(np.ceil(seg_len / 0.3)) + 1)
                t = np.linspace(0.0, 1.0, n)
                rr = np.clip(np.rint(r0 + t * (r1 - r0)), 0, self.size - 1).astype(int)
                cc = np.clip(np.rint(c0 + t * (c1 - c0)), 0, self.size - 1).astype(int)
                mask[rr, cc] = True
        return mask

    def distance_field(self) -> np.ndarray:
        return ndimage.distance_transform_edt(~self.centerline_mask())

    def ground_truth(self) -> np.ndarray:
        return self.distance_field() <= self.thickness / 2.0

    def render(self, noise_sigma: float = 0.0,
               rng: np.random.Generator | None = None) -> np.ndarray:
        image = BACKGROUND + CONTRAST * _profile(self.distance_field(), self.thickness)
        if noise_sigma > 0.0:
            if rng is None:
                rng = np.random.default_rng(0)
            image = image + rng.normal(0.0, noise_sigma, image.shape)
        return np.clip(image, 0.0, 1.0)


def _walk(rng: np.random.Generator, start: np.ndarray, direction: float,
          length: float, size: int, margin: float, step: float = 6.0,
          jitter: float = 0.12) -> np.ndarray:
    """Random-walk polyline of roughly the given arc length, kept in bounds."""
    points = [start.copy()]
    pos = start.copy()
    heading = direction
    travelled = 0.0
    center = np.array([size / 2.0, size / 2.0])
    while travelled < length:
        heading += rng.normal(0.0, jitter)
        nxt = pos + step * np.array([np.sin(heading), np.cos(heading)])
        if not (margin <= nxt[0] <= size - margin and margin <= nxt[1] <= size - margin):
            to_center = center - pos
            heading = float(np.arctan2(to_center[0], to_center[1]))
            heading += rng.normal(0.0, jitter)
            nxt = pos + step * np.array([np.sin(heading), np.cos(heading)])
        points.append(nxt)
        travelled += step
        pos = nxt
    return np.array(points)


def generate_network(size: int = 160, thickness: float = 5.0,
                     rng: np.random.Generator | None = None,
                     n_branches: int | None = None) -> Network:
    """Random tree-like polyline network.

    A trunk crosses the image interior and a few branches leave it at random
    stations with moderate divergence angles; branch length shrinks with
    depth so the result reads as a plausible vessel- or crack-like tree.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    margin = max(8.0, thickness * 2.0)
    trunk_start = np.array([
        rng.uniform(margin, size - margin),
        rng.uniform(margin, margin + size * 0.15),
    ])
    trunk_dir = rng.normal(0.0, 0.35)
    trunk_len = size * rng.uniform(0.75, 0.95)
    trunk = _walk(rng, trunk_start, trunk_dir, trunk_len, size, margin)
    net = Network(size=size, thickness=thickness, polylines=[trunk])
    if n_branches is None:
        n_branches = int(rng.integers(2, 4))
    parents = [(trunk, trunk_dir)]
    for _ in range(n_branches):
        parent, parent_dir = parents[rng.integers(0, len(parents))]
        station = int(rng.integers(len(parent) // 4, max(len(parent) // 4 + 1,
                                                         3 * len(parent) // 4)))
        side = 1.0 if rng.random() < 0.5 else -1.0
        branch_dir = parent_dir + side * rng.uniform(0.5, 1.1)
        branch_len = size * rng.uniform(0.35, 0.55)
        branch = _walk(rng, parent[station].copy(), branch_dir, branch_len,
                       size, margin)
        net.polylines.append(branch)
        parents.append((branch, branch_dir))
    return net


def make_dataset(out_dir, n_train: int = 4, n_test: int = 4, size: int = 160,
                 thickness: float = 5.0, noise_sigma: float = 0.1,
                 seed: int = 0, config_hash: str | None = None) -> dict:
    """Write a labeled synthetic dataset and its manifest.

    Layout: ``images/<name>.png``, ``gt/<name>.png``, ``manifest.json`` with
    the train/test split and generation parameters.  Generation is fully
    determined by the seed.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    names = {"train": [], "test": []}
    for split, count in (("train", n_train), ("test", n_test)):
        for k in range(count):
            name = f"{split}_{k:02d}"
            net = generate_network(size=size, thickness=thickness, rng=rng)
            image = net.render(noise_sigma=noise_sigma, rng=rng)
            gt = net.ground_truth()
            imgio.write_gray_png(out_dir / "images" / f"{name}.png", image,
                                 config_hash=config_hash)
            imgio.write_mask_png(out_dir / "gt" / f"{name}.png", gt,
                                 config_hash=config_hash)
            names[split].append(name)
    manifest = {
        "train": names["train"],
        "test": names["test"],
        "size": size,
        "thickness": thickness,
        "noise_sigma": noise_sigma,
        "seed": seed,
    }
    if config_hash:
        manifest["config_hash"] = config_hash
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
