"""Grid scoring, top-rank selection, and structured score-map synthesis.

Every stride-spaced grid point gets a local orientation and a ranking score.
The best-scoring fraction rho of the image is kept, and each kept point
back-projects the bar template divided by its score; overlapping projections
are averaged.  The result is the structured score map that drives graph
reconstruction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import evaluation
from .patch import (BasisPattern, rotation_offsets, snapped_cos_sin,
                    value_bins, HISTOGRAM_BINS)
from .ranking import RankingModel, score_many

log = logging.getLogger(__name__)

SCORE_FLOOR_FRACTION = 1e-3

RHO_GRID = tuple(round(0.001 * k, 3) for k in range(1, 51)) + \
    tuple(round(0.01 * k, 2) for k in range(6, 51))


@dataclass
class RankScoreMap:
    """Scores and orientations on the subsampled inference grid."""

    height: int
    width: int
    grid_rows: np.ndarray
    grid_cols: np.ndarray
    scores: np.ndarray
    thetas: np.ndarray
    stride: int

    @property
    def n_points(self) -> int:
        return self.scores.size

    def to_rasters(self) -> tuple[np.ndarray, np.ndarray]:
        """Full-resolution score and orientation rasters, zero off-grid."""
        score_r = np.zeros((self.height, self.width))
        theta_r = np.zeros((self.height, self.width))
        ys, xs = np.meshgrid(self.grid_rows, self.grid_cols, indexing="ij")
        score_r[ys, xs] = self.scores
        theta_r[ys, xs] = self.thetas
        return score_r, theta_r


def grid_axes(height: int, width: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Stride-spaced grid coordinates, centered within each stride cell."""
    if stride < 1:
        raise ValueError("stride must be at least 1")
    return (np.arange(stride // 2, height, stride),
            np.arange(stride // 2, width, stride))


def infer_scores(feature: np.ndarray, model: RankingModel, basis: BasisPattern,
                 angles, stride: int, chunk: int = 2048) -> RankScoreMap:
    """Orientation estimate and ranking score at every grid point.

    Equivalent to calling estimate_orientation, extract_rotated_patch,
    feature_vector, and score per point, but batched per candidate angle.
    """
    feature = np.asarray(feature, dtype=np.float64)
    if model.dim != basis.count:
        raise ValueError(
            f"model dimension {model.dim} does not match template count {basis.count}")
    height, width = feature.shape
    grid_rows, grid_cols = grid_axes(height, width, stride)
    gy, gx = np.meshgrid(grid_rows, grid_cols, indexing="ij")
    centers_r = gy.ravel().astype(np.float64)
    centers_c = gx.ravel().astype(np.float64)
    n_points = centers_r.size

    lo = float(feature.min())
    hi = float(feature.max())
    mask_flat = basis.mask.ravel()
    n_on = int(mask_flat.sum())
    n_off = mask_flat.size - n_on

    best_chi = np.full(n_points, -1.0)
    best_angle = np.zeros(n_points)
    best_z = np.zeros((n_points, n_on))

    for theta in angles:
        row_off, col_off = rotation_offsets(basis.side, theta)
        for start in range(0, n_points, chunk):
            sel = slice(start, min(start + chunk, n_points))
            rows = centers_r[sel][:, None] + row_off[None, :]
            cols = centers_c[sel][:, None] + col_off[None, :]
            values = ndimage.map_coordinates(
                feature, [rows.ravel(), cols.ravel()], order=1, mode="reflect"
            ).reshape(rows.shape)
            bins = value_bins(values, lo, hi)
            m = bins.shape[0]
            offsets = np.arange(m)[:, None] * HISTOGRAM_BINS
            p = np.bincount((bins[:, mask_flat] + offsets).ravel(),
                            minlength=m * HISTOGRAM_BINS)
            q = np.bincount((bins[:, ~mask_flat] + offsets).ravel(),
                            minlength=m * HISTOGRAM_BINS)
            p = p.reshape(m, HISTOGRAM_BINS).astype(np.float64) / n_on
            q = q.reshape(m, HISTOGRAM_BINS).astype(np.float64) / max(n_off, 1)
            denom = p + q
            diff = p - q
            terms = np.divide(diff * diff, denom,
                              out=np.zeros_like(denom), where=denom > 0)
            chi = 0.5 * terms.sum(axis=1)
            better = chi > best_chi[sel]
            if better.any():
                idx = np.flatnonzero(better) + start
                best_chi[idx] = chi[better]
                best_angle[idx] = theta
                best_z[idx] = values[better][:, mask_flat]

    scores = score_many(model, best_z)
    shape = (len(grid_rows), len(grid_cols))
    return RankScoreMap(height=height, width=width, grid_rows=grid_rows,
                        grid_cols=grid_cols, scores=scores.reshape(shape),
                        thetas=best_angle.reshape(shape), stride=stride)


def top_rank_binary_map(score_map: RankScoreMap, rho: float) -> np.ndarray:
    """Mark the grid points ranked within the top rho fraction of the image.

    The budget is ``floor(rho * width * height)`` pixels, counted against the
    full image even though only grid points can be marked; score ties at the
    cutoff resolve in row-major grid order.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must be in (0, 1]")
    budget = int(np.floor(rho * score_map.height * score_map.width))
    budget = min(budget, score_map.n_points)
    mask = np.zeros((score_map.height, score_map.width), dtype=bool)
    if budget == 0:
        return mask
    flat_scores = score_map.scores.ravel()
    order = np.lexsort((np.arange(flat_scores.size), -flat_scores))
    keep = order[:budget]
    ys = score_map.grid_rows[keep // len(score_map.grid_cols)]
    xs = score_map.grid_cols[keep % len(score_map.grid_cols)]
    mask[ys, xs] = True
    return mask


def _stencil(basis: BasisPattern, theta: float):
    """Pixel offsets and template values of a rotated template footprint."""
    half = basis.side // 2
    reach = int(np.ceil(half * np.sqrt(2.0))) + 1
    dy, dx = np.mgrid[-reach:reach + 1, -reach:reach + 1].astype(np.float64)
    cos_t, sin_t = snapped_cos_sin(theta)
    du = dy * sin_t + dx * cos_t
    dv = dy * cos_t - dx * sin_t
    inside = (np.abs(du) <= half) & (np.abs(dv) <= half)
    values = ndimage.map_coordinates(
        basis.mask.astype(np.float64),
        [dv[inside] + half, du[inside] + half], order=1, mode="constant")
    return dy[inside].astype(np.intp), dx[inside].astype(np.intp), values


def synthesize(score_map: RankScoreMap, selected: np.ndarray,
               basis: BasisPattern) -> np.ndarray:
    """Structured score map from the selected grid points.

    Each selected point contributes the rotated bar template divided by its
    score; every pixel covered by at least one template footprint takes the
    mean of its contributions, and untouched pixels stay zero.  Points with
    non-positive or negligible scores (below a small fraction of the largest
    selected score) are skipped.
    """
    sel = selected[np.ix_(score_map.grid_rows, score_map.grid_cols)]
    scores = score_map.scores[sel]
    pi = np.zeros((score_map.height, score_map.width))
    if scores.size == 0 or float(scores.max()) <= 0.0:
        log.warning("synthesize: no selected patch has a positive score; "
                    "returning an empty map")
        return pi
    floor = SCORE_FLOOR_FRACTION * float(scores.max())
    keep = scores > floor
    gy, gx = np.meshgrid(score_map.grid_rows, score_map.grid_cols, indexing="ij")
    pts_r = gy[sel][keep]
    pts_c = gx[sel][keep]
    pts_s = scores[keep]
    pts_t = score_map.thetas[sel][keep]

    sums = np.zeros_like(pi)
    counts = np.zeros_like(pi)
    for theta in np.unique(pts_t):
        offs_y, offs_x, bvals = _stencil(basis, float(theta))
        group = pts_t == theta
        ys = (pts_r[group][:, None] + offs_y[None, :]).ravel()
        xs = (pts_c[group][:, None] + offs_x[None, :]).ravel()
        contrib = (bvals[None, :] / pts_s[group][:, None]).ravel()
        ok = (ys >= 0) & (ys < score_map.height) & (xs >= 0) & (xs < score_map.width)
        np.add.at(sums, (ys[ok], xs[ok]), contrib[ok])
        np.add.at(counts, (ys[ok], xs[ok]), 1.0)
    np.divide(sums, counts, out=pi, where=counts > 0)
    return pi


def calibrate_rho(score_maps, ground_truths, tolerance: float,
                  grid=RHO_GRID) -> float:
    """Pick the retained fraction maximizing mean tolerant F1 on train data.

    Sweeps a fixed grid of fractions; ties keep the smallest value.
    """
    if not score_maps or len(score_maps) != len(ground_truths):
        raise ValueError("need matching non-empty score map and ground truth lists")
    best_rho = None
    best_f1 = -1.0
    for rho in grid:
        total = 0.0
        for sm, gt in zip(score_maps, ground_truths):
            pred = top_rank_binary_map(sm, rho)
            total += evaluation.tolerant_f1(pred, gt, tolerance).f1
        mean_f1 = total / len(score_maps)
        if mean_f1 > best_f1:
            best_f1 = mean_f1
            best_rho = rho
    return float(best_rho)
