"""Oriented patches: basis pattern, rotated extraction, orientation, loss.

A local window of the feature map is compared against a fixed binary template
(a horizontal bar of thickness tau) after rotating the window so a candidate
orientation becomes horizontal.  The orientation whose rotated window best
separates on-bar from off-bar value distributions, in the chi-square sense,
is taken as the local structure direction.  The same rotated windows drive
the ranking stage: feature vectors are the window values on the bar template,
and the training loss is one minus the overlap between the rotated ground
truth and the template.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

HISTOGRAM_BINS = 32


@dataclass(frozen=True)
class BasisPattern:
    """Binary bar template: the ``thickness`` center rows of a square patch."""

    side: int
    thickness: int
    mask: np.ndarray

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def make_basis_pattern(side: int, thickness: int) -> BasisPattern:
    """Build the horizontal-bar template.

    ``side`` and ``thickness`` must be odd with ``thickness < side``; the mask
    sets rows ``side//2 - thickness//2`` through ``side//2 + thickness//2``.
    """
    if side % 2 == 0 or thickness % 2 == 0:
        raise ValueError("side and thickness must be odd")
    if not 0 < thickness < side:
        raise ValueError("thickness must be positive and smaller than side")
    mask = np.zeros((side, side), dtype=bool)
    mid = side // 2
    half = thickness // 2
    mask[mid - half:mid + half + 1, :] = True
    return BasisPattern(side=side, thickness=thickness, mask=mask)


def snapped_cos_sin(theta_deg: float) -> tuple[float, float]:
    """Cosine and sine with values within 1e-12 of 0 or +/-1 snapped exact.

    Keeps axis-aligned rotations free of last-ulp drift so 0 and 90 degree
    patches are literal index permutations.
    """
    theta = np.deg2rad(theta_deg)
    cos_t = float(np.cos(theta))
    sin_t = float(np.sin(theta))
    for exact in (-1.0, 0.0, 1.0):
        if abs(cos_t - exact) < 1e-12:
            cos_t = exact
        if abs(sin_t - exact) < 1e-12:
            sin_t = exact
    return cos_t, sin_t


def rotation_offsets(side: int, theta_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Row/column sampling offsets for a patch rotated by ``theta_deg``.

    Offsets are flat arrays of length ``side**2`` (row-major patch order);
    adding them to a center coordinate gives the image positions to sample so
    that a structure oriented at ``theta_deg`` appears horizontal in the
    patch.
    """
    cos_t, sin_t = snapped_cos_sin(theta_deg)
    half = side // 2
    dv, du = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    row_off = du * sin_t + dv * cos_t
    col_off = du * cos_t - dv * sin_t
    return row_off.ravel(), col_off.ravel()


def extract_rotated_patch(raster: np.ndarray, center: tuple[int, int],
                          theta_deg: float, side: int) -> np.ndarray:
    """Resample a rotated square window around ``center`` (row, col).

    Bilinear interpolation with reflected borders.  At ``theta_deg = 0`` and
    integer centers this is an exact window copy.
    """
    if side % 2 == 0:
        raise ValueError("patch side must be odd")
    raster = np.asarray(raster, dtype=np.float64)
    row_off, col_off = rotation_offsets(side, theta_deg)
    rows = center[0] + row_off
    cols = center[1] + col_off
    values = ndimage.map_coordinates(raster, [rows, cols], order=1, mode="reflect")
    return values.reshape(side, side)


def value_bins(values: np.ndarray, lo: float, hi: float,
               nbins: int = HISTOGRAM_BINS) -> np.ndarray:
    """Map values to histogram bin indices over [lo, hi].

    The shared binning rule for every histogram in the package: bin width is
    (hi - lo)/nbins, out-of-range values clip into the end bins, and a
    degenerate range puts everything in bin 0.
    """
    values = np.asarray(values, dtype=np.float64)
    span = hi - lo
    if span <= 0.0:
        return np.zeros(values.shape, dtype=np.intp)
    scaled = np.floor((values - lo) / span * nbins)
    return np.clip(scaled, 0, nbins - 1).astype(np.intp)


def chi_square(p: np.ndarray, q: np.ndarray) -> float:
    """Chi-square distance between two normalized histograms.

    Half the sum of (p-q)^2/(p+q); bins empty in both histograms contribute
    nothing.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    denom = p + q
    diff = p - q
    terms = np.divide(diff * diff, denom, out=np.zeros_like(denom), where=denom > 0)
    return 0.5 * float(terms.sum())


def region_histograms(patch: np.ndarray, mask: np.ndarray, lo: float, hi: float,
                      nbins: int = HISTOGRAM_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Normalized value histograms inside and outside a binary mask."""
    bins = value_bins(patch, lo, hi, nbins)
    on = np.bincount(bins[mask], minlength=nbins).astype(np.float64)
    off = np.bincount(bins[~mask], minlength=nbins).astype(np.float64)
    n_on = on.sum()
    n_off = off.sum()
    if n_on > 0:
        on /= n_on
    if n_off > 0:
        off /= n_off
    return on, off


def orientation_scores(feature: np.ndarray, center: tuple[int, int],
                       basis: BasisPattern, angles,
                       value_range: tuple[float, float] | None = None) -> np.ndarray:
    """Chi-square separation score for each candidate angle.

    ``value_range`` fixes the histogram domain; by default it is the min/max
    of the feature map, so scores for different centers of one image are
    binned identically.
    """
    feature = np.asarray(feature, dtype=np.float64)
    if value_range is None:
        value_range = (float(feature.min()), float(feature.max()))
    lo, hi = value_range
    scores = np.empty(len(angles), dtype=np.float64)
    for k, theta in enumerate(angles):
        patch = extract_rotated_patch(feature, center, theta, basis.side)
        p, q = region_histograms(patch, basis.mask, lo, hi)
        scores[k] = chi_square(p, q)
    return scores


def estimate_orientation(feature: np.ndarray, center: tuple[int, int],
                         basis: BasisPattern, angles,
                         value_range: tuple[float, float] | None = None) -> float:
    """Local structure orientation at ``center``.

    Returns the candidate angle maximizing the chi-square separation between
    on-template and off-template value distributions of the rotated window;
    ties go to the earliest listed angle.
    """
    if len(angles) == 0:
        raise ValueError("need at least one candidate angle")
    scores = orientation_scores(feature, center, basis, angles, value_range)
    return float(angles[int(np.argmax(scores))])


def feature_vector(patch: np.ndarray, basis: BasisPattern) -> np.ndarray:
    """Patch values on the template bar, row-major."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != basis.mask.shape:
        raise ValueError(
            f"patch shape {patch.shape} does not match basis side {basis.side}")
    return patch[basis.mask]


def patch_loss(gt_patch: np.ndarray, basis: BasisPattern,
               binarize_threshold: float = 0.5) -> float:
    """Ranking loss of a rotated ground-truth window against the template.

    One minus intersection-over-union after binarizing the interpolated
    ground-truth values at ``binarize_threshold``.  An empty union (blank
    ground truth against an all-zero template) counts as total loss 1.
    """
    gt_patch = np.asarray(gt_patch, dtype=np.float64)
    if gt_patch.shape != basis.mask.shape:
        raise ValueError(
            f"patch shape {gt_patch.shape} does not match basis side {basis.side}")
    binary = gt_patch >= binarize_threshold
    union = int(np.count_nonzero(binary | basis.mask))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(binary & basis.mask))
    return 1.0 - inter / union
