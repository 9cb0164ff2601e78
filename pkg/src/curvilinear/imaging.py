"""Illumination normalization and steerable ridge feature maps.

The front end of the pipeline turns a grayscale image into a single signed
feature map in which elongated bright structures produce positive responses.
It does so with a small bank of second-derivative-of-Gaussian filters steered
to a fixed set of orientations and evaluated at several scales.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

DEFAULT_ORIENTATIONS = (0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5)
DEFAULT_SCALES = (2.0, 4.0, 8.0)
DEFAULT_KERNEL_SIZE = 21


def normalize_image(image: np.ndarray) -> np.ndarray:
    """Squash an image through a logistic centered on its mean.

    The output lies in (0, 1) and is invariant to affine changes of the
    input's gray levels: the logistic argument is the deviation from the mean
    divided by the full dynamic range.  A constant image maps to 0.5
    everywhere.

    Parameters
    ----------
    image : ndarray
        2-D grayscale array, any numeric range.

    Returns
    -------
    ndarray
        Float64 array, same shape, values in (0, 1).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        raise ValueError("empty image")
    span = float(image.max() - image.min())
    if span == 0.0:
        return np.full(image.shape, 0.5)
    arg = (image - image.mean()) / span
    return 1.0 / (1.0 + np.exp(-arg))


def steerable_kernel(theta_deg: float, variance: float, size: int = DEFAULT_KERNEL_SIZE) -> np.ndarray:
    """Second directional derivative of a Gaussian, steered to an angle.

    The direction of differentiation makes the angle ``theta_deg`` with the
    x axis (columns), measured toward increasing row index.  ``variance`` is
    the squared Gaussian width.  Coefficients are shifted to zero mean so the
    filter ignores constant offsets.
    """
    if size % 2 == 0:
        raise ValueError("kernel size must be odd")
    if variance <= 0.0:
        raise ValueError("variance must be positive")
    half = size // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    theta = np.deg2rad(theta_deg)
    u = x * np.cos(theta) + y * np.sin(theta)
    gauss = np.exp(-(x * x + y * y) / (2.0 * variance))
    gauss /= gauss.sum()
    kernel = gauss * (u * u - variance) / (variance * variance)
    return kernel - kernel.mean()


def ridge_kernel(theta_deg: float, variance: float, size: int = DEFAULT_KERNEL_SIZE) -> np.ndarray:
    """Filter responding positively to a bright ridge oriented at ``theta_deg``.

    A ridge running along ``theta_deg`` is a negative second derivative in the
    perpendicular direction, so this is the negated steerable kernel at
    ``theta_deg + 90``.
    """
    return -steerable_kernel(theta_deg + 90.0, variance, size)


@dataclass(frozen=True)
class FilterBank:
    """Ridge filters over a grid of orientations and scales."""

    orientations: tuple[float, ...] = DEFAULT_ORIENTATIONS
    variances: tuple[float, ...] = DEFAULT_SCALES
    size: int = DEFAULT_KERNEL_SIZE
    kernels: tuple[tuple[np.ndarray, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        banks = tuple(
            tuple(ridge_kernel(th, var, self.size) for var in self.variances)
            for th in self.orientations
        )
        object.__setattr__(self, "kernels", banks)

    def respond(self, normalized: np.ndarray, theta_index: int) -> np.ndarray:
        """Scale-maximal ridge response at one orientation."""
        stack = [
            ndimage.convolve(normalized, k, mode="reflect")
            for k in self.kernels[theta_index]
        ]
        return np.max(stack, axis=0)


def feature_map(image: np.ndarray, bank: FilterBank | None = None,
                normalized: bool = False) -> np.ndarray:
    """Orientation-averaged, scale-maximal ridge response.

    Each orientation contributes its strongest response across scales; the
    map is the mean of those contributions over all orientations.  Values are
    signed: bright elongated structure is positive, flat background is near
    zero.

    Parameters
    ----------
    image : ndarray
        Grayscale image, or an already-normalized image if ``normalized``.
    bank : FilterBank, optional
        Filter bank to apply; defaults to the standard 8-orientation,
        3-scale bank.
    normalized : bool
        Skip illumination normalization when the caller has done it already.
    """
    if bank is None:
        bank = FilterBank()
    base = np.asarray(image, dtype=np.float64) if normalized else normalize_image(image)
    acc = np.zeros_like(base)
    for ti in range(len(bank.orientations)):
        acc += bank.respond(base, ti)
    return acc / len(bank.orientations)
