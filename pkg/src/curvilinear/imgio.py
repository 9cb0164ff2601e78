"""Raster file I/O: grayscale images, binary masks, and float rasters.

Grayscale inputs (8/16-bit PNG or PGM, plus color images reduced by luma or a
single channel) are loaded as float64 arrays scaled to [0, 1].  Float rasters
use a small binary format: a 16-byte header (magic ``CFM1``, u32 width, u32
height, u32 reserved) followed by row-major float32 samples, little-endian.
The reserved word carries a config hash so downstream stages can detect
mismatched artifacts.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image, PngImagePlugin

CFM_MAGIC = b"CFM1"

_LUMA = (0.299, 0.587, 0.114)


def read_gray(path, channel: str = "luma") -> np.ndarray:
    """Load an image file as a float64 grayscale array in [0, 1].

    ``channel`` selects the reduction for color inputs: ``luma`` (ITU
    weights), or one of ``red``/``green``/``blue``.
    """
    with Image.open(path) as im:
        im.load()
        mode = im.mode
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
        elif mode in ("RGB", "RGBA", "P", "LA"):
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            if channel == "luma":
                arr = rgb[:, :, 0] * _LUMA[0] + rgb[:, :, 1] * _LUMA[1] + rgb[:, :, 2] * _LUMA[2]
            elif channel in ("red", "green", "blue"):
                arr = rgb[:, :, ("red", "green", "blue").index(channel)]
            else:
                raise ValueError(f"unknown channel selector: {channel!r}")
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"not a non-empty grayscale raster: {path}")
    return arr


def read_mask(path) -> np.ndarray:
    """Load a binary mask; any nonzero pixel counts as structure."""
    with Image.open(path) as im:
        im.load()
        arr = np.asarray(im.convert("I"))
    return arr != 0


def _pnginfo(config_hash: str | None) -> PngImagePlugin.PngInfo | None:
    if not config_hash:
        return None
    info = PngImagePlugin.PngInfo()
    info.add_text("config_hash", config_hash)
    return info


def write_mask_png(path, mask: np.ndarray, config_hash: str | None = None) -> None:
    """Write a binary mask as an 8-bit PNG (structure = 255)."""
    img = Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")
    img.save(path, pnginfo=_pnginfo(config_hash))


def write_gray_png(path, data: np.ndarray, config_hash: str | None = None) -> None:
    """Write a float raster as a min-max normalized 8-bit PNG for inspection."""
    lo = float(data.min())
    hi = float(data.max())
    if hi > lo:
        scaled = (data - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(data, dtype=np.float64)
    img = Image.fromarray(np.round(scaled * 255.0).astype(np.uint8), mode="L")
    img.save(path, pnginfo=_pnginfo(config_hash))


def write_rgb_png(path, rgb: np.ndarray, config_hash: str | None = None) -> None:
    Image.fromarray(rgb.astype(np.uint8), mode="RGB").save(path, pnginfo=_pnginfo(config_hash))


def png_config_hash(path) -> str | None:
    """Return the config hash embedded in a PNG written by this package, if any."""
    with Image.open(path) as im:
        im.load()
        text = getattr(im, "text", {})
    return text.get("config_hash")


def write_cfm(path, data: np.ndarray, reserved: int = 0) -> None:
    """Write a 2-D float raster in the CFM1 format."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("CFM rasters are 2-D")
    height, width = data.shape
    header = CFM_MAGIC + struct.pack("<III", width, height, reserved & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_cfm(path) -> tuple[np.ndarray, int]:
    """Read a CFM1 raster; returns (float64 array, reserved word)."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != CFM_MAGIC:
            raise ValueError(f"not a CFM1 raster: {path}")
        width, height, reserved = struct.unpack("<III", header[4:])
        payload = fh.read(4 * width * height)
    if len(payload) != 4 * width * height:
        raise ValueError(f"truncated CFM1 raster: {path}")
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width).astype(np.float64)
    return data, reserved
