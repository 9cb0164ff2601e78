"""Run configuration: defaults, dataset presets, file parsing, hashing.

A run is fully described by a flat set of key=value settings.  Presets carry
the per-dataset parameter choices; a config file and command-line overrides
refine them.  The short hash of the resolved configuration is embedded in
every artifact so mismatched intermediate files are detectable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from .imaging import DEFAULT_ORIENTATIONS, DEFAULT_SCALES, DEFAULT_KERNEL_SIZE


@dataclass(frozen=True)
class RunConfig:
    """All tunable parameters of the pipeline."""

    images_dir: str = ""
    gt_dir: str = ""
    angles: tuple = DEFAULT_ORIENTATIONS
    scales: tuple = DEFAULT_SCALES
    kernel_size: int = DEFAULT_KERNEL_SIZE
    patch_side: int = 33
    thickness: int = 5
    C: float = 0.1
    epsilon: float = 1e-3
    max_iter: int = 1000
    margin_mode: str = "unit"
    samples: int = 2000
    rho: float = 0.0          # 0 means: calibrate on training data
    stride: int = 0           # 0 means: use thickness
    min_length: int = 30
    seed: int = 0
    invert: bool = False
    channel: str = "luma"
    tolerance: float = 0.0    # 0 means: use thickness
    graph_threshold: float = 0.0
    invert_weights: bool = False

    @property
    def effective_stride(self) -> int:
        return self.stride if self.stride > 0 else self.thickness

    @property
    def effective_tolerance(self) -> float:
        return self.tolerance if self.tolerance > 0 else float(self.thickness)


PRESETS = {
    "drive": {"thickness": 5, "scales": (2.0, 4.0, 8.0), "min_length": 40,
              "channel": "green", "invert": True, "invert_weights": True},
    "reca": {"thickness": 5, "scales": (4.0, 8.0, 12.0), "min_length": 30,
             "invert_weights": True},
    "aerial": {"thickness": 9, "scales": (4.0, 8.0, 12.0), "min_length": 80,
               "invert_weights": True},
    "cracks": {"thickness": 3, "scales": (2.0, 4.0, 8.0), "min_length": 30,
               "invert": True, "invert_weights": True},
    "synth": {"thickness": 5, "scales": (2.0, 4.0, 8.0), "min_length": 40,
              "invert_weights": True},
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name: str, raw):
    """Coerce a raw string (or passthrough value) to the field's type."""
    if name not in _FIELD_TYPES:
        raise ValueError(f"unknown config key: {name!r}")
    if not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind == "tuple":
        return tuple(float(part) for part in raw.replace(",", " ").split())
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot read {raw!r} as a boolean for {name}")
    return raw


def load_config_file(path) -> dict:
    """Read a flat key=value config file; '#' starts a comment."""
    settings = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = stripped.split("=", 1)
            settings[key.strip()] = value
    return settings


def make_config(preset: str | None = None, config_file=None,
                overrides: dict | None = None) -> RunConfig:
    """Resolve a configuration: defaults, then preset, file, and overrides."""
    cfg = RunConfig()
    layers = []
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; "
                             f"choose from {', '.join(sorted(PRESETS))}")
        layers.append(PRESETS[preset])
    if config_file is not None:
        layers.append(load_config_file(config_file))
    if overrides:
        layers.append(overrides)
    for layer in layers:
        parsed = {k: _parse_value(k, v) for k, v in layer.items()}
        cfg = replace(cfg, **parsed)
    return cfg


def config_text(cfg: RunConfig) -> str:
    """Canonical textual form, one sorted key=value per line."""
    lines = []
    for f in sorted(_FIELD_TYPES):
        value = getattr(cfg, f)
        if isinstance(value, tuple):
            value = ",".join(repr(float(v)) for v in value)
        lines.append(f"{f}={value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """First 8 hex digits of the sha256 of the canonical config text."""
    return hashlib.sha256(config_text(cfg).encode()).hexdigest()[:8]


def hash_word(hash_hex: str) -> int:
    """Config hash as a 32-bit word for binary headers."""
    return int(hash_hex, 16) & 0xFFFFFFFF
