"""Shared fixtures: a tiny separable bar dataset and a model trained on it."""

import json

import numpy as np
import pytest

from curvilinear import cli, imgio, synth

try:
    from hypothesis import HealthCheck, settings

    settings.register_profile(
        "suite", max_examples=40, deadline=None,
        suppress_health_check=[HealthCheck.too_slow])
    settings.load_profile("suite")
except ImportError:
    pass

# Flags shared by every CLI invocation against the bar dataset, so that all
# artifacts carry one config hash.  Thickness-1 bars on exact pixel rows make
# the ranking problem exactly separable; stride 3 keeps inference small, and
# the bar rows below all sit on the stride-3 grid (rows 1, 4, 7, ...).
BAR_FLAGS = ("--thickness", "1", "--stride", "3", "--samples", "100",
             "--slack-penalty", "100", "--seed", "1", "--rho", "0.02",
             "--min-length", "40")

BAR_ROWS = {"train_00": 31, "train_01": 49, "train_02": 64, "test_00": 49}
BAR_SIZE = 96


@pytest.fixture(scope="session")
def bar_data(tmp_path_factory):
    """On-disk dataset of single-row bars plus one blank image."""
    root = tmp_path_factory.mktemp("bardata")
    (root / "images").mkdir()
    (root / "gt").mkdir()
    for name, row in BAR_ROWS.items():
        img = np.full((BAR_SIZE, BAR_SIZE), synth.BACKGROUND)
        img[row, :] = synth.BACKGROUND + synth.CONTRAST
        gt = np.zeros((BAR_SIZE, BAR_SIZE), dtype=bool)
        gt[row, :] = True
        imgio.write_gray_png(root / "images" / f"{name}.png", img)
        imgio.write_mask_png(root / "gt" / f"{name}.png", gt)
    imgio.write_gray_png(root / "blank.png",
                         np.full((BAR_SIZE, BAR_SIZE), synth.BACKGROUND))
    manifest = {"train": ["train_00", "train_01", "train_02"],
                "test": ["test_00"]}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return root


@pytest.fixture(scope="session")
def bar_model(bar_data, tmp_path_factory):
    """Model trained once on the bar dataset through the CLI."""
    out = tmp_path_factory.mktemp("barmodel") / "model.crsv"
    rc = cli.main(["train", "--images-dir", str(bar_data / "images"),
                   "--gt-dir", str(bar_data / "gt"), "--out", str(out),
                   *BAR_FLAGS])
    assert rc == 0
    assert out.exists() and out.parent.joinpath(out.name + ".json").exists()
    return out
