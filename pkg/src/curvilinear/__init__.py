"""Curvilinear structure reconstruction from grayscale images.

The pipeline: steerable second-derivative filters produce a curvilinear
feature map; local orientations come from a chi-square comparison of rotated
patch histograms against a bar template; a one-slack structured SVM ranks
oriented patches; top-ranked patches synthesize a structured score map; and
tree-like paths are extracted progressively as longest geodesics of the
induced pixel graph.
"""

from .imaging import (DEFAULT_KERNEL_SIZE, DEFAULT_ORIENTATIONS, DEFAULT_SCALES,
                      FilterBank, feature_map, normalize_image, ridge_kernel,
                      steerable_kernel)
from .patch import (BasisPattern, chi_square, estimate_orientation,
                    extract_rotated_patch, feature_vector, make_basis_pattern,
                    patch_loss)
from .ranking import (ModelBundle, RankingModel, build_pairs,
                      find_most_violated, read_model, score, train, write_model)
from .scoremap import (RankScoreMap, calibrate_rho, infer_scores, synthesize,
                       top_rank_binary_map)
from .graphrec import (GeodesicPath, PixelGraph, Reconstruction, build_graph,
                       connected_components, dijkstra, reconstruct, two_sweep)
from .evaluation import (MatchReport, cross_validate, fold_split,
                         pixel_proportion, tolerant_f1)
from .config import PRESETS, RunConfig, config_hash, make_config
from .pipeline import process_image, run_pipeline, train_on_images

__version__ = "0.1.0"

__all__ = [
    "BasisPattern", "DEFAULT_KERNEL_SIZE", "DEFAULT_ORIENTATIONS",
    "DEFAULT_SCALES", "FilterBank", "GeodesicPath", "MatchReport",
    "ModelBundle", "PRESETS", "PixelGraph", "RankScoreMap", "RankingModel",
    "Reconstruction", "RunConfig", "build_graph", "build_pairs",
    "calibrate_rho", "chi_square", "config_hash", "connected_components",
    "cross_validate", "dijkstra", "estimate_orientation",
    "extract_rotated_patch", "feature_map", "feature_vector", "fold_split",
    "find_most_violated", "infer_scores", "make_basis_pattern", "make_config",
    "normalize_image", "patch_loss", "pixel_proportion", "process_image",
    "read_model", "reconstruct", "ridge_kernel", "run_pipeline", "score",
    "steerable_kernel", "synthesize", "tolerant_f1", "top_rank_binary_map",
    "train", "train_on_images", "two_sweep", "write_model",
]
