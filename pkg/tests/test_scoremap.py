"""Grid score inference, top-rank selection, and score-map synthesis."""

import logging
import math

import numpy as np
import pytest

from curvilinear import config, patch, pipeline, ranking, scoremap, synth
from oracles import bilinear_sample

ANGLES = (0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5)


def make_map(scores, grid_rows, grid_cols, height, width, thetas=None, stride=1):
    scores = np.asarray(scores, dtype=np.float64)
    if thetas is None:
        thetas = np.zeros_like(scores)
    return scoremap.RankScoreMap(
        height=height, width=width,
        grid_rows=np.asarray(grid_rows, dtype=np.intp),
        grid_cols=np.asarray(grid_cols, dtype=np.intp),
        scores=scores, thetas=np.asarray(thetas, dtype=np.float64),
        stride=stride)


def select_at(sm, points):
    mask = np.zeros((sm.height, sm.width), dtype=bool)
    for r, c in points:
        mask[r, c] = True
    return mask


def footprint(basis, theta_deg, center):
    """Test-side rotated template footprint: pixel list with template values."""
    half = basis.side // 2
    reach = int(math.ceil(half * math.sqrt(2.0))) + 1
    theta = math.radians(theta_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    mask_f = basis.mask.astype(np.float64)
    out = []
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            du = dy * sin_t + dx * cos_t
            dv = dy * cos_t - dx * sin_t
            if abs(du) <= half and abs(dv) <= half:
                value = bilinear_sample(mask_f, dv + half, du + half)
                out.append((center[0] + dy, center[1] + dx, value))
    return out


class TestInferScores:
    def test_zero_model_gives_zero_scores(self):
        rng = np.random.default_rng(0)
        feature = rng.uniform(size=(30, 30))
        basis = patch.make_basis_pattern(9, 3)
        model = ranking.RankingModel(w=np.zeros(basis.count))
        sm = scoremap.infer_scores(feature, model, basis, ANGLES, stride=4)
        assert np.array_equal(sm.scores, np.zeros_like(sm.scores))
        assert sm.n_points == len(sm.grid_rows) * len(sm.grid_cols)

    def test_stride_equal_to_image_size(self):
        rng = np.random.default_rng(1)
        feature = rng.uniform(size=(40, 40))
        basis = patch.make_basis_pattern(9, 3)
        model = ranking.RankingModel(w=rng.normal(size=basis.count))
        sm = scoremap.infer_scores(feature, model, basis, ANGLES, stride=40)
        assert sm.n_points == 1
        assert sm.grid_rows.tolist() == [20] and sm.grid_cols.tolist() == [20]

    def test_matches_per_point_path(self):
        rng = np.random.default_rng(2)
        feature = rng.uniform(size=(48, 48))
        basis = patch.make_basis_pattern(9, 3)
        model = ranking.RankingModel(w=rng.normal(size=basis.count),
                                     mean=rng.normal(size=basis.count),
                                     std=rng.uniform(0.5, 2.0, size=basis.count))
        sm = scoremap.infer_scores(feature, model, basis, ANGLES, stride=5)
        value_range = (float(feature.min()), float(feature.max()))
        for gi, r in enumerate(sm.grid_rows):
            for gj, c in enumerate(sm.grid_cols):
                center = (int(r), int(c))
                theta = patch.estimate_orientation(feature, center, basis,
                                                   ANGLES, value_range)
                z = patch.feature_vector(
                    patch.extract_rotated_patch(feature, center, theta,
                                                basis.side), basis)
                assert sm.thetas[gi, gj] == theta
                assert abs(sm.scores[gi, gj]
                           - ranking.score(model, z)) <= 1e-10

    def test_dimension_mismatch_raises(self):
        basis = patch.make_basis_pattern(9, 3)
        model = ranking.RankingModel(w=np.zeros(basis.count + 1))
        with pytest.raises(ValueError):
            scoremap.infer_scores(np.zeros((20, 20)), model, basis, ANGLES, 4)

    def test_to_rasters_places_grid_values(self):
        sm = make_map([[1.5, -2.0]], [7], [3, 9], 12, 12,
                      thetas=[[22.5, 90.0]])
        score_r, theta_r = sm.to_rasters()
        assert score_r[7, 3] == 1.5 and score_r[7, 9] == -2.0
        assert theta_r[7, 9] == 90.0
        score_r[7, 3] = score_r[7, 9] = 0.0
        assert not score_r.any()

    def test_trained_bar_scores_concentrate_on_bar(self):
        image = synth.render_bar(64, 0.0, thickness=5.0)
        center_row = (64 - 1) / 2.0
        gt = np.abs(np.arange(64)[:, None] - center_row) <= 2.5
        gt = np.broadcast_to(gt, (64, 64)).copy()
        cfg = config.RunConfig(samples=120, rho=0.02, seed=3)
        result = pipeline.train_on_images([image], [gt], cfg)
        basis = patch.make_basis_pattern(33, 5)
        feature = pipeline.compute_feature(image, cfg)
        sm = scoremap.infer_scores(feature, result.bundle.model, basis,
                                   cfg.angles, cfg.effective_stride)
        flat = sm.scores.ravel()
        top = np.argsort(-flat)[:max(1, flat.size // 10)]
        rows = sm.grid_rows[top // len(sm.grid_cols)]
        near = np.abs(rows - center_row) <= 5.0 + 2.5
        assert near.mean() >= 0.8


class TestTopRank:
    def test_rho_one_full_grid(self):
        rng = np.random.default_rng(3)
        sm = make_map(rng.normal(size=(6, 6)), np.arange(6), np.arange(6), 6, 6)
        assert scoremap.top_rank_binary_map(sm, 1.0).all()

    def test_exactly_three_largest(self):
        rng = np.random.default_rng(4)
        scores = rng.permutation(25).reshape(5, 5).astype(float)
        rows = np.arange(2, 20, 4)
        sm = make_map(scores, rows, rows, 20, 20, stride=4)
        got = scoremap.top_rank_binary_map(sm, 3.0 / 400.0)
        assert got.sum() == 3
        flat = scores.ravel()
        expect_idx = np.argsort(-flat)[:3]
        for k in expect_idx:
            assert got[rows[k // 5], rows[k % 5]]

    def test_tie_break_row_major_matches_stable_sort(self):
        scores = np.array([[5.0, 3.0, 3.0], [3.0, 1.0, 0.0]])
        sm = make_map(scores, [0, 1], [0, 1, 2], 2, 3)
        got = scoremap.top_rank_binary_map(sm, 0.5)
        assert np.array_equal(got, [[True, True, True], [False, False, False]])
        order = np.argsort(-scores.ravel(), kind="stable")[:3]
        oracle = np.zeros(6, dtype=bool)
        oracle[order] = True
        assert np.array_equal(got.ravel(), oracle)

    def test_budget_capped_at_grid_size(self):
        rng = np.random.default_rng(5)
        rows = np.arange(2, 20, 5)
        sm = make_map(rng.normal(size=(4, 4)), rows, rows, 20, 20, stride=5)
        got = scoremap.top_rank_binary_map(sm, 0.9)
        assert got.sum() == 16
        assert got[np.ix_(rows, rows)].all()

    def test_rho_out_of_range(self):
        sm = make_map([[1.0]], [0], [0], 1, 1)
        for rho in (0.0, -0.1, 1.2):
            with pytest.raises(ValueError):
                scoremap.top_rank_binary_map(sm, rho)


class TestSynthesize:
    def test_single_patch_unit_score(self):
        basis = patch.make_basis_pattern(9, 3)
        sm = make_map([[1.0]], [20], [20], 41, 41, stride=41)
        pi = scoremap.synthesize(sm, select_at(sm, [(20, 20)]), basis)
        expected = np.zeros((41, 41))
        expected[19:22, 16:25] = 1.0
        assert np.array_equal(pi, expected)

    def test_single_patch_score_two(self):
        basis = patch.make_basis_pattern(9, 3)
        sm = make_map([[2.0]], [20], [20], 41, 41, stride=41)
        pi = scoremap.synthesize(sm, select_at(sm, [(20, 20)]), basis)
        for r, c, b in footprint(basis, 0.0, (20, 20)):
            ls = np.linalg.lstsq(np.array([[2.0]]), np.array([b]), rcond=None)[0][0]
            assert abs(pi[r, c] - ls) <= 1e-12
        assert pi[20, 20] == 0.5

    def test_two_patch_overlap_least_squares_oracle(self):
        basis = patch.make_basis_pattern(9, 3)
        sm = make_map([[1.0, 0.5]], [20], [20, 26], 41, 60, stride=6)
        pi = scoremap.synthesize(sm, select_at(sm, [(20, 20), (20, 26)]), basis)
        assert pi[20, 23] == 1.5

        contrib = {}
        for (r0, c0), s in (((20, 20), 1.0), ((20, 26), 0.5)):
            for r, c, b in footprint(basis, 0.0, (r0, c0)):
                per_patch = np.linalg.lstsq(np.array([[s]]), np.array([b]),
                                            rcond=None)[0][0]
                contrib.setdefault((r, c), []).append(per_patch)
        expected = np.zeros((41, 60))
        for (r, c), values in contrib.items():
            expected[r, c] = np.mean(values)
        assert np.allclose(pi, expected, atol=1e-6)

    def test_no_positive_scores_warns_and_returns_zero(self, caplog):
        basis = patch.make_basis_pattern(9, 3)
        sm = make_map([[-1.0, -0.5]], [20], [20, 26], 41, 60)
        with caplog.at_level(logging.WARNING):
            pi = scoremap.synthesize(sm, select_at(sm, [(20, 20), (20, 26)]),
                                     basis)
        assert not pi.any()
        assert "positive score" in caplog.text

    def test_nonnegative_and_zero_off_footprint(self):
        rng = np.random.default_rng(6)
        basis = patch.make_basis_pattern(9, 3)
        rows = np.arange(4, 40, 8)
        sm = make_map(rng.uniform(0.5, 2.0, size=(5, 5)), rows, rows, 40, 40,
                      thetas=rng.choice(ANGLES, size=(5, 5)), stride=8)
        pts = [(rows[i], rows[j]) for i in range(5) for j in range(5)
               if rng.uniform() < 0.4] or [(rows[0], rows[0])]
        pi = scoremap.synthesize(sm, select_at(sm, pts), basis)
        assert (pi >= 0.0).all()
        covered = np.zeros((40, 40), dtype=bool)
        for r0, c0 in pts:
            gi = rows.tolist().index(r0)
            gj = rows.tolist().index(c0)
            for r, c, _ in footprint(basis, sm.thetas[gi, gj], (r0, c0)):
                if 0 <= r < 40 and 0 <= c < 40:
                    covered[r, c] = True
        assert not pi[~covered].any()

    def test_rho_monotonicity(self):
        rng = np.random.default_rng(7)
        basis = patch.make_basis_pattern(9, 3)
        rows = np.arange(4, 60, 8)
        sm = make_map(rng.uniform(0.1, 2.0, size=(7, 7)), rows, rows, 60, 60,
                      stride=8)
        small = scoremap.top_rank_binary_map(sm, 0.002)
        large = scoremap.top_rank_binary_map(sm, 0.01)
        assert large[small].all()
        pi_small = scoremap.synthesize(sm, small, basis)
        pi_large = scoremap.synthesize(sm, large, basis)
        assert (pi_large[pi_small > 0] > 0).all()

    def test_unit_scores_reproduce_stencil_union(self):
        basis = patch.make_basis_pattern(9, 3)
        sm = make_map([[1.0, 1.0]], [20], [20, 26], 41, 60, stride=6)
        pi = scoremap.synthesize(sm, select_at(sm, [(20, 20), (20, 26)]), basis)
        expected = np.zeros((41, 60))
        for c0 in (20, 26):
            expected[19:22, c0 - 4:c0 + 5] = 1.0
        assert np.array_equal(pi, expected)

    def test_isolated_rotated_patch_residual(self):
        basis = patch.make_basis_pattern(9, 3)
        s = 1.7
        sm = make_map([[s]], [30], [30], 61, 61, thetas=[[22.5]], stride=61)
        pi = scoremap.synthesize(sm, select_at(sm, [(30, 30)]), basis)
        worst = 0.0
        for r, c, b in footprint(basis, 22.5, (30, 30)):
            worst = max(worst, abs(b - s * pi[r, c]))
        assert worst <= 1e-12


class TestCalibrateRho:
    def test_recovers_constructed_fraction(self):
        rng = np.random.default_rng(8)
        scores = rng.permutation(400).reshape(20, 20).astype(float)
        sm = make_map(scores, np.arange(20), np.arange(20), 20, 20)
        gt = scoremap.top_rank_binary_map(sm, 0.02)
        assert gt.sum() == 8
        rho = scoremap.calibrate_rho([sm], [gt], tolerance=0.0)
        assert rho == 0.02

    def test_all_zero_gt_returns_smallest(self):
        rng = np.random.default_rng(9)
        sm = make_map(rng.normal(size=(10, 10)), np.arange(10), np.arange(10),
                      10, 10)
        rho = scoremap.calibrate_rho([sm], [np.zeros((10, 10), dtype=bool)],
                                     tolerance=1.0)
        assert rho == scoremap.RHO_GRID[0] == 0.001

    def test_two_image_sweep_matches_exhaustive_oracle(self):
        from curvilinear import evaluation
        rng = np.random.default_rng(10)
        maps = []
        gts = []
        for frac in (0.01, 0.03):
            scores = rng.permutation(400).reshape(20, 20).astype(float)
            sm = make_map(scores, np.arange(20), np.arange(20), 20, 20)
            maps.append(sm)
            gts.append(scoremap.top_rank_binary_map(sm, frac))
        got = scoremap.calibrate_rho(maps, gts, tolerance=0.0)

        best_rho, best_f1 = None, -1.0
        for rho in scoremap.RHO_GRID:
            mean = np.mean([
                evaluation.tolerant_f1(
                    scoremap.top_rank_binary_map(sm, rho), gt, 0.0).f1
                for sm, gt in zip(maps, gts)])
            if mean > best_f1:
                best_f1, best_rho = mean, rho
        assert got == best_rho

    def test_empty_input_raises(self):
        with pytest.raises(ValueError):
            scoremap.calibrate_rho([], [], tolerance=1.0)

    def test_grid_shape(self):
        grid = scoremap.RHO_GRID
        assert grid[0] == 0.001 and grid[-1] == 0.5
        assert len(grid) == 95
        assert all(b > a for a, b in zip(grid, grid[1:]))
