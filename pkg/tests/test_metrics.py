import math

import numpy as np
import pytest

from objsplat.metrics import (
    boundary_band,
    per_object_scores,
    point_scores,
    psnr,
    seg_scores,
    ssim_metric,
)
from objsplat.scene import IdMap


def idmap(arr):
    return IdMap(np.asarray(arr, dtype=np.int32))


class TestSegScores:
    def test_perfect_prediction(self):
        m = idmap(np.random.default_rng(0).integers(0, 3, (32, 32)))
        s = seg_scores(m, m)
        assert s.miou == 1.0 and s.mbiou == 1.0
        assert s.dice == 1.0 and s.accuracy == 1.0

    def test_hand_counted_iou(self):
        # 4x4 image: gt has a 2x2 block of class 1, pred shifts it right by 1
        gt = np.zeros((4, 4), dtype=np.int32)
        gt[1:3, 0:2] = 1
        pred = np.zeros((4, 4), dtype=np.int32)
        pred[1:3, 1:3] = 1
        s = seg_scores(idmap(pred), idmap(gt))
        # class 1: inter 2, union 6; class 0: inter 10, union 14
        assert abs(s.iou[1] - 2 / 6) < 1e-12
        assert abs(s.iou[0] - 10 / 14) < 1e-12
        assert abs(s.miou - (2 / 6 + 10 / 14) / 2) < 1e-12

    def test_dice_identity_with_iou(self):
        rng = np.random.default_rng(1)
        gt = idmap(rng.integers(0, 2, (20, 20)))
        pred = idmap(rng.integers(0, 2, (20, 20)))
        s = seg_scores(pred, gt)
        # single foreground class: micro Dice must equal 2*IoU/(1+IoU)
        assert abs(s.dice - 2 * s.iou[1] / (1 + s.iou[1])) < 1e-9

    def test_accuracy_matches_loop(self):
        rng = np.random.default_rng(2)
        gt = rng.integers(0, 3, (10, 10)).astype(np.int32)
        pred = rng.integers(0, 3, (10, 10)).astype(np.int32)
        s = seg_scores(idmap(pred), idmap(gt))
        manual = sum(
            int(pred[i, j] == gt[i, j]) for i in range(10) for j in range(10)
        )
        assert s.accuracy == manual / 100

    def test_absent_class_not_scored(self):
        gt = np.zeros((8, 8), dtype=np.int32)
        pred = np.zeros((8, 8), dtype=np.int32)
        pred[0, 0] = 5  # only in prediction
        s = seg_scores(idmap(pred), idmap(gt))
        assert set(s.iou) == {0}

    def test_resolution_mismatch(self):
        with pytest.raises(ValueError, match="resolution"):
            seg_scores(idmap(np.zeros((4, 4))), idmap(np.zeros((4, 5))))

    def test_boundary_band_hollow_square(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[2:8, 2:8] = True
        band = boundary_band(mask, 1)
        # one-pixel inner ring of a 6x6 square: 36 - 16 = 20 pixels
        assert band.sum() == 20
        assert not band[4, 4]
        assert band[2, 2]

    def test_boundary_iou_penalizes_edge_shift(self):
        gt = np.zeros((64, 64), dtype=np.int32)
        gt[16:48, 16:48] = 1
        pred = np.zeros((64, 64), dtype=np.int32)
        pred[16:48, 18:50] = 1  # interior overlap stays large
        s = seg_scores(idmap(pred), idmap(gt))
        assert s.biou[1] < s.iou[1]


class TestPsnr:
    def test_identical_is_inf(self):
        x = np.random.default_rng(0).uniform(0, 1, (8, 8, 3))
        assert psnr(x, x) == math.inf

    def test_closed_form_uniform_error(self):
        a = np.zeros((4, 4, 3))
        b = np.full((4, 4, 3), 0.1)
        assert abs(psnr(a, b) - 20.0) < 1e-9  # mse = 0.01

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))

    def test_ssim_metric_identity(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0, 1, (16, 16, 3))
        assert abs(ssim_metric(a, a) - 1.0) < 1e-9


class TestPointScores:
    def test_identical_clouds(self):
        pts = np.random.default_rng(0).uniform(-1, 1, (50, 3))
        s = point_scores(pts, pts, tau=0.02)
        assert s.chamfer == 0.0
        assert s.precision == 1.0 and s.recall == 1.0 and s.f1 == 1.0

    def test_known_shift_chamfer(self):
        gt = np.zeros((1, 3))
        pred = np.array([[0.05, 0.0, 0.0]])
        s = point_scores(pred, gt, tau=0.02)
        assert abs(s.chamfer - 0.05) < 1e-12
        assert s.f1 == 0.0  # shift exceeds tau on both sides

    def test_f1_harmonic_mean(self):
        gt = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        pred = np.array([[0.0, 0, 0], [5.0, 0, 0]])
        s = point_scores(pred, gt, tau=0.1)
        assert s.precision == 0.5 and s.recall == 0.5
        assert abs(s.f1 - 0.5) < 1e-12

    def test_kdtree_matches_exhaustive(self):
        rng = np.random.default_rng(4)
        pred = rng.uniform(-1, 1, (80, 3))
        gt = rng.uniform(-1, 1, (60, 3))
        fast = point_scores(pred, gt, tau=0.3)
        slow = point_scores(pred, gt, tau=0.3, exhaustive=True)
        assert abs(fast.chamfer - slow.chamfer) < 1e-12
        assert fast.precision == slow.precision
        assert fast.recall == slow.recall

    def test_empty_cloud_rejected(self):
        with pytest.raises(ValueError):
            point_scores(np.zeros((0, 3)), np.zeros((5, 3)), tau=0.1)


class TestPerObjectScores:
    def test_aggregates_across_views(self):
        gt1 = np.zeros((8, 8), dtype=np.int32)
        gt1[:4] = 1
        gt2 = np.zeros((8, 8), dtype=np.int32)
        gt2[:, :4] = 1
        rows = per_object_scores(
            [idmap(gt1), idmap(gt2)], [idmap(gt1), idmap(gt2)]
        )
        by_id = {r.object_id: r for r in rows}
        assert by_id[1].iou == 1.0
        assert by_id[1].pixels_gt == 64

    def test_prediction_only_class_listed(self):
        gt = idmap(np.zeros((8, 8)))
        pred = np.zeros((8, 8), dtype=np.int32)
        pred[0, 0] = 7
        rows = per_object_scores([idmap(pred)], [gt])
        by_id = {r.object_id: r for r in rows}
        assert by_id[7].iou == 0.0
        assert by_id[7].pixels_gt == 0
