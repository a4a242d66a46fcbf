"""Evaluation metrics: 2D segmentation scores (IoU, boundary IoU, Dice,
accuracy), image quality (PSNR, SSIM), and 3D point-cloud scores (Chamfer,
precision/recall/F1 at a distance threshold)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .losses import ssim as ssim_index
from .scene import IdMap


@dataclass
class SegScores:
    iou: dict[int, float]
    miou: float
    biou: dict[int, float]
    mbiou: float
    dice: float
    accuracy: float


@dataclass
class Point3DScores:
    chamfer: float
    precision: float
    recall: float
    f1: float
    tau: float


def boundary_band(mask: np.ndarray, width: int) -> np.ndarray:
    """Inner boundary band: the mask minus its erosion by ``width`` pixels."""
    eroded = ndimage.binary_erosion(
        mask, structure=ndimage.generate_binary_structure(2, 1), iterations=width
    )
    return mask & ~eroded


def _band_width(shape: tuple[int, int]) -> int:
    diag = math.hypot(*shape)
    return max(1, round(0.02 * diag))


def seg_scores(pred: IdMap, gt: IdMap) -> SegScores:
    """Class scores over the classes present in the ground truth."""
    if pred.ids.shape != gt.ids.shape:
        raise ValueError(
            f"resolution mismatch {pred.ids.shape} vs {gt.ids.shape}"
        )
    classes = sorted(int(c) for c in np.unique(gt.ids))
    width = _band_width(pred.ids.shape)
    iou, biou = {}, {}
    for c in classes:
        p = pred.ids == c
        g = gt.ids == c
        union = (p | g).sum()
        iou[c] = float((p & g).sum() / union) if union else 1.0
        pb = boundary_band(p, width)
        gb = boundary_band(g, width)
        bunion = (pb | gb).sum()
        biou[c] = float((pb & gb).sum() / bunion) if bunion else 1.0
    # micro-averaged Dice over foreground classes
    tp = fp = fn = 0
    for c in classes:
        if c == 0:
            continue
        p = pred.ids == c
        g = gt.ids == c
        tp += (p & g).sum()
        fp += (p & ~g).sum()
        fn += (~p & g).sum()
    dice = float(2 * tp / (2 * tp + fp + fn)) if (2 * tp + fp + fn) else 1.0
    accuracy = float((pred.ids == gt.ids).mean())
    return SegScores(
        iou=iou,
        miou=float(np.mean(list(iou.values()))),
        biou=biou,
        mbiou=float(np.mean(list(biou.values()))),
        dice=dice,
        accuracy=accuracy,
    )


def psnr(rendered: np.ndarray, gt: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]; identical
    images give math.inf."""
    if rendered.shape != gt.shape:
        raise ValueError(f"shape mismatch {rendered.shape} vs {gt.shape}")
    mse = float(np.mean((rendered - gt) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim_metric(rendered: np.ndarray, gt: np.ndarray) -> float:
    """Structural similarity; shares its implementation with the SSIM loss,
    so ssim_metric == 1 - ssim_loss exactly."""
    return ssim_index(rendered, gt)


def point_scores(
    pred: np.ndarray, gt: np.ndarray, tau: float, exhaustive: bool = False
) -> Point3DScores:
    """Chamfer distance and threshold precision/recall/F1 between clouds.

    ``exhaustive`` switches the nearest-neighbor queries to a full O(N*M)
    scan, used as the oracle for the spatial index."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 3)
    if len(pred) == 0 or len(gt) == 0:
        raise ValueError("point_scores requires non-empty clouds")
    if exhaustive:
        d2 = ((pred[:, None, :] - gt[None, :, :]) ** 2).sum(axis=2)
        d_pred = np.sqrt(d2.min(axis=1))
        d_gt = np.sqrt(d2.min(axis=0))
    else:
        d_pred, _ = cKDTree(gt).query(pred)
        d_gt, _ = cKDTree(pred).query(gt)
    chamfer = 0.5 * (d_pred.mean() + d_gt.mean())
    precision = float((d_pred <= tau).mean())
    recall = float((d_gt <= tau).mean())
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return Point3DScores(
        chamfer=float(chamfer), precision=precision, recall=recall, f1=f1, tau=tau
    )


@dataclass
class PerObjectRow:
    object_id: int
    iou: float
    biou: float
    pixels_gt: int


def per_object_scores(
    pred_maps: list[IdMap], gt_maps: list[IdMap]
) -> list[PerObjectRow]:
    """Aggregate per-object IoU over a set of views."""
    inter: dict[int, int] = {}
    union: dict[int, int] = {}
    binter: dict[int, int] = {}
    bunion: dict[int, int] = {}
    gt_pixels: dict[int, int] = {}
    for pred, gt in zip(pred_maps, gt_maps):
        width = _band_width(gt.ids.shape)
        for c in np.unique(np.concatenate([np.unique(gt.ids), np.unique(pred.ids)])):
            c = int(c)
            p = pred.ids == c
            g = gt.ids == c
            inter[c] = inter.get(c, 0) + int((p & g).sum())
            union[c] = union.get(c, 0) + int((p | g).sum())
            pb, gb = boundary_band(p, width), boundary_band(g, width)
            binter[c] = binter.get(c, 0) + int((pb & gb).sum())
            bunion[c] = bunion.get(c, 0) + int((pb | gb).sum())
            gt_pixels[c] = gt_pixels.get(c, 0) + int(g.sum())
    rows = []
    for c in sorted(union):
        rows.append(
            PerObjectRow(
                object_id=c,
                iou=inter[c] / union[c] if union[c] else 1.0,
                biou=binter[c] / bunion[c] if bunion[c] else 1.0,
                pixels_gt=gt_pixels[c],
            )
        )
    return rows
