"""Model evaluation over view sets: rendered RGB/ID maps, image quality,
aggregated segmentation scores, and the per-object score table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorGrid
from .heads import HeadParameters
from .metrics import (
    PerObjectRow,
    SegScores,
    _band_width,
    boundary_band,
    per_object_scores,
    psnr,
    ssim_metric,
)
from .pipeline import render_view
from .raster.forward import argmax_id
from .scene import Camera, IdMap


@dataclass
class ViewEval:
    view: int
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    per_view: list[ViewEval]
    mean_psnr: float
    mean_ssim: float
    seg: SegScores
    per_object: list[PerObjectRow]


def render_maps(
    grid: AnchorGrid,
    heads: HeadParameters,
    cameras: list[Camera],
    n_objects: int,
    semantic_mode: str = "onehot",
    semantic_vectors: np.ndarray | None = None,
) -> tuple[list[np.ndarray], list[IdMap]]:
    """Rendered RGB images and argmax ID maps for each camera."""
    images, id_maps = [], []
    for camera in cameras:
        ctx = render_view(
            grid, heads, camera, n_objects,
            semantic_mode=semantic_mode, semantic_vectors=semantic_vectors,
        )
        images.append(ctx.target.rgb.copy())
        id_maps.append(IdMap(argmax_id(ctx.target)))
    return images, id_maps


def aggregate_seg(pred_maps: list[IdMap], gt_maps: list[IdMap]) -> SegScores:
    """Segmentation scores with per-class counts accumulated across views.

    Classes are those present in any ground-truth map; boundary bands are
    computed per view.
    """
    if len(pred_maps) != len(gt_maps) or not gt_maps:
        raise ValueError("need equally many (and at least one) pred/gt maps")
    classes = sorted(
        {int(c) for gt in gt_maps for c in np.unique(gt.ids)}
    )
    inter = {c: 0 for c in classes}
    union = {c: 0 for c in classes}
    binter = {c: 0 for c in classes}
    bunion = {c: 0 for c in classes}
    tp = fp = fn = 0
    correct = total = 0
    for pred, gt in zip(pred_maps, gt_maps):
        if pred.ids.shape != gt.ids.shape:
            raise ValueError(
                f"resolution mismatch {pred.ids.shape} vs {gt.ids.shape}"
            )
        width = _band_width(gt.ids.shape)
        correct += int((pred.ids == gt.ids).sum())
        total += gt.ids.size
        for c in classes:
            p = pred.ids == c
            g = gt.ids == c
            inter[c] += int((p & g).sum())
            union[c] += int((p | g).sum())
            pb, gb = boundary_band(p, width), boundary_band(g, width)
            binter[c] += int((pb & gb).sum())
            bunion[c] += int((pb | gb).sum())
            if c != 0:
                tp += int((p & g).sum())
                fp += int((p & ~g).sum())
                fn += int((~p & g).sum())
    iou = {c: (inter[c] / union[c] if union[c] else 1.0) for c in classes}
    biou = {c: (binter[c] / bunion[c] if bunion[c] else 1.0) for c in classes}
    dice = float(2 * tp / (2 * tp + fp + fn)) if (2 * tp + fp + fn) else 1.0
    return SegScores(
        iou=iou,
        miou=float(np.mean(list(iou.values()))),
        biou=biou,
        mbiou=float(np.mean(list(biou.values()))),
        dice=dice,
        accuracy=correct / total,
    )


def evaluate_maps(
    pred_images: list[np.ndarray],
    pred_maps: list[IdMap],
    gt_images: list[np.ndarray],
    gt_maps: list[IdMap],
) -> EvalReport:
    """Full report from already-rendered predictions."""
    if not (len(pred_images) == len(pred_maps) == len(gt_images) == len(gt_maps)):
        raise ValueError("prediction and ground-truth view counts must match")
    per_view = [
        ViewEval(view=i, psnr=psnr(p, g), ssim=ssim_metric(p, g))
        for i, (p, g) in enumerate(zip(pred_images, gt_images))
    ]
    return EvalReport(
        per_view=per_view,
        mean_psnr=float(np.mean([v.psnr for v in per_view])),
        mean_ssim=float(np.mean([v.ssim for v in per_view])),
        seg=aggregate_seg(pred_maps, gt_maps),
        per_object=per_object_scores(pred_maps, gt_maps),
    )


def evaluate_model(
    grid: AnchorGrid,
    heads: HeadParameters,
    cameras: list[Camera],
    gt_images: list[np.ndarray],
    gt_maps: list[IdMap],
    n_objects: int,
    semantic_mode: str = "onehot",
    semantic_vectors: np.ndarray | None = None,
) -> EvalReport:
    """Render every view and score it against ground truth."""
    images, id_maps = render_maps(
        grid, heads, cameras, n_objects,
        semantic_mode=semantic_mode, semantic_vectors=semantic_vectors,
    )
    return evaluate_maps(images, id_maps, gt_images, gt_maps)


def per_object_eval(
    grid: AnchorGrid,
    heads: HeadParameters,
    cameras: list[Camera],
    gt_maps: list[IdMap],
    n_objects: int,
    semantic_mode: str = "onehot",
    semantic_vectors: np.ndarray | None = None,
) -> list[PerObjectRow]:
    """Per-object IoU/BIoU table aggregated over the given views."""
    _, id_maps = render_maps(
        grid, heads, cameras, n_objects,
        semantic_mode=semantic_mode, semantic_vectors=semantic_vectors,
    )
    return per_object_scores(id_maps, gt_maps)


def report_rows(report: EvalReport) -> list[tuple[str, str, str]]:
    """Flatten a report into (metric, key, value) CSV rows."""

    def fmt(x: float) -> str:
        return format(x, ".17g")

    rows = [
        ("psnr_mean", "", fmt(report.mean_psnr)),
        ("ssim_mean", "", fmt(report.mean_ssim)),
        ("miou", "", fmt(report.seg.miou)),
        ("mbiou", "", fmt(report.seg.mbiou)),
        ("dice", "", fmt(report.seg.dice)),
        ("accuracy", "", fmt(report.seg.accuracy)),
    ]
    for c in sorted(report.seg.iou):
        rows.append(("iou", str(c), fmt(report.seg.iou[c])))
        rows.append(("biou", str(c), fmt(report.seg.biou[c])))
    for v in report.per_view:
        rows.append(("psnr_view", str(v.view), fmt(v.psnr)))
        rows.append(("ssim_view", str(v.view), fmt(v.ssim)))
    return rows
