"""Evaluation metrics: CorLoc, NMS, average precision, annotation time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import defaults
from .geometry import Box, iou


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: Box
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError("detection score must be finite")


@dataclass
class MetricReport:
    corloc: float
    per_class_ap: dict[str, float] = field(default_factory=dict)
    annotation_time_hours: float = 0.0

    @property
    def map(self) -> float:
        if not self.per_class_ap:
            return 0.0
        return float(np.mean(list(self.per_class_ap.values())))

    def to_dict(self) -> dict:
        return {
            "corloc": self.corloc,
            "per_class_ap": dict(self.per_class_ap),
            "map": self.map,
            "annotation_time_hours": self.annotation_time_hours,
        }


def corloc(
    selections: Mapping[str, Box],
    gt_boxes: Mapping[str, Sequence[Box]],
    iou_thresh: float = 0.5,
) -> float:
    """Fraction of positive images whose selected box hits a GT box at
    IoU >= iou_thresh. Images in gt_boxes but without a selection count
    as misses."""
    if not gt_boxes:
        raise ValueError("no positive images to score")
    correct = 0
    for image_id, gts in gt_boxes.items():
        sel = selections.get(image_id)
        if sel is not None and any(iou(sel, gt) >= iou_thresh for gt in gts):
            correct += 1
    return correct / len(gt_boxes)


def nms(detections: Sequence[Detection], iou_thresh: float = 0.3) -> list[Detection]:
    """Greedy score-descending non-maximum suppression, per image."""
    kept: list[Detection] = []
    by_image: dict[str, list[Detection]] = {}
    for d in detections:
        by_image.setdefault(d.image_id, []).append(d)
    for dets in by_image.values():
        order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
        survivors: list[Detection] = []
        for i in order:
            if all(iou(dets[i].box, s.box) < iou_thresh for s in survivors):
                survivors.append(dets[i])
        kept.extend(survivors)
    kept.sort(key=lambda d: -d.score)
    return kept


def average_precision(
    detections: Sequence[Detection],
    gt_boxes: Mapping[str, Sequence[Box]],
    iou_thresh: float = 0.5,
    eleven_point: bool = True,
) -> float:
    """VOC-style average precision.

    Detections are matched greedily by descending score; each detection
    claims the highest-IoU unmatched GT box of its image (if any reaches
    the threshold). Default is the 11-point interpolated AP; set
    eleven_point=False for the all-point variant.
    """
    n_gt = sum(len(g) for g in gt_boxes.values())
    if n_gt == 0:
        raise ValueError("no ground-truth boxes")
    if not detections:
        return 0.0

    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    matched: dict[str, set[int]] = {k: set() for k in gt_boxes}
    tp = np.zeros(len(order))
    fp = np.zeros(len(order))
    for rank, i in enumerate(order):
        det = detections[i]
        gts = gt_boxes.get(det.image_id, [])
        best_j, best_iou = -1, iou_thresh
        for j, gt in enumerate(gts):
            if j in matched[det.image_id]:
                continue
            v = iou(det.box, gt)
            if v >= best_iou:
                best_iou, best_j = v, j
        if best_j >= 0:
            matched[det.image_id].add(best_j)
            tp[rank] = 1
        else:
            fp[rank] = 1

    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(fp)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)

    if eleven_point:
        ap = 0.0
        for r in np.linspace(0.0, 1.0, 11):
            mask = recall >= r - 1e-12
            p = float(np.max(precision[mask])) if np.any(mask) else 0.0
            ap += p / 11.0
        return ap

    # all-point: integrate the precision envelope over recall
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    idx = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def annotation_time_hours(n_positive_pairs: int, supervision: str) -> float:
    """Modeled human annotation time in hours for a supervision mode.

    Uses the reference per-item times: 34.5 s to draw and verify one box,
    1.87 s per center-click (doubled for two clicks).
    """
    per_item = {
        "drawn_box": defaults.SECONDS_PER_DRAWN_BOX,
        "one_click": defaults.SECONDS_PER_CLICK,
        "two_click": 2.0 * defaults.SECONDS_PER_CLICK,
        "none": 0.0,
    }
    if supervision not in per_item:
        raise ValueError(f"unknown supervision mode: {supervision}")
    return n_positive_pairs * per_item[supervision] / 3600.0
