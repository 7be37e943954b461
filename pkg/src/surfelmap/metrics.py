"""Retrieval and segmentation metrics over map point sets.

Point sets are index sets into one map, so intersection and union are plain
set operations. Detection counts a query as a hit only when its IoU is
strictly above the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

DETECTION_THRESHOLDS = (0.15, 0.25, 0.5)

# Structural classes commonly excluded from open-set evaluation; callers
# translate names to label ids for their own label space.
INDOOR_BACKGROUND_CLASSES = ("wall", "floor", "ceiling", "door", "window")
OUTDOOR_BACKGROUND_CLASSES = ("road", "sidewalk", "building")


@dataclass
class LabeledAssignment:
    """Per-point predicted and ground-truth labels, aligned with map order."""

    predicted: np.ndarray
    ground_truth: np.ndarray

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted)
        self.ground_truth = np.asarray(self.ground_truth)
        if self.predicted.shape != self.ground_truth.shape or self.predicted.ndim != 1:
            raise InputError("predicted and ground truth must be equal-length 1-D")


def iou3d(predicted, ground_truth) -> float:
    """Intersection over union of two point index collections.

    Accepts arrays, sets, or any iterable of integers. Two empty sets have
    no evidence of agreement and score 0.
    """
    p = {int(i) for i in predicted}
    g = {int(i) for i in ground_truth}
    union = len(p | g)
    if union == 0:
        return 0.0
    return len(p & g) / union


def detection_at(
    ious,
    thresholds: tuple[float, ...] = DETECTION_THRESHOLDS,
) -> dict[float, float]:
    """Fraction of queries whose IoU lands strictly above each threshold."""
    ious = np.asarray(ious, dtype=np.float64)
    if ious.ndim != 1 or ious.size == 0:
        raise InputError("need a non-empty 1-D array of per-query IoUs")
    return {float(t): float(np.mean(ious > t)) for t in thresholds}


@dataclass
class SegmentationMetrics:
    mean_accuracy: float  # unweighted mean per-label recall
    freq_weighted_iou: float  # per-label IoU weighted by ground-truth share
    per_label: dict[int, dict[str, float]]


def segmentation_metrics(
    predicted,
    ground_truth,
    *,
    exclude: frozenset[int] | set[int] = frozenset(),
) -> SegmentationMetrics:
    """Mean per-label recall and frequency-weighted IoU.

    Points whose ground-truth label is in ``exclude`` are dropped before
    anything is counted. Only labels that occur in the (remaining) ground
    truth contribute; a label that appears only in predictions affects other
    labels' IoU through false positives but gets no row of its own.
    """
    pair = LabeledAssignment(predicted, ground_truth)
    pred, gt = pair.predicted, pair.ground_truth
    if exclude:
        keep = ~np.isin(gt, list(exclude))
        pred, gt = pred[keep], gt[keep]
    if gt.size == 0:
        raise InputError("no points left after exclusion")

    labels = np.unique(gt)
    total = gt.size
    recalls = []
    weighted_iou = 0.0
    per_label: dict[int, dict[str, float]] = {}
    for label in labels:
        in_gt = gt == label
        in_pred = pred == label
        tp = int(np.sum(in_gt & in_pred))
        fn = int(np.sum(in_gt & ~in_pred))
        fp = int(np.sum(~in_gt & in_pred))
        recall = tp / (tp + fn)
        iou = tp / (tp + fp + fn) if (tp + fp + fn) else 0.0
        weight = in_gt.sum() / total
        recalls.append(recall)
        weighted_iou += weight * iou
        per_label[int(label)] = {
            "recall": recall,
            "iou": iou,
            "weight": float(weight),
        }
    return SegmentationMetrics(
        mean_accuracy=float(np.mean(recalls)),
        freq_weighted_iou=float(weighted_iou),
        per_label=per_label,
    )
