"""Detection and classification metrics for small-object evaluation.

The box similarity used throughout is a scale-adaptive IoU: the plain IoU
raised to an exponent p that approaches 1 for large boxes and drops toward
1 - gamma for small ones, making the measure more tolerant of pixel-level
localization error exactly where plain IoU is most brittle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ZeroAreaGroundTruth
from .raster import BBox


def iou(a: BBox, b: BBox) -> float:
    inter = a.intersect(b)
    if inter is None:
        return 0.0
    ai = inter.area
    return ai / (a.area + b.area - ai)


@dataclass(frozen=True)
class SIoUParams:
    gamma: float = 0.5
    kappa: float = math.sqrt(8.0)

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    def exponent(self, a: BBox, b: BBox) -> float:
        # p = 1 - gamma * exp(-sqrt(w1 h1 + w2 h2) / (sqrt(2) kappa))
        size = math.sqrt(a.w * a.h + b.w * b.h)
        return 1.0 - self.gamma * math.exp(-size / (math.sqrt(2.0) * self.kappa))


DEFAULT_SIOU = SIoUParams()


def siou(a: BBox, b: BBox, params: SIoUParams = DEFAULT_SIOU) -> float:
    return iou(a, b) ** params.exponent(a, b)


def loc_error_ratio(pred: BBox, truth: BBox) -> float:
    """L1 distance between corner vectors over sqrt of the truth-box area."""
    area = truth.w * truth.h
    if area == 0.0:
        raise ZeroAreaGroundTruth("ground-truth box has zero area")
    eps = sum(abs(p - t) for p, t in zip(pred.corners(), truth.corners()))
    return eps / math.sqrt(area)


class EvalResult(NamedTuple):
    precision: float
    recall: float
    f1: float
    matches: list  # (pred_index, truth_index, siou) per true positive


def _box_of(pred) -> BBox:
    return pred.box if hasattr(pred, "box") else pred


def _score_of(pred) -> float:
    return float(pred.score) if hasattr(pred, "score") else 1.0


def evaluate_detections(preds, truth, threshold: float = 0.40,
                        params: SIoUParams = DEFAULT_SIOU) -> EvalResult:
    """Greedy one-to-one matching in descending score order.

    A prediction and a truth box pair up when their SIoU clears `threshold`
    and neither is already taken; candidate pairs are visited by score, then
    higher SIoU, then lower indices, so the result is order-independent.
    Precision is defined as 0 when there are no predictions.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    pairs = []
    for i, p in enumerate(preds):
        pb = _box_of(p)
        for j, tb in enumerate(truth):
            s = siou(pb, tb, params)
            if s >= threshold:
                pairs.append((-_score_of(p), -s, i, j))
    pairs.sort()
    used_pred: set[int] = set()
    used_truth: set[int] = set()
    matches = []
    for neg_score, neg_s, i, j in pairs:
        if i in used_pred or j in used_truth:
            continue
        used_pred.add(i)
        used_truth.add(j)
        matches.append((i, j, -neg_s))
    tp = len(matches)
    precision = tp / len(preds) if preds else 0.0
    recall = tp / len(truth) if truth else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalResult(precision, recall, f1, matches)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Square count matrix, rows = truth, cols = predicted.

    Binary layout: index 0 is the negative class, 1 the positive, so
    TN = counts[0, 0], FP = counts[0, 1], FN = counts[1, 0], TP = counts[1, 1].
    """
    counts: np.ndarray = field()

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
            raise ValueError(f"counts must be square k x k with k >= 2, got {c.shape}")
        if (c < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @classmethod
    def binary(cls, tp: int, fp: int, fn: int, tn: int) -> "ConfusionMatrix":
        return cls(np.array([[tn, fp], [fn, tp]], dtype=np.int64))

    @property
    def k(self) -> int:
        return self.counts.shape[0]


def mcc(cm: ConfusionMatrix) -> float:
    if cm.k != 2:
        raise ValueError(f"mcc needs a 2x2 matrix, got {cm.k}x{cm.k}; "
                         "use mcc_multiclass")
    tn, fp = int(cm.counts[0, 0]), int(cm.counts[0, 1])
    fn, tp = int(cm.counts[1, 0]), int(cm.counts[1, 1])
    den = (tp + fp) * (tp + fn) * (tn + fn) * (tn + fp)
    if den == 0:
        return 0.0
    return (tn * tp - fp * fn) / math.sqrt(den)


def mcc_multiclass(cm: ConfusionMatrix) -> float:
    """Gorodkin R_k statistic; identical to mcc() when k = 2."""
    c = cm.counts
    s = int(c.sum())
    trace = int(np.trace(c))
    t = c.sum(axis=1)  # truth totals
    p = c.sum(axis=0)  # predicted totals
    # exact integer arithmetic up to the final division
    num = trace * s - int(np.dot(t, p))
    den_t = s * s - int(np.dot(t, t))
    den_p = s * s - int(np.dot(p, p))
    if den_t == 0 or den_p == 0:
        return 0.0
    return num / math.sqrt(den_t) / math.sqrt(den_p)
