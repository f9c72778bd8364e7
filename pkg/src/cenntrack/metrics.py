"""Overlap, success curve and AUC for single-target tracking."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

N_THRESHOLDS = 101


def overlap(tracked, truth) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    x1, y1, w1, h1 = (float(v) for v in tracked)
    x2, y2, w2, h2 = (float(v) for v in truth)
    if min(w1, h1, w2, h2) <= 0:
        raise ValueError("boxes need positive width and height")
    iw = max(0.0, min(x1 + w1, x2 + w2) - max(x1, x2))
    ih = max(0.0, min(y1 + h1, y2 + h2) - max(y1, y2))
    inter = iw * ih
    return inter / (w1 * h1 + w2 * h2 - inter)


@dataclass(frozen=True)
class SuccessCurve:
    thresholds: np.ndarray
    success_rate: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "success_rate"])
        for t, r in zip(self.thresholds, self.success_rate):
            w.writerow([f"{t:.2f}", f"{r:.6f}"])
        return buf.getvalue()


def success_curve(overlaps) -> SuccessCurve:
    """Fraction of frames whose overlap reaches each threshold in 0, 0.01, ..., 1.

    A frame passes a threshold when its overlap is at least that value; at
    zero every frame counts.
    """
    scores = np.asarray(overlaps, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ValueError("no overlaps to score")
    # exact decimal grid; linspace would give 0.07000000000000001
    levels = np.arange(N_THRESHOLDS) / (N_THRESHOLDS - 1)
    rate = (scores[None, :] >= levels[:, None]).mean(axis=1)
    rate[0] = 1.0
    return SuccessCurve(levels, rate)


def auc(curve: SuccessCurve) -> float:
    """Trapezoidal area under the success curve over [0, 1]."""
    r = curve.success_rate
    # uniform grid: dividing once keeps the perfect tracker at exactly 1.0
    return float((r.sum() - (r[0] + r[-1]) / 2) / (len(r) - 1))
