"""Pixel-level evaluation: confusion matrix and the four standard metrics.

Pixels whose ground truth is unlabeled (index 0) are excluded from every
count. Classes with no ground-truth pixels are excluded from the class
accuracy and mean-IU averages.
"""

from __future__ import annotations

import numpy as np

METRIC_NAMES = ("global_acc", "class_acc", "mean_iu", "fw_iu")


class ConfusionMatrix:
    """n[i, j] = pixels of true class i+1 predicted as class j+1."""

    def __init__(self, M: int):
        if M < 1:
            raise ValueError("need at least one class")
        self.M = M
        self.n = np.zeros((M, M), dtype=np.int64)

    def accumulate(self, pred: np.ndarray, gt: np.ndarray) -> "ConfusionMatrix":
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
        if pred.size and (pred.min() < 1 or pred.max() > self.M):
            raise ValueError("predictions must be class indices in 1..M")
        if gt.size and (gt.min() < 0 or gt.max() > self.M):
            raise ValueError("ground truth must be indices in 0..M")
        mask = gt > 0
        if mask.any():
            idx = (gt[mask].astype(np.int64) - 1) * self.M + (pred[mask].astype(np.int64) - 1)
            self.n += np.bincount(idx, minlength=self.M * self.M).reshape(self.M, self.M)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.M != self.M:
            raise ValueError("cannot merge confusion matrices of different sizes")
        self.n += other.n
        return self

    @property
    def true_counts(self) -> np.ndarray:
        return self.n.sum(axis=1)


def compute_metrics(cm: ConfusionMatrix) -> dict[str, float]:
    n = cm.n.astype(np.float64)
    t = n.sum(axis=1)
    total = t.sum()
    if total == 0:
        raise ValueError("no labeled pixels accumulated")
    diag = np.diag(n)

    global_acc = diag.sum() / total

    present = t > 0
    class_acc = float(np.mean(diag[present] / t[present]))

    iu_den = t + n.sum(axis=0) - diag
    valid = iu_den > 0
    iu = np.zeros_like(t)
    iu[valid] = diag[valid] / iu_den[valid]
    mean_iu = float(np.mean(iu[valid]))

    fw_iu = float((t * iu).sum() / total)

    return {
        "global_acc": float(global_acc),
        "class_acc": class_acc,
        "mean_iu": mean_iu,
        "fw_iu": fw_iu,
    }
