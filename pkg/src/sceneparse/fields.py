"""Per-superpixel class probability fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Rows whose sum is already within this tolerance of 1 pass through
# untouched, which makes normalize_rows idempotent at the bit level.
_SIMPLEX_TOL = 1e-12


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """L1-normalize each row onto the probability simplex.

    All-zero rows map to the uniform distribution; rows already on the
    simplex (within 1e-12) are returned bit-for-bit unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-d array of row vectors")
    if np.any(x < 0):
        raise ValueError("negative mass in probability rows")
    s = x.sum(axis=1, keepdims=True)
    safe = np.where(s == 0.0, 1.0, s)
    divided = x / safe
    uniform = np.full_like(x, 1.0 / x.shape[1])
    out = np.where(s == 0.0, uniform, np.where(np.abs(s - 1.0) <= _SIMPLEX_TOL, x, divided))
    return out


@dataclass(frozen=True)
class ProbabilityField:
    """An (L, M) matrix of per-superpixel distributions over the M classes.

    Column j holds class index j + 1; index 0 (unlabeled) is never votable.
    """

    probs: np.ndarray
    tag: str  # visual | global | local | fused

    @classmethod
    def from_scores(cls, scores: np.ndarray, tag: str) -> "ProbabilityField":
        return cls(normalize_rows(scores), tag)

    @property
    def n_superpixels(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    def argmax_classes(self) -> np.ndarray:
        """Most probable class per superpixel (1-based; ties -> smaller index)."""
        return np.argmax(self.probs, axis=1).astype(np.int32) + 1

    def argmax_probs(self) -> np.ndarray:
        return self.probs[np.arange(self.probs.shape[0]), np.argmax(self.probs, axis=1)]

    def check_simplex(self, atol: float = 1e-9) -> None:
        if np.any(self.probs < 0):
            raise AssertionError(f"{self.tag}: negative probability")
        err = np.abs(self.probs.sum(axis=1) - 1.0)
        if err.size and err.max() > atol:
            raise AssertionError(f"{self.tag}: row sum off simplex by {err.max():g}")
