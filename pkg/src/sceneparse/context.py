"""Block-pair and adjacency class co-occurrence priors from a retrieval set.

The global prior conditions on a class occurring in one spatial block and
gives the class distribution observed in every other block; the local
prior gives the class distribution of superpixels adjacent to a superpixel
of a given class. Both are raw-count tensors plus additively smoothed
conditional distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .segmentation import BlockGrid, SuperpixelSegmentation

GLOBAL_MODES = ("presence", "pixel-pair")


def superpixel_class_counts(labels: np.ndarray, seg: SuperpixelSegmentation, M: int) -> np.ndarray:
    """Per-superpixel pixel counts per class, shape (L, M + 1); column 0 is
    the unlabeled count."""
    if labels.shape != seg.shape:
        raise ValueError("label map does not match segmentation dimensions")
    ids = seg.id_map.ravel().astype(np.int64)
    lab = labels.ravel().astype(np.int64)
    L = seg.n_superpixels
    return np.bincount(ids * (M + 1) + lab, minlength=L * (M + 1)).reshape(L, M + 1)


def superpixel_majority_labels(class_counts: np.ndarray) -> np.ndarray:
    """Majority class per superpixel excluding unlabeled; ties toward the
    smaller class index; an unlabeled-only superpixel gets 0."""
    labeled = class_counts[:, 1:]
    majority = np.argmax(labeled, axis=1).astype(np.int32) + 1
    majority[labeled.sum(axis=1) == 0] = 0
    return majority


def block_class_histogram(
    class_counts: np.ndarray, block_ids: np.ndarray, K: int
) -> np.ndarray:
    """Per-block labeled-class pixel counts, shape (K, M).

    Every pixel of a superpixel counts into the superpixel's centroid
    block, matching the pixel-to-block assignment rule.
    """
    L, m1 = class_counts.shape
    if block_ids.shape[0] != L:
        raise ValueError("block_ids must align with class_counts rows")
    hist = np.zeros((K, m1 - 1), dtype=np.int64)
    np.add.at(hist, block_ids, class_counts[:, 1:])
    return hist


@dataclass(frozen=True)
class GlobalCooccurrence:
    """Conditional class distributions between ordered block pairs.

    prob[chat-1, k1, k2, :] is the smoothed distribution over classes in
    block k2 given class chat occurs in block k1 (k1 == k2 slices are
    never queried and hold the smoothing-only uniform row).
    """

    counts: np.ndarray  # (M, K, K, M) raw accumulation
    prob: np.ndarray
    eps: float
    mode: str

    @property
    def M(self) -> int:
        return self.counts.shape[0]

    @property
    def K(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class LocalCooccurrence:
    """Class distributions of adjacent-superpixel neighbors.

    prob[chat-1, :] is the smoothed distribution of the neighbor's class
    given the superpixel's class chat; raw counts are symmetric.
    """

    counts: np.ndarray  # (M, M)
    prob: np.ndarray
    eps: float

    @property
    def M(self) -> int:
        return self.counts.shape[0]


def _smooth_conditional(counts: np.ndarray, eps: float) -> np.ndarray:
    """Add-eps smoothing then normalization over the last axis."""
    M = counts.shape[-1]
    sm = counts.astype(np.float64) + eps
    return sm / sm.sum(axis=-1, keepdims=True) if eps > 0 else _zero_safe(sm, M)


def _zero_safe(sm: np.ndarray, M: int) -> np.ndarray:
    tot = sm.sum(axis=-1, keepdims=True)
    return np.where(tot == 0, 1.0 / M, sm / np.where(tot == 0, 1.0, tot))


def extract_global(
    block_histograms,
    M: int,
    K: int,
    eps: float = 1.0,
    mode: str = "presence",
    multiplicities=None,
) -> GlobalCooccurrence:
    """Accumulate the block-pair co-occurrence tensor over retrieved images.

    block_histograms: per retrieved image, a (K, M) labeled-pixel count
    table (a multiset is expressed via integer multiplicities). In
    "presence" mode the contribution of image i to counts[chat, k1, k2, :]
    is hist_i[k2, :] whenever chat has at least one pixel in k1; in
    "pixel-pair" mode it is hist_i[k1, chat] * hist_i[k2, :].
    """
    if mode not in GLOBAL_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {GLOBAL_MODES}")
    hists = [np.asarray(h) for h in block_histograms]
    if multiplicities is None:
        multiplicities = np.ones(len(hists), dtype=np.int64)
    counts = np.zeros((M, K, K, M), dtype=np.float64)
    offdiag = 1.0 - np.eye(K)
    for hist, mult in zip(hists, np.asarray(multiplicities)):
        if mult == 0:
            continue
        if hist.shape != (K, M):
            raise ValueError(
                f"block histogram shape {hist.shape} does not match (K={K}, M={M})"
            )
        h = hist.astype(np.float64)
        cond = (h > 0).astype(np.float64) if mode == "presence" else h
        # contribution[chat, k1, k2, c] = cond[k1, chat] * h[k2, c], k1 != k2
        contrib = np.einsum("ia,jc->aijc", cond, h)
        contrib *= offdiag[None, :, :, None]
        counts += mult * contrib
    return GlobalCooccurrence(counts, _smooth_conditional(counts, eps), eps, mode)


def extract_local(
    pair_labels, M: int, eps: float = 1.0, multiplicities=None
) -> LocalCooccurrence:
    """Accumulate the neighbor-class matrix over retrieved images.

    pair_labels: per retrieved image, an (E, 2) array of class labels for
    unordered adjacent superpixel pairs (pairs with an unlabeled side must
    already be dropped). Each pair (a, b) increments count(a, b) and
    count(b, a), so raw counts are symmetric by construction.
    """
    pairs = [np.asarray(p, dtype=np.int64).reshape(-1, 2) for p in pair_labels]
    if multiplicities is None:
        multiplicities = np.ones(len(pairs), dtype=np.int64)
    counts = np.zeros((M, M), dtype=np.float64)
    for p, mult in zip(pairs, np.asarray(multiplicities)):
        if mult == 0 or p.size == 0:
            continue
        if p.min() < 1 or p.max() > M:
            raise ValueError("pair labels must be in 1..M")
        flat = np.concatenate([p, p[:, ::-1]], axis=0)
        upd = np.bincount(
            (flat[:, 0] - 1) * M + (flat[:, 1] - 1), minlength=M * M
        ).reshape(M, M)
        counts += mult * upd
    return LocalCooccurrence(counts, _smooth_conditional(counts, eps), eps)


def adjacency_pair_labels(
    seg: SuperpixelSegmentation, sp_labels: np.ndarray
) -> np.ndarray:
    """Labeled adjacency pairs for one image: (E', 2) class-label rows for
    every unordered adjacent pair whose two sides both carry a label."""
    pairs = seg.adjacency_pairs
    lab = sp_labels[pairs]
    keep = (lab[:, 0] > 0) & (lab[:, 1] > 0)
    return lab[keep]


def image_context_summary(
    labels: np.ndarray, seg: SuperpixelSegmentation, M: int
) -> dict[str, np.ndarray]:
    """Grid-independent per-image statistics for later prior extraction."""
    cc = superpixel_class_counts(labels, seg, M)
    sp_labels = superpixel_majority_labels(cc)
    return {
        "class_counts": cc,
        "sp_labels": sp_labels,
        "centroids": seg.centroids,
        "pair_labels": adjacency_pair_labels(seg, sp_labels),
    }


def summary_block_histogram(summary: dict, grid: BlockGrid) -> np.ndarray:
    block_ids = grid.blocks_of(summary["centroids"])
    return block_class_histogram(summary["class_counts"], block_ids, grid.K)
