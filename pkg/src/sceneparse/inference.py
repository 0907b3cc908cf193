"""Contextual voting, decision-level fusion, and label assignment.

Every superpixel casts votes weighted by w = (visual confidence of its
predicted class) * (its pixel count): to all superpixels in other blocks
through the block-pair prior, and to its adjacent neighbors through the
adjacency prior. Vote totals normalize to contextual probability fields,
which fuse with the visual field as
w_const + w_global * P_global + w_local * P_local + w_visual * P_visual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .context import GlobalCooccurrence, LocalCooccurrence
from .fields import ProbabilityField, normalize_rows
from .segmentation import SuperpixelSegmentation

WEIGHT_MODES = ("voter", "receiver")


@dataclass(frozen=True)
class FusionWeights:
    w_const: float = 0.0
    w_global: float = 0.25
    w_local: float = 0.25
    w_visual: float = 0.5

    def __post_init__(self):
        if min(self.w_global, self.w_local, self.w_visual) < 0:
            raise ValueError("probability weights must be nonnegative")
        if self.w_global == self.w_local == self.w_visual == 0:
            raise ValueError("at least one probability weight must be positive")

    @classmethod
    def parse(cls, text: str) -> "FusionWeights":
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 4:
            raise ValueError("expected 4 comma-separated weights: wc,wg,wl,wv")
        return cls(*parts)


def _check_visual(seg: SuperpixelSegmentation, visual: ProbabilityField) -> None:
    if visual.n_superpixels != seg.n_superpixels:
        raise ValueError("visual field does not cover the segmentation's superpixels")


def vote_global(
    seg: SuperpixelSegmentation,
    visual: ProbabilityField,
    prior: GlobalCooccurrence,
    weight_mode: str = "voter",
    method: str = "fast",
) -> ProbabilityField:
    """Accumulate block-pair prior votes from all out-of-block superpixels.

    The fast path pre-aggregates voter weight per (block, predicted class)
    and must agree with the naive per-voter double loop to 1e-9. A
    receiver with no out-of-block voter gets the uniform row.
    """
    _check_visual(seg, visual)
    if seg.block_ids is None:
        raise ValueError("segmentation has no block assignment")
    if weight_mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    if method == "fast":
        votes = _vote_global_fast(seg, visual, prior, weight_mode)
    elif method == "naive":
        votes = _vote_global_naive(seg, visual, prior, weight_mode)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ProbabilityField.from_scores(votes, "global")


def _vote_global_fast(seg, visual, prior, weight_mode) -> np.ndarray:
    M = prior.M
    K = prior.K
    blocks = seg.block_ids
    top = visual.argmax_classes() - 1
    if weight_mode == "voter":
        w = visual.argmax_probs() * seg.sizes
        agg = np.zeros((K, M))
        np.add.at(agg, (blocks, top), w)
        block_votes = np.zeros((K, M))
        for k2 in range(K):
            others = np.arange(K) != k2
            # sum over k1 != k2 and chat of agg[k1, chat] * prob[chat, k1, k2, :]
            block_votes[k2] = np.einsum("ka,akc->c", agg[others], prior.prob[:, others, k2, :])
        return block_votes[blocks]
    # receiver mode: vote weight uses the receiver's own visual probability
    # of the voter's predicted class.
    sizes_by = np.zeros((K, M))
    np.add.at(sizes_by, (blocks, top), seg.sizes.astype(np.float64))
    per_block = np.zeros((K, M, M))  # (receiver block, chat, class)
    for k2 in range(K):
        others = np.arange(K) != k2
        per_block[k2] = np.einsum("ka,akc->ac", sizes_by[others], prior.prob[:, others, k2, :])
    votes = np.einsum("la,lac->lc", visual.probs, per_block[blocks])
    return votes


def _vote_global_naive(seg, visual, prior, weight_mode) -> np.ndarray:
    L = seg.n_superpixels
    M = prior.M
    blocks = seg.block_ids
    top = visual.argmax_classes() - 1
    top_prob = visual.argmax_probs()
    votes = np.zeros((L, M))
    for l in range(L):
        for q in range(L):
            if blocks[q] == blocks[l]:
                continue
            if weight_mode == "voter":
                w = top_prob[q] * seg.sizes[q]
            else:
                w = visual.probs[l, top[q]] * seg.sizes[q]
            votes[l] += w * prior.prob[top[q], blocks[q], blocks[l], :]
    return votes


def vote_local(
    seg: SuperpixelSegmentation,
    visual: ProbabilityField,
    prior: LocalCooccurrence,
    weight_mode: str = "voter",
) -> ProbabilityField:
    """Accumulate adjacency prior votes from each superpixel's neighbors.

    An isolated superpixel (no neighbors) gets the uniform row.
    """
    _check_visual(seg, visual)
    if weight_mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    L = seg.n_superpixels
    M = prior.M
    top = visual.argmax_classes() - 1
    votes = np.zeros((L, M))
    pairs = seg.adjacency_pairs
    if pairs.size:
        # Each undirected pair contributes in both directions.
        recv = np.concatenate([pairs[:, 0], pairs[:, 1]])
        voter = np.concatenate([pairs[:, 1], pairs[:, 0]])
        if weight_mode == "voter":
            w = visual.argmax_probs()[voter] * seg.sizes[voter]
        else:
            w = visual.probs[recv, top[voter]] * seg.sizes[voter]
        np.add.at(votes, recv, w[:, None] * prior.prob[top[voter], :])
    return ProbabilityField.from_scores(votes, "local")


def fuse(
    visual: ProbabilityField,
    global_field: ProbabilityField,
    local_field: ProbabilityField,
    weights: FusionWeights,
) -> ProbabilityField:
    """Weighted decision-level combination, renormalized onto the simplex.

    The constant term adds uniformly across classes and never changes the
    argmax.
    """
    shapes = {f.probs.shape for f in (visual, global_field, local_field)}
    if len(shapes) != 1:
        raise ValueError("probability fields cover different superpixel sets")
    raw = (
        weights.w_const
        + weights.w_global * global_field.probs
        + weights.w_local * local_field.probs
        + weights.w_visual * visual.probs
    )
    return ProbabilityField(normalize_rows(raw), "fused")


def assign_labels(fused: ProbabilityField, seg: SuperpixelSegmentation) -> np.ndarray:
    """Argmax class per superpixel broadcast to its pixels (ties -> smaller
    class index); the output raster contains no unlabeled index."""
    _check_visual(seg, fused)
    return fused.argmax_classes()[seg.id_map]
