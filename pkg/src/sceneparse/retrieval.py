"""Similar-image retrieval over the four whole-image descriptors.

Each descriptor is z-score standardized per dimension over the training
index; for every descriptor independently the top alpha training images by
Euclidean distance enter the retrieval multiset, so its cardinality is
exactly 4 * alpha (duplicates allowed and meaningful downstream).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .descriptors import DESCRIPTOR_NAMES, GlobalFeatureSet


@dataclass(frozen=True)
class RetrievalConfig:
    alpha: int = 100
    rare_class_count: int = 0  # 0 disables per-rare-class retrieval
    rare_alpha: int | None = None  # None -> same as alpha

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.rare_class_count < 0:
            raise ValueError("rare_class_count must be >= 0")
        if self.rare_alpha is not None and self.rare_alpha < 1:
            raise ValueError("rare_alpha must be >= 1")

    @property
    def effective_rare_alpha(self) -> int:
        return self.alpha if self.rare_alpha is None else self.rare_alpha


@dataclass
class RetrievalSet:
    """Multiset of retrieved training-image ids with per-descriptor provenance."""

    image_ids: np.ndarray  # (4 * alpha,) concatenated per-descriptor lists
    by_descriptor: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def cardinality(self) -> int:
        return int(self.image_ids.shape[0])

    def multiplicities(self, n_images: int) -> np.ndarray:
        """Occurrence count per training image id, length n_images."""
        return np.bincount(self.image_ids, minlength=n_images).astype(np.int64)

    def provenance(self, image_id: int) -> set[str]:
        return {name for name, ids in self.by_descriptor.items() if image_id in ids}


class DescriptorIndex:
    """Standardized training descriptor matrices with their original ids.

    Standardization statistics always come from the full training set;
    restricted views (used for per-rare-class retrieval) reuse them.
    """

    def __init__(self, matrices: dict[str, np.ndarray], ids: np.ndarray,
                 means: dict[str, np.ndarray] | None = None,
                 stds: dict[str, np.ndarray] | None = None):
        if set(matrices) != set(DESCRIPTOR_NAMES):
            raise ValueError(f"index must cover descriptors {DESCRIPTOR_NAMES}")
        sizes = {m.shape[0] for m in matrices.values()}
        if sizes != {ids.shape[0]}:
            raise ValueError("descriptor matrices and ids disagree on image count")
        self.ids = np.asarray(ids, dtype=np.int64)
        self.raw = {n: np.asarray(m, dtype=np.float64) for n, m in matrices.items()}
        if means is None:
            means = {n: m.mean(axis=0) for n, m in self.raw.items()}
            stds = {n: _safe_std(m) for n, m in self.raw.items()}
        self.means = means
        self.stds = stds
        self.matrices = {
            n: (m - means[n]) / stds[n] for n, m in self.raw.items()
        }

    @classmethod
    def build(cls, feature_sets: list[GlobalFeatureSet]) -> "DescriptorIndex":
        if not feature_sets:
            raise ValueError("empty training index")
        matrices = {
            name: np.stack([fs.get(name) for fs in feature_sets])
            for name in DESCRIPTOR_NAMES
        }
        return cls(matrices, np.arange(len(feature_sets)))

    @property
    def size(self) -> int:
        return int(self.ids.shape[0])

    def standardize_query(self, query: GlobalFeatureSet) -> dict[str, np.ndarray]:
        return {
            n: (np.asarray(query.get(n), dtype=np.float64) - self.means[n]) / self.stds[n]
            for n in DESCRIPTOR_NAMES
        }

    def restrict(self, mask: np.ndarray) -> "DescriptorIndex":
        """Subset view keeping full-index standardization statistics."""
        view = object.__new__(DescriptorIndex)
        view.ids = self.ids[mask]
        view.means = self.means
        view.stds = self.stds
        view.raw = {n: m[mask] for n, m in self.raw.items()}
        view.matrices = {n: m[mask] for n, m in self.matrices.items()}
        return view


def _safe_std(m: np.ndarray) -> np.ndarray:
    s = m.std(axis=0)
    return np.where(s == 0, 1.0, s)


def retrieve(query: GlobalFeatureSet, index: DescriptorIndex, cfg: RetrievalConfig) -> RetrievalSet:
    """Top-alpha ids per descriptor by Euclidean distance, ties by id."""
    if index.size == 0:
        raise ValueError("empty training index")
    if cfg.alpha > index.size:
        raise ValueError(f"alpha={cfg.alpha} exceeds training-set size {index.size}")
    q = index.standardize_query(query)
    by_descriptor = {}
    for name in DESCRIPTOR_NAMES:
        diff = index.matrices[name] - q[name]
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.lexsort((index.ids, dist))
        by_descriptor[name] = index.ids[order[: cfg.alpha]]
    image_ids = np.concatenate([by_descriptor[n] for n in DESCRIPTOR_NAMES])
    return RetrievalSet(image_ids, by_descriptor)


def retrieve_rare(
    query: GlobalFeatureSet,
    index: DescriptorIndex,
    class_presence: np.ndarray,
    rare: np.ndarray,
    cfg: RetrievalConfig,
) -> dict[int, RetrievalSet]:
    """Per-rare-class retrieval over the images that contain the class.

    class_presence is (n_images, M) boolean aligned with index rows. A
    class present in no training image yields an empty set plus a warning.
    """
    if class_presence.shape[0] != index.size:
        raise ValueError("class_presence rows must match index size")
    rare_cfg = RetrievalConfig(alpha=cfg.effective_rare_alpha)
    out: dict[int, RetrievalSet] = {}
    for c in np.asarray(rare, dtype=np.int64):
        mask = class_presence[:, c - 1].astype(bool)
        pool = int(mask.sum())
        if pool == 0:
            warnings.warn(f"class {c} absent from all training images; empty retrieval set")
            out[int(c)] = RetrievalSet(np.empty(0, dtype=np.int64), {})
            continue
        sub = index.restrict(mask)
        sub_cfg = rare_cfg if rare_cfg.alpha <= pool else RetrievalConfig(alpha=pool)
        out[int(c)] = retrieve(query, sub, sub_cfg)
    return out
