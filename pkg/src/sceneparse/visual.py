"""Per-superpixel visual features, MRMR feature selection, and the
one-vs-rest visual classifier producing the visual probability field.

Feature suite (F = 145 per superpixel):
  RGB mean (3) + joint 4x4x4 RGB histogram (64) + 64-word texton histogram
  over a 17-filter bank (64) + 8-bin gradient-orientation histogram (8)
  + geometry: normalized area, centroid x/y, bbox width/height, perimeter
  squared over area (6). Histograms are L1-normalized over the
  superpixel's pixels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, gaussian_laplace

from .descriptors import Codebook, kmeans, quantize, to_grayscale
from .fields import ProbabilityField
from .nnet import SigmoidNet
from .segmentation import SuperpixelSegmentation

TEXTON_WORDS = 64
N_FEATURES = 145

_GAUSS_SIGMAS = (1.0, 2.0, 4.0)
_LOG_SIGMAS = (1.0, 2.0, 4.0, 8.0)
_DERIV_SIGMAS = (2.0, 4.0)
_DERIV_ORIENTATIONS = 5  # k * pi / 5
N_FILTERS = len(_GAUSS_SIGMAS) + len(_LOG_SIGMAS) + len(_DERIV_SIGMAS) * _DERIV_ORIENTATIONS


def filter_responses(image: np.ndarray) -> np.ndarray:
    """17-filter bank responses on grayscale, shape (H, W, 17).

    3 Gaussians, 4 Laplacians of Gaussian, 10 oriented first-derivative
    Gaussians (2 scales x 5 orientations).
    """
    gray = to_grayscale(image)
    out = np.empty(gray.shape + (N_FILTERS,))
    i = 0
    for s in _GAUSS_SIGMAS:
        out[:, :, i] = gaussian_filter(gray, s)
        i += 1
    for s in _LOG_SIGMAS:
        out[:, :, i] = gaussian_laplace(gray, s)
        i += 1
    for s in _DERIV_SIGMAS:
        gy = gaussian_filter(gray, s, order=(1, 0))
        gx = gaussian_filter(gray, s, order=(0, 1))
        for k in range(_DERIV_ORIENTATIONS):
            theta = k * np.pi / _DERIV_ORIENTATIONS
            out[:, :, i] = np.cos(theta) * gx + np.sin(theta) * gy
            i += 1
    return out


def build_texton_codebook(images, seed: int, max_pixels: int = 50_000) -> Codebook:
    """64-word k-means codebook over filter-bank pixel responses."""
    stacks = [filter_responses(img).reshape(-1, N_FILTERS) for img in images]
    pixels = np.concatenate(stacks, axis=0)
    if pixels.shape[0] > max_pixels:
        rng = np.random.default_rng(seed)
        pick = rng.choice(pixels.shape[0], size=max_pixels, replace=False)
        pixels = pixels[np.sort(pick)]
    return Codebook(kmeans(pixels, TEXTON_WORDS, seed))


def superpixel_features(
    image: np.ndarray, seg: SuperpixelSegmentation, texton_codebook: Codebook
) -> np.ndarray:
    """The 145-dim feature vector for every superpixel, shape (L, 145)."""
    h, w = seg.shape
    if image.shape[:2] != (h, w):
        raise ValueError("segmentation does not match image dimensions")
    ids = seg.id_map.ravel()
    L = seg.n_superpixels
    sizes = seg.sizes.astype(np.float64)

    rgb = image.reshape(-1, 3)
    mean_rgb = np.stack(
        [np.bincount(ids, weights=rgb[:, c], minlength=L) / sizes for c in range(3)],
        axis=1,
    )

    cbins = np.minimum((rgb * 4).astype(np.int64), 3)
    ccode = (cbins[:, 0] * 4 + cbins[:, 1]) * 4 + cbins[:, 2]
    color_hist = np.bincount(ids * 64 + ccode, minlength=L * 64).reshape(L, 64)
    color_hist = color_hist / sizes[:, None]

    words = quantize(filter_responses(image).reshape(-1, N_FILTERS), texton_codebook.centers)
    texton_hist = np.bincount(
        ids * TEXTON_WORDS + words, minlength=L * TEXTON_WORDS
    ).reshape(L, TEXTON_WORDS)
    texton_hist = texton_hist / sizes[:, None]

    gray = to_grayscale(image)
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy).ravel()
    obin = np.minimum(
        (np.mod(np.arctan2(gy, gx), 2 * np.pi).ravel() / (2 * np.pi / 8)).astype(np.int64), 7
    )
    grad_hist = np.bincount(ids * 8 + obin, weights=mag, minlength=L * 8).reshape(L, 8)
    gmass = grad_hist.sum(axis=1, keepdims=True)
    grad_hist = grad_hist / np.where(gmass == 0, 1.0, gmass)

    geometry = _geometry_features(seg)

    features = np.concatenate(
        [mean_rgb, color_hist, texton_hist, grad_hist, geometry], axis=1
    )
    assert features.shape == (L, N_FEATURES)
    return features


def _geometry_features(seg: SuperpixelSegmentation) -> np.ndarray:
    h, w = seg.shape
    ids = seg.id_map.ravel()
    L = seg.n_superpixels
    xs = np.tile(np.arange(w, dtype=np.int64), h)
    ys = np.repeat(np.arange(h, dtype=np.int64), w)

    xmin = np.full(L, w, dtype=np.int64)
    xmax = np.full(L, -1, dtype=np.int64)
    ymin = np.full(L, h, dtype=np.int64)
    ymax = np.full(L, -1, dtype=np.int64)
    np.minimum.at(xmin, ids, xs)
    np.maximum.at(xmax, ids, xs)
    np.minimum.at(ymin, ids, ys)
    np.maximum.at(ymax, ids, ys)

    # Perimeter = count of pixel sides facing a different id or the border.
    padded = np.pad(seg.id_map, 1, constant_values=-1)
    boundary = (
        (padded[1:-1, :-2] != seg.id_map).astype(np.int64)
        + (padded[1:-1, 2:] != seg.id_map)
        + (padded[:-2, 1:-1] != seg.id_map)
        + (padded[2:, 1:-1] != seg.id_map)
    )
    perimeter = np.bincount(ids, weights=boundary.ravel().astype(np.float64), minlength=L)

    sizes = seg.sizes.astype(np.float64)
    return np.stack(
        [
            sizes / (h * w),
            seg.centroids[:, 0] / w,
            seg.centroids[:, 1] / h,
            (xmax - xmin + 1) / w,
            (ymax - ymin + 1) / h,
            perimeter**2 / sizes,
        ],
        axis=1,
    )


# ---------------------------------------------------------------------------
# MRMR feature selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MrmrSelection:
    """Per-class ordered feature index lists plus discretization params."""

    indices: np.ndarray  # (M, count) int32, row c-1 for class c
    mu: np.ndarray
    std: np.ndarray
    w: float

    @property
    def count(self) -> int:
        return self.indices.shape[1]

    def for_class(self, c: int) -> np.ndarray:
        return self.indices[c - 1]


def discretize(features: np.ndarray, mu: np.ndarray, std: np.ndarray, w: float) -> np.ndarray:
    """Ternary codes {0, 1, 2} for values below mu - w*std, between, above.

    A zero-std feature discretizes to the middle code everywhere.
    """
    hi = mu + w * std
    lo = mu - w * std
    return (features > hi).astype(np.int8) + (features >= lo).astype(np.int8)


def _mutual_information(a: np.ndarray, cards: int, b: np.ndarray, cardb: int) -> float:
    """MI in nats between two discrete vectors from their empirical joint."""
    n = a.shape[0]
    joint = np.bincount(a.astype(np.int64) * cardb + b, minlength=cards * cardb).reshape(
        cards, cardb
    )
    p = joint / n
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / (pa @ pb)[mask])))


def mrmr_select(
    features: np.ndarray,
    labels: np.ndarray,
    target_class: int,
    count: int,
    mu: np.ndarray | None = None,
    std: np.ndarray | None = None,
    w: float = 0.5,
) -> np.ndarray:
    """Greedy max relevance / min redundancy feature ordering for one class.

    Score at each step is I(f; target) - mean over already-selected s of
    I(f; s); the first pick maximizes relevance alone. Ties break toward
    the smaller feature index.
    """
    features = np.asarray(features, dtype=np.float64)
    n, F = features.shape
    if count > F:
        raise ValueError(f"cannot select {count} of {F} features")
    target = (np.asarray(labels) == target_class).astype(np.int8)
    if n < 2 or target.min() == target.max():
        raise ValueError(
            f"class {target_class}: need both positive and negative examples"
        )
    if mu is None:
        mu = features.mean(axis=0)
    if std is None:
        std = features.std(axis=0)
    codes = discretize(features, mu, std, w)

    relevance = np.array(
        [_mutual_information(codes[:, f], 3, target, 2) for f in range(F)]
    )
    selected = [int(np.argmax(relevance))]
    redundancy_sum = np.zeros(F)
    available = np.ones(F, dtype=bool)
    available[selected[0]] = False
    while len(selected) < count:
        last = selected[-1]
        redundancy_sum += np.array(
            [_mutual_information(codes[:, f], 3, codes[:, last], 3) for f in range(F)]
        )
        score = relevance - redundancy_sum / len(selected)
        score[~available] = -np.inf
        pick = int(np.argmax(score))
        selected.append(pick)
        available[pick] = False
    return np.array(selected, dtype=np.int32)


def build_selection(
    features: np.ndarray, labels: np.ndarray, M: int, count: int = 50, w: float = 0.5
) -> MrmrSelection:
    mu = features.mean(axis=0)
    std = features.std(axis=0)
    rows = [
        mrmr_select(features, labels, c, count, mu=mu, std=std, w=w)
        for c in range(1, M + 1)
    ]
    return MrmrSelection(np.stack(rows), mu, std, w)


# ---------------------------------------------------------------------------
# One-vs-rest classifier
# ---------------------------------------------------------------------------


@dataclass
class ClassNet:
    net: SigmoidNet
    feat_mean: np.ndarray
    feat_std: np.ndarray
    loss_history: np.ndarray


@dataclass
class VisualClassifier:
    nets: list[ClassNet]  # index c-1 for class c
    selection: MrmrSelection

    @property
    def n_classes(self) -> int:
        return len(self.nets)


def train_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    selection: MrmrSelection,
    seed: int,
    epochs: int = 200,
    batch_size: int = 32,
    lr: float = 0.01,
    n_hidden: int = 16,
) -> VisualClassifier:
    """One binary network per class on that class's selected features.

    Inputs are z-scored with training statistics; training is seeded and
    bit-reproducible. A class with no positive superpixel is an error.
    """
    M = selection.indices.shape[0]
    nets: list[ClassNet] = []
    for c in range(1, M + 1):
        y = (labels == c).astype(np.float64)
        if y.sum() == 0:
            raise ValueError(f"class {c} has no positive training superpixels")
        X = features[:, selection.for_class(c)]
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std == 0, 1.0, std)
        Xz = (X - mean) / std
        net = SigmoidNet(X.shape[1], n_hidden, seed=np.random.SeedSequence([seed, c, 0]))
        history = net.train(
            Xz, y, epochs=epochs, batch_size=batch_size, lr=lr,
            shuffle_seed=np.random.SeedSequence([seed, c, 1]),
        )
        if epochs > 1 and history[-1] >= history[0]:
            warnings.warn(f"class {c}: training loss did not decrease "
                          f"({history[0]:.4g} -> {history[-1]:.4g})")
        nets.append(ClassNet(net, mean, std, history))
    return VisualClassifier(nets, selection)


def predict_visual(classifier: VisualClassifier, features: np.ndarray) -> ProbabilityField:
    """Per-superpixel class distribution from the M per-class scores.

    Scores are L1-normalized; an all-zero score row maps to uniform.
    """
    L = features.shape[0]
    M = classifier.n_classes
    scores = np.empty((L, M))
    for c in range(1, M + 1):
        cn = classifier.nets[c - 1]
        X = (features[:, classifier.selection.for_class(c)] - cn.feat_mean) / cn.feat_std
        scores[:, c - 1] = cn.net.predict(X)
    return ProbabilityField.from_scores(scores, "visual")
