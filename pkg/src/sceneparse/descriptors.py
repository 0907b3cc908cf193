"""Whole-image descriptors used for similar-image retrieval.

Four descriptors per image: a 16x16 tiny image, a joint 8x8x8 RGB
histogram, an oriented band-pass filter-bank summary (log-Gabor transfer
functions applied in the frequency domain, DC-free by construction), and a
spatial pyramid of quantized dense gradient-orientation descriptors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DESCRIPTOR_NAMES = ("tiny", "rgb_hist", "gist", "pyramid")

TINY_SIZE = 16
RGB_BINS = 8

GIST_SIZE = 128
GIST_SCALES = 4
GIST_ORIENTATIONS = 8
GIST_GRID = 4
_GIST_BASE_FREQ = 0.25
_GIST_SIGMA_RATIO = 0.65
_GIST_SIGMA_THETA = np.pi / GIST_ORIENTATIONS

# Dense local descriptors: 4x4 cells of 8x8 pixels, 8 orientation bins,
# sampled on a stride-8 grid -> 128 dims per 32x32 patch.
CELL = 8
GRID_CELLS = 4
N_ORI = 8
PATCH = CELL * GRID_CELLS

PYRAMID_LEVELS = (1, 2, 4)


@dataclass(frozen=True)
class Codebook:
    """k-means visual-word centers over the local descriptor space."""

    centers: np.ndarray

    def __post_init__(self):
        if self.centers.ndim != 2 or self.centers.shape[0] < 2:
            raise ValueError("codebook needs >= 2 centers")

    @property
    def size(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class GlobalFeatureSet:
    tiny: np.ndarray
    rgb_hist: np.ndarray
    gist: np.ndarray
    pyramid: np.ndarray

    def get(self, name: str) -> np.ndarray:
        return getattr(self, name)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return 0.299 * image[:, :, 0] + 0.587 * image[:, :, 1] + 0.114 * image[:, :, 2]


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resample; identity when sizes already match.

    Output pixel centers map to source coordinates
    (i + 0.5) * scale - 0.5, clamped to the valid range.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    src_y = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    src_x = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (src_y - y0).reshape(-1, 1)
    fx = (src_x - x0).reshape(1, -1)
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def tiny_image(image: np.ndarray) -> np.ndarray:
    """Bilinear downsample to 16x16x3, row-major flatten (y, x, channel)."""
    return bilinear_resize(image, TINY_SIZE, TINY_SIZE).ravel()


def rgb_histogram(image: np.ndarray) -> np.ndarray:
    """Joint 8x8x8 histogram over uniform bins of [0,1]^3, L1-normalized."""
    image = np.asarray(image, dtype=np.float64)
    bins = np.minimum((image * RGB_BINS).astype(np.int64), RGB_BINS - 1)
    code = (bins[:, :, 0] * RGB_BINS + bins[:, :, 1]) * RGB_BINS + bins[:, :, 2]
    hist = np.bincount(code.ravel(), minlength=RGB_BINS**3).astype(np.float64)
    return hist / hist.sum()


@lru_cache(maxsize=4)
def _gist_bank(size: int) -> np.ndarray:
    """Log-Gabor transfer functions, shape (scales*orientations, size, size).

    Radial term exp(-log^2(r/f0) / (2 log^2 sigma_ratio)) is exactly zero
    at DC, so every filter is insensitive to the image mean.
    """
    fx = np.fft.fftfreq(size)[None, :]
    fy = np.fft.fftfreq(size)[:, None]
    r = np.hypot(fx, fy)
    phi = np.arctan2(fy, fx)
    denom = 2.0 * np.log(_GIST_SIGMA_RATIO) ** 2
    bank = np.empty((GIST_SCALES * GIST_ORIENTATIONS, size, size))
    with np.errstate(divide="ignore"):
        log_r = np.where(r > 0, np.log(r), 0.0)
    for s in range(GIST_SCALES):
        f0 = _GIST_BASE_FREQ / (2**s)
        radial = np.exp(-((log_r - np.log(f0)) ** 2) / denom)
        radial[r == 0] = 0.0
        for o in range(GIST_ORIENTATIONS):
            theta = o * np.pi / GIST_ORIENTATIONS
            d = np.mod(phi - theta + np.pi, 2 * np.pi) - np.pi
            bank[s * GIST_ORIENTATIONS + o] = radial * np.exp(
                -(d**2) / (2 * _GIST_SIGMA_THETA**2)
            )
    return bank


def gist_descriptor(image: np.ndarray) -> np.ndarray:
    """Filter-bank grid averages: 4 scales x 8 orientations x 4x4 grid = 512."""
    gray = bilinear_resize(to_grayscale(image), GIST_SIZE, GIST_SIZE)
    spectrum = np.fft.fft2(gray)
    bank = _gist_bank(GIST_SIZE)
    cell = GIST_SIZE // GIST_GRID
    out = np.empty(bank.shape[0] * GIST_GRID * GIST_GRID)
    for i, transfer in enumerate(bank):
        resp = np.abs(np.fft.ifft2(spectrum * transfer))
        means = resp.reshape(GIST_GRID, cell, GIST_GRID, cell).mean(axis=(1, 3))
        out[i * GIST_GRID**2 : (i + 1) * GIST_GRID**2] = means.ravel()
    return out


def dense_gradient_descriptors(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stride-8 dense patch descriptors and their patch-center positions.

    Each descriptor covers 4x4 cells of 8x8 pixels; each cell is an 8-bin
    magnitude-weighted gradient-orientation histogram; rows L2-normalized.
    Returns (descriptors (N, 128), centers (N, 2) as (x, y)).
    """
    gray = to_grayscale(image)
    h, w = gray.shape
    ch, cw = h // CELL, w // CELL
    if ch < GRID_CELLS or cw < GRID_CELLS:
        return np.empty((0, GRID_CELLS**2 * N_ORI)), np.empty((0, 2))

    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    obin = np.minimum((ori / (2 * np.pi / N_ORI)).astype(np.int64), N_ORI - 1)

    hh, ww = ch * CELL, cw * CELL
    cell_row = np.repeat(np.arange(ch), CELL)[:, None]
    cell_col = np.repeat(np.arange(cw), CELL)[None, :]
    code = (cell_row * cw + cell_col) * N_ORI + obin[:hh, :ww]
    cell_hist = np.bincount(
        code.ravel(), weights=mag[:hh, :ww].ravel(), minlength=ch * cw * N_ORI
    ).reshape(ch, cw, N_ORI)

    windows = np.lib.stride_tricks.sliding_window_view(
        cell_hist, (GRID_CELLS, GRID_CELLS), axis=(0, 1)
    )
    py, px = windows.shape[:2]
    desc = windows.transpose(0, 1, 3, 4, 2).reshape(py * px, -1)
    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = desc / np.where(norms == 0, 1.0, norms)

    gx0, gy0 = np.meshgrid(np.arange(px), np.arange(py))
    centers = np.stack(
        [gx0.ravel() * CELL + PATCH / 2.0, gy0.ravel() * CELL + PATCH / 2.0], axis=1
    )
    return desc, centers


def kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = 50, tol: float = 1e-4) -> np.ndarray:
    """Plain Lloyd k-means with seeded k-means++ init.

    Stops after max_iter iterations or when the largest centroid shift
    falls below tol. Empty clusters are re-seeded from the point currently
    farthest from its center. Deterministic given (points, k, seed).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise ValueError(f"need at least {k} points, got {n}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)
    for _ in range(max_iter):
        d2 = _sq_distances(points, centers)
        assign = np.argmin(d2, axis=1)
        new_centers = np.zeros_like(centers)
        np.add.at(new_centers, assign, points)
        counts = np.bincount(assign, minlength=k).astype(np.float64)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            nearest = d2[np.arange(n), assign]
            for j in empty:
                steal = int(np.argmax(nearest))
                new_centers[assign[steal]] -= points[steal]
                counts[assign[steal]] -= 1
                new_centers[j] = points[steal]
                counts[j] = 1
                assign[steal] = j
                nearest[steal] = -1.0
        new_centers /= counts[:, None]
        shift = np.max(np.linalg.norm(new_centers - centers, axis=1))
        centers = new_centers
        if shift < tol:
            break
    return centers


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random()))
            idx = min(idx, n - 1)
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (points**2).sum(axis=1, keepdims=True)
        - 2.0 * points @ centers.T
        + (centers**2).sum(axis=1)
    )
    return np.maximum(d2, 0.0)


def quantize(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center index per point; ties toward the smaller index."""
    return np.argmin(_sq_distances(points, centers), axis=1).astype(np.int32)


def build_codebook(train_images, V: int, seed: int) -> Codebook:
    descs = [dense_gradient_descriptors(img)[0] for img in train_images]
    stacked = np.concatenate([d for d in descs if d.size], axis=0) if descs else np.empty((0, 128))
    if stacked.shape[0] < V:
        raise ValueError(
            f"only {stacked.shape[0]} local descriptors available for a {V}-word codebook"
        )
    return Codebook(kmeans(stacked, V, seed))


def spatial_pyramid_descriptor(image: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Quantized-word histograms at pyramid levels 1x1, 2x2, 4x4.

    Each level's block is L1-normalized independently; an image too small
    to yield any local descriptor maps to the zero vector.
    """
    h, w = image.shape[:2]
    desc, pos = dense_gradient_descriptors(image)
    V = codebook.size
    total = V * sum(n * n for n in PYRAMID_LEVELS)
    if desc.shape[0] == 0:
        return np.zeros(total)
    words = quantize(desc, codebook.centers)
    out = np.empty(total)
    offset = 0
    for n in PYRAMID_LEVELS:
        cx = np.minimum((pos[:, 0] * n / w).astype(np.int64), n - 1)
        cy = np.minimum((pos[:, 1] * n / h).astype(np.int64), n - 1)
        code = (cy * n + cx) * V + words
        hist = np.bincount(code, minlength=n * n * V).astype(np.float64)
        out[offset : offset + n * n * V] = hist / hist.sum()
        offset += n * n * V
    return out


def global_features(image: np.ndarray, codebook: Codebook) -> GlobalFeatureSet:
    return GlobalFeatureSet(
        tiny=tiny_image(image),
        rgb_hist=rgb_histogram(image),
        gist=gist_descriptor(image),
        pyramid=spatial_pyramid_descriptor(image, codebook),
    )
