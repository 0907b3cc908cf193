"""Graph-based superpixel segmentation, adjacency, and spatial block grids.

Segmentation follows the classic efficient graph-based algorithm: Gaussian
pre-smoothing, an 8-connected grid graph weighted by Euclidean RGB
distance, ascending-weight union-find merging with the adaptive threshold
Int(C) + k/|C|, and a final pass absorbing components below min_size.

The hot union-find loop runs in a compiled extension when available; a
pure-Python twin with identical semantics is selected otherwise (or when
SCENEPARSE_PURE=1 is set). Both paths consume the same pre-sorted edge
list, so their outputs are bit-identical.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from . import _felz_py

if os.environ.get("SCENEPARSE_PURE"):
    _kernel = _felz_py
    BACKEND = "pure"
else:
    try:
        from . import _felz as _kernel  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _kernel = _felz_py
        BACKEND = "pure"

# Edge weights are computed on the 8-bit intensity scale (values * 255) so
# the threshold constant k keeps its conventional meaning.
_INTENSITY_SCALE = 255.0

# Neighbor offsets (dx, dy) defining edge construction order: east, south,
# south-east, south-west; within an offset, edges follow raster order.
_OFFSETS = ((1, 0), (0, 1), (1, 1), (-1, 1))


@dataclass(frozen=True)
class SegmentationParams:
    sigma: float = 0.8
    k_scale: float = 200.0
    min_size: int = 100

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.k_scale <= 0:
            raise ValueError("k_scale must be positive")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")

    def effective_k(self, width: int, height: int) -> float:
        d = max(width, height)
        return self.k_scale * max(1.0, math.sqrt(d / 640.0))

    def cache_token(self) -> str:
        return f"sigma={self.sigma!r},k={self.k_scale!r},min={self.min_size}"


class SuperpixelSegmentation:
    """A superpixel id raster plus per-superpixel metadata.

    Ids are contiguous 0..L-1 in order of first appearance in raster scan.
    Adjacency uses 4-connectivity and is symmetric with no self-loops.
    """

    def __init__(self, id_map: np.ndarray):
        id_map = np.asarray(id_map, dtype=np.int32)
        if id_map.ndim != 2:
            raise ValueError("id_map must be 2-d")
        n = int(id_map.max()) + 1
        present = np.bincount(id_map.ravel(), minlength=n)
        if id_map.min() < 0 or np.any(present == 0):
            raise ValueError("superpixel ids must be contiguous 0..L-1")
        self.id_map = id_map
        self.n_superpixels = n
        self.sizes = present.astype(np.int64)

        h, w = id_map.shape
        xs = np.tile(np.arange(w, dtype=np.float64), h)
        ys = np.repeat(np.arange(h, dtype=np.float64), w)
        flat = id_map.ravel()
        cx = np.bincount(flat, weights=xs, minlength=n) / self.sizes
        cy = np.bincount(flat, weights=ys, minlength=n) / self.sizes
        self.centroids = np.stack([cx, cy], axis=1)

        self.adjacency_pairs = _adjacency_pairs(id_map, n)
        self.block_ids: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.id_map.shape

    def neighbor_sets(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in range(self.n_superpixels)]
        for a, b in self.adjacency_pairs:
            out[a].add(int(b))
            out[b].add(int(a))
        return out


def _adjacency_pairs(id_map: np.ndarray, n: int) -> np.ndarray:
    """Unique 4-connected neighbor id pairs (a < b), shape (E, 2)."""
    right = np.stack([id_map[:, :-1].ravel(), id_map[:, 1:].ravel()], axis=1)
    down = np.stack([id_map[:-1, :].ravel(), id_map[1:, :].ravel()], axis=1)
    pairs = np.concatenate([right, down], axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if pairs.size == 0:
        return np.empty((0, 2), dtype=np.int32)
    lo = pairs.min(axis=1).astype(np.int64)
    hi = pairs.max(axis=1).astype(np.int64)
    keys = np.unique(lo * n + hi)
    return np.stack([keys // n, keys % n], axis=1).astype(np.int32)


def adjacency(seg: SuperpixelSegmentation) -> list[set[int]]:
    """Neighbor sets: a, b adjacent iff some pixel of a 4-touches a pixel of b."""
    return seg.neighbor_sets()


def _validate_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("expected an H x W x 3 image")
    if image.shape[0] < 16 or image.shape[1] < 16:
        raise ValueError("image smaller than 16x16")
    if not np.all(np.isfinite(image)) or image.min() < 0 or image.max() > 1:
        raise ValueError("image values must be finite and in [0, 1]")
    return image


def _grid_edges(smoothed: np.ndarray):
    """8-connected grid edges in fixed construction order + RGB weights."""
    h, w, _ = smoothed.shape
    idx = np.arange(h * w, dtype=np.int32).reshape(h, w)
    ea_parts, eb_parts, wt_parts = [], [], []
    for dx, dy in _OFFSETS:
        sx = slice(max(0, -dx), w - max(0, dx))
        tx = slice(max(0, dx), w - max(0, -dx))
        sy = slice(max(0, -dy), h - max(0, dy))
        ty = slice(max(0, dy), h - max(0, -dy))
        a = idx[sy, sx].ravel()
        b = idx[ty, tx].ravel()
        diff = smoothed[sy, sx] - smoothed[ty, tx]
        wt = np.sqrt(np.einsum("ijc,ijc->ij", diff, diff)).ravel()
        ea_parts.append(a)
        eb_parts.append(b)
        wt_parts.append(wt)
    return (
        np.concatenate(ea_parts),
        np.concatenate(eb_parts),
        np.concatenate(wt_parts),
    )


def segment(image: np.ndarray, params: SegmentationParams) -> SuperpixelSegmentation:
    image = _validate_image(image)
    h, w, _ = image.shape
    smoothed = np.empty_like(image)
    for c in range(3):
        smoothed[:, :, c] = gaussian_filter(image[:, :, c], params.sigma, mode="reflect")
    smoothed = smoothed * _INTENSITY_SCALE

    ea, eb, wt = _grid_edges(smoothed)
    order = np.argsort(wt, kind="stable")
    roots = _kernel.segment_edges(
        h * w,
        np.ascontiguousarray(ea[order]),
        np.ascontiguousarray(eb[order]),
        np.ascontiguousarray(wt[order]),
        params.effective_k(w, h),
        min(params.min_size, h * w),
    )
    return SuperpixelSegmentation(_relabel_first_appearance(roots).reshape(h, w))


def _relabel_first_appearance(roots: np.ndarray) -> np.ndarray:
    uniques, first = np.unique(roots, return_index=True)
    order = np.argsort(first, kind="stable")
    lut = np.empty(int(roots.max()) + 1, dtype=np.int32)
    lut[uniques[order]] = np.arange(len(uniques), dtype=np.int32)
    return lut[roots]


class BlockGrid:
    """An exact tiling of the image into rows x cols rectangles.

    Rectangles are half-open [x0, x1) x [y0, y1); width/height remainders
    go to the last column/row. Blocks index row-major: k = row * cols + col.
    """

    def __init__(self, rows: int, cols: int, width: int, height: int):
        if rows < 1 or cols < 1:
            raise ValueError("grid needs at least 1 row and 1 column")
        if width < cols or height < rows:
            raise ValueError("more blocks than pixels")
        self.rows = rows
        self.cols = cols
        self.width = width
        self.height = height
        bw, bh = width // cols, height // rows
        self.x_bounds = np.array([i * bw for i in range(cols)] + [width], dtype=np.int64)
        self.y_bounds = np.array([i * bh for i in range(rows)] + [height], dtype=np.int64)

    @property
    def K(self) -> int:
        return self.rows * self.cols

    def block_of(self, x: float, y: float) -> int:
        col = int(np.searchsorted(self.x_bounds, x, side="right")) - 1
        row = int(np.searchsorted(self.y_bounds, y, side="right")) - 1
        col = min(max(col, 0), self.cols - 1)
        row = min(max(row, 0), self.rows - 1)
        return row * self.cols + col

    def blocks_of(self, points: np.ndarray) -> np.ndarray:
        """Vectorized block_of for an (N, 2) array of (x, y) points."""
        cols = np.searchsorted(self.x_bounds, points[:, 0], side="right") - 1
        rows = np.searchsorted(self.y_bounds, points[:, 1], side="right") - 1
        cols = np.clip(cols, 0, self.cols - 1)
        rows = np.clip(rows, 0, self.rows - 1)
        return (rows * self.cols + cols).astype(np.int32)

    def cache_token(self) -> str:
        return f"{self.rows}x{self.cols}@{self.width}x{self.height}"


def assign_blocks(seg: SuperpixelSegmentation, grid: BlockGrid) -> SuperpixelSegmentation:
    """Assign every superpixel (and thereby all its pixels) to the block
    containing its centroid. Mutates and returns seg."""
    h, w = seg.shape
    if (grid.width, grid.height) != (w, h):
        raise ValueError(
            f"grid is {grid.width}x{grid.height} but segmentation is {w}x{h}"
        )
    seg.block_ids = grid.blocks_of(seg.centroids)
    return seg
