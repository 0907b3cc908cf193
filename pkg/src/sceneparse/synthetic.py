"""Seeded synthetic outdoor-scene dataset for desk-scale experiments.

Scenes follow a context-informative grammar: a sky region always sits
above a sampled horizon with ground below it, a road band runs through
the ground, tree blobs sit on the ground, and cloud blobs float in the
sky. Cloud and road share a deliberately similar gray so that visual
evidence alone confuses them while spatial context does not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import save_label_map

CLASS_NAMES = ("sky", "ground", "road", "tree", "cloud")

# class index -> base RGB
_BASE_COLORS = {
    1: (0.55, 0.75, 0.95),
    2: (0.35, 0.65, 0.30),
    3: (0.55, 0.55, 0.55),
    4: (0.10, 0.40, 0.12),
    5: (0.60, 0.60, 0.58),
}


@dataclass(frozen=True)
class SyntheticSceneSpec:
    width: int = 64
    height: int = 64
    train_count: int = 60
    test_count: int = 10
    seed: int = 0
    horizon_range: tuple[float, float] = (0.20, 0.65)
    road_width_range: tuple[float, float] = (0.16, 0.30)
    tree_count_range: tuple[int, int] = (1, 3)
    tree_radius_range: tuple[int, int] = (4, 9)
    cloud_count_range: tuple[int, int] = (1, 2)
    cloud_radius_range: tuple[int, int] = (3, 6)
    texture_noise: float = 0.04
    # Scene-level brightness variation doubles as a retrieval confound:
    # intensity-sensitive descriptors can rank a differently-laid-out scene
    # first, so tiny retrieval sets carry real risk of a misleading prior.
    brightness_jitter: float = 0.18
    colors: dict = field(default_factory=lambda: dict(_BASE_COLORS))

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("scenes must be at least 16x16")
        if self.train_count < 1 or self.test_count < 1:
            raise ValueError("need at least one train and one test scene")


def _ellipse_mask(h, w, cy, cx, ry, rx):
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    return ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0


def generate_scene(spec: SyntheticSceneSpec, rng: np.random.Generator):
    """One (image, label map) pair; layout and texture drawn from rng."""
    h, w = spec.height, spec.width
    labels = np.empty((h, w), dtype=np.int32)

    horizon = int(h * rng.uniform(*spec.horizon_range))
    labels[:horizon, :] = 1
    labels[horizon:, :] = 2

    road_half = int(w * rng.uniform(*spec.road_width_range) / 2)
    road_cx = int(w * rng.uniform(0.25, 0.75))
    x0, x1 = max(0, road_cx - road_half), min(w, road_cx + road_half)
    labels[horizon:, x0:x1] = 3

    for _ in range(int(rng.integers(spec.tree_count_range[0], spec.tree_count_range[1] + 1))):
        r = int(rng.integers(spec.tree_radius_range[0], spec.tree_radius_range[1] + 1))
        cy = int(rng.uniform(horizon + r, h - 1))
        cx = int(rng.uniform(0, w - 1))
        mask = _ellipse_mask(h, w, cy, cx, r, r)
        mask[:horizon, :] = False  # trees never rise above the horizon
        labels[mask] = 4

    for _ in range(int(rng.integers(spec.cloud_count_range[0], spec.cloud_count_range[1] + 1))):
        r = int(rng.integers(spec.cloud_radius_range[0], spec.cloud_radius_range[1] + 1))
        if horizon <= 2 * r:
            continue
        cy = int(rng.uniform(r, horizon - r))
        cx = int(rng.uniform(0, w - 1))
        mask = _ellipse_mask(h, w, cy, cx, max(1, r // 2), r)
        mask[horizon:, :] = False
        labels[mask] = 5

    image = np.empty((h, w, 3))
    for c, color in spec.colors.items():
        image[labels == c] = color
    image += rng.normal(0.0, spec.texture_noise, size=image.shape)
    image += rng.uniform(-spec.brightness_jitter, spec.brightness_jitter)
    return np.clip(image, 0.0, 1.0), labels


def save_image(path, image: np.ndarray) -> None:
    arr = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def generate_dataset(spec: SyntheticSceneSpec, out_dir) -> Path:
    """Write images, label maps, class list, and manifest; returns the
    manifest path. Byte-identical for identical specs."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    classes_path = out_dir / "classes.txt"
    classes_path.write_text("".join(f"{name}\n" for name in CLASS_NAMES))

    lines = ["classes=classes.txt"]
    for split, count in (("train", spec.train_count), ("test", spec.test_count)):
        for i in range(count):
            image, labels = generate_scene(spec, rng)
            image_rel = f"images/{split}_{i:04d}.png"
            label_rel = f"labels/{split}_{i:04d}.png"
            save_image(out_dir / image_rel, image)
            save_label_map(out_dir / label_rel, labels)
            lines.append(f"{split}\t{image_rel}\t{label_rel}")

    manifest = out_dir / "manifest.txt"
    manifest.write_text("".join(f"{ln}\n" for ln in lines))
    return manifest
