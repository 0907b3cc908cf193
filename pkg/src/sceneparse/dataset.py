"""Dataset loading: images, per-pixel label maps, class vocabulary.

Label maps are 8-bit single-channel rasters in a lossless format (PNG);
index 0 means "unlabeled" and is excluded from every statistic. The class
vocabulary is a plain text file, one name per line; line number = class
index starting at 1.

Manifest format (line-oriented text):

    classes=<path to class list>
    train<TAB><image path><TAB><label map path>
    test<TAB><image path><TAB><label map path>
    ...

Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class ManifestError(ValueError):
    """Raised when a manifest or one of its entries fails validation."""


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered class names; votable indices are 1..M, 0 is unlabeled."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise ManifestError("vocabulary needs at least 2 classes")
        if len(set(self.names)) != len(self.names):
            raise ManifestError("class names must be unique")

    @property
    def M(self) -> int:
        return len(self.names)

    def name_of(self, index: int) -> str:
        if not 1 <= index <= self.M:
            raise IndexError(f"class index {index} out of range 1..{self.M}")
        return self.names[index - 1]

    def index_of(self, name: str) -> int:
        return self.names.index(name) + 1

    @classmethod
    def from_file(cls, path) -> "ClassVocabulary":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"class list not found: {path}")
        names = [line.strip() for line in path.read_text().splitlines() if line.strip()]
        return cls(tuple(names))


@dataclass(frozen=True)
class DatasetEntry:
    split: str
    image_path: Path
    label_path: Path


@dataclass(frozen=True)
class Dataset:
    vocabulary: ClassVocabulary
    entries: tuple[DatasetEntry, ...]

    def split(self, tag: str) -> tuple[DatasetEntry, ...]:
        return tuple(e for e in self.entries if e.split == tag)


def load_image(path) -> np.ndarray:
    """Load an RGB image as float64 H x W x 3 with values in [0, 1].

    Grayscale is replicated to 3 channels; >3-channel images are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            img = img.convert("L")
            arr = np.asarray(img, dtype=np.float64) / 255.0
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        elif img.mode == "RGB":
            arr = np.asarray(img, dtype=np.float64) / 255.0
        elif img.mode in ("P", "1"):
            arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        else:
            raise ManifestError(f"{path}: unsupported image mode {img.mode!r} (expect RGB or grayscale)")
    if arr.shape[0] < 16 or arr.shape[1] < 16:
        raise ManifestError(f"{path}: image smaller than 16x16")
    return arr


def load_label_map(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"label map not found: {path}")
    with Image.open(path) as img:
        if img.mode not in ("L", "P"):
            raise ManifestError(f"{path}: label map must be 8-bit single channel, got {img.mode!r}")
        return np.asarray(img.convert("L") if img.mode == "P" else img, dtype=np.int32)


def save_label_map(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 255:
        raise ValueError("label indices must fit in 8 bits")
    Image.fromarray(labels.astype(np.uint8), mode="L").save(path, format="PNG")


def image_size(path) -> tuple[int, int]:
    """(width, height) from the file header without decoding pixel data."""
    with Image.open(path) as img:
        return img.size


def load_dataset(manifest_path) -> Dataset:
    """Parse and validate a manifest; label ranges are checked eagerly."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    lines = [ln for ln in manifest_path.read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("classes="):
        raise ManifestError(f"{manifest_path}: first line must be 'classes=<path>'")
    vocab = ClassVocabulary.from_file(_resolve(base, lines[0][len("classes=") :].strip()))

    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 3:
            raise ManifestError(f"{manifest_path}:{lineno}: expected 'split<TAB>image<TAB>labels'")
        split, image_rel, label_rel = fields
        if split not in ("train", "test"):
            raise ManifestError(f"{manifest_path}:{lineno}: unknown split {split!r}")
        entry = DatasetEntry(split, _resolve(base, image_rel), _resolve(base, label_rel))
        _validate_entry(entry, vocab.M)
        entries.append(entry)
    return Dataset(vocab, tuple(entries))


def _resolve(base: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


def _validate_entry(entry: DatasetEntry, M: int) -> None:
    for p in (entry.image_path, entry.label_path):
        if not p.exists():
            raise FileNotFoundError(f"manifest references missing file: {p}")
    iw, ih = image_size(entry.image_path)
    labels = load_label_map(entry.label_path)
    lh, lw = labels.shape
    if (lw, lh) != (iw, ih):
        raise ManifestError(
            f"{entry.image_path}: image is {iw}x{ih} but label map {entry.label_path} is {lw}x{lh}"
        )
    top = int(labels.max())
    if top > M:
        raise ManifestError(
            f"{entry.label_path}: label index {top} exceeds class count M={M}"
        )


def class_pixel_counts(dataset: Dataset, split: str) -> np.ndarray:
    """Per-class pixel counts over a split; counts[c-1] is class c, index 0 excluded."""
    entries = dataset.split(split)
    if not entries:
        raise ValueError(f"split {split!r} is empty")
    M = dataset.vocabulary.M
    counts = np.zeros(M, dtype=np.int64)
    for entry in entries:
        labels = load_label_map(entry.label_path)
        counts += np.bincount(labels.ravel(), minlength=M + 1)[1:]
    return counts


def rare_classes(counts: np.ndarray, n: int) -> np.ndarray:
    """The n class indices with the smallest pixel counts, ascending.

    Ties break toward the smaller class index.
    """
    counts = np.asarray(counts)
    M = counts.shape[0]
    if not 1 <= n <= M:
        raise ValueError(f"rare-class count {n} outside 1..{M}")
    order = np.lexsort((np.arange(1, M + 1), counts))
    return order[:n] + 1
