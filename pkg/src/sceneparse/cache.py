"""Content-addressed artifact cache for per-image pipeline stages.

Keys hash the pipeline version tag, the stage name, the content hash of
the inputs, and a parameter token, so changing any algorithm constant
invalidates exactly the dependent artifacts. Artifacts are stored as flat
binary record bundles named <stage>-<digest>.bin.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import PIPELINE_VERSION
from . import records

_hash_memo: dict[Path, str] = {}


def content_hash(path) -> str:
    path = Path(path).resolve()
    if path not in _hash_memo:
        _hash_memo[path] = hashlib.sha256(path.read_bytes()).hexdigest()
    return _hash_memo[path]


class ArtifactCache:
    """Disk cache with hit/miss counters; a None root disables persistence."""

    def __init__(self, root=None):
        self.root = Path(root) if root else None
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def key(self, stage: str, *parts) -> str:
        text = "\x1f".join([PIPELINE_VERSION, stage, *map(str, parts)])
        return f"{stage}-{hashlib.sha256(text.encode()).hexdigest()}"

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.bin"

    def get_or_compute(self, key: str, compute) -> dict[str, np.ndarray]:
        """Load the named-array bundle under key, or compute and store it."""
        if self.root:
            path = self._path(key)
            if path.exists():
                self.hits += 1
                return records.read_bundle(path)
        value = compute()
        self.misses += 1
        if self.root:
            records.write_bundle(self._path(key), value)
        return value

    def reset_counters(self) -> None:
        self.hits = 0
        self.misses = 0
