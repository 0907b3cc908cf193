"""Pipeline configuration: defaults, flat key=value files, flag overrides.

Precedence: explicit CLI flag > SCENEPARSE_CACHE env var (cache dir only)
> config file > built-in default.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

CACHE_ENV_VAR = "SCENEPARSE_CACHE"


@dataclass
class PipelineConfig:
    manifest: str = ""
    cache_dir: str = ""
    seed: int = 0
    # segmentation
    sigma: float = 0.8
    k_scale: float = 200.0
    min_size: int = 100
    # spatial blocks
    block_rows: int = 4
    block_cols: int = 4
    # retrieval
    alpha: int = 100
    rare_classes: int = 9
    rare_alpha: int = 0  # 0 -> same as alpha
    # co-occurrence priors
    sclp_mode: str = "presence"
    eps: float = 1.0
    # visual model
    epochs: int = 200
    hidden: int = 16
    batch_size: int = 32
    learning_rate: float = 0.01
    mrmr_count: int = 50
    mrmr_w: float = 0.5
    codebook_size: int = 256
    # fusion
    w_const: float = 0.0
    w_global: float = 0.25
    w_local: float = 0.25
    w_visual: float = 0.5
    weight_mode: str = "voter"
    # evaluation
    feature_noise: float = 0.0
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.sigma <= 0 or self.k_scale <= 0 or self.min_size < 1:
            raise ValueError("invalid segmentation parameters")
        if self.block_rows < 1 or self.block_cols < 1:
            raise ValueError("block grid needs at least 1x1 blocks")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.rare_classes < 0 or self.rare_alpha < 0:
            raise ValueError("rare-class settings must be nonnegative")
        if self.sclp_mode not in ("presence", "pixel-pair"):
            raise ValueError(f"unknown sclp mode {self.sclp_mode!r}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.epochs < 1 or self.hidden < 1 or self.batch_size < 1:
            raise ValueError("invalid classifier hyperparameters")
        if self.mrmr_count < 1 or not 0 < self.mrmr_w:
            raise ValueError("invalid feature-selection settings")
        if self.codebook_size < 2:
            raise ValueError("codebook needs >= 2 words")
        if min(self.w_global, self.w_local, self.w_visual) < 0:
            raise ValueError("fusion weights must be nonnegative")
        if self.weight_mode not in ("voter", "receiver"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")
        if self.feature_noise < 0:
            raise ValueError("feature_noise must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def effective_rare_alpha(self) -> int:
        return self.rare_alpha if self.rare_alpha else self.alpha

    def resolved_cache_dir(self) -> Path | None:
        return Path(self.cache_dir) if self.cache_dir else None

    # Fields with no effect on computed results; kept out of the model
    # provenance echo so runs differing only in them stay byte-identical.
    _NON_SEMANTIC = ("cache_dir", "workers")

    def echo(self) -> str:
        """Canonical key=value text of the result-affecting fields."""
        items = [
            f"{f.name}={getattr(self, f.name)}"
            for f in dataclasses.fields(self)
            if f.name not in self._NON_SEMANTIC
        ]
        return "\n".join(items) + "\n"


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    """Parse a flat key=value file; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def build_config(file_path=None, overrides: dict | None = None) -> PipelineConfig:
    """Merge defaults, config file, cache env var, and explicit overrides."""
    values: dict = {}
    if file_path:
        values.update(read_config_file(file_path))
    env_cache = os.environ.get(CACHE_ENV_VAR)
    if env_cache:
        values["cache_dir"] = env_cache
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = val
    return PipelineConfig(**values)
