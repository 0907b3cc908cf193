"""End-to-end orchestration: training precomputation, query parsing,
evaluation, and parameter sweeps.

Training caches per-image segmentations, whole-image descriptors, and
superpixel features by content hash, builds the codebooks, runs feature
selection, trains the per-class networks, and writes a versioned model
bundle. Parsing a query retrieves its training subset, extracts the
co-occurrence priors from that subset only, and fuses contextual with
visual probabilities.
"""

from __future__ import annotations

import dataclasses
import hashlib
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import PIPELINE_VERSION, records
from .cache import ArtifactCache, content_hash
from .config import PipelineConfig
from .context import (
    GlobalCooccurrence,
    LocalCooccurrence,
    extract_global,
    extract_local,
    image_context_summary,
    summary_block_histogram,
)
from .dataset import (
    Dataset,
    load_dataset,
    load_image,
    load_label_map,
    rare_classes,
)
from .descriptors import (
    Codebook,
    GlobalFeatureSet,
    build_codebook,
    global_features,
)
from .fields import ProbabilityField
from .inference import FusionWeights, assign_labels, fuse, vote_global, vote_local
from .metrics import ConfusionMatrix, compute_metrics
from .nnet import SigmoidNet
from .retrieval import DescriptorIndex, RetrievalConfig, RetrievalSet, retrieve, retrieve_rare
from .segmentation import BlockGrid, SegmentationParams, SuperpixelSegmentation, assign_blocks, segment
from .visual import (
    ClassNet,
    MrmrSelection,
    VisualClassifier,
    build_selection,
    build_texton_codebook,
    predict_visual,
    superpixel_features,
    train_classifier,
)

_SUMMARY_KEYS = ("class_counts", "sp_labels", "centroids", "pair_labels", "shape")


class PipelineStageError(RuntimeError):
    """A training stage failed; the message names the stage."""


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(f"train stage {name!r} failed: {exc}") from exc


def _stage_seed(seed: int, stage: int) -> int:
    return int(np.random.SeedSequence([seed, stage]).generate_state(1)[0])


def _codebook_token(cb: Codebook) -> str:
    return hashlib.sha256(cb.centers.astype("<f4").tobytes()).hexdigest()


def _f4_roundtrip(arr: np.ndarray) -> np.ndarray:
    """Match the on-disk f4 precision so in-memory and reloaded models agree."""
    return arr.astype(np.float32).astype(np.float64)


@dataclass
class TrainedModel:
    class_names: tuple[str, ...]
    config_echo: str
    sift_codebook: Codebook
    texton_codebook: Codebook
    index: DescriptorIndex
    class_presence: np.ndarray  # (N, M) bool
    class_pixel_totals: np.ndarray  # (M,)
    summaries: list[dict]
    selection: MrmrSelection
    classifier: VisualClassifier
    feature_std: np.ndarray
    train_paths: tuple[str, ...]

    @property
    def M(self) -> int:
        return len(self.class_names)

    @property
    def n_train(self) -> int:
        return len(self.summaries)


@dataclass
class ParseResult:
    labels: np.ndarray
    seg: SuperpixelSegmentation
    visual: ProbabilityField
    global_field: ProbabilityField
    local_field: ProbabilityField
    fused: ProbabilityField
    retrieval: RetrievalSet
    rare_sets: dict[int, RetrievalSet] | None
    global_prior: GlobalCooccurrence
    local_prior: LocalCooccurrence


def _cached_segmentation(cache, image, img_hash, params) -> SuperpixelSegmentation:
    key = cache.key("seg", img_hash, params.cache_token())
    rec = cache.get_or_compute(key, lambda: {"id_map": segment(image, params).id_map})
    return SuperpixelSegmentation(rec["id_map"])


def _cached_descriptors(cache, image, img_hash, sift_cb) -> GlobalFeatureSet:
    key = cache.key("gdesc", img_hash, _codebook_token(sift_cb))

    def compute():
        fs = global_features(image, sift_cb)
        return {name: fs.get(name).astype(np.float32) for name in ("tiny", "rgb_hist", "gist", "pyramid")}

    rec = cache.get_or_compute(key, compute)
    return GlobalFeatureSet(**{k: v.astype(np.float64) for k, v in rec.items()})


def _cached_features(cache, image, img_hash, seg, params, texton_cb) -> np.ndarray:
    key = cache.key("spfeat", img_hash, params.cache_token(), _codebook_token(texton_cb))
    rec = cache.get_or_compute(
        key, lambda: {"features": superpixel_features(image, seg, texton_cb)}
    )
    return rec["features"]


def train(cfg: PipelineConfig, cache: ArtifactCache | None = None):
    """Run all training-side precomputation; returns (model, cache).

    The model is saved to and reloaded from its serialized form before
    being returned, so in-memory behavior matches a later load exactly.
    """
    if cache is None:
        cache = ArtifactCache(cfg.resolved_cache_dir())
    with _stage("load-dataset"):
        ds = load_dataset(cfg.manifest)
        entries = ds.split("train")
        if not entries:
            raise ValueError("manifest has no train entries")
        M = ds.vocabulary.M
        params = SegmentationParams(cfg.sigma, cfg.k_scale, cfg.min_size)
        images = [load_image(e.image_path) for e in entries]
        label_maps = [load_label_map(e.label_path) for e in entries]
        img_hashes = [content_hash(e.image_path) for e in entries]
        label_hashes = [content_hash(e.label_path) for e in entries]
        joined = ",".join(img_hashes)

    with _stage("segmentation"):
        segs = [
            _cached_segmentation(cache, img, h, params)
            for img, h in zip(images, img_hashes)
        ]

    with _stage("texton-codebook"):
        tex_key = cache.key("texton_cb", joined, cfg.seed)
        texton_cb = Codebook(
            _f4_roundtrip(
                cache.get_or_compute(
                    tex_key,
                    lambda: {
                        "centers": build_texton_codebook(
                            images, seed=_stage_seed(cfg.seed, 1)
                        ).centers.astype(np.float32)
                    },
                )["centers"]
            )
        )

    with _stage("word-codebook"):
        sift_key = cache.key("sift_cb", joined, cfg.seed, cfg.codebook_size)
        sift_cb = Codebook(
            _f4_roundtrip(
                cache.get_or_compute(
                    sift_key,
                    lambda: {
                        "centers": build_codebook(
                            images, cfg.codebook_size, seed=_stage_seed(cfg.seed, 2)
                        ).centers.astype(np.float32)
                    },
                )["centers"]
            )
        )

    with _stage("global-descriptors"):
        feature_sets = [
            _cached_descriptors(cache, img, h, sift_cb)
            for img, h in zip(images, img_hashes)
        ]
        index = DescriptorIndex(
            {
                name: np.stack([fs.get(name) for fs in feature_sets])
                for name in ("tiny", "rgb_hist", "gist", "pyramid")
            },
            np.arange(len(entries)),
        )

    with _stage("superpixel-features"):
        sp_features = [
            _cached_features(cache, img, h, seg, params, texton_cb)
            for img, h, seg in zip(images, img_hashes, segs)
        ]

    with _stage("context-summaries"):
        summaries = []
        for labels, seg in zip(label_maps, segs):
            s = image_context_summary(labels, seg, M)
            s["shape"] = np.array(labels.shape, dtype=np.int64)
            summaries.append(s)
        per_image_counts = np.stack(
            [s["class_counts"][:, 1:].sum(axis=0) for s in summaries]
        )
        class_presence = per_image_counts > 0
        class_pixel_totals = per_image_counts.sum(axis=0)

    X = np.concatenate(sp_features, axis=0)
    y = np.concatenate([s["sp_labels"] for s in summaries])
    labeled = y > 0
    X_train, y_train = X[labeled], y[labeled]

    with _stage("feature-selection"):
        mrmr_key = cache.key(
            "mrmr", joined, ",".join(label_hashes), params.cache_token(),
            _codebook_token(texton_cb), cfg.mrmr_count, cfg.mrmr_w,
        )
        sel_rec = cache.get_or_compute(
            mrmr_key,
            lambda: _selection_record(
                build_selection(X_train, y_train, M, count=cfg.mrmr_count, w=cfg.mrmr_w)
            ),
        )
        selection = MrmrSelection(
            sel_rec["indices"], sel_rec["mu"], sel_rec["std"], float(sel_rec["w"])
        )

    with _stage("classifier"):
        classifier = train_classifier(
            X_train,
            y_train,
            selection,
            seed=cfg.seed,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            lr=cfg.learning_rate,
            n_hidden=cfg.hidden,
        )

    model = TrainedModel(
        class_names=ds.vocabulary.names,
        config_echo=cfg.echo(),
        sift_codebook=sift_cb,
        texton_codebook=texton_cb,
        index=index,
        class_presence=class_presence,
        class_pixel_totals=class_pixel_totals,
        summaries=summaries,
        selection=selection,
        classifier=classifier,
        feature_std=X_train.std(axis=0),
        train_paths=tuple(str(e.image_path) for e in entries),
    )
    return model, cache


def _selection_record(selection: MrmrSelection) -> dict[str, np.ndarray]:
    return {
        "indices": selection.indices,
        "mu": selection.mu,
        "std": selection.std,
        "w": np.float64(selection.w),
    }


# ---------------------------------------------------------------------------
# Model bundle serialization
# ---------------------------------------------------------------------------


def save_model(model: TrainedModel, path) -> None:
    entries: dict[str, np.ndarray] = {
        "meta/version": records.str_to_array(PIPELINE_VERSION),
        "meta/classes": records.str_to_array("\n".join(model.class_names)),
        "meta/config": records.str_to_array(model.config_echo),
        "meta/train_paths": records.str_to_array("\n".join(model.train_paths)),
        "codebook/sift": model.sift_codebook.centers.astype(np.float32),
        "codebook/texton": model.texton_codebook.centers.astype(np.float32),
        "presence": model.class_presence.astype(np.uint8),
        "class_pixel_totals": model.class_pixel_totals.astype(np.int64),
        "mrmr/indices": model.selection.indices.astype(np.int32),
        "mrmr/mu": model.selection.mu,
        "mrmr/std": model.selection.std,
        "mrmr/w": np.float64(model.selection.w),
        "train/feature_std": model.feature_std,
    }
    for name in ("tiny", "rgb_hist", "gist", "pyramid"):
        entries[f"index/{name}"] = model.index.raw[name].astype(np.float32)
    for i, s in enumerate(model.summaries):
        base = f"ctx/{i:05d}"
        entries[f"{base}/class_counts"] = s["class_counts"].astype(np.int64)
        entries[f"{base}/sp_labels"] = s["sp_labels"].astype(np.int32)
        entries[f"{base}/centroids"] = s["centroids"].astype(np.float64)
        entries[f"{base}/pair_labels"] = s["pair_labels"].astype(np.int32)
        entries[f"{base}/shape"] = s["shape"].astype(np.int64)
    for c, cn in enumerate(model.classifier.nets, start=1):
        base = f"net/{c:03d}"
        entries[f"{base}/W1"] = cn.net.W1
        entries[f"{base}/b1"] = cn.net.b1
        entries[f"{base}/W2"] = cn.net.W2
        entries[f"{base}/b2"] = cn.net.b2
        entries[f"{base}/feat_mean"] = cn.feat_mean
        entries[f"{base}/feat_std"] = cn.feat_std
        entries[f"{base}/loss"] = cn.loss_history
    records.write_bundle(path, entries)


def load_model(path) -> TrainedModel:
    rec = records.read_bundle(path)
    version = records.array_to_str(rec["meta/version"])
    if version != PIPELINE_VERSION:
        raise ValueError(f"model bundle version {version!r} != {PIPELINE_VERSION!r}")
    class_names = tuple(records.array_to_str(rec["meta/classes"]).split("\n"))
    M = len(class_names)

    index = DescriptorIndex(
        {
            name: rec[f"index/{name}"].astype(np.float64)
            for name in ("tiny", "rgb_hist", "gist", "pyramid")
        },
        np.arange(rec["index/tiny"].shape[0]),
    )

    summaries = []
    i = 0
    while f"ctx/{i:05d}/class_counts" in rec:
        base = f"ctx/{i:05d}"
        summaries.append({key: rec[f"{base}/{key}"] for key in _SUMMARY_KEYS})
        i += 1

    selection = MrmrSelection(
        rec["mrmr/indices"], rec["mrmr/mu"], rec["mrmr/std"], float(rec["mrmr/w"])
    )
    nets = []
    for c in range(1, M + 1):
        base = f"net/{c:03d}"
        nets.append(
            ClassNet(
                SigmoidNet.from_params(
                    rec[f"{base}/W1"], rec[f"{base}/b1"],
                    rec[f"{base}/W2"], rec[f"{base}/b2"],
                ),
                rec[f"{base}/feat_mean"],
                rec[f"{base}/feat_std"],
                rec[f"{base}/loss"],
            )
        )

    return TrainedModel(
        class_names=class_names,
        config_echo=records.array_to_str(rec["meta/config"]),
        sift_codebook=Codebook(rec["codebook/sift"].astype(np.float64)),
        texton_codebook=Codebook(rec["codebook/texton"].astype(np.float64)),
        index=index,
        class_presence=rec["presence"].astype(bool),
        class_pixel_totals=rec["class_pixel_totals"],
        summaries=summaries,
        selection=selection,
        classifier=VisualClassifier(nets, selection),
        feature_std=rec["train/feature_std"],
        train_paths=tuple(records.array_to_str(rec["meta/train_paths"]).split("\n")),
    )


# ---------------------------------------------------------------------------
# Query-side parsing
# ---------------------------------------------------------------------------


def extract_priors(model: TrainedModel, cfg: PipelineConfig, rset: RetrievalSet,
                   rare_sets: dict[int, RetrievalSet] | None):
    """Co-occurrence priors from the retrieval multiset (plus, per rare
    class, the union with that class's dedicated retrieval set)."""
    M = model.M
    K = cfg.block_rows * cfg.block_cols
    mult = rset.multiplicities(model.n_train)

    hists = []
    pairs = []
    for s in model.summaries:
        h, w = (int(v) for v in s["shape"])
        grid = BlockGrid(cfg.block_rows, cfg.block_cols, w, h)
        hists.append(summary_block_histogram(s, grid))
        pairs.append(s["pair_labels"])

    gprior = extract_global(hists, M, K, eps=cfg.eps, mode=cfg.sclp_mode, multiplicities=mult)
    lprior = extract_local(pairs, M, eps=cfg.eps, multiplicities=mult)

    if rare_sets:
        gcounts = gprior.counts.copy()
        lcounts = lprior.counts.copy()
        for c, rs in rare_sets.items():
            if rs.cardinality == 0:
                continue
            m2 = rs.multiplicities(model.n_train)
            extra_g = extract_global(hists, M, K, eps=0.0, mode=cfg.sclp_mode, multiplicities=m2)
            extra_l = extract_local(pairs, M, eps=0.0, multiplicities=m2)
            gcounts[c - 1] += extra_g.counts[c - 1]
            lcounts[c - 1] += extra_l.counts[c - 1]
        gprior = GlobalCooccurrence(
            gcounts, _resmooth(gcounts, cfg.eps), cfg.eps, cfg.sclp_mode
        )
        lprior = LocalCooccurrence(lcounts, _resmooth(lcounts, cfg.eps), cfg.eps)
    return gprior, lprior


def _resmooth(counts: np.ndarray, eps: float) -> np.ndarray:
    sm = counts + eps
    tot = sm.sum(axis=-1, keepdims=True)
    M = counts.shape[-1]
    return np.where(tot == 0, 1.0 / M, sm / np.where(tot == 0, 1.0, tot))


def parse_query(
    model: TrainedModel,
    cfg: PipelineConfig,
    image: np.ndarray,
    noise_key: int = 0,
    cache: ArtifactCache | None = None,
    image_hash: str | None = None,
) -> ParseResult:
    """Full query pipeline: retrieve, extract priors, classify, vote, fuse."""
    if image.shape[0] < 16 or image.shape[1] < 16:
        raise ValueError("query image smaller than 16x16")
    if cfg.alpha > model.n_train:
        raise ValueError(f"alpha={cfg.alpha} exceeds training-set size {model.n_train}")
    M = model.M
    if cfg.rare_classes > M:
        raise ValueError(f"rare-classes={cfg.rare_classes} exceeds class count M={M}")
    params = SegmentationParams(cfg.sigma, cfg.k_scale, cfg.min_size)
    if cache is None:
        cache = ArtifactCache(cfg.resolved_cache_dir())

    if image_hash is not None:
        qfeat = _cached_descriptors(cache, image, image_hash, model.sift_codebook)
    else:
        qfeat = global_features(image, model.sift_codebook)

    rcfg = RetrievalConfig(
        alpha=cfg.alpha,
        rare_class_count=cfg.rare_classes,
        rare_alpha=cfg.rare_alpha or None,
    )
    rset = retrieve(qfeat, model.index, rcfg)

    rare_sets = None
    if cfg.rare_classes > 0:
        rare = rare_classes(model.class_pixel_totals, cfg.rare_classes)
        rare_sets = retrieve_rare(qfeat, model.index, model.class_presence, rare, rcfg)

    gprior, lprior = extract_priors(model, cfg, rset, rare_sets)

    h, w = image.shape[:2]
    if image_hash is not None:
        seg = _cached_segmentation(cache, image, image_hash, params)
    else:
        seg = segment(image, params)
    seg = assign_blocks(seg, BlockGrid(cfg.block_rows, cfg.block_cols, w, h))

    if image_hash is not None:
        feats = _cached_features(cache, image, image_hash, seg, params, model.texton_codebook)
    else:
        feats = superpixel_features(image, seg, model.texton_codebook)
    if cfg.feature_noise > 0:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7777, noise_key]))
        feats = feats + rng.normal(0.0, cfg.feature_noise, feats.shape) * model.feature_std

    visual = predict_visual(model.classifier, feats)
    gfield = vote_global(seg, visual, gprior, weight_mode=cfg.weight_mode)
    lfield = vote_local(seg, visual, lprior, weight_mode=cfg.weight_mode)
    weights = FusionWeights(cfg.w_const, cfg.w_global, cfg.w_local, cfg.w_visual)
    fused = fuse(visual, gfield, lfield, weights)
    labels = assign_labels(fused, seg)
    return ParseResult(
        labels, seg, visual, gfield, lfield, fused, rset, rare_sets, gprior, lprior
    )


ABLATIONS = ("no-global", "no-local", "visual-only")


def apply_ablation(cfg: PipelineConfig, ablate: str | None) -> PipelineConfig:
    if ablate is None:
        return cfg
    if ablate == "no-global":
        return dataclasses.replace(cfg, w_global=0.0)
    if ablate == "no-local":
        return dataclasses.replace(cfg, w_local=0.0)
    if ablate == "visual-only":
        return dataclasses.replace(cfg, w_global=0.0, w_local=0.0)
    raise ValueError(f"unknown ablation {ablate!r}; expected one of {ABLATIONS}")


def evaluate(
    model: TrainedModel,
    cfg: PipelineConfig,
    dataset: Dataset,
    split: str = "test",
    ablate: str | None = None,
    cache: ArtifactCache | None = None,
) -> dict[str, float]:
    """Parse every image of the split and report the four pixel metrics."""
    entries = dataset.split(split)
    if not entries:
        raise ValueError(f"split {split!r} is empty")
    cfg = apply_ablation(cfg, ablate)
    if cache is None:
        cache = ArtifactCache(cfg.resolved_cache_dir())

    def one(idx_entry):
        idx, entry = idx_entry
        image = load_image(entry.image_path)
        gt = load_label_map(entry.label_path)
        result = parse_query(
            model, cfg, image,
            noise_key=idx, cache=cache, image_hash=content_hash(entry.image_path),
        )
        return result.labels, gt

    cm = ConfusionMatrix(model.M)
    if cfg.workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(one, enumerate(entries)))
    else:
        results = [one(pair) for pair in enumerate(entries)]
    for pred, gt in results:
        cm.accumulate(pred, gt)
    return compute_metrics(cm)


SWEEP_AXES = ("alpha", "blocks", "rare_classes", "min_size")


def _axis_overrides(axis: str, value: str) -> dict:
    if axis == "alpha":
        return {"alpha": int(value)}
    if axis == "rare_classes":
        return {"rare_classes": int(value)}
    if axis == "min_size":
        return {"min_size": int(value)}
    if axis == "blocks":
        rows, _, cols = value.partition("x")
        return {"block_rows": int(rows), "block_cols": int(cols)}
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


DEFAULT_WEIGHT_GRID = tuple(
    (0.0, wg, wl, 0.5)
    for wg in (0.0, 0.25, 0.5)
    for wl in (0.0, 0.25, 0.5)
)


def tune_weights(
    model: TrainedModel,
    cfg: PipelineConfig,
    dataset: Dataset,
    grid=DEFAULT_WEIGHT_GRID,
    split: str = "test",
    cache: ArtifactCache | None = None,
):
    """Grid-search the fusion weights on a validation split.

    Returns rows of {weights + metrics} sorted by descending global
    accuracy; ties keep grid order.
    """
    if cache is None:
        cache = ArtifactCache(cfg.resolved_cache_dir())
    rows = []
    for wc, wg, wl, wv in grid:
        FusionWeights(wc, wg, wl, wv)  # validate
        cfg2 = dataclasses.replace(cfg, w_const=wc, w_global=wg, w_local=wl, w_visual=wv)
        metrics = evaluate(model, cfg2, dataset, split=split, cache=cache)
        rows.append({"weights": (wc, wg, wl, wv), **metrics})
    rows.sort(key=lambda r: -r["global_acc"])
    return rows


def run_sweep(cfg: PipelineConfig, axis: str, values, cache: ArtifactCache | None = None):
    """Evaluate once per axis value; training is reused unless the axis
    changes it (min_size). Returns a list of {axis value + metrics} rows."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ValueError("empty sweep value list")
    if cache is None:
        cache = ArtifactCache(cfg.resolved_cache_dir())
    ds = load_dataset(cfg.manifest)
    model = None
    if axis != "min_size":
        model, _ = train(cfg, cache=cache)
    rows = []
    for value in values:
        cfg2 = dataclasses.replace(cfg, **_axis_overrides(axis, str(value)))
        m = model
        if m is None or axis == "min_size":
            m, _ = train(cfg2, cache=cache)
        metrics = evaluate(m, cfg2, ds, cache=cache)
        rows.append({"axis": axis, "value": str(value), **metrics})
    return rows
