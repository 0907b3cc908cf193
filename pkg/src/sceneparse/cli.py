"""Command-line interface: synth, train, parse, eval, sweep."""

from __future__ import annotations

import argparse
import colorsys
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline, records
from .cache import ArtifactCache
from .config import build_config
from .dataset import load_dataset, load_image, save_label_map
from .metrics import METRIC_NAMES
from .synthetic import SyntheticSceneSpec, generate_dataset


def class_palette(M: int) -> np.ndarray:
    """Stable, well-separated RGB color per class index (golden-angle hues)."""
    colors = np.empty((M + 1, 3))
    colors[0] = 0.0
    for c in range(1, M + 1):
        hue = (c * 0.61803398875) % 1.0
        colors[c] = colorsys.hsv_to_rgb(hue, 0.85, 0.95)
    return colors


def write_overlay(path, image: np.ndarray, labels: np.ndarray, alpha: float = 0.5) -> None:
    from PIL import Image

    colors = class_palette(int(labels.max()))
    blend = (1 - alpha) * image + alpha * colors[labels]
    arr = np.clip(np.round(blend * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--manifest", help="dataset manifest path")
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--k-scale", dest="k_scale", type=float)
    p.add_argument("--min-size", dest="min_size", type=int)
    p.add_argument("--blocks", help="block grid as ROWSxCOLS, e.g. 4x4")
    p.add_argument("--alpha", type=int)
    p.add_argument("--rare-classes", dest="rare_classes", type=int)
    p.add_argument("--rare-alpha", dest="rare_alpha", type=int)
    p.add_argument("--sclp-mode", dest="sclp_mode", choices=["presence", "pixel-pair"])
    p.add_argument("--eps", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--mrmr-count", dest="mrmr_count", type=int)
    p.add_argument("--codebook-size", dest="codebook_size", type=int)
    p.add_argument("--weights", help="fusion weights as wc,wg,wl,wv")
    p.add_argument("--weight-mode", dest="weight_mode", choices=["voter", "receiver"])
    p.add_argument("--feature-noise", dest="feature_noise", type=float)
    p.add_argument("--workers", type=int)


_CONFIG_KEYS = (
    "manifest", "cache_dir", "seed", "sigma", "k_scale", "min_size",
    "alpha", "rare_classes", "rare_alpha", "sclp_mode", "eps", "epochs",
    "hidden", "mrmr_count", "codebook_size", "weight_mode", "feature_noise",
    "workers",
)


def _config_from_args(args):
    overrides = {key: getattr(args, key, None) for key in _CONFIG_KEYS}
    if getattr(args, "blocks", None):
        rows, _, cols = args.blocks.partition("x")
        overrides["block_rows"] = int(rows)
        overrides["block_cols"] = int(cols)
    if getattr(args, "weights", None):
        wc, wg, wl, wv = (float(x) for x in args.weights.split(","))
        overrides.update(w_const=wc, w_global=wg, w_local=wl, w_visual=wv)
    return build_config(args.config, overrides)


def cmd_synth(args) -> int:
    spec = SyntheticSceneSpec(
        width=args.width,
        height=args.height,
        train_count=args.train_count,
        test_count=args.test_count,
        seed=args.seed,
    )
    manifest = generate_dataset(spec, args.out)
    print(f"wrote {spec.train_count} train / {spec.test_count} test scenes")
    print(f"manifest: {manifest}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.manifest:
        print("error: train requires --manifest (or manifest= in the config file)", file=sys.stderr)
        return 2
    cache = ArtifactCache(cfg.resolved_cache_dir())
    model, _ = pipeline.train(cfg, cache=cache)
    pipeline.save_model(model, args.model)
    model = pipeline.load_model(args.model)
    print(f"trained on {model.n_train} images, M={model.M} classes")
    print(f"cache: {cache.hits} hits, {cache.misses} misses")
    print(f"model bundle: {args.model}")
    return 0


def cmd_parse(args) -> int:
    cfg = _config_from_args(args)
    model = pipeline.load_model(args.model)
    image = load_image(args.image)
    cache = ArtifactCache(cfg.resolved_cache_dir())
    result = pipeline.parse_query(model, cfg, image, cache=cache)
    save_label_map(args.out, result.labels)
    print(f"prediction: {args.out}")
    if args.overlay:
        write_overlay(args.overlay, image, result.labels)
        print(f"overlay: {args.overlay}")
    if args.dump_priors:
        out = Path(args.dump_priors)
        out.mkdir(parents=True, exist_ok=True)
        records.write_array(out / "global_prior_counts.bin", result.global_prior.counts)
        records.write_array(out / "global_prior_prob.bin", result.global_prior.prob)
        records.write_array(out / "local_prior_counts.bin", result.local_prior.counts)
        records.write_array(out / "local_prior_prob.bin", result.local_prior.prob)
        print(f"priors: {out}")
    return 0


def _print_metrics(metrics: dict) -> None:
    width = max(len(name) for name in METRIC_NAMES)
    for name in METRIC_NAMES:
        print(f"{name:<{width}}  {metrics[name]:.4f}")


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    model = pipeline.load_model(args.model)
    manifest = cfg.manifest or args.manifest
    if not manifest:
        print("error: eval requires --manifest", file=sys.stderr)
        return 2
    ds = load_dataset(manifest)
    cache = ArtifactCache(cfg.resolved_cache_dir())
    metrics = pipeline.evaluate(model, cfg, ds, split=args.split, ablate=args.ablate, cache=cache)
    _print_metrics(metrics)
    if args.report:
        Path(args.report).write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
        print(f"report: {args.report}")
    return 0


def cmd_tune(args) -> int:
    cfg = _config_from_args(args)
    model = pipeline.load_model(args.model)
    manifest = cfg.manifest or args.manifest
    if not manifest:
        print("error: tune requires --manifest", file=sys.stderr)
        return 2
    ds = load_dataset(manifest)
    if args.weight_grid:
        grid = [
            tuple(float(x) for x in part.split(","))
            for part in args.weight_grid.split(";")
            if part
        ]
    else:
        grid = pipeline.DEFAULT_WEIGHT_GRID
    cache = ArtifactCache(cfg.resolved_cache_dir())
    rows = pipeline.tune_weights(model, cfg, ds, grid=grid, split=args.split, cache=cache)
    lines = ["wc,wg,wl,wv," + ",".join(METRIC_NAMES)]
    for row in rows:
        weights = ",".join(f"{w:g}" for w in row["weights"])
        lines.append(weights + "," + ",".join(f"{row[m]:.6f}" for m in METRIC_NAMES))
    table = "\n".join(lines) + "\n"
    print(table, end="")
    best = rows[0]["weights"]
    print(f"best: --weights {','.join(f'{w:g}' for w in best)}")
    if args.out:
        Path(args.out).write_text(table)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.manifest:
        print("error: sweep requires --manifest", file=sys.stderr)
        return 2
    values = [v for v in args.values.split(",") if v]
    cache = ArtifactCache(cfg.resolved_cache_dir())
    rows = pipeline.run_sweep(cfg, args.axis, values, cache=cache)
    header = [args.axis, *METRIC_NAMES]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join([row["value"]] + [f"{row[m]:.6f}" for m in METRIC_NAMES]))
    table = "\n".join(lines) + "\n"
    print(table, end="")
    if args.out:
        Path(args.out).write_text(table)
        print(f"table: {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sceneparse",
        description="Scene parsing with retrieval-based co-occurrence context priors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--train-count", dest="train_count", type=int, default=60)
    p.add_argument("--test-count", dest="test_count", type=int, default=10)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="precompute caches and train the model bundle")
    _add_common_flags(p)
    p.add_argument("--model", required=True, help="output model bundle path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="label every pixel of a query image")
    _add_common_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="predicted label-map raster")
    p.add_argument("--overlay", help="optional color overlay raster")
    p.add_argument("--dump-priors", dest="dump_priors", help="directory for prior tensors")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="evaluate on a manifest split")
    _add_common_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--ablate", choices=list(pipeline.ABLATIONS))
    p.add_argument("--report", help="write metrics as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate across one parameter axis")
    _add_common_flags(p)
    p.add_argument("--axis", required=True, choices=list(pipeline.SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--out", help="write the CSV table here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tune", help="grid-search fusion weights on a split")
    _add_common_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--weight-grid", dest="weight_grid",
                   help="semicolon-separated wc,wg,wl,wv quadruples")
    p.add_argument("--out", help="write the CSV table here")
    p.set_defaults(func=cmd_tune)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
