import dataclasses

import numpy as np
import pytest

from sceneparse import pipeline
from sceneparse.cache import ArtifactCache
from sceneparse.dataset import load_image
from sceneparse.synthetic import SyntheticSceneSpec, generate_dataset


def test_warm_cache_skips_all_recomputation(workspace):
    cfg = workspace["cfg"]
    cache = ArtifactCache(cfg.resolved_cache_dir())
    pipeline.train(cfg, cache=cache)
    n = 12
    artifact_count = 3 * n + 3  # seg + descriptors + features per image, 2 codebooks, mrmr

    cache.reset_counters()
    pipeline.train(cfg, cache=cache)
    assert cache.misses == 0
    assert cache.hits == artifact_count


def test_deleting_one_segmentation_recomputes_exactly_one(workspace, tmp_path):
    cfg = dataclasses.replace(workspace["cfg"], cache_dir=str(tmp_path / "cache"))
    cache = ArtifactCache(cfg.resolved_cache_dir())
    pipeline.train(cfg, cache=cache)
    seg_files = sorted(cache.root.glob("seg-*.bin"))
    assert len(seg_files) == 12
    seg_files[3].unlink()

    cache.reset_counters()
    pipeline.train(cfg, cache=cache)
    assert cache.misses == 1
    assert cache.hits == 3 * 12 + 3 - 1


def test_independent_runs_give_byte_identical_bundles(workspace, tmp_path):
    digests = []
    for run in ("a", "b"):
        cfg = dataclasses.replace(workspace["cfg"], cache_dir=str(tmp_path / f"cache_{run}"))
        model, _ = pipeline.train(cfg)
        out = tmp_path / f"model_{run}.bin"
        pipeline.save_model(model, out)
        digests.append(out.read_bytes())
    assert digests[0] == digests[1]


def test_model_round_trip_preserves_parse(workspace, trained, tmp_path):
    cfg = trained["cfg"]
    model_mem, _ = pipeline.train(cfg)  # warm cache, fast
    image = load_image(trained["dataset"].split("test")[0].image_path)
    a = pipeline.parse_query(model_mem, cfg, image)
    b = pipeline.parse_query(trained["model"], cfg, image)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.fused.probs, b.fused.probs)


def test_parse_output_contract(trained):
    cfg = trained["cfg"]
    model = trained["model"]
    entry = trained["dataset"].split("train")[2]
    image = load_image(entry.image_path)
    res = pipeline.parse_query(model, dataclasses.replace(cfg, alpha=1), image)
    assert res.labels.shape == image.shape[:2]
    assert res.labels.min() >= 1 and res.labels.max() <= model.M
    # a query identical to a training image retrieves itself on every cue
    assert set(res.retrieval.image_ids) == {2}
    for field in (res.visual, res.global_field, res.local_field, res.fused):
        field.check_simplex()
    assert res.retrieval.cardinality == 4 * 1


def test_visual_only_weights_equal_ablation(trained):
    cfg = trained["cfg"]
    model = trained["model"]
    image = load_image(trained["dataset"].split("test")[1].image_path)
    manual = dataclasses.replace(cfg, w_global=0.0, w_local=0.0)
    a = pipeline.parse_query(model, manual, image)
    b = pipeline.parse_query(model, pipeline.apply_ablation(cfg, "visual-only"), image)
    assert np.array_equal(a.labels, b.labels)
    # and pure-visual parse assigns the visual argmax everywhere
    assert np.array_equal(a.labels, a.visual.argmax_classes()[a.seg.id_map])


def test_evaluate_reports_exactly_four_metrics(trained):
    metrics = pipeline.evaluate(trained["model"], trained["cfg"], trained["dataset"])
    assert set(metrics) == {"global_acc", "class_acc", "mean_iu", "fw_iu"}
    assert all(0.0 <= v <= 1.0 for v in metrics.values())


def test_evaluate_empty_split_rejected(trained, tmp_path):
    spec = SyntheticSceneSpec(train_count=2, test_count=1, seed=9)
    manifest = generate_dataset(spec, tmp_path / "d")
    text = manifest.read_text().splitlines()
    manifest.write_text("\n".join(ln for ln in text if not ln.startswith("test")) + "\n")
    from sceneparse.dataset import load_dataset

    ds = load_dataset(manifest)
    with pytest.raises(ValueError, match="empty"):
        pipeline.evaluate(trained["model"], trained["cfg"], ds)


def test_alpha_larger_than_pool_rejected(trained):
    cfg = dataclasses.replace(trained["cfg"], alpha=1000)
    image = load_image(trained["dataset"].split("test")[0].image_path)
    with pytest.raises(ValueError, match="alpha"):
        pipeline.parse_query(trained["model"], cfg, image)


def test_rare_mode_sets_respect_class_presence(trained):
    cfg = dataclasses.replace(trained["cfg"], rare_classes=3)
    model = trained["model"]
    image = load_image(trained["dataset"].split("test")[0].image_path)
    res = pipeline.parse_query(model, cfg, image)
    assert res.rare_sets is not None and len(res.rare_sets) == 3
    for c, rset in res.rare_sets.items():
        for image_id in rset.image_ids:
            assert model.class_presence[image_id, c - 1]


def test_rare_count_exceeding_classes_rejected(trained):
    cfg = dataclasses.replace(trained["cfg"], rare_classes=9)
    image = load_image(trained["dataset"].split("test")[0].image_path)
    with pytest.raises(ValueError, match="rare"):
        pipeline.parse_query(trained["model"], cfg, image)


def test_parse_determinism_across_calls(trained):
    cfg = trained["cfg"]
    image = load_image(trained["dataset"].split("test")[2].image_path)
    a = pipeline.parse_query(trained["model"], cfg, image, noise_key=5)
    b = pipeline.parse_query(trained["model"], cfg, image, noise_key=5)
    assert np.array_equal(a.labels, b.labels)


def test_workers_do_not_change_results(trained):
    cfg = trained["cfg"]
    base = pipeline.evaluate(trained["model"], cfg, trained["dataset"])
    par = pipeline.evaluate(
        trained["model"], dataclasses.replace(cfg, workers=3), trained["dataset"]
    )
    assert base == par


def test_sweep_rows_and_default_row_matches_standalone(trained, workspace):
    cfg = trained["cfg"]
    rows = pipeline.run_sweep(cfg, "alpha", [2, 4], cache=trained["cache"])
    assert [r["value"] for r in rows] == ["2", "4"]
    standalone = pipeline.evaluate(trained["model"], cfg, trained["dataset"])
    default_row = rows[1]  # alpha=4 is the configured default here
    for name, value in standalone.items():
        assert default_row[name] == pytest.approx(value, abs=1e-12)


def test_blocks_sweep_reuses_cached_per_image_artifacts(trained):
    cache = trained["cache"]
    pipeline.run_sweep(trained["cfg"], "blocks", ["2x2"], cache=cache)  # warm everything
    cache.reset_counters()
    rows = pipeline.run_sweep(trained["cfg"], "blocks", ["1x1", "2x2", "4x4"], cache=cache)
    assert len(rows) == 3
    assert cache.misses == 0  # only block assignment + priors recomputed


def test_sweep_rejects_bad_axis_and_empty_values(trained):
    with pytest.raises(ValueError):
        pipeline.run_sweep(trained["cfg"], "nonsense", [1])
    with pytest.raises(ValueError):
        pipeline.run_sweep(trained["cfg"], "alpha", [])


def test_tune_weights_sorted_and_consistent(trained):
    grid = [(0.0, 0.0, 0.0, 1.0), (0.0, 0.25, 0.25, 0.5)]
    rows = pipeline.tune_weights(
        trained["model"], trained["cfg"], trained["dataset"], grid=grid, cache=trained["cache"]
    )
    assert len(rows) == 2
    assert rows[0]["global_acc"] >= rows[1]["global_acc"]
    visual_row = next(r for r in rows if r["weights"] == (0.0, 0.0, 0.0, 1.0))
    standalone = pipeline.evaluate(
        trained["model"], trained["cfg"], trained["dataset"], ablate="visual-only",
        cache=trained["cache"],
    )
    assert visual_row["global_acc"] == pytest.approx(standalone["global_acc"], abs=1e-12)


def test_train_failure_names_the_stage(workspace, tmp_path):
    import shutil

    broken = tmp_path / "broken"
    shutil.copytree(workspace["manifest"].parent, broken)
    # corrupt one training label map so a later stage fails
    from sceneparse.dataset import save_label_map
    import numpy as np

    save_label_map(broken / "labels" / "train_0000.png", np.zeros((64, 64), dtype=np.int32))
    cfg = dataclasses.replace(
        workspace["cfg"],
        manifest=str(broken / "manifest.txt"),
        cache_dir=str(tmp_path / "cache"),
    )
    # single-class labels starve every other class of examples; the first
    # stage to hit that is feature selection
    for p in sorted((broken / "labels").glob("train_*.png")):
        save_label_map(p, np.ones((64, 64), dtype=np.int32))
    with pytest.raises(pipeline.PipelineStageError, match="stage 'feature-selection'"):
        pipeline.train(cfg)
