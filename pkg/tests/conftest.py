import pytest

from sceneparse import pipeline
from sceneparse.config import PipelineConfig
from sceneparse.dataset import load_dataset
from sceneparse.synthetic import SyntheticSceneSpec, generate_dataset

# Small, fast settings for plumbing tests; the acceptance suite runs the
# full-size experiment separately.
SMALL = dict(
    k_scale=60.0,
    min_size=20,
    alpha=4,
    rare_classes=0,
    codebook_size=16,
    epochs=30,
)


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("workspace")
    spec = SyntheticSceneSpec(train_count=12, test_count=3, seed=0)
    manifest = generate_dataset(spec, root / "data")
    cfg = PipelineConfig(
        manifest=str(manifest), cache_dir=str(root / "cache"), seed=0, **SMALL
    )
    return {"root": root, "manifest": manifest, "cfg": cfg}


@pytest.fixture(scope="session")
def trained(workspace):
    model, cache = pipeline.train(workspace["cfg"])
    path = workspace["root"] / "model.bin"
    pipeline.save_model(model, path)
    return {
        "model": pipeline.load_model(path),
        "path": path,
        "cache": cache,
        "cfg": workspace["cfg"],
        "dataset": load_dataset(workspace["manifest"]),
    }
