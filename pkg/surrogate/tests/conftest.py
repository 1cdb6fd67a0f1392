"""Shared fixtures: CLI-generated datasets and a small trained operator.

All dataset fixtures drive the homogenization pipeline's command line,
so every test consumes the same files a real run would produce.
"""

from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from fnosurrogate import (
    SurrogateConfig,
    read_container,
    save_weights,
    train,
    write_container,
)

PREFINE = shutil.which("prefine")

TINY_CONFIG = SurrogateConfig(
    modes=3,
    width=8,
    layers=2,
    learning_rate=1e-3,
    epochs=4,
    batch_size=3,
    seed=0,
    test_fraction=1.0 / 3.0,
)


def prefine_cli(*args) -> subprocess.CompletedProcess:
    """Run the homogenization pipeline CLI with the given arguments."""
    if PREFINE is None:
        pytest.fail("the homogenization pipeline CLI (prefine) is not installed")
    return subprocess.run(
        [PREFINE, *map(str, args)], check=True, capture_output=True, text=True
    )


def generate_dataset(out_dir, **config) -> Path:
    """Build a dataset directory through the pipeline CLI; returns the manifest."""
    out_dir = Path(out_dir)
    config_path = out_dir.parent / f"{out_dir.name}_config.json"
    config_path.write_text(json.dumps(config))
    prefine_cli("dataset", "--config", config_path, "--out", out_dir)
    return out_dir / "manifest.json"


def nan_corrupted_copy(manifest_path, dest_dir) -> tuple[Path, int]:
    """Copy a dataset and plant a NaN in the first sample's stored fields."""
    src = Path(manifest_path).parent
    shutil.copytree(src, dest_dir)
    records = json.loads((dest_dir / "manifest.json").read_text())["samples"]
    target = records[0]
    fields_path = dest_dir / target["fields_file"]
    fields = np.array(read_container(fields_path))
    fields[0, 0, 0, 0, 0] = np.nan
    write_container(fields_path, fields)
    return dest_dir / "manifest.json", int(target["id"])


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory) -> Path:
    """Six solved 8^3 samples; cheap enough for most training tests."""
    root = tmp_path_factory.mktemp("small_dataset")
    return generate_dataset(
        root / "ds", count=6, resolution=8, seed=5, solver={"tol": 1e-8}
    )


@pytest.fixture(scope="session")
def tiny_result(small_manifest):
    """A short training run shared by prediction and estimator tests."""
    return train(small_manifest, TINY_CONFIG)


@pytest.fixture(scope="session")
def tiny_weights_path(tmp_path_factory, tiny_result) -> Path:
    out = tmp_path_factory.mktemp("tiny_weights") / "weights.npz"
    save_weights(out, tiny_result.weights, tiny_result.stats, TINY_CONFIG)
    return out


@pytest.fixture(scope="session")
def first_model(small_manifest) -> Path:
    """Path of the first stored model container in the small dataset."""
    record = json.loads(Path(small_manifest).read_text())["samples"][0]
    return Path(small_manifest).parent / record["model_file"]
