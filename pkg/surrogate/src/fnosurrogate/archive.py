"""Weights persistence: one self-describing archive plus a config echo.

The archive is a NumPy ``.npz`` holding every parameter array under a
stable key scheme (``layer{t}_*`` for the spectral blocks) together
with the normalization statistics, so shapes and dtypes travel with
the file. A JSON sidecar (``<path>.json``) echoes the hyperparameters
and any training provenance for human inspection; loading works from
the archive alone.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import SurrogateConfig
from .container import sidecar_path
from .data import NormalizationStats
from .operator import FourierLayerWeights, SurrogateWeights

__all__ = ["save_weights", "load_weights"]

_STATS_KEYS = ("output_mean", "output_std", "input_mean", "input_std")


def save_weights(
    path,
    weights: SurrogateWeights,
    stats: NormalizationStats,
    config: SurrogateConfig,
    extra: dict | None = None,
) -> None:
    """Write the archive and its JSON config echo."""
    arrays = {
        "layer_count": np.asarray(weights.layer_count, dtype=np.int64),
        "lift_weight": weights.lift_weight,
        "lift_bias": weights.lift_bias,
        "project_weight": weights.project_weight,
        "project_bias": weights.project_bias,
    }
    for t, layer in enumerate(weights.layers):
        arrays[f"layer{t}_spectral_re"] = layer.spectral_re
        arrays[f"layer{t}_spectral_im"] = layer.spectral_im
        arrays[f"layer{t}_pointwise"] = layer.pointwise
        arrays[f"layer{t}_bias"] = layer.bias
    for key in _STATS_KEYS:
        arrays[key] = getattr(stats, key)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    echo = {"config": config.to_json_dict()}
    echo.update(extra or {})
    with open(sidecar_path(path), "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_weights(path) -> tuple[SurrogateWeights, NormalizationStats, dict]:
    """Read an archive back; returns (weights, stats, config echo)."""
    path = Path(path)
    with np.load(path) as bundle:
        arrays = {key: bundle[key] for key in bundle.files}
    missing = [k for k in ("layer_count", "lift_weight", *_STATS_KEYS) if k not in arrays]
    if missing:
        raise ValueError(f"{path}: archive is missing keys {missing}")
    count = int(arrays["layer_count"])
    layers = tuple(
        FourierLayerWeights(
            spectral_re=arrays[f"layer{t}_spectral_re"],
            spectral_im=arrays[f"layer{t}_spectral_im"],
            pointwise=arrays[f"layer{t}_pointwise"],
            bias=arrays[f"layer{t}_bias"],
        )
        for t in range(count)
    )
    weights = SurrogateWeights(
        lift_weight=arrays["lift_weight"],
        lift_bias=arrays["lift_bias"],
        layers=layers,
        project_weight=arrays["project_weight"],
        project_bias=arrays["project_bias"],
    )
    stats = NormalizationStats(**{key: arrays[key] for key in _STATS_KEYS})
    side = sidecar_path(path)
    echo: dict = {}
    if side.exists():
        with open(side) as fh:
            echo = json.load(fh)
    return weights, stats, echo
