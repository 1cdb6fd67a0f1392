"""Inference: de-normalized field predictions and warm-start export.

``predict_to_file`` reads a stored voxel model (container plus JSON
sidecar), evaluates the operator, and writes the de-normalized
(6, 3, n, n, n) fields as a container the homogenization pipeline can
consume directly as an initial guess.
"""

from __future__ import annotations

import json

import numpy as np
import torch

from .archive import load_weights
from .container import (
    ContainerError,
    read_container,
    read_sidecar,
    sidecar_path,
    write_container,
)
from .data import NormalizationStats, channels_to_fields, input_grid
from .operator import FieldOperator

__all__ = ["predict_grid", "predict_to_file"]


def predict_grid(
    operator: FieldOperator,
    stats: NormalizationStats,
    occupancy: np.ndarray,
    nu: float,
) -> np.ndarray:
    """Evaluate one model; returns de-normalized (n, n, n, 18) channels."""
    grid = stats.normalize_inputs(input_grid(occupancy, nu))
    dtype = next(operator.parameters()).dtype
    batch = torch.from_numpy(np.ascontiguousarray(grid)).to(dtype)[None]
    with torch.no_grad():
        out = operator(batch)[0].numpy().astype(np.float64)
    return stats.denormalize_outputs(out)


def predict_to_file(weights_path, model_path, out_path) -> np.ndarray:
    """Predict warm-start fields for a stored model and write them.

    Returns the written (6, 3, n, n, n) array. The output container
    holds de-normalized fields, so the pipeline's warm-start import
    uses it as-is; a provenance sidecar (without any normalization
    block) is written next to it.
    """
    weights, stats, _echo = load_weights(weights_path)
    operator = FieldOperator.from_weights(weights)
    occupancy = read_container(model_path)
    if occupancy.ndim != 3 or len(set(occupancy.shape)) != 1:
        raise ContainerError(
            f"{model_path}: model container must be a cubic rank-3 grid, "
            f"got {occupancy.shape}"
        )
    meta = read_sidecar(model_path)
    if "nu" not in meta:
        raise ContainerError(f"{model_path}: model sidecar must carry nu")
    channels = predict_grid(operator, stats, occupancy, float(meta["nu"]))
    fields = channels_to_fields(channels)
    write_container(out_path, fields)
    provenance = {
        "source_model": str(model_path),
        "weights": str(weights_path),
        "n": int(occupancy.shape[0]),
        "nu": float(meta["nu"]),
    }
    with open(sidecar_path(out_path), "w") as fh:
        json.dump(provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return fields
