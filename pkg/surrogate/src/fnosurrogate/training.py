"""Training loop: disjoint split, relative-L2 objective, error curves.

The objective is the mean per-sample relative L2 error over the
normalized output channels. Output statistics come from the dataset
manifest when it publishes them (falling back to the training split),
input statistics always come from the training split. Optimization is
Adam at the configured rate with cosine decay over the epoch budget;
everything downstream of the seed (weight init, split, batch order)
is deterministic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import SurrogateConfig
from .data import (
    Manifest,
    NormalizationStats,
    channel_stats,
    load_manifest,
    relative_l2,
)
from .operator import FieldOperator, SurrogateWeights

__all__ = ["TrainingDivergedError", "TrainResult", "save_history", "train"]


class TrainingDivergedError(RuntimeError):
    """Raised when the loss stops being finite."""


@dataclass(frozen=True)
class TrainResult:
    """Trained operator plus provenance and error curves."""

    operator: FieldOperator
    weights: SurrogateWeights
    stats: NormalizationStats
    history: dict
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]


def _split(count: int, config: SurrogateConfig, rng: np.random.Generator):
    order = rng.permutation(count)
    n_test = int(round(config.test_fraction * count))
    test = np.sort(order[:n_test])
    train = np.sort(order[n_test:])
    if train.size == 0:
        raise ValueError(
            f"training split is empty: {count} samples with "
            f"test_fraction {config.test_fraction}"
        )
    return train, test


def _batch_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    diff = (pred - target).flatten(1).norm(dim=1)
    scale = target.flatten(1).norm(dim=1)
    return (diff / scale).mean()


def train(manifest, config: SurrogateConfig | None = None) -> TrainResult:
    """Fit the operator on a dataset manifest.

    Parameters
    ----------
    manifest : path or Manifest
    config : SurrogateConfig, optional

    Returns
    -------
    TrainResult
        Weights, normalization statistics, per-epoch ``history``
        ("train"/"test" relative-L2 curves plus the trivial
        mean-predictor baseline on the test split), and the sample ids
        of the disjoint train/test split.

    Raises
    ------
    TrainingDivergedError
        When a batch loss stops being finite; the message carries the
        epoch, step, offending sample ids, and last finite loss.
    """
    if not isinstance(manifest, Manifest):
        manifest = load_manifest(manifest)
    config = config or SurrogateConfig()
    n = manifest.resolution()
    config.check_resolution(n)

    rng = np.random.default_rng(config.seed)
    train_idx, test_idx = _split(len(manifest.samples), config, rng)

    inputs = np.stack([s.input_grid() for s in manifest.samples])
    outputs = np.stack([s.output_grid() for s in manifest.samples])
    input_mean, input_std = channel_stats(inputs[train_idx])
    if manifest.output_stats is not None:
        output_mean = manifest.output_stats["mean"]
        output_std = manifest.output_stats["std"]
    else:
        output_mean, output_std = channel_stats(outputs[train_idx])
    stats = NormalizationStats(
        output_mean=output_mean,
        output_std=output_std,
        input_mean=input_mean,
        input_std=input_std,
    )

    x = torch.from_numpy(
        stats.normalize_inputs(inputs).astype(np.float32)
    )
    y = torch.from_numpy(
        stats.normalize_outputs(outputs).astype(np.float32)
    )
    x_train, y_train = x[train_idx], y[train_idx]
    x_test, y_test = x[test_idx], y[test_idx]

    torch.manual_seed(config.seed)
    model = FieldOperator(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=config.epochs
    )

    train_curve: list[float] = []
    test_curve: list[float] = []
    last_finite = float("nan")
    for epoch in range(config.epochs):
        model.train()
        order = rng.permutation(train_idx.size)
        loss_sum = 0.0
        for step in range(0, order.size, config.batch_size):
            batch = order[step : step + config.batch_size]
            optimizer.zero_grad()
            pred = model(x_train[batch])
            loss = _batch_loss(pred, y_train[batch])
            if not torch.isfinite(loss):
                ids = [int(manifest.samples[train_idx[b]].id) for b in batch]
                raise TrainingDivergedError(
                    f"non-finite loss {loss.item()} at epoch {epoch} step "
                    f"{step // config.batch_size} on sample ids {ids}; "
                    f"last finite loss {last_finite}"
                )
            loss.backward()
            optimizer.step()
            last_finite = float(loss.item())
            loss_sum += last_finite * batch.size
        scheduler.step()
        train_curve.append(loss_sum / order.size)
        if test_idx.size:
            test_curve.append(_evaluate(model, x_test, y_test))

    history = {"train": train_curve, "test": test_curve}
    if test_idx.size:
        mean_pred = y_train.mean(dim=0, keepdim=True).numpy()
        baseline = [
            relative_l2(mean_pred[0], y_test[i].numpy())
            for i in range(test_idx.size)
        ]
        history["baseline_test"] = float(np.mean(baseline))

    model.eval()
    return TrainResult(
        operator=model,
        weights=model.export_weights(),
        stats=stats,
        history=history,
        train_ids=tuple(int(manifest.samples[i].id) for i in train_idx),
        test_ids=tuple(int(manifest.samples[i].id) for i in test_idx),
    )


def _evaluate(model: FieldOperator, x: torch.Tensor, y: torch.Tensor) -> float:
    """Mean relative L2 over normalized channels, computed in float64."""
    errors = []
    with torch.no_grad():
        for i in range(x.shape[0]):
            pred = model(x[i : i + 1])[0].numpy()
            errors.append(relative_l2(pred, y[i].numpy()))
    return float(np.mean(errors))


def save_history(path, history: dict) -> None:
    """Write history JSON plus a plot-ready CSV next to it."""
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(history, fh, indent=2)
        fh.write("\n")
    csv_path = path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_rel_l2", "test_rel_l2"])
        test = history.get("test", [])
        for epoch, value in enumerate(history.get("train", [])):
            row = [epoch, value, test[epoch] if epoch < len(test) else ""]
            writer.writerow(row)
