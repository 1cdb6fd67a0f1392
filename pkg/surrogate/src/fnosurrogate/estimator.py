"""Estimator-style wrapper over training and batch prediction.

``SurrogateRegressor`` fits the spectral operator on a dataset
manifest and predicts warm-start fields for stored voxel models
through the usual fit/attributes protocol.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .config import SurrogateConfig
from .container import ContainerError, read_container, read_sidecar
from .data import channels_to_fields
from .predict import predict_grid
from .training import train

__all__ = ["SurrogateRegressor"]


class SurrogateRegressor(BaseEstimator):
    """Spectral operator surrogate with a fit-once interface.

    Parameters mirror :class:`~fnosurrogate.config.SurrogateConfig`.
    After ``fit`` the instance exposes ``operator_`` (the trained
    network), ``weights_``/``stats_`` (exported parameters and
    normalization), ``history_`` (per-epoch relative-L2 curves), and
    ``train_ids_``/``test_ids_`` (the disjoint split).
    """

    def __init__(
        self,
        modes: int = 12,
        width: int = 32,
        layers: int = 4,
        learning_rate: float = 1e-3,
        epochs: int = 100,
        batch_size: int = 4,
        seed: int = 0,
        test_fraction: float = 0.2,
    ):
        self.modes = modes
        self.width = width
        self.layers = layers
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.test_fraction = test_fraction

    def _config(self) -> SurrogateConfig:
        return SurrogateConfig(
            modes=self.modes,
            width=self.width,
            layers=self.layers,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            test_fraction=self.test_fraction,
        )

    def fit(self, manifest, y=None):
        """Train on a dataset manifest (path or parsed Manifest)."""
        result = train(manifest, self._config())
        self.operator_ = result.operator
        self.weights_ = result.weights
        self.stats_ = result.stats
        self.history_ = result.history
        self.train_ids_ = result.train_ids
        self.test_ids_ = result.test_ids
        return self

    def predict(self, model_paths) -> list[np.ndarray]:
        """De-normalized (6, 3, n, n, n) fields for stored models."""
        if not hasattr(self, "operator_"):
            raise RuntimeError("SurrogateRegressor must be fit before predict")
        out = []
        for path in model_paths:
            occupancy = read_container(path)
            if occupancy.ndim != 3 or len(set(occupancy.shape)) != 1:
                raise ContainerError(
                    f"{path}: model container must be a cubic rank-3 grid, "
                    f"got {occupancy.shape}"
                )
            meta = read_sidecar(path)
            if "nu" not in meta:
                raise ContainerError(f"{path}: model sidecar must carry nu")
            channels = predict_grid(
                self.operator_, self.stats_, occupancy, float(meta["nu"])
            )
            out.append(channels_to_fields(channels))
        return out
