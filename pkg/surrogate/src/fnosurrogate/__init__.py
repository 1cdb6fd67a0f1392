"""Fourier neural operator surrogate for homogenization warm starts.

Trains a spectral operator mapping 4-channel material/coordinate voxel
grids to the 18 displacement channels stored by the homogenization
pipeline, and exports predictions as warm-start field containers. The
pipeline is consumed purely through its file formats: binary array
containers, JSON sidecars, and dataset manifests.
"""

from .archive import load_weights, save_weights
from .config import SurrogateConfig
from .container import (
    ContainerError,
    read_container,
    read_sidecar,
    sidecar_path,
    write_container,
)
from .data import (
    Manifest,
    ManifestSample,
    NormalizationStats,
    channel_stats,
    channels_to_fields,
    fields_to_channels,
    input_grid,
    load_manifest,
    relative_l2,
)
from .estimator import SurrogateRegressor
from .operator import (
    FieldOperator,
    FourierLayer,
    FourierLayerWeights,
    SurrogateWeights,
    fourier_layer_forward,
    mode_indices,
)
from .predict import predict_grid, predict_to_file
from .training import TrainingDivergedError, TrainResult, save_history, train

__all__ = [
    "ContainerError",
    "FieldOperator",
    "FourierLayer",
    "FourierLayerWeights",
    "Manifest",
    "ManifestSample",
    "NormalizationStats",
    "SurrogateConfig",
    "SurrogateRegressor",
    "SurrogateWeights",
    "TrainResult",
    "TrainingDivergedError",
    "channel_stats",
    "channels_to_fields",
    "fields_to_channels",
    "fourier_layer_forward",
    "input_grid",
    "load_manifest",
    "load_weights",
    "mode_indices",
    "predict_grid",
    "predict_to_file",
    "read_container",
    "read_sidecar",
    "relative_l2",
    "save_history",
    "save_weights",
    "sidecar_path",
    "train",
    "write_container",
]
