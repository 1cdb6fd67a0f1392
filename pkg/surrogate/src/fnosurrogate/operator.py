"""Spectral neural operator mapping material grids to field channels.

The network lifts the 4 input channels pointwise to a wider latent
space, applies a stack of Fourier blocks, and projects pointwise to
the 18 output channels. Each block transforms the latent grid with a
real-input FFT, keeps only the low-frequency corner (signed frequency
|k| < modes on every axis, using the Hermitian layout of the last
axis), multiplies each retained mode by a learned complex channel
matrix, inverse-transforms, and adds a learned pointwise linear path
plus a bias before the activation. Because every operation is either
pointwise or indexed by physical frequency, trained weights evaluate
at any grid resolution whose Nyquist limit covers the retained modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import SurrogateConfig
from .data import INPUT_CHANNELS, OUTPUT_CHANNELS

__all__ = [
    "FourierLayerWeights",
    "SurrogateWeights",
    "FourierLayer",
    "FieldOperator",
    "fourier_layer_forward",
    "mode_indices",
]


def mode_indices(n: int, modes: int, hermitian: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Kept FFT positions on an axis of length n, plus their weight slots.

    Full axes keep indices whose signed frequency k satisfies
    |k| < modes and map them to weight slot k + modes - 1; the
    half-spectrum axis keeps k in [0, modes) at weight slot k.
    """
    limit = n // 2 + 1
    if modes > limit:
        raise ValueError(
            f"modes {modes} exceed the Nyquist limit {limit} for resolution {n}"
        )
    if hermitian:
        grid = np.arange(min(modes, limit), dtype=np.int64)
        return grid, grid.copy()
    grid = []
    weight = []
    for i in range(n):
        k = i if i < (n + 1) // 2 else i - n
        if abs(k) < modes:
            grid.append(i)
            weight.append(k + modes - 1)
    return np.asarray(grid, dtype=np.int64), np.asarray(weight, dtype=np.int64)


_ACTIVATIONS = {"relu": torch.relu, "identity": lambda t: t}


def _as_tensor(arr: np.ndarray) -> torch.Tensor:
    # copy so read-only exported arrays convert without torch warnings
    return torch.from_numpy(np.array(arr))


def _activation_fn(activation):
    if callable(activation):
        return activation
    try:
        return _ACTIVATIONS[activation]
    except KeyError:
        raise ValueError(
            f"unknown activation {activation!r}, expected one of "
            f"{sorted(_ACTIVATIONS)}"
        ) from None


class FourierLayer(nn.Module):
    """One spectral block: global mode mixing plus a pointwise path."""

    def __init__(self, width: int, modes: int):
        super().__init__()
        self.width = int(width)
        self.modes = int(modes)
        span = 2 * self.modes - 1
        scale = 1.0 / (self.width * self.width)
        shape = (span, span, self.modes, self.width, self.width)
        self.spectral_re = nn.Parameter(scale * torch.rand(shape))
        self.spectral_im = nn.Parameter(scale * torch.rand(shape))
        bound = 1.0 / np.sqrt(self.width)
        self.pointwise = nn.Parameter(
            torch.empty(self.width, self.width).uniform_(-bound, bound)
        )
        self.bias = nn.Parameter(torch.zeros(self.width))

    def forward(self, v: torch.Tensor, activation="relu") -> torch.Tensor:
        """sigma(IFFT(R * truncate(FFT(v))) + W v + b) on (B, x, y, z, c)."""
        act = _activation_fn(activation)
        nx, ny, nz = v.shape[1:4]
        ix, jx = mode_indices(nx, self.modes)
        iy, jy = mode_indices(ny, self.modes)
        iz, jz = mode_indices(nz, self.modes, hermitian=True)
        gx = torch.from_numpy(ix).reshape(-1, 1, 1)
        gy = torch.from_numpy(iy).reshape(1, -1, 1)
        gz = torch.from_numpy(iz).reshape(1, 1, -1)

        vf = torch.fft.rfftn(v, dim=(1, 2, 3))
        sub = vf[:, gx, gy, gz, :]
        weight = torch.complex(self.spectral_re, self.spectral_im)
        weight = weight[jx][:, jy][:, :, jz]
        mixed = torch.einsum("bxyzi,xyzio->bxyzo", sub, weight)
        out_ft = torch.zeros_like(vf)
        out_ft[:, gx, gy, gz, :] = mixed
        spectral = torch.fft.irfftn(out_ft, s=(nx, ny, nz), dim=(1, 2, 3))

        local = torch.matmul(v, self.pointwise.transpose(0, 1))
        return act(spectral + local + self.bias)


class FieldOperator(nn.Module):
    """Lift, spectral blocks, projection; channels-last grids."""

    def __init__(self, config: SurrogateConfig):
        super().__init__()
        self.config = config
        self.lift = nn.Linear(INPUT_CHANNELS, config.width)
        self.blocks = nn.ModuleList(
            FourierLayer(config.width, config.modes) for _ in range(config.layers)
        )
        self.project = nn.Linear(config.width, OUTPUT_CHANNELS)

    def forward(self, v: torch.Tensor) -> torch.Tensor:
        """Normalized (B, n, n, n, 4) inputs -> normalized (B, n, n, n, 18)."""
        if v.ndim != 5 or v.shape[-1] != INPUT_CHANNELS:
            raise ValueError(
                f"input must have shape (batch, n, n, n, {INPUT_CHANNELS}), "
                f"got {tuple(v.shape)}"
            )
        if len(set(v.shape[1:4])) != 1:
            raise ValueError(f"input grid must be cubic, got {tuple(v.shape[1:4])}")
        self.config.check_resolution(int(v.shape[1]))
        v = self.lift(v)
        for block in self.blocks:
            v = block(v)
        return self.project(v)

    def export_weights(self) -> "SurrogateWeights":
        """Copy all parameters out as float64 arrays."""

        def grab(t: torch.Tensor) -> np.ndarray:
            return t.detach().cpu().numpy().astype(np.float64)

        layers = tuple(
            FourierLayerWeights(
                spectral_re=grab(b.spectral_re),
                spectral_im=grab(b.spectral_im),
                pointwise=grab(b.pointwise),
                bias=grab(b.bias),
            )
            for b in self.blocks
        )
        return SurrogateWeights(
            lift_weight=grab(self.lift.weight),
            lift_bias=grab(self.lift.bias),
            layers=layers,
            project_weight=grab(self.project.weight),
            project_bias=grab(self.project.bias),
        )

    @classmethod
    def from_weights(cls, weights: "SurrogateWeights") -> "FieldOperator":
        """Rebuild a float64 operator from exported weights."""
        config = SurrogateConfig(
            modes=weights.modes,
            width=weights.width,
            layers=weights.layer_count,
        )
        model = cls(config).double()
        with torch.no_grad():
            model.lift.weight.copy_(_as_tensor(weights.lift_weight))
            model.lift.bias.copy_(_as_tensor(weights.lift_bias))
            for block, layer in zip(model.blocks, weights.layers):
                block.spectral_re.copy_(_as_tensor(layer.spectral_re))
                block.spectral_im.copy_(_as_tensor(layer.spectral_im))
                block.pointwise.copy_(_as_tensor(layer.pointwise))
                block.bias.copy_(_as_tensor(layer.bias))
            model.project.weight.copy_(_as_tensor(weights.project_weight))
            model.project.bias.copy_(_as_tensor(weights.project_bias))
        return model


def fourier_layer_forward(v: np.ndarray, weights: "FourierLayerWeights", activation="relu") -> np.ndarray:
    """Apply one spectral block to a single (n, n, n, width) grid."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 4 or len(set(arr.shape[:3])) != 1:
        raise ValueError(
            f"v must have shape (n, n, n, width), got {arr.shape}"
        )
    if arr.shape[-1] != weights.width:
        raise ValueError(
            f"v carries {arr.shape[-1]} channels but the layer expects "
            f"{weights.width}"
        )
    layer = FourierLayer(weights.width, weights.modes).double()
    with torch.no_grad():
        layer.spectral_re.copy_(_as_tensor(weights.spectral_re))
        layer.spectral_im.copy_(_as_tensor(weights.spectral_im))
        layer.pointwise.copy_(_as_tensor(weights.pointwise))
        layer.bias.copy_(_as_tensor(weights.bias))
        out = layer(torch.from_numpy(arr)[None], activation=activation)
    return out[0].numpy()


def _finite_float(name: str, arr, shape: tuple[int, ...]) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).copy()
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FourierLayerWeights:
    """Weights of one spectral block, as plain arrays."""

    spectral_re: np.ndarray
    spectral_im: np.ndarray
    pointwise: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        spectral = np.asarray(self.spectral_re)
        if spectral.ndim != 5:
            raise ValueError(
                f"spectral_re must be rank 5, got rank {spectral.ndim}"
            )
        modes = spectral.shape[2]
        width = spectral.shape[3]
        span = 2 * modes - 1
        shape = (span, span, modes, width, width)
        object.__setattr__(
            self, "spectral_re", _finite_float("spectral_re", self.spectral_re, shape)
        )
        object.__setattr__(
            self, "spectral_im", _finite_float("spectral_im", self.spectral_im, shape)
        )
        object.__setattr__(
            self, "pointwise", _finite_float("pointwise", self.pointwise, (width, width))
        )
        object.__setattr__(self, "bias", _finite_float("bias", self.bias, (width,)))

    @property
    def modes(self) -> int:
        return int(self.spectral_re.shape[2])

    @property
    def width(self) -> int:
        return int(self.spectral_re.shape[3])


@dataclass(frozen=True)
class SurrogateWeights:
    """Full parameter set: lifting, spectral blocks, projection."""

    lift_weight: np.ndarray
    lift_bias: np.ndarray
    layers: tuple[FourierLayerWeights, ...]
    project_weight: np.ndarray
    project_bias: np.ndarray

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("weights must carry at least one spectral block")
        object.__setattr__(self, "layers", layers)
        width = layers[0].width
        modes = layers[0].modes
        for i, layer in enumerate(layers):
            if layer.width != width or layer.modes != modes:
                raise ValueError(
                    f"layer {i} has width {layer.width}/modes {layer.modes}, "
                    f"expected {width}/{modes}"
                )
        object.__setattr__(
            self,
            "lift_weight",
            _finite_float("lift_weight", self.lift_weight, (width, INPUT_CHANNELS)),
        )
        object.__setattr__(
            self, "lift_bias", _finite_float("lift_bias", self.lift_bias, (width,))
        )
        object.__setattr__(
            self,
            "project_weight",
            _finite_float(
                "project_weight", self.project_weight, (OUTPUT_CHANNELS, width)
            ),
        )
        object.__setattr__(
            self,
            "project_bias",
            _finite_float("project_bias", self.project_bias, (OUTPUT_CHANNELS,)),
        )

    @property
    def width(self) -> int:
        return self.layers[0].width

    @property
    def modes(self) -> int:
        return self.layers[0].modes

    @property
    def layer_count(self) -> int:
        return len(self.layers)
