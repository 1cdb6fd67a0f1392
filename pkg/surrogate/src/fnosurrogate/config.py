"""Hyperparameter bundle for the spectral operator surrogate."""

from __future__ import annotations

from dataclasses import asdict, dataclass

__all__ = ["SurrogateConfig"]


@dataclass(frozen=True)
class SurrogateConfig:
    """Architecture and optimization knobs.

    Parameters
    ----------
    modes : int, default 12
        Retained Fourier modes per axis; signed frequencies k with
        |k| < modes pass through each spectral block.
    width : int, default 32
        Channel count inside the operator.
    layers : int, default 4
        Number of spectral blocks between lifting and projection.
    learning_rate : float, default 1e-3
    epochs : int, default 100
    batch_size : int, default 4
    seed : int, default 0
        Drives weight init, the train/test split, and batch order.
    test_fraction : float, default 0.2
        Held-out share of the dataset; the split is disjoint.
    """

    modes: int = 12
    width: int = 32
    layers: int = 4
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 4
    seed: int = 0
    test_fraction: float = 0.2

    def __post_init__(self):
        for name in ("modes", "width", "layers", "epochs", "batch_size"):
            value = int(getattr(self, name))
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "learning_rate", float(self.learning_rate))
        if self.learning_rate <= 0.0:
            raise ValueError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "test_fraction", float(self.test_fraction))
        if not 0.0 <= self.test_fraction < 1.0:
            raise ValueError(
                f"test_fraction must lie in [0, 1), got {self.test_fraction}"
            )

    def check_resolution(self, n: int) -> None:
        """Reject mode counts past the Nyquist limit of an n^3 grid."""
        limit = n // 2 + 1
        if self.modes > limit:
            raise ValueError(
                f"modes {self.modes} exceed the Nyquist limit {limit} "
                f"for resolution {n}"
            )

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SurrogateConfig":
        known = {f: payload[f] for f in cls.__dataclass_fields__ if f in payload}
        return cls(**known)
