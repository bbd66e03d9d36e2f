from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import InvalidInputError


@dataclass
class SpatialCovariance:
    """F x M x M, or T x F x M x M for frame-indexed (recursive) estimates."""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim not in (3, 4) or self.data.shape[-1] != self.data.shape[-2]:
            raise InvalidInputError(f"expected [T x] F x M x M, got shape {self.data.shape}", field="data")

    @property
    def frame_indexed(self) -> bool:
        return self.data.ndim == 4

    @property
    def num_mics(self) -> int:
        return int(self.data.shape[-1])

    @property
    def num_bins(self) -> int:
        return int(self.data.shape[-3])

    def frame(self, t: int) -> "SpatialCovariance":
        if not self.frame_indexed:
            return self
        return SpatialCovariance(self.data[t])

    def __add__(self, other: "SpatialCovariance") -> "SpatialCovariance":
        if self.data.shape != other.data.shape:
            raise InvalidInputError(f"shape mismatch {self.data.shape} vs {other.data.shape}", field="data")
        return SpatialCovariance(self.data + other.data)


@dataclass
class Rtf:
    """Relative transfer function, F x M (or T x F x M); element 0 is exactly 1."""

    data: np.ndarray
    eigen_gap: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim not in (2, 3):
            raise InvalidInputError(f"expected [T x] F x M, got shape {self.data.shape}", field="data")

    @property
    def num_mics(self) -> int:
        return int(self.data.shape[-1])


@dataclass
class BeamformerWeights:
    """Time-invariant F x M or frame-level T x F x M complex weights."""

    data: np.ndarray
    freqs_hz: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim not in (2, 3):
            raise InvalidInputError(f"expected [T x] F x M, got shape {self.data.shape}", field="data")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("non-finite weights", field="data")

    @property
    def frame_level(self) -> bool:
        return self.data.ndim == 3

    @property
    def num_mics(self) -> int:
        return int(self.data.shape[-1])

    @property
    def num_bins(self) -> int:
        return int(self.data.shape[-2])

    def frame(self, t: int) -> "BeamformerWeights":
        if not self.frame_level:
            return self
        return BeamformerWeights(self.data[t], self.freqs_hz)

    def scaled(self, gain: np.ndarray) -> "BeamformerWeights":
        """Multiply by a per-frequency real/complex gain (broadcast over mics)."""
        return BeamformerWeights(self.data * np.asarray(gain)[..., None], self.freqs_hz)
