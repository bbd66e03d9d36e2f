from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.errors import InvalidInputError

SPEED_OF_SOUND = 343.0


@dataclass
class ArrayGeometry:
    """Microphone positions in meters, M x 3; row 0 is the reference microphone."""

    mic_positions: np.ndarray

    def __post_init__(self) -> None:
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=np.float64))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise InvalidInputError(f"expected M x 3 coordinates, got shape {pos.shape}", field="mic_positions")
        dists = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        if np.any(dists[np.triu_indices(pos.shape[0], k=1)] <= 0):
            raise InvalidInputError("microphone positions must be distinct", field="mic_positions")
        self.mic_positions = pos

    @property
    def num_mics(self) -> int:
        return int(self.mic_positions.shape[0])

    @property
    def center(self) -> np.ndarray:
        return self.mic_positions.mean(axis=0)

    @property
    def axis(self) -> np.ndarray:
        """Unit vector from the first to the last microphone; +x for a single microphone."""
        if self.num_mics < 2:
            return np.array([1.0, 0.0, 0.0])
        d = self.mic_positions[-1] - self.mic_positions[0]
        return d / np.linalg.norm(d)

    @property
    def broadside(self) -> np.ndarray:
        """Horizontal unit vector perpendicular to the axis; sources are placed on this side."""
        n = np.cross([0.0, 0.0, 1.0], self.axis)
        norm = np.linalg.norm(n)
        return n / norm if norm > 0 else np.array([0.0, 1.0, 0.0])

    @classmethod
    def ula(cls, num_mics: int = 6, spacing: float = 0.05, center: Sequence[float] = (0.0, 0.0, 0.0), axis: str = "x") -> "ArrayGeometry":
        """Uniform linear array along ``axis``; microphone 1 sits at the negative end."""
        if num_mics < 1:
            raise InvalidInputError("must be >= 1", field="num_mics")
        if spacing <= 0:
            raise InvalidInputError("must be positive", field="spacing")
        direction = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0])}.get(axis)
        if direction is None:
            raise InvalidInputError(f"unsupported axis {axis!r}", field="axis")
        offsets = (np.arange(num_mics) - (num_mics - 1) / 2.0) * spacing
        return cls(np.asarray(center, dtype=np.float64)[None, :] + offsets[:, None] * direction[None, :])

    def to_dict(self) -> dict:
        return {"mic_positions": self.mic_positions.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        return cls(np.asarray(d["mic_positions"], dtype=np.float64))


def direction_vector(theta: float) -> np.ndarray:
    """Unit vector in the horizontal plane pointing from the array towards a source at ``theta``."""
    return np.array([np.cos(theta), np.sin(theta), 0.0])


def relative_delays(array: ArrayGeometry, theta: float, c: float = SPEED_OF_SOUND) -> np.ndarray:
    """Far-field arrival delay of each microphone relative to the reference, in seconds."""
    offsets = array.mic_positions - array.mic_positions[0]
    return -(offsets @ direction_vector(theta)) / c


def steering_vector(array: ArrayGeometry, theta: float, freq: float, c: float = SPEED_OF_SOUND) -> np.ndarray:
    if freq < 0:
        raise InvalidInputError(f"frequency must be non-negative, got {freq}", field="freq")
    tau = relative_delays(array, theta, c)
    return np.exp(-2j * np.pi * freq * tau)


def steering_matrix(array: ArrayGeometry, thetas: np.ndarray, freqs: np.ndarray, c: float = SPEED_OF_SOUND) -> np.ndarray:
    """Steering vectors on a grid, shape len(thetas) x len(freqs) x M."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    if np.any(freqs < 0):
        raise InvalidInputError("frequencies must be non-negative", field="freqs")
    tau = np.stack([relative_delays(array, th, c) for th in thetas])  # A x M
    return np.exp(-2j * np.pi * freqs[None, :, None] * tau[:, None, :])


def fold_doa(theta_deg: float) -> float:
    """Angle to the array axis in [0, 180]; a linear array sees theta and -theta alike."""
    t = float(theta_deg) % 360.0
    return 360.0 - t if t > 180.0 else t


def doa_degrees(array: ArrayGeometry, source_pos: Sequence[float]) -> float:
    """Angle in [0, 180] between the array axis and the direction from the array center to ``source_pos``."""
    d = np.asarray(source_pos, dtype=np.float64) - array.center
    norm = np.linalg.norm(d)
    if norm == 0:
        raise InvalidInputError("source coincides with the array center", field="source_pos")
    return float(np.degrees(np.arccos(np.clip(d @ array.axis / norm, -1.0, 1.0))))


def doa_difference(a_deg: float, b_deg: float) -> float:
    """Separation of two DOAs as the array resolves them, in [0, 180]."""
    return abs(fold_doa(a_deg) - fold_doa(b_deg))
