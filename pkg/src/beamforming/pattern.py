from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import numpy as np

from src.acoustics.geometry import SPEED_OF_SOUND, ArrayGeometry, steering_matrix
from src.beamforming.types import BeamformerWeights
from src.errors import InvalidInputError
from src.utils.storage import ensure_dir

PATTERN_FLOOR_DB = -200.0


def select_bins(weights: BeamformerWeights, freqs_hz: np.ndarray) -> tuple[BeamformerWeights, np.ndarray]:
    """Rows of ``weights`` nearest to the requested frequencies; needs ``weights.freqs_hz``."""
    if weights.freqs_hz is None:
        raise InvalidInputError("weights carry no bin frequencies", field="freqs_hz")
    freqs_hz = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    idx = np.abs(weights.freqs_hz[None, :] - freqs_hz[:, None]).argmin(axis=1)
    return BeamformerWeights(weights.data[..., idx, :], weights.freqs_hz[idx]), weights.freqs_hz[idx]


def beampattern(
    weights: BeamformerWeights,
    array: ArrayGeometry,
    angles: np.ndarray,
    freqs: Optional[np.ndarray] = None,
    frame: Optional[int] = None,
    c: float = SPEED_OF_SOUND,
) -> np.ndarray:
    """B(theta, f) = 20 log10 |w_f^H d(theta, f)| in dB, shape len(angles) x F.

    ``angles`` in radians under the far-field plane-wave model; ``freqs`` are the frequencies of
    the weight rows (defaults to ``weights.freqs_hz``). Frame-level weights need ``frame``.
    """
    if weights.frame_level:
        if frame is None:
            raise InvalidInputError("frame-level weights need a frame index", field="frame")
        if not 0 <= frame < weights.data.shape[0]:
            raise InvalidInputError(f"frame {frame} outside 0..{weights.data.shape[0] - 1}", field="frame")
        weights = weights.frame(frame)
    freqs = weights.freqs_hz if freqs is None else np.asarray(freqs, dtype=np.float64)
    if freqs is None or freqs.shape != (weights.num_bins,):
        raise InvalidInputError(f"need one frequency per weight row ({weights.num_bins})", field="freqs")
    if weights.num_mics != array.num_mics:
        raise InvalidInputError(f"weights have {weights.num_mics} mics, array has {array.num_mics}", field="array")
    sv = steering_matrix(array, angles, freqs, c)  # A x F x M
    response = np.abs(np.einsum("fm,afm->af", np.conj(weights.data), sv))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(response)
    return np.maximum(db, PATTERN_FLOOR_DB)


def write_beampattern_csv(pattern_db: np.ndarray, angles: np.ndarray, freqs: np.ndarray, path: str | Path) -> Path:
    """One row per (theta, freq) pair: theta in degrees, freq in Hz, dB."""
    angles = np.atleast_1d(angles)
    freqs = np.atleast_1d(freqs)
    if pattern_db.shape != (angles.size, freqs.size):
        raise InvalidInputError(f"pattern {pattern_db.shape} does not match grid {angles.size} x {freqs.size}", field="pattern")
    p = Path(path)
    ensure_dir(p.parent)
    try:
        with p.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["theta_deg", "freq_hz", "db"])
            for a, theta in enumerate(angles):
                for k, freq in enumerate(freqs):
                    writer.writerow([f"{np.degrees(theta):.4f}", f"{freq:.2f}", f"{pattern_db[a, k]:.6f}"])
    except OSError as e:
        raise OSError(f"Could not write beampattern CSV {p}: {e}") from e
    return p
