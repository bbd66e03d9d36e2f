from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import soundfile as sf

from src.dsp.waveform import MultichannelWaveform, Waveform
from src.errors import InvalidInputError
from src.utils.storage import ensure_dir

logger = logging.getLogger(__name__)


def _read(path: str | Path) -> tuple[np.ndarray, int]:
    try:
        data, sr = sf.read(str(path), dtype="float64", always_2d=True)
    except RuntimeError as e:
        raise OSError(f"Could not read WAV {path}: {e}") from e
    return data.T, int(sr)


def _check_rate(sr: int, expected: Optional[int], path: str | Path) -> None:
    if expected is not None and sr != expected:
        raise InvalidInputError(f"{path} is sampled at {sr} Hz, expected {expected} Hz (no resampling)", field="sample_rate_hz")


def read_wave(path: str | Path, expected_rate: Optional[int] = None) -> Waveform:
    data, sr = _read(path)
    _check_rate(sr, expected_rate, path)
    if data.shape[0] > 1:
        logger.debug("Using first channel of %d-channel file %s", data.shape[0], path)
    return Waveform(data[0], sr)


def read_multichannel(path: str | Path, expected_rate: Optional[int] = None) -> MultichannelWaveform:
    data, sr = _read(path)
    _check_rate(sr, expected_rate, path)
    return MultichannelWaveform(data, sr)


def write_wave(wave: Waveform | MultichannelWaveform, path: str | Path, subtype: str = "FLOAT") -> None:
    p = Path(path)
    ensure_dir(p.parent)
    data = wave.samples if isinstance(wave, Waveform) else wave.data.T
    try:
        sf.write(str(p), np.asarray(data, dtype=np.float32 if subtype == "FLOAT" else np.float64), wave.sample_rate_hz, subtype=subtype)
    except RuntimeError as e:
        raise OSError(f"Could not write WAV {p}: {e}") from e
