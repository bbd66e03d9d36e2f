from __future__ import annotations

import numpy as np

from src.dsp.stft import Spectrogram, compress_array
from src.errors import InvalidInputError
from src.taylor.terms import LossWeights

DEFAULT_COMPRESSION = 0.5


def ri_mag_loss(est: Spectrogram, ref: Spectrogram, compression: float = DEFAULT_COMPRESSION) -> float:
    """mean(|Re e - Re r|^2 + |Im e - Im r|^2 + (|e| - |r|)^2) on power-compressed spectra."""
    if est.data.shape != ref.data.shape:
        raise InvalidInputError(f"shape mismatch {est.data.shape} vs {ref.data.shape}", field="ref")
    if not 0 < compression <= 1:
        raise InvalidInputError(f"must lie in (0, 1], got {compression}", field="compression")
    e = compress_array(est.data, compression)
    r = compress_array(ref.data, compression)
    ri = (e.real - r.real) ** 2 + (e.imag - r.imag) ** 2
    mag = (np.abs(e) - np.abs(r)) ** 2
    return float(np.mean(ri + mag))


def multiobjective_loss(
    s0: Spectrogram,
    s_final: Spectrogram,
    bf_label: Spectrogram,
    target: Spectrogram,
    weights: LossWeights | None = None,
    compression: float = DEFAULT_COMPRESSION,
) -> float:
    """alpha * L(S0, TI-MVDR label) + beta * L(S_final, anechoic target)."""
    weights = weights or LossWeights()
    return weights.alpha * ri_mag_loss(s0, bf_label, compression) + weights.beta * ri_mag_loss(s_final, target, compression)
