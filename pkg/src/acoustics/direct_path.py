from __future__ import annotations

import numpy as np

from src.acoustics.room import Rir
from src.beamforming.types import Rtf
from src.dsp.stft import StftConfig
from src.errors import SingularRtfError

DIRECT_PATH_WINDOW_MS = 2.5
REFERENCE_FLOOR = 1e-10


def direct_path_window(rir: Rir, window_ms: float = DIRECT_PATH_WINDOW_MS) -> list[np.ndarray]:
    """Absolute sample indices of the direct-path segment per channel, centered on its peak."""
    half = max(int(round(window_ms * 1e-3 * rir.sample_rate_hz / 2.0)), 0)
    segments = []
    for m, h in enumerate(rir.channels):
        if m < rir.direct_path_delays.size:
            peak = int(rir.direct_path_delays[m])
        else:
            peak = int(np.argmax(np.abs(h)))
        lo, hi = max(peak - half, 0), min(peak + half, h.size - 1)
        segments.append(np.arange(lo, hi + 1))
    return segments


def direct_path_rtf(rir: Rir, cfg: StftConfig | None = None, window_ms: float = DIRECT_PATH_WINDOW_MS) -> Rtf:
    """RTF from the windowed direct path, evaluated at the STFT bin frequencies 2*pi*k/fft_len."""
    cfg = cfg or StftConfig()
    k = np.arange(cfg.num_bins)
    transfer = np.zeros((cfg.num_bins, rir.num_channels), dtype=np.complex128)
    for m, idx in enumerate(direct_path_window(rir, window_ms)):
        kernel = np.exp(-2j * np.pi * np.outer(k, idx) / cfg.fft_len)
        transfer[:, m] = kernel @ rir.channels[m, idx]
    ref = transfer[:, 0]
    floor = REFERENCE_FLOOR * max(float(np.max(np.abs(transfer))), np.finfo(float).tiny)
    bad = np.nonzero(np.abs(ref) < floor)[0]
    if bad.size:
        raise SingularRtfError("reference direct path vanishes", freq_bin=int(bad[0]))
    rtf = transfer / ref[:, None]
    rtf[:, 0] = 1.0
    return Rtf(rtf)
