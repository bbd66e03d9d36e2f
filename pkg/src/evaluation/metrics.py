from __future__ import annotations

import math

import numpy as np

from src.dsp.waveform import Waveform
from src.errors import InvalidInputError

SI_SDR_CAP_DB = 100.0
SEG_SNR_RANGE_DB = (-10.0, 35.0)
DEFAULT_FRAME_MS = 20.0
# frames more than this far below the loudest reference frame count as silent
VOICED_RANGE_DB = 40.0


def _check_pair(est: Waveform, ref: Waveform) -> tuple[np.ndarray, np.ndarray]:
    if len(est) != len(ref):
        raise InvalidInputError(f"length mismatch: estimate {len(est)}, reference {len(ref)}", field="est")
    if est.sample_rate_hz != ref.sample_rate_hz:
        raise InvalidInputError(f"sample rate mismatch: {est.sample_rate_hz} vs {ref.sample_rate_hz}", field="sample_rate_hz")
    if not np.any(ref.samples):
        raise InvalidInputError("reference has zero energy", field="ref")
    return est.samples, ref.samples


def si_sdr(est: Waveform, ref: Waveform) -> float:
    """10 log10(|a ref|^2 / |a ref - est|^2), a = <est, ref> / |ref|^2, clipped to +-100 dB.

    Any non-zero multiple of ``ref`` (negative ones included) scores the cap.
    """
    x, s = _check_pair(est, ref)
    a = float(np.dot(x, s) / np.dot(s, s))
    target = a * s
    err = target - x
    t_energy = float(np.dot(target, target))
    e_energy = float(np.dot(err, err))
    if t_energy == 0.0:
        return -SI_SDR_CAP_DB
    if e_energy == 0.0:
        return SI_SDR_CAP_DB
    return float(np.clip(10.0 * math.log10(t_energy / e_energy), -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def segmental_snr(est: Waveform, ref: Waveform, frame_ms: float = DEFAULT_FRAME_MS) -> float:
    """Mean per-frame SNR over voiced frames, each clamped to [-10, 35] dB.

    Non-overlapping frames; a trailing partial frame is dropped unless it is the only one. A frame
    whose estimate is all zeros scores the lower clamp.
    """
    x, s = _check_pair(est, ref)
    if frame_ms <= 0:
        raise InvalidInputError(f"must be positive, got {frame_ms}", field="frame_ms")
    n = max(int(round(frame_ms * 1e-3 * ref.sample_rate_hz)), 1)
    n_frames = max(len(s) // n, 1)
    usable = min(n_frames * n, len(s))
    lo, hi = SEG_SNR_RANGE_DB
    s_frames = np.array_split(s[:usable], n_frames)
    x_frames = np.array_split(x[:usable], n_frames)
    ref_energy = np.array([np.dot(f, f) for f in s_frames])
    voiced = ref_energy >= ref_energy.max() * 10.0 ** (-VOICED_RANGE_DB / 10.0)
    scores = []
    for sf, xf, e_ref, keep in zip(s_frames, x_frames, ref_energy, voiced):
        if not keep:
            continue
        if not np.any(xf):
            scores.append(lo)
            continue
        e_err = float(np.dot(sf - xf, sf - xf))
        snr = hi if e_err == 0.0 else 10.0 * math.log10(e_ref / e_err)
        scores.append(float(np.clip(snr, lo, hi)))
    return float(np.mean(scores))
