from __future__ import annotations

import logging

import numpy as np
from scipy import stats

from src.acoustics.room import Rir
from src.errors import EstimationFailedError

logger = logging.getLogger(__name__)

FIT_START_DB = -5.0
FIT_END_DB = -25.0
# the fit end must sit this far above the last finite point of the decay curve
DECAY_HEADROOM_DB = 10.0
MIN_FIT_POINTS = 3


def schroeder_curve(h: np.ndarray) -> np.ndarray:
    """Backward-integrated energy decay in dB, 0 dB at the first sample; -inf once energy is gone."""
    power = np.asarray(h, dtype=np.float64) ** 2
    energy = np.cumsum(power[::-1])[::-1]
    if energy[0] <= 0:
        raise EstimationFailedError("impulse response has no energy")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / energy[0])


def estimate_t60_channel(h: np.ndarray, sample_rate_hz: int) -> float:
    h = np.asarray(h, dtype=np.float64)
    if h.size == 0 or not np.any(h):
        raise EstimationFailedError("impulse response is silent")
    onset = int(np.argmax(np.abs(h)))
    curve = schroeder_curve(h[onset:])
    finite = np.isfinite(curve)
    floor_db = float(curve[finite].min())
    if floor_db > FIT_END_DB - DECAY_HEADROOM_DB:
        raise EstimationFailedError(
            f"decay range of {-floor_db:.1f} dB is insufficient, need at least {-(FIT_END_DB - DECAY_HEADROOM_DB):.0f} dB"
        )
    start = int(np.argmax(curve <= FIT_START_DB))
    end = int(np.argmax(curve <= FIT_END_DB))
    span = np.arange(start, end + 1)
    span = span[np.isfinite(curve[span])]
    if span.size < MIN_FIT_POINTS:
        raise EstimationFailedError(f"only {span.size} samples between {FIT_START_DB} and {FIT_END_DB} dB")
    fit = stats.linregress(span / sample_rate_hz, curve[span])
    if fit.slope >= 0:
        raise EstimationFailedError("energy decay curve does not decay")
    return float(-60.0 / fit.slope)


def estimate_t60(rir: Rir) -> float:
    """T60 by Schroeder integration: line fit over -5..-25 dB, extrapolated to 60 dB, mean over channels."""
    estimates = [estimate_t60_channel(ch, rir.sample_rate_hz) for ch in rir.channels]
    logger.debug("Per-channel T60 estimates: %s", ", ".join(f"{e:.3f}" for e in estimates))
    return float(np.mean(estimates))
