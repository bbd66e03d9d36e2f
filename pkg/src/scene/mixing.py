from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from src.acoustics.room import Rir, simulate_rir
from src.dsp.waveform import MultichannelWaveform, Waveform, check_compatible, truncate
from src.errors import InvalidInputError
from src.scene.sampling import SceneSpec, draw_scene
from src.utils.audio import read_wave

logger = logging.getLogger(__name__)

DEFAULT_SPLIT_MS = 2.5
CLIP_PEAK = 0.99


@dataclass
class SpeechImage:
    """Reverberant speech at the array, split into direct-path image and reverberant tail."""

    direct: MultichannelWaveform
    tail: MultichannelWaveform

    def __post_init__(self) -> None:
        check_compatible(self.direct, self.tail)

    @property
    def full(self) -> MultichannelWaveform:
        return self.direct + self.tail


@dataclass
class MixturePair:
    """One synthesized scene; mixture = direct_speech_image + reverberant_speech_tail + reverberant_noise."""

    mixture: MultichannelWaveform
    anechoic_target: Waveform
    direct_speech_image: MultichannelWaveform
    reverberant_speech_tail: MultichannelWaveform
    reverberant_noise: MultichannelWaveform
    meta: dict = field(default_factory=dict)
    target_rir: Optional[Rir] = None
    pair_id: str = ""

    @property
    def interference(self) -> MultichannelWaveform:
        """R = V + N, everything in the mixture except the direct speech image."""
        return self.reverberant_speech_tail + self.reverberant_noise

    @property
    def sample_rate_hz(self) -> int:
        return self.mixture.sample_rate_hz


def _convolve(dry: np.ndarray, h: np.ndarray, n: int) -> np.ndarray:
    return fftconvolve(dry, h)[:n]


def spatialize(dry: Waveform, rir: Rir, split_ms: float = DEFAULT_SPLIT_MS) -> SpeechImage:
    """Convolve ``dry`` with every RIR channel, split ``split_ms`` after each channel's direct-path peak.

    Outputs keep the dry signal's length.
    """
    if dry.sample_rate_hz != rir.sample_rate_hz:
        raise InvalidInputError(f"dry signal at {dry.sample_rate_hz} Hz, RIR at {rir.sample_rate_hz} Hz", field="sample_rate_hz")
    if split_ms < 0:
        raise InvalidInputError(f"must be non-negative, got {split_ms}", field="split_ms")
    n = len(dry)
    split = int(round(split_ms * 1e-3 * rir.sample_rate_hz))
    direct = np.zeros((rir.num_channels, n))
    tail = np.zeros((rir.num_channels, n))
    for m, h in enumerate(rir.channels):
        cut = min(int(rir.direct_path_delays[m]) + split + 1, h.size) if m < rir.direct_path_delays.size else h.size
        h_direct = np.zeros_like(h)
        h_direct[:cut] = h[:cut]
        direct[m] = _convolve(dry.samples, h_direct, n)
        tail[m] = _convolve(dry.samples, h - h_direct, n)
    fs = dry.sample_rate_hz
    return SpeechImage(MultichannelWaveform(direct, fs), MultichannelWaveform(tail, fs))


def reference_power(wave: MultichannelWaveform) -> float:
    return float(np.mean(wave.data[0] ** 2))


def measured_snr_db(speech: MultichannelWaveform, noise: MultichannelWaveform) -> float:
    return 10.0 * math.log10(reference_power(speech) / reference_power(noise))


def mix_at_snr(speech_rev: SpeechImage, noise_rev: MultichannelWaveform, snr_db: float, meta: Optional[dict] = None) -> MixturePair:
    """Scale the noise so the reference-channel SNR of (direct + tail) speech vs noise is ``snr_db``.

    If the mixture peak exceeds 0.99 all components are scaled by one global factor, recorded as
    ``meta["normalization"]``; the noise gain is recorded as ``meta["noise_gain"]``.
    """
    check_compatible(speech_rev.direct, noise_rev)
    speech = speech_rev.full
    ps, pn = reference_power(speech), reference_power(noise_rev)
    if ps <= 0:
        raise InvalidInputError("speech has zero energy at the reference microphone", field="speech_rev")
    if pn <= 0:
        raise InvalidInputError("noise has zero energy at the reference microphone", field="noise_rev")
    gain = math.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0)))
    noise = noise_rev.data * gain
    mixture = speech.data + noise
    peak = float(np.max(np.abs(mixture)))
    norm = CLIP_PEAK / peak if peak > CLIP_PEAK else 1.0
    if norm != 1.0:
        logger.debug("Mixture peak %.3f normalized by %.4f", peak, norm)
    fs = speech.sample_rate_hz
    direct = speech_rev.direct.data * norm
    meta = dict(meta or {})
    meta.update({"snr": float(snr_db), "noise_gain": gain, "normalization": norm})
    return MixturePair(
        mixture=MultichannelWaveform(mixture * norm, fs),
        anechoic_target=Waveform(direct[0], fs),
        direct_speech_image=MultichannelWaveform(direct, fs),
        reverberant_speech_tail=MultichannelWaveform(speech_rev.tail.data * norm, fs),
        reverberant_noise=MultichannelWaveform(noise * norm, fs),
        meta=meta,
    )


def _crop(wave: Waveform, n: int, rng: np.random.Generator) -> Waveform:
    """Random n-sample excerpt; shorter signals are tiled."""
    x = wave.samples
    if x.size < n:
        x = np.resize(x, n)
    start = int(rng.integers(0, x.size - n + 1))
    return Waveform(x[start:start + n], wave.sample_rate_hz)


def synthesize_scene(spec: SceneSpec, pair_id: str = "") -> MixturePair:
    """Load dry sources, draw the scene, simulate both RIRs, spatialize and mix."""
    rng = np.random.default_rng(spec.seed)
    room, placement = draw_scene(spec, rng)
    speech = truncate(read_wave(spec.speech_source, spec.sample_rate_hz), spec.max_duration_s)
    if not np.any(speech.samples):
        raise InvalidInputError(f"{spec.speech_source} is silent", field="speech_source")
    noise = _crop(read_wave(spec.noise_source, spec.sample_rate_hz), len(speech), rng)

    target_rir = simulate_rir(room)
    noise_rir = simulate_rir(placement.room_for(placement.noise_pos, spec))
    speech_img = spatialize(speech, target_rir)
    noise_img = spatialize(noise, noise_rir).full

    meta = placement.to_meta()
    meta.update({"speech_source": str(spec.speech_source), "noise_source": str(spec.noise_source),
                 "sample_rate_hz": spec.sample_rate_hz, "attempts": placement.attempts})
    pair = mix_at_snr(speech_img, noise_img, placement.snr_db, meta)
    pair.target_rir = target_rir
    pair.pair_id = pair_id
    logger.debug("Scene %s: T60 %.2f s, DOA %.1f/%.1f, SNR %.2f dB", pair_id or spec.seed,
                 placement.t60, placement.target_doa, placement.noise_doa, placement.snr_db)
    return pair
