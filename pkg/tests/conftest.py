from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pytest

from src.dsp.waveform import MultichannelWaveform, Waveform
from src.scene.manifest import write_manifest, write_pair
from src.scene.mixing import MixturePair, SpeechImage, mix_at_snr
from src.utils.audio import write_wave

FS = 16000
# powers of two keep channel ratios exact through float32 WAV storage
GAINS = (1.0, 0.5, 0.25)


@pytest.fixture(autouse=True)
def _isolate_root_logging():
    # CLI runs attach a console handler to the root logger bound to pytest's
    # per-test stdout capture; drop it so later tests don't see a closed stream
    root = logging.getLogger()
    before = list(root.handlers)
    level = root.level
    yield
    for h in list(root.handlers):
        if h not in before:
            root.removeHandler(h)
    root.setLevel(level)
    logging.captureWarnings(False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def float32_exact(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def scaled_copies_pair(
    rng: np.random.Generator,
    pair_id: str,
    num_samples: int = 8000,
    gains: Sequence[float] = GAINS,
    snr_db: float | None = 0.0,
    doa_diff: float = 30.0,
    t60: float = 0.3,
) -> MixturePair:
    """Pair whose direct speech image is ``gains[m] * s`` (no delays, no tail).

    ``snr_db=None`` gives a noise-free pair.
    """
    s = float32_exact(0.1 * rng.standard_normal(num_samples))
    direct = MultichannelWaveform(np.outer(gains, s), FS)
    tail = MultichannelWaveform(np.zeros_like(direct.data), FS)
    meta = {"t60": t60, "doa_diff": doa_diff, "sample_rate_hz": FS}
    if snr_db is None:
        pair = MixturePair(
            mixture=direct,
            anechoic_target=direct.channel(0),
            direct_speech_image=direct,
            reverberant_speech_tail=tail,
            reverberant_noise=MultichannelWaveform(np.zeros_like(direct.data), FS),
            meta={**meta, "snr": 100.0, "noise_gain": 0.0, "normalization": 1.0},
        )
    else:
        noise = MultichannelWaveform(0.1 * rng.standard_normal(direct.data.shape), FS)
        pair = mix_at_snr(SpeechImage(direct, tail), noise, snr_db, meta)
    pair.pair_id = pair_id
    return pair


def write_dataset(pairs: list[MixturePair], out_dir: Path) -> Path:
    entries = [write_pair(p, out_dir) for p in pairs]
    return write_manifest(entries, out_dir, FS)


def speech_like(rng: np.random.Generator, seconds: float, fs: int = FS) -> np.ndarray:
    """Harmonic tone with a gliding pitch under a syllable-rate envelope with pauses."""
    t = np.arange(int(seconds * fs)) / fs
    f0 = 140.0 + 40.0 * np.sin(2.0 * np.pi * 0.7 * t + rng.uniform(0, 2 * np.pi))
    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    voiced = sum(np.sin(k * phase) / k for k in range(1, 20) if k * 220.0 < fs / 2)
    envelope = np.clip(np.sin(2.0 * np.pi * 4.0 * t + rng.uniform(0, 2 * np.pi)), 0.0, None) ** 2
    x = voiced * envelope + 0.01 * rng.standard_normal(t.size)
    return 0.3 * x / np.max(np.abs(x))


def write_sources(root: Path, rng: np.random.Generator, seconds: float = 1.0, count: int = 2) -> tuple[Path, Path]:
    speech_dir, noise_dir = root / "speech", root / "noise"
    for i in range(count):
        write_wave(Waveform(speech_like(rng, seconds), FS), speech_dir / f"utt_{i}.wav")
        write_wave(Waveform(0.1 * rng.standard_normal(int(0.5 * seconds * FS)), FS), noise_dir / f"noise_{i}.wav")
    return speech_dir, noise_dir
