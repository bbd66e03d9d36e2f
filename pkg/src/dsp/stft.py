from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import get_window

from src.dsp.waveform import MultichannelWaveform, Waveform
from src.errors import InvalidInputError

WINDOW_KINDS = {"hann": "hann", "hamming": "hamming", "rect": "boxcar"}
# synthesis denominators below this are left unnormalized
OLA_FLOOR = 1e-8


@dataclass(frozen=True)
class StftConfig:
    """20 ms periodic Hann window, 50% overlap, 320-point FFT at 16 kHz."""

    window_len: int = 320
    hop_len: int = 160
    fft_len: int = 320
    window_kind: str = "hann"

    def __post_init__(self) -> None:
        if self.window_kind not in WINDOW_KINDS:
            raise InvalidInputError(f"unknown window {self.window_kind!r}, choose from {sorted(WINDOW_KINDS)}", field="window_kind")
        if not 0 < self.hop_len <= self.window_len <= self.fft_len:
            raise InvalidInputError(
                f"need 0 < hop_len <= window_len <= fft_len, got {self.hop_len}/{self.window_len}/{self.fft_len}",
                field="hop_len",
            )

    @property
    def num_bins(self) -> int:
        return self.fft_len // 2 + 1

    def window(self) -> np.ndarray:
        return get_window(WINDOW_KINDS[self.window_kind], self.window_len, fftbins=True).astype(np.float64)

    def bin_freqs(self, sample_rate_hz: int) -> np.ndarray:
        return np.arange(self.num_bins) * sample_rate_hz / self.fft_len


@dataclass
class Spectrogram:
    data: np.ndarray  # T x F complex
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate_hz: int = 16000
    num_samples: Optional[int] = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise InvalidInputError(f"expected T x F data, got shape {self.data.shape}", field="data")

    @property
    def num_frames(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_bins(self) -> int:
        return int(self.data.shape[1])

    def like(self, data: np.ndarray) -> "Spectrogram":
        return Spectrogram(data, self.config, self.sample_rate_hz, self.num_samples)


@dataclass
class MultichannelSpectrogram:
    data: np.ndarray  # M x T x F complex
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate_hz: int = 16000
    num_samples: Optional[int] = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise InvalidInputError(f"expected M x T x F data, got shape {self.data.shape}", field="data")

    @property
    def num_channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_frames(self) -> int:
        return int(self.data.shape[1])

    @property
    def num_bins(self) -> int:
        return int(self.data.shape[2])

    def channel(self, m: int) -> Spectrogram:
        return Spectrogram(self.data[m], self.config, self.sample_rate_hz, self.num_samples)

    def like(self, data: np.ndarray) -> "MultichannelSpectrogram":
        return MultichannelSpectrogram(data, self.config, self.sample_rate_hz, self.num_samples)


def _padded_frames(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    half = cfg.window_len // 2
    padded = np.pad(x, (half, half), mode="reflect")
    # extend the tail with zeros so the last hop is a full frame
    n_frames = 1 + int(np.ceil((padded.size - cfg.window_len) / cfg.hop_len))
    total = (n_frames - 1) * cfg.hop_len + cfg.window_len
    padded = np.pad(padded, (0, total - padded.size))
    return np.lib.stride_tricks.sliding_window_view(padded, cfg.window_len)[::cfg.hop_len]


def stft(wave: Waveform, cfg: Optional[StftConfig] = None) -> Spectrogram:
    cfg = cfg or StftConfig()
    if len(wave) < cfg.window_len:
        raise InvalidInputError(f"signal of {len(wave)} samples is shorter than one window ({cfg.window_len})", field="samples")
    frames = _padded_frames(wave.samples, cfg)
    data = np.fft.rfft(frames * cfg.window(), n=cfg.fft_len, axis=-1)
    return Spectrogram(data, cfg, wave.sample_rate_hz, len(wave))


def istft(spec: Spectrogram, cfg: Optional[StftConfig] = None) -> Waveform:
    cfg = cfg or spec.config
    if spec.num_bins != cfg.num_bins:
        raise InvalidInputError(f"spectrogram has {spec.num_bins} bins, config expects {cfg.num_bins}", field="fft_len")
    win = cfg.window()
    frames = np.fft.irfft(spec.data, n=cfg.fft_len, axis=-1)[:, :cfg.window_len] * win
    total = (spec.num_frames - 1) * cfg.hop_len + cfg.window_len
    out = np.zeros(total)
    norm = np.zeros(total)
    win_sq = win ** 2
    for t in range(spec.num_frames):
        start = t * cfg.hop_len
        out[start:start + cfg.window_len] += frames[t]
        norm[start:start + cfg.window_len] += win_sq
    safe = norm > OLA_FLOOR
    out[safe] /= norm[safe]
    half = cfg.window_len // 2
    out = out[half:]
    if spec.num_samples is not None:
        out = out[:spec.num_samples]
    else:
        out = out[:max(total - 2 * half, 0)]
    return Waveform(out, spec.sample_rate_hz)


def stft_multichannel(wave: MultichannelWaveform, cfg: Optional[StftConfig] = None) -> MultichannelSpectrogram:
    cfg = cfg or StftConfig()
    specs = [stft(wave.channel(m), cfg).data for m in range(wave.num_channels)]
    return MultichannelSpectrogram(np.stack(specs), cfg, wave.sample_rate_hz, wave.num_samples)


def istft_multichannel(spec: MultichannelSpectrogram, cfg: Optional[StftConfig] = None) -> MultichannelWaveform:
    channels = [istft(spec.channel(m), cfg) for m in range(spec.num_channels)]
    return MultichannelWaveform.from_channels(channels)


def compress_power(spec: Spectrogram, factor: float) -> Spectrogram:
    """Raise magnitudes to ``factor`` keeping the phase; used by loss and feature paths only."""
    if not 0 < factor <= 1:
        raise InvalidInputError(f"compression factor must lie in (0, 1], got {factor}", field="factor")
    return spec.like(compress_array(spec.data, factor))


def compress_array(z: np.ndarray, factor: float) -> np.ndarray:
    if factor == 1:
        return np.array(z, dtype=np.complex128)
    mag = np.abs(z)
    return mag ** factor * np.exp(1j * np.angle(z))


def frame_energy_scale(cfg: StftConfig) -> float:
    """Parseval constant: sum |X|^2 over the full DFT grid ~= scale * sum x^2 for broadband input.

    Per frame sum_k |X_k|^2 = fft_len * sum_n (w_n x_n)^2 exactly; overlap-adding the squared
    window contributes on average sum(w^2) / hop per sample (0.75 for hann at 50%, 2 for rect).
    """
    win = cfg.window()
    return cfg.fft_len * float(np.sum(win ** 2)) / cfg.hop_len


def spectral_energy(spec: Spectrogram) -> float:
    """Energy of the full (two-sided) DFT grid reconstructed from the onesided bins."""
    weights = np.full(spec.num_bins, 2.0)
    weights[0] = 1.0
    if spec.config.fft_len % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(np.abs(spec.data) ** 2 * weights))
