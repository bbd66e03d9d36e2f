from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import InvalidInputError

DEFAULT_SAMPLE_RATE = 16000


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidInputError(f"expected 1-D samples, got shape {self.samples.shape}", field="samples")
        if self.sample_rate_hz <= 0:
            raise InvalidInputError("must be positive", field="sample_rate_hz")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidInputError("non-finite sample values", field="samples")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass
class MultichannelWaveform:
    """M x N samples; channel 0 is the reference microphone."""

    data: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise InvalidInputError(f"expected M x N samples with M >= 1, got shape {self.data.shape}", field="data")
        if self.sample_rate_hz <= 0:
            raise InvalidInputError("must be positive", field="sample_rate_hz")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("non-finite sample values", field="data")

    @property
    def num_channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_samples(self) -> int:
        return int(self.data.shape[1])

    def channel(self, m: int) -> Waveform:
        return Waveform(self.data[m], self.sample_rate_hz)

    @property
    def reference(self) -> Waveform:
        return self.channel(0)

    @classmethod
    def from_channels(cls, channels: list[Waveform]) -> "MultichannelWaveform":
        if not channels:
            raise InvalidInputError("at least one channel is required", field="channels")
        rates = {w.sample_rate_hz for w in channels}
        lengths = {len(w) for w in channels}
        if len(rates) != 1 or len(lengths) != 1:
            raise InvalidInputError("channels must share length and sample rate", field="channels")
        return cls(np.stack([w.samples for w in channels]), channels[0].sample_rate_hz)

    def __add__(self, other: "MultichannelWaveform") -> "MultichannelWaveform":
        check_compatible(self, other)
        return MultichannelWaveform(self.data + other.data, self.sample_rate_hz)

    def scaled(self, gain: float) -> "MultichannelWaveform":
        return MultichannelWaveform(self.data * gain, self.sample_rate_hz)


def check_compatible(a: MultichannelWaveform, b: MultichannelWaveform) -> None:
    if a.sample_rate_hz != b.sample_rate_hz:
        raise InvalidInputError(f"sample rate mismatch: {a.sample_rate_hz} vs {b.sample_rate_hz}", field="sample_rate_hz")
    if a.data.shape != b.data.shape:
        raise InvalidInputError(f"shape mismatch: {a.data.shape} vs {b.data.shape}", field="data")


def truncate(wave: Waveform, seconds: float) -> Waveform:
    n = int(round(seconds * wave.sample_rate_hz))
    return Waveform(wave.samples[:n], wave.sample_rate_hz)
