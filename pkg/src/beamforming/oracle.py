from __future__ import annotations

import logging
from dataclasses import dataclass, field

from src.acoustics.direct_path import direct_path_rtf
from src.beamforming.covariance import estimate_covariance, estimate_rtf
from src.beamforming.types import BeamformerWeights, Rtf
from src.beamforming.weights import DEFAULT_LAMBDA, DEFAULT_LOADING, apply_beamformer, frame_mvdr, mvdr_weights, mwf_weights
from src.dsp.stft import MultichannelSpectrogram, Spectrogram, StftConfig, istft, stft_multichannel
from src.dsp.waveform import Waveform
from src.errors import InvalidInputError
from src.scene.mixing import MixturePair

logger = logging.getLogger(__name__)

ORACLE_MODES = ("ti-mvdr", "ti-mwf", "frame-mvdr")
RTF_SOURCES = ("eigen", "direct-path")


@dataclass
class BeamformConfig:
    mode: str = "ti-mvdr"
    rtf_source: str = "eigen"
    loading: float = DEFAULT_LOADING
    lam: float = DEFAULT_LAMBDA
    stft: StftConfig = field(default_factory=StftConfig)

    def validate(self) -> None:
        if self.mode not in ORACLE_MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}, choose from {ORACLE_MODES}", field="mode")
        if self.rtf_source not in RTF_SOURCES:
            raise InvalidInputError(f"unknown RTF source {self.rtf_source!r}, choose from {RTF_SOURCES}", field="rtf_source")


@dataclass
class OracleSpectra:
    """STFTs of the mixture, the direct speech image (oracle speech) and V + N (oracle interference)."""

    mixture: MultichannelSpectrogram
    speech: MultichannelSpectrogram
    interference: MultichannelSpectrogram

    @classmethod
    def from_pair(cls, pair: MixturePair, cfg: StftConfig) -> "OracleSpectra":
        return cls(
            stft_multichannel(pair.mixture, cfg),
            stft_multichannel(pair.direct_speech_image, cfg),
            stft_multichannel(pair.interference, cfg),
        )


@dataclass
class OracleResult:
    weights: BeamformerWeights
    output: Spectrogram
    enhanced: Waveform
    spectra: OracleSpectra


def oracle_rtf(pair: MixturePair, spectra: OracleSpectra, cfg: BeamformConfig) -> Rtf:
    if cfg.rtf_source == "direct-path":
        if pair.target_rir is None:
            raise InvalidInputError("direct-path RTF needs the target RIR of the pair", field="rtf_source")
        return direct_path_rtf(pair.target_rir, cfg.stft)
    return estimate_rtf(estimate_covariance(spectra.speech))


def oracle_weights(pair: MixturePair, spectra: OracleSpectra, cfg: BeamformConfig) -> BeamformerWeights:
    cfg.validate()
    if cfg.mode == "frame-mvdr":
        return frame_mvdr(spectra.mixture, spectra.speech, spectra.interference, cfg.lam, cfg.loading)
    cov_n = estimate_covariance(spectra.interference)
    if cfg.mode == "ti-mwf":
        weights = mwf_weights(estimate_covariance(spectra.speech), cov_n, cfg.loading)
    else:
        weights = mvdr_weights(cov_n, oracle_rtf(pair, spectra, cfg), cfg.loading)
    weights.freqs_hz = cfg.stft.bin_freqs(spectra.mixture.sample_rate_hz)
    return weights


def run_oracle(pair: MixturePair, cfg: BeamformConfig | None = None) -> OracleResult:
    """Oracle beamformer on a synthesized pair: direct speech image as speech, V + N as interference."""
    cfg = cfg or BeamformConfig()
    cfg.validate()
    spectra = OracleSpectra.from_pair(pair, cfg.stft)
    weights = oracle_weights(pair, spectra, cfg)
    output = apply_beamformer(weights, spectra.mixture)
    logger.debug("Oracle %s on %s (%d frames)", cfg.mode, pair.pair_id or "pair", output.num_frames)
    return OracleResult(weights, output, istft(output), spectra)
