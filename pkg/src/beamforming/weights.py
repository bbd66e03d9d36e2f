from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from src.acoustics.geometry import SPEED_OF_SOUND, ArrayGeometry, steering_matrix
from src.beamforming.covariance import estimate_rtf, recursive_covariance
from src.beamforming.types import BeamformerWeights, Rtf, SpatialCovariance
from src.dsp.stft import MultichannelSpectrogram, Spectrogram
from src.errors import InvalidInputError, SingularMatrixError
from src.utils.storage import read_complex_tensor, write_complex_tensor

logger = logging.getLogger(__name__)

DEFAULT_LOADING = 1e-6
DEFAULT_LAMBDA = 0.95
MAX_CONDITION = 1e13


def _locate(mask: np.ndarray) -> tuple[Optional[int], Optional[int]]:
    idx = tuple(int(i[0]) for i in np.nonzero(mask))
    if len(idx) >= 2:
        return idx[-2], idx[-1]
    return None, (idx[0] if idx else None)


def loaded(phi: np.ndarray, loading: float) -> np.ndarray:
    """Phi + eps * I with eps = loading * trace(Phi) / M.

    Bins whose covariance is identically zero (e.g. a noise-free oracle) are replaced by the
    identity, i.e. treated as spatially white.
    """
    if loading < 0:
        raise InvalidInputError(f"must be non-negative, got {loading}", field="loading")
    m = phi.shape[-1]
    trace = np.real(np.trace(phi, axis1=-2, axis2=-1))
    out = phi + (loading * trace / m)[..., None, None] * np.eye(m)
    empty = ~np.any(phi != 0, axis=(-2, -1))
    if np.any(empty):
        out[empty] = np.eye(m)
    return out


def hermitian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for Hermitian positive definite A via batched Cholesky; b is (..., M)."""
    cond = np.linalg.cond(a)
    bad = ~np.isfinite(cond) | (cond > MAX_CONDITION)
    if np.any(bad):
        frame, freq = _locate(bad)
        raise SingularMatrixError("covariance is numerically singular after loading", frame=frame, freq_bin=freq)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        flat = a.reshape((-1,) + a.shape[-2:])
        failed = np.zeros(flat.shape[0], dtype=bool)
        for i, mat in enumerate(flat):
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                failed[i] = True
        frame, freq = _locate(failed.reshape(a.shape[:-2]))
        raise SingularMatrixError("covariance is not positive definite", frame=frame, freq_bin=freq) from None
    y = np.linalg.solve(chol, b[..., None])
    return np.linalg.solve(np.conj(np.swapaxes(chol, -1, -2)), y)[..., 0]


def _check_pair(cov: SpatialCovariance, rtf: Rtf) -> None:
    if cov.data.shape[:-1] != rtf.data.shape:
        raise InvalidInputError(f"covariance {cov.data.shape} does not match RTF {rtf.data.shape}", field="rtf")


def mvdr_weights(cov_noise: SpatialCovariance, rtf: Rtf, loading: float = DEFAULT_LOADING) -> BeamformerWeights:
    """w = (Phi + eps I)^-1 c / (c^H (Phi + eps I)^-1 c); w^H c = 1 by construction."""
    _check_pair(cov_noise, rtf)
    c = rtf.data
    x = hermitian_solve(loaded(cov_noise.data, loading), c)
    denom = np.einsum("...m,...m->...", np.conj(c), x)
    return BeamformerWeights(x / denom[..., None])


def mwf_weights(cov_speech: SpatialCovariance, cov_noise: SpatialCovariance, loading: float = DEFAULT_LOADING) -> BeamformerWeights:
    """w = (Phi_s + Phi_n + eps I)^-1 Phi_s e_ref."""
    if cov_speech.data.shape != cov_noise.data.shape:
        raise InvalidInputError(f"shape mismatch {cov_speech.data.shape} vs {cov_noise.data.shape}", field="cov_noise")
    total = cov_speech.data + cov_noise.data
    return BeamformerWeights(hermitian_solve(loaded(total, loading), cov_speech.data[..., :, 0]))


def wiener_gain(cov_speech: SpatialCovariance, cov_noise: SpatialCovariance, rtf: Rtf, loading: float = 0.0) -> np.ndarray:
    """Single-channel postfilter xi / (1 + xi), xi = sigma_s^2 c^H Phi_n^-1 c, sigma_s^2 = Phi_s[ref, ref].

    For rank-1 speech covariance, mwf_weights == wiener_gain * mvdr_weights (Woodbury identity).
    """
    _check_pair(cov_noise, rtf)
    c = rtf.data
    x = hermitian_solve(loaded(cov_noise.data, loading), c)
    xi = np.real(cov_speech.data[..., 0, 0]) * np.real(np.einsum("...m,...m->...", np.conj(c), x))
    return xi / (1.0 + xi)


def _check_same(a: MultichannelSpectrogram, b: MultichannelSpectrogram, name: str) -> None:
    if a.data.shape != b.data.shape:
        raise InvalidInputError(f"shape {b.data.shape} does not match mixture {a.data.shape}", field=name)


def frame_mvdr(
    spec: MultichannelSpectrogram,
    oracle_speech: MultichannelSpectrogram,
    oracle_noise: MultichannelSpectrogram,
    lam: float = DEFAULT_LAMBDA,
    loading: float = DEFAULT_LOADING,
) -> BeamformerWeights:
    """Per-frame MVDR from recursively smoothed oracle covariances; RTF from the frame's principal eigenvector."""
    _check_same(spec, oracle_speech, "oracle_speech")
    _check_same(spec, oracle_noise, "oracle_noise")
    cov_s = recursive_covariance(oracle_speech, lam)
    cov_n = recursive_covariance(oracle_noise, lam)
    rtf = estimate_rtf(cov_s)
    weights = mvdr_weights(cov_n, rtf, loading)
    weights.freqs_hz = spec.config.bin_freqs(spec.sample_rate_hz)
    return weights


def apply_beamformer(weights: BeamformerWeights, spec: MultichannelSpectrogram) -> Spectrogram:
    """output_{t,f} = sum_m conj(w_m) X_m; time-invariant weights broadcast over frames."""
    w = weights.data
    if weights.frame_level:
        if w.shape != (spec.num_frames, spec.num_bins, spec.num_channels):
            raise InvalidInputError(f"frame-level weights {w.shape} do not match spectrogram {spec.data.shape}", field="weights")
        out = np.einsum("tfm,mtf->tf", np.conj(w), spec.data)
    else:
        if w.shape != (spec.num_bins, spec.num_channels):
            raise InvalidInputError(f"weights {w.shape} do not match spectrogram {spec.data.shape}", field="weights")
        out = np.einsum("fm,mtf->tf", np.conj(w), spec.data)
    return Spectrogram(out, spec.config, spec.sample_rate_hz, spec.num_samples)


def reference_selector(num_bins: int, num_mics: int) -> BeamformerWeights:
    w = np.zeros((num_bins, num_mics), dtype=np.complex128)
    w[:, 0] = 1.0
    return BeamformerWeights(w)


def delay_and_sum_weights(array: ArrayGeometry, theta: float, freqs: np.ndarray, c: float = SPEED_OF_SOUND) -> BeamformerWeights:
    sv = steering_matrix(array, np.array([theta]), freqs, c)[0]
    return BeamformerWeights(sv / array.num_mics, np.asarray(freqs, dtype=np.float64))


def save_weights(weights: BeamformerWeights, path: str | Path, meta: Optional[dict] = None) -> None:
    header = {"kind": "beamformer_weights", "frame_level": weights.frame_level, **(meta or {})}
    if weights.freqs_hz is not None:
        header["freqs_hz"] = weights.freqs_hz
    write_complex_tensor(weights.data, path, header)


def load_weights(path: str | Path) -> BeamformerWeights:
    data, header = read_complex_tensor(path)
    freqs = header.get("freqs_hz")
    return BeamformerWeights(data, np.asarray(freqs, dtype=np.float64) if freqs is not None else None)
