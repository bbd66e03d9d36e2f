from __future__ import annotations

import logging

import numpy as np
from scipy.signal import lfilter

from src.beamforming.types import Rtf, SpatialCovariance
from src.dsp.stft import MultichannelSpectrogram
from src.errors import InvalidInputError, SingularRtfError

logger = logging.getLogger(__name__)

EIGEN_GAP_WARNING = 10.0
# relative tolerance for treating the top eigenvalues as tied
EIGEN_TIE_TOL = 1e-9
RTF_REFERENCE_FLOOR = 1e-10


def _hermitize(phi: np.ndarray) -> np.ndarray:
    return 0.5 * (phi + np.conj(np.swapaxes(phi, -1, -2)))


def outer_products(spec: MultichannelSpectrogram) -> np.ndarray:
    """X_{t,f} X_{t,f}^H, shape T x F x M x M."""
    x = np.transpose(spec.data, (1, 2, 0))
    return x[..., :, None] * np.conj(x[..., None, :])


def estimate_covariance(spec: MultichannelSpectrogram) -> SpatialCovariance:
    if spec.num_frames < 1:
        raise InvalidInputError("spectrogram has no frames", field="spec")
    phi = np.einsum("mtf,ntf->fmn", spec.data, np.conj(spec.data)) / spec.num_frames
    return SpatialCovariance(_hermitize(phi))


def recursive_covariance(spec: MultichannelSpectrogram, lam: float) -> SpatialCovariance:
    """Phi_t = lam * Phi_{t-1} + (1 - lam) * X_t X_t^H, started at the first outer product."""
    if not 0 < lam < 1:
        raise InvalidInputError(f"smoothing factor must lie in (0, 1), got {lam}", field="lambda")
    if spec.num_frames < 1:
        raise InvalidInputError("spectrogram has no frames", field="spec")
    outer = outer_products(spec)
    # y_0 = (1 - lam) x_0 + zi = x_0
    zi = lam * outer[:1]
    phi, _ = lfilter([1.0 - lam], [1.0, -lam], outer, axis=0, zi=zi)
    return SpatialCovariance(_hermitize(phi))


def _principal_vectors(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(phi)
    top = vals[..., -1]
    second = vals[..., -2] if phi.shape[-1] > 1 else np.zeros_like(top)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(second > 0, top / np.where(second > 0, second, 1.0), np.inf)
    principal = vecs[..., :, -1].copy()

    # tied top eigenvalues: project basis vectors onto the top eigenspace, lowest index first
    scale = np.maximum(np.abs(top), np.finfo(float).tiny)
    tied = (vals[..., -1] - vals[..., -2] <= EIGEN_TIE_TOL * scale) if phi.shape[-1] > 1 else np.zeros(top.shape, bool)
    for idx in zip(*np.nonzero(tied)):
        v, w = vecs[idx], vals[idx]
        space = v[:, w >= w[-1] - EIGEN_TIE_TOL * scale[idx]]
        proj = space @ np.conj(space.T)
        for j in range(proj.shape[0]):
            cand = proj[:, j]
            if np.linalg.norm(cand) > EIGEN_TIE_TOL:
                principal[idx] = cand / np.linalg.norm(cand)
                break
    return principal, gap


def estimate_rtf(cov_speech: SpatialCovariance) -> Rtf:
    """Principal eigenvector per frequency (and frame), normalized by its reference element."""
    vec, gap = _principal_vectors(cov_speech.data)
    ref = vec[..., 0]
    norms = np.linalg.norm(vec, axis=-1)
    bad = np.abs(ref) < RTF_REFERENCE_FLOOR * norms
    if np.any(bad):
        where = tuple(int(i[0]) for i in np.nonzero(bad))
        if len(where) == 2:
            raise SingularRtfError("principal eigenvector has a vanishing reference element", frame=where[0], freq_bin=where[1])
        raise SingularRtfError("principal eigenvector has a vanishing reference element", freq_bin=where[0])
    rtf = vec / ref[..., None]
    rtf[..., 0] = 1.0
    low = gap < EIGEN_GAP_WARNING
    if np.any(low):
        logger.warning("RTF estimate unreliable in %d of %d bins (eigen-gap < %.0f, worst %.2f)",
                       int(low.sum()), low.size, EIGEN_GAP_WARNING, float(np.min(gap)))
    return Rtf(rtf, eigen_gap=gap)
