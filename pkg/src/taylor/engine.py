from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from src.beamforming.types import BeamformerWeights
from src.beamforming.weights import apply_beamformer
from src.dsp.stft import MultichannelSpectrogram, Spectrogram, compress_array
from src.errors import InvalidInputError
from src.taylor.operators import DerivativeOperator
from src.taylor.terms import MAX_SWEEP_ORDER, CorrectionTerm, OperatorContext, TaylorConfig, TaylorTerm

logger = logging.getLogger(__name__)

FEATURE_CHANNELS = ("all", "reference")
FEATURE_COMPRESSION = 0.5


@dataclass
class TaylorResult:
    s0: Spectrogram
    terms: list[TaylorTerm]
    output: Spectrogram


def zeroth_order(spec: MultichannelSpectrogram, weights: BeamformerWeights) -> Spectrogram:
    """S0 = W^H X; the 0th-order term is plain spatial filtering."""
    return apply_beamformer(weights, spec)


def oracle_correction(mixture: MultichannelSpectrogram, direct_speech: MultichannelSpectrogram) -> CorrectionTerm:
    if mixture.data.shape != direct_speech.data.shape:
        raise InvalidInputError(f"direct speech {direct_speech.data.shape} does not match mixture {mixture.data.shape}", field="direct_speech")
    return CorrectionTerm(direct_speech.data - mixture.data)


def encode_features(mixture: MultichannelSpectrogram, channels: str = "all", compression: float = FEATURE_COMPRESSION) -> np.ndarray:
    """F0: Re/Im planes of the power-compressed mixture, (2M or 2) x T x F float."""
    if channels not in FEATURE_CHANNELS:
        raise InvalidInputError(f"choose from {FEATURE_CHANNELS}", field="channels")
    if not 0 < compression <= 1:
        raise InvalidInputError(f"must lie in (0, 1], got {compression}", field="compression")
    data = mixture.data if channels == "all" else mixture.data[:1]
    z = compress_array(data, compression)
    return np.stack([z.real, z.imag], axis=1).reshape((-1,) + data.shape[1:])


def _step(term: TaylorTerm, operator: DerivativeOperator, ctx: OperatorContext, recursion: str) -> np.ndarray:
    out = operator.step(term, ctx) if recursion == "contracted" else operator.literal_step(term, ctx)
    out = np.asarray(out, dtype=np.complex128)
    if out.shape != term.value.shape:
        raise InvalidInputError(f"operator returned {out.shape}, expected {term.value.shape}", field="operator")
    return out


def first_order_term(s0: Spectrogram, operator: DerivativeOperator, ctx: OperatorContext, recursion: str = "contracted") -> TaylorTerm:
    """T(1) = 0 * T(0) + step(T(0)) with T(0) = S0."""
    return TaylorTerm(1, _step(TaylorTerm(0, s0.data), operator, ctx, recursion))


def taylor_step(term: TaylorTerm, operator: DerivativeOperator, ctx: OperatorContext, recursion: str = "contracted") -> TaylorTerm:
    """T(q+1) = q * T(q) + step(T(q))."""
    if term.order < 1:
        raise InvalidInputError(f"high-order recursion starts at q = 1, got {term.order}", field="order")
    q = term.order
    return TaylorTerm(q + 1, q * term.value + _step(term, operator, ctx, recursion))


def superimpose(s0: Spectrogram, terms: Iterable[TaylorTerm], cfg: Optional[TaylorConfig] = None) -> Spectrogram:
    """S = S0 + sum_{q=1..Q} T(q) / q!  (1/q! dropped when factorial_scaling is off)."""
    cfg = cfg or TaylorConfig()
    terms = list(terms)
    orders = sorted(t.order for t in terms)
    if orders != list(range(1, cfg.Q + 1)):
        raise InvalidInputError(f"need orders 1..{cfg.Q} exactly once, got {orders}", field="terms")
    out = s0.data.copy()
    for t in terms:
        if t.value.shape != out.shape:
            raise InvalidInputError(f"term of order {t.order} has shape {t.value.shape}, expected {out.shape}", field="terms")
        out = out + (t.value / math.factorial(t.order) if cfg.factorial_scaling else t.value)
    return s0.like(out)


def expand_terms(s0: Spectrogram, operator: DerivativeOperator, ctx: OperatorContext, max_order: int, recursion: str = "contracted") -> list[TaylorTerm]:
    if recursion == "literal" and operator.analytic:
        logger.warning("Literal recursion with the %s operator is not exact; terms differ from the derivative chain", operator.tag)
    if max_order < 1:
        return []
    terms = [first_order_term(s0, operator, ctx, recursion)]
    while len(terms) < max_order:
        terms.append(taylor_step(terms[-1], operator, ctx, recursion))
    return terms


def run_taylor_pipeline(
    mixture: MultichannelSpectrogram,
    weights: BeamformerWeights,
    operator: DerivativeOperator,
    ctx: OperatorContext,
    cfg: Optional[TaylorConfig] = None,
) -> TaylorResult:
    """0th-order filtering, Q recursive high-order terms, superimposition."""
    cfg = cfg or TaylorConfig()
    cfg.validate()
    s0 = zeroth_order(mixture, weights)
    terms = expand_terms(s0, operator, ctx, cfg.Q, cfg.recursion)
    logger.debug("Taylor pipeline: %d terms with %s operator (%s form)", len(terms), operator.tag, cfg.recursion)
    return TaylorResult(s0, terms, superimpose(s0, terms, cfg))


def sweep_orders(
    mixture: MultichannelSpectrogram,
    weights: BeamformerWeights,
    operator: DerivativeOperator,
    ctx: OperatorContext,
    orders: Iterable[int] = range(MAX_SWEEP_ORDER + 1),
    factorial_scaling: bool = True,
    recursion: str = "contracted",
) -> dict[int, Spectrogram]:
    """Outputs for several Q from one recursion run up to the largest requested order."""
    orders = sorted(set(orders))
    if not orders or orders[0] < 0:
        raise InvalidInputError(f"orders must be non-negative, got {orders}", field="orders")
    s0 = zeroth_order(mixture, weights)
    terms = expand_terms(s0, operator, ctx, orders[-1], recursion)
    return {
        q: superimpose(s0, terms[:q], TaylorConfig(Q=q, factorial_scaling=factorial_scaling, recursion=recursion))
        for q in orders
    }
