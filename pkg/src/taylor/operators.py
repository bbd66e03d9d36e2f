"""Derivative operators for the order recursion T(q+1) = q T(q) + step(T(q)).

step(T(q)) is the contraction sum_m delta_m dT(q)/dx_m of the term with the correction, where
delta(x) = x* - x moves with the expansion point (d delta / dx = -1). literal_step drops the
contraction and returns sum_m dT(q)/dx_m.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial

from src.beamforming.types import BeamformerWeights
from src.beamforming.weights import apply_beamformer
from src.dsp.stft import MultichannelSpectrogram
from src.errors import InvalidInputError
from src.taylor.terms import OperatorContext, TaylorTerm

logger = logging.getLogger(__name__)

TermFunction = Callable[[np.ndarray], np.ndarray]


class DerivativeOperator:
    tag = ""
    # closed-form operators reproduce the recursion exactly in contracted form
    analytic = False

    def step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        raise NotImplementedError

    def literal_step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        raise NotImplementedError


class AnalyticLinearOperator(DerivativeOperator):
    """G(X) = sum_m conj(w_m) X_m with known weights: T(1) = w^H delta and T(q) = 0 for q >= 2."""

    tag = "analytic-linear"
    analytic = True

    def __init__(self, weights: BeamformerWeights) -> None:
        self.weights = weights

    def _filter(self, data: np.ndarray, ctx: OperatorContext) -> np.ndarray:
        spec = ctx.mixture.like(data) if ctx.mixture is not None else MultichannelSpectrogram(data)
        return apply_beamformer(self.weights, spec).data

    def direct_term(self, q: int, ctx: OperatorContext) -> np.ndarray:
        if q == 0:
            return self._filter(ctx.point, ctx)
        if q == 1:
            return self._filter(ctx.require_delta(), ctx)
        return np.zeros(ctx.point.shape[1:], dtype=np.complex128)

    def step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        q = term.order
        if q == 0:
            return self.direct_term(1, ctx)
        if q == 1:
            return -self.direct_term(1, ctx)
        return np.zeros(ctx.point.shape[1:], dtype=np.complex128)

    def literal_step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        # sum over channels of the partials: +conj(w) for G itself, -conj(w) for T(1)
        ones = np.ones_like(ctx.point)
        if term.order == 0:
            return self._filter(ones, ctx)
        if term.order == 1:
            return -self._filter(ones, ctx)
        return np.zeros(ctx.point.shape[1:], dtype=np.complex128)


class PolynomialOperator(DerivativeOperator):
    """Elementwise polynomial G applied to ``ctx.point``; exact oracle for the recursion."""

    tag = "polynomial"
    analytic = True

    def __init__(self, poly: Union[Polynomial, Sequence[float]]) -> None:
        self.poly = poly if isinstance(poly, Polynomial) else Polynomial(poly)

    def direct_term(self, q: int, ctx: OperatorContext) -> np.ndarray:
        """G^(q)(x) delta^q."""
        if q == 0:
            return self.poly(ctx.point)
        return self.poly.deriv(q)(ctx.point) * ctx.require_delta() ** q

    def taylor_sum(self, ctx: OperatorContext) -> np.ndarray:
        """G(x + delta), the value a complete expansion converges to."""
        return self.poly(ctx.point + ctx.require_delta())

    def step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        q = term.order
        return self.direct_term(q + 1, ctx) - q * self.direct_term(q, ctx)

    def literal_step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        q = term.order
        delta = ctx.require_delta()
        out = self.poly.deriv(q + 1)(ctx.point) * delta ** q
        if q > 0:
            out = out - q * self.poly.deriv(q)(ctx.point) * delta ** (q - 1)
        return out


def directional_derivative(func: TermFunction, x: np.ndarray, v: np.ndarray, h: float, levels: int) -> np.ndarray:
    """d/de func(x + e v) at e = 0 by central differences with Richardson extrapolation.

    The step is halved per level and the Neville tableau is read at its last diagonal entry, so
    the result is a smooth function of x (no adaptive stopping).
    """
    table: list[np.ndarray] = []
    hh = h
    for i in range(levels):
        estimate = (func(x + hh * v) - func(x - hh * v)) / (2.0 * hh)
        fac = 4.0
        row = [estimate]
        for j in range(i):
            row.append((row[j] * fac - table[j]) / (fac - 1.0))
            fac *= 4.0
        table = row
        hh /= 2.0
    return table[-1]


class FiniteDifferenceOperator(DerivativeOperator):
    """Numerical derivatives of a user function G, nesting term functions order by order.

    T_0 = G and T_{k+1}(x) = k T_k(x) + D[T_k](x; delta(x)) with delta(x) = x* - x; the literal form
    differentiates along the all-ones direction instead. Cost grows as (2 * levels) ** q.
    """

    tag = "finite-difference"

    def __init__(self, func: TermFunction, h: float = 1e-4, levels: int = 3) -> None:
        if h <= 0:
            raise InvalidInputError(f"must be positive, got {h}", field="h")
        if levels < 1:
            raise InvalidInputError(f"must be >= 1, got {levels}", field="levels")
        self.func = func
        self.h = h
        self.levels = levels

    def _direction(self, x: np.ndarray, target: np.ndarray, contracted: bool) -> np.ndarray:
        return target - x if contracted else np.ones_like(x)

    def term_function(self, q: int, target: np.ndarray, contracted: bool = True) -> TermFunction:
        fn: TermFunction = self.func
        for k in range(q):
            fn = self._next(fn, k, target, contracted)
        return fn

    def _next(self, fn: TermFunction, k: int, target: np.ndarray, contracted: bool) -> TermFunction:
        def nxt(x: np.ndarray) -> np.ndarray:
            d = directional_derivative(fn, x, self._direction(x, target, contracted), self.h, self.levels)
            return k * fn(x) + d
        return nxt

    def _step(self, term: TaylorTerm, ctx: OperatorContext, contracted: bool) -> np.ndarray:
        target = ctx.point + ctx.require_delta()
        fn = self.term_function(term.order, target, contracted)
        direction = self._direction(ctx.point, target, contracted)
        return directional_derivative(fn, ctx.point, direction, self.h, self.levels)

    def step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        return self._step(term, ctx, contracted=True)

    def literal_step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        return self._step(term, ctx, contracted=False)


class ExternalOperator(DerivativeOperator):
    """Parametric operator given as a torch module.

    Input: float32 tensor (1, C + 2, T, F), the C feature planes of F0 followed by Re/Im of T(q).
    Output: (1, 2, T, F) holding Re/Im of the step. Both recursion forms call the same module.
    """

    tag = "external"

    def __init__(self, module, device: str = "cpu") -> None:
        import torch

        self._torch = torch
        self.device = torch.device(device)
        self.module = module.to(self.device).eval()

    def step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        torch = self._torch
        if ctx.features is None:
            raise InvalidInputError("external operator needs encoded features F0", field="features")
        value = term.value
        if ctx.features.shape[1:] != value.shape:
            raise InvalidInputError(f"features {ctx.features.shape} do not match term {value.shape}", field="features")
        planes = np.concatenate([ctx.features, np.stack([value.real, value.imag])], axis=0)
        x = torch.from_numpy(planes.astype(np.float32))[None].to(self.device)
        with torch.no_grad():
            y = self.module(x)
        out = y.detach().cpu().numpy().astype(np.float64)
        if out.shape != (1, 2) + value.shape:
            raise InvalidInputError(f"operator returned shape {out.shape}, expected {(1, 2) + value.shape}", field="module")
        return out[0, 0] + 1j * out[0, 1]

    def literal_step(self, term: TaylorTerm, ctx: OperatorContext) -> np.ndarray:
        return self.step(term, ctx)


def load_external_operator(path: str | Path, device: str = "cpu") -> ExternalOperator:
    """Load a TorchScript module saved with ``torch.jit.save``."""
    import torch

    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Operator file not found: {p}")
    try:
        module = torch.jit.load(str(p), map_location=device)
    except RuntimeError as e:
        raise OSError(f"Could not load operator {p}: {e}") from e
    logger.info("Loaded external operator from %s", p)
    return ExternalOperator(module, device)
