from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from src.dsp.stft import MultichannelSpectrogram
from src.errors import InvalidInputError

OPERATOR_TAGS = ("analytic-linear", "polynomial", "finite-difference", "external")
RECURSION_FORMS = ("contracted", "literal")
MAX_SWEEP_ORDER = 6


@dataclass
class TaylorTerm:
    """T(q) = G^(q)(x) delta^q without the 1/q! factor; a T x F spectrum for the pipeline."""

    order: int
    value: np.ndarray

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=np.complex128)
        if self.order < 0:
            raise InvalidInputError(f"must be non-negative, got {self.order}", field="order")
        if not np.all(np.isfinite(self.value)):
            raise InvalidInputError(f"non-finite entries in term of order {self.order}", field="value")


@dataclass
class CorrectionTerm:
    """delta = direct speech image - mixture = -(V + N), M x T x F."""

    delta: np.ndarray

    def __post_init__(self) -> None:
        self.delta = np.asarray(self.delta, dtype=np.complex128)
        if self.delta.ndim != 3:
            raise InvalidInputError(f"expected M x T x F, got shape {self.delta.shape}", field="delta")


@dataclass
class TaylorConfig:
    Q: int = 3
    operator: str = "analytic-linear"
    factorial_scaling: bool = True
    recursion: str = "contracted"

    def validate(self) -> None:
        if self.Q < 0:
            raise InvalidInputError(f"must be >= 0, got {self.Q}", field="Q")
        if self.operator not in OPERATOR_TAGS:
            raise InvalidInputError(f"unknown operator {self.operator!r}, choose from {OPERATOR_TAGS}", field="operator")
        if self.recursion not in RECURSION_FORMS:
            raise InvalidInputError(f"unknown recursion {self.recursion!r}, choose from {RECURSION_FORMS}", field="recursion")


@dataclass
class OperatorContext:
    """Expansion point x, oracle correction delta, encoded features F0 and operator-private state.

    For spectra ``point`` is the M x T x F mixture; scalar test functions use any array shape.
    """

    point: np.ndarray
    delta: Optional[np.ndarray] = None
    features: Optional[np.ndarray] = None
    mixture: Optional[MultichannelSpectrogram] = None
    state: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.point = np.asarray(self.point, dtype=np.complex128)
        if self.delta is not None:
            self.delta = np.asarray(self.delta, dtype=np.complex128)
            if self.delta.shape != self.point.shape:
                raise InvalidInputError(f"delta {self.delta.shape} does not match point {self.point.shape}", field="delta")

    @classmethod
    def from_mixture(cls, mixture: MultichannelSpectrogram, correction: Optional[CorrectionTerm] = None,
                     features: Optional[np.ndarray] = None) -> "OperatorContext":
        return cls(mixture.data, correction.delta if correction is not None else None, features, mixture)

    def require_delta(self) -> np.ndarray:
        if self.delta is None:
            raise InvalidInputError("operator needs the oracle correction delta", field="delta")
        return self.delta


@dataclass
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise InvalidInputError(f"loss weights must be non-negative, got {self.alpha}, {self.beta}", field="alpha")
