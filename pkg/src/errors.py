from __future__ import annotations

from typing import Iterable, Optional


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidInputError(ToolkitError, ValueError):
    def __init__(self, message: str, field: Optional[str] = None) -> None:
        self.field = field
        if field and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


def _located(message: str, frame: Optional[int], freq_bin: Optional[int]) -> str:
    where = []
    if frame is not None:
        where.append(f"t={frame}")
    if freq_bin is not None:
        where.append(f"f={freq_bin}")
    return f"{message} ({', '.join(where)})" if where else message


class SingularMatrixError(ToolkitError, ArithmeticError):
    def __init__(self, message: str, frame: Optional[int] = None, freq_bin: Optional[int] = None) -> None:
        self.frame = frame
        self.freq_bin = freq_bin
        super().__init__(_located(message, frame, freq_bin))


class SingularRtfError(ToolkitError, ArithmeticError):
    def __init__(self, message: str, frame: Optional[int] = None, freq_bin: Optional[int] = None) -> None:
        self.frame = frame
        self.freq_bin = freq_bin
        super().__init__(_located(message, frame, freq_bin))


class EstimationFailedError(ToolkitError, RuntimeError):
    pass


class GenerationFailedError(ToolkitError, RuntimeError):
    pass


class MissingOutputsError(ToolkitError, FileNotFoundError):
    def __init__(self, missing: Iterable[str]) -> None:
        self.missing = sorted(missing)
        super().__init__(f"Missing system outputs for {len(self.missing)} utterance(s): {', '.join(self.missing)}")
