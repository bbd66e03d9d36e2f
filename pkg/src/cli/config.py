"""Run configurations for the command-line tools.

Each subcommand has one flat dataclass. Values are resolved as command-line flags over the
``--config`` JSON file over the dataclass defaults, and the result is echoed next to the outputs
as ``resolved_config.json``.
"""
from __future__ import annotations

import os
from collections import abc
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence, Type, TypeVar, Union, get_args, get_origin, get_type_hints

from src.beamforming.weights import DEFAULT_LAMBDA, DEFAULT_LOADING
from src.dsp.stft import StftConfig
from src.errors import InvalidInputError
from src.utils.storage import read_json, write_json

JOBS_ENV = "TAYLORBF_JOBS"
RESOLVED_CONFIG_NAME = "resolved_config.json"

C = TypeVar("C")


def default_jobs() -> int:
    raw = os.getenv(JOBS_ENV, "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        raise InvalidInputError(f"{JOBS_ENV}={raw!r} is not an integer", field="jobs") from None


@dataclass
class SimulateRirConfig:
    out: str = "data/rir/rir.wav"
    dims: Sequence[float] = (6.0, 5.0, 3.0)
    t60: float = 0.4
    source_pos: Sequence[float] = (2.0, 3.5, 1.5)
    array_center: Sequence[float] = (3.0, 2.5, 1.5)
    num_mics: int = 6
    mic_spacing: float = 0.05
    max_order: Optional[int] = None
    interpolation: str = "nearest"
    sample_rate_hz: int = 16000
    random: bool = False
    seed: int = 0


@dataclass
class SynthDatasetConfig:
    speech_dir: str = "data/speech"
    noise_dir: str = "data/noise"
    out_dir: str = "data/dataset"
    n: int = 10
    seed: int = 0
    doa_proportions: Sequence[float] = (1.0, 1.0, 1.0, 1.0)
    min_doa_separation: float = 5.0
    snr_range_db: Sequence[float] = (-6.0, 6.0)
    t60_range: Sequence[float] = (0.1, 0.7)
    dims_min: Sequence[float] = (5.0, 5.0, 3.0)
    dims_max: Sequence[float] = (10.0, 10.0, 4.0)
    distance_range: Sequence[float] = (0.5, 5.0)
    distance_step: float = 0.5
    num_mics: int = 6
    mic_spacing: float = 0.05
    max_duration_s: float = 6.0
    interpolation: str = "nearest"
    max_order: Optional[int] = None
    sample_rate_hz: int = 16000
    jobs: int = field(default_factory=default_jobs)


@dataclass
class BeamformRunConfig:
    manifest: str = "data/dataset/manifest.json"
    out_dir: str = "data/enhanced"
    mode: str = "ti-mvdr"
    rtf_source: str = "eigen"
    loading: float = DEFAULT_LOADING
    lam: float = DEFAULT_LAMBDA
    window_len: int = 320
    hop_len: int = 160
    fft_len: int = 320
    window_kind: str = "hann"
    Q: int = 3
    operator: str = "analytic-linear"
    operator_path: Optional[str] = None
    factorial_scaling: bool = True
    recursion: str = "contracted"
    features: str = "all"
    fd_step: float = 1e-4
    dump_weights: bool = False
    dump_terms: bool = False
    jobs: int = field(default_factory=default_jobs)

    def stft_config(self) -> StftConfig:
        return StftConfig(self.window_len, self.hop_len, self.fft_len, self.window_kind)


@dataclass
class EvaluateConfig:
    manifest: str = "data/dataset/manifest.json"
    outputs: str = "data/enhanced"
    out_dir: str = "data/report"
    jobs: int = field(default_factory=default_jobs)


@dataclass
class BeampatternConfig:
    out: str = "data/beampattern/beampattern.csv"
    weights_path: Optional[str] = None
    frame: Optional[int] = None
    kind: str = "mvdr"
    target_deg: float = 125.0
    interferer_deg: float = 55.0
    interferer_to_white_db: float = 20.0
    num_mics: int = 6
    mic_spacing: float = 0.05
    freqs_hz: Sequence[float] = (1000.0, 2000.0, 3000.0)
    angle_min_deg: float = 0.0
    angle_max_deg: float = 180.0
    angle_step_deg: float = 1.0


def _check_value(name: str, hint: Any, value: Any) -> Any:
    """Value of ``name`` matching ``hint``; ints widen to float and JSON arrays become tuples."""
    if get_origin(hint) is Union:
        if value is None and type(None) in get_args(hint):
            return None
        hint = next(a for a in get_args(hint) if a is not type(None))
    if get_origin(hint) is abc.Sequence:
        if not isinstance(value, (list, tuple)):
            raise InvalidInputError(f"expected a list, got {value!r}", field=name)
        return tuple(_check_value(name, get_args(hint)[0], v) for v in value)
    if hint is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if hint is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if hint in (bool, str) and isinstance(value, hint):
        return value
    raise InvalidInputError(f"expected {getattr(hint, '__name__', hint)}, got {type(value).__name__} {value!r}", field=name)


def resolve_config(cls: Type[C], config_path: Optional[str | Path] = None, overrides: Optional[dict[str, Any]] = None) -> C:
    """Defaults < JSON file < explicit overrides; unknown keys and mistyped values are rejected by name."""
    names = {f.name for f in fields(cls)}
    hints = get_type_hints(cls)
    values: dict[str, Any] = {}
    if config_path is not None:
        data = read_json(config_path)
        if not isinstance(data, dict):
            raise InvalidInputError(f"{config_path} must hold a JSON object", field="config")
        unknown = sorted(set(data) - names)
        if unknown:
            raise InvalidInputError(f"unknown keys in {config_path}: {', '.join(unknown)}", field=unknown[0])
        values.update(data)
    for key, value in (overrides or {}).items():
        if key not in names:
            raise InvalidInputError(f"unknown option {key!r}", field=key)
        values[key] = value
    return cls(**{key: _check_value(key, hints[key], value) for key, value in values.items()})


def write_resolved_config(cfg: Any, out_dir: str | Path, command: str) -> Path:
    path = Path(out_dir) / RESOLVED_CONFIG_NAME
    write_json({"command": command, **asdict(cfg)}, path)
    return path
