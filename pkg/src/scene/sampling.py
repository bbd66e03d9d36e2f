"""Random scene draws: room, T60, array placement, target and interferer positions, SNR.

Every draw of a scene goes through one ``numpy.random.Generator`` (PCG64) seeded from the scene
seed, so a SceneSpec fully determines the scene on any platform.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.acoustics.geometry import ArrayGeometry, doa_degrees, doa_difference
from src.acoustics.room import RoomSpec, sabine_absorption
from src.dsp.waveform import DEFAULT_SAMPLE_RATE
from src.errors import GenerationFailedError, InvalidInputError

logger = logging.getLogger(__name__)

DOA_BINS: tuple[tuple[str, float, float], ...] = (
    ("0-15", 0.0, 15.0),
    ("15-45", 15.0, 45.0),
    ("45-90", 45.0, 90.0),
    ("90-180", 90.0, 180.0),
)
DOA_BIN_LABELS = tuple(label for label, _, _ in DOA_BINS)
# sources and the array keep this distance from every wall
WALL_MARGIN = 0.3
ARRAY_HEIGHT_RANGE = (1.0, 2.0)


def doa_bin_label(diff_deg: float) -> str:
    """Bin of an angular difference in [0, 180]; lower edges inclusive, 180 belongs to the last bin."""
    if not 0.0 <= diff_deg <= 180.0:
        raise InvalidInputError(f"DOA difference {diff_deg} outside [0, 180]", field="doa_diff")
    for label, lo, hi in DOA_BINS:
        if lo <= diff_deg < hi:
            return label
    return DOA_BINS[-1][0]


@dataclass
class SceneSpec:
    speech_source: str = ""
    noise_source: str = ""
    dims_min: Sequence[float] = (5.0, 5.0, 3.0)
    dims_max: Sequence[float] = (10.0, 10.0, 4.0)
    t60_range: Sequence[float] = (0.1, 0.7)
    distance_range: Sequence[float] = (0.5, 5.0)
    distance_step: float = 0.5
    min_doa_separation: float = 5.0
    snr_range_db: Sequence[float] = (-6.0, 6.0)
    seed: int = 0
    num_mics: int = 6
    mic_spacing: float = 0.05
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    max_duration_s: float = 6.0
    doa_bin: Optional[str] = None
    max_retries: int = 1000
    interpolation: str = "nearest"
    max_order: Optional[int] = None

    def validate(self) -> None:
        lo, hi = np.asarray(self.dims_min, float), np.asarray(self.dims_max, float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(lo <= 0) or np.any(hi < lo):
            raise InvalidInputError(f"need 0 < dims_min <= dims_max, got {lo.tolist()} / {hi.tolist()}", field="dims_min")
        if not 0 < self.t60_range[0] <= self.t60_range[1]:
            raise InvalidInputError(f"invalid range {list(self.t60_range)}", field="t60_range")
        if not 0 < self.distance_range[0] <= self.distance_range[1] or self.distance_step <= 0:
            raise InvalidInputError(f"invalid range {list(self.distance_range)} step {self.distance_step}", field="distance_range")
        if not 0 <= self.min_doa_separation <= 180:
            raise InvalidInputError(f"must lie in [0, 180], got {self.min_doa_separation}", field="min_doa_separation")
        if self.snr_range_db[0] > self.snr_range_db[1]:
            raise InvalidInputError(f"invalid range {list(self.snr_range_db)}", field="snr_range_db")
        if self.doa_bin is not None and self.doa_bin not in DOA_BIN_LABELS:
            raise InvalidInputError(f"unknown bin {self.doa_bin!r}, choose from {DOA_BIN_LABELS}", field="doa_bin")
        if self.max_retries < 1:
            raise InvalidInputError("must be >= 1", field="max_retries")
        if self.max_order is not None and self.max_order < 0:
            raise InvalidInputError(f"must be non-negative, got {self.max_order}", field="max_order")

    def distance_grid(self) -> np.ndarray:
        lo, hi = self.distance_range
        n = int(math.floor((hi - lo) / self.distance_step + 1e-9)) + 1
        return lo + self.distance_step * np.arange(n)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


@dataclass
class ScenePlacement:
    dims: np.ndarray
    t60: float
    array: ArrayGeometry
    target_pos: np.ndarray
    noise_pos: np.ndarray
    target_distance: float
    noise_distance: float
    target_doa: float
    noise_doa: float
    snr_db: float
    seed: int
    attempts: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def doa_diff(self) -> float:
        return doa_difference(self.target_doa, self.noise_doa)

    @property
    def doa_bin(self) -> str:
        return doa_bin_label(self.doa_diff)

    def room_for(self, source_pos: np.ndarray, spec: SceneSpec) -> RoomSpec:
        return RoomSpec(self.dims, self.t60, source_pos, self.array,
                        max_order=spec.max_order, sample_rate_hz=spec.sample_rate_hz, interpolation=spec.interpolation)

    def to_meta(self) -> dict:
        return {
            "target_doa": self.target_doa,
            "noise_doa": self.noise_doa,
            "doa_diff": self.doa_diff,
            "doa_bin": self.doa_bin,
            "t60": self.t60,
            "snr": self.snr_db,
            "room_dims": self.dims.tolist(),
            "seed": self.seed,
            "target_pos": self.target_pos.tolist(),
            "noise_pos": self.noise_pos.tolist(),
            "target_distance": self.target_distance,
            "noise_distance": self.noise_distance,
            "array": self.array.to_dict(),
        }


def _inside(pos: np.ndarray, dims: np.ndarray) -> bool:
    return bool(np.all(pos >= WALL_MARGIN) and np.all(pos <= dims - WALL_MARGIN))


def _noise_angle(rng: np.random.Generator, target_deg: float, spec: SceneSpec) -> Optional[float]:
    """Interferer DOA in [0, 180]; None when the requested bin has no room next to ``target_deg``."""
    if spec.doa_bin is None:
        return float(rng.uniform(0.0, 180.0))
    _, lo, hi = next(b for b in DOA_BINS if b[0] == spec.doa_bin)
    lo = max(lo, spec.min_doa_separation)
    # noise DOAs at separation lo..hi on either side of the target, clipped to [0, 180]
    above = (target_deg + lo, min(target_deg + hi, 180.0))
    below = (max(target_deg - hi, 0.0), target_deg - lo)
    lengths = np.array([max(above[1] - above[0], 0.0), max(below[1] - below[0], 0.0)])
    if lengths.sum() <= 0.0:
        return None
    u = float(rng.uniform(0.0, lengths.sum()))
    return above[0] + u if u < lengths[0] else below[0] + (u - lengths[0])


def _source_position(array: ArrayGeometry, distance: float, doa_deg: float, side: float) -> np.ndarray:
    phi = math.radians(doa_deg)
    return array.center + distance * (math.cos(phi) * array.axis + side * math.sin(phi) * array.broadside)


def draw_scene(spec: SceneSpec, rng: Optional[np.random.Generator] = None) -> tuple[RoomSpec, ScenePlacement]:
    """Draw a scene and return the target RoomSpec plus the full placement.

    Draws that violate a constraint (Sabine absorption above 1, a source outside the wall margin,
    DOA separation below the minimum) are redrawn up to ``spec.max_retries`` times.
    """
    spec.validate()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    grid = spec.distance_grid()
    lo, hi = np.asarray(spec.dims_min, float), np.asarray(spec.dims_max, float)
    warned = False
    for attempt in range(1, spec.max_retries + 1):
        if not warned and attempt > spec.max_retries // 2:
            logger.warning("Scene seed %d needed more than %d redraws", spec.seed, spec.max_retries // 2)
            warned = True
        dims = rng.uniform(lo, hi)
        t60 = float(rng.uniform(spec.t60_range[0], spec.t60_range[1]))
        z_hi = min(ARRAY_HEIGHT_RANGE[1], dims[2] - WALL_MARGIN)
        center = np.array([
            rng.uniform(WALL_MARGIN, dims[0] - WALL_MARGIN),
            rng.uniform(WALL_MARGIN, dims[1] - WALL_MARGIN),
            rng.uniform(min(ARRAY_HEIGHT_RANGE[0], z_hi), z_hi),
        ])
        target_distance = float(rng.choice(grid))
        noise_distance = float(rng.choice(grid))
        target_angle = float(rng.uniform(0.0, 180.0))
        noise_angle = _noise_angle(rng, target_angle, spec)
        # both sources share one half-plane of the array axis
        side = 1.0 if rng.random() < 0.5 else -1.0
        snr_db = float(rng.uniform(spec.snr_range_db[0], spec.snr_range_db[1]))

        if noise_angle is None or sabine_absorption(dims, t60) > 1.0:
            continue
        array = ArrayGeometry.ula(spec.num_mics, spec.mic_spacing, center)
        if not all(_inside(p, dims) for p in array.mic_positions):
            continue
        target_pos = _source_position(array, target_distance, target_angle, side)
        noise_pos = _source_position(array, noise_distance, noise_angle, side)
        if not (_inside(target_pos, dims) and _inside(noise_pos, dims)):
            continue
        target_doa = doa_degrees(array, target_pos)
        noise_doa = doa_degrees(array, noise_pos)
        diff = doa_difference(target_doa, noise_doa)
        if diff < spec.min_doa_separation:
            continue
        if spec.doa_bin is not None and doa_bin_label(diff) != spec.doa_bin:
            continue
        placement = ScenePlacement(dims, t60, array, target_pos, noise_pos, target_distance, noise_distance,
                                   target_doa, noise_doa, snr_db, spec.seed, attempts=attempt)
        return placement.room_for(target_pos, spec), placement
    raise GenerationFailedError(
        f"no valid scene for seed {spec.seed} after {spec.max_retries} draws "
        f"(dims {lo.tolist()}..{hi.tolist()}, distances {grid[0]}..{grid[-1]} m, bin {spec.doa_bin})"
    )


def scene_seed(base_seed: int, index: int, stream: int = 0) -> int:
    """Independent 64-bit seed for scene ``index``; ``stream`` separates auxiliary draws."""
    state = np.random.SeedSequence([int(base_seed), int(index), int(stream)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def assign_doa_bins(n: int, proportions: Optional[Sequence[float]] = None) -> list[str]:
    """Bin label per scene index honouring ``proportions`` (equal by default), largest remainder rounding."""
    props = np.ones(len(DOA_BINS)) if proportions is None else np.asarray(proportions, dtype=np.float64)
    if props.shape != (len(DOA_BINS),) or np.any(props < 0) or props.sum() <= 0:
        raise InvalidInputError(f"need {len(DOA_BINS)} non-negative proportions", field="doa_proportions")
    share = n * props / props.sum()
    counts = np.floor(share).astype(int)
    for k in np.argsort(-(share - counts), kind="stable")[: n - counts.sum()]:
        counts[k] += 1
    labels: list[str] = []
    remaining = counts.copy()
    # interleave bins so any prefix of the dataset is roughly balanced
    while remaining.sum() > 0:
        for k, label in enumerate(DOA_BIN_LABELS):
            if remaining[k] > 0:
                labels.append(label)
                remaining[k] -= 1
    return labels


def pick_sources(speech_files: Sequence[str], noise_files: Sequence[str], seed: int) -> tuple[str, str]:
    if not speech_files or not noise_files:
        raise InvalidInputError("speech and noise pools must not be empty", field="speech_dir")
    rng = np.random.default_rng(seed)
    return str(speech_files[int(rng.integers(len(speech_files)))]), str(noise_files[int(rng.integers(len(noise_files)))])
