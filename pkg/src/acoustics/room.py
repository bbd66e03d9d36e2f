"""Image-source simulation of shoebox rooms.

Image positions follow the Allen & Berkley lattice: along each axis an image sits at
``(1 - 2u) * s + 2 * l * L`` and has met ``|l - u| + |l|`` walls of that axis. All six walls
share one reflection coefficient derived from the requested T60.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from src.acoustics.geometry import SPEED_OF_SOUND, ArrayGeometry
from src.errors import InvalidInputError
from src.utils.audio import read_multichannel, write_wave
from src.dsp.waveform import MultichannelWaveform
from src.utils.storage import read_json, write_json

logger = logging.getLogger(__name__)

MAX_REFLECTION_ORDER = 120
# extra orders on top of the coverage estimate, one per axis for the mirrored lattice half
ORDER_MARGIN = 3
DECAY_COVERAGE = 1.2
SINC_HALF_WIDTH = 20
SINC_CUTOFF = 0.9
IMAGE_CHUNK = 200_000
INTERPOLATIONS = ("nearest", "sinc")


@dataclass
class RoomSpec:
    dims: Sequence[float]
    t60: float
    source_pos: Sequence[float]
    array: ArrayGeometry
    max_order: Optional[int] = None
    speed_of_sound: float = SPEED_OF_SOUND
    sample_rate_hz: int = 16000
    interpolation: str = "nearest"

    def __post_init__(self) -> None:
        self.dims = np.asarray(self.dims, dtype=np.float64)
        self.source_pos = np.asarray(self.source_pos, dtype=np.float64)

    def validate(self) -> None:
        if self.dims.shape != (3,) or np.any(self.dims <= 0):
            raise InvalidInputError(f"room dimensions must be three positive extents, got {self.dims.tolist()}", field="dims")
        if self.source_pos.shape != (3,) or not _inside(self.source_pos, self.dims):
            raise InvalidInputError(f"source {self.source_pos.tolist()} is not strictly inside room {self.dims.tolist()}", field="source_pos")
        for m, pos in enumerate(self.array.mic_positions):
            if not _inside(pos, self.dims):
                raise InvalidInputError(f"microphone {m} at {pos.tolist()} is not strictly inside room {self.dims.tolist()}", field="array")
        if self.t60 < 0:
            raise InvalidInputError(f"must be non-negative, got {self.t60}", field="t60")
        if self.max_order is not None and self.max_order < 0:
            raise InvalidInputError(f"must be non-negative, got {self.max_order}", field="max_order")
        if self.interpolation not in INTERPOLATIONS:
            raise InvalidInputError(f"choose from {INTERPOLATIONS}", field="interpolation")
        if self.speed_of_sound <= 0:
            raise InvalidInputError("must be positive", field="speed_of_sound")
        if self.sample_rate_hz <= 0:
            raise InvalidInputError("must be positive", field="sample_rate_hz")

    def to_dict(self) -> dict:
        return {
            "dims": self.dims.tolist(),
            "t60": float(self.t60),
            "source_pos": self.source_pos.tolist(),
            "array": self.array.to_dict(),
            "max_order": self.max_order,
            "speed_of_sound": float(self.speed_of_sound),
            "sample_rate_hz": int(self.sample_rate_hz),
            "interpolation": self.interpolation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoomSpec":
        return cls(
            dims=d["dims"],
            t60=d["t60"],
            source_pos=d["source_pos"],
            array=ArrayGeometry.from_dict(d["array"]),
            max_order=d.get("max_order"),
            speed_of_sound=d.get("speed_of_sound", SPEED_OF_SOUND),
            sample_rate_hz=d.get("sample_rate_hz", 16000),
            interpolation=d.get("interpolation", "nearest"),
        )


@dataclass
class Rir:
    channels: np.ndarray  # M x L
    sample_rate_hz: int
    direct_path_delays: np.ndarray  # per-channel sample offsets
    room: Optional[RoomSpec] = None
    max_order_used: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=np.float64))
        self.direct_path_delays = np.asarray(self.direct_path_delays, dtype=np.int64)

    @property
    def num_channels(self) -> int:
        return int(self.channels.shape[0])

    @property
    def length(self) -> int:
        return int(self.channels.shape[1])


def _inside(pos: np.ndarray, dims: np.ndarray) -> bool:
    return bool(np.all(pos > 0) and np.all(pos < dims))


def sabine_absorption(dims: Sequence[float], t60: float, c: float = SPEED_OF_SOUND) -> float:
    """Uniform wall absorption coefficient that gives ``t60`` by Sabine's formula."""
    lx, ly, lz = (float(v) for v in dims)
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    return 24.0 * math.log(10.0) * volume / (c * surface * t60)


def reflection_coefficient(dims: Sequence[float], t60: float, c: float = SPEED_OF_SOUND) -> float:
    """Pressure reflection coefficient shared by all six walls; 0 for t60 == 0 (anechoic).

    beta = exp(-alpha / 2) makes the image-source energy decay (mean free path 4V/S) reproduce the
    Sabine T60 exactly; alpha > 1 is rejected as physically unreachable.
    """
    if t60 == 0:
        return 0.0
    alpha = sabine_absorption(dims, t60, c)
    if alpha > 1.0:
        raise InvalidInputError(
            f"T60 of {t60:.3f} s needs Sabine absorption {alpha:.3f} > 1 in a {list(np.round(dims, 3))} m room",
            field="t60",
        )
    return math.exp(-alpha / 2.0)


def default_max_order(room: RoomSpec) -> int:
    if room.t60 == 0:
        return 0
    dims = np.asarray(room.dims, dtype=np.float64)
    reach = room.speed_of_sound * DECAY_COVERAGE * room.t60 + _max_direct_distance(room)
    # images of order <= N cover the ball of radius N / sqrt(sum 1/L^2)
    order = int(math.ceil(reach * math.sqrt(float(np.sum(1.0 / dims ** 2))))) + ORDER_MARGIN
    if order > MAX_REFLECTION_ORDER:
        logger.debug("Reflection order %d capped at %d", order, MAX_REFLECTION_ORDER)
    return min(order, MAX_REFLECTION_ORDER)


def _max_direct_distance(room: RoomSpec) -> float:
    return float(np.max(np.linalg.norm(room.array.mic_positions - room.source_pos, axis=1)))


def _axis_images(s: float, length: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    k = order // 2 + 1
    lattice = np.arange(-k, k + 1)
    pos, refl = [], []
    for u in (0, 1):
        pos.append((1 - 2 * u) * s + 2.0 * lattice * length)
        refl.append(np.abs(lattice - u) + np.abs(lattice))
    pos_arr, refl_arr = np.concatenate(pos), np.concatenate(refl)
    keep = refl_arr <= order
    return pos_arr[keep], refl_arr[keep]


def image_sources(source: np.ndarray, dims: np.ndarray, order: int, beta: float, center: np.ndarray, max_dist: float) -> tuple[np.ndarray, np.ndarray]:
    """Image positions (N x 3) and wall gains beta^reflections for all images up to ``order``."""
    xs, rx = _axis_images(source[0], dims[0], order)
    ys, ry = _axis_images(source[1], dims[1], order)
    zs, rz = _axis_images(source[2], dims[2], order)
    ryz = ry[:, None] + rz[None, :]
    dyz2 = (ys[:, None] - center[1]) ** 2 + (zs[None, :] - center[2]) ** 2
    positions, gains = [], []
    for x, r in zip(xs, rx):
        keep = (ryz + r <= order) & (dyz2 + (x - center[0]) ** 2 <= max_dist ** 2)
        iy, iz = np.nonzero(keep)
        if iy.size == 0:
            continue
        positions.append(np.column_stack([np.full(iy.size, x), ys[iy], zs[iz]]))
        gains.append(np.power(beta, ryz[iy, iz] + r) if beta > 0 else (ryz[iy, iz] + r == 0).astype(np.float64))
    if not positions:
        return np.zeros((0, 3)), np.zeros(0)
    return np.concatenate(positions), np.concatenate(gains)


def _accumulate_nearest(dist: np.ndarray, amp: np.ndarray, fs: int, c: float, length: int) -> np.ndarray:
    n = np.rint(dist * fs / c).astype(np.int64)
    keep = n < length
    return np.bincount(n[keep], weights=amp[keep], minlength=length)[:length]


def _accumulate_sinc(dist: np.ndarray, amp: np.ndarray, fs: int, c: float, length: int) -> np.ndarray:
    # Hann-windowed sinc low-pass fractional delay
    h = np.zeros(length)
    taps = np.arange(-SINC_HALF_WIDTH, SINC_HALF_WIDTH + 1)
    tw = 2.0 * SINC_HALF_WIDTH / fs
    fc = SINC_CUTOFF * fs / 2.0
    for start in range(0, dist.size, IMAGE_CHUNK):
        d = dist[start:start + IMAGE_CHUNK]
        a = amp[start:start + IMAGE_CHUNK]
        delay = d * fs / c
        n = np.floor(delay).astype(np.int64)[:, None] + taps[None, :]
        t = n / fs - (d / c)[:, None]
        s = 0.5 * (1.0 + np.cos(2.0 * np.pi * t / tw)) * np.sinc(2.0 * fc * t) * (2.0 * fc / fs)
        s[np.abs(t) > tw / 2.0] = 0.0
        keep = (n >= 0) & (n < length)
        h += np.bincount(n[keep], weights=(s * a[:, None])[keep], minlength=length)[:length]
    return h


def simulate_rir(room: RoomSpec) -> Rir:
    room.validate()
    fs, c = room.sample_rate_hz, room.speed_of_sound
    dims = np.asarray(room.dims)
    beta = reflection_coefficient(dims, room.t60, c)
    order = room.max_order if room.max_order is not None else default_max_order(room)
    if beta == 0.0:
        order = 0

    mics = room.array.mic_positions
    direct = np.linalg.norm(mics - room.source_pos, axis=1)
    delays = np.rint(direct * fs / c).astype(np.int64)
    tail = int(math.ceil(DECAY_COVERAGE * room.t60 * fs))
    length = int(delays.max()) + tail + SINC_HALF_WIDTH + 1

    center = room.array.center
    radius = float(np.max(np.linalg.norm(mics - center, axis=1)))
    max_dist = length * c / fs + radius
    images, gains = image_sources(room.source_pos, dims, order, beta, center, max_dist)
    logger.debug("Simulating %d images up to order %d (beta=%.4f, %d samples)", images.shape[0], order, beta, length)

    accumulate = _accumulate_nearest if room.interpolation == "nearest" else _accumulate_sinc
    h = np.zeros((room.array.num_mics, length))
    for m in range(room.array.num_mics):
        dist = np.linalg.norm(images - mics[m], axis=1)
        h[m] = accumulate(dist, gains / (4.0 * np.pi * dist), fs, c, length)
    return Rir(h, fs, delays, room=room, max_order_used=order, meta={"beta": beta})


def save_rir(rir: Rir, path: str | Path) -> Path:
    p = Path(path)
    write_wave(MultichannelWaveform(rir.channels, rir.sample_rate_hz), p)
    sidecar = p.with_suffix(".json")
    write_json({
        "room": rir.room.to_dict() if rir.room is not None else None,
        "direct_path_delays": rir.direct_path_delays.tolist(),
        "max_order_used": rir.max_order_used,
        "sample_rate_hz": rir.sample_rate_hz,
        "meta": rir.meta,
    }, sidecar)
    return sidecar


def load_rir(path: str | Path) -> Rir:
    p = Path(path)
    wave = read_multichannel(p)
    side = read_json(p.with_suffix(".json"))
    room = RoomSpec.from_dict(side["room"]) if side.get("room") else None
    return Rir(wave.data, wave.sample_rate_hz, side["direct_path_delays"], room=room,
               max_order_used=side.get("max_order_used"), meta=side.get("meta", {}))
