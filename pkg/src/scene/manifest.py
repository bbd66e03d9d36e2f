"""Dataset manifests.

manifest.json layout (schema_version 1):
  schema_version  int
  sample_rate_hz  int or null for an empty dataset
  num_pairs       int
  pairs           list of entries, sorted by id:
    id        str, also the per-pair subdirectory name
    doa_bin   one of "0-15", "15-45", "45-90", "90-180"
    files     component name -> path relative to the manifest directory:
              mixture, anechoic_target, direct_speech_image, reverberant_speech_tail,
              reverberant_noise, target_rir (WAV, float32; target_rir has a .json sidecar)
    meta      scene metadata (DOAs in degrees, t60 s, snr dB, room_dims m, seed, positions, ...)
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable

from src.acoustics.room import load_rir, save_rir
from src.errors import InvalidInputError
from src.scene.mixing import MixturePair
from src.scene.sampling import doa_bin_label
from src.utils.audio import read_multichannel, read_wave, write_wave
from src.utils.storage import ensure_dir, read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = 1
COMPONENTS = ("mixture", "anechoic_target", "direct_speech_image", "reverberant_speech_tail", "reverberant_noise")


def write_pair(pair: MixturePair, out_dir: str | Path) -> dict:
    """Write one pair's WAVs under ``out_dir/<id>/`` and return its manifest entry."""
    if not pair.pair_id:
        raise InvalidInputError("pair has no id", field="pair_id")
    root = Path(out_dir)
    pair_dir = root / pair.pair_id
    ensure_dir(pair_dir)
    files = {}
    for name in COMPONENTS:
        path = pair_dir / f"{name}.wav"
        write_wave(getattr(pair, name), path)
        files[name] = path.relative_to(root).as_posix()
    if pair.target_rir is not None:
        path = pair_dir / "target_rir.wav"
        save_rir(pair.target_rir, path)
        files["target_rir"] = path.relative_to(root).as_posix()
    diff = pair.meta.get("doa_diff")
    return {
        "id": pair.pair_id,
        "doa_bin": doa_bin_label(diff) if diff is not None else None,
        "files": files,
        "meta": pair.meta,
    }


def write_manifest(entries: Iterable[dict], out_dir: str | Path, sample_rate_hz: int | None = None) -> Path:
    entries = sorted(entries, key=lambda e: e["id"])
    ids = [e["id"] for e in entries]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("duplicate pair ids", field="pair_id")
    path = Path(out_dir) / MANIFEST_NAME
    write_json({
        "schema_version": SCHEMA_VERSION,
        "sample_rate_hz": sample_rate_hz,
        "num_pairs": len(entries),
        "pairs": entries,
    }, path)
    logger.info("Manifest with %d pairs written to %s", len(entries), path)
    return path


def build_manifest(pairs: list[MixturePair], out_dir: str | Path) -> Path:
    entries = [write_pair(p, out_dir) for p in pairs]
    rate = pairs[0].sample_rate_hz if pairs else None
    return write_manifest(entries, out_dir, rate)


def read_manifest(path: str | Path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST_NAME
    try:
        manifest = read_json(p)
    except FileNotFoundError as e:
        raise FileNotFoundError(f"Manifest not found: {p}") from e
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInputError(f"{p} has schema {manifest.get('schema_version')}, expected {SCHEMA_VERSION}", field="schema_version")
    manifest["_root"] = p.parent
    return manifest


def load_entry(entry: dict, root: Path) -> MixturePair:
    files = entry["files"]
    rate = entry["meta"].get("sample_rate_hz")
    parts = {name: read_multichannel(root / files[name], rate) for name in COMPONENTS if name != "anechoic_target"}
    target = read_wave(root / files["anechoic_target"], rate)
    rir = load_rir(root / files["target_rir"]) if "target_rir" in files else None
    return MixturePair(anechoic_target=target, meta=entry["meta"], target_rir=rir, pair_id=entry["id"], **parts)


def load_manifest(path: str | Path) -> list[MixturePair]:
    manifest = read_manifest(path)
    return [load_entry(e, manifest["_root"]) for e in manifest["pairs"]]
