from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from src.errors import InvalidInputError

TENSOR_MAGIC = b"TBFW"
TENSOR_DTYPE = "float32-ri-le"


class ArrayJSONEncoder(json.JSONEncoder):
    """JSON for numpy arrays and scalars, complex values ({"re", "im"}) and paths."""

    def default(self, obj: Any) -> Any:
        if isinstance(obj, np.ndarray):
            if np.iscomplexobj(obj):
                return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
            return obj.tolist()
        if isinstance(obj, (complex, np.complexfloating)):
            return {"re": float(obj.real), "im": float(obj.imag)}
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, Path):
            return obj.as_posix()
        return super().default(obj)


def dumps_json(obj: Any, indent: int | None = 2) -> str:
    return json.dumps(obj, cls=ArrayJSONEncoder, ensure_ascii=False, indent=indent)


def ensure_dir(path: str | Path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_json(obj: Any, path: str | Path) -> Path:
    """Serialize first, then replace ``path`` in one step so readers never see a partial file."""
    p = Path(path)
    text = dumps_json(obj)
    tmp = ensure_dir(p.parent) / f".{p.name}.tmp"
    tmp.write_text(text + "\n", encoding="utf-8")
    os.replace(tmp, p)
    return p


def read_json(path: str | Path) -> Any:
    p = Path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{p} is not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}", field="path") from None


def write_complex_tensor(data: np.ndarray, path: str | Path, meta: Dict[str, Any] | None = None) -> None:
    """Write a complex tensor as JSON header + little-endian float32 (re, im) payload.

    Layout: b"TBFW", uint32 LE header length, UTF-8 JSON header, interleaved payload in C order.
    """
    data = np.asarray(data)
    header = {"shape": list(data.shape), "dtype": TENSOR_DTYPE, **(meta or {})}
    header_bytes = dumps_json(header, indent=None).encode("utf-8")
    payload = np.empty(data.shape + (2,), dtype="<f4")
    payload[..., 0] = data.real
    payload[..., 1] = data.imag
    p = ensure_dir(Path(path).parent) / Path(path).name
    with p.open("wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(payload.tobytes(order="C"))


def read_complex_tensor(path: str | Path) -> Tuple[np.ndarray, Dict[str, Any]]:
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise OSError(f"Not a complex tensor file: {path}")
    (header_len,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8:8 + header_len].decode("utf-8"))
    if header.get("dtype") != TENSOR_DTYPE:
        raise OSError(f"Unsupported tensor dtype {header.get('dtype')!r} in {path}")
    shape = tuple(header["shape"])
    payload = np.frombuffer(raw[8 + header_len:], dtype="<f4")
    expected = int(np.prod(shape, dtype=np.int64)) * 2
    if payload.size != expected:
        raise OSError(f"Truncated tensor payload in {path}: {payload.size} != {expected} floats")
    ri = payload.reshape(shape + (2,)).astype(np.float64)
    return ri[..., 0] + 1j * ri[..., 1], header
