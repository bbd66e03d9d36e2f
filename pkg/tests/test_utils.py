import json
import logging
from pathlib import Path

import numpy as np
import pytest

from src.errors import InvalidInputError
from src.utils.logging_config import HANDLER_NAME, LOG_LEVEL_ENV, resolve_level, setup_logging
from src.utils.storage import dumps_json, read_complex_tensor, read_json, write_complex_tensor, write_json


class TestJson:
    def test_numpy_values(self, tmp_path):
        payload = {
            "dims": np.array([6.0, 5.0, 3.0]),
            "count": np.int64(7),
            "ok": np.bool_(True),
            "gain": np.float32(0.5),
            "rtf": np.array([1.0 + 0.0j, 0.5 - 0.25j]),
            "src": Path("data") / "speech" / "utt_0.wav",
        }
        path = write_json(payload, tmp_path / "nested" / "meta.json")
        assert path.parent.is_dir()
        back = read_json(path)
        assert back["dims"] == [6.0, 5.0, 3.0]
        assert back["count"] == 7 and back["ok"] is True
        assert back["gain"] == 0.5
        assert back["rtf"] == {"re": [1.0, 0.5], "im": [0.0, -0.25]}
        assert back["src"] == "data/speech/utt_0.wav"

    def test_complex_scalar(self):
        assert json.loads(dumps_json({"z": 1 - 2j}, indent=None)) == {"z": {"re": 1.0, "im": -2.0}}

    def test_unsupported_type(self, tmp_path):
        with pytest.raises(TypeError):
            write_json({"x": object()}, tmp_path / "bad.json")
        assert not (tmp_path / "bad.json").exists()

    def test_overwrite_leaves_no_temp_file(self, tmp_path):
        path = tmp_path / "manifest.json"
        write_json({"v": 1}, path)
        write_json({"v": 2}, path)
        assert read_json(path) == {"v": 2}
        assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json"]

    def test_malformed(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"t60": 0.3,', encoding="utf-8")
        with pytest.raises(InvalidInputError) as err:
            read_json(path)
        assert err.value.field == "path"
        assert "broken.json" in str(err.value)
        with pytest.raises(FileNotFoundError):
            read_json(tmp_path / "missing.json")


class TestComplexTensor:
    def test_header_carries_numpy_meta(self, tmp_path):
        data = np.arange(6).reshape(2, 3) * (1 - 1j)
        write_complex_tensor(data, tmp_path / "t" / "x.tbfw", {"freqs_hz": np.array([0.0, 50.0]), "order": np.int32(2)})
        back, header = read_complex_tensor(tmp_path / "t" / "x.tbfw")
        np.testing.assert_allclose(back, data)
        assert header["freqs_hz"] == [0.0, 50.0] and header["order"] == 2
        assert header["shape"] == [2, 3]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.tbfw"
        path.write_bytes(b"NOPE" + bytes(8))
        with pytest.raises(OSError):
            read_complex_tensor(path)


class TestLogging:
    def test_level_resolution(self, monkeypatch):
        assert resolve_level("debug") == logging.DEBUG
        assert resolve_level(logging.WARNING) == logging.WARNING
        assert resolve_level("chatty") == logging.INFO
        monkeypatch.setenv(LOG_LEVEL_ENV, "ERROR")
        assert resolve_level() == logging.ERROR

    def test_setup_is_idempotent(self):
        root = logging.getLogger()
        level = root.level
        try:
            first = setup_logging("WARNING")
            second = setup_logging("DEBUG")
            assert first is second
            assert sum(h.get_name() == HANDLER_NAME for h in root.handlers) == 1
            assert root.level == logging.DEBUG
        finally:
            root.removeHandler(first)
            root.setLevel(level)
            logging.captureWarnings(False)
