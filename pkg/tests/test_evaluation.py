import csv
import json

import numpy as np
import pytest

from src.dsp.waveform import Waveform
from src.errors import InvalidInputError, MissingOutputsError
from src.evaluation.metrics import SI_SDR_CAP_DB, segmental_snr, si_sdr
from src.evaluation.report import REPORT_COLUMNS, EvalRecord, EvalReport, evaluate_manifest, write_report
from src.utils.audio import write_wave

from conftest import scaled_copies_pair, write_dataset


class TestSiSdr:
    def test_known_value(self):
        ref = Waveform(np.array([1.0, 0.0, 0.0, 0.0]))
        est = Waveform(np.array([1.0, 0.1, 0.0, 0.0]))
        assert si_sdr(est, ref) == pytest.approx(20.0)

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        ref = Waveform(rng.standard_normal(1000))
        est = Waveform(ref.samples + 0.3 * rng.standard_normal(1000))
        base = si_sdr(est, ref)
        assert si_sdr(Waveform(5.0 * est.samples), ref) == pytest.approx(base)

    @pytest.mark.parametrize("gain", [1.0, 0.01, -2.0])
    def test_multiples_hit_cap(self, gain):
        ref = Waveform(np.random.default_rng(1).standard_normal(500))
        assert si_sdr(Waveform(gain * ref.samples), ref) == SI_SDR_CAP_DB

    def test_silent_estimate(self):
        ref = Waveform(np.random.default_rng(2).standard_normal(500))
        assert si_sdr(Waveform(np.zeros(500)), ref) == -SI_SDR_CAP_DB

    def test_invalid(self):
        ref = Waveform(np.ones(10))
        with pytest.raises(InvalidInputError):
            si_sdr(Waveform(np.ones(9)), ref)
        with pytest.raises(InvalidInputError):
            si_sdr(Waveform(np.ones(10)), Waveform(np.zeros(10)))
        with pytest.raises(InvalidInputError):
            si_sdr(Waveform(np.ones(10), 8000), ref)


class TestSegmentalSnr:
    def test_perfect_and_silent(self):
        ref = Waveform(np.random.default_rng(3).standard_normal(3200))
        assert segmental_snr(ref, ref) == 35.0
        assert segmental_snr(Waveform(np.zeros(3200)), ref) == -10.0

    def test_known_frames(self):
        # 320-sample frames, error energy 1/100 of the reference in every frame
        ref = np.ones(640)
        est = ref + 0.1 * np.tile([1.0, -1.0], 320)
        assert segmental_snr(Waveform(est), Waveform(ref)) == pytest.approx(20.0)

    def test_silent_reference_frames_ignored(self):
        rng = np.random.default_rng(4)
        ref = np.r_[np.zeros(640), rng.standard_normal(640)]
        est = ref + np.r_[rng.standard_normal(640), np.zeros(640)]
        assert segmental_snr(Waveform(est), Waveform(ref)) == 35.0

    def test_frame_length(self):
        with pytest.raises(InvalidInputError):
            segmental_snr(Waveform(np.ones(10)), Waveform(np.ones(10)), frame_ms=0)


class TestReport:
    def _record(self, uid, label, si_sdr_value):
        return EvalRecord(id=uid, doa_bin=label, t60=0.3, snr_in=0.0, si_sdr_in=-2.0, si_sdr=si_sdr_value, seg_snr=5.0)

    def test_summaries(self):
        report = EvalReport.from_records([self._record("b", "0-15", 6.0), self._record("a", "0-15", 10.0), self._record("c", "45-90", 4.0)])
        assert [r.id for r in report.records] == ["a", "b", "c"]
        assert report.per_bin["0-15"]["count"] == 2
        assert report.per_bin["0-15"]["si_sdr"] == pytest.approx(8.0)
        assert report.per_bin["0-15"]["si_sdr_improvement"] == pytest.approx(10.0)
        assert report.per_bin["15-45"] == {"count": 0, "si_sdr_in": None, "si_sdr": None, "si_sdr_improvement": None, "seg_snr": None}
        assert report.overall["count"] == 3

    def test_files(self, tmp_path):
        report = EvalReport.from_records([self._record("a", "90-180", 3.0)])
        csv_path, json_path = write_report(report, tmp_path / "report")
        with csv_path.open(encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0].keys()) == list(REPORT_COLUMNS)
        assert rows[0]["pesq"] == ""
        assert float(rows[0]["si_sdr_improvement"]) == pytest.approx(5.0)
        data = json.loads(json_path.read_text(encoding="utf-8"))
        assert data["schema_version"] == 1
        assert data["global"]["si_sdr"] == pytest.approx(3.0)


class TestEvaluateManifest:
    def test_scores_outputs(self, tmp_path):
        rng = np.random.default_rng(5)
        pairs = [scaled_copies_pair(rng, f"pair_{i:05d}", doa_diff=d) for i, d in enumerate((10.0, 100.0))]
        manifest = write_dataset(pairs, tmp_path / "dataset")
        outputs = tmp_path / "enhanced"
        write_wave(pairs[0].anechoic_target, outputs / "pair_00000.wav")
        write_wave(pairs[1].mixture.reference, outputs / "pair_00001.wav")
        report = evaluate_manifest(manifest, outputs)
        first, second = report.records
        assert first.si_sdr == SI_SDR_CAP_DB
        assert first.doa_bin == "0-15" and second.doa_bin == "90-180"
        assert second.si_sdr == pytest.approx(second.si_sdr_in, abs=1e-9)
        assert second.snr_in == 0.0

    def test_missing_outputs_listed(self, tmp_path):
        rng = np.random.default_rng(6)
        manifest = write_dataset([scaled_copies_pair(rng, "pair_00000"), scaled_copies_pair(rng, "pair_00001")], tmp_path / "dataset")
        (tmp_path / "enhanced").mkdir()
        write_wave(Waveform(np.ones(8000)), tmp_path / "enhanced" / "pair_00000.wav")
        with pytest.raises(MissingOutputsError) as err:
            evaluate_manifest(manifest, tmp_path / "enhanced")
        assert err.value.missing == ["pair_00001"]
