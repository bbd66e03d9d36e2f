import numpy as np
import pytest

from src.acoustics.geometry import ArrayGeometry, doa_degrees, doa_difference
from src.acoustics.room import Rir, sabine_absorption
from src.dsp.waveform import MultichannelWaveform, Waveform
from src.errors import GenerationFailedError, InvalidInputError
from src.scene.manifest import build_manifest, load_manifest, read_manifest
from src.scene.mixing import SpeechImage, measured_snr_db, mix_at_snr, spatialize, synthesize_scene
from src.scene.sampling import (
    DOA_BIN_LABELS,
    WALL_MARGIN,
    SceneSpec,
    assign_doa_bins,
    doa_bin_label,
    draw_scene,
    pick_sources,
    scene_seed,
)

from conftest import FS, write_sources


def small_spec(**kwargs) -> SceneSpec:
    values = dict(dims_min=(4.0, 4.0, 2.5), dims_max=(5.0, 5.0, 3.0), t60_range=(0.2, 0.3),
                  distance_range=(0.5, 1.5), max_duration_s=0.5)
    values.update(kwargs)
    return SceneSpec(**values)


class TestDoaBins:
    @pytest.mark.parametrize("diff, label", [
        (0.0, "0-15"), (14.99, "0-15"), (15.0, "15-45"), (45.0, "45-90"), (90.0, "90-180"), (180.0, "90-180"),
    ])
    def test_edges(self, diff, label):
        assert doa_bin_label(diff) == label

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            doa_bin_label(181.0)

    def test_equal_quotas(self):
        labels = assign_doa_bins(8)
        assert labels[:4] == list(DOA_BIN_LABELS)
        assert all(labels.count(b) == 2 for b in DOA_BIN_LABELS)

    def test_largest_remainder(self):
        labels = assign_doa_bins(6)
        counts = sorted(labels.count(b) for b in DOA_BIN_LABELS)
        assert counts == [1, 1, 2, 2]
        assert assign_doa_bins(5, (1, 0, 0, 0)) == ["0-15"] * 5

    def test_invalid_proportions(self):
        with pytest.raises(InvalidInputError):
            assign_doa_bins(4, (1, 1))


class TestDrawScene:
    def test_deterministic(self):
        spec = SceneSpec(seed=42)
        _, a = draw_scene(spec)
        _, b = draw_scene(spec)
        np.testing.assert_array_equal(a.target_pos, b.target_pos)
        assert a.t60 == b.t60 and a.snr_db == b.snr_db

    def test_constraints(self):
        for seed in range(20):
            spec = SceneSpec(seed=seed)
            room, p = draw_scene(spec)
            assert sabine_absorption(p.dims, p.t60) <= 1.0
            assert 0.1 <= p.t60 <= 0.7
            assert -6.0 <= p.snr_db <= 6.0
            for pos in (p.target_pos, p.noise_pos, *p.array.mic_positions):
                assert np.all(pos >= WALL_MARGIN - 1e-9) and np.all(pos <= p.dims - WALL_MARGIN + 1e-9)
            assert p.doa_diff >= 5.0
            assert p.target_distance in spec.distance_grid()
            np.testing.assert_allclose(room.source_pos, p.target_pos)
            assert p.array.num_mics == 6

    @pytest.mark.parametrize("label", DOA_BIN_LABELS)
    def test_bin_constraint(self, label):
        for seed in range(25):
            _, p = draw_scene(SceneSpec(seed=seed, doa_bin=label))
            assert p.doa_bin == label
            assert doa_difference(p.target_doa, p.noise_doa) == pytest.approx(p.doa_diff)

    def test_meta_doas_match_positions(self):
        for seed in range(50):
            _, p = draw_scene(SceneSpec(seed=seed, doa_bin=DOA_BIN_LABELS[seed % 4]))
            meta = p.to_meta()
            array = ArrayGeometry.from_dict(meta["array"])
            target = doa_degrees(array, meta["target_pos"])
            noise = doa_degrees(array, meta["noise_pos"])
            assert target == pytest.approx(meta["target_doa"], abs=0.1)
            assert noise == pytest.approx(meta["noise_doa"], abs=0.1)
            assert abs(target - noise) == pytest.approx(meta["doa_diff"], abs=0.1)
            assert doa_bin_label(abs(target - noise)) == meta["doa_bin"]
            # same half-plane of the array axis
            sides = [np.dot(np.asarray(meta[k]) - array.center, array.broadside) for k in ("target_pos", "noise_pos")]
            assert sides[0] * sides[1] > 0

    def test_min_separation_over_many_draws(self):
        diffs = [draw_scene(SceneSpec(seed=seed))[1].doa_diff for seed in range(1000)]
        assert min(diffs) >= 5.0
        assert max(diffs) <= 180.0

    def test_reflection_order_reaches_both_rooms(self):
        spec = SceneSpec(seed=4, max_order=30)
        room, p = draw_scene(spec)
        assert room.max_order == 30
        assert p.room_for(p.noise_pos, spec).max_order == 30
        assert draw_scene(SceneSpec(seed=4))[0].max_order is None
        with pytest.raises(InvalidInputError):
            draw_scene(SceneSpec(max_order=-1))

    def test_meta_keys(self):
        _, p = draw_scene(SceneSpec(seed=3))
        meta = p.to_meta()
        for key in ("target_doa", "noise_doa", "doa_diff", "doa_bin", "t60", "snr", "room_dims", "seed"):
            assert key in meta

    def test_generation_failure(self):
        spec = SceneSpec(dims_min=(1.0, 1.0, 1.0), dims_max=(1.0, 1.0, 1.0), distance_range=(3.0, 3.0), max_retries=5)
        with pytest.raises(GenerationFailedError):
            draw_scene(spec)

    def test_invalid_spec(self):
        with pytest.raises(InvalidInputError):
            draw_scene(SceneSpec(doa_bin="0-30"))
        with pytest.raises(InvalidInputError):
            draw_scene(SceneSpec(dims_min=(6.0, 5.0, 3.0), dims_max=(5.0, 5.0, 3.0)))

    def test_seeds(self):
        assert scene_seed(0, 1) == scene_seed(0, 1)
        assert len({scene_seed(0, i) for i in range(100)}) == 100
        assert scene_seed(0, 1) != scene_seed(0, 1, stream=1)

    def test_pick_sources(self):
        speech, noise = pick_sources(["a.wav", "b.wav"], ["n.wav"], 7)
        assert speech in ("a.wav", "b.wav") and noise == "n.wav"
        assert pick_sources(["a.wav", "b.wav"], ["n.wav"], 7) == (speech, noise)
        with pytest.raises(InvalidInputError):
            pick_sources([], ["n.wav"], 0)


class TestSpatialize:
    def test_direct_and_tail_split(self):
        rng = np.random.default_rng(0)
        h = np.zeros((2, 200))
        h[0, 10], h[0, 150] = 1.0, 0.3
        h[1, 12], h[1, 160] = 0.8, 0.2
        rir = Rir(h, FS, [10, 12])
        dry = Waveform(rng.standard_normal(1000), FS)
        img = spatialize(dry, rir)
        assert img.full.num_samples == 1000
        np.testing.assert_allclose(img.direct.data[0, 10:], dry.samples[:990])
        np.testing.assert_allclose(img.tail.data[1, 160:], 0.2 * dry.samples[:840], atol=1e-12)
        full = np.convolve(dry.samples, h[1])[:1000]
        np.testing.assert_allclose(img.full.data[1], full, atol=1e-12)

    def test_rate_mismatch(self):
        rir = Rir(np.ones((1, 4)), 8000, [0])
        with pytest.raises(InvalidInputError):
            spatialize(Waveform(np.ones(10), FS), rir)


class TestMixing:
    def _image(self, rng, scale=1.0):
        direct = MultichannelWaveform(scale * rng.standard_normal((3, 4000)), FS)
        tail = MultichannelWaveform(0.3 * scale * rng.standard_normal((3, 4000)), FS)
        return SpeechImage(direct, tail)

    @pytest.mark.parametrize("snr_db", [-6.0, 0.0, 4.5])
    def test_snr_and_additivity(self, snr_db):
        rng = np.random.default_rng(1)
        img = self._image(rng, 0.05)
        pair = mix_at_snr(img, MultichannelWaveform(rng.standard_normal((3, 4000)), FS), snr_db)
        total = pair.direct_speech_image.data + pair.reverberant_speech_tail.data + pair.reverberant_noise.data
        np.testing.assert_allclose(pair.mixture.data, total, rtol=1e-12, atol=1e-15)
        speech = pair.direct_speech_image + pair.reverberant_speech_tail
        assert measured_snr_db(speech, pair.reverberant_noise) == pytest.approx(snr_db, abs=0.01)
        assert pair.meta["snr"] == snr_db
        np.testing.assert_allclose(pair.anechoic_target.samples, pair.direct_speech_image.data[0])

    def test_clipping_guard(self):
        rng = np.random.default_rng(2)
        pair = mix_at_snr(self._image(rng, 3.0), MultichannelWaveform(rng.standard_normal((3, 4000)), FS), 0.0)
        assert pair.meta["normalization"] < 1.0
        assert np.max(np.abs(pair.mixture.data)) == pytest.approx(0.99)
        speech = pair.direct_speech_image + pair.reverberant_speech_tail
        assert measured_snr_db(speech, pair.reverberant_noise) == pytest.approx(0.0, abs=0.01)

    def test_zero_noise_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(InvalidInputError):
            mix_at_snr(self._image(rng), MultichannelWaveform(np.zeros((3, 4000)), FS), 0.0)

    def test_interference(self):
        rng = np.random.default_rng(4)
        pair = mix_at_snr(self._image(rng, 0.05), MultichannelWaveform(rng.standard_normal((3, 4000)), FS), 0.0)
        np.testing.assert_allclose(pair.interference.data, pair.mixture.data - pair.direct_speech_image.data, atol=1e-12)


class TestSynthesis:
    @pytest.mark.slow
    def test_additivity_and_snr_over_many_scenes(self, tmp_path):
        rng = np.random.default_rng(11)
        speech_dir, noise_dir = write_sources(tmp_path, rng, seconds=0.5, count=3)
        for i, label in enumerate(assign_doa_bins(100)):
            spec = small_spec(speech_source=str(speech_dir / f"utt_{i % 3}.wav"), noise_source=str(noise_dir / f"noise_{i % 3}.wav"),
                              seed=scene_seed(21, i), doa_bin=label, max_duration_s=0.25)
            pair = synthesize_scene(spec, f"pair_{i:05d}")
            total = pair.direct_speech_image + pair.reverberant_speech_tail + pair.reverberant_noise
            np.testing.assert_allclose(pair.mixture.data, total.data, rtol=1e-6, atol=1e-12)
            speech = pair.direct_speech_image + pair.reverberant_speech_tail
            assert measured_snr_db(speech, pair.reverberant_noise) == pytest.approx(pair.meta["snr"], abs=0.01)
            assert pair.meta["doa_bin"] == label

    def test_scene_to_manifest_and_back(self, tmp_path):
        rng = np.random.default_rng(5)
        speech_dir, noise_dir = write_sources(tmp_path, rng)
        pairs = []
        for i, label in enumerate(("0-15", "90-180")):
            spec = small_spec(speech_source=str(speech_dir / f"utt_{i}.wav"), noise_source=str(noise_dir / f"noise_{i}.wav"),
                              seed=scene_seed(7, i), doa_bin=label)
            pairs.append(synthesize_scene(spec, f"pair_{i:05d}"))
        for pair, label in zip(pairs, ("0-15", "90-180")):
            assert pair.meta["doa_bin"] == label
            assert pair.mixture.num_samples == int(0.5 * FS)
            total = pair.direct_speech_image + pair.reverberant_speech_tail + pair.reverberant_noise
            np.testing.assert_allclose(pair.mixture.data, total.data, rtol=1e-6, atol=1e-12)
            speech = pair.direct_speech_image + pair.reverberant_speech_tail
            assert measured_snr_db(speech, pair.reverberant_noise) == pytest.approx(pair.meta["snr"], abs=0.01)
            assert pair.target_rir is not None

        path = build_manifest(pairs, tmp_path / "dataset")
        manifest = read_manifest(path)
        assert manifest["num_pairs"] == 2
        assert [e["doa_bin"] for e in manifest["pairs"]] == ["0-15", "90-180"]
        assert manifest["pairs"][0]["files"]["mixture"] == "pair_00000/mixture.wav"

        loaded = load_manifest(tmp_path / "dataset")
        np.testing.assert_allclose(loaded[0].mixture.data, pairs[0].mixture.data, atol=1e-6)
        assert loaded[1].target_rir is not None
        np.testing.assert_array_equal(loaded[1].target_rir.direct_path_delays, pairs[1].target_rir.direct_path_delays)

    def test_same_seed_same_scene(self, tmp_path):
        rng = np.random.default_rng(6)
        speech_dir, noise_dir = write_sources(tmp_path, rng, count=1)
        spec = small_spec(speech_source=str(speech_dir / "utt_0.wav"), noise_source=str(noise_dir / "noise_0.wav"), seed=11)
        a, b = synthesize_scene(spec), synthesize_scene(spec)
        np.testing.assert_array_equal(a.mixture.data, b.mixture.data)

    def test_wrong_sample_rate(self, tmp_path):
        rng = np.random.default_rng(7)
        speech_dir, noise_dir = write_sources(tmp_path, rng, count=1)
        spec = small_spec(speech_source=str(speech_dir / "utt_0.wav"), noise_source=str(noise_dir / "noise_0.wav"), sample_rate_hz=8000)
        with pytest.raises(InvalidInputError):
            synthesize_scene(spec)

    def test_manifest_schema_checked(self, tmp_path):
        (tmp_path / "manifest.json").write_text('{"schema_version": 99, "pairs": []}', encoding="utf-8")
        with pytest.raises(InvalidInputError):
            read_manifest(tmp_path)
        with pytest.raises(FileNotFoundError):
            read_manifest(tmp_path / "missing")
