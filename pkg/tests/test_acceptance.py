"""End-to-end calibration checks; minutes of simulation, run with ``pytest -m slow``."""
import numpy as np
import pytest

from src.acoustics.geometry import ArrayGeometry
from src.acoustics.room import RoomSpec, simulate_rir
from src.acoustics.t60 import estimate_t60
from src.beamforming.oracle import BeamformConfig, run_oracle
from src.evaluation.metrics import si_sdr
from src.scene.mixing import synthesize_scene
from src.scene.sampling import SceneSpec, assign_doa_bins, scene_seed

from conftest import write_sources

pytestmark = pytest.mark.slow


def test_t60_calibration():
    rng = np.random.default_rng(20)
    hits = 0
    for i in range(20):
        t60 = (0.2, 0.4, 0.6)[i % 3]
        dims = np.array([5.0, 5.0, 4.0]) * rng.uniform(0.9, 1.1, 3)
        array = ArrayGeometry.ula(2, 0.05, dims * rng.uniform(0.35, 0.65, 3))
        source = dims * rng.uniform(0.2, 0.8, 3)
        rir = simulate_rir(RoomSpec(tuple(dims), t60, tuple(source), array))
        if abs(estimate_t60(rir) - t60) <= 0.2 * t60:
            hits += 1
    assert hits >= 18


def test_oracle_beamformers_improve_si_sdr(tmp_path):
    rng = np.random.default_rng(21)
    speech_dir, noise_dir = write_sources(tmp_path, rng, seconds=3.0, count=4)
    gains = {"ti-mvdr": [], "ti-mwf": []}
    t60s = []
    for i, label in enumerate(assign_doa_bins(52)):
        spec = SceneSpec(
            speech_source=str(speech_dir / f"utt_{i % 4}.wav"), noise_source=str(noise_dir / f"noise_{i % 4}.wav"),
            seed=scene_seed(99, i), doa_bin=label,
        )
        pair = synthesize_scene(spec, f"pair_{i:05d}")
        noisy = si_sdr(pair.mixture.reference, pair.anechoic_target)
        for mode in gains:
            result = run_oracle(pair, BeamformConfig(mode=mode))
            gains[mode].append(si_sdr(result.enhanced, pair.anechoic_target) - noisy)
        t60s.append(pair.meta["t60"])
    mvdr, mwf = np.asarray(gains["ti-mvdr"]), np.asarray(gains["ti-mwf"])
    assert mvdr.mean() >= 8.0
    assert mwf.mean() >= mvdr.mean() - 0.5
    short = np.asarray(t60s) <= 0.3
    assert short.sum() >= 5
    assert mwf[short].mean() > mvdr[short].mean()
