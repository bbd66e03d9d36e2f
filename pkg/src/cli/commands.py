from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np
from tqdm import tqdm

from src.acoustics.geometry import ArrayGeometry, steering_matrix
from src.acoustics.room import RoomSpec, save_rir, simulate_rir
from src.acoustics.t60 import estimate_t60
from src.beamforming.oracle import ORACLE_MODES, BeamformConfig, OracleSpectra, oracle_weights, run_oracle
from src.beamforming.pattern import beampattern, select_bins, write_beampattern_csv
from src.beamforming.types import BeamformerWeights, Rtf, SpatialCovariance
from src.beamforming.weights import (
    apply_beamformer,
    delay_and_sum_weights,
    load_weights,
    mvdr_weights,
    reference_selector,
    save_weights,
)
from src.cli.config import (
    BeampatternConfig,
    BeamformRunConfig,
    EvaluateConfig,
    SimulateRirConfig,
    SynthDatasetConfig,
    write_resolved_config,
)
from src.dsp.stft import istft
from src.errors import EstimationFailedError, InvalidInputError
from src.evaluation.report import evaluate_manifest, write_report
from src.scene.manifest import load_entry, read_manifest, write_manifest, write_pair
from src.scene.mixing import synthesize_scene
from src.scene.sampling import SceneSpec, assign_doa_bins, draw_scene, pick_sources, scene_seed
from src.taylor.engine import encode_features, oracle_correction, run_taylor_pipeline
from src.taylor.operators import (
    AnalyticLinearOperator,
    DerivativeOperator,
    FiniteDifferenceOperator,
    load_external_operator,
)
from src.taylor.terms import OperatorContext, TaylorConfig
from src.utils.audio import write_wave
from src.utils.storage import ensure_dir, write_complex_tensor

logger = logging.getLogger(__name__)

BEAMFORM_MODES = ORACLE_MODES + ("taylor",)
PATTERN_KINDS = ("mvdr", "das", "ref")


def _fan_out(fn: Callable, jobs_args: list[tuple], jobs: int, desc: str) -> list:
    """Run ``fn(*args)`` for every tuple, in worker processes when ``jobs`` > 1; results keep input order."""
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(fn, *a) for a in jobs_args]
            return [f.result() for f in tqdm(futures, desc=desc, unit="utt")]
    return [fn(*a) for a in tqdm(jobs_args, desc=desc, unit="utt")]


def cmd_simulate_rir(cfg: SimulateRirConfig) -> Path:
    if cfg.random:
        spec = SceneSpec(seed=cfg.seed, num_mics=cfg.num_mics, mic_spacing=cfg.mic_spacing,
                         sample_rate_hz=cfg.sample_rate_hz, interpolation=cfg.interpolation)
        room, placement = draw_scene(spec)
        logger.info("Drew room %s m, T60 %.2f s, target DOA %.1f deg", np.round(placement.dims, 2).tolist(), placement.t60, placement.target_doa)
    else:
        array = ArrayGeometry.ula(cfg.num_mics, cfg.mic_spacing, cfg.array_center)
        room = RoomSpec(cfg.dims, cfg.t60, cfg.source_pos, array, sample_rate_hz=cfg.sample_rate_hz, interpolation=cfg.interpolation)
    room.max_order = cfg.max_order
    rir = simulate_rir(room)
    out = Path(cfg.out)
    save_rir(rir, out)
    write_resolved_config(cfg, out.parent, "simulate-rir")
    if room.t60 > 0:
        try:
            logger.info("Schroeder T60 of %s: %.3f s (target %.3f s)", out, estimate_t60(rir), room.t60)
        except EstimationFailedError as e:
            logger.warning("T60 check skipped: %s", e)
    logger.info("RIR with %d channels x %d samples written to %s", rir.num_channels, rir.length, out)
    return out


def _wav_pool(directory: str, field: str) -> list[str]:
    files = sorted(str(p) for p in Path(directory).rglob("*.wav"))
    if not files:
        raise InvalidInputError(f"no WAV files under {directory}", field=field)
    return files


def _synth_one(spec: SceneSpec, pair_id: str, out_dir: str) -> dict:
    return write_pair(synthesize_scene(spec, pair_id), out_dir)


def cmd_synth_dataset(cfg: SynthDatasetConfig) -> Path:
    speech_pool = _wav_pool(cfg.speech_dir, "speech_dir")
    noise_pool = _wav_pool(cfg.noise_dir, "noise_dir")
    bins = assign_doa_bins(cfg.n, cfg.doa_proportions)
    jobs_args = []
    for i in range(cfg.n):
        speech, noise = pick_sources(speech_pool, noise_pool, scene_seed(cfg.seed, i, stream=1))
        spec = SceneSpec(
            speech_source=speech, noise_source=noise,
            dims_min=tuple(cfg.dims_min), dims_max=tuple(cfg.dims_max), t60_range=tuple(cfg.t60_range),
            distance_range=tuple(cfg.distance_range), distance_step=cfg.distance_step,
            min_doa_separation=cfg.min_doa_separation, snr_range_db=tuple(cfg.snr_range_db),
            seed=scene_seed(cfg.seed, i), num_mics=cfg.num_mics, mic_spacing=cfg.mic_spacing,
            sample_rate_hz=cfg.sample_rate_hz, max_duration_s=cfg.max_duration_s,
            doa_bin=bins[i], interpolation=cfg.interpolation, max_order=cfg.max_order,
        )
        jobs_args.append((spec, f"pair_{i:05d}", cfg.out_dir))
    ensure_dir(cfg.out_dir)
    entries = _fan_out(_synth_one, jobs_args, cfg.jobs, "synth-dataset")
    path = write_manifest(entries, cfg.out_dir, cfg.sample_rate_hz)
    write_resolved_config(cfg, cfg.out_dir, "synth-dataset")
    return path


def build_operator(cfg: BeamformRunConfig, weights: BeamformerWeights, spectra: OracleSpectra) -> tuple[DerivativeOperator, OperatorContext]:
    correction = oracle_correction(spectra.mixture, spectra.speech)
    features = encode_features(spectra.mixture, cfg.features) if cfg.operator == "external" else None
    ctx = OperatorContext.from_mixture(spectra.mixture, correction, features)
    if cfg.operator == "analytic-linear":
        return AnalyticLinearOperator(weights), ctx
    if cfg.operator == "finite-difference":
        mixture = spectra.mixture
        return FiniteDifferenceOperator(lambda x: apply_beamformer(weights, mixture.like(x)).data, h=cfg.fd_step), ctx
    if cfg.operator == "external":
        if not cfg.operator_path:
            raise InvalidInputError("external operator needs operator_path", field="operator_path")
        return load_external_operator(cfg.operator_path), ctx
    raise InvalidInputError(f"operator {cfg.operator!r} cannot run on spectra", field="operator")


def _beamform_one(entry: dict, root: Path, cfg: BeamformRunConfig) -> str:
    pair = load_entry(entry, root)
    out_dir = Path(cfg.out_dir)
    stft_cfg = cfg.stft_config()
    bf = BeamformConfig(mode=cfg.mode, rtf_source=cfg.rtf_source, loading=cfg.loading, lam=cfg.lam, stft=stft_cfg)
    if cfg.mode == "taylor":
        # TI-MVDR provides the 0th-order filter and the intermediate label
        bf.mode = "ti-mvdr"
        spectra = OracleSpectra.from_pair(pair, stft_cfg)
        weights = oracle_weights(pair, spectra, bf)
        operator, ctx = build_operator(cfg, weights, spectra)
        taylor_cfg = TaylorConfig(Q=cfg.Q, operator=cfg.operator, factorial_scaling=cfg.factorial_scaling, recursion=cfg.recursion)
        result = run_taylor_pipeline(spectra.mixture, weights, operator, ctx, taylor_cfg)
        output = result.output
        if cfg.dump_terms:
            for term in result.terms:
                write_complex_tensor(term.value, out_dir / "terms" / f"{pair.pair_id}_T{term.order}.tbfw",
                                     {"kind": "taylor_term", "order": term.order, "id": pair.pair_id})
    else:
        oracle = run_oracle(pair, bf)
        weights, output = oracle.weights, oracle.output
    write_wave(istft(output), out_dir / f"{pair.pair_id}.wav")
    if cfg.dump_weights:
        save_weights(weights, out_dir / "weights" / f"{pair.pair_id}.tbfw", {"id": pair.pair_id, "mode": bf.mode})
    return pair.pair_id


def cmd_beamform(cfg: BeamformRunConfig) -> Path:
    if cfg.mode not in BEAMFORM_MODES:
        raise InvalidInputError(f"unknown mode {cfg.mode!r}, choose from {BEAMFORM_MODES}", field="mode")
    TaylorConfig(Q=cfg.Q, operator=cfg.operator, factorial_scaling=cfg.factorial_scaling, recursion=cfg.recursion).validate()
    cfg.stft_config()
    manifest = read_manifest(cfg.manifest)
    out_dir = Path(cfg.out_dir)
    ensure_dir(out_dir)
    jobs_args = [(e, manifest["_root"], cfg) for e in manifest["pairs"]]
    done = _fan_out(_beamform_one, jobs_args, cfg.jobs, f"beamform[{cfg.mode}]")
    write_resolved_config(cfg, out_dir, "beamform")
    logger.info("Enhanced %d utterances into %s", len(done), out_dir)
    return out_dir


def cmd_evaluate(cfg: EvaluateConfig) -> tuple[Path, Path]:
    report = evaluate_manifest(cfg.manifest, cfg.outputs, cfg.jobs)
    paths = write_report(report, cfg.out_dir)
    write_resolved_config(cfg, cfg.out_dir, "evaluate")
    return paths


def pattern_weights(cfg: BeampatternConfig, array: ArrayGeometry, freqs: np.ndarray) -> BeamformerWeights:
    """Free-field weights: MVDR for a point interferer in white noise, delay-and-sum, or reference mic."""
    target = np.radians(cfg.target_deg)
    if cfg.kind == "das":
        return delay_and_sum_weights(array, target, freqs)
    if cfg.kind == "ref":
        w = reference_selector(freqs.size, array.num_mics)
        w.freqs_hz = freqs
        return w
    d_n = steering_matrix(array, np.array([np.radians(cfg.interferer_deg)]), freqs)[0]
    power = 10.0 ** (cfg.interferer_to_white_db / 10.0)
    phi = power * d_n[:, :, None] * np.conj(d_n[:, None, :]) + np.eye(array.num_mics)[None]
    c = steering_matrix(array, np.array([target]), freqs)[0]
    w = mvdr_weights(SpatialCovariance(phi), Rtf(c), loading=0.0)
    w.freqs_hz = freqs
    return w


def cmd_beampattern(cfg: BeampatternConfig) -> Path:
    if cfg.kind not in PATTERN_KINDS:
        raise InvalidInputError(f"unknown kind {cfg.kind!r}, choose from {PATTERN_KINDS}", field="kind")
    if cfg.angle_step_deg <= 0 or cfg.angle_max_deg < cfg.angle_min_deg:
        raise InvalidInputError("need angle_step_deg > 0 and angle_max_deg >= angle_min_deg", field="angle_step_deg")
    array = ArrayGeometry.ula(cfg.num_mics, cfg.mic_spacing)
    angles = np.radians(np.arange(cfg.angle_min_deg, cfg.angle_max_deg + cfg.angle_step_deg / 2.0, cfg.angle_step_deg))
    if cfg.weights_path:
        weights = load_weights(cfg.weights_path)
        if weights.frame_level:
            if cfg.frame is None or not 0 <= cfg.frame < weights.data.shape[0]:
                raise InvalidInputError(f"frame-level weights need a frame index in 0..{weights.data.shape[0] - 1}", field="frame")
            weights = weights.frame(cfg.frame)
        weights, freqs = select_bins(weights, np.asarray(cfg.freqs_hz, dtype=np.float64))
    else:
        freqs = np.asarray(cfg.freqs_hz, dtype=np.float64)
        weights = pattern_weights(cfg, array, freqs)
    pattern = beampattern(weights, array, angles, freqs)
    out = write_beampattern_csv(pattern, angles, freqs, cfg.out)
    write_resolved_config(cfg, out.parent, "beampattern")
    best = np.degrees(angles[np.argmax(pattern, axis=0)])
    logger.info("Beampattern written to %s; peak directions per frequency: %s deg", out, ", ".join(f"{b:.0f}" for b in best))
    return out
