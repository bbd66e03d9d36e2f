from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from src.cli.commands import (
    BEAMFORM_MODES,
    PATTERN_KINDS,
    cmd_beamform,
    cmd_beampattern,
    cmd_evaluate,
    cmd_simulate_rir,
    cmd_synth_dataset,
)
from src.cli.config import (
    BeampatternConfig,
    BeamformRunConfig,
    EvaluateConfig,
    SimulateRirConfig,
    SynthDatasetConfig,
    resolve_config,
)
from src.beamforming.oracle import RTF_SOURCES
from src.dsp.stft import WINDOW_KINDS
from src.errors import ToolkitError
from src.acoustics.room import INTERPOLATIONS
from src.taylor.engine import FEATURE_CHANNELS
from src.taylor.terms import OPERATOR_TAGS, RECURSION_FORMS
from src.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class ToolArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with flat keys; command-line flags take precedence")
    p.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING (default: $TAYLORBF_LOG_LEVEL or INFO)")


def _jobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jobs", type=int, help="Worker processes (default: $TAYLORBF_JOBS or 1)")


def _stft(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window-len", dest="window_len", type=int)
    p.add_argument("--hop-len", dest="hop_len", type=int)
    p.add_argument("--fft-len", dest="fft_len", type=int)
    p.add_argument("--window-kind", dest="window_kind", choices=sorted(WINDOW_KINDS))


def build_parser() -> ToolArgumentParser:
    parser = ToolArgumentParser(prog="python -m src.cli.main", description="Multichannel beamforming and Taylor-expansion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    quiet = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("simulate-rir", help="Image-method RIR for a shoebox room", **quiet)
    _common(p)
    p.add_argument("--out", help="Output WAV; a .json sidecar is written beside it")
    p.add_argument("--dims", nargs=3, type=float, metavar=("X", "Y", "Z"))
    p.add_argument("--t60", type=float, help="Seconds; 0 gives fully absorbing walls")
    p.add_argument("--source-pos", dest="source_pos", nargs=3, type=float, metavar=("X", "Y", "Z"))
    p.add_argument("--array-center", dest="array_center", nargs=3, type=float, metavar=("X", "Y", "Z"))
    p.add_argument("--num-mics", dest="num_mics", type=int)
    p.add_argument("--mic-spacing", dest="mic_spacing", type=float)
    p.add_argument("--max-order", dest="max_order", type=int)
    p.add_argument("--interpolation", choices=INTERPOLATIONS)
    p.add_argument("--sample-rate", dest="sample_rate_hz", type=int)
    p.add_argument("--random", action="store_true", help="Draw a random room and placement from --seed")
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=(SimulateRirConfig, cmd_simulate_rir))

    p = sub.add_parser("synth-dataset", help="Spatialized mixtures plus manifest", **quiet)
    _common(p)
    _jobs(p)
    p.add_argument("--speech-dir", dest="speech_dir")
    p.add_argument("--noise-dir", dest="noise_dir")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--n", type=int, help="Number of scenes")
    p.add_argument("--seed", type=int)
    p.add_argument("--doa-proportions", dest="doa_proportions", nargs=4, type=float, metavar=("B0_15", "B15_45", "B45_90", "B90_180"))
    p.add_argument("--min-doa-separation", dest="min_doa_separation", type=float)
    p.add_argument("--snr-range", dest="snr_range_db", nargs=2, type=float, metavar=("MIN", "MAX"))
    p.add_argument("--t60-range", dest="t60_range", nargs=2, type=float, metavar=("MIN", "MAX"))
    p.add_argument("--dims-min", dest="dims_min", nargs=3, type=float)
    p.add_argument("--dims-max", dest="dims_max", nargs=3, type=float)
    p.add_argument("--distance-range", dest="distance_range", nargs=2, type=float, metavar=("MIN", "MAX"))
    p.add_argument("--distance-step", dest="distance_step", type=float)
    p.add_argument("--num-mics", dest="num_mics", type=int)
    p.add_argument("--mic-spacing", dest="mic_spacing", type=float)
    p.add_argument("--max-duration", dest="max_duration_s", type=float)
    p.add_argument("--max-order", dest="max_order", type=int)
    p.add_argument("--interpolation", choices=INTERPOLATIONS)
    p.set_defaults(handler=(SynthDatasetConfig, cmd_synth_dataset))

    p = sub.add_parser("beamform", help="Oracle beamformers and the Taylor pipeline", **quiet)
    _common(p)
    _jobs(p)
    _stft(p)
    p.add_argument("--manifest")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--mode", choices=BEAMFORM_MODES)
    p.add_argument("--rtf-source", dest="rtf_source", choices=RTF_SOURCES)
    p.add_argument("--loading", type=float, help="Diagonal loading, scaled by trace/M")
    p.add_argument("--lambda", dest="lam", type=float, help="Recursive smoothing for frame-mvdr")
    p.add_argument("--Q", "--order", dest="Q", type=int, help="Number of high-order terms")
    p.add_argument("--operator", choices=OPERATOR_TAGS)
    p.add_argument("--operator-path", dest="operator_path", help="TorchScript module for --operator external")
    p.add_argument("--factorial-scaling", dest="factorial_scaling", action=argparse.BooleanOptionalAction)
    p.add_argument("--recursion", choices=RECURSION_FORMS)
    p.add_argument("--features", choices=FEATURE_CHANNELS)
    p.add_argument("--fd-step", dest="fd_step", type=float)
    p.add_argument("--dump-weights", dest="dump_weights", action="store_true")
    p.add_argument("--dump-terms", dest="dump_terms", action="store_true")
    p.set_defaults(handler=(BeamformRunConfig, cmd_beamform))

    p = sub.add_parser("evaluate", help="SI-SDR / segmental SNR report per DOA bin", **quiet)
    _common(p)
    _jobs(p)
    p.add_argument("--manifest")
    p.add_argument("--outputs", help="Directory with <id>.wav system outputs")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(handler=(EvaluateConfig, cmd_evaluate))

    p = sub.add_parser("beampattern", help="Beampattern CSV (theta, freq, dB)", **quiet)
    _common(p)
    p.add_argument("--out")
    p.add_argument("--weights", dest="weights_path", help="Weights file written by beamform --dump-weights")
    p.add_argument("--frame", type=int, help="Frame index for frame-level weights")
    p.add_argument("--kind", choices=PATTERN_KINDS, help="Free-field weights when --weights is not given")
    p.add_argument("--target", dest="target_deg", type=float)
    p.add_argument("--interferer", dest="interferer_deg", type=float)
    p.add_argument("--interferer-to-white", dest="interferer_to_white_db", type=float)
    p.add_argument("--num-mics", dest="num_mics", type=int)
    p.add_argument("--mic-spacing", dest="mic_spacing", type=float)
    p.add_argument("--freqs", dest="freqs_hz", nargs="+", type=float)
    p.add_argument("--angle-min", dest="angle_min_deg", type=float)
    p.add_argument("--angle-max", dest="angle_max_deg", type=float)
    p.add_argument("--angle-step", dest="angle_step_deg", type=float)
    p.set_defaults(handler=(BeampatternConfig, cmd_beampattern))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_cls, handler = args.pop("handler")
    config_path = args.pop("config", None)
    setup_logging(args.pop("log_level", None))
    try:
        cfg = resolve_config(config_cls, config_path, args)
        handler(cfg)
    except (ToolkitError, OSError) as e:
        logger.debug("%s failed", command, exc_info=True)
        print(f"{command}: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
