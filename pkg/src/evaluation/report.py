"""Per-utterance scoring of system outputs against the anechoic targets of a manifest.

Report schema (schema_version 1), one CSV row / JSON record per utterance:
  id, doa_bin, t60 [s], snr_in [dB], si_sdr_in [dB] (noisy reference channel),
  si_sdr [dB], si_sdr_improvement [dB], seg_snr [dB], pesq, estoi, dnsmos
The last three columns are reserved for externally computed scores and left empty.
report.json also carries per-bin and global means.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from tqdm import tqdm

from src.errors import MissingOutputsError
from src.evaluation.metrics import segmental_snr, si_sdr
from src.scene.manifest import read_manifest
from src.scene.sampling import DOA_BIN_LABELS
from src.utils.audio import read_multichannel, read_wave
from src.utils.storage import ensure_dir, write_json

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
REPORT_COLUMNS = ("id", "doa_bin", "t60", "snr_in", "si_sdr_in", "si_sdr", "si_sdr_improvement", "seg_snr", "pesq", "estoi", "dnsmos")
MEAN_FIELDS = ("si_sdr_in", "si_sdr", "si_sdr_improvement", "seg_snr")


@dataclass
class EvalRecord:
    id: str
    doa_bin: str
    t60: float
    snr_in: float
    si_sdr_in: float
    si_sdr: float
    seg_snr: float
    pesq: Optional[float] = None
    estoi: Optional[float] = None
    dnsmos: Optional[float] = None

    @property
    def si_sdr_improvement(self) -> float:
        return self.si_sdr - self.si_sdr_in

    def row(self) -> dict:
        d = asdict(self)
        d["si_sdr_improvement"] = self.si_sdr_improvement
        return {k: d[k] for k in REPORT_COLUMNS}


@dataclass
class EvalReport:
    records: list[EvalRecord]
    per_bin: dict[str, dict] = field(default_factory=dict)
    overall: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: list[EvalRecord]) -> "EvalReport":
        records = sorted(records, key=lambda r: r.id)
        per_bin = {label: _summary([r for r in records if r.doa_bin == label]) for label in DOA_BIN_LABELS}
        return cls(records, per_bin, _summary(records))


def _summary(records: list[EvalRecord]) -> dict:
    out: dict = {"count": len(records)}
    for name in MEAN_FIELDS:
        values = [getattr(r, name) for r in records]
        out[name] = float(np.mean(values)) if values else None
    return out


def score_entry(entry: dict, root: Path, outputs_dir: Path) -> EvalRecord:
    meta = entry["meta"]
    rate = meta.get("sample_rate_hz")
    target = read_wave(root / entry["files"]["anechoic_target"], rate)
    noisy = read_multichannel(root / entry["files"]["mixture"], rate).reference
    est = read_wave(outputs_dir / f"{entry['id']}.wav", rate)
    return EvalRecord(
        id=entry["id"],
        doa_bin=entry["doa_bin"],
        t60=float(meta["t60"]),
        snr_in=float(meta["snr"]),
        si_sdr_in=si_sdr(noisy, target),
        si_sdr=si_sdr(est, target),
        seg_snr=segmental_snr(est, target),
    )


def evaluate_manifest(manifest: str | Path, system_outputs: str | Path, jobs: int = 1) -> EvalReport:
    """Score ``<system_outputs>/<id>.wav`` for every manifest entry; missing outputs are listed by id."""
    m = read_manifest(manifest)
    root, outputs = m["_root"], Path(system_outputs)
    entries = m["pairs"]
    missing = [e["id"] for e in entries if not (outputs / f"{e['id']}.wav").is_file()]
    if missing:
        raise MissingOutputsError(missing)
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(score_entry, e, root, outputs) for e in entries]
            records = [f.result() for f in tqdm(futures, desc="evaluate", unit="utt")]
    else:
        records = [score_entry(e, root, outputs) for e in tqdm(entries, desc="evaluate", unit="utt")]
    report = EvalReport.from_records(records)
    logger.info("Evaluated %d utterances: SI-SDR %s dB (noisy %s dB)", len(records),
                _fmt(report.overall["si_sdr"]), _fmt(report.overall["si_sdr_in"]))
    return report


def _fmt(v: Optional[float]) -> str:
    return "n/a" if v is None else f"{v:.2f}"


def write_report(report: EvalReport, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    ensure_dir(out)
    csv_path, json_path = out / "report.csv", out / "report.json"
    try:
        with csv_path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(REPORT_COLUMNS))
            writer.writeheader()
            for r in report.records:
                writer.writerow({k: ("" if v is None else v) for k, v in r.row().items()})
    except OSError as e:
        raise OSError(f"Could not write report {csv_path}: {e}") from e
    write_json({
        "schema_version": REPORT_SCHEMA_VERSION,
        "columns": list(REPORT_COLUMNS),
        "records": [r.row() for r in report.records],
        "per_bin": report.per_bin,
        "global": report.overall,
    }, json_path)
    return csv_path, json_path
