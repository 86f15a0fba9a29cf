"""Experiment orchestration: run the configured checks, emit CSVs + manifest.

Numbers are serialized with 17 significant digits so the CSVs round-trip
exactly and rerunning an identical (config, seed) pair reproduces the files
byte for byte, regardless of thread count. The manifest records the config
hash and a SHA-256 per output file; ``verify`` re-checks both the hashes and
the verdicts derivable from the CSV rows.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .bounds import CSV_COLUMNS, BoundReport, derive_verdict, sweep
from .config import ExperimentConfig

EXIT_OK = 0
EXIT_VERDICT_FALSE = 1
EXIT_CONFIG = 2
EXIT_INDETERMINATE = 3
EXIT_IO = 4

_INT_COLUMNS = {"N", "M", "N_star"}


def _format_cell(column: str, value) -> str:
    if value is None:
        return ""
    if column == "check":
        return str(value)
    if column == "verdict":
        return "true" if value else "false"
    if column in _INT_COLUMNS:
        return str(int(value))
    return f"{float(value):.17g}"


def _parse_cell(column: str, text: str):
    if text == "":
        return None
    if column == "check":
        return text
    if column == "verdict":
        return text == "true"
    if column in _INT_COLUMNS:
        return int(text)
    return float(text)


def report_csv(report: BoundReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for record in report.records():
        lines.append(",".join(_format_cell(c, record[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def plotdata_csv(report: BoundReport) -> str:
    """Log-log pairs (one row per sweep row) for external plotting."""
    lines = ["check,N,log_N,log_lhs,log_rhs"]
    for row in report.rows:
        if row.error is not None:
            continue
        log_lhs = "" if not row.lhs or row.lhs <= 0 else f"{math.log(row.lhs):.17g}"
        log_rhs = "" if not row.rhs or row.rhs <= 0 else f"{math.log(row.rhs):.17g}"
        lines.append(f"{row.check},{row.N},{math.log(row.N):.17g},{log_lhs},{log_rhs}")
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        records.append({c: _parse_cell(c, cell) for c, cell in zip(header, cells)})
    return records


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    version: str
    created: str
    master_seed: int
    outputs: tuple[dict, ...]  # {"check", "path", "sha256"} per written file
    verdicts: dict
    notes: dict

    def to_dict(self) -> dict:
        return {
            "tool": "randmisfit",
            "version": self.version,
            "created": self.created,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "outputs": list(self.outputs),
            "verdicts": self.verdicts,
            "notes": self.notes,
        }


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
) -> tuple[RunManifest, int]:
    """Execute every configured check and write one CSV per check.

    Returns the manifest and the exit code: 0 when all verdicts hold, 1 when
    any is false, 3 when any is indeterminate (false wins over
    indeterminate). File writes happen once, from this thread, in check
    order.
    """
    problem = config.build_problem()
    family = config.build_family(problem)
    reports = sweep(
        problem,
        family,
        list(config.sweep["Ns"]),
        int(config.sweep["M"]),
        exps=config.exponent_set(),
        checks=list(config.checks),
        ratio_cap=float(config.verdicts["ratio_cap"]),
        threads=max(1, int(threads)),
    )

    out = Path(out_dir) if out_dir is not None else Path(config.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    verdicts = {}
    notes = {}
    for check in config.checks:
        report = reports[check]
        path = out / f"{check}.csv"
        path.write_text(report_csv(report))
        outputs.append({"check": check, "path": path.name, "sha256": _sha256_file(path)})
        if "plotdata" in config.output["formats"]:
            ppath = out / f"plotdata_{check}.csv"
            ppath.write_text(plotdata_csv(report))
            outputs.append(
                {"check": check, "path": ppath.name, "sha256": _sha256_file(ppath)}
            )
        verdicts[check] = report.verdict
        notes[check] = list(report.notes)

    manifest = RunManifest(
        config_hash=config.hash(),
        version=__version__,
        created=datetime.now(timezone.utc).isoformat(),
        master_seed=config.master_seed,
        outputs=tuple(outputs),
        verdicts=verdicts,
        notes=notes,
    )
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest, exit_code_from_verdicts(verdicts)


def exit_code_from_verdicts(verdicts: dict) -> int:
    if any(v is False for v in verdicts.values()):
        return EXIT_VERDICT_FALSE
    if any(v is None for v in verdicts.values()):
        return EXIT_INDETERMINATE
    return EXIT_OK


def verify_manifest(path: str | Path) -> tuple[bool, list[str]]:
    """Re-check output hashes and re-derive verdicts from the CSV rows."""
    mpath = Path(path)
    manifest = json.loads(mpath.read_text())
    base = mpath.parent
    messages = []
    ok = True
    for entry in manifest["outputs"]:
        fpath = base / entry["path"]
        if not fpath.exists():
            messages.append(f"missing output file {entry['path']}")
            ok = False
            continue
        digest = _sha256_file(fpath)
        if digest != entry["sha256"]:
            messages.append(f"hash mismatch for {entry['path']}")
            ok = False
    for check, stored in manifest["verdicts"].items():
        fpath = base / f"{check}.csv"
        if not fpath.exists():
            messages.append(f"missing CSV for check {check}")
            ok = False
            continue
        records = parse_report_csv(fpath.read_text())
        derived = derive_verdict(check, records)
        if derived != stored:
            messages.append(
                f"verdict mismatch for {check}: manifest={stored}, derived={derived}"
            )
            ok = False
    if ok:
        messages.append("manifest verified: hashes and verdicts consistent")
    return ok, messages
