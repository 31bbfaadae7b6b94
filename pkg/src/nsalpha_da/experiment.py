"""Run a configured twin experiment and write its artifacts."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from nsalpha_da.assimilation import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    TwinAbort,
    TwinRun,
    check_conditions,
    run_twin,
)
from nsalpha_da.config import ExperimentConfig, dump_config
from nsalpha_da.errors import ConfigurationError
from nsalpha_da.fitting import DecayFit, fit_decay
from nsalpha_da.snapshot import encode_snapshot

log = logging.getLogger(__name__)

CSV_NAME = "diagnostics.csv"
PLOT_NAME = "plot_decay.gp"


class ArtifactIOError(OSError):
    """Writing an artifact failed; the message names the path."""


def format_record(rec: DiagnosticsRecord) -> str:
    return ",".join(format(getattr(rec, c), ".17g") for c in CSV_COLUMNS)


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


PLOT_SCRIPT = """\
# gnuplot script: synchronization error of the twin run
set datafile separator ','
set key autotitle columnhead
set logscale y
set xlabel 't'
set ylabel 'error'
set grid
plot '{csv}' using 1:4 with lines title 'err\\_combined', \\
     '' using 1:2 with lines title 'err\\_l2\\_sq', \\
     '' using 1:3 with lines title 'err\\_h1a\\_sq'
pause -1
"""


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    out_dir: Path
    run: TwinRun
    fit: DecayFit | None
    paths: dict


def _write(path: Path, data: bytes | str) -> None:
    try:
        if isinstance(data, str):
            path.write_text(data, encoding="utf-8")
        else:
            path.write_bytes(data)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run the twin, streaming the CSV (flushed per record) into ``out_dir``.

    A numerical abort re-raises ``TwinAbort`` after the partial CSV is on disk.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    acfg = cfg.assimilation
    setup = acfg.setup
    paths = {"config": out / "config.ini", "conditions": out / "conditions.json", "csv": out / CSV_NAME}
    _write(paths["config"], dump_config(cfg))
    report = check_conditions(acfg)
    _write(paths["conditions"], json.dumps(dataclasses.asdict(report), indent=2, sort_keys=True) + "\n")

    csv_path = paths["csv"]
    try:
        fh = open(csv_path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {csv_path}: {exc.strerror or exc}") from exc
    with fh:
        fh.write(csv_header() + "\n")

        def sink(rec):
            fh.write(format_record(rec) + "\n")
            fh.flush()

        try:
            run = run_twin(acfg, sink=sink)
        except TwinAbort as exc:
            log.error("numerical abort after %d records: %s (partial CSV in %s)", len(exc.records), exc, csv_path)
            raise

    for tag, twin in (("initial", run.start), ("final", run.final)):
        for name, state in (("u", twin.ref), ("w", twin.assim)):
            p = out / f"{name}_{tag}.nsa"
            _write(p, encode_snapshot(state.u, setup.nu, setup.alpha, twin.t))
            paths[f"{name}_{tag}"] = p
    paths["plot"] = out / PLOT_NAME
    _write(paths["plot"], PLOT_SCRIPT.format(csv=CSV_NAME))

    try:
        fit = fit_decay(run.records)
    except ConfigurationError as exc:
        log.info("no decay fit: %s", exc)
        fit = None
    return ExperimentResult(out, run, fit, paths)
