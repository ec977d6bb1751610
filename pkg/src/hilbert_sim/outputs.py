"""Run artifacts: snapshot and summary CSVs, config echo and run metadata.

Floats are written with ``repr``, the shortest string that round-trips, so
two runs agree byte for byte exactly when their numbers agree bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from .config import SimConfig, echo_config

SNAPSHOT_HEADER = ("step", "t", "node", "s", "x", "z", "theta", "eps", "kappa", "B", "w_norm", "p_up", "fidelity")
SUMMARY_HEADER = (
    "step", "t", "d", "elastic_energy", "max_abs_kappa", "max_w", "min_fidelity", "newton_iters", "inner_iters",
)
FILENAMES = {
    "snapshots": "snapshots.csv",
    "summary": "summary.csv",
    "config_echo": "config_echo.toml",
    "run_meta": "run_meta.json",
}


class OutputError(OSError):
    pass


def fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def snapshot_rows(snapshots) -> Iterable[str]:
    yield ",".join(SNAPSHOT_HEADER)
    for snap in snapshots:
        head = f"{snap.step},{fmt(snap.t)},"
        cols = (snap.s, snap.x, snap.z, snap.theta, snap.eps, snap.kappa, snap.B, snap.w_norm, snap.p_up, snap.fidelity)
        for i, values in enumerate(zip(*(c.tolist() for c in cols))):
            yield head + str(i) + "," + ",".join(repr(v) for v in values)


def summary_rows(snapshots) -> Iterable[str]:
    yield ",".join(SUMMARY_HEADER)
    for snap in snapshots:
        yield ",".join(
            fmt(v)
            for v in (
                snap.step, snap.t, snap.d, snap.elastic_energy, snap.max_abs_kappa,
                snap.max_w, snap.min_fidelity, snap.newton_iters, snap.inner_iters,
            )
        )


def _write_text(path: Path, text: str):
    try:
        # newline="" keeps "\n" on every platform
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _lines(rows) -> str:
    return "\n".join(rows) + "\n"


def write_run_meta(directory, meta: dict):
    directory = Path(directory)
    _write_text(directory / FILENAMES["run_meta"], json.dumps(meta, indent=2, sort_keys=True) + "\n")


def prepare_directory(directory) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {directory}: {exc.strerror or exc}") from exc
    return directory


def write_outputs(record, config: SimConfig, directory, meta: Optional[dict] = None, formats=None):
    """Write the requested artifacts and return the list of paths written.

    ``record`` may be None (failed run): only the config echo and the run
    metadata are then produced.
    """
    directory = prepare_directory(directory)
    formats = tuple(config.output.formats if formats is None else formats)
    written = []
    snaps = record.snapshots if record is not None else None
    if "snapshots" in formats and snaps is not None:
        _write_text(directory / FILENAMES["snapshots"], _lines(snapshot_rows(snaps)))
        written.append(directory / FILENAMES["snapshots"])
    if "summary" in formats and snaps is not None:
        _write_text(directory / FILENAMES["summary"], _lines(summary_rows(snaps)))
        written.append(directory / FILENAMES["summary"])
    if "config_echo" in formats:
        _write_text(directory / FILENAMES["config_echo"], echo_config(config))
        written.append(directory / FILENAMES["config_echo"])
    if "run_meta" in formats and meta is not None:
        write_run_meta(directory, meta)
        written.append(directory / FILENAMES["run_meta"])
    return written
