import csv
import json
from pathlib import Path

import numpy as np
import pytest

from hilbert_sim.config import SimConfig, parse_config
from hilbert_sim.driver import run
from hilbert_sim.outputs import FILENAMES, SNAPSHOT_HEADER, SUMMARY_HEADER, OutputError, write_outputs

GOLDEN = Path(__file__).parent / "data" / "tiny_summary.csv"


def tiny(**extra):
    cfg = SimConfig()
    changes = {
        "sheet.n_nodes": 11,
        "schedule.T": 0.5,
        "schedule.dt": 0.05,
        "schedule.d_final": 0.9,
        "schedule.snapshot_stride": 2,
    }
    changes.update(extra)
    for k, v in changes.items():
        cfg = cfg.replace(k, v)
    return cfg


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_headers_are_exact(tmp_path):
    cfg = tiny()
    write_outputs(run(cfg), cfg, tmp_path, meta={"exit_status": 0})
    assert (tmp_path / "snapshots.csv").read_text().splitlines()[0] == "step,t,node,s,x,z,theta,eps,kappa,B,w_norm,p_up,fidelity"
    assert (tmp_path / "summary.csv").read_text().splitlines()[0] == (
        "step,t,d,elastic_energy,max_abs_kappa,max_w,min_fidelity,newton_iters,inner_iters"
    )
    assert tuple(read_csv(tmp_path / "snapshots.csv")[0]) == SNAPSHOT_HEADER
    assert tuple(read_csv(tmp_path / "summary.csv")[0]) == SUMMARY_HEADER


def test_all_four_artifacts(tmp_path):
    cfg = tiny()
    paths = write_outputs(run(cfg), cfg, tmp_path, meta={"version": "x", "exit_status": 0})
    assert sorted(p.name for p in paths) == sorted(FILENAMES.values())
    assert parse_config(tmp_path / "config_echo.toml") == cfg
    assert json.loads((tmp_path / "run_meta.json").read_text())["exit_status"] == 0


def test_zero_snapshot_run_writes_headers_only(tmp_path):
    cfg = tiny(**{"schedule.snapshot_stride": 0})
    write_outputs(run(cfg), cfg, tmp_path)
    assert (tmp_path / "snapshots.csv").read_text() == ",".join(SNAPSHOT_HEADER) + "\n"
    assert (tmp_path / "summary.csv").read_text() == ",".join(SUMMARY_HEADER) + "\n"


def test_floats_round_trip_exactly(tmp_path):
    cfg = tiny()
    rec = run(cfg)
    write_outputs(rec, cfg, tmp_path)
    _, rows = read_csv(tmp_path / "snapshots.csv")
    last = rec.snapshots[-1]
    mine = [r for r in rows if int(r[0]) == last.step]
    theta = np.array([float(r[6]) for r in mine])
    assert theta.tobytes() == last.theta.tobytes()
    assert len(rows) == len(rec.snapshots) * 11


def test_rerun_is_byte_identical(tmp_path):
    cfg = tiny(**{"fibre.preset": "stretch-coupled"})
    write_outputs(run(cfg), cfg, tmp_path / "a")
    write_outputs(run(cfg), cfg, tmp_path / "b")
    for name in ("snapshots.csv", "summary.csv", "config_echo.toml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_flat_run_p_up_column(tmp_path):
    cfg = tiny(**{"schedule.kind": "hold", "schedule.d_final": 1.0, "schedule.snapshot_stride": 1})
    write_outputs(run(cfg), cfg, tmp_path)
    _, rows = read_csv(tmp_path / "snapshots.csv")
    for r in rows:
        assert float(r[11]) == pytest.approx(np.sin(float(r[1])) ** 2, abs=1e-9)


def test_summary_matches_golden(tmp_path):
    cfg = tiny()
    write_outputs(run(cfg), cfg, tmp_path)
    head, rows = read_csv(tmp_path / "summary.csv")
    ghead, grows = read_csv(GOLDEN)
    assert head == ghead
    assert len(rows) == len(grows)
    for r, g in zip(rows, grows):
        assert r[0] == g[0] and r[-2:] == g[-2:]
        np.testing.assert_allclose([float(v) for v in r[1:-2]], [float(v) for v in g[1:-2]], rtol=1e-10, atol=1e-12)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputError, match="file"):
        write_outputs(None, SimConfig(), blocker / "sub")
