"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 failure
while solving or writing. Diagnostics go to stderr; data goes to files,
except ``oracle`` which prints its CSV to stdout.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, parse_config, parse_value, validate
from .driver import run
from .elastica import ElasticaProblem
from .errors import HilbertSimError
from .kinematics import MaterialGrid
from .outputs import OutputError, fmt, write_outputs
from .shooting import shooting_oracle

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("hilbert_sim")


def _timestamp():
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _report_config(exc: ConfigError):
    for msg in exc.errors:
        print(f"error: {msg}", file=sys.stderr)


def execute(cfg, out_dir) -> int:
    """Run one config and write its artifacts; returns the exit code."""
    meta = {"version": __version__, "start": _timestamp()}
    record, code = None, EXIT_OK
    try:
        record = run(cfg)
    except HilbertSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        meta["error"] = str(exc)
        code = EXIT_RUNTIME
    meta["end"] = _timestamp()
    meta["exit_status"] = code
    try:
        write_outputs(record, cfg, out_dir, meta)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return code


def _load(path, out=None):
    cfg = parse_config(path)
    if out is not None:
        cfg = cfg.replace("output.directory", str(out))
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args.config, args.out)
    return execute(cfg, cfg.output.directory)


def cmd_validate(args) -> int:
    _load(args.config)
    print(f"{args.config}: ok", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    grid = MaterialGrid(args.n, args.length)
    problem = ElasticaProblem(
        grid, np.full(args.n, args.bending_stiffness), args.axial_stiffness, args.d
    )
    p = shooting_oracle(problem, inextensible=args.inextensible, branch_sign=args.branch_sign)
    lines = ["node,s,x,z,theta,eps"]
    for i in range(grid.n_nodes):
        lines.append(",".join([str(i)] + [fmt(v[i]) for v in (grid.s, p.x, p.z, p.theta, p.eps)]))
    sys.stdout.write("\n".join(lines) + "\n")
    sys.stdout.flush()
    return EXIT_OK


def _sweep_one(job):
    cfg, directory = job
    return execute(cfg, directory)


def _label(text):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in text)


def cmd_sweep(args) -> int:
    base = _load(args.config, args.out)
    root = Path(base.output.directory)
    jobs = []
    for text in (v.strip() for v in args.values.split(",")):
        if not text:
            continue
        value = parse_value(args.param, text)
        cfg = base.replace(args.param, value)
        problems = validate(cfg)
        if problems:
            raise ConfigError([f"{args.param}={text}: {p}" for p in problems])
        directory = root / f"{_label(args.param)}={_label(text)}"
        jobs.append((cfg.replace("output.directory", str(directory)), directory))
    if not jobs:
        raise ConfigError("--values is empty")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_sweep_one, jobs))
    else:
        codes = [_sweep_one(j) for j in jobs]
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hilbert-sim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration and write its artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a configuration without running it")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="reference solutions")
    osub = p.add_subparsers(dest="oracle", required=True)
    e = osub.add_parser("elastica", help="print the shooting-method elastica as CSV")
    e.add_argument("--d", type=float, required=True, help="end distance (length units)")
    e.add_argument("--n", type=int, default=101, help="number of nodes")
    e.add_argument("--length", type=float, default=1.0)
    e.add_argument("--bending-stiffness", type=float, default=1.0)
    e.add_argument("--axial-stiffness", type=float, default=10000.0)
    e.add_argument("--branch-sign", type=int, choices=(1, -1), default=1)
    e.add_argument("--inextensible", action="store_true")
    e.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="run a configuration once per value of one key")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, help="dotted key, e.g. coupling.beta")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="root directory for the per-value outputs")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; usage errors belong with config errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        _report_config(exc)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HilbertSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the final flush
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
