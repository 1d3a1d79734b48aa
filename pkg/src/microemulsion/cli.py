"""Command-line entry point: ``run``, ``eoc`` and ``info`` subcommands.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 Picard
non-convergence, 1 any other failure.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import math
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from .assembly import get_space
from .config import load_config
from .diagnostics import initial_record
from .eoc import DEFAULT_LADDER, DEFAULT_REFERENCE_DT, run_eoc_study
from .errors import ConfigError, InvalidArgument, NonConvergence, SolverFailure
from .model import dt_safety_bound
from .output import snapshot_name, write_csv, write_vtk
from .stepper import DtSafetyWarning, Sink, run_simulation, step_count

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_INVALID", "EXIT_NONCONVERGENCE"]

EXIT_OK, EXIT_FAILURE, EXIT_INVALID, EXIT_NONCONVERGENCE = 0, 1, 2, 3

log = logging.getLogger("microemulsion")


class _FileSink(Sink):
    """Collects records (including the initial state) and writes VTK snapshots."""

    def __init__(self, out_dir, cfg, write_snapshots):
        self.out_dir = out_dir
        self.cfg = cfg
        self.write_snapshots = write_snapshots
        self.records = []

    def on_start(self, space, state):
        self.records.append(initial_record(space, self.cfg.params, state))

    def on_record(self, record):
        self.records.append(record)

    def on_snapshot(self, space, state):
        if self.write_snapshots:
            write_vtk(space.mesh, state, os.path.join(self.out_dir, snapshot_name(state.step)))


def _parse_dts(text):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")
    if not vals or not all(v > 0 and math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("time steps must be positive")
    return vals


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("expected a non-negative integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="microemulsion",
                                     description="Sixth-order Cahn-Hilliard microemulsion simulator.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="configuration file")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="cap on BLAS threads (needs threadpoolctl)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="simulate and write CSV + VTK output")
    run.add_argument("--out-dir", help="output directory (overrides [output] directory)")
    run.add_argument("--snapshot-every", type=_positive_int,
                     help="VTK snapshot cadence in steps; 0 writes only the final state")

    eoc = sub.add_parser("eoc", parents=[common], help="temporal convergence study")
    eoc.add_argument("--dts", type=_parse_dts, default=list(DEFAULT_LADDER),
                     help="decreasing ladder of time steps, comma separated")
    eoc.add_argument("--dt-ref", type=float, default=DEFAULT_REFERENCE_DT, help="reference time step")
    eoc.add_argument("--out-dir", help="directory for eoc.csv (overrides [output] directory)")

    sub.add_parser("info", parents=[common], help="print the dt bound, mesh statistics and memory estimate")
    return parser


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("--threads ignored: threadpoolctl is not installed")
        return contextlib.nullcontext()
    return threadpool_limits(limits=max(int(n), 1))


def _say(args, *parts):
    if not args.quiet:
        print(*parts)


def _cmd_info(args, cfg):
    mesh = cfg.mesh.build()
    bound = dt_safety_bound(cfg.params)
    n = mesh.n_nodes
    edges = set()
    k = mesh.elements.shape[1]
    for a in range(k):
        for b in range(a + 1, k):
            e = np.sort(mesh.elements[:, [a, b]], axis=1)
            edges.update(map(tuple, e))
    nnz_scalar = n + 2 * len(edges)
    nnz_block = 7 * nnz_scalar
    matrix_bytes = nnz_block * (8 + 4) + (3 * n + 1) * 4
    vector_bytes = 12 * 3 * n * 8
    print(f"dt_safety_bound = {bound:.15g}")
    print(f"dt = {cfg.dt:.15g} ({'exceeds' if cfg.dt > bound else 'within'} bound)")
    print(f"dimension = {mesh.dim}")
    print(f"divisions = {' x '.join(str(d) for d in mesh.divisions)}")
    print(f"nodes = {n}")
    print(f"elements = {mesh.n_elements}")
    print(f"h = {mesh.h:.6g}")
    print(f"unknowns = {3 * n}")
    print(f"steps = {step_count(cfg.t_end, cfg.dt)}")
    print(f"system_nnz = {nnz_block}")
    print(f"estimated_memory_mb = {(matrix_bytes + vector_bytes) / 2**20:.1f} "
          "(assembled system and work vectors, excluding LU fill)")
    return EXIT_OK


def _cmd_run(args, cfg):
    out_dir = args.out_dir or cfg.output.directory
    if args.snapshot_every is not None:
        cfg = replace(cfg, output=replace(cfg.output, snapshot_every=args.snapshot_every))
    os.makedirs(out_dir, exist_ok=True)
    every = cfg.output.snapshot_every
    space = get_space(cfg.mesh.build())
    sink = _FileSink(out_dir, cfg, write_snapshots=True)
    csv_path = os.path.join(out_dir, cfg.output.csv_path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DtSafetyWarning)
        try:
            result = run_simulation(cfg, sinks=(sink,), space=space)
        except NonConvergence:
            write_csv(sink.records, csv_path)
            raise
        finally:
            for w in caught:
                if issubclass(w.category, DtSafetyWarning):
                    print(f"warning: {w.message}", file=sys.stderr)
                else:
                    warnings.showwarning(w.message, w.category, w.filename, w.lineno)
    write_csv(sink.records, csv_path)
    if not every:
        write_vtk(space.mesh, result.state, os.path.join(out_dir, snapshot_name(result.state.step)))
    last = sink.records[-1]
    _say(args, f"completed {result.metadata['n_steps']} steps to t={last.time:.6g}")
    _say(args, f"energy {sink.records[0].energy:.10g} -> {last.energy:.10g}; "
               f"phi in [{last.phi_min:.6g}, {last.phi_max:.6g}]")
    _say(args, f"records written to {csv_path}")
    return EXIT_OK


def _cmd_eoc(args, cfg):
    out_dir = args.out_dir or cfg.output.directory
    report = run_eoc_study(cfg, args.dts, args.dt_ref)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "eoc.csv")
    report.write_csv(path)
    _say(args, report.to_text())
    _say(args, f"report written to {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    handler = {"run": _cmd_run, "eoc": _cmd_eoc, "info": _cmd_info}[args.command]
    try:
        with _thread_limit(args.threads):
            return handler(args, cfg)
    except (InvalidArgument, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (SolverFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
