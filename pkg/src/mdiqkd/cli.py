"""Command-line interface.

Exit status is 0 on success, 1 when the input data or configuration is
unusable, and 2 on usage errors. Set MDIQKD_LOG_LEVEL (e.g. DEBUG) for
diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .core import ProtocolConfig
from .datasets import IncompleteDatasetError, gains_from_counts
from .decoy import DEFAULT_K, BoundsError, estimate_bounds
from .finitesize import FluctuationPolicy, loosen
from .io import (
    DatasetFormatError,
    bundled_dataset_names,
    emit_rate_curve,
    format_bell_shares,
    format_visibility_grid,
    load_bundled,
    load_dataset,
    write_dataset,
)
from .keyrate import DistillationError, distill
from .optics import DEFAULT_TBP, SubTransformLimitError, visibility_from_measurements, visibility_grid
from .simulator import SimulationMode, run_campaign

log = logging.getLogger("mdiqkd")

DATA_ERRORS = (DatasetFormatError, ConfigError, DistillationError, BoundsError, IncompleteDatasetError, OSError, ValueError)


def _policy(args) -> FluctuationPolicy | None:
    return FluctuationPolicy(args.sigmas) if args.finite_size else None


def _protocol(args) -> ProtocolConfig:
    kw = {}
    if args.p_z is not None:
        kw["p_s"] = args.p_z
    return ProtocolConfig(**kw)


def _k(k):
    return DEFAULT_K if k is None else k


def _merge(args):
    return {None: None, "merge": True, "split": False}[args.bell_mode]


def cmd_distill(args) -> int:
    data = load_dataset(args.counts)
    k, fluct, merge, protocol = args.k, _policy(args), _merge(args), _protocol(args)
    if args.config:
        # the run configuration fills in whatever the command line left unset
        cfg = load_config(args.config)
        k = cfg.K if args.k is None else k
        fluct = fluct or cfg.fluct
        merge = cfg.merge_bell if merge is None else merge
        if args.p_z is None:
            protocol = cfg.protocol
    report = distill(data, merge_bell=merge, fluct=fluct, K=_k(k), protocol=protocol)
    print(report.summary())
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return 0


def cmd_bounds(args) -> int:
    data = load_dataset(args.counts)
    data.check_complete()
    fluct = _policy(args)
    merge = _merge(args)
    if merge is None:
        merge = fluct is not None
    if merge:
        tables = [("merged", gains_from_counts(data, merge_bell=True))]
    else:
        tables = [(b.value if b else "merged", gains_from_counts(data, bell=b)) for b in data.bell_states]
    for label, g in tables:
        if fluct is not None:
            g = loosen(g, fluct)
        b = estimate_bounds(g, _k(args.k), fluct)
        print(f"{label}: y11_lower = {b.y11_lower:.6g}  e11_upper = {b.e11_upper:.6g}  K = {b.K}  "
              f"constraints = {b.constraint_count}  failure_budget = {b.failure_budget:.3g}")
        if b.yield_relaxation_sigmas or b.error_relaxation_sigmas:
            print(f"  widened by {b.yield_relaxation_sigmas:.3g} sigma (yields), {b.error_relaxation_sigmas:.3g} sigma (errors)")
        print(f"  active: {', '.join(b.active)}")
        if b.dropped:
            print(f"  dropped: {', '.join(b.dropped)}")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    kw = cfg.campaign_kwargs()
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.expected:
        kw["mode"] = SimulationMode.EXPECTED
    data = run_campaign(cfg.protocol, cfg.channel, cfg.detector, cfg.overlap, **kw)
    write_dataset(data, args.out)
    if args.shares:
        Path(args.shares).write_text(format_bell_shares(data))
    log.info("wrote %d records to %s", len(data.records), args.out)
    return 0


def _linspace(spec: str) -> np.ndarray:
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP:COUNT, got {spec!r}") from None


def cmd_visibility(args) -> int:
    if args.grid:
        jit, bw = args.grid
        grid = visibility_grid(jit, bw, args.fwhm_ps, tbp=args.tbp)
        text = format_visibility_grid(jit, bw, grid)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        print(f"max visibility {grid.max():.6f}", file=sys.stderr)
        return 0
    if args.jitter_ps is None or args.bandwidth_ghz is None:
        raise _UsageError("visibility needs --jitter-ps and --bandwidth-ghz, or --grid")
    v = visibility_from_measurements(args.jitter_ps, args.bandwidth_ghz, args.fwhm_ps, tbp=args.tbp)
    print(f"{v:.6f}")
    return 0


def cmd_curve(args) -> int:
    points = []
    if args.bundled:
        for name in bundled_dataset_names():
            data = load_bundled(name)
            fluct = FluctuationPolicy(args.sigmas) if name.endswith("finite") else None
            rep = distill(data, fluct=fluct, K=_k(args.k))
            points.append((data.channel_label, data.attenuation_db, rep.rate_total))
    for path in args.counts or []:
        data = load_dataset(path)
        rep = distill(data, merge_bell=_merge(args), fluct=_policy(args), K=_k(args.k), protocol=_protocol(args))
        points.append((data.channel_label, data.attenuation_db, rep.rate_total))
    if not points:
        raise _UsageError("curve needs --bundled or --counts")
    text = emit_rate_curve(points, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


class _UsageError(Exception):
    pass


def _distill_options(p, finite=True):
    p.add_argument("--k", type=int, default=None, help="photon-number truncation order (default 7)")
    if finite:
        p.add_argument("--finite-size", action="store_true", help="loosen constraints for statistical fluctuations")
        p.add_argument("--sigmas", type=float, default=7.0, help="standard deviations for --finite-size (default 7)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--merge-bell", dest="bell_mode", action="store_const", const="merge",
                   help="pool singlet and triplet counts (default with --finite-size)")
    g.add_argument("--split-bell", dest="bell_mode", action="store_const", const="split",
                   help="treat each Bell state separately (default without --finite-size)")
    p.add_argument("--p-z", type=float, default=None, help="Z-basis (signal) selection probability, default 45/48")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdiqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distill", help="key rate from a counts CSV")
    p.add_argument("--counts", required=True)
    _distill_options(p)
    p.add_argument("--json", help="write the full report as JSON")
    p.add_argument("--config", help="run configuration supplying distillation and protocol defaults")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("bounds", help="decoy-state bounds on the single-photon yield and error")
    p.add_argument("--counts", required=True)
    _distill_options(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="simulate a counting campaign into a counts CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--expected", action="store_true", help="expected tallies instead of Monte Carlo")
    p.add_argument("--shares", help="also write singlet/triplet shares as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("visibility", help="two-photon interference visibility")
    p.add_argument("--jitter-ps", type=float)
    p.add_argument("--bandwidth-ghz", type=float)
    p.add_argument("--fwhm-ps", type=float, default=35.0)
    p.add_argument("--tbp", type=float, default=DEFAULT_TBP, help="time-bandwidth product of the transform limit")
    p.add_argument("--grid", nargs=2, type=_linspace, metavar=("JITTER", "BANDWIDTH"),
                   help="evaluate on a grid, each axis given as START:STOP:COUNT")
    p.add_argument("--out", help="CSV file for --grid (default stdout)")
    p.set_defaults(func=cmd_visibility)

    p = sub.add_parser("curve", help="rate-versus-attenuation CSV")
    p.add_argument("--bundled", action="store_true", help="include every bundled dataset")
    p.add_argument("--counts", nargs="*")
    _distill_options(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)
    return parser


def run_cli(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MDIQKD_LOG_LEVEL", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mdiqkd: error: {exc}", file=sys.stderr)
        return 2
    except SubTransformLimitError as exc:
        print(f"mdiqkd: error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"mdiqkd: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())
