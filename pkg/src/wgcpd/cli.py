"""Command-line interface: ``wgcpd {detect,segment,pvalue,simulate,distances}``.

Exit codes: 0 success, 1 input or configuration error, 2 degenerate
statistic, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .data import ScanWindow, read_distance_matrix, read_sequence, write_distance_matrix
from .detect import detect
from .distances import METRICS, Metric, build_distance_matrix
from .errors import DegenerateDispersion, InputError, NumericalError, WgcpdError
from .nullmodel import (
    DEFAULT_MC_REPS,
    DEFAULT_PERMUTATIONS,
    ENGINES,
    VARIANTS,
    asymptotic_null,
    pvalue_from_null,
    pvalue_S2_corrected,
    simulate_null_S2,
)
from .scan import STATISTICS, canonical_statistic, scan_sums
from .segmentation import SegmentationConfig, binary_segment
from .simulate import PRESETS, preset, report_to_csv, report_to_json, run_experiment

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULT_METRIC = {"vector": "sqeuclidean", "graph": "frobenius", "function": "l2fun"}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_input(p, metric=True):
    src = p.add_argument_group("input")
    src.add_argument("--input", help="observations file (CSV rows, or graph blocks)")
    src.add_argument("--input-format", choices=("vector", "function", "graph"), default="vector",
                     help="how to read --input (default: vector)")
    src.add_argument("--distance-matrix", help="precomputed distance matrix CSV instead of --input")
    if metric:
        src.add_argument("--metric", choices=METRICS,
                         help="distance for --input (default: sqeuclidean, frobenius or l2fun "
                              "by observation kind)")
    src.add_argument("--grid-start", type=float, default=0.0,
                     help="start of the function sampling interval (default 0)")
    src.add_argument("--grid-end", type=float, default=1.0,
                     help="end of the function sampling interval (default 1)")


def _add_scan(p):
    g = p.add_argument_group("scan")
    g.add_argument("--statistic", default="S1", type=canonical_statistic,
                   help=f"one of {', '.join(STATISTICS)} (default S1)")
    g.add_argument("--rho0", type=float, default=0.1, help="lower scan fraction (default 0.1)")
    g.add_argument("--rho1", type=float, default=0.9, help="upper scan fraction (default 0.9)")


def _add_pvalue(p, default_engine="asymptotic"):
    g = p.add_argument_group("p-value")
    g.add_argument("--pvalue", "--engine", dest="engine", choices=ENGINES, default=default_engine,
                   help=f"p-value engine (default {default_engine})")
    g.add_argument("--correction-variant", choices=VARIANTS, default="appendix",
                   help="tail formula for the corrected engine (default appendix)")
    g.add_argument("--reps", type=int,
                   help=f"Monte-Carlo draws or permutations (default {DEFAULT_MC_REPS} "
                        f"or {DEFAULT_PERMUTATIONS})")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")


def _add_output(p, formats=("json",)):
    g = p.add_argument_group("output")
    g.add_argument("--out", help="write here instead of standard output")
    g.add_argument("--format", choices=formats, default=formats[0],
                   help=f"output format (default {formats[0]})")


def build_parser():
    parser = _Parser(prog="wgcpd", description="Distance-based change-point detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="test for one change point and locate it")
    _add_input(p)
    _add_scan(p)
    _add_pvalue(p)
    _add_output(p)

    p = sub.add_parser("segment", help="find multiple change points by binary segmentation")
    _add_input(p)
    _add_scan(p)
    _add_pvalue(p)
    p.add_argument("--alpha", type=float, default=0.05, help="significance level (default 0.05)")
    p.add_argument("--nmin", type=int, default=20, help="minimum segment length (default 20)")
    _add_output(p)

    p = sub.add_parser("pvalue", help="p-value of a given statistic value")
    p.add_argument("--observed", type=float, required=True, help="observed statistic value")
    p.add_argument("--n", type=int, help="sequence length (enough for S2/S3 asymptotic)")
    _add_input(p)
    _add_scan(p)
    _add_pvalue(p)
    _add_output(p)

    p = sub.add_parser("simulate", help="run a simulation preset")
    p.add_argument("--scenario", required=True, choices=sorted(PRESETS), help="preset name")
    p.add_argument("--reps", type=int, help="replications per scenario (default: preset's)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--timing", action="store_true",
                   help="fill the seconds column (makes output run-dependent)")
    _add_output(p, ("csv", "json"))

    p = sub.add_parser("distances", help="write the pairwise distance matrix as CSV")
    _add_input(p)
    p.add_argument("--out", help="write here instead of standard output")
    return parser


def _window(args):
    return ScanWindow(args.rho0, args.rho1)


def load_distances(args, required=True):
    """``(DistanceMatrix, Metric or None)`` from ``--input`` or ``--distance-matrix``."""
    metric_flag = getattr(args, "metric", None)
    if args.distance_matrix:
        if args.input:
            raise InputError("give either --input or --distance-matrix, not both")
        if metric_flag:
            raise InputError("--metric cannot be combined with --distance-matrix")
        return read_distance_matrix(args.distance_matrix), None
    if not args.input:
        if required:
            raise InputError("one of --input or --distance-matrix is required")
        return None, None
    grid = (args.grid_start, args.grid_end) if args.input_format == "function" else None
    seq = read_sequence(args.input, args.input_format, grid)
    metric = Metric.for_sequence(metric_flag or DEFAULT_METRIC[seq.kind], seq)
    return build_distance_matrix(metric, seq), metric


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj):
    return json.dumps(obj, indent=2) + "\n"


def cmd_detect(args):
    D, metric = load_distances(args)
    res = detect(D, args.statistic, args.engine, _window(args), args.reps, args.seed,
                 args.correction_variant, args.threads, metric)
    _emit(_dump(res.to_dict()), args.out)


def cmd_segment(args):
    D, metric = load_distances(args)
    cfg = SegmentationConfig(alpha=args.alpha, n_min=args.nmin, statistic=args.statistic,
                             engine=args.engine, reps=args.reps, seed=args.seed,
                             window=_window(args), variant=args.correction_variant,
                             threads=args.threads)
    tree = binary_segment(D, cfg, metric)
    out = {"statistic": cfg.statistic, "method": cfg.engine, "alpha": cfg.alpha,
           "n_min": cfg.n_min, "seed": cfg.seed, **tree.to_dict()}
    _emit(_dump(out), args.out)


def cmd_pvalue(args):
    which = args.statistic
    window = _window(args)
    D, _ = load_distances(args, required=False)
    n = D.n if D is not None else args.n
    if n is None:
        raise InputError("give --n, or data through --input or --distance-matrix")
    if D is not None and args.n is not None and args.n != D.n:
        raise InputError(f"--n {args.n} disagrees with the data length {D.n}")
    reps = args.reps or (DEFAULT_PERMUTATIONS if args.engine == "permutation" else DEFAULT_MC_REPS)
    if args.engine == "asymptotic" and which in ("S2", "S2t", "S3"):
        model = simulate_null_S2(n, window, reps, args.seed, which == "S3", args.threads)
        pv = pvalue_from_null(model, args.observed)
    elif D is None:
        raise InputError(f"{which} with the {args.engine} engine needs the data")
    elif args.engine == "corrected":
        if which not in ("S2", "S2t"):
            raise InputError(f"the corrected engine applies to S2/S2t only, not {which}")
        prof = scan_sums(D, window)
        pv = pvalue_S2_corrected(args.observed, prof.moments, n, window, args.correction_variant)
    elif args.engine == "permutation":
        raise InputError("a permutation p-value needs the observed data; use detect")
    else:
        model, _ = asymptotic_null(D, which, window, reps, args.seed, args.threads)
        pv = pvalue_from_null(model, args.observed)
    out = {"statistic": which, "observed": args.observed, "p_value": pv.value,
           "method": pv.method, "reps": pv.reps, "mc_stderr": pv.mc_stderr, "n": n,
           "seed": args.seed}
    _emit(_dump(out), args.out)


def cmd_simulate(args):
    report = run_experiment(preset(args.scenario, args.reps), args.seed, args.threads,
                            timing=args.timing)
    if args.format == "json":
        if args.out:
            report_to_json(report, args.out)
        else:
            _emit(_dump(report.to_dict()), None)
    else:
        report_to_csv(report, args.out or sys.stdout)


def cmd_distances(args):
    D, _ = load_distances(args)
    write_distance_matrix(D, args.out or sys.stdout)


COMMANDS = {"detect": cmd_detect, "segment": cmd_segment, "pvalue": cmd_pvalue,
            "simulate": cmd_simulate, "distances": cmd_distances}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args)
    except DegenerateDispersion as exc:
        print(f"wgcpd: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NumericalError as exc:
        print(f"wgcpd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (WgcpdError, OSError) as exc:
        print(f"wgcpd: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
