"""Command line entry point: ``ksstokes run|sweep|lemma-check|diag``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config, load_sweep
from .diagnostics import compute_tau, read_csv_series, sliding_I
from .errors import ConfigError, KSSError
from .runner import EXIT_CODES, run_lemma_campaign, run_simulation, run_sweep

EXIT_CONFIG = 64


def _parser():
    ap = argparse.ArgumentParser(prog="ksstokes", description=__doc__)
    ap.add_argument("--quiet", action="store_true", help="only print the final summary line")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run one simulation from a config file")
    run.add_argument("config")
    run.add_argument("--output-dir")
    run.add_argument("--snapshot-at", help="comma separated snapshot times")
    run.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    sw = sub.add_parser("sweep", help="alpha sweep from a sweep spec file")
    sw.add_argument("spec")
    sw.add_argument("--output-dir")
    sw.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    lc = sub.add_parser("lemma-check", help="randomised check of the ODE comparison bound")
    lc.add_argument("--cases", type=int, default=100)
    lc.add_argument("--seed", type=int, default=0)
    lc.add_argument("--output-dir")
    lc.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    dg = sub.add_parser("diag", help="sliding-window functional from a diagnostics CSV")
    dg.add_argument("csv")
    dg.add_argument("--tau", default="auto", help="window length or 'auto' (min(1, T/4))")
    dg.add_argument("--p", type=float, default=2.0)
    dg.add_argument("--T", type=float, default=None, help="end time (default: last sample)")
    dg.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.cmd == "run":
            overrides = {}
            if args.output_dir:
                overrides["output.dir"] = args.output_dir
            if args.snapshot_at:
                overrides["output.snapshot_times"] = args.snapshot_at
            cfg = load_config(args.config, overrides)
            summary = run_simulation(cfg, quiet=args.quiet)
            print(f"{summary['status']} t={summary['t_final']:.6g} steps={summary['steps']} "
                  f"peak_linf_n={summary['peak_linf_n']:.6g} -> {cfg.output_dir}")
            return EXIT_CODES[summary["status"]]
        if args.cmd == "sweep":
            spec = load_sweep(args.spec, args.output_dir)
            rows = run_sweep(spec)
            for r in rows:
                print(f"alpha={r['alpha']:g} seed={r['seed']} {r['status']} {r['verdict']} "
                      f"peak={r['peak_linf_n']}")
            return 0
        if args.cmd == "lemma-check":
            summary = run_lemma_campaign(args.cases, args.seed, args.output_dir)
            summary.pop("entries")
            print(json.dumps(summary))
            return 0 if summary["violations"] == 0 else 1
        if args.cmd == "diag":
            col = f"grad_np2_sq_{args.p:g}"
            series = read_csv_series(args.csv, col)
            T = args.T if args.T is not None else series[-1][0]
            tau = compute_tau(T) if args.tau == "auto" else float(args.tau)
            value = sliding_I(series, tau, T)
            print(json.dumps({"column": col, "tau": tau, "T": T, "I": value}))
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KSSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
