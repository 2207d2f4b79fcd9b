"""Command-line interface.

Exit codes: 0 success, 1 invalid configuration, 2 output not writable,
3 missing or corrupt trace files, 4 manifest verification failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..analysis import corollary_rate, theorem_threshold
from ..exceptions import ConfigError, InvalidParameterError, TraceFormatError
from .config import load_config, parse_overrides
from .experiment import (analyze_experiment, emit_plot_data, run_experiment, run_probe,
                         y_dir_name)
from .io import verify_manifest

EXIT_CONFIG = 1
EXIT_OUTPUT = 2
EXIT_TRACES = 3
EXIT_MANIFEST = 4

ENV_OUT = "RESAMPLE_ES_OUT"
DEFAULT_OUT = "resample_es_out"

log = logging.getLogger("resample_es")


def _config_args(p):
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--seed", type=str, help="master seed (decimal 64-bit unsigned)")
    p.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    p.add_argument("--out", help=f"output directory (default: ${ENV_OUT} or ./{DEFAULT_OUT})")
    p.add_argument("--Y", help="comma-separated list of resampling counts to sweep")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration value; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resample-es",
        description="Evolution strategies with a constant number of resamplings on noisy spheres.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment")
    _config_args(p)

    p = sub.add_parser("analyze", help="recompute rates and aggregates from traces")
    p.add_argument("dir", nargs="?", help="experiment directory (default: --out)")
    p.add_argument("--out")

    p = sub.add_parser("probe", help="estimate misranking probabilities")
    _config_args(p)

    p = sub.add_parser("plot", help="emit plot tables for an experiment")
    p.add_argument("dir", nargs="?", help="experiment directory (default: --out)")
    p.add_argument("--out")
    p.add_argument("--svg", action="store_true", help="also render plot.svg")

    p = sub.add_parser("threshold", help="print the noise-exponent threshold and rate bound")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--d", type=int, default=15)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--alpha-prime", type=float, help="defaults to --alpha")
    p.add_argument("--lambda", dest="lam", type=int, default=4)
    p.add_argument("--Y", type=int, default=12)

    p = sub.add_parser("verify", help="check files against the manifest")
    p.add_argument("dir", nargs="?")
    p.add_argument("--out")
    return parser


def _output_dir(args, cfg=None) -> Path:
    if getattr(args, "dir", None):
        return Path(args.dir)
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(ENV_OUT, DEFAULT_OUT))


def _resolve_config(args):
    overrides = parse_overrides(args.set)
    if args.seed is not None:
        overrides.setdefault("experiment", {})["seed"] = args.seed
    if args.Y is not None:
        overrides.setdefault("experiment", {})["Y_sweep"] = args.Y
    if args.jobs is not None:
        overrides.setdefault("experiment", {})["jobs"] = str(args.jobs)
    return load_config(args.config, overrides)


def _ensure_writable(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write-test"
    probe.write_text("")
    probe.unlink()


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = _output_dir(args, cfg)
    try:
        _ensure_writable(out)
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_OUTPUT
    run_experiment(cfg, out, jobs=cfg.jobs)
    summary_lines(out, cfg)
    return 0


def summary_lines(out, cfg):
    for Y in cfg.Y_values:
        s = json.loads((Path(out) / y_dir_name(Y) / "summary.json").read_text())
        print(f"Y={Y:<3d} runs={s['runs']} final median log-dist={s['final_median_log_dist']:.3f} "
              f"mean={s['final_mean_log_dist']:.3f} status={s['status_counts']}")


def _cmd_analyze(args) -> int:
    out = _output_dir(args)
    result = analyze_experiment(out)
    for Y, s in result.items():
        print(f"Y={Y:<3d} final median log-dist={s['final_median_log_dist']:.3f} "
              f"mean={s['final_mean_log_dist']:.3f}")
    return 0


def _cmd_probe(args) -> int:
    cfg = _resolve_config(args)
    out = _output_dir(args, cfg)
    try:
        _ensure_writable(out)
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_OUTPUT
    path = run_probe(cfg, out)
    report = json.loads(path.read_text())
    print(f"gamma={report['gamma']:.6g} admissible=({report['gamma_interval'][0]:.6g}, "
          f"{report['gamma_interval'][1]:.6g})")
    for e in report["entries"]:
        print(f"n={e['n']:<5d} P1={e['proximity']['estimate']:.5f} "
              f"P3={e['noise_excess']['estimate']:.5f} P4={e['misranking']['estimate']:.5f} "
              f"+-{e['misranking']['half_width']:.5f}")
    print(f"sum P4={report['partial_sum']:.6g}")
    return 0


def _cmd_plot(args) -> int:
    for path in emit_plot_data(_output_dir(args), svg=args.svg):
        print(path)
    return 0


def _cmd_threshold(args) -> int:
    alpha_prime = args.alpha if args.alpha_prime is None else args.alpha_prime
    z = theorem_threshold(args.p, args.d, args.alpha, alpha_prime)
    rate = corollary_rate(args.alpha, args.lam, args.Y)
    print(f"threshold z > {z!r}")
    print(f"corollary rate <= {rate!r}")
    return 0


def _cmd_verify(args) -> int:
    problems = verify_manifest(_output_dir(args))
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_MANIFEST if problems else 0


COMMANDS = {
    "run": _cmd_run,
    "analyze": _cmd_analyze,
    "probe": _cmd_probe,
    "plot": _cmd_plot,
    "threshold": _cmd_threshold,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParameterError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceFormatError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACES
    except PermissionError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
