"""Batch execution, re-analysis, probes and plot tables for an experiment directory.

Layout of an experiment directory::

    config.ini                 resolved configuration
    Y012/run_0000.csv          one trace per run and Y value
    Y012/aggregate_median.csv  evals, statistic of log-distance
    Y012/aggregate_mean.csv
    Y012/rates.csv             per-run rate fits
    Y012/summary.json          finals, status counts, curve rates
    plot_median.csv            written by ``emit_plot_data``
    plot_mean.csv
    probe.json                 written by ``run_probe``
    manifest.json              sha256 of every file above, written last
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..analysis import LINEAR, LOG, aggregate_runs, estimate_rate, rate_envelope
from ..exceptions import TooFewPointsError, TraceFormatError
from ..probe import REPLAY, ProbeConfig, probe_schedule
from ..rng import SeedSpec
from ..strategy import run_es
from .config import REFERENCE_Y_SWEEP, ExperimentConfig, load_config
from .io import (read_trace_csv, write_json, write_manifest, write_table, write_trace_csv,
                 fmt)

__all__ = [
    "run_experiment",
    "analyze_experiment",
    "emit_plot_data",
    "run_probe",
    "load_traces",
    "y_dir_name",
]

log = logging.getLogger(__name__)

CONFIG_FILE = "config.ini"


def y_dir_name(Y: int) -> str:
    return f"Y{int(Y):03d}"


def run_seed(cfg: ExperimentConfig, run_index: int) -> SeedSpec:
    # Keyed by run index only: a Y sweep reuses each run's mutation streams.
    return SeedSpec(cfg.seed, (run_index,))


def _run_one(args):
    problem, strategy, seed, path = args
    trace = run_es(problem, strategy, seed)
    write_trace_csv(trace, path)
    return trace.status


def _notes(cfg: ExperimentConfig) -> list[str]:
    notes = [
        "aggregate ordinate: statistic of log-distance across runs",
        "early-stopped runs are carried forward at their terminal log-distance",
        "run seeds are keyed by run index only, so all Y values share mutation streams",
    ]
    if cfg.Y_sweep and tuple(cfg.Y_sweep) == REFERENCE_Y_SWEEP:
        notes.append("Y sweep {1,2,4,8,12,16,20,24} is an artifact choice bracketing Y=12 and Y=20")
    if cfg.strategy.sigma0 is None:
        notes.append("sigma0 defaulted to ||x0 - x*|| / d")
    return notes


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int | None = None) -> Path:
    """Execute every (Y, run) pair, write traces, then analyse.

    Raises ``OSError`` if ``out_dir`` cannot be written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(cfg.to_ini())
    tasks = []
    for Y in cfg.Y_values:
        ydir = out / y_dir_name(Y)
        ydir.mkdir(exist_ok=True)
        strategy = cfg.strategy_for(Y)
        for i in range(cfg.runs):
            tasks.append((cfg.problem, strategy, run_seed(cfg, i), str(ydir / f"run_{i:04d}.csv")))
    jobs = jobs or cfg.jobs or os.cpu_count() or 1
    log.info("running %d traces with %d worker(s)", len(tasks), jobs)
    if jobs == 1:
        for t in tasks:
            _run_one(t)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_run_one, tasks))
    analyze_experiment(out, cfg)
    return out


def load_traces(exp_dir, cfg: ExperimentConfig | None = None) -> dict:
    """``{Y: [RunTrace, ...]}`` for every Y directory, runs in index order."""
    exp_dir = Path(exp_dir)
    if cfg is None:
        cfg = load_config(exp_dir / CONFIG_FILE)
    out = {}
    for Y in cfg.Y_values:
        ydir = exp_dir / y_dir_name(Y)
        strategy = cfg.strategy_for(Y)
        traces = []
        for i in range(cfg.runs):
            path = ydir / f"run_{i:04d}.csv"
            trace = read_trace_csv(path, cfg.problem, strategy, run_seed(cfg, i))
            if trace.evals_per_iteration != strategy.evals_per_iteration:
                raise TraceFormatError(path, f"evaluation step {trace.evals_per_iteration} "
                                             f"does not match lambda*Y = {strategy.evals_per_iteration}")
            traces.append(trace)
        out[Y] = traces
    return out


def _safe_rate(source, scale):
    try:
        return estimate_rate(source, scale)
    except TooFewPointsError:
        return None


def _rate_dict(est):
    if est is None:
        return None
    return {
        "scale": est.scale,
        "slope_per_evaluation": est.slope,
        "intercept": est.intercept,
        "slope_per_iteration": est.slope_per_iteration,
        "r_squared": est.r_squared,
        "window": list(est.window),
        "truncated": est.truncated,
    }


def summarize(traces):
    median = aggregate_runs(traces, "median")
    mean = aggregate_runs(traces, "mean")
    per_run = [_safe_rate(t, LINEAR) for t in traces]
    slopes = [r.slope for r in per_run if r is not None]
    summary = {
        "runs": len(traces),
        "status_counts": median.status_counts,
        "final_median_log_dist": median.final,
        "final_mean_log_dist": mean.final,
        "median_curve_rate": _rate_dict(_safe_rate(median, LINEAR)),
        "median_curve_loglog_rate": _rate_dict(_safe_rate(median, LOG)),
        "mean_curve_rate": _rate_dict(_safe_rate(mean, LINEAR)),
        "median_run_slope_per_evaluation": float(np.median(slopes)) if slopes else None,
    }
    if len(traces) >= 2 and all(r is not None for r in per_run):
        env = rate_envelope(traces, delta=0.1)
        summary["rate_envelope"] = {
            "delta": env.delta, "alpha_low": env.alpha_low,
            "alpha_median": env.alpha_median, "alpha_high": env.alpha_high,
        }
    return summary, median, mean, per_run


def analyze_experiment(exp_dir, cfg: ExperimentConfig | None = None) -> dict:
    """Recompute aggregates and rate fits from the trace files."""
    exp_dir = Path(exp_dir)
    if cfg is None:
        cfg = load_config(exp_dir / CONFIG_FILE)
    all_traces = load_traces(exp_dir, cfg)
    result = {}
    for Y, traces in all_traces.items():
        ydir = exp_dir / y_dir_name(Y)
        summary, median, mean, per_run = summarize(traces)
        summary["Y"] = Y
        for curve in (median, mean):
            write_table(ydir / f"aggregate_{curve.statistic}.csv", ("evals", "log_dist"),
                        (curve.abscissa, curve.ordinate))
        write_table(
            ydir / "rates.csv",
            ("run", "status", "slope_per_evaluation", "slope_per_iteration", "r_squared"),
            (list(range(len(traces))), [t.status for t in traces],
             [r.slope if r else math.nan for r in per_run],
             [r.slope_per_iteration if r else math.nan for r in per_run],
             [r.r_squared if r else math.nan for r in per_run]),
        )
        write_json(ydir / "summary.json", summary)
        result[Y] = summary
    write_manifest(exp_dir, cfg.to_sections(), _notes(cfg))
    return result


def emit_plot_data(exp_dir, svg: bool = False) -> list[Path]:
    """Write one table per statistic: ``evals`` then one column per Y value.

    Y values sample different evaluation counts; cells where a Y value has
    no point are left empty.
    """
    exp_dir = Path(exp_dir)
    cfg = load_config(exp_dir / CONFIG_FILE)
    all_traces = load_traces(exp_dir, cfg)
    written = []
    curves = {}
    for statistic in ("median", "mean"):
        per_y = {Y: aggregate_runs(tr, statistic) for Y, tr in all_traces.items()}
        curves[statistic] = per_y
        grid = np.unique(np.concatenate([c.abscissa for c in per_y.values()]))
        columns = [grid.tolist()]
        for c in per_y.values():
            col = np.full(len(grid), math.nan)
            col[np.searchsorted(grid, c.abscissa)] = c.ordinate
            columns.append(col.tolist())
        path = exp_dir / f"plot_{statistic}.csv"
        write_table(path, ["evals"] + [f"Y{Y}" for Y in per_y], columns)
        written.append(path)
    if svg:
        written.append(_render_svg(curves, exp_dir / "plot.svg"))
    write_manifest(exp_dir, cfg.to_sections(), _notes(cfg))
    return written


def _render_svg(curves, path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for ax, (statistic, per_y) in zip(axes, curves.items()):
        for Y, c in per_y.items():
            ax.plot(c.abscissa, c.ordinate, label=f"Y={Y}", lw=1)
        ax.set_title(f"{statistic} over runs")
        ax.set_xlabel("evaluations")
    axes[0].set_ylabel("log ||x - x*||")
    axes[-1].legend(fontsize="small")
    fig.tight_layout()
    # Fixed metadata keeps the file reproducible.
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def run_probe(cfg: ExperimentConfig, out_dir) -> Path:
    """Run the configured probe schedule and write ``probe.json`` and ``probe.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pcfg = cfg.probe or ProbeConfig()
    trace = None
    if pcfg.state_source == REPLAY:
        trace = read_trace_csv(cfg.probe_trace, cfg.problem, cfg.strategy, SeedSpec(cfg.seed))
    report = probe_schedule(pcfg, cfg.problem, cfg.strategy, SeedSpec(cfg.seed, (2**32,)), trace)
    write_json(out / "probe.json", report.to_dict())
    rows = report.entries
    write_table(
        out / "probe.csv",
        ("n", "dist", "sigma", "delta", "m", "proximity", "proximity_hw", "noise_excess",
         "noise_excess_hw", "misranking", "misranking_hw"),
        ([e.n for e in rows], [e.dist for e in rows], [e.sigma for e in rows],
         [e.delta for e in rows], [e.m for e in rows],
         [e.proximity.estimate for e in rows], [e.proximity.half_width for e in rows],
         [e.noise_excess.estimate for e in rows], [e.noise_excess.half_width for e in rows],
         [e.misranking.estimate for e in rows], [e.misranking.half_width for e in rows]),
    )
    log.info("probe partial sum of misranking estimates: %s", fmt(report.partial_sum))
    write_manifest(out, cfg.to_sections(), ["probe states place the optimum at the origin"])
    return out / "probe.json"
