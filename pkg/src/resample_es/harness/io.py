"""Trace CSVs, result tables and the hashed manifest."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .. import __version__
from ..exceptions import TraceFormatError
from ..strategy import (COMPLETED, DIVERGED, DIVERGENCE_LIMIT, UNDERFLOW_LIMIT, UNDERFLOWED,
                        RunTrace)

TRACE_HEADER = ("n", "evals", "dist", "log_dist", "sigma")
MANIFEST = "manifest.json"


def fmt(x) -> str:
    """17 significant digits: round-trips any float64."""
    return format(float(x), ".17g")


def write_trace_csv(trace: RunTrace, path) -> None:
    path = Path(path)
    lines = [",".join(TRACE_HEADER)]
    for n, e, d, ld, s in zip(trace.n, trace.evals, trace.dist, trace.log_dist, trace.sigma):
        lines.append(f"{int(n)},{int(e)},{fmt(d)},{fmt(ld)},{fmt(s)}")
    path.write_text("\n".join(lines) + "\n")


def infer_status(dist: float, sigma: float) -> str:
    if dist < UNDERFLOW_LIMIT or sigma < UNDERFLOW_LIMIT:
        return UNDERFLOWED
    if dist > DIVERGENCE_LIMIT:
        return DIVERGED
    return COMPLETED


def read_trace_csv(path, problem, config, seed) -> RunTrace:
    """Load a trace; the run status is recovered from its last record."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceFormatError(path, exc.strerror or "unreadable") from exc
    rows = text.splitlines()
    if not rows or tuple(rows[0].split(",")) != TRACE_HEADER:
        raise TraceFormatError(path, "missing or wrong header")
    if len(rows) < 2:
        raise TraceFormatError(path, "no records")
    try:
        data = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    except ValueError as exc:
        raise TraceFormatError(path, f"unparseable value ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(TRACE_HEADER):
        raise TraceFormatError(path, "wrong number of columns")
    n = data[:, 0].astype(np.int64)
    if not np.array_equal(n, np.arange(1, len(n) + 1)):
        raise TraceFormatError(path, "iteration indices are not contiguous from 1")
    evals = data[:, 1].astype(np.int64)
    if np.any(evals != n * evals[0]):
        raise TraceFormatError(path, "evaluation counts do not grow by a constant step")
    return RunTrace(
        problem=problem,
        config=config,
        seed=seed,
        n=n,
        evals=evals,
        dist=data[:, 2],
        log_dist=data[:, 3],
        sigma=data[:, 4],
        status=infer_status(data[-1, 2], data[-1, 4]),
    )


def write_table(path, header, columns) -> None:
    """CSV with one column per array; ``nan`` entries become empty cells."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_cell(v) for v in row])


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isnan(v):
        return ""
    return fmt(v)


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(root, config_sections, notes=()) -> Path:
    """Hash every file under ``root`` (except the manifest) into ``manifest.json``."""
    root = Path(root)
    files = {}
    for dirpath, _, names in os.walk(root):
        for name in names:
            p = Path(dirpath) / name
            rel = p.relative_to(root).as_posix()
            if rel == MANIFEST:
                continue
            files[rel] = sha256_of(p)
    payload = {
        "software": {"package": "resample_es", "version": __version__},
        "seed": config_sections.get("experiment", {}).get("seed"),
        "config": config_sections,
        "notes": list(notes),
        "files": dict(sorted(files.items())),
    }
    path = root / MANIFEST
    write_json(path, payload)
    return path


def verify_manifest(root) -> list[str]:
    """Problems found comparing ``root`` against its manifest; empty if intact."""
    root = Path(root)
    try:
        manifest = json.loads((root / MANIFEST).read_text())
    except (OSError, ValueError) as exc:
        return [f"{MANIFEST}: {exc}"]
    problems = []
    for rel, digest in manifest.get("files", {}).items():
        p = root / rel
        if not p.is_file():
            problems.append(f"{rel}: missing")
        elif sha256_of(p) != digest:
            problems.append(f"{rel}: content hash mismatch")
    return problems
