"""Tidy CSV tables derived from experiment reports (figures are not drawn)."""
from __future__ import annotations

import csv
import os

import numpy as np

from .errors import UnknownKind

__all__ = ["emit_plot_data", "KINDS", "PHASE_BINS"]

KINDS = ("curves", "boxes", "phases")
PHASE_BINS = np.round(np.linspace(-0.5, 0.5, 101), 10)
CURVE_MODELS = ("lim", "cslim", "ecslim", "lcslim", "lcslim_avg", "lcslim_MA")


def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return v


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _curves(report, out_dir):
    curves = report.get("curves")
    if not curves:
        raise UnknownKind("report has no per-phase curves (only 1-D reports carry them)")
    series = curves["series"]
    grid = np.array(series["truth"]["t"], dtype=float)
    names = [m for m in CURVE_MODELS if m in series]
    header = ["t", "truth_A"] + [f"{m}_A" for m in names] + ["truth_Q"] + [f"{m}_Q" for m in names]
    cols = [grid, series["truth"]["A"]]
    qcols = [series["truth"]["Q"]]
    for label, target in (("A", cols), ("Q", qcols)):
        for m in names:
            t = np.array(series[m]["t"], dtype=float)
            y = np.array([np.nan if v is None else v for v in series[m][label]], dtype=float)
            ok = np.isfinite(y)
            # each model lives on its own time labels; put them on the fine grid
            target.append(np.interp(grid, t[ok], y[ok], period=1.0) if ok.any()
                          else np.full(grid.size, np.nan))
    rows = zip(*(list(map(float, c)) for c in cols + qcols))
    return [_write(os.path.join(out_dir, "curves.csv"), header, rows)]


def _boxes(report, out_dir):
    from .experiments import aggregate_rows, report_rows

    agg = aggregate_rows(report_rows(report["trials"]))
    if not agg:
        raise UnknownKind("report has no per-trial metrics")
    header = ["model", "n", "Tf", "statistic", "count", "q05", "q25", "q50", "q75", "q95"]
    rows = ([a[h] for h in header] for a in agg)
    return [_write(os.path.join(out_dir, "boxes.csv"), header, rows)]


def _phases(report, out_dir):
    from .experiments import report_rows

    rows = [r for r in report_rows(report["trials"]) if r[3] in ("phi_A", "phi_Q")]
    if not rows:
        raise UnknownKind("report has no sine-fit phases")
    groups: dict[tuple, list] = {}
    for model, n, Tf, stat, v in rows:
        groups.setdefault((model, stat, Tf), []).append(v)
    out = []
    for (model, stat, Tf), vals in sorted(groups.items()):
        counts, _ = np.histogram(vals, bins=PHASE_BINS)
        for lo, hi, c in zip(PHASE_BINS[:-1], PHASE_BINS[1:], counts):
            out.append([model, stat, Tf, float(lo), float(hi), int(c)])
    return [_write(os.path.join(out_dir, "phases.csv"),
                   ["model", "quantity", "Tf", "bin_lo", "bin_hi", "count"], out)]


def emit_plot_data(report: dict, kind: str, out_dir) -> list[str]:
    """Write the ``kind`` table for ``report`` into ``out_dir``.

    ``curves``: per-phase truth and model curves of the representative
    trial, all interpolated onto the l-CS-LIM grid. ``boxes``: one row per
    (model, n, Tf, statistic) with 5/25/50/75/95 % quantiles recomputed from
    the per-trial records. ``phases``: histograms of sine-fit phases in
    bins of width 0.01.
    """
    handlers = {"curves": _curves, "boxes": _boxes, "phases": _phases}
    if kind not in handlers:
        raise UnknownKind(f"kind must be one of {KINDS}, got {kind!r}")
    os.makedirs(out_dir, exist_ok=True)
    return handlers[kind](report, out_dir)
