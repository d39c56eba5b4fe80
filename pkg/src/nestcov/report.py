"""Result serialization: CSV tables, standalone SVG plots, matplotlib figures.

The SVG path is hand-rendered so that output bytes are a pure function of
the table contents; the PNG path uses matplotlib for a richer figure with
error bars and is written alongside the SVG by the CLI.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import EmptyTable, ValidationError
from .fisher import asymptotic_mse, decay3_asymptotic_cov, decay_jacobian, fisher_diag, projected_cov
from .models import DecayModel, decay_diagonal, laplace_eigenvalues
from .simulation import ExperimentConfig, ExperimentKind, ExperimentRow, ExperimentTable

__all__ = [
    "emit_csv",
    "read_csv_table",
    "emit_svg_plot",
    "render_png",
    "fisher_trace_report",
    "TRACE_CSV_HEADER",
    "emit_trace_csv",
    "emit_trace_svg",
    "render_trace_png",
]

CSV_HEADER = ("estimator", "N", "mean_sq_frobenius", "std_error", "replications")
TRACE_CSV_HEADER = ("model", "N", "asymptotic_mse")

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def emit_csv(table: ExperimentTable, path) -> None:
    """Write the table as CSV, rows sorted by (estimator, N), LF newlines.

    Floats are written in their shortest round-trip representation.
    """
    rows = sorted(table.rows, key=lambda r: (r.estimator, r.N))
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.estimator, r.N, r.mean_sq_frobenius, r.std_error, r.replications])


def read_csv_table(path) -> ExperimentTable:
    """Parse a CSV written by emit_csv back into a table (failures lost)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValidationError(f"unexpected CSV header {header!r}")
        rows = tuple(
            ExperimentRow(
                estimator=rec[0],
                N=int(rec[1]),
                mean_sq_frobenius=float(rec[2]),
                std_error=float(rec[3]),
                replications=int(rec[4]),
            )
            for rec in reader
        )
    return ExperimentTable(rows=rows)


# --------------------------------------------------------------------------
# SVG rendering
# --------------------------------------------------------------------------

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 150, 20, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _svg_document(series: dict[str, list[tuple[float, float]]], y_label: str) -> str:
    """Line chart with a log-scale y axis, one polyline per labeled series."""
    labels = sorted(series)
    pts_all = [(x, y) for lab in labels for x, y in series[lab] if math.isfinite(y)]
    if not pts_all:
        raise EmptyTable("no finite data points to plot")
    pos = [y for _, y in pts_all if y > 0]
    floor = (min(pos) / 10.0) if pos else 1.0
    xs = [x for x, _ in pts_all]
    x_lo, x_hi = min(xs), max(xs)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    logy = [math.log10(max(y, floor)) for _, y in pts_all]
    y_lo, y_hi = math.floor(min(logy)), math.ceil(max(logy))
    if y_lo == y_hi:
        y_hi = y_lo + 1

    pw = _W - _ML - _MR
    ph = _H - _MT - _MB

    def sx(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y: float) -> float:
        return _MT + (y_hi - math.log10(max(y, floor))) / (y_hi - y_lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_MT + ph}" x2="{_ML + pw}" y2="{_MT + ph}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + ph}" stroke="black"/>',
    ]
    for dec in range(y_lo, y_hi + 1):
        y = _MT + (y_hi - dec) / (y_hi - y_lo) * ph
        out.append(
            f'<line x1="{_ML - 4}" y1="{_fmt(y)}" x2="{_ML}" y2="{_fmt(y)}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_ML - 8}" y="{_fmt(y + 4)}" font-size="11" text-anchor="end" '
            f'font-family="sans-serif">1e{dec}</text>'
        )
    for x in sorted({x for x, _ in pts_all}):
        px = sx(x)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{_MT + ph}" x2="{_fmt(px)}" y2="{_MT + ph + 4}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{_MT + ph + 18}" font-size="11" text-anchor="middle" '
            f'font-family="sans-serif">{x:g}</text>'
        )
    out.append(
        f'<text x="{_ML + pw / 2:.0f}" y="{_H - 12}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif">N</text>'
    )
    out.append(
        f'<text x="16" y="{_MT + ph / 2:.0f}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 16 {_MT + ph / 2:.0f})">{y_label}</text>'
    )
    for i, lab in enumerate(labels):
        color = _PALETTE[i % len(_PALETTE)]
        pts = [(x, y) for x, y in sorted(series[lab]) if math.isfinite(y)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = _MT + 14 + 18 * i
        out.append(f'<rect x="{_ML + pw + 12}" y="{ly - 5}" width="14" height="4" fill="{color}"/>')
        out.append(
            f'<text x="{_ML + pw + 32}" y="{ly}" font-size="11" font-family="sans-serif">{lab}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _table_series(table: ExperimentTable) -> dict[str, list[tuple[float, float]]]:
    if not table.rows:
        raise EmptyTable("cannot plot an empty table")
    return {est: [(float(n), v) for n, v in table.series(est)] for est in table.estimators}


def emit_svg_plot(table: ExperimentTable, path) -> None:
    """Write a standalone SVG 1.1 line chart of mean error versus N.

    One polyline plus one marker circle per point for each estimator,
    log-scale y axis, legend.  Bytes are deterministic for a given table.
    """
    doc = _svg_document(_table_series(table), "mean squared Frobenius error")
    Path(path).write_bytes(doc.encode("utf-8"))


def render_png(table: ExperimentTable, path) -> None:
    """Render the same curves with matplotlib (error bars included)."""
    from matplotlib.figure import Figure

    if not table.rows:
        raise EmptyTable("cannot plot an empty table")
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(111)
    for est in table.estimators:
        rows = sorted(
            (r for r in table.rows if r.estimator == est and math.isfinite(r.mean_sq_frobenius)),
            key=lambda r: r.N,
        )
        if not rows:
            continue
        ax.errorbar(
            [r.N for r in rows],
            [r.mean_sq_frobenius for r in rows],
            yerr=[r.std_error for r in rows],
            marker="o",
            markersize=3,
            capsize=2,
            label=est,
        )
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("mean squared Frobenius error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)


# --------------------------------------------------------------------------
# Fisher trace report
# --------------------------------------------------------------------------


def fisher_trace_report(config: ExperimentConfig) -> list[tuple[str, int, float]]:
    """Asymptotic mean squared error Tr(Q)/N for the three diagonal models.

    Rows (model, N, value) for model in {decay2, decay3, diag} over the
    configured sample sizes, evaluated at the configured decay truth.
    """
    if config.kind is ExperimentKind.GMRF:
        raise ValidationError("fisher trace report needs a decay-model truth")
    lam = laplace_eigenvalues(*config.grid)
    c, alpha = config.truth_params
    model2 = DecayModel.two_param(lam, c, alpha)
    model3 = DecayModel.three_param(lam, c, 0.0, alpha)
    J = fisher_diag(decay_diagonal(model2))
    cov = {
        "diag": projected_cov(J, np.eye(lam.size)),
        "decay3": decay3_asymptotic_cov(J, model3),
        "decay2": projected_cov(J, decay_jacobian(model2)),
    }
    rows = [
        (model, N, asymptotic_mse(Q, N))
        for model, Q in cov.items()
        for N in config.sample_sizes
    ]
    return sorted(rows)


def emit_trace_csv(rows: list[tuple[str, int, float]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRACE_CSV_HEADER)
        for model, N, value in sorted(rows):
            w.writerow([model, N, value])


def _trace_series(rows) -> dict[str, list[tuple[float, float]]]:
    series: dict[str, list[tuple[float, float]]] = {}
    for model, N, value in sorted(rows):
        series.setdefault(model, []).append((float(N), value))
    return series


def emit_trace_svg(rows, path) -> None:
    doc = _svg_document(_trace_series(rows), "Tr(Q)/N")
    Path(path).write_bytes(doc.encode("utf-8"))


def render_trace_png(rows, path) -> None:
    from matplotlib.figure import Figure

    series = _trace_series(rows)
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(111)
    for model in sorted(series):
        pts = series[model]
        ax.plot([x for x, _ in pts], [y for _, y in pts], marker="o", markersize=3, label=model)
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("Tr(Q)/N")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
