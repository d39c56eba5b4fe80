"""Command-line front end.

Usage::

    nestcov <command> --config <path> --out <dir> [--seed <int>] [--format csv|csv+svg]

Commands: simulate-diag, simulate-gmrf, compare-shrinkage, fisher-trace,
estimate.  Each writes ``<command>.csv`` into the output directory; with
``--format csv+svg`` the table commands also write ``<command>.svg`` (a
deterministic standalone plot) and ``<command>.png`` (a matplotlib figure).

On failure a single line ``error: <Category>: <message>`` goes to stderr
and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report
from .config import parse_config
from .errors import NestcovError, ValidationError
from .estimators import (
    diagonal_mle,
    fit_decay2,
    fit_decay3,
    fit_gmrf,
    sample_covariance,
    sufficient_stats,
)
from .models import NeighborLevel, decay_diagonal, gmrf_structure, precision_assemble
from .regularizers import cond_reg_cv, ledoit_wolf
from .simulation import (
    ExperimentConfig,
    ExperimentKind,
    diag_truth,
    frobenius_error,
    gaussian_sample,
    replication_seed,
    run_diag_experiment,
    run_gmrf_experiment,
    run_shrinkage_comparison,
)

COMMANDS = ("simulate-diag", "simulate-gmrf", "compare-shrinkage", "fisher-trace", "estimate")

_COMMAND_KINDS = {
    "simulate-diag": (ExperimentKind.DIAG_DECAY,),
    "simulate-gmrf": (ExperimentKind.GMRF,),
    "compare-shrinkage": (ExperimentKind.SHRINK_COMPARE,),
    "fisher-trace": (ExperimentKind.DIAG_DECAY, ExperimentKind.SHRINK_COMPARE),
    "estimate": tuple(ExperimentKind),
}

ESTIMATE_CSV_HEADER = ("estimator", "N", "quantity", "value")

_GMRF_LEVELS = {
    "gmrf4": NeighborLevel.N4,
    "gmrf8": NeighborLevel.N8,
    "gmrf12": NeighborLevel.N12,
}


def _fit_rows(tag: str, N: int, rep, param_names) -> list[tuple]:
    rows = [(tag, N, f"param.{name}", float(v)) for name, v in zip(param_names, rep.params)]
    rows.append((tag, N, "iterations", rep.iterations))
    rows.append((tag, N, "residual_norm", rep.residual_norm))
    rows.append((tag, N, "converged", int(rep.converged)))
    return rows


def estimate_rows(config: ExperimentConfig) -> list[tuple]:
    """Fit every configured estimator on one seeded sample.

    Uses the largest configured sample size with replication index 0, so
    the draw matches the corresponding simulation replication.
    """
    N = config.sample_sizes[-1]
    stream = replication_seed(config.seed, N, 0)
    rows: list[tuple] = []
    if config.kind is ExperimentKind.GMRF:
        m, k = config.grid
        structures = {t: gmrf_structure(m, k, lvl) for t, lvl in _GMRF_LEVELS.items()}
        P_true = precision_assemble(structures["gmrf4"], np.array(config.truth_params))
        cov_values = np.linalg.inv(P_true.values)
        from .models import SpdMatrix

        cov = SpdMatrix.certified(0.5 * (cov_values + cov_values.T))
        s = gaussian_sample(cov, N, stream)
        sigma = sample_covariance(s)
        for tag in config.estimator_set:
            if tag == "sample":
                rows.append((tag, N, "sq_frobenius_error", frobenius_error(sigma, cov.values)))
                continue
            struct = structures[tag]
            rep = fit_gmrf(sigma, struct)
            rows += _fit_rows(tag, N, rep, [f"theta{j + 1}" for j in range(struct.n_params)])
            est = np.linalg.inv(precision_assemble(struct, rep.params).values)
            rows.append((tag, N, "sq_frobenius_error", frobenius_error(est, cov.values)))
        return sorted(rows)

    model2, model3, truth = diag_truth(config)
    cov = truth.as_spd()
    D = np.diag(truth.d)
    s = gaussian_sample(cov, N, stream)
    sigma = sample_covariance(s)
    stats = sufficient_stats(s)
    for tag in config.estimator_set:
        if tag == "sample":
            rows.append((tag, N, "sq_frobenius_error", frobenius_error(sigma, D)))
        elif tag == "diag":
            rows.append((tag, N, "sq_frobenius_error", float(np.sum((np.diag(sigma) - truth.d) ** 2))))
        elif tag == "diag_mle":
            d_hat = diagonal_mle(stats).d
            rows.append((tag, N, "sq_frobenius_error", float(np.sum((d_hat - truth.d) ** 2))))
        elif tag == "decay2":
            rep = fit_decay2(stats, model2)
            rows += _fit_rows(tag, N, rep, ["c", "alpha"])
            d_hat = decay_diagonal(model2.with_params(rep.params)).d
            rows.append((tag, N, "sq_frobenius_error", float(np.sum((d_hat - truth.d) ** 2))))
        elif tag == "decay3":
            rep = fit_decay3(stats, model3)
            rows += _fit_rows(tag, N, rep, ["c1", "c2", "alpha"])
            d_hat = decay_diagonal(model3.with_params(rep.params)).d
            rows.append((tag, N, "sq_frobenius_error", float(np.sum((d_hat - truth.d) ** 2))))
        elif tag == "ledoit_wolf":
            res = ledoit_wolf(s)
            rows.append((tag, N, "gamma", res.gamma))
            rows.append((tag, N, "target_scale", res.target_scale))
            rows.append((tag, N, "sq_frobenius_error", frobenius_error(res.estimate.values, D)))
        elif tag == "cond_reg":
            res = cond_reg_cv(s)
            rows.append((tag, N, "kappa", res.kappa))
            rows.append((tag, N, "tau", res.tau))
            rows.append((tag, N, "sq_frobenius_error", frobenius_error(res.estimate.values, D)))
    return sorted(rows)


def _emit_estimate_csv(rows, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ESTIMATE_CSV_HEADER)
        for rec in rows:
            w.writerow(rec)


def _dispatch(args) -> int:
    config = parse_config(args.config)
    if config.kind not in _COMMAND_KINDS[args.command]:
        wanted = " or ".join(k.value for k in _COMMAND_KINDS[args.command])
        raise ValidationError(f"command {args.command} needs config kind {wanted}, got {config.kind.value}")
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{args.command}.csv"
    want_plots = args.format == "csv+svg"
    written = [csv_path]

    if args.command == "fisher-trace":
        rows = report.fisher_trace_report(config)
        report.emit_trace_csv(rows, csv_path)
        if want_plots:
            report.emit_trace_svg(rows, out / f"{args.command}.svg")
            report.render_trace_png(rows, out / f"{args.command}.png")
            written += [out / f"{args.command}.svg", out / f"{args.command}.png"]
    elif args.command == "estimate":
        rows = estimate_rows(config)
        _emit_estimate_csv(rows, csv_path)
    else:
        runner = {
            "simulate-diag": run_diag_experiment,
            "simulate-gmrf": run_gmrf_experiment,
            "compare-shrinkage": run_shrinkage_comparison,
        }[args.command]
        table = runner(config)
        report.emit_csv(table, csv_path)
        failures = sum(r.failures for r in table.rows)
        if failures:
            print(f"warning: {failures} replication fit(s) failed and were excluded", file=sys.stderr)
        if want_plots:
            report.emit_svg_plot(table, out / f"{args.command}.svg")
            report.render_png(table, out / f"{args.command}.png")
            written += [out / f"{args.command}.svg", out / f"{args.command}.png"]

    for p in written:
        print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nestcov",
        description="Covariance estimation benchmarks for nested maximum-likelihood models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", required=True, help="path to the JSON experiment configuration")
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--format", choices=["csv", "csv+svg"], default="csv")
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except NestcovError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    except OSError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: IoError: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
