"""Command-line front end: fit, predict, cross-validate, simulate.

Every output embeds a reproducibility manifest (tool version, resolved
configuration, seed); CSV files carry it as a single leading ``#`` comment
line above the header.  Exit codes: 0 success, 2 usage/data error, 3 solver
non-convergence (the fit is still written, flagged).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .binomial_irls import (
    BinomialSettings,
    DEFAULT_BINOMIAL_SETTINGS,
    fit_binomial,
    predict_proba,
)
from .data_model import BINOMIAL, GAUSSIAN, TuningTriple
from .errors import InvalidK, McenError
from .mcen_gaussian import DEFAULT_MCEN_SETTINGS, fit as fit_gaussian, predict
from .model_selection import CvGrid, cv_binomial, cv_gaussian
from .serialize import fit_from_json, fit_to_dict, McenFit
from .sim_harness import SimDesign, run_replications
from .model_selection import CvResult

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOCONV = 3

AUTO_GAMMA_GRID = (0.0, 0.25, 0.5, 1.0, 2.0)
AUTO_Q_GRID = (1, 2, 3, 4)


class CliError(Exception):
    """Usage or data problem; maps to exit code 2."""


def _read_csv(path: str):
    """Strict numeric CSV with a header row; missing values are an error."""
    if not os.path.exists(path):
        raise CliError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CliError(f"{path}: empty file (header row required)") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CliError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                cell = cell.strip()
                if cell == "" or cell.lower() in ("na", "nan"):
                    raise CliError(f"{path}:{lineno}: missing value in column {name!r}")
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CliError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {name!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise CliError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=np.float64)


def _split_columns(header, data, response_names):
    names = [s.strip() for s in response_names.split(",") if s.strip()]
    if not names:
        raise CliError("--responses must name at least one column")
    missing = [nm for nm in names if nm not in header]
    if missing:
        raise CliError(f"response column(s) not found: {', '.join(missing)}")
    y_idx = [header.index(nm) for nm in names]
    x_idx = [i for i in range(len(header)) if i not in y_idx]
    if not x_idx:
        raise CliError("no covariate columns remain after removing responses")
    x_names = [header[i] for i in x_idx]
    return data[:, x_idx], data[:, y_idx], x_names, names


def _manifest(args, command: str) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {
        "tool": "mcen",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": getattr(args, "seed", None),
    }


def _write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path: str, manifest: dict, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _float_cell(v: float) -> str:
    return repr(float(v))


def _parse_grid(args) -> CvGrid:
    spec = args.grid or "auto"
    if spec == "auto":
        return CvGrid(
            Q_values=AUTO_Q_GRID,
            gamma_values=AUTO_GAMMA_GRID,
            delta_values=None,
            K=args.K,
            seed=args.seed,
            n_delta=args.n_delta,
        )
    try:
        doc = json.loads(spec)
    except json.JSONDecodeError as err:
        raise CliError(f"--grid must be 'auto' or a JSON object: {err}") from None
    if not isinstance(doc, dict):
        raise CliError("--grid JSON must be an object")
    try:
        return CvGrid(
            Q_values=tuple(doc.get("Q", AUTO_Q_GRID)),
            gamma_values=tuple(doc.get("gamma", AUTO_GAMMA_GRID)),
            delta_values=tuple(doc["delta"]) if "delta" in doc else None,
            K=args.K,
            seed=args.seed,
            n_delta=args.n_delta,
        )
    except (TypeError, ValueError, InvalidK) as err:
        raise CliError(f"bad --grid: {err}") from None


def _settings_for(args):
    if args.kind == GAUSSIAN:
        return DEFAULT_MCEN_SETTINGS.with_seed(args.seed)
    return DEFAULT_BINOMIAL_SETTINGS.with_seed(args.seed)


def _fit_once(X, Y, triple, args):
    if args.kind == GAUSSIAN:
        return fit_gaussian(X, Y, triple, _settings_for(args))
    return fit_binomial(X, Y, triple, _settings_for(args))


def _fit_summary_text(fit_result, manifest, x_names, y_names) -> str:
    B = fit_result.B_hat if isinstance(fit_result, McenFit) else fit_result.Theta_hat
    slopes = B.slopes()
    lines = [
        "# manifest: " + json.dumps(manifest, sort_keys=True),
        f"kind: {manifest['config'].get('kind')}",
        f"converged: {fit_result.converged}",
        f"outer iterations: {fit_result.outer_iters}",
        "cluster assignments (response: cluster):",
    ]
    for name, lab in zip(y_names, fit_result.D_hat.assignments):
        lines.append(f"  {name}: {int(lab)}")
    lines.append("nonzero coefficients per response:")
    for c, name in enumerate(y_names):
        lines.append(f"  {name}: {int((slopes[:, c] != 0).sum())} of {slopes.shape[0]}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    header, data = _read_csv(args.data)
    X, Y, x_names, y_names = _split_columns(header, data, args.responses)
    if args.Q is None or args.gamma is None or args.delta is None:
        raise CliError("fit requires --Q, --gamma and --delta")
    triple = TuningTriple(Q=args.Q, gamma=args.gamma, delta=args.delta)
    fit_result = _fit_once(X, Y, triple, args)
    os.makedirs(args.out, exist_ok=True)
    manifest = _manifest(args, "fit")
    doc = fit_to_dict(fit_result)
    doc["manifest"] = manifest
    doc["x_names"] = x_names
    doc["y_names"] = y_names
    _write_json(os.path.join(args.out, "fit.json"), doc)
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(_fit_summary_text(fit_result, manifest, x_names, y_names))
    if not fit_result.converged:
        print("warning: solver did not converge; fit written and flagged", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


def cmd_cv(args) -> int:
    header, data = _read_csv(args.data)
    X, Y, x_names, y_names = _split_columns(header, data, args.responses)
    if args.K > X.shape[0]:
        raise CliError(f"--K {args.K} exceeds sample count {X.shape[0]}")
    grid = _parse_grid(args)
    settings = _settings_for(args)
    if args.kind == GAUSSIAN:
        result = cv_gaussian(X, Y, grid, settings, threads=args.threads)
    else:
        result = cv_binomial(X, Y, grid, settings, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    manifest = _manifest(args, "cv")
    rows = [
        (cell.Q, _float_cell(cell.gamma), _float_cell(cell.delta), cell.fold,
         _float_cell(cell.criterion))
        for cell in result.table
    ]
    _write_csv(
        os.path.join(args.out, "cv_table.csv"), manifest,
        ["Q", "gamma", "delta", "fold", "criterion"], rows,
    )
    best = result.best
    _write_json(
        os.path.join(args.out, "best.json"),
        {
            "manifest": manifest,
            "best": {"Q": best.Q, "gamma": best.gamma, "delta": best.delta},
            "criterion_kind": result.criterion_kind,
            "cell_errors": [list(e) for e in result.errors],
        },
    )
    fit_result = _fit_once(X, Y, best, args)
    doc = fit_to_dict(fit_result)
    doc["manifest"] = manifest
    doc["x_names"] = x_names
    doc["y_names"] = y_names
    _write_json(os.path.join(args.out, "fit.json"), doc)
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(_fit_summary_text(fit_result, manifest, x_names, y_names))
    return EXIT_OK if fit_result.converged else EXIT_NOCONV


def cmd_predict(args) -> int:
    if not os.path.exists(args.fit):
        raise CliError(f"no such fit file: {args.fit}")
    with open(args.fit) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise CliError(f"{args.fit}: not valid JSON: {err}") from None
    try:
        fit_result = fit_from_json(json.dumps(doc))
    except (KeyError, ValueError, TypeError) as err:
        raise CliError(f"{args.fit}: not a fit document: {err}") from None
    header, data = _read_csv(args.data)
    expected_x = doc.get("x_names")
    if expected_x is not None and set(expected_x).issubset(header):
        X_new = data[:, [header.index(nm) for nm in expected_x]]
    else:
        X_new = data
    p = fit_result.standardizer.p
    if X_new.shape[1] != p:
        raise CliError(
            f"fit expects {p} covariate columns, data provides {X_new.shape[1]}"
        )
    if isinstance(fit_result, McenFit):
        out = predict(fit_result, X_new)
    else:
        out = predict_proba(fit_result, X_new)
    os.makedirs(args.out, exist_ok=True)
    names = doc.get("y_names") or [f"response_{k+1}" for k in range(out.shape[1])]
    rows = [[_float_cell(v) for v in row] for row in out]
    _write_csv(
        os.path.join(args.out, "predictions.csv"),
        _manifest(args, "predict"), names, rows,
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    kind = args.kind
    if args.paper_mode:
        replications = 50
        p = args.p if args.p is not None else 300
        n_test = 1000
        grid = CvGrid(
            Q_values=(2, 3, 4), gamma_values=AUTO_GAMMA_GRID,
            K=args.K, seed=args.seed, n_delta=args.n_delta,
        )
    else:
        replications = args.replications
        p = args.p if args.p is not None else 12
        n_test = args.n_test
        grid = CvGrid(
            Q_values=(2, 3, 4), gamma_values=(0.0, 0.5, 1.0),
            K=args.K, seed=args.seed, n_delta=args.n_delta,
        )
    try:
        design = SimDesign(
            eta=args.eta, lam=getattr(args, "lambda"), kind=kind, n=args.n, p=p,
            replications=replications, n_test=n_test, seed=args.seed,
        )
    except McenError as err:
        raise CliError(str(err)) from None
    methods = tuple(args.methods.split(","))
    result = run_replications(
        design, methods=methods, grid=grid,
        mcen_settings=DEFAULT_MCEN_SETTINGS.with_seed(args.seed),
        binomial_settings=DEFAULT_BINOMIAL_SETTINGS.with_seed(args.seed),
    )
    os.makedirs(args.out, exist_ok=True)
    manifest = _manifest(args, "simulate")
    rows = [
        (method, rep, metric, _float_cell(value))
        for method, rep, metric, value in result.records
    ]
    _write_csv(
        os.path.join(args.out, "results.csv"), manifest,
        ["method", "replication", "metric", "value"], rows,
    )
    _write_json(
        os.path.join(args.out, "summary.json"),
        {
            "manifest": manifest,
            "summary": result.summary,
            "failures": [list(f) for f in result.failures],
        },
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcen",
        description="Sparse multivariate regression with response clustering.",
    )
    parser.add_argument("--version", action="version", version=f"mcen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        if data:
            sp.add_argument("--data", required=True, help="input CSV (header required)")
        sp.add_argument("--kind", choices=[GAUSSIAN, BINOMIAL], default=GAUSSIAN)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    sp = sub.add_parser("fit", help="fit at one (Q, gamma, delta)")
    common(sp)
    sp.add_argument("--responses", required=True, help="comma-separated response column names")
    sp.add_argument("--Q", type=int)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--delta", type=float)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("cv", help="cross-validate over a grid, then refit")
    common(sp)
    sp.add_argument("--responses", required=True)
    sp.add_argument("--grid", default="auto",
                    help="'auto' or JSON like {\"Q\":[1,2],\"gamma\":[0,1],\"delta\":[...]}")
    sp.add_argument("--K", type=int, default=10)
    sp.add_argument("--n-delta", dest="n_delta", type=int, default=10)
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("predict", help="predict from a saved fit")
    common(sp)
    sp.add_argument("--fit", required=True, help="fit.json produced by fit/cv")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("simulate", help="run the benchmark designs")
    common(sp, data=False)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--lambda", dest="lambda", type=float, required=True)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--replications", type=int, default=10)
    sp.add_argument("--n-test", dest="n_test", type=int, default=1000)
    sp.add_argument("--K", type=int, default=10)
    sp.add_argument("--n-delta", dest="n_delta", type=int, default=10)
    sp.add_argument("--methods", default="MCEN,TMCEN,SEN")
    sp.add_argument("--paper-mode", action="store_true")
    sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidK as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except McenError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
