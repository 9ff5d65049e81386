"""JSON round-tripping for fitted models (both response kinds share one
schema, distinguished by the "kind" tag; coefficients stored column-major)."""

from __future__ import annotations

import json

import numpy as np

from .binomial_irls import BinomialFit
from .data_model import (
    BINOMIAL,
    GAUSSIAN,
    ClusterPartition,
    CoefficientMatrix,
    Standardizer,
    TuningTriple,
)
from .mcen_gaussian import McenFit

FORMAT_VERSION = 1


def fit_to_dict(fit_result) -> dict:
    if isinstance(fit_result, McenFit):
        kind = GAUSSIAN
        B = fit_result.B_hat
        trace = fit_result.objective_trace
        extra = {"all_zero_init": fit_result.all_zero_init}
    elif isinstance(fit_result, BinomialFit):
        kind = BINOMIAL
        B = fit_result.Theta_hat
        trace = fit_result.nll_trace
        extra = {}
    else:
        raise TypeError(f"cannot serialize {type(fit_result).__name__}")
    std = fit_result.standardizer
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "rows": B.values.shape[0],
        "r": B.values.shape[1],
        "has_intercept_row": B.has_intercept_row,
        "coefficients_colmajor": B.values.flatten(order="F").tolist(),
        "assignments": fit_result.D_hat.assignments.tolist(),
        "triple": {
            "Q": fit_result.triple.Q,
            "gamma": fit_result.triple.gamma,
            "delta": fit_result.triple.delta,
        },
        "standardizer": {
            "x_center": std.x_center.tolist(),
            "x_scale": std.x_scale.tolist(),
            "y_center": std.y_center.tolist(),
            "y_scale": std.y_scale.tolist(),
        },
        "objective_trace": [float(v) for v in trace],
        "outer_iters": fit_result.outer_iters,
        "converged": fit_result.converged,
        "seed": fit_result.seed,
    }
    doc.update(extra)
    return doc


def fit_from_dict(doc: dict):
    rows, r = doc["rows"], doc["r"]
    B = CoefficientMatrix(
        np.asarray(doc["coefficients_colmajor"], dtype=np.float64).reshape(
            (rows, r), order="F"
        ),
        has_intercept_row=doc["has_intercept_row"],
    )
    std = Standardizer(
        np.asarray(doc["standardizer"]["x_center"]),
        np.asarray(doc["standardizer"]["x_scale"]),
        np.asarray(doc["standardizer"]["y_center"]),
        np.asarray(doc["standardizer"]["y_scale"]),
    )
    D = ClusterPartition(np.asarray(doc["assignments"], dtype=np.int64))
    triple = TuningTriple(**doc["triple"])
    trace = tuple(doc["objective_trace"])
    if doc["kind"] == GAUSSIAN:
        return McenFit(
            B_hat=B,
            D_hat=D,
            objective_trace=trace,
            outer_iters=doc["outer_iters"],
            converged=doc["converged"],
            standardizer=std,
            triple=triple,
            seed=doc["seed"],
            all_zero_init=doc.get("all_zero_init", False),
        )
    if doc["kind"] == BINOMIAL:
        return BinomialFit(
            Theta_hat=B,
            D_hat=D,
            nll_trace=trace,
            converged=doc["converged"],
            standardizer=std,
            triple=triple,
            seed=doc["seed"],
            outer_iters=doc["outer_iters"],
        )
    raise ValueError(f"unknown fit kind {doc['kind']!r}")


def fit_to_json(fit_result) -> str:
    return json.dumps(fit_to_dict(fit_result), sort_keys=True, indent=1)


def fit_from_json(text: str):
    return fit_from_dict(json.loads(text))
