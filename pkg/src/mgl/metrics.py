"""Evaluation metrics over a test set.

Reported quantities: mean squared H-error, mean and worst relative L2
errors (denominator is the target norm; zero-target samples are skipped
with a warning), the hard two-sided sup-inf graph metric at the training
distance weights and at unit weights, and the monotonicity diagnostics
over sampled input pairs: with m_pq = <u_p - u_q, A(u_p) - A(u_q)>,
  mono_mean_viol  = mean of max(-m, 0),
  mono_worst_violation = max of max(-m, 0),
  mono_worst_signed = min of m (the signed convention),
  mono_frac = fraction of pairs with m < -1e-10 (values within 1e-10 of
  zero count as boundary cases, not violations).

Pairs default to the test inputs and are drawn without replacement,
seeded; pass explicit inputs to sample from the training set instead
(that choice is echoed into the report metadata).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .graphdist import PairwiseDistances, hard_graph_metric, pairwise
from .rng import Rng
from .util import batched_sqnorms, flatten_samples, space_weight

MONO_BOUNDARY_TOL = 1e-10

COLUMNS = [
    "test_mse",
    "mean_rel_l2",
    "worst_rel_l2",
    "test_graph",
    "test_graph_unit",
    "mono_mean_viol",
    "mono_worst_signed",
    "mono_worst_violation",
    "mono_frac",
]


@dataclass
class EvalReport:
    test_mse: float
    mean_rel_l2: float
    worst_rel_l2: float
    test_graph: float
    test_graph_unit: float
    mono_mean_viol: float
    mono_worst_signed: float
    mono_worst_violation: float
    mono_frac: float
    n_test: int
    n_mono_pairs: int
    mono_source: str = "test"

    def row(self) -> list[float]:
        d = asdict(self)
        return [d[c] for c in COLUMNS]


def sample_distinct_pairs(n: int, count: int, rng: Rng):
    """Up to `count` unordered index pairs without replacement."""
    ps, qs = np.triu_indices(n, k=1)
    order = list(range(len(ps)))
    rng.shuffle(order)
    take = np.array(order[: min(count, len(order))], dtype=np.intp)
    return ps[take], qs[take]


def monotonicity_inner_products(inputs: np.ndarray, outputs: np.ndarray,
                                ps: np.ndarray, qs: np.ndarray) -> np.ndarray:
    du = flatten_samples(inputs)[ps] - flatten_samples(inputs)[qs]
    dy = flatten_samples(outputs)[ps] - flatten_samples(outputs)[qs]
    return space_weight(inputs) * np.sum(du * dy, axis=1)


def evaluate(model, dataset, n_mono_pairs: int, seed: int, w1: float, w2: float,
             mono_inputs: np.ndarray | None = None) -> EvalReport:
    if len(dataset) == 0:
        raise ValueError("empty test set")
    inputs, targets = dataset.inputs, dataset.targets
    preds = np.asarray(model.forward(inputs))

    sq_err = batched_sqnorms(preds - targets)
    test_mse = float(np.mean(sq_err))

    target_norms = np.sqrt(batched_sqnorms(targets))
    nonzero = target_norms > 0
    if not np.any(nonzero):
        raise ValueError("all test targets are zero: relative errors undefined")
    if not np.all(nonzero):
        warnings.warn(f"excluding {int(np.sum(~nonzero))} zero-target samples from rel-L2")
    rel = np.sqrt(sq_err[nonzero]) / target_norms[nonzero]

    d_train = pairwise(inputs, targets, inputs, preds, w1, w2)
    d_unit = pairwise(inputs, targets, inputs, preds, 1.0, 1.0)

    mono_src = "test" if mono_inputs is None else "train"
    mu = inputs if mono_inputs is None else np.asarray(mono_inputs)
    mo = preds if mono_inputs is None else np.asarray(model.forward(mu))
    ps, qs = sample_distinct_pairs(len(mu), n_mono_pairs, Rng(seed))
    m = monotonicity_inner_products(mu, mo, ps, qs)
    viol = np.maximum(-m, 0.0)

    return EvalReport(
        test_mse=test_mse,
        mean_rel_l2=float(np.mean(rel)),
        worst_rel_l2=float(np.max(rel)),
        test_graph=hard_graph_metric(d_train),
        test_graph_unit=hard_graph_metric(d_unit),
        mono_mean_viol=float(np.mean(viol)),
        mono_worst_signed=float(np.min(m)),
        mono_worst_violation=float(np.max(viol)),
        mono_frac=float(np.mean(m < -MONO_BOUNDARY_TOL)),
        n_test=len(dataset),
        n_mono_pairs=len(ps),
        mono_source=mono_src,
    )


def report_write(report: EvalReport, csv_path, json_path=None, config_echo: dict | None = None) -> None:
    """CSV row (stable column order) plus a JSON echo of the full report."""
    write_reports_csv([report], csv_path)
    if json_path is not None:
        payload = {"report": asdict(report), "config": config_echo or {}}
        with open(json_path, "w") as f:
            json.dump(payload, f, indent=1, sort_keys=True)


def write_reports_csv(reports: list[EvalReport], path) -> None:
    with open(path, "w") as f:
        f.write(",".join(COLUMNS) + "\n")
        for r in reports:
            f.write(",".join(repr(v) for v in r.row()) + "\n")


def read_reports_csv(path) -> list[list[float]]:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    return [[float(x) for x in ln.split(",")] for ln in lines[1:]]


def aggregate(reports: list[EvalReport]) -> dict:
    """Per-column mean and sample standard deviation across seeds."""
    rows = np.array([r.row() for r in reports])
    out = {}
    for j, col in enumerate(COLUMNS):
        col_vals = rows[:, j]
        std = float(np.std(col_vals, ddof=1)) if len(col_vals) > 1 else 0.0
        out[col] = (float(np.mean(col_vals)), std)
    return out
