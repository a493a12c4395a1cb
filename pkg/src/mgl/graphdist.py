"""Local graph distances between sampled operator graphs.

The local distance over a compact window K restricts the outer sup to
graph points inside K but lets the inner inf range over the *entire*
opposing sample; the asymmetry matters near window boundaries, so it is
kept exactly. The soft variant replaces sup/inf with log-sum-exp
smoothing at separate inner/outer temperatures and brackets the hard
value within (tau_in + tau_out) * log(max matrix dimension).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import GraphSample
from .util import cross_sqdists, soft_max, soft_min

MIN_TEMPERATURE = 1e-9


class UndefinedDistanceError(ValueError):
    """Excess against an empty graph is undefined."""


@dataclass(frozen=True)
class CompactWindow:
    """Product window: ||u|| <= input_radius and ||v|| <= output_radius.

    None radii mean unbounded (the whole product space).
    """

    input_radius: float | None
    output_radius: float | None

    def __post_init__(self):
        for r in (self.input_radius, self.output_radius):
            if r is not None and r <= 0:
                raise ValueError(f"window radius must be positive, got {r}")

    @classmethod
    def unbounded(cls) -> "CompactWindow":
        return cls(None, None)

    def mask(self, sample: GraphSample) -> np.ndarray:
        keep = np.ones(len(sample), dtype=bool)
        if self.input_radius is not None:
            keep &= sample.input_norms() <= self.input_radius + 1e-12
        if self.output_radius is not None:
            keep &= sample.output_norms() <= self.output_radius + 1e-12
        return keep


@dataclass(frozen=True)
class SoftGraphParams:
    tau_in: float
    tau_out: float
    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        if self.tau_in < MIN_TEMPERATURE or self.tau_out < MIN_TEMPERATURE:
            raise ValueError(f"temperatures below {MIN_TEMPERATURE} are rejected")
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("distance weights must be nonnegative")


@dataclass
class PairwiseDistances:
    """Weighted product-space distance matrix between two graph samples.

    entry(i, j) = sqrt(w1*||u_i - u_j||^2 + w2*||y_i - yhat_j||^2 + floor);
    rows index the first (reference) sample, columns the second.
    """

    matrix: np.ndarray = field(repr=False)
    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.size == 0:
            raise ValueError(f"need a non-empty 2d matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("distance entries must be finite and nonnegative")
        self.matrix = m


def product_sqdists(X: GraphSample, Y: GraphSample) -> np.ndarray:
    """(len X, len Y) matrix of squared H x H distances between graph points."""
    return cross_sqdists(X.inputs, Y.inputs) + cross_sqdists(X.outputs, Y.outputs)


def one_sided_excess(X: GraphSample, Y: GraphSample, window: CompactWindow) -> float:
    """sup over X inside the window of the distance to the whole of Y."""
    keep = window.mask(X)
    if not np.any(keep):
        return 0.0
    if len(Y) == 0:
        raise UndefinedDistanceError("nonempty X within the window but Y is empty")
    d2 = cross_sqdists(X.inputs[keep], Y.inputs) + cross_sqdists(X.outputs[keep], Y.outputs)
    return float(np.sqrt(np.max(np.min(d2, axis=1))))


def graph_distance(X: GraphSample, Y: GraphSample, window: CompactWindow) -> float:
    return max(one_sided_excess(X, Y, window), one_sided_excess(Y, X, window))


def pairwise(inputs_i, targets_i, inputs_j, predictions_j, w1: float, w2: float,
             floor: float = 0.0) -> PairwiseDistances:
    """Asymmetric weighted distance matrix d_ij between a reference graph
    (inputs_i, targets_i) and a model graph (inputs_j, predictions_j).
    """
    d2 = w1 * cross_sqdists(inputs_i, inputs_j) + w2 * cross_sqdists(targets_i, predictions_j)
    return PairwiseDistances(np.sqrt(d2 + floor), w1=w1, w2=w2)


def soft_graph_distance(D: PairwiseDistances, params: SoftGraphParams) -> float:
    """Two-sided softened sup-inf of the distance matrix.

    Row side: soft-min each row at tau_in, then soft-max at tau_out;
    column side symmetrically; the final max of the two stays hard, with
    ties resolved toward the row side.
    """
    d = D.matrix
    h_rows = float(soft_max(soft_min(d, params.tau_in, axis=1), params.tau_out))
    h_cols = float(soft_max(soft_min(d, params.tau_in, axis=0), params.tau_out))
    return h_rows if h_rows >= h_cols else h_cols


def hard_graph_metric(D: PairwiseDistances) -> float:
    d = D.matrix
    return float(max(np.max(np.min(d, axis=1)), np.max(np.min(d, axis=0))))


def soft_hard_gap_bound(D: PairwiseDistances, params: SoftGraphParams) -> float:
    """Proven bracket half-width between soft and hard values."""
    return (params.tau_in + params.tau_out) * np.log(max(D.matrix.shape))
