"""Shared numeric helpers: stable log-sum-exp and batched L2 geometry.

Everything here is pure numpy and deterministic: reductions run in
numpy's fixed row-major order, so results do not depend on call context.
"""

from __future__ import annotations

import numpy as np


def stable_lse(x: np.ndarray, axis=None) -> np.ndarray:
    """log(sum(exp(x))) along `axis`, stabilized by max subtraction."""
    x = np.asarray(x, dtype=np.float64)
    m = np.max(x, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(x - m), axis=axis)) + np.squeeze(m, axis=axis if axis is not None else None)
    return out


def soft_max(x: np.ndarray, tau: float, axis=None) -> np.ndarray:
    """Smooth maximum: tau * log sum exp(x / tau)."""
    return tau * stable_lse(x / tau, axis=axis)


def soft_min(x: np.ndarray, tau: float, axis=None) -> np.ndarray:
    """Smooth minimum: -tau * log sum exp(-x / tau)."""
    return -tau * stable_lse(-x / tau, axis=axis)


def flatten_samples(a: np.ndarray) -> np.ndarray:
    """(N, ...) -> (N, d) view, treating scalars as d=1."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    return a.reshape(a.shape[0], -1)


def space_weight(a: np.ndarray) -> float:
    """Quadrature weight turning squared sample sums into squared H-norms.

    Scalars weigh 1; a grid of n (or n x n) points weighs 1/n (1/n^2),
    i.e. the rectangle rule on the unit interval / square.
    """
    a = np.asarray(a)
    if a.ndim <= 1:
        return 1.0
    size = 1
    for s in a.shape[1:]:
        size *= s
    return 1.0 / size


def batched_sqnorms(a: np.ndarray) -> np.ndarray:
    """Squared H-norm of each sample in a stacked (N, ...) array."""
    flat = flatten_samples(a)
    return space_weight(a) * np.sum(flat * flat, axis=1)


def cross_sqdists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs squared H-distances between stacked sample arrays.

    Returns an (N, M) matrix with entry (i, j) = ||a_i - b_j||_H^2. Uses
    the Gram-matrix expansion, then recomputes near-zero entries with
    direct differences: the expansion cancels catastrophically exactly
    there, and coincident points must come out as exact zeros.
    """
    fa, fb = flatten_samples(a), flatten_samples(b)
    if fa.shape[1] != fb.shape[1]:
        raise ValueError(f"sample dims differ: {fa.shape[1]} vs {fb.shape[1]}")
    na = np.sum(fa * fa, axis=1)
    nb = np.sum(fb * fb, axis=1)
    d2 = na[:, None] + nb[None, :] - 2.0 * (fa @ fb.T)
    np.maximum(d2, 0.0, out=d2)
    cutoff = 1e-9 * (np.max(na, initial=0.0) + np.max(nb, initial=0.0))
    suspects = np.argwhere(d2 <= cutoff)
    for i, j in suspects:
        diff = fa[i] - fb[j]
        d2[i, j] = np.dot(diff, diff)
    return space_weight(a) * d2


def round_pow2(x: float, lo: int, hi: int) -> int:
    """Nearest power of two to x, clamped to [lo, hi]."""
    if x <= lo:
        return lo
    e = int(round(np.log2(x)))
    return int(min(max(2 ** e, lo), hi))
