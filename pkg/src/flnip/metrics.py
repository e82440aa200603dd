"""Histogram distances and the weighted multi-scale combination."""

from __future__ import annotations

from enum import Enum

import numpy as np

from flnip.errors import AllZeroWeights, LengthMismatch
from flnip.patterns import BINS


class MetricId(str, Enum):
    D1 = "d1"
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"
    CANBERRA = "canberra"
    CHI_SQUARE = "chi_square"

    @classmethod
    def parse(cls, name) -> MetricId:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown metric {name!r}; choose from {choices}") from None


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # empty bins on both sides contribute nothing
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def block_distances(a: np.ndarray, rows: np.ndarray, metric="d1") -> np.ndarray:
    """Distance from vector ``a`` to every row of ``rows`` (shape (N, l))."""
    metric = MetricId.parse(metric)
    a = np.asarray(a, dtype=np.float64)
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[-1] != a.shape[-1]:
        raise LengthMismatch(f"lengths differ: {a.shape[-1]} vs {rows.shape[-1]}")
    diff = rows - a
    total = rows + a
    if metric is MetricId.D1:
        terms = np.abs(diff) / (1.0 + total)
    elif metric is MetricId.EUCLIDEAN:
        return np.sqrt(np.sum(diff * diff, axis=-1))
    elif metric is MetricId.MANHATTAN:
        terms = np.abs(diff)
    elif metric is MetricId.CANBERRA:
        terms = _safe_ratio(np.abs(diff), total)
    else:
        return 0.5 * np.sum(_safe_ratio(diff * diff, total), axis=-1)
    return np.sum(terms, axis=-1)


def block_distance(a, b, metric="d1") -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"blocks must be equal-length vectors: {a.shape} vs {b.shape}")
    return float(block_distances(a, b[None, :], metric)[0])


def check_weights(w, n_blocks: int | None = None) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise LengthMismatch("weights must be a flat vector")
    if n_blocks is not None and len(w) != n_blocks:
        raise LengthMismatch(f"{len(w)} weights for {n_blocks} blocks")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError(f"weights must be finite and nonnegative: {w.tolist()}")
    if not np.any(w > 0):
        raise AllZeroWeights("at least one weight must be positive")
    return w


def combine(block_dists, w) -> np.ndarray:
    """Weighted sum over the leading (block) axis, accumulated in block order."""
    out = np.zeros(np.shape(block_dists[0]))
    for wj, dj in zip(w, block_dists):
        out = out + wj * dj
    return out


def per_block_distances(q: np.ndarray, features: np.ndarray, metric="d1") -> np.ndarray:
    """(n_blocks, N) matrix of block distances from query ``q`` to each row."""
    q = np.asarray(q, dtype=np.float64)
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if q.shape[-1] != features.shape[-1]:
        raise LengthMismatch(f"feature lengths differ: {q.shape[-1]} vs {features.shape[-1]}")
    if q.shape[-1] % BINS:
        raise LengthMismatch(f"feature length {q.shape[-1]} is not a multiple of {BINS}")
    n_blocks = q.shape[-1] // BINS
    return np.stack(
        [
            block_distances(q[j * BINS : (j + 1) * BINS], features[:, j * BINS : (j + 1) * BINS], metric)
            for j in range(n_blocks)
        ]
    )


def combined_distance(q, f, w, metric="d1") -> float:
    """sum_j w_j * dist(block_j(q), block_j(f)); d1 by default."""
    q = np.asarray(q, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if q.shape != f.shape:
        raise LengthMismatch(f"feature lengths differ: {q.shape} vs {f.shape}")
    blocks = per_block_distances(q, f[None, :], metric)
    w = check_weights(w, blocks.shape[0])
    return float(combine(blocks, w)[0])
