"""Numeric kernels: log-domain reductions, PCA, K-means, K-modes, entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleClusteringError


def log_sum_exp(v, axis=None, keepdims=False):
    """``log(sum(exp(v)))`` by max-shift. All ``-inf`` input gives ``-inf``."""
    v = np.asarray(v, dtype=float)
    vmax = np.max(v, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(vmax), vmax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - shift), axis=axis, keepdims=True)) + shift
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    if out.ndim == 0:
        return float(out)
    return out


def shannon_entropy(p, axis=-1):
    """Entropy in nats with ``0 log 0 = 0``; works row-wise on 2-d input."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.allclose(p.sum(axis=axis), 1.0, atol=1e-8):
        raise ValueError("entropy needs a probability vector")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    out = terms.sum(axis=axis)
    return float(out) if np.ndim(out) == 0 else out


def one_hot_items(Y, n_categories):
    """Binary items pass through as one 0/1 column; polytomous items are one-hot."""
    cols = []
    for h, C in enumerate(n_categories):
        y = Y[:, h]
        if C == 2:
            cols.append(y[:, None].astype(float))
        else:
            cols.append((y[:, None] == np.arange(C)[None, :]).astype(float))
    return np.hstack(cols)


def pca_scores(X, var_threshold=0.85):
    """Scores on the top ``q = max(q85, ceil(p/2))`` covariance eigenvectors.

    ``q85`` is the fewest components explaining ``var_threshold`` of the
    total variance.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2 or p < 1:
        raise ValueError("pca needs at least 2 rows and 1 column")
    Xc = X - X.mean(axis=0)
    half = math.ceil(p / 2)
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = evals.sum()
    if total <= 0:
        return np.zeros((n, half))
    cum = np.cumsum(evals) / total
    # tolerance so that exactly-equal spectra hit the threshold where they should
    q85 = int(np.searchsorted(cum, var_threshold - 1e-12) + 1)
    q = max(min(q85, p), half)
    # fix sign so scores are reproducible across LAPACK builds
    signs = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(p)])
    evecs = evecs * np.where(signs == 0, 1.0, signs)
    return Xc @ evecs[:, :q]


def pca_components(X, var_threshold=0.85) -> int:
    return pca_scores(X, var_threshold).shape[1]


@dataclass(frozen=True)
class Partition:
    """Hard clustering with 0-based labels."""

    labels: np.ndarray
    K: int
    objective: float

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)


def _sq_dist(X, C):
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(X, K, rng):
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = _sq_dist(X, centers[:1]).ravel()
    for k in range(1, K):
        tot = d2.sum()
        idx = rng.integers(n) if tot <= 0 else rng.choice(n, p=d2 / tot)
        centers[k] = X[idx]
        d2 = np.minimum(d2, _sq_dist(X, centers[k : k + 1]).ravel())
    return centers


def _repair_empty(labels, dist, K):
    """Move the point farthest from its own center into each empty cluster."""
    labels = labels.copy()
    own = dist[np.arange(len(labels)), labels].copy()
    for k in range(K):
        sizes = np.bincount(labels, minlength=K)
        if sizes[k] > 0:
            continue
        movable = sizes[labels] > 1
        cand = np.where(movable, own, -np.inf)
        i = int(np.argmax(cand))
        labels[i] = k
        own[i] = -np.inf
    return labels


def _lloyd(X, centers, max_iter):
    K = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        dist = _sq_dist(X, centers)
        new = np.argmin(dist, axis=1)
        new = _repair_empty(new, dist, K)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            centers[k] = X[labels == k].mean(axis=0)
    dist = _sq_dist(X, centers)
    obj = float(dist[np.arange(len(labels)), labels].sum())
    return labels, obj


def kmeans(X, K, restarts=10, seed=0, max_iter=300) -> Partition:
    """Lloyd's algorithm from k-means++ seeds; best of ``restarts`` runs."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if K < 1 or K > n:
        raise InfeasibleClusteringError(f"cannot form {K} clusters from {n} points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers = _kmeanspp(X, K, rng)
        labels, obj = _lloyd(X, centers, max_iter)
        if best is None or obj < best[1] - 1e-12 * max(1.0, abs(best[1])):
            best = (labels, obj)
    return Partition(best[0], K, best[1])


def _modes(X, labels, K, n_codes):
    modes = np.empty((K, X.shape[1]), dtype=X.dtype)
    for k in range(K):
        block = X[labels == k]
        for h in range(X.shape[1]):
            # argmax returns the first (smallest) code on ties
            modes[k, h] = np.argmax(np.bincount(block[:, h], minlength=n_codes[h]))
    return modes


def kmodes(X, K, restarts=10, seed=0, max_iter=100) -> Partition:
    """K-modes with matching dissimilarity; codes must be 0..C-1 integers."""
    X = np.asarray(X, dtype=np.int64)
    n = X.shape[0]
    if K < 1 or K > n:
        raise InfeasibleClusteringError(f"cannot form {K} clusters from {n} points")
    n_codes = X.max(axis=0) + 1
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        modes = X[rng.choice(n, size=K, replace=False)].copy()
        labels = None
        for _ in range(max_iter):
            dist = (X[:, None, :] != modes[None, :, :]).sum(axis=2).astype(float)
            new = _repair_empty(np.argmin(dist, axis=1), dist, K)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            modes = _modes(X, labels, K, n_codes)
        dist = (X[:, None, :] != modes[None, :, :]).sum(axis=2)
        obj = float(dist[np.arange(n), labels].sum())
        if best is None or obj < best[1]:
            best = (labels, obj)
    return Partition(best[0], K, best[1])
