"""Starting values for the measurement and structural EM runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MeasurementParams, StructuralParams, floor_normalize
from .em import EmControl, EmResult, em_single_measurement
from .errors import InfeasibleClusteringError
from .numerics import kmeans, kmodes, one_hot_items, pca_scores

PHI_INIT_FLOOR = 0.01


@dataclass(frozen=True, eq=False)
class InitBundle:
    phi0: MeasurementParams
    omega0: np.ndarray
    pi0: np.ndarray  # M x T
    x_tilde: np.ndarray  # modal low-level class per unit, 0-based
    w_tilde: np.ndarray  # high-level cluster per group, 0-based
    single_level: EmResult  # the T-class single-level fit behind phi0


def initial_partition(data, T, method="kmeans", seed=0) -> np.ndarray:
    """Cluster the pooled item responses into ``T`` groups (0-based labels)."""
    if T == 1:
        return np.zeros(data.N, dtype=np.int64)
    if method == "kmodes":
        return kmodes(data.Y, T, seed=seed).labels
    if method != "kmeans":
        raise ValueError(f"unknown clustering method {method!r}")
    scores = pca_scores(one_hot_items(data.Y, data.n_categories))
    return kmeans(scores, T, seed=seed).labels


def phi_from_partition(data, labels, T, floor=PHI_INIT_FLOOR) -> MeasurementParams:
    phi = []
    onehot_labels = (labels[:, None] == np.arange(T)[None, :]).astype(float)
    for h, C in enumerate(data.n_categories):
        counts = onehot_labels.T @ (data.Y[:, h][:, None] == np.arange(C)[None, :]).astype(float)
        phi.append(floor_normalize(counts, floor, axis=1))
    return MeasurementParams(tuple(phi))


def init_measurement(data, T, M=1, method="kmeans", seed=0, ctrl: EmControl = EmControl()) -> InitBundle:
    """Clustering-based start, single-level fit, group clustering, cross-tab.

    1. PCA of the one-hot items, K-means (or K-modes) with ``T`` clusters;
       class-wise item frequencies start a single-level EM whose estimates
       become ``phi0``; modal posteriors give ``x_tilde``.
    2. Group means of the unit posteriors (``J x T``) are clustered into
       ``M`` clusters: relative cluster sizes give ``omega0`` and labels
       ``w_tilde``.
    3. ``pi0`` is the cross-tabulation of ``x_tilde`` against ``w_tilde``
       (replicated to units), normalised within each high-level cluster.
    """
    if T < 1 or M < 1:
        raise ValueError("T and M must be at least 1")
    labels = initial_partition(data, T, method, seed)
    sizes = np.bincount(labels, minlength=T) / data.N
    phi_start = phi_from_partition(data, labels, T)
    single = em_single_measurement(data, phi_start, floor_normalize(sizes, ctrl.floor), ctrl)
    px = single.posteriors.px
    x_tilde = np.argmax(px, axis=1)

    if M == 1:
        return InitBundle(single.phi, np.ones(1), single.structural.pi, x_tilde, np.zeros(data.J, dtype=np.int64), single)

    if data.J < M:
        raise InfeasibleClusteringError(f"cannot form {M} high-level classes from {data.J} groups")
    rel = np.stack([np.bincount(data.group, weights=px[:, t], minlength=data.J) for t in range(T)], axis=1)
    rel /= data.n_j[:, None]
    if method == "kmodes":
        # K-modes needs categories: code each class as over- or under-represented
        part = kmodes((rel > rel.mean(axis=0)).astype(np.int64), M, seed=seed)
    else:
        part = kmeans(rel, M, seed=seed)
    w_tilde = part.labels
    omega0 = floor_normalize(np.bincount(w_tilde, minlength=M).astype(float), ctrl.floor)

    unit_w = w_tilde[data.group]
    counts = np.zeros((M, T))
    np.add.at(counts, (unit_w, x_tilde), 1.0)
    pi0 = floor_normalize(counts, ctrl.floor, axis=1)
    return InitBundle(single.phi, omega0, pi0, x_tilde, w_tilde, single)


def init_structural(omega, pi, K=1, K_high=1) -> StructuralParams:
    """Intercepts at the step-1 log-odds, every covariate coefficient at zero."""
    return StructuralParams.from_probabilities(omega, pi, K, K_high)


def stage_plan_two_stage(M, interaction=False) -> list[str]:
    """Ordered stages of the two-stage estimator.

    ``1a`` single-level fit, ``1b`` multilevel fit with ``phi`` fixed,
    ``1c`` refit with ``omega`` fixed (only with cross-level interactions),
    ``2`` the structural step.
    """
    if M == 1:
        return ["1a", "2"]
    plan = ["1a", "1b"]
    if interaction:
        plan.append("1c")
    plan.append("2")
    return plan
