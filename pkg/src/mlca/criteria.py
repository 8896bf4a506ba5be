"""Information criteria and classification statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import shannon_entropy


@dataclass(frozen=True)
class InformationCriteria:
    loglik: float
    npar: int
    N: int
    J: int
    bic_low: float
    bic_high: float
    aic: float
    icl_bic_low: float
    icl_bic_high: float

    to_dict = asdict


@dataclass(frozen=True)
class ClassificationStats:
    class_err_low: float
    entropy_r2_low: float
    entropy_low: float
    class_err_high: float
    entropy_r2_high: float
    entropy_high: float

    to_dict = asdict


def count_parameters(n_categories, T, M=1, K=1, K_high=1) -> int:
    """Free parameters: response probabilities plus both logistic models."""
    return sum((C - 1) * T for C in n_categories) + (T - 1) * M * K + (M - 1) * K_high


def information_criteria(loglik, npar, N, J, entropy_low=0.0, entropy_high=0.0) -> InformationCriteria:
    """BIC at both levels (``log N`` / ``log J``), AIC, and ICL-BIC.

    ICL-BIC adds twice the total posterior entropy of the level.
    """
    dev = -2.0 * loglik
    bic_low = dev + npar * math.log(N)
    bic_high = dev + npar * math.log(J)
    return InformationCriteria(
        loglik=loglik,
        npar=npar,
        N=N,
        J=J,
        bic_low=bic_low,
        bic_high=bic_high,
        aic=dev + 2.0 * npar,
        icl_bic_low=bic_low + 2.0 * entropy_low,
        icl_bic_high=bic_high + 2.0 * entropy_high,
    )


def classification_stats(post_probs, prior=None):
    """``(class_err, entropy_r2, total_entropy)`` for one level.

    ``post_probs`` has one row per unit (or group). ``prior`` is the
    marginal class distribution; it defaults to the mean posterior. A prior
    with zero entropy (a single class) gives ``entropy_r2 = 1``.
    """
    P = np.asarray(post_probs, dtype=float)
    n = P.shape[0]
    prior = P.mean(axis=0) if prior is None else np.asarray(prior, dtype=float)
    class_err = float(np.mean(1.0 - P.max(axis=1)))
    total = float(np.sum(shannon_entropy(P, axis=1)))
    h_prior = shannon_entropy(prior / prior.sum())
    r2 = 1.0 if h_prior <= 0 else 1.0 - total / (n * h_prior)
    return class_err, r2, total
