"""Parameter containers, likelihoods and posteriors for all model variants.

Single-level models are the ``M = 1`` case of the multilevel model: with one
high-level class the group structure drops out of the likelihood. Class and
group-class 1 (index 0 here) are the logistic reference categories.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError, EstimationError
from .numerics import log_sum_exp

log = logging.getLogger(__name__)

FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class MeasurementParams:
    """Per-item class-conditional category probabilities, ``phi[h]`` is ``T x C_h``."""

    phi: tuple

    def __post_init__(self):
        phi = tuple(np.asarray(p, dtype=float) for p in self.phi)
        object.__setattr__(self, "phi", phi)
        T = {p.shape[0] for p in phi}
        if len(T) != 1:
            raise ValueError("all items need the same number of classes")
        sums = np.concatenate([p.sum(axis=1) for p in phi])
        if np.abs(sums - 1.0).max() > 1e-10 or min(p.min() for p in phi) < 0:
            raise ValueError("each phi row must be a probability vector")

    @property
    def T(self) -> int:
        return self.phi[0].shape[0]

    @property
    def H(self) -> int:
        return len(self.phi)

    @classmethod
    def from_binary(cls, probs) -> "MeasurementParams":
        """Build from an ``H x T`` matrix of ``P(Y_h = 1 | t)``."""
        probs = np.asarray(probs, dtype=float)
        return cls(tuple(np.column_stack([1 - row, row]) for row in probs))

    def log_density(self, Y) -> np.ndarray:
        return item_logdensity(Y, self)

    def permuted(self, perm) -> "MeasurementParams":
        return MeasurementParams(tuple(p[list(perm)] for p in self.phi))

    def as_lists(self):
        return [p.tolist() for p in self.phi]


def item_logdensity(Y, phi: MeasurementParams) -> np.ndarray:
    """``sum_h log phi_h[t, y_h]`` for each class; 1-d input gives a length-T vector."""
    Y = np.asarray(Y, dtype=np.int64)
    single = Y.ndim == 1
    Y2 = Y[None, :] if single else Y
    with np.errstate(divide="ignore"):
        out = np.zeros((Y2.shape[0], phi.T))
        for h, p in enumerate(phi.phi):
            out += np.log(p[:, Y2[:, h]]).T
    return out[0] if single else out


def log_logistic(coef, Z) -> np.ndarray:
    """Log class probabilities of a baseline-category logit, shape ``(N, T)``.

    ``coef`` is ``(T-1) x K`` (reference class has implicit zero
    coefficients); ``Z`` is ``N x K`` with a leading intercept column.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    coef = np.asarray(coef, dtype=float)
    eta = np.hstack([np.zeros((Z.shape[0], 1)), Z @ coef.T])
    return eta - log_sum_exp(eta, axis=1, keepdims=True)


def logistic_probs(coef, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.exp(log_logistic(coef, z))
    return out[0] if z.ndim == 1 else out


def _log_odds(p):
    p = np.asarray(p, dtype=float)
    return np.log(p[..., 1:]) - np.log(p[..., :1])


@dataclass(frozen=True, eq=False)
class StructuralParams:
    """Logistic coefficients for both levels.

    ``gamma`` is ``M x (T-1) x K``: block ``m`` holds rows ``t = 2..T`` of the
    low-level model given group-class ``m``. ``alpha`` is ``(M-1) x K*``.
    Intercept-only levels are the ``K = 1`` / ``K* = 1`` case, whose
    coefficients are the log-odds of ``pi`` / ``omega``.
    """

    gamma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        if gamma.ndim != 3 or alpha.ndim != 2:
            raise ValueError("gamma must be M x (T-1) x K and alpha (M-1) x K*")
        if alpha.shape[0] != gamma.shape[0] - 1:
            raise ValueError("alpha needs M-1 rows")
        if not (np.isfinite(gamma).all() and np.isfinite(alpha).all()):
            raise EstimationError("non-finite structural coefficients")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "alpha", alpha)

    @property
    def M(self) -> int:
        return self.gamma.shape[0]

    @property
    def T(self) -> int:
        return self.gamma.shape[1] + 1

    @property
    def K(self) -> int:
        return self.gamma.shape[2]

    @property
    def K_high(self) -> int:
        return self.alpha.shape[1]

    @property
    def n_free(self) -> int:
        return self.gamma.size + self.alpha.size

    @classmethod
    def from_probabilities(cls, omega, pi, K=1, K_high=1) -> "StructuralParams":
        """Intercepts from ``omega`` (length M) and ``pi`` (M x T); slopes zero."""
        omega = np.asarray(omega, dtype=float)
        pi = np.atleast_2d(np.asarray(pi, dtype=float))
        M, T = pi.shape
        gamma = np.zeros((M, T - 1, K))
        gamma[:, :, 0] = _log_odds(pi)
        alpha = np.zeros((M - 1, K_high))
        alpha[:, 0] = _log_odds(omega)
        return cls(gamma, alpha)

    @property
    def pi(self) -> np.ndarray:
        if self.K != 1:
            raise ValueError("pi is only a parameter of intercept-only low-level models")
        return np.vstack([np.exp(log_logistic(self.gamma[m], np.ones((1, 1))))[0] for m in range(self.M)])

    @property
    def omega(self) -> np.ndarray:
        if self.K_high != 1:
            raise ValueError("omega is only a parameter of intercept-only high-level models")
        return np.exp(log_logistic(self.alpha, np.ones((1, 1))))[0]

    def log_pi(self, Z_low) -> np.ndarray:
        """``log P(X = t | W = m, Z)`` per unit, shape ``(N, M, T)``."""
        Z_low = np.atleast_2d(np.asarray(Z_low, dtype=float))
        if self.K == 1 and np.all(Z_low == 1.0):
            row = np.stack([log_logistic(self.gamma[m], np.ones((1, 1)))[0] for m in range(self.M)])
            return np.broadcast_to(row, (Z_low.shape[0], self.M, self.T))
        return np.stack([log_logistic(self.gamma[m], Z_low) for m in range(self.M)], axis=1)

    def log_omega(self, Z_high) -> np.ndarray:
        """``log P(W = m | Z*)`` per group, shape ``(J, M)``."""
        return log_logistic(self.alpha, Z_high)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.gamma.ravel(), self.alpha.ravel()])

    def unflatten(self, theta) -> "StructuralParams":
        theta = np.asarray(theta, dtype=float)
        g = self.gamma.size
        return StructuralParams(theta[:g].reshape(self.gamma.shape), theta[g:].reshape(self.alpha.shape))

    def names(self, z_names, zh_names) -> list[str]:
        out = []
        for m in range(self.M):
            for t in range(1, self.T):
                for name in z_names:
                    out.append(f"gamma({name}|C{t + 1},G{m + 1})" if self.M > 1 else f"gamma({name}|C{t + 1})")
        for m in range(1, self.M):
            for name in zh_names:
                out.append(f"alpha({name}|G{m + 1})")
        return out

    def permuted(self, low_perm=None, high_perm=None) -> "StructuralParams":
        """Relabel classes: new class ``k`` is old class ``perm[k]``.

        Coefficients are re-expressed against the new reference class, so
        every likelihood is unchanged.
        """
        M, T = self.M, self.T
        low_perm = list(range(T)) if low_perm is None else list(low_perm)
        high_perm = list(range(M)) if high_perm is None else list(high_perm)
        full_g = np.concatenate([np.zeros((M, 1, self.K)), self.gamma], axis=1)
        full_g = full_g[high_perm][:, low_perm]
        gamma = full_g[:, 1:] - full_g[:, :1]
        full_a = np.vstack([np.zeros((1, self.K_high)), self.alpha])[high_perm]
        alpha = full_a[1:] - full_a[:1]
        return StructuralParams(gamma, alpha)


@dataclass(frozen=True, eq=False)
class Posteriors:
    """E-step output.

    ``pw`` is ``J x M``; ``joint[i, t, m] = P(X_i = t, W = m | Y_j, Z)``;
    ``px`` is ``joint`` summed over ``m``; ``group_loglik`` holds
    ``log P(Y_j | Z)``.
    """

    pw: np.ndarray
    joint: np.ndarray
    px: np.ndarray
    loglik: float
    group_loglik: np.ndarray


def _check_dims(data, phi, struct):
    if phi.T != struct.T:
        raise ValueError("phi and structural parameters disagree on T")
    if phi.H != data.H:
        raise ValueError("phi and data disagree on the number of items")
    if struct.K != data.Z_low.shape[1] or struct.K_high != data.Z_high.shape[1]:
        raise ValueError("coefficient dimensions do not match the design matrices")
    if struct.M > 1 and not data.is_multilevel:
        raise ValueError("M >= 2 requires group ids")


def _unit_terms(data, phi, struct, logb=None):
    if logb is None:
        logb = item_logdensity(data.Y, phi)
    a = struct.log_pi(data.Z_low) + logb[:, None, :]  # (N, M, T)
    amax = a.max(axis=2, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    e = np.exp(a - amax)
    tot = e.sum(axis=2, keepdims=True)
    with np.errstate(divide="ignore"):
        l_im = (np.log(tot) + amax)[:, :, 0]
    with np.errstate(invalid="ignore"):
        cond = e / tot  # P(X = t | W = m, Y_i)
    return cond, l_im


def _group_sums(values, group, J):
    if J == 1:
        return values.sum(axis=0, keepdims=True)
    return np.stack([np.bincount(group, weights=values[:, m], minlength=J) for m in range(values.shape[1])], axis=1)


def _report_zero_rows(data, l_im):
    bad = np.flatnonzero(~np.isfinite(log_sum_exp(l_im, axis=1).reshape(-1)))
    rows = data.rows[bad[:10]].tolist()
    log.warning("zero likelihood for %d unit(s); source rows %s", len(bad), rows)
    return rows


def multilevel_loglik(data, phi: MeasurementParams, struct: StructuralParams, logb=None) -> float:
    """``sum_j log sum_m omega_m(Z*_j) prod_i sum_t pi_t|m(Z_ij) P(Y_ij | t)``."""
    _check_dims(data, phi, struct)
    _, l_im = _unit_terms(data, phi, struct, logb)
    s = _group_sums(l_im, data.group, data.J) + struct.log_omega(data.Z_high)
    ll = log_sum_exp(s, axis=1).reshape(-1)
    total = float(ll.sum())
    if not np.isfinite(total):
        _report_zero_rows(data, l_im)
    return total


def single_level_loglik(data, phi: MeasurementParams, struct: StructuralParams) -> float:
    if struct.M != 1:
        raise ValueError("single-level likelihood needs M = 1")
    _check_dims(data, phi, struct)
    _, l_im = _unit_terms(data, phi, struct)
    total = float(l_im.sum())
    if not np.isfinite(total):
        _report_zero_rows(data, l_im)
    return total


def compute_posteriors(data, phi: MeasurementParams, struct: StructuralParams, logb=None) -> Posteriors:
    _check_dims(data, phi, struct)
    cond, l_im = _unit_terms(data, phi, struct, logb)
    s = _group_sums(l_im, data.group, data.J) + struct.log_omega(data.Z_high)
    ll_j = log_sum_exp(s, axis=1).reshape(-1)
    if not np.isfinite(ll_j).all():
        rows = _report_zero_rows(data, l_im)
        raise EstimationError(f"zero likelihood at current parameters (source rows {rows})")
    pw = np.exp(s - ll_j[:, None])
    pw /= pw.sum(axis=1, keepdims=True)
    joint = np.transpose(cond, (0, 2, 1)) * pw[data.group][:, None, :]
    px = joint.sum(axis=2)
    return Posteriors(pw=pw, joint=joint, px=px, loglik=float(ll_j.sum()), group_loglik=ll_j)


def floor_normalize(weights, floor=FLOOR, axis=-1) -> np.ndarray:
    """Maximise ``sum_k w_k log p_k`` subject to ``p_k >= floor``, ``sum p = 1``.

    The solution is ``p_k = max(floor, w_k / lam)`` with ``lam`` fixed by the
    sum constraint; this keeps EM monotone where plain clipping would not.
    """
    w = np.moveaxis(np.asarray(weights, dtype=float), axis, -1)
    flat = w.reshape(-1, w.shape[-1])
    C = flat.shape[1]
    if floor * C >= 1:
        raise ValueError("floor too large for the number of categories")
    totals = flat.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(totals > 0, flat / totals, 1.0 / C)
    for r in np.flatnonzero((out < floor).any(axis=1)):
        row = flat[r]
        pinned = np.zeros(C, dtype=bool)
        while True:
            free_mass = 1.0 - floor * pinned.sum()
            free_w = row[~pinned].sum()
            p = np.where(pinned, floor, row * free_mass / free_w if free_w > 0 else 0.0)
            newly = (~pinned) & (p < floor)
            if not newly.any():
                break
            pinned |= newly
        out[r] = p
    return np.moveaxis(out.reshape(w.shape), -1, axis)


ESTIMATORS = ("one_step", "two_step", "two_stage")


@dataclass(frozen=True)
class ModelSpec:
    """Class counts and estimator choice; covariates come from the dataset."""

    T: int
    M: int = 1
    estimator: str = "two_step"
    interaction: bool = False  # schedules stage 1c of the two-stage estimator
    init_method: str = "kmeans"

    def __post_init__(self):
        if self.T < 1 or self.M < 1:
            raise ValueError("T and M must be at least 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.init_method not in ("kmeans", "kmodes"):
            raise ValueError("init_method must be 'kmeans' or 'kmodes'")

    @property
    def multilevel(self) -> bool:
        return self.M > 1

    def check(self, data):
        if self.M > 1 and not data.is_multilevel:
            raise DataError("M >= 2 requires a group column")
        if data.has_high_covariates and self.M == 1:
            raise DataError("high-level covariates require M >= 2")
