"""EM engines for measurement, structural and one-step estimation.

All engines share one loop (``run_em``) and differ only in which parameter
blocks the M-step updates. Intercept-only levels are updated in closed form;
levels with covariates take damped Newton steps on the weighted multinomial
logit (generalized EM). The log-likelihood is checked for monotonicity after
every iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    FLOOR,
    MeasurementParams,
    Posteriors,
    StructuralParams,
    compute_posteriors,
    floor_normalize,
    log_logistic,
)
from .errors import ConvergenceError, MonotonicityError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmControl:
    max_iter: int = 1000
    tol: float = 1e-9
    newton_steps: int = 1
    floor: float = FLOOR
    slack: float = 1e-8

    def __post_init__(self):
        if self.tol < 0 or self.max_iter < 1:
            raise ValueError("need tol >= 0 and max_iter >= 1")


@dataclass
class EmTrace:
    iterations: int
    ll_first: float
    ll_last: float
    converged: bool
    history: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "ll_first": self.ll_first,
            "ll_last": self.ll_last,
            "converged": self.converged,
        }


@dataclass(frozen=True, eq=False)
class EmResult:
    phi: MeasurementParams
    structural: StructuralParams
    posteriors: Posteriors
    trace: EmTrace


# --- weighted multinomial logit -------------------------------------------


def logistic_objective(coef, Z, w) -> float:
    """``sum_i sum_t w_it log p_t(z_i)``."""
    lp = log_logistic(coef, Z)
    return float(np.sum(np.where(w > 0, w * lp, 0.0)))


def logistic_score(coef, Z, w) -> np.ndarray:
    P = np.exp(log_logistic(coef, Z))
    W = w.sum(axis=1)
    return (w[:, 1:] - W[:, None] * P[:, 1:]).T @ Z


def logistic_hessian(coef, Z, w) -> np.ndarray:
    """Hessian of ``logistic_objective`` w.r.t. ``coef.ravel()`` (negative semidefinite)."""
    P = np.exp(log_logistic(coef, Z))[:, 1:]
    W = w.sum(axis=1)
    S, K = P.shape[1], Z.shape[1]
    H = np.empty((S, K, S, K))
    for s in range(S):
        for t in range(s, S):
            a = W * P[:, s] * ((s == t) - P[:, t])
            block = -(Z * a[:, None]).T @ Z
            H[s, :, t, :] = block
            H[t, :, s, :] = block.T
    return H.reshape(S * K, S * K)


def mstep_logistic(Z, w, start, newton_steps=1, max_halvings=40) -> np.ndarray:
    """Damped Newton ascent on the weighted multinomial logit.

    Each step is halved until the objective does not decrease, so the
    returned coefficients never score below ``start``.
    """
    coef = np.array(start, dtype=float)
    if coef.size == 0:
        return coef
    Z = np.asarray(Z, dtype=float)
    w = np.asarray(w, dtype=float)
    f = logistic_objective(coef, Z, w)
    for _ in range(newton_steps):
        g = logistic_score(coef, Z, w).ravel()
        info = -logistic_hessian(coef, Z, w)
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(info + 1e-8 * np.eye(len(g)), g)
        if not np.isfinite(step).all():
            step = np.linalg.solve(info + 1e-8 * np.eye(len(g)), g)
        # near-separable data can leave the Newton direction useless; fall back to the gradient
        for direction in (step, g):
            size = 1.0
            for _ in range(max_halvings):
                cand = coef + size * direction.reshape(coef.shape)
                f_new = logistic_objective(cand, Z, w)
                if np.isfinite(f_new) and f_new >= f:
                    break
                size *= 0.5
            else:
                continue
            coef, f = cand, f_new
            break
        else:
            if np.abs(g).max() > 1e-4 * (1.0 + abs(f)):
                raise ConvergenceError("logistic M-step failed to improve despite a large gradient")
            break
    return coef


# --- shared loop ----------------------------------------------------------


def stacked_one_hot(data) -> np.ndarray:
    """``N x sum(C_h)`` indicator matrix of all item categories."""
    return np.hstack([(data.Y[:, h][:, None] == np.arange(C)[None, :]).astype(float) for h, C in enumerate(data.n_categories)])


def _stacked_logb(one_hot, phi):
    with np.errstate(divide="ignore"):
        return one_hot @ np.log(np.vstack([p.T for p in phi.phi]))


def mstep_phi(px, one_hot, n_categories, floor=FLOOR) -> MeasurementParams:
    counts = one_hot.T @ px  # sum(C_h) x T
    bounds = np.cumsum([0] + list(n_categories))
    totals = np.add.reduceat(counts, bounds[:-1], axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        probs = counts / np.repeat(totals, n_categories, axis=0)
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        p = probs[a:b].T
        # rows already above the floor are the exact maximiser
        out.append(p if (p >= floor).all() else floor_normalize(counts[a:b].T, floor, axis=1))
    return MeasurementParams(tuple(out))


def _log_odds(p):
    return np.log(p[..., 1:]) - np.log(p[..., :1])


def mstep_structural(data, post: Posteriors, struct: StructuralParams, ctrl: EmControl, update_low=True, update_high=True):
    gamma = struct.gamma.copy()
    alpha = struct.alpha.copy()
    if update_low and struct.T > 1:
        for m in range(struct.M):
            w = post.joint[:, :, m]
            if struct.K == 1:
                gamma[m, :, 0] = _log_odds(floor_normalize(w.sum(axis=0), ctrl.floor))
            else:
                gamma[m] = mstep_logistic(data.Z_low, w, gamma[m], ctrl.newton_steps)
    if update_high and struct.M > 1:
        if struct.K_high == 1:
            alpha[:, 0] = _log_odds(floor_normalize(post.pw.sum(axis=0), ctrl.floor))
        else:
            alpha = mstep_logistic(data.Z_high, post.pw, alpha, ctrl.newton_steps)
    return StructuralParams(gamma, alpha)


def run_em(
    data,
    phi: MeasurementParams,
    struct: StructuralParams,
    ctrl: EmControl = EmControl(),
    *,
    update_phi=True,
    update_low=True,
    update_high=True,
    label="em",
) -> EmResult:
    one_hot = stacked_one_hot(data)
    logb = _stacked_logb(one_hot, phi)
    post = compute_posteriors(data, phi, struct, logb)
    history = [post.loglik]
    converged = False
    it = 0
    for it in range(1, ctrl.max_iter + 1):
        if update_phi:
            phi = mstep_phi(post.px, one_hot, data.n_categories, ctrl.floor)
            logb = _stacked_logb(one_hot, phi)
        struct = mstep_structural(data, post, struct, ctrl, update_low, update_high)
        post = compute_posteriors(data, phi, struct, logb)
        ll, prev = post.loglik, history[-1]
        if ll < prev - ctrl.slack:
            raise MonotonicityError(f"{label}: log-likelihood fell from {prev!r} to {ll!r} at iteration {it}")
        history.append(ll)
        log.debug("%s iter %d ll %.6f", label, it, ll)
        if abs(ll - prev) / (1.0 + abs(ll)) < ctrl.tol:
            converged = True
            break
    trace = EmTrace(it, history[0], history[-1], converged, history)
    log.info("%s: %d iterations, ll %.4f -> %.4f%s", label, it, history[0], history[-1], "" if converged else " (not converged)")
    return EmResult(phi, struct, post, trace)


# --- public engines ---------------------------------------------------------


def em_single_measurement(data, phi0: MeasurementParams, class_props0, ctrl: EmControl = EmControl()) -> EmResult:
    """Single-level LC model without covariates; groups are ignored."""
    flat = data.intercept_only()
    struct0 = StructuralParams.from_probabilities([1.0], np.atleast_2d(class_props0))
    return run_em(flat, phi0, struct0, ctrl, label="single-level measurement")


def em_multilevel_measurement(
    data,
    phi0: MeasurementParams,
    omega0,
    pi0,
    ctrl: EmControl = EmControl(),
    *,
    update_phi=True,
    update_omega=True,
) -> EmResult:
    """Multilevel LC model without covariates (``phi``, ``omega``, ``pi``)."""
    flat = data.intercept_only()
    struct0 = StructuralParams.from_probabilities(omega0, pi0)
    return run_em(
        flat,
        phi0,
        struct0,
        ctrl,
        update_phi=update_phi,
        update_high=update_omega,
        label="multilevel measurement",
    )


def em_structural(data, phi_fixed: MeasurementParams, struct0: StructuralParams, ctrl: EmControl = EmControl()) -> EmResult:
    """Maximise the structural log-likelihood with response probabilities held fixed."""
    return run_em(data, phi_fixed, struct0, ctrl, update_phi=False, label="structural")


def em_one_step(data, phi0: MeasurementParams, struct0: StructuralParams, ctrl: EmControl = EmControl()) -> EmResult:
    """Joint EM over response probabilities and structural coefficients."""
    return run_em(data, phi0, struct0, ctrl, update_phi=True, label="one-step")
