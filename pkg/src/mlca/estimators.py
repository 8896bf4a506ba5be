"""One-step, two-step and two-stage estimation with structural inference."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import MeasurementParams, ModelSpec, Posteriors, StructuralParams, compute_posteriors, item_logdensity
from .criteria import (
    ClassificationStats,
    InformationCriteria,
    classification_stats,
    count_parameters,
    information_criteria,
)
from .data import Dataset, filter_for_structural
from .em import EmControl, EmResult, EmTrace, em_multilevel_measurement, em_one_step, em_structural, run_em
from .errors import EstimationError
from .init import init_measurement, init_structural, stage_plan_two_stage

log = logging.getLogger(__name__)

STARS = ((0.01, "***"), (0.05, "**"), (0.1, "*"))


def stars(p) -> str:
    for cut, mark in STARS:
        if p < cut:
            return mark
    return ""


@dataclass(frozen=True)
class Inference:
    names: list
    estimate: np.ndarray
    vcov: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray


@dataclass(eq=False)
class FitResult:
    spec: ModelSpec
    data: Dataset  # the (structural) dataset the final step was fitted on
    phi: MeasurementParams
    structural: StructuralParams
    posteriors: Posteriors
    trace: EmTrace
    ic: InformationCriteria
    class_stats: ClassificationStats
    omega_avg: np.ndarray  # sample mean of P(W = m | Z*_j)
    pi_avg: np.ndarray  # M x T, sample mean of P(X = t | W = m, Z_ij)
    class_avg: np.ndarray  # sample mean of the marginal P(X = t | Z)
    inference: Inference | None = None
    stages: dict = field(default_factory=dict)

    @property
    def loglik(self) -> float:
        return self.trace.ll_last

    @property
    def T(self) -> int:
        return self.spec.T

    @property
    def M(self) -> int:
        return self.spec.M


# --- inference --------------------------------------------------------------


def structural_score(data, phi, struct: StructuralParams, post: Posteriors | None = None) -> np.ndarray:
    """Gradient of the log-likelihood w.r.t. the flattened structural coefficients.

    By Fisher's identity it is the expected complete-data score under the
    current posteriors.
    """
    if post is None:
        post = compute_posteriors(data, phi, struct)
    gamma = np.zeros_like(struct.gamma)
    log_pi = struct.log_pi(data.Z_low)
    W = post.pw[data.group]  # (N, M)
    for m in range(struct.M):
        resid = post.joint[:, 1:, m] - W[:, m : m + 1] * np.exp(log_pi[:, m, 1:])
        gamma[m] = resid.T @ data.Z_low
    omega = np.exp(struct.log_omega(data.Z_high))
    alpha = (post.pw[:, 1:] - omega[:, 1:]).T @ data.Z_high
    return np.concatenate([gamma.ravel(), alpha.ravel()])


def observed_information(data, phi, struct: StructuralParams) -> np.ndarray:
    """Negative Hessian by central differences of the analytic score."""
    theta = struct.flatten()
    P = theta.size
    logb = item_logdensity(data.Y, phi)
    hess = np.empty((P, P))
    for k in range(P):
        h = 1e-5 * (1.0 + abs(theta[k]))
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        s_up = structural_score(data, phi, struct.unflatten(up), compute_posteriors(data, phi, struct.unflatten(up), logb))
        s_dn = structural_score(data, phi, struct.unflatten(down), compute_posteriors(data, phi, struct.unflatten(down), logb))
        hess[:, k] = (s_up - s_dn) / (2 * h)
    hess = 0.5 * (hess + hess.T)
    return -hess


def _normal_two_sided(z):
    return np.array([math.erfc(abs(v) / math.sqrt(2.0)) if np.isfinite(v) else np.nan for v in np.atleast_1d(z)])


def vcov_structural(data, phi, struct: StructuralParams, z_names=None, zh_names=None) -> Inference:
    """Naive observed-information standard errors for the structural step.

    Response probabilities are treated as known (no step-1 correction).
    """
    info = observed_information(data, phi, struct)
    est = struct.flatten()
    names = struct.names(z_names or data.z_names, zh_names or data.zh_names)
    if est.size == 0:
        empty = np.zeros(0)
        return Inference(names, est, np.zeros((0, 0)), empty, empty, empty)
    try:
        eig = np.linalg.eigvalsh(info)
        if eig.min() <= 1e-10 * max(1.0, eig.max()):
            raise np.linalg.LinAlgError("information not positive definite")
        vcov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        warnings.warn("structural information matrix is rank deficient; using the pseudo-inverse", RuntimeWarning)
        vcov = np.linalg.pinv(info, hermitian=True)
    vcov = 0.5 * (vcov + vcov.T)
    var = np.diag(vcov)
    se = np.where(var > 0, np.sqrt(np.clip(var, 0, None)), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = est / se
    return Inference(names, est, vcov, se, z, _normal_two_sided(z))


# --- fit assembly -----------------------------------------------------------


def _summaries(data, phi, struct, post):
    log_pi = struct.log_pi(data.Z_low)  # (N, M, T)
    omega = np.exp(struct.log_omega(data.Z_high))  # (J, M)
    pi_unit = np.exp(log_pi)
    prior_low = np.einsum("im,imt->it", omega[data.group], pi_unit)
    return omega.mean(axis=0), pi_unit.mean(axis=0), prior_low.mean(axis=0), omega.mean(axis=0)


def assemble(spec, data, phi, struct, em, stages, inference=True) -> FitResult:
    post = em.posteriors
    omega_avg, pi_avg, class_avg, high_prior = _summaries(data, phi, struct, post)
    err_lo, r2_lo, ent_lo = classification_stats(post.px, class_avg)
    err_hi, r2_hi, ent_hi = classification_stats(post.pw, high_prior)
    stats = ClassificationStats(err_lo, r2_lo, ent_lo, err_hi, r2_hi, ent_hi)
    npar = count_parameters(data.n_categories, spec.T, spec.M, struct.K, struct.K_high)
    ic = information_criteria(post.loglik, npar, data.N, data.J, ent_lo, ent_hi)
    inf = vcov_structural(data, phi, struct) if inference else None
    return FitResult(
        spec=spec,
        data=data,
        phi=phi,
        structural=struct,
        posteriors=post,
        trace=em.trace,
        ic=ic,
        class_stats=stats,
        omega_avg=omega_avg,
        pi_avg=pi_avg,
        class_avg=class_avg,
        inference=inf,
        stages=stages,
    )


def _structural_data(data: Dataset) -> Dataset:
    if data.has_low_covariates or data.has_high_covariates:
        return filter_for_structural(data)
    return data.intercept_only()


def _step1(data, spec, ctrl, seed):
    meas = data.intercept_only()
    bundle = init_measurement(meas, spec.T, spec.M, spec.init_method, seed, ctrl)
    if spec.M == 1:
        return bundle, bundle.single_level
    return bundle, em_multilevel_measurement(meas, bundle.phi0, bundle.omega0, bundle.pi0, ctrl)


def _step2(data, spec, phi, step1_struct, ctrl):
    sdata = _structural_data(data)
    start = init_structural(step1_struct.omega, step1_struct.pi, sdata.Z_low.shape[1], sdata.Z_high.shape[1])
    if start.K == 1 and start.K_high == 1:
        # without covariates the structural model only re-expresses step 1
        post = compute_posteriors(sdata, phi, start)
        trace = EmTrace(0, post.loglik, post.loglik, True, [post.loglik])
        return sdata, EmResult(phi, start, post, trace)
    try:
        return sdata, em_structural(sdata, phi, start, ctrl)
    except EstimationError as exc:
        raise EstimationError(f"structural step: {exc}") from exc


def fit_two_step(data: Dataset, spec: ModelSpec, ctrl: EmControl = EmControl(), seed=0, inference=True) -> FitResult:
    """Measurement model first, then the structural model with ``phi`` fixed."""
    spec.check(data)
    try:
        _, step1 = _step1(data, spec, ctrl, seed)
    except EstimationError as exc:
        raise EstimationError(f"step 1: {exc}") from exc
    sdata, step2 = _step2(data, spec, step1.phi, step1.structural, ctrl)
    stages = {"step1": step1.trace, "step2": step2.trace}
    return assemble(spec, sdata, step1.phi, step2.structural, step2, stages, inference)


def fit_one_step(data: Dataset, spec: ModelSpec, ctrl: EmControl = EmControl(), seed=0, inference=True) -> FitResult:
    """Simultaneous ML, started from the two-step estimates.

    Starting at the two-step solution means the one-step log-likelihood can
    only end at or above it.
    """
    two = fit_two_step(data, spec, ctrl, seed, inference=False)
    try:
        em = em_one_step(two.data, two.phi, two.structural, ctrl)
    except EstimationError as exc:
        raise EstimationError(f"one-step: {exc}") from exc
    stages = dict(two.stages)
    stages["one_step"] = em.trace
    return assemble(spec, two.data, em.phi, em.structural, em, stages, inference)


def fit_two_stage(data: Dataset, spec: ModelSpec, ctrl: EmControl = EmControl(), seed=0, inference=True) -> FitResult:
    """Stage 1a single-level fit, 1b multilevel fit with ``phi`` fixed,
    optional 1c refit with ``omega`` fixed, then the structural stage."""
    spec.check(data)
    meas = data.intercept_only()
    plan = stage_plan_two_stage(spec.M, spec.interaction)
    stages = {}
    try:
        bundle = init_measurement(meas, spec.T, spec.M, spec.init_method, seed, ctrl)
        current = bundle.single_level
        stages["1a"] = current.trace
        if "1b" in plan:
            current = em_multilevel_measurement(meas, bundle.phi0, bundle.omega0, bundle.pi0, ctrl, update_phi=False)
            stages["1b"] = current.trace
        if "1c" in plan:
            current = run_em(meas, current.phi, current.structural, ctrl, update_high=False, label="stage 1c")
            stages["1c"] = current.trace
    except EstimationError as exc:
        raise EstimationError(f"stage 1: {exc}") from exc
    sdata, step2 = _step2(data, spec, current.phi, current.structural, ctrl)
    stages["2"] = step2.trace
    return assemble(spec, sdata, current.phi, step2.structural, step2, stages, inference)


def fit(data: Dataset, spec: ModelSpec, ctrl: EmControl = EmControl(), seed=0, inference=True) -> FitResult:
    fn = {"one_step": fit_one_step, "two_step": fit_two_step, "two_stage": fit_two_stage}[spec.estimator]
    return fn(data, spec, ctrl, seed, inference)
