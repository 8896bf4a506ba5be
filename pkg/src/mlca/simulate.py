"""Synthetic data from any supported model specification.

Random streams: ``SeedSequence(seed).spawn(J + 1)``. Child 0 draws the
high-level covariates and then ``W`` for all groups; child ``j + 1`` serves
group ``j`` and draws, in order, the unit covariates (column by column), one
uniform per unit for ``X`` and a ``n_j x H`` block of uniforms for the items.
Categorical draws use the inverse CDF, so the stream layout is fixed by the
data shape alone.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .core import MeasurementParams, StructuralParams, logistic_probs
from .data import INTERCEPT, Dataset, ItemSchema
from .errors import DataError


@dataclass(frozen=True)
class CovariateSpec:
    name: str
    dist: str = "normal"  # "normal" | "bernoulli" | "fixed"
    mean: float = 0.0
    sd: float = 1.0
    p: float = 0.5
    value: float = 0.0

    def draw(self, rng, size):
        if self.dist == "normal":
            return rng.normal(self.mean, self.sd, size)
        if self.dist == "bernoulli":
            return (rng.random(size) < self.p).astype(float)
        if self.dist == "fixed":
            return np.full(size, float(self.value))
        raise DataError(f"unknown covariate distribution {self.dist!r}")


@dataclass(frozen=True, eq=False)
class TrueModel:
    phi: MeasurementParams
    structural: StructuralParams
    low_covariates: tuple = ()
    high_covariates: tuple = ()
    item_names: tuple = field(default=())

    def __post_init__(self):
        if self.phi.T != self.structural.T:
            raise DataError("phi and structural parameters disagree on T")
        if self.structural.K != 1 + len(self.low_covariates):
            raise DataError("gamma needs one column per low-level covariate plus the intercept")
        if self.structural.K_high != 1 + len(self.high_covariates):
            raise DataError("alpha needs one column per high-level covariate plus the intercept")
        if not self.item_names:
            object.__setattr__(self, "item_names", tuple(f"y{h + 1}" for h in range(self.phi.H)))

    @property
    def T(self):
        return self.phi.T

    @property
    def M(self):
        return self.structural.M


@dataclass(frozen=True, eq=False)
class SimulatedData:
    dataset: Dataset
    X: np.ndarray  # true low-level class per unit, 0-based
    W: np.ndarray  # true high-level class per group, 0-based


def _categorical(probs, u):
    """Row-wise inverse-CDF draw: ``probs`` is ``n x C``, ``u`` is length ``n``."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    return (u[:, None] >= cdf).sum(axis=1)


def generate(truth: TrueModel, J: int, n_j, seed: int = 0) -> SimulatedData:
    n_j = np.broadcast_to(np.asarray(n_j, dtype=np.int64), (J,))
    if J < 1 or (n_j < 1).any():
        raise DataError("need J >= 1 groups with at least one unit each")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(J + 1)]
    top = streams[0]

    Zh = np.ones((J, 1 + len(truth.high_covariates)))
    for k, cov in enumerate(truth.high_covariates):
        Zh[:, k + 1] = cov.draw(top, J)
    omega = np.exp(truth.structural.log_omega(Zh))
    W = _categorical(omega, top.random(J))

    H = truth.phi.H
    Ys, Xs, Zs, groups = [], [], [], []
    for j in range(J):
        rng = streams[j + 1]
        n = int(n_j[j])
        Z = np.ones((n, 1 + len(truth.low_covariates)))
        for k, cov in enumerate(truth.low_covariates):
            Z[:, k + 1] = cov.draw(rng, n)
        pi = logistic_probs(truth.structural.gamma[W[j]], Z)
        X = _categorical(np.atleast_2d(pi), rng.random(n))
        U = rng.random((n, H))
        Y = np.empty((n, H), dtype=np.int64)
        for h, p in enumerate(truth.phi.phi):
            Y[:, h] = _categorical(p[X], U[:, h])
        Ys.append(Y)
        Xs.append(X)
        Zs.append(Z)
        groups.append(np.full(n, j))

    items = tuple(ItemSchema(name, tuple(range(p.shape[1]))) for name, p in zip(truth.item_names, truth.phi.phi))
    multilevel = J > 1 or truth.M > 1
    data = Dataset(
        Y=np.vstack(Ys),
        items=items,
        group=np.concatenate(groups),
        Z_low=np.vstack(Zs),
        Z_high=Zh,
        z_names=(INTERCEPT,) + tuple(c.name for c in truth.low_covariates),
        zh_names=(INTERCEPT,) + tuple(c.name for c in truth.high_covariates),
        group_labels=tuple(f"g{j + 1}" for j in range(J)) if multilevel else None,
    )
    return SimulatedData(data, np.concatenate(Xs), W)


def to_frame(sim: SimulatedData) -> pd.DataFrame:
    d = sim.dataset
    cols = {}
    if d.group_labels is not None:
        cols["group"] = [d.group_labels[g] for g in d.group]
    for h, item in enumerate(d.items):
        cols[item.name] = d.Y[:, h]
    for k, name in enumerate(d.z_names[1:], start=1):
        cols[name] = d.Z_low[:, k]
    for k, name in enumerate(d.zh_names[1:], start=1):
        cols[name] = d.Z_high[d.group, k]
    return pd.DataFrame(cols)


def latent_frame(sim: SimulatedData) -> pd.DataFrame:
    d = sim.dataset
    out = {"row": np.arange(d.N) + 1}
    if d.group_labels is not None:
        out["group"] = [d.group_labels[g] for g in d.group]
        out["W"] = sim.W[d.group] + 1
    out["X"] = sim.X + 1
    return pd.DataFrame(out)


def write_csv(sim: SimulatedData, path) -> tuple[Path, Path]:
    """Write the dataset CSV and a ``<stem>.latent.csv`` sidecar with true classes."""
    path = Path(path)
    to_frame(sim).to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    side = path.with_name(path.stem + ".latent.csv")
    latent_frame(sim).to_csv(side, index=False, lineterminator="\n")
    return path, side


def truth_from_dict(doc: dict) -> TrueModel:
    """Parse a truth description.

    Keys: ``phi`` (``H x T`` matrix of ``P(Y=1|t)`` for binary items) or
    ``items`` (list of ``{"name", "probs": T x C}``); either ``gamma``
    (``M x (T-1) x K``) and ``alpha`` (``(M-1) x K*``) or intercept-only
    ``pi`` (``M x T``) and ``omega``; optional ``low_covariates`` and
    ``high_covariates`` lists of ``{"name", "dist", ...}``.
    """
    try:
        if "items" in doc:
            phi = MeasurementParams(tuple(np.asarray(it["probs"], dtype=float) for it in doc["items"]))
            names = tuple(it.get("name", f"y{h + 1}") for h, it in enumerate(doc["items"]))
        else:
            phi = MeasurementParams.from_binary(doc["phi"])
            names = tuple(doc.get("item_names", ()))
        low = tuple(CovariateSpec(**c) for c in doc.get("low_covariates", []))
        high = tuple(CovariateSpec(**c) for c in doc.get("high_covariates", []))
        if "gamma" in doc:
            gamma = np.asarray(doc["gamma"], dtype=float)
            alpha = np.asarray(doc.get("alpha", np.zeros((0, 1 + len(high)))), dtype=float)
            alpha = alpha.reshape(gamma.shape[0] - 1, 1 + len(high))
            struct = StructuralParams(gamma, alpha)
        else:
            pi = np.atleast_2d(np.asarray(doc["pi"], dtype=float))
            omega = np.asarray(doc.get("omega", [1.0]), dtype=float)
            struct = StructuralParams.from_probabilities(omega, pi, 1 + len(low), 1 + len(high))
        return TrueModel(phi, struct, low, high, names)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed truth description: {exc}") from exc


def truth_to_dict(truth: TrueModel) -> dict:
    """Inverse of ``truth_from_dict`` (always the ``items``/``gamma`` form)."""
    return {
        "items": [{"name": n, "probs": p.tolist()} for n, p in zip(truth.item_names, truth.phi.phi)],
        "gamma": truth.structural.gamma.tolist(),
        "alpha": truth.structural.alpha.tolist(),
        "low_covariates": [dataclasses.asdict(c) for c in truth.low_covariates],
        "high_covariates": [dataclasses.asdict(c) for c in truth.high_covariates],
    }


def load_truth(path) -> TrueModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read truth file {path}: {exc}") from exc
    return truth_from_dict(doc)


def baseline_truth(covariate=True) -> TrueModel:
    """Three low-level and two high-level classes, ten binary items.

    Response probabilities are 0.15 or 0.85; with ``covariate`` the
    low-level logits depend on one standard-normal covariate ``x``.
    """
    hi, lo = 0.85, 0.15
    phi = np.array(
        [
            [hi, hi, lo],
            [hi, hi, lo],
            [hi, lo, lo],
            [hi, lo, lo],
            [hi, lo, hi],
            [hi, lo, hi],
            [lo, hi, hi],
            [lo, hi, hi],
            [hi, hi, hi],
            [lo, hi, lo],
        ]
    )
    pi = np.array([[0.4, 0.35, 0.25], [0.25, 0.35, 0.4]])
    gamma = np.zeros((2, 2, 2 if covariate else 1))
    gamma[:, :, 0] = np.log(pi[:, 1:] / pi[:, :1])
    if covariate:
        gamma[:, :, 1] = [[0.5, -0.5], [-0.4, 0.6]]
    struct = StructuralParams(gamma, np.array([[np.log(0.45 / 0.55)]]))
    low = (CovariateSpec("x", "normal", 0.0, 1.0),) if covariate else ()
    return TrueModel(MeasurementParams.from_binary(phi), struct, low, ())


def align_low(phi_est: MeasurementParams, phi_true: MeasurementParams) -> tuple:
    """Permutation ``perm`` (estimated class ``perm[k]`` is true class ``k``)
    minimising the summed total-variation distance between class profiles."""
    T = phi_true.T
    cost = np.zeros((T, T))
    for pe, pt in zip(phi_est.phi, phi_true.phi):
        cost += 0.5 * np.abs(pt[:, None, :] - pe[None, :, :]).sum(axis=2)
    return min(itertools.permutations(range(T)), key=lambda p: sum(cost[k, p[k]] for k in range(T)))


def align_high(pw, W_true) -> tuple:
    """Permutation of high-level classes maximising modal agreement with ``W_true``."""
    M = pw.shape[1]
    modal = np.argmax(pw, axis=1)
    return max(itertools.permutations(range(M)), key=lambda p: sum(np.sum((modal == p[k]) & (W_true == k)) for k in range(M)))
