"""Sequential and simultaneous selection of the numbers of classes.

Every cell is a measurement-only two-step fit (covariates ignored) with a
seed derived from ``(seed, T, M)``, so a cell's result does not depend on
which strategy or how many workers computed it.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import ModelSpec
from .criteria import (  # noqa: F401  (re-exported)
    ClassificationStats,
    InformationCriteria,
    classification_stats,
    count_parameters,
    information_criteria,
)
from .em import EmControl
from .errors import EstimationError, MlcaError
from .estimators import FitResult, fit_two_step, vcov_structural

log = logging.getLogger(__name__)

TABLE_COLUMNS = ("T", "M", "ll", "npar", "bic_low", "bic_high", "aic", "icl_bic_low", "icl_bic_high", "converged")


@dataclass(eq=False)
class SelectionResult:
    best: FitResult
    table: list  # one dict per fitted cell, TABLE_COLUMNS plus "step" for sequential
    winner: tuple


def cell_seed(seed, T, M) -> int:
    return int(np.random.SeedSequence([int(seed), int(T), int(M)]).generate_state(1)[0])


def _fit_cell(data, T, M, ctrl, seed, init_method):
    spec = ModelSpec(T, M, init_method=init_method)
    try:
        return fit_two_step(data, spec, ctrl, cell_seed(seed, T, M), inference=False)
    except MlcaError as exc:
        log.warning("cell T=%d M=%d failed: %s", T, M, exc)
        return exc


def _row(T, M, res, step=None):
    row = {"T": T, "M": M}
    if isinstance(res, Exception):
        row.update({k: float("nan") for k in TABLE_COLUMNS[2:-1]})
        row["npar"] = -1
        row["converged"] = False
    else:
        ic = res.ic
        row.update(
            ll=ic.loglik,
            npar=ic.npar,
            bic_low=ic.bic_low,
            bic_high=ic.bic_high,
            aic=ic.aic,
            icl_bic_low=ic.icl_bic_low,
            icl_bic_high=ic.icl_bic_high,
            converged=bool(res.trace.converged),
        )
    if step is not None:
        row["step"] = step
    return row


def _pick(cells, key):
    ok = [(key(res), T, M) for (T, M), res in cells.items() if not isinstance(res, Exception)]
    if not ok:
        raise EstimationError("every candidate model failed")
    _, T, M = min(ok)
    return T, M


def _finish(data, cells, winner, table):
    best = cells[winner]
    flat = best.data
    best.inference = vcov_structural(flat, best.phi, best.structural)
    return SelectionResult(best, table, winner)


def select_sequential(data, T_range, M_range, ctrl: EmControl = EmControl(), seed=0, init_method="kmeans") -> SelectionResult:
    """Pick T by low-level BIC (single-level), then M by high-level BIC, then re-pick T."""
    T_range, M_range = sorted(set(T_range)), sorted(set(M_range))
    if not T_range or not M_range:
        raise ValueError("class ranges must be nonempty")
    data = data.intercept_only()
    cache, table = {}, []

    def run(T, M, step):
        if (T, M) not in cache:
            cache[(T, M)] = _fit_cell(data, T, M, ctrl, seed, init_method)
        table.append(_row(T, M, cache[(T, M)], step))
        return (T, M), cache[(T, M)]

    step1 = dict(run(T, 1, 1) for T in T_range)
    T_star, _ = _pick(step1, lambda r: r.ic.bic_low)
    step2 = dict(run(T_star, M, 2) for M in M_range)
    _, M_star = _pick(step2, lambda r: r.ic.bic_high)
    step3 = dict(run(T, M_star, 3) for T in T_range)
    winner = _pick(step3, lambda r: r.ic.bic_low)
    return _finish(data, cache, winner, table)


def select_simultaneous(
    data, T_range, M_range, ctrl: EmControl = EmControl(), seed=0, workers=1, init_method="kmeans"
) -> SelectionResult:
    """Fit every (T, M) cell; the lowest low-level BIC wins, ties to smaller T then M."""
    T_range, M_range = sorted(set(T_range)), sorted(set(M_range))
    if not T_range or not M_range:
        raise ValueError("class ranges must be nonempty")
    data = data.intercept_only()
    grid = [(T, M) for T in T_range for M in M_range]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _fit_cell(data, c[0], c[1], ctrl, seed, init_method), grid))
    else:
        results = [_fit_cell(data, T, M, ctrl, seed, init_method) for T, M in grid]
    cells = dict(zip(grid, results))
    table = [_row(T, M, res) for (T, M), res in cells.items()]
    winner = _pick(cells, lambda r: r.ic.bic_low)
    return _finish(data, cells, winner, table)


def table_to_csv(table) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in table:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
