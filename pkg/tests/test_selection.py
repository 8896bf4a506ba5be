import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlca.criteria import classification_stats, count_parameters, information_criteria
from mlca.errors import EstimationError
from mlca.numerics import shannon_entropy
from mlca.selection import TABLE_COLUMNS, _pick, cell_seed, select_sequential, select_simultaneous, table_to_csv
from mlca.simulate import baseline_truth, generate


@pytest.fixture(scope="module")
def small_sim():
    return generate(baseline_truth(covariate=False), 12, 60, seed=21)


def test_npar_examples():
    assert count_parameters([2] * 7, 1) == 7
    # twelve binary items, three classes, single level
    assert count_parameters([2] * 12, 3) == 38
    assert count_parameters([2] * 12, 3, 2, 3, 2) == 36 + 12 + 2
    assert count_parameters([3, 4], 2, 3) == (2 + 3) * 2 + 3 + 2


@given(
    ll=st.floats(-1e6, 0),
    npar=st.integers(1, 200),
    N=st.integers(2, 10**6),
    J=st.integers(2, 1000),
    e_lo=st.floats(0, 1e4),
    e_hi=st.floats(0, 1e3),
)
def test_criteria_identities(ll, npar, N, J, e_lo, e_hi):
    ic = information_criteria(ll, npar, N, J, e_lo, e_hi)
    assert ic.aic == pytest.approx(-2 * ll + 2 * npar)
    assert ic.bic_low == pytest.approx(-2 * ll + npar * math.log(N))
    assert ic.bic_high == pytest.approx(-2 * ll + npar * math.log(J))
    assert ic.icl_bic_low == pytest.approx(ic.bic_low + 2 * e_lo)
    assert ic.icl_bic_high == pytest.approx(ic.bic_high + 2 * e_hi)
    assert ic.icl_bic_low >= ic.bic_low and ic.icl_bic_high >= ic.bic_high


def test_t1_aic():
    ic = information_criteria(-100.0, count_parameters([2] * 5, 1), 50, 1)
    assert ic.aic == -2 * -100.0 + 2 * 5


def test_classification_stats_degenerate():
    P = np.eye(3)[[0, 1, 2, 2, 0]]
    err, r2, ent = classification_stats(P)
    assert err == 0.0 and r2 == 1.0 and ent == 0.0


def test_classification_stats_uniform():
    P = np.full((10, 3), 1 / 3)
    err, r2, ent = classification_stats(P, np.full(3, 1 / 3))
    assert err == pytest.approx(2 / 3)
    assert r2 == pytest.approx(0.0, abs=1e-12)
    assert ent == pytest.approx(10 * math.log(3))


def test_classification_stats_single_class_prior():
    err, r2, _ = classification_stats(np.ones((4, 1)), np.ones(1))
    assert err == 0.0 and r2 == 1.0


@given(st.lists(st.lists(st.floats(0.01, 1), min_size=3, max_size=3), min_size=1, max_size=30))
def test_classification_stats_ranges(rows):
    P = np.array(rows)
    P /= P.sum(axis=1, keepdims=True)
    err, r2, ent = classification_stats(P)
    assert 0 <= err <= 2 / 3 + 1e-12
    assert r2 <= 1 + 1e-12
    assert ent == pytest.approx(float(np.sum(shannon_entropy(P, axis=1))))


def test_pick_ties_go_to_smaller_cells():
    class R:
        def __init__(self, v):
            self.v = v

    cells = {(3, 2): R(1.0), (2, 2): R(1.0), (2, 1): R(1.0), (1, 1): R(5.0), (4, 1): RuntimeError("x")}
    assert _pick(cells, lambda r: r.v) == (2, 1)
    with pytest.raises(EstimationError):
        _pick({(1, 1): RuntimeError("x")}, lambda r: r.v)


def test_cell_seed():
    assert cell_seed(0, 3, 2) == cell_seed(0, 3, 2)
    seeds = {cell_seed(s, T, M) for s in range(3) for T in range(1, 5) for M in range(1, 4)}
    assert len(seeds) == 36


def test_simultaneous_grid_and_workers(small_sim):
    d = small_sim.dataset
    one = select_simultaneous(d, range(1, 4), range(1, 3), seed=5, workers=1)
    four = select_simultaneous(d, range(1, 4), range(1, 3), seed=5, workers=4)
    assert len(one.table) == 6
    assert [(r["T"], r["M"]) for r in one.table] == [(T, M) for T in (1, 2, 3) for M in (1, 2)]
    assert table_to_csv(one.table) == table_to_csv(four.table)
    assert one.winner == four.winner
    best = min(one.table, key=lambda r: (r["bic_low"], r["T"], r["M"]))
    assert one.winner == (best["T"], best["M"])


def test_sequential_steps(small_sim):
    d = small_sim.dataset
    sel = select_sequential(d, range(1, 4), range(1, 3), seed=5)
    steps = [r["step"] for r in sel.table]
    assert steps == [1, 1, 1, 2, 2, 3, 3, 3]
    T_star = min((r for r in sel.table if r["step"] == 1), key=lambda r: r["bic_low"])["T"]
    assert all(r["T"] == T_star for r in sel.table if r["step"] == 2)
    M_star = min((r for r in sel.table if r["step"] == 2), key=lambda r: r["bic_high"])["M"]
    assert all(r["M"] == M_star for r in sel.table if r["step"] == 3)
    assert sel.winner[1] == M_star
    assert sel.best.T == sel.winner[0] and sel.best.M == sel.winner[1]
    again = select_sequential(d, range(1, 4), range(1, 3), seed=5)
    assert table_to_csv(again.table) == table_to_csv(sel.table)


def test_cells_agree_across_strategies(small_sim):
    d = small_sim.dataset
    seq = select_sequential(d, range(1, 3), range(1, 3), seed=9)
    sim = select_simultaneous(d, range(1, 3), range(1, 3), seed=9)
    by_cell = {(r["T"], r["M"]): r["ll"] for r in sim.table}
    for r in seq.table:
        assert r["ll"] == by_cell[(r["T"], r["M"])]


def test_singleton_ranges(small_sim):
    sel = select_simultaneous(small_sim.dataset, [1], [1])
    assert sel.winner == (1, 1) and len(sel.table) == 1
    sel = select_sequential(small_sim.dataset, [1], [1])
    assert sel.winner == (1, 1)


def test_single_level_collapse(small_sim):
    d = small_sim.dataset
    sel = select_sequential(d, range(1, 5), [1], seed=1)
    step1 = [r for r in sel.table if r["step"] == 1]
    assert sel.winner == (min(step1, key=lambda r: r["bic_low"])["T"], 1)


def test_all_cells_failing(small_sim):
    with pytest.raises(EstimationError):
        select_simultaneous(small_sim.dataset, [2], [20])


def test_empty_ranges(small_sim):
    with pytest.raises(ValueError):
        select_simultaneous(small_sim.dataset, [], [1])


def test_table_csv_columns(small_sim):
    sel = select_simultaneous(small_sim.dataset, [1, 2], [1])
    lines = table_to_csv(sel.table).splitlines()
    assert lines[0] == ",".join(TABLE_COLUMNS)
    assert len(lines) == 3


def test_minus_two_ll_nonincreasing_in_t(small_sim):
    sel = select_simultaneous(small_sim.dataset, range(1, 5), [1])
    ll = [r["ll"] for r in sel.table]
    assert all(b >= a - 1e-6 for a, b in zip(ll, ll[1:]))
