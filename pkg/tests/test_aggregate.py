import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlca.aggregate import GroupProfile, group_class_proportions, group_profiles, modal_assignments, profiles_to_csv
from mlca.errors import DataError


def test_single_unit_group():
    px = np.array([[0.2, 0.5, 0.3], [0.1, 0.1, 0.8]])
    prof = group_class_proportions(px, ["a", "b"], "b")
    np.testing.assert_array_equal(prof.proportions, px[1])
    assert prof.n == 1


def test_two_unit_mean():
    prof = group_class_proportions(np.array([[1.0, 0, 0], [0, 1.0, 0]]), ["g", "g"], "g")
    np.testing.assert_allclose(prof.proportions, [0.5, 0.5, 0.0])


def test_unknown_label():
    with pytest.raises(DataError):
        group_class_proportions(np.ones((2, 1)), ["a", "a"], "ITA")


def test_profile_must_sum_to_one():
    with pytest.raises(ValueError):
        GroupProfile("x", np.array([0.5, 0.4]), 3)


@given(st.integers(0, 10**6), st.integers(1, 40), st.integers(1, 5), st.integers(1, 4))
def test_weighted_mean_of_profiles(seed, N, J, T):
    rng = np.random.default_rng(seed)
    px = rng.dirichlet(np.ones(T), size=N)
    labels = [f"g{v}" for v in rng.integers(0, J, size=N)]
    profs = group_profiles(px, labels)
    assert sum(p.n for p in profs) == N
    mean = sum(p.n / N * p.proportions for p in profs)
    np.testing.assert_allclose(mean, px.mean(axis=0), atol=1e-10)
    assert [p.label for p in profs] == list(dict.fromkeys(labels))


def test_profiles_csv():
    profs = group_profiles(np.array([[0.25, 0.75], [1.0, 0.0]]), ["b", "a"])
    assert profiles_to_csv(profs).splitlines() == ["group,n,C1,C2", "b,1,0.25,0.75", "a,1,1.0,0.0"]


def test_modal_examples():
    P = np.array([[0.2478, 0.7521, 0.0001], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    # 0-based labels: class 2, class 1 (tie), class 3
    np.testing.assert_array_equal(modal_assignments(P), [1, 0, 2])


@given(st.integers(0, 10**6), st.sampled_from(["log", "sqrt", "affine", "cube"]))
def test_modal_invariant_under_increasing_maps(seed, kind):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(4), size=20)
    P[0] = [0.25, 0.25, 0.25, 0.25]
    f = {"log": np.log, "sqrt": np.sqrt, "affine": lambda x: 3 * x + 1, "cube": lambda x: x**3}[kind]
    np.testing.assert_array_equal(modal_assignments(f(P)), modal_assignments(P))


def test_modal_from_posteriors(baseline_sim):
    from mlca.core import ModelSpec
    from mlca.estimators import fit_two_step

    res = fit_two_step(baseline_sim.dataset, ModelSpec(3, 2), inference=False)
    low = modal_assignments(res.posteriors)
    high = modal_assignments(res.posteriors, "high")
    assert low.shape == (5000,) and high.shape == (50,)
    with pytest.raises(ValueError):
        modal_assignments(res.posteriors, "middle")
