import numpy as np
import pytest

from oracles import chi2_upper

from mlca.core import MeasurementParams, ModelSpec, StructuralParams
from mlca.data import load_dataset
from mlca.errors import DataError
from mlca.estimators import fit_two_step
from mlca.simulate import (
    CovariateSpec,
    TrueModel,
    baseline_truth,
    generate,
    load_truth,
    truth_from_dict,
    truth_to_dict,
    write_csv,
)


def test_determinism(tmp_path):
    truth = baseline_truth()
    a = write_csv(generate(truth, 5, 30, seed=7), tmp_path / "a.csv")
    b = write_csv(generate(truth, 5, 30, seed=7), tmp_path / "b.csv")
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[1].read_bytes() == b[1].read_bytes()
    c = write_csv(generate(truth, 5, 30, seed=8), tmp_path / "c.csv")
    assert a[0].read_bytes() != c[0].read_bytes()


def test_single_class_frequencies_within_three_se():
    probs = [[0.2, 0.5, 0.3], [0.9, 0.1]]
    truth = TrueModel(MeasurementParams(tuple(np.array([p]) for p in probs)), StructuralParams(np.zeros((1, 0, 1)), np.zeros((0, 1))))
    sim = generate(truth, 1, 20000, seed=3)
    N = sim.dataset.N
    for h, p in enumerate(probs):
        p = np.array(p)
        freq = np.bincount(sim.dataset.Y[:, h], minlength=p.size) / N
        assert (np.abs(freq - p) < 3 * np.sqrt(p * (1 - p) / N)).all()


def test_item_frequencies_given_x_pass_chi_square():
    truth = baseline_truth()
    sim = generate(truth, 100, 100, seed=2)
    stat, df = 0.0, 0
    for h, p in enumerate(truth.phi.phi):
        for t in range(truth.T):
            y = sim.dataset.Y[sim.X == t, h]
            expected = p[t] * y.size
            observed = np.bincount(y, minlength=p.shape[1])
            stat += float(np.sum((observed - expected) ** 2 / expected))
            df += p.shape[1] - 1
    assert stat < chi2_upper(df, 0.01)


def test_group_class_frequencies_within_three_se(baseline_sim):
    truth = baseline_truth()
    omega = np.exp(truth.structural.log_omega(np.ones((1, 1))))[0]
    J = baseline_sim.W.size
    freq = np.bincount(baseline_sim.W, minlength=truth.M) / J
    assert (np.abs(freq - omega) < 3 * np.sqrt(omega * (1 - omega) / J)).all()


def test_shapes(baseline_sim):
    d = baseline_sim.dataset
    assert d.N == 5000 and d.J == 50 and d.H == 10
    assert d.z_names[1:] == ("x",)
    assert (d.n_j == 100).all()


def test_degenerate_phi_recovery_is_exact():
    phi = MeasurementParams.from_binary([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    struct = StructuralParams.from_probabilities([1.0], [[0.6, 0.4]])
    sim = generate(TrueModel(phi, struct), 1, 500, seed=4)
    y0 = sim.dataset.Y[:, 0]
    np.testing.assert_array_equal(y0, sim.X)
    res = fit_two_step(sim.dataset, ModelSpec(2, 1), seed=0, inference=False)
    modal = np.argmax(res.posteriors.px, axis=1)
    assert (modal == sim.X).all() or (modal == 1 - sim.X).all()


def test_csv_round_trip(tmp_path):
    truth = TrueModel(
        baseline_truth().phi,
        StructuralParams(np.zeros((2, 2, 2)), np.array([[0.1, -0.3]])),
        (CovariateSpec("x", "bernoulli", p=0.3),),
        (CovariateSpec("g", "normal", 1.0, 2.0),),
    )
    sim = generate(truth, 6, [5, 6, 7, 8, 9, 10], seed=1)
    path, side = write_csv(sim, tmp_path / "sim.csv")
    d = load_dataset(path, [f"y{h + 1}" for h in range(10)], "group", ["x"], ["g"])
    np.testing.assert_array_equal(d.Y, sim.dataset.Y)
    np.testing.assert_array_equal(d.group, sim.dataset.group)
    np.testing.assert_array_equal(d.Z_low, sim.dataset.Z_low)
    np.testing.assert_array_equal(d.Z_high, sim.dataset.Z_high)
    latent = side.read_text().splitlines()
    assert latent[0] == "row,group,W,X" and len(latent) == d.N + 1


def test_truth_dict_round_trip(tmp_path):
    truth = baseline_truth()
    again = truth_from_dict(truth_to_dict(truth))
    np.testing.assert_array_equal(again.structural.gamma, truth.structural.gamma)
    for a, b in zip(again.phi.phi, truth.phi.phi):
        np.testing.assert_array_equal(a, b)
    a = generate(truth, 3, 10, seed=0).dataset.Y
    b = generate(again, 3, 10, seed=0).dataset.Y
    np.testing.assert_array_equal(a, b)


def test_truth_probability_form():
    t = truth_from_dict({"phi": [[0.1, 0.9]], "pi": [[0.3, 0.7], [0.6, 0.4]], "omega": [0.5, 0.5]})
    assert (t.T, t.M) == (2, 2)
    np.testing.assert_allclose(t.structural.pi, [[0.3, 0.7], [0.6, 0.4]])


@pytest.mark.parametrize("doc", [{}, {"phi": [[0.1, 0.9]]}, {"phi": [[1.5, 0.9]], "pi": [[0.5, 0.5]]}])
def test_malformed_truth(doc):
    with pytest.raises(DataError):
        truth_from_dict(doc)


def test_unreadable_truth(tmp_path):
    p = tmp_path / "t.json"
    p.write_text("{not json")
    with pytest.raises(DataError):
        load_truth(p)


def test_bad_sizes():
    with pytest.raises(DataError):
        generate(baseline_truth(), 0, 10)
