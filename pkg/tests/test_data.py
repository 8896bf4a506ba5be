import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlca.data import (
    INTERCEPT,
    build_dataset,
    encode_covariates,
    encode_items,
    filter_for_structural,
    load_csv,
    load_dataset,
)
from mlca.errors import (
    DataError,
    DegenerateCovariateError,
    DegenerateItemError,
    EmptyStructuralDataError,
    MissingColumnError,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_one_row_csv(tmp_path):
    p = write(tmp_path, "a,b\n1,0\n")
    assert len(load_csv(p, ["a", "b"])) == 1


def test_missing_column_is_named(tmp_path):
    p = write(tmp_path, "obey,rights\n1,0\n")
    with pytest.raises(MissingColumnError) as exc:
        load_csv(p, ["obey", "party"])
    assert exc.value.column == "party"


def test_binary_identity_encoding():
    schemas, Y, miss = encode_items(pd.DataFrame({"a": [0, 1, 1, 0]}), ["a"])
    assert schemas[0].categories == (0, 1)
    assert Y[:, 0].tolist() == [0, 1, 1, 0]
    assert not miss.any()


def test_string_categories_sorted():
    schemas, Y, _ = encode_items(pd.DataFrame({"a": ["c", "a", "b", "a"]}), ["a"])
    assert schemas[0].categories == ("a", "b", "c")
    assert Y[:, 0].tolist() == [2, 0, 1, 0]


def test_missing_item_row_flagged(tmp_path):
    p = write(tmp_path, "a,b\n1,0\n0,\n1,1\nNA,0\n0,1\n")
    table = load_csv(p, ["a", "b"])
    _, Y, miss = encode_items(table, ["a", "b"])
    # direct scan of the raw text for empty / NA cells
    raw = [line.split(",") for line in p.read_text().splitlines()[1:]]
    expected = [any(c in ("", "NA") for c in row) for row in raw]
    assert miss.tolist() == expected
    assert Y.shape == (3, 2)


def test_degenerate_item():
    with pytest.raises(DegenerateItemError):
        encode_items(pd.DataFrame({"a": [1, 1, 1]}), ["a"])


def test_country_dummies():
    t = pd.DataFrame({"COUNTRY": ["ITA", "BGR", "CHL", "ITA"]})
    d = encode_covariates(t, ["COUNTRY"])
    assert d.names == (INTERCEPT, "COUNTRY.CHL", "COUNTRY.ITA")
    assert d.values[:, 2].tolist() == [1, 0, 0, 1]
    assert (d.values[:, 0] == 1).all()


def test_numeric_passthrough():
    t = pd.DataFrame({"female": [0, 1, 1], "log_gdp_constant": [9.1, 10.2, 8.7]})
    d = encode_covariates(t, ["female", "log_gdp_constant"])
    assert d.names == (INTERCEPT, "female", "log_gdp_constant")
    np.testing.assert_array_equal(d.values[:, 1:], t.to_numpy(dtype=float))


def test_constant_categorical_covariate():
    with pytest.raises(DegenerateCovariateError):
        encode_covariates(pd.DataFrame({"c": ["x", "x"]}), ["c"])


@given(st.lists(st.sampled_from(["u", "v", "w", "x"]), min_size=2, max_size=30).filter(lambda v: len(set(v)) > 1))
def test_dummy_expansion_shape(levels):
    d = encode_covariates(pd.DataFrame({"c": levels}), ["c"])
    L = len(set(levels))
    assert d.values.shape[1] == 1 + (L - 1)
    assert (d.values[:, 1:].sum(axis=1) <= 1).all()


@given(st.lists(st.lists(st.sampled_from(["p", "q", "r", None]), min_size=3, max_size=3), min_size=2, max_size=20))
def test_decode_round_trip(rows):
    table = pd.DataFrame(rows, columns=["a", "b", "c"])
    complete = table.dropna()
    if any(complete[c].nunique() < 2 for c in table.columns):
        return
    schemas, Y, miss = encode_items(table, ["a", "b", "c"])
    assert miss.tolist() == table.isna().any(axis=1).tolist()
    for h, s in enumerate(schemas):
        assert s.decode(Y[:, h]) == complete.iloc[:, h].tolist()


def ml_table():
    return pd.DataFrame(
        {
            "y1": [0, 1, 1, 0, 1, 0, 1, 0, 1, 1],
            "y2": [1, 1, 0, 0, 1, 0, 0, 1, 1, 0],
            "cid": ["B", "B", "A", "A", "A", "C", "C", "B", "A", "C"],
            "ed_mom": [1.0, np.nan, 0.0, 1.0, np.nan, 0.0, 1.0, 1.0, 0.0, 1.0],
            "gdp": [2.0, 2.0, 3.0, 3.0, 3.0, 1.0, 1.0, 2.0, 3.0, 1.0],
        }
    )


def test_groups_first_appearance_and_structural_filter():
    t = ml_table()
    d = build_dataset(t, ["y1", "y2"], "cid", ["ed_mom"], ["gdp"])
    assert d.group_labels == ("B", "A", "C")
    assert d.J == 3 and d.N == 10 and d.n_j.tolist() == [3, 4, 3]
    np.testing.assert_array_equal(d.Z_high[:, 1], [2.0, 3.0, 1.0])
    s = filter_for_structural(d)
    # direct scan: rows with ed_mom present
    assert s.N == int(t["ed_mom"].notna().sum()) == 8
    assert d.N == 10
    assert s.rows.tolist() == [i for i in range(10) if not np.isnan(t["ed_mom"][i])]
    assert not np.isnan(s.Z_low).any()


def test_no_missing_covariates_is_identity():
    t = ml_table().fillna(0.0)
    d = build_dataset(t, ["y1", "y2"], "cid", ["ed_mom"])
    assert filter_for_structural(d) is d


def test_group_dropped_when_all_rows_missing():
    t = ml_table()
    t.loc[t["cid"] == "C", "ed_mom"] = np.nan
    d = build_dataset(t, ["y1", "y2"], "cid", ["ed_mom"])
    s = filter_for_structural(d)
    assert s.J == 2 and s.group_labels == ("B", "A")
    assert s.n_j.sum() == s.N


def test_all_rows_missing_covariates():
    t = ml_table()
    t["ed_mom"] = np.nan
    d = build_dataset(t, ["y1", "y2"], "cid", ["ed_mom"])
    with pytest.raises(EmptyStructuralDataError):
        filter_for_structural(d)


def test_high_covariate_must_be_constant_within_group():
    t = ml_table()
    t.loc[0, "gdp"] = 9.0
    with pytest.raises(DataError):
        build_dataset(t, ["y1", "y2"], "cid", (), ["gdp"])


def test_high_covariates_need_group():
    with pytest.raises(DataError):
        build_dataset(ml_table(), ["y1", "y2"], None, (), ["gdp"])


def test_load_dataset_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    ml_table().to_csv(p, index=False)
    d = load_dataset(p, ["y1", "y2"], "cid", ["ed_mom"], ["gdp"])
    assert d.N == 10 and d.H == 2
    assert d.z_names == (INTERCEPT, "ed_mom")
