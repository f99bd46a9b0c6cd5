import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbi.blau_space import (
    DataError,
    DimSchema,
    DistanceTable,
    load_population,
    raw_distances,
    standardise,
    write_population,
)


def test_load_two_rows(write_csv):
    pop = load_population(write_csv("id,age,n,S\na,3,100,0.2\nb,5,100,0.8\n"))
    assert pop.N == 200
    assert pop.C == 2
    assert pop.ids == ["a", "b"]
    np.testing.assert_array_equal(pop.observed, [0.2, 0.8])


def test_missing_outcome_is_allowed(write_csv):
    pop = load_population(write_csv("id,age,n,S\na,3,100,\nb,5,100,0.8\n"))
    assert pop.sites[0].observed is None
    assert np.isnan(pop.observed[0])


@pytest.mark.parametrize(
    "body, match",
    [
        ("a,3,0,0.5\n", "positive integer"),
        ("a,3,-4,0.5\n", "positive integer"),
        ("a,3,10,1.5\n", r"outside \[0, 1\]"),
        ("a,3,10,0.5\na,4,10,0.5\n", "duplicate site id"),
        ("a,3,10\n", "expected 4 fields"),
        ("a,x,10,0.5\n", "cannot parse"),
    ],
)
def test_load_rejects_bad_rows(write_csv, body, match):
    with pytest.raises(DataError, match=match):
        load_population(write_csv("id,age,n,S\n" + body))


def test_spatial_block_and_groups(write_csv):
    text = "id,edu,x_km,y_km,n,S,group\nw1,1.0,0,0,10,0.5,B1\nw2,2.0,3,4,20,,\n"
    pop = load_population(write_csv(text))
    assert pop.schema.spatial
    assert pop.schema.distance_dims == ("edu", "distance")
    assert pop.groups == ["B1", None]


def test_schema_multipliers_and_mismatch(write_csv):
    path = write_csv("id,age,income,n,S\na,30,50,1,0.1\nb,40,70,1,0.2\n")
    pop = load_population(path, DimSchema(("age", "income"), multipliers={"age": 0.1}))
    np.testing.assert_allclose(pop.coords, [[3.0, 50.0], [4.0, 70.0]])
    with pytest.raises(DataError, match="does not match schema"):
        load_population(path, DimSchema(("age",)))


def test_roundtrip(tmp_path, write_csv):
    pop = load_population(write_csv("id,a,x_km,y_km,n,S,group\np,0.5,1,2,3,0.25,g\nq,1.5,2,2,4,,\n"))
    write_population(pop, tmp_path / "out.csv")
    again = load_population(tmp_path / "out.csv")
    np.testing.assert_array_equal(again.coords, pop.coords)
    assert again.groups == pop.groups
    np.testing.assert_array_equal(np.isnan(again.observed), np.isnan(pop.observed))


def test_raw_distances(write_csv):
    pop = load_population(write_csv("id,age,x_km,y_km,n,S\na,3,0,0,1,\nb,5,3,4,1,\nc,5,3,4,1,\n"))
    dt = raw_distances(pop)
    assert dt["age"][0, 1] == 2.0
    assert dt["distance"][0, 1] == 5.0
    np.testing.assert_array_equal(dt.values[:, 1, 2], [0.0, 0.0])
    for k in range(len(dt.dims)):
        np.testing.assert_array_equal(dt.values[k], dt.values[k].T)
        assert np.all(np.diag(dt.values[k]) == 0)


def test_standardise_hand_values():
    # off-diagonal entries {1, 3}: mean 2, population std 1
    dt = DistanceTable(("d",), np.array([[[0.0, 1.0], [3.0, 0.0]]]))
    s = standardise(dt)
    assert s.values[0, 0, 1] == pytest.approx(-0.5)
    assert s.values[0, 1, 0] == pytest.approx(0.5)
    # diagonal goes through the same map: (0 - 2) / 2
    assert s.values[0, 0, 0] == pytest.approx(-1.0)


def test_standardise_constant_dimension_names_it():
    dt = DistanceTable(("age", "flat"), np.stack([np.array([[0.0, 1.0, 2.0], [1.0, 0, 1], [2, 1, 0]]), 1 - np.eye(3)]))
    with pytest.raises(DataError, match="'flat'"):
        standardise(dt)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=12), st.lists(st.floats(0, 20), min_size=3, max_size=12))
def test_standardisation_contract(a, b):
    C = min(len(a), len(b))
    from conftest import line_population

    pop = line_population(a[:C])
    dt = raw_distances(pop)
    off = ~np.eye(C, dtype=bool)
    if dt.values[0][off].std() < 1e-6:
        return
    s = standardise(dt)
    v = s.values[0][off]
    assert abs(v.mean()) < 1e-10
    assert abs(v.std() - 0.5) < 1e-10
    np.testing.assert_array_equal(s.values[0], s.values[0].T)
    # re-standardising a standardised table lands on the same contract
    s2 = standardise(DistanceTable(s.dims, s.values))
    assert abs(s2.values[0][off].std() - 0.5) < 1e-10
