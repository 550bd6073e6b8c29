import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixanom import anomaly, models
from mixanom.anomaly import (AnomalyError, BoundaryLeak, CocycleTable, GroupSpec, boundary_obstruction, cocycle,
                             indicator, indicator_exponent, is_trivial_class, random_cochains, shift_by_coboundary,
                             solve_mod_power_of_two, split_boundary, z2_product_group)
from mixanom.models import ModelId
from mixanom.pauli import coeff
from mixanom.phasepoly import Region

# onsite actions (cluster chain, decoupled reference) carry no anomaly
EXPECTED = {"example1": -1, "example2": -1, "example3": -1, "cluster_aspt": 1,
            "aspt2d_KA": -1, "aspt2d_KBC": -1, "onsite": 1}


def setups():
    out = {name: models.anomaly_setup(ModelId(name)) for name in models.MODEL_NAMES}
    out["onsite"] = models.onsite_setup()
    return out


SETUPS = setups()
TABLES = {name: cocycle(g, M) for name, (g, M, _) in SETUPS.items()}


@pytest.mark.parametrize("name", list(SETUPS))
def test_indicator_values(name):
    _, _, (a, b) = SETUPS[name]
    want = EXPECTED[name]
    assert indicator(TABLES[name], a, b) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("name", list(SETUPS))
def test_cocycle_identity(name):
    assert TABLES[name].violations() == []


@pytest.mark.parametrize("name", list(SETUPS))
def test_group_reps_multiply(name):
    group = SETUPS[name][0]
    assert group.check_homomorphism() == []


@pytest.mark.parametrize("name", list(SETUPS))
def test_triviality_verdict(name):
    trivial, witness = is_trivial_class(TABLES[name])
    assert trivial == (EXPECTED[name] == 1)
    if trivial:
        zero = CocycleTable(TABLES[name].group, {k: 0 for k in TABLES[name].values}, TABLES[name].m)
        assert shift_by_coboundary(zero, witness["beta"], witness["beta_weak"]).values == TABLES[name].values


@given(st.integers(0, 10 ** 6), st.sampled_from(sorted(SETUPS)))
def test_indicator_invariant_under_coboundary(seed, name):
    table = TABLES[name]
    _, _, (a, b) = SETUPS[name]
    beta, beta_w = random_cochains(table.group, table.modulus, np.random.default_rng(seed))
    shifted = shift_by_coboundary(table, beta, beta_w)
    assert shifted.violations() == []
    assert indicator_exponent(shifted, a, b) == indicator_exponent(table, a, b)


@given(st.integers(0, 10 ** 6), st.sampled_from(["example1", "example2", "example3", "onsite"]))
def test_pure_coboundaries_are_trivial(seed, name):
    group = SETUPS[name][0]
    zero = CocycleTable(group, {k: 0 for k in itertools.product(group.elements, repeat=3)}, group.m)
    beta, beta_w = random_cochains(group, zero.modulus, np.random.default_rng(seed))
    trivial, witness = is_trivial_class(shift_by_coboundary(zero, beta, beta_w))
    assert trivial and witness is not None


@given(st.sampled_from(["example1", "example2", "example3"]), st.integers(-2, 2))
def test_indicator_independent_of_region_position(name, shift):
    group, M, (a, b) = SETUPS[name]
    j = M.sites[0] + shift
    table = cocycle(group, Region.interval(j, j + 5))
    assert indicator(table, a, b) == pytest.approx(-1, abs=1e-12)


@st.composite
def linear_systems(draw):
    m = draw(st.integers(1, 3))
    rows, cols = draw(st.integers(1, 4)), draw(st.integers(1, 3))
    A = np.array(draw(st.lists(st.integers(0, (1 << m) - 1), min_size=rows * cols, max_size=rows * cols)))
    t = np.array(draw(st.lists(st.integers(0, (1 << m) - 1), min_size=rows, max_size=rows)))
    return A.reshape(rows, cols), t, m


@given(linear_systems())
def test_solver_matches_brute_force(system):
    A, t, m = system
    mod = 1 << m
    exists = any(np.all((A @ np.array(x) - t) % mod == 0)
                 for x in itertools.product(range(mod), repeat=A.shape[1]))
    x = solve_mod_power_of_two(A, t, m)
    assert (x is not None) == exists
    if x is not None:
        assert np.all((A @ x - t) % mod == 0)


def test_obstruction_lives_on_boundary():
    group, M, (a, b) = SETUPS["example2"]
    W = boundary_obstruction(a, b, group, M)
    wl, wr = split_boundary(W, M)
    for part, comp in ((wl, "left"), (wr, "right")):
        for u in part.unitaries():
            assert u.support() <= M.boundary_components[comp]
    assert not W.is_scalar()


def test_leak_outside_boundary_strips():
    group = models.chain_group("example2", 10, "pbc")
    # boundary strips that miss the cut CZ gates
    M = Region(tuple(range(3, 9)), {"left": {4}, "right": {7}})
    with pytest.raises(BoundaryLeak):
        cocycle(group, M)
    with pytest.raises(ValueError):
        Region.interval(3, 5)


def test_indicator_rejects_bad_pairs():
    table = TABLES["example2"]
    with pytest.raises(AnomalyError):
        indicator(table, "X", "X")
    with pytest.raises(AnomalyError):
        indicator(table, "I", "X")


def test_group_json_round_trip():
    group = SETUPS["example1"][0]
    again = GroupSpec.from_json(group.to_json())
    assert again.elements == group.elements and again.strong == group.strong
    assert cocycle(again, SETUPS["example1"][1]).values == TABLES["example1"].values


def test_product_group_factorization():
    g = z2_product_group([("A", models.flips([1]), True), ("B", models.flips([2]), False)])
    assert set(g.elements) == {"I", "A", "B", "AB"}
    assert g.strong == ("I", "A") and g.weak == ("I", "B")
    assert g.strong_part("AB") == "A" and g.weak_part("AB") == "B"


def test_group_cap():
    table = TABLES["example1"]
    with pytest.raises(AnomalyError):
        is_trivial_class(table, cap=2)


def test_defect_charge():
    rep = anomaly.defect_charge_check("example1", L=8)
    assert rep.delta_q == coeff(1) and rep.per_defect == coeff(Fraction(1, 2))
    assert anomaly.defect_charge_check("example1", L=8, string=[]).delta_q == coeff(0)
    # two applications undo the flip
    assert anomaly.defect_charge_check("example1", L=8, repeat=2).delta_q == coeff(0)
    with pytest.raises(AnomalyError):
        anomaly.defect_charge_check("example2")
