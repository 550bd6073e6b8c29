import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_unitary as _dense
from mixanom.pauli import OperatorSum, X, Z, mul, to_dense
from mixanom.phasepoly import (LocalProduct, PhasePolyUnitary, Region, canonical_equal, compose, conjugate,
                               conjugate_operator, diagonal_values, from_text, invert, power, restrict,
                               to_operator_sum, to_text)

SITES = (1, 2, 3, 4)


def dense_unitary(u, sites=SITES):
    return _dense(u, sites)


monos = st.frozensets(st.sampled_from(SITES), max_size=3)


@st.composite
def unitaries(draw, m=3):
    poly = draw(st.dictionaries(monos, st.integers(-8, 8), max_size=5))
    xs = draw(st.frozensets(st.sampled_from(SITES)))
    return PhasePolyUnitary(xs, poly, m)


def close(a, b):
    return np.allclose(a, b, atol=1e-12, rtol=0)


@given(unitaries(), unitaries())
def test_compose_matches_dense(u, v):
    assert close(dense_unitary(compose(u, v)), dense_unitary(u) @ dense_unitary(v))


@given(unitaries())
def test_inverse_matches_dense(u):
    assert close(dense_unitary(invert(u)), np.linalg.inv(dense_unitary(u)))
    assert compose(u, invert(u)).is_scalar()
    assert compose(u, invert(u)).global_exponent == 0


@given(unitaries(), unitaries())
def test_conjugate_matches_dense(u, v):
    du, dv = dense_unitary(u), dense_unitary(v)
    assert close(dense_unitary(conjugate(u, v)), du @ dv @ du.conj().T)


@given(unitaries(m=2))
def test_pauli_expansion_matches_dense(u):
    assert close(to_dense(to_operator_sum(u, SITES)), dense_unitary(u))


@given(unitaries(m=2), st.sampled_from(["X1", "Y2 Z3", "Z1 Z4", "X2 X3 Y4"]))
def test_conjugate_operator_matches_dense(u, word):
    op = OperatorSum.word(SITES, word)
    du = dense_unitary(u)
    assert close(to_dense(conjugate_operator(u, op)), du @ to_dense(op) @ du.conj().T)


@given(unitaries())
def test_text_round_trip(u):
    assert from_text(to_text(u)) == u


@given(unitaries(), st.integers(0, 5))
def test_power(u, n):
    assert close(dense_unitary(power(u, n)), np.linalg.matrix_power(dense_unitary(u), n))


def test_gate_constructors():
    dz = np.diag([1, -1]).astype(complex)
    assert close(dense_unitary(PhasePolyUnitary.z(1), (1,)), dz)
    assert close(dense_unitary(PhasePolyUnitary.cz(1, 2), (1, 2)), np.diag([1, 1, 1, -1]))
    assert close(dense_unitary(PhasePolyUnitary.ccz(1, 2, 3), (1, 2, 3)), np.diag([1] * 7 + [-1]))
    # exp[i pi/4 (1 - Z Z)]: phase i on anti-aligned pairs
    assert close(dense_unitary(PhasePolyUnitary.zz_quarter(1, 2), (1, 2)), np.diag([1, 1j, 1j, 1]))


def test_pauli_word_unitary_is_hermitian_word():
    for word in ("X1 Z2", "Y1", "Y2 Y3 Z4"):
        op = OperatorSum.word(SITES, word)
        x, z = next(iter(op.terms))
        assert close(dense_unitary(PhasePolyUnitary.from_pauli_word(x, z)), to_dense(op))


def test_cz_conjugates_x_into_zxz():
    cz = compose(PhasePolyUnitary.cz(1, 2), PhasePolyUnitary.cz(2, 3))
    got = conjugate_operator(cz, X(SITES, 2))
    assert got == mul(mul(Z(SITES, 1), X(SITES, 2)), Z(SITES, 3))


def test_diagonal_values():
    u = PhasePolyUnitary((), {frozenset([1]): 2, frozenset([1, 2]): 3}, 3)
    assert list(diagonal_values(u, [1, 2])) == [0, 2, 0, 5]


def test_restrict_region_and_local_product():
    M = Region.interval(2, 5)
    assert M.component_of([2, 3]) == "left" and M.component_of([3, 4]) is None
    gates = LocalProduct(tuple(PhasePolyUnitary.cz(i, i + 1) for i in range(1, 6)))
    kept = restrict(gates, M)
    assert len(kept.factors) == 3
    u = PhasePolyUnitary({1, 3}, {frozenset([1, 2]): 4, frozenset([3]): 4})
    r = restrict(u, M)
    assert r.x_layer == frozenset([3]) and r.poly == {frozenset([3]): 4}


def test_canonical_equal_reports_differences():
    ok, rep = canonical_equal(PhasePolyUnitary.cz(1, 2), PhasePolyUnitary.cz(1, 3))
    assert not ok and len(rep) == 2
    assert canonical_equal(PhasePolyUnitary.z(1), PhasePolyUnitary((), {frozenset([1]): 12}))[0]


def test_errors():
    with pytest.raises(ValueError):
        compose(PhasePolyUnitary.identity(2), PhasePolyUnitary.identity(3))
    with pytest.raises(ValueError):
        to_operator_sum(PhasePolyUnitary((), {frozenset([1]): 1}, 3), SITES)
    with pytest.raises(ValueError):
        Region((1, 2, 3), {"a": {1, 2}, "b": {2, 3}})
    with pytest.raises(ValueError):
        from_text("nonsense")


def test_dense_oracle_is_unitary():
    for u in (PhasePolyUnitary({1, 4}, {frozenset([1, 2, 3]): 5}), PhasePolyUnitary.zz_quarter(2, 3)):
        d = dense_unitary(u)
        assert close(d @ d.conj().T, np.eye(16))
