from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_unitary
from mixanom import models
from mixanom.lindblad import check_symmetry, is_steady
from mixanom.models import ModelError, ModelId, build_lattice, build_model, closed_form_steady, ddw_residual_check
from mixanom.pauli import OperatorSum, X, Z, coeff, mul
from mixanom.phasepoly import PhasePolyUnitary, compose, invert, to_operator_sum


def test_catalog_has_six_models():
    assert [r["model"] for r in models.catalog()] == list(models.MODEL_NAMES)
    assert len(models.MODEL_NAMES) == 6


@pytest.mark.parametrize("bc,edges", [("pbc", 8), ("obc", 7)])
def test_chain_counts(bc, edges):
    lat = build_lattice("chain", 8, bc)
    assert len(lat.sites) == 8 and len(lat.edges) == edges


@given(st.sampled_from([3, 6]), st.sampled_from([3, 6]))
def test_triangular_pbc_counts(Lx, Ly):
    lat = build_lattice("triangular", (Lx, Ly), "pbc")
    n = Lx * Ly
    assert len(lat.sites) == n
    assert len(lat.triangles) == 2 * n and len(lat.edges) == 3 * n
    for label in "ABC":
        assert len(lat.of_sublattice(label)) == n // 3
    assert all(len(lat.neighbors(s)) == 6 for s in lat.sites)
    assert all(len(lat.one_links[s]) == 6 for s in lat.sites)


def test_triangular_3x3():
    lat = build_lattice("triangular", (3, 3), "pbc")
    assert len(lat.sites) == 9 and len(lat.triangles) == 18


@given(st.sampled_from(["pbc", "obc"]), st.integers(3, 7), st.integers(3, 7))
def test_triangles_hold_one_site_per_sublattice(bc, Lx, Ly):
    if bc == "pbc":
        Lx, Ly = 3 * (Lx // 3), 3 * (Ly // 3)
    lat = build_lattice("triangular", (Lx, Ly), bc)
    for t in lat.triangles:
        assert sorted(lat.sublattice[s] for s in t) == ["A", "B", "C"]
    if bc == "obc":
        assert lat.boundary_sites and all(lat.sublattice[s] != "A" for s in lat.boundary_sites)


def test_lattice_errors():
    with pytest.raises(ModelError):
        build_lattice("triangular", (4, 3), "pbc")
    with pytest.raises(ModelError):
        build_lattice("hexagonal", (3, 3))
    with pytest.raises(ModelError):
        build_lattice("chain", 8, "twisted")


CATALOG_IDS = [ModelId(n, L=6, bc=bc) for n in ("example1", "example2", "example3", "cluster_aspt")
               for bc in ("pbc", "obc")]
CATALOG_IDS += [ModelId(n, Lx=3, Ly=3, bc="pbc") for n in ("aspt2d_KA", "aspt2d_KBC")]
CATALOG_IDS += [ModelId(n, Lx=6, Ly=6, bc="obc") for n in ("aspt2d_KA", "aspt2d_KBC")]


@pytest.mark.parametrize("mid", CATALOG_IDS, ids=lambda m: f"{m.name}-{m.bc}")
def test_catalog_models_respect_their_symmetry(mid):
    assert check_symmetry(build_model(mid)).passed


@pytest.mark.parametrize("mid", CATALOG_IDS, ids=lambda m: f"{m.name}-{m.bc}")
def test_closed_forms_are_steady(mid):
    model = build_model(mid)
    for rho in closed_form_steady(mid, verify=False):
        assert is_steady(model, rho)


def test_example1_hamiltonian_and_jumps():
    model = build_model(ModelId("example1", L=6))
    s = model.sites
    H = model.hamiltonian
    assert H.coefficient("X2") == coeff(1)
    assert H.coefficient("Z1 X2 Z3") == coeff(-1)
    assert H.coefficient("Z1 Z2") == coeff(Fraction(-1, 2))
    assert list(model.jumps) == [Z(s, i) for i in s]


def test_example1_ferromagnetic_pair():
    mid = ModelId("example1", L=6)
    a, b = closed_form_steady(mid, 0)
    assert a == models.basis_projector(mid.lattice().sites, [0] * 6)
    assert b == models.basis_projector(mid.lattice().sites, [1] * 6)


def test_example2_periodic_state_is_one_plus_cz():
    mid = ModelId("example2", L=6)
    (rho,) = closed_form_steady(mid, 1)
    U = to_operator_sum(models.cz_ring(6).unitary(), rho.sites)
    assert rho == OperatorSum.identity(rho.sites) + U


def test_example3_open_pair():
    mid = ModelId("example3", L=6, bc="obc")
    s = mid.lattice().sites
    one = OperatorSum.identity(s)
    plus = one + X(s, *s)
    assert closed_form_steady(mid, 1) == [mul(one + Z(s, 1, 6), plus), mul(one - Z(s, 1, 6), plus)]


def test_charge_projectors_resolve_identity():
    mid = ModelId("example1", L=6)
    total = OperatorSum.zero(mid.lattice().sites)
    for q in models.valid_charges(mid):
        total = total + models.charge_projector(6, q)
    assert total == OperatorSum.identity(mid.lattice().sites)


def test_invalid_sectors():
    with pytest.raises(ModelError):
        closed_form_steady(ModelId("example1", L=6), Fraction(1, 2))
    with pytest.raises(ModelError):
        closed_form_steady(ModelId("example2", L=6), 3)
    with pytest.raises(ModelError):
        ModelId("example2", L=5)
    with pytest.raises(ModelError):
        ModelId("nonsense")
    with pytest.raises(ModelError):
        ModelId("example1", L=40)


@pytest.mark.parametrize("L", [4, 5, 6, 7, 8])
def test_open_cz_flip_identity(L):
    assert models.boundary_cz_identity(L)


# decorated domain walls

LAT3 = build_lattice("triangular", (3, 3), "pbc")
LAT6 = build_lattice("triangular", (6, 6), "pbc")


def test_ddw_matches_dense_oracle():
    lat = LAT3
    n = lat.of_sublattice("B")[0]
    m = next(c for c in lat.neighbors(n) if lat.sublattice[c] == "C")
    rep = ddw_residual_check("KA", {"B": {n}, "C": {m}}, lat)
    U = dense_unitary(models.ccz_entangler(lat), lat.sites)
    V = dense_unitary(PhasePolyUnitary.flips({n, m}), lat.sites)
    R = U.conj().T @ V @ U @ V.conj().T
    assert np.allclose(R, dense_unitary(rep.residual, lat.sites), atol=1e-10)
    assert np.allclose(R, dense_unitary(rep.predicted, lat.sites), atol=1e-10)
    assert np.allclose(R, np.diag(np.diag(R)), atol=1e-12)
    assert rep.match


def test_ddw_single_pair_charges_shared_triangles():
    lat = LAT6
    n = lat.of_sublattice("B")[5]
    m = next(c for c in lat.neighbors(n) if lat.sublattice[c] == "C")
    rep = ddw_residual_check("KA", {"B": {n}, "C": {m}}, lat)
    shared = sorted(next(s for s in t if lat.sublattice[s] == "A")
                    for t in lat.triangles if n in t and m in t)
    assert rep.match and rep.odd_sites == shared and len(shared) == 2


def test_ddw_empty_region_is_identity():
    rep = ddw_residual_check("KA", {}, LAT6)
    assert rep.residual == PhasePolyUnitary.identity() and rep.match


@given(st.sampled_from(["KA", "KBC"]), st.sets(st.integers(0, 35), max_size=8))
def test_ddw_residual_always_diagonal_and_predicted(variant, picks):
    allowed = {"KA": "BC", "KBC": "AB"}[variant]
    pool = [s for s in LAT6.sites if LAT6.sublattice[s] in allowed]
    region = {pool[i % len(pool)] for i in picks}
    rep = ddw_residual_check(variant, region, LAT6)
    assert rep.residual.is_diagonal()
    assert rep.match, rep.discrepancies


def test_ddw_rejects_wrong_sublattice():
    A = LAT6.of_sublattice("A")[0]
    with pytest.raises(ModelError):
        ddw_residual_check("KA", {"A": {A}}, LAT6)
    with pytest.raises(ModelError):
        ddw_residual_check("KZ", {}, LAT6)


@pytest.mark.parametrize("lat", [LAT3, LAT6, build_lattice("triangular", (6, 6), "obc")])
def test_o_identity(lat):
    assert models.o_identity_check(lat)["pass"]


def test_o_identity_dense_3x3():
    lat = LAT3
    U = dense_unitary(models.ccz_entangler(lat), lat.sites)
    for i in lat.sites[:3]:
        Xi = dense_unitary(PhasePolyUnitary.flips([i]), lat.sites)
        assert np.allclose(U @ Xi @ U.conj().T, dense_unitary(models.o_unitary(lat, i), lat.sites), atol=1e-10)


# edges

def test_cluster_edge_report():
    rep = models.edge_report(ModelId("cluster_aspt", L=8, bc="obc"))
    assert rep.edge_dimension == 4
    assert rep.commutation["L_K L_G"] == -1
    assert rep.passed


def test_decoupled_chain_edge_commutes():
    rep = models.chain_edge_report(8, PhasePolyUnitary.identity(), name="decoupled")
    assert rep.edge_dimension == 4
    assert rep.commutation["L_K L_G"] == 1


@pytest.mark.parametrize("name,pattern", [("aspt2d_KA", "example2"), ("aspt2d_KBC", "example3")])
def test_lattice_edge_report(name, pattern):
    rep = models.edge_report(ModelId(name, Lx=6, Ly=6, bc="obc"))
    assert rep.passed and rep.edge_action["pattern"] == pattern
    assert rep.indicator == pytest.approx(-1)


def test_edge_report_needs_open_boundary():
    with pytest.raises(ModelError):
        models.edge_report(ModelId("cluster_aspt", L=8))
    with pytest.raises(ModelError):
        models.edge_report(ModelId("example1", L=8, bc="obc"))
