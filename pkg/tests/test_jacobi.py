from __future__ import annotations

import numpy as np
import pytest

from lcsgroupoid import expr as X
from lcsgroupoid.errors import NotContact, NotProjectable
from lcsgroupoid.expr import Chart, parse_expr
from lcsgroupoid.exterior import DifferentialForm as DF, MultiVector as MV, d, one_form, tensor_residual
from lcsgroupoid.jacobi import (
    JacobiStructure,
    LcsStructure,
    check_jacobi,
    check_lcs,
    conformal_pushforward,
    fresh_variable,
    hamiltonian_vf,
    lcs_first_kind,
    lcs_to_jacobi,
    lift_to_product,
    reeb,
)

from conftest import catalog_lcs

N = Chart("N", ("x", "y", "z"))
ETA = DF.basis(N, "z") - DF.basis(N, "x", coeff=X.var("y"))


def test_reeb_of_standard_contact_form():
    c = reeb(ETA)
    pts = X.sample_array(N, 20, 1)
    assert tensor_residual(c.xi, MV.basis(N, "z"), pts) <= 1e-14


def test_reeb_of_twisted_contact_form():
    # eta = e^x (dz - y dx): xi = e^-x (d_z), since i(xi) d eta must vanish
    eta = ETA.scale(X.exp(X.var("x")))
    c = reeb(eta)
    pts = X.sample_array(N, 20, 1)
    from lcsgroupoid.exterior import ext_deriv, interior, pairing
    assert np.allclose(X.evaluate_at([pairing(eta, c.xi)], N, pts), 1.0)
    assert tensor_residual(interior(c.xi, ext_deriv(eta)), DF.zero(N, 1), pts) <= 1e-12


def test_reeb_rejects_non_contact_forms():
    with pytest.raises(NotContact):
        reeb(DF.basis(N, "z"))
    with pytest.raises(NotContact):
        reeb(DF.basis(Chart("E", ("a", "b")), "a"))


def test_first_kind_lcs_is_lcs_with_E_minus_reeb():
    s = lcs_first_kind(ETA)
    rep = check_lcs(s.Omega, s.omega, 100, 3)
    assert rep.passed, rep.summary()
    j = lcs_to_jacobi(s)
    assert check_jacobi(j, 100, 3).passed
    xi = lift_to_product(reeb(ETA).xi, s.chart)
    assert tensor_residual(j.E, -xi, X.sample_array(s.chart, 50, 3)) <= 1e-12
    assert s.chart.vars == ("x", "y", "z", "t")


def test_fresh_variable_avoids_collisions():
    assert fresh_variable({"x"}) == "t"
    assert fresh_variable({"t", "s", "u", "r", "tau"}) == "t1"


def test_check_lcs_detects_each_failure():
    R4 = Chart("R4", ("a", "b", "c", "e"))
    Om = DF.basis(R4, "a", "b") + DF.basis(R4, "c", "e")
    assert check_lcs(Om, DF.zero(R4, 1)).passed
    bad_lee = one_form(R4, [X.ZERO, X.var("a"), X.ZERO, X.ZERO])
    rep = check_lcs(Om, bad_lee)
    assert not rep["lcs.lee_closed"].passed and not rep["lcs.eq1"].passed
    wrong = check_lcs(Om.scale(X.exp(X.var("a"))), DF.zero(R4, 1))
    assert wrong["lcs.lee_closed"].passed and not wrong["lcs.eq1"].passed
    degenerate = check_lcs(DF.basis(R4, "a", "b"), DF.zero(R4, 1))
    assert not degenerate["lcs.nondegenerate"].passed
    assert "SingularForm" in degenerate["lcs.nondegenerate"].detail


def test_conformal_rescaling_of_symplectic_form_is_lcs():
    R4 = Chart("R4", ("a", "b", "c", "e"))
    f = parse_expr("sin(a) + b*c", R4)
    Om = (DF.basis(R4, "a", "b") + DF.basis(R4, "c", "e")).scale(X.exp(f))
    rep = check_lcs(Om, d(f, R4))
    assert rep.passed, rep.summary()
    assert check_jacobi(lcs_to_jacobi(LcsStructure(R4, Om, d(f, R4)))).passed


def test_check_jacobi_rejects_non_jacobi_pair():
    R3 = Chart("R3", ("a", "b", "c"))
    # pi^{ij} = eps^{ijk} v_k with v = (-b, 0, 1): v . curl v = 1, so not Poisson
    L = MV.basis(R3, "a", "b") + MV.basis(R3, "b", "c", coeff=X.neg(X.var("b")))
    bad = check_jacobi(JacobiStructure(R3, L, MV.zero(R3, 1)))
    assert not bad.passed
    # a Poisson bivector with E = 0 is Jacobi
    ok = check_jacobi(JacobiStructure(R3, MV.basis(R3, "a", "b", coeff=X.var("c")), MV.zero(R3, 1)))
    assert ok.passed


def test_hamiltonian_vector_field_of_one_is_reeb_sign():
    j = lcs_to_jacobi(lcs_first_kind(ETA))
    assert tensor_residual(hamiltonian_vf(1.0, j), j.E, X.sample_array(j.chart, 10, 1)) <= 1e-14


def test_conformal_pushforward_of_pair_groupoid():
    data = catalog_lcs("pair_symplectic")
    G = data.G
    pf = conformal_pushforward(G.alpha, G.eps, X.ONE, data.jacobi)
    assert pf.report.passed, pf.report.summary()
    M = G.chart_m
    # alpha is a Poisson map onto (R^2, -d_q ^ d_p) or its negative; the value is a constant unit bivector
    vals = pf.jacobi.Lambda.dense(X.sample_array(M, 5, 1))
    assert np.allclose(np.abs(vals[:, 0, 1]), 1.0)
    assert pf.jacobi.E.is_zero() or tensor_residual(pf.jacobi.E, MV.zero(M, 1), X.sample_array(M, 5, 1)) <= 1e-14


def test_conformal_pushforward_detects_non_projectable_structure():
    data = catalog_lcs("broken_omega")
    G = data.G
    with pytest.raises(NotProjectable):
        conformal_pushforward(G.alpha, G.eps, X.ONE, data.jacobi)
    loose = conformal_pushforward(G.alpha, G.eps, X.ONE, data.jacobi, strict=False)
    assert not loose.report.passed
