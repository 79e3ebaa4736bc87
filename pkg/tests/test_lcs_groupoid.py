from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from lcsgroupoid import expr as X
from lcsgroupoid.errors import BasicnessViolation
from lcsgroupoid.exterior import DifferentialForm as DF, one_form
from lcsgroupoid.jacobi import JacobiStructure
from lcsgroupoid.lcs_groupoid import (
    AlgebroidBracketData,
    ContactGroupoidData,
    JacobiGroupoidData,
    algebroid_bracket,
    algebroid_data,
    build_lcs_from_contact,
    check_contact_groupoid,
    check_jacobi_groupoid,
    check_lcs_groupoid,
    check_prop_3_1,
    check_symplectic_algebroid,
    compute_theta0,
    induced_jacobi_on_M,
    psi,
    theorem_4_6_crosscheck,
    verify_algebroid_iso,
)

from conftest import catalog_contact, catalog_lcs, to_sympy

PASSING = ["pair_symplectic", "pair_conformal", "cotangent_additive", "contact_to_lcs"]
PERTURBED = ["broken_omega", "broken_sigma", "pair_sigma_mismatch", "additive_twisted"]


# ------------------------------------------------------------ contact


def test_contact_groupoid_passes():
    rep = check_contact_groupoid(catalog_contact("contact_cotangent"))
    assert rep.passed, rep.summary()


def test_perturbed_contact_form_fails_twisted_multiplicativity():
    c = catalog_contact("contact_cotangent")
    ch = c.G.chart_g
    eta = c.eta + DF.basis(ch, "p2", coeff=X.mul(X.const(0.3), X.var("p1")))
    rep = check_contact_groupoid(ContactGroupoidData(c.G, eta))
    assert not rep["contact.eq3"].passed
    assert not rep["contact.eq6"].passed


def test_wrong_sigma_breaks_contact_groupoid():
    c = catalog_contact("contact_cotangent")
    rep = check_contact_groupoid(ContactGroupoidData(c.G, c.eta, X.var("t")))
    assert rep["sigma.multiplicative"].passed  # t adds under the product
    assert not rep["contact.eq3"].passed and not rep["contact.eq5"].passed


def test_prop_3_1_items_reported_individually():
    rep = check_prop_3_1(catalog_contact("contact_cotangent"))
    assert rep.passed, rep.summary()
    for item in ("prop31.i", "prop31.ii_alpha_omega", "prop31.ii_beta_theta", "prop31.iii_omega",
                 "prop31.iii_theta", "prop31.iv_lambda", "prop31.iv_units", "prop31.eq12_E_minus_reeb"):
        assert item in rep


def test_built_lcs_groupoid_uses_fresh_coordinate():
    lcs = build_lcs_from_contact(catalog_contact("contact_cotangent"))
    assert lcs.G.chart_g.vars[-1] not in ("x1", "x2", "p1", "p2", "t")
    assert lcs.G.chart_m.dim == 3


# -------------------------------------------------------------- l.c.s.


@pytest.mark.parametrize("name", PASSING)
def test_catalog_lcs_groupoids_pass(name):
    rep = check_lcs_groupoid(catalog_lcs(name))
    assert rep.passed, rep.summary()


@pytest.mark.parametrize("name, failing", [
    ("broken_omega", "def41.eq14"),
    ("broken_sigma", "sigma.multiplicative"),
    ("pair_sigma_mismatch", "def41.eq14"),
    ("additive_twisted", "def41.eq14"),
    ("broken_lee", "lcs.lee_closed"),
])
def test_perturbations_fail(name, failing):
    rep = check_lcs_groupoid(catalog_lcs(name))
    assert not rep[failing].passed


def test_theta_formula():
    d = catalog_lcs("pair_conformal")
    pts = X.sample_array(d.G.chart_g, 5, 1)
    s = X.evaluate_at([d.sigma], d.G.chart_g, pts)[0]
    ds = X.evaluate_at([X.partial(d.sigma, v) for v in d.G.chart_g.vars], d.G.chart_g, pts).T
    om = X.evaluate_at(d.omega.vector(), d.G.chart_g, pts).T
    th = X.evaluate_at(d.theta.vector(), d.G.chart_g, pts).T
    np.testing.assert_allclose(th, np.exp(s)[:, None] * (ds - om), atol=1e-14)


# -------------------------------------------------------------- Jacobi


@pytest.mark.parametrize("name", PASSING)
@pytest.mark.parametrize("mode", ["definition", "characterization"])
def test_catalog_jacobi_groupoids_pass(name, mode):
    rep = check_jacobi_groupoid(catalog_lcs(name).jacobi_data(), mode)
    assert rep.passed, rep.summary()


def test_unknown_mode():
    with pytest.raises(ValueError):
        check_jacobi_groupoid(catalog_lcs("pair_symplectic").jacobi_data(), "other")


def test_rescaled_reeb_field_breaks_characterization():
    d = catalog_lcs("pair_conformal")
    j = d.jacobi
    bad = JacobiGroupoidData(d.G, JacobiStructure(j.chart, j.Lambda, j.E.scale(2.0), j.guards), d.sigma)
    rep = check_jacobi_groupoid(bad, "characterization", structure_check=False)
    assert not rep["prop45.iii"].passed
    assert not check_jacobi_groupoid(bad, "definition", structure_check=False).passed


@pytest.mark.parametrize("name", PASSING + PERTURBED)
def test_theorem_4_6_agreement(name):
    out = theorem_4_6_crosscheck(catalog_lcs(name))
    assert out.status == "agree", out.report.summary()
    assert out.lcs.passed == (name in PASSING)


def test_theorem_4_6_excludes_non_lcs_items():
    out = theorem_4_6_crosscheck(catalog_lcs("broken_lee"))
    assert out.status == "not_lcs" and out.jacobi is None
    assert "NotLcs" in out.report["thm46.agreement"].detail


# ------------------------------------------------------------- algebroid


@pytest.mark.parametrize("name", PASSING)
def test_theta0_identities(name):
    rep = compute_theta0(catalog_lcs(name)).report
    assert rep.passed, rep.summary()


def test_theta0_values():
    assert compute_theta0(catalog_lcs("pair_symplectic")).theta0.is_zero()
    th = compute_theta0(catalog_lcs("pair_conformal")).theta0
    M = th.chart
    pts = X.sample_array(M, 5, 1)
    # theta0 = eps*(e^-sigma theta) = eps*(d sigma - omega) = -df on the base
    want = np.stack([-0.5 * np.cos(pts[:, 0]), -0.3 * np.ones(5)], axis=1)
    np.testing.assert_allclose(X.evaluate_at(th.vector(), M, pts).T, want, atol=1e-14)


def test_theta0_rejects_non_basic_theta():
    with pytest.raises(BasicnessViolation):
        compute_theta0(catalog_lcs("broken_omega"))
    loose = compute_theta0(catalog_lcs("broken_omega"), strict=False)
    assert not loose.report["prop51.basic"].passed


@pytest.mark.parametrize("name", PASSING)
def test_algebroid_isomorphism(name):
    rep = verify_algebroid_iso(catalog_lcs(name))
    assert rep.passed, rep.summary()


def test_planted_theta0_breaks_bracket_identity():
    d = catalog_lcs("pair_conformal")
    rep = verify_algebroid_iso(d, theta0=DF.zero(d.G.chart_m, 1))
    assert not rep["thm52.d_bracket"].passed


def test_psi_is_left_invariant_image():
    d = catalog_lcs("pair_symplectic")
    M = d.G.chart_m
    mu = one_form(M, [X.var("p"), X.ONE])
    P = psi(d, mu)
    gs = X.sample_array(d.G.chart_g, 10, 2)
    vals = X.evaluate_at(P.vector(), d.G.chart_g, gs).T
    np.testing.assert_allclose(np.einsum("nij,nj->ni", d.G.beta.jacobian_at(gs), vals), 0.0, atol=1e-14)


def _sympy_bracket(b: AlgebroidBracketData, mu, nu, pts):
    """Five-term bracket recomputed in sympy from the component matrices."""
    M = b.chart
    syms = [sp.Symbol(v) for v in M.vars]
    n = M.dim
    L = sp.zeros(n, n)
    for (i, j), c in b.base.Lambda.comps.items():
        L[i, j] = to_sympy(c)
        L[j, i] = -L[i, j]
    E = [to_sympy(c) for c in b.base.E.vector()]
    th = [to_sympy(c) for c in b.theta0.vector()]
    m = [to_sympy(c) for c in mu.vector()]
    v = [to_sympy(c) for c in nu.vector()]
    sharp = lambda a: [sum(a[j] * L[j, k] for j in range(n)) for k in range(n)]  # noqa: E731
    lie = lambda V_, a: [sum(V_[k] * sp.diff(a[i], syms[k]) + a[k] * sp.diff(V_[k], syms[i])  # noqa: E731
                             for k in range(n)) for i in range(n)]
    lmn = sum(m[j] * L[j, k] * v[k] for j in range(n) for k in range(n))
    mE = sum(m[k] * E[k] for k in range(n))
    vE = sum(v[k] * E[k] for k in range(n))
    t1, t2 = lie(sharp(m), v), lie(sharp(v), m)
    out = [t1[i] - t2[i] - sp.diff(lmn, syms[i]) - (mE * v[i] - vE * m[i]) - lmn * th[i] for i in range(n)]
    f = sp.lambdify(syms, out, "numpy")
    return np.array([np.broadcast_to(np.asarray(c, float), (len(pts),)) for c in f(*pts.T)])


@pytest.mark.parametrize("name", ["pair_symplectic", "pair_conformal", "contact_to_lcs"])
def test_bracket_matches_independent_formula(name):
    d = catalog_lcs(name)
    b = algebroid_data(d)
    M = b.chart
    rng = np.random.default_rng(5)
    from lcsgroupoid.lcs_groupoid import random_poly_form
    mu, nu = random_poly_form(M, rng), random_poly_form(M, rng)
    pts = X.sample_array(M, 20, 1)
    got = X.evaluate_at(algebroid_bracket(b, mu, nu).vector(), M, pts)
    np.testing.assert_allclose(got, _sympy_bracket(b, mu, nu, pts), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("name", ["pair_symplectic", "cotangent_additive"])
def test_symplectic_items_give_koszul_bracket(name):
    rep = check_symplectic_algebroid(catalog_lcs(name))
    assert rep.passed, rep.summary()
    assert all(e.tolerance <= 1e-9 for e in rep.entries)


def test_induced_structure_on_base_is_jacobi():
    # the contact groupoid integrates the zero Jacobi structure, so the base structure vanishes
    out = induced_jacobi_on_M(catalog_lcs("contact_to_lcs"))
    assert out.report.passed, out.report.summary()
    assert out.jacobi.E.is_zero() and out.jacobi.Lambda.is_zero()
    # the conformal pair groupoid induces a genuinely conformal structure: E0 = sharp(theta0) != 0
    conf = induced_jacobi_on_M(catalog_lcs("pair_conformal"))
    assert conf.report.passed, conf.report.summary()
    assert not conf.jacobi.E.is_zero()
