from __future__ import annotations

import itertools

import pytest
import sympy as sp

from lcsgroupoid import expr as X
from lcsgroupoid.errors import DegreeOverflow, KindMismatch, SingularForm
from lcsgroupoid.expr import Chart, parse_expr
from lcsgroupoid.exterior import (
    DifferentialForm as DF,
    MultiVector as MV,
    SmoothMap,
    d,
    ext_deriv,
    flat,
    interior,
    lie_bracket,
    lie_deriv,
    one_form,
    pullback,
    schouten,
    sharp,
    tensor_residual,
    two_form_inverse,
    vector_field,
    wedge,
)

from conftest import to_sympy

R4 = Chart("R4", ("a", "b", "c", "e"))
PTS = X.sample_array(R4, 40, 99)


def P(text):
    return parse_expr(text, R4)


def form1(*comps):
    return one_form(R4, [P(c) for c in comps])


def vf(*comps):
    return vector_field(R4, [P(c) for c in comps])


A1 = form1("a*b", "exp(c)", "sin(a*e)", "b^2 - c")
B1 = form1("cos(b)", "a*e", "1 + c^2", "exp(-a)")
XV = vf("b", "exp(a*c)", "e - a^2", "sin(b)")
YV = vf("c*e", "1", "a*b", "cos(a)")


def zero_like(t):
    return type(t).zero(t.chart, t.degree)


def test_basis_sign_and_repeat():
    assert X.evaluate_many([DF.basis(R4, "b", "a")[(0, 1)]], {})[0] == -1.0
    assert DF.basis(R4, "a", "a").is_zero()


def test_d_squared_is_zero():
    two = wedge(A1, B1)
    assert tensor_residual(ext_deriv(ext_deriv(A1)), zero_like(ext_deriv(ext_deriv(A1))), PTS) <= 1e-12
    assert tensor_residual(ext_deriv(ext_deriv(two)), DF.zero(R4, 4), PTS) <= 1e-12


def test_d_of_one_form_matches_sympy():
    syms = [sp.Symbol(v) for v in R4.vars]
    comps = [to_sympy(c) for c in A1.vector()]
    dA = ext_deriv(A1)
    for i, j in itertools.combinations(range(4), 2):
        want = sp.diff(comps[j], syms[i]) - sp.diff(comps[i], syms[j])
        got = dA[(i, j)]
        for p in PTS[:5]:
            env = dict(zip(syms, p))
            assert X.evaluate_many([got], dict(zip(R4.vars, p)))[0] == pytest.approx(float(want.subs(env)), abs=1e-12)


def test_leibniz_rule_for_d():
    lhs = ext_deriv(wedge(A1, B1))
    rhs = wedge(ext_deriv(A1), B1) - wedge(A1, ext_deriv(B1))
    assert tensor_residual(lhs, rhs, PTS) <= 1e-12


def test_wedge_graded_commutativity():
    assert tensor_residual(wedge(A1, B1), -wedge(B1, A1), PTS) <= 1e-14
    w2 = ext_deriv(A1)
    assert tensor_residual(wedge(w2, B1), wedge(B1, w2), PTS) <= 1e-14


def test_wedge_degree_overflow():
    top = wedge(wedge(A1, B1), wedge(form1("1", "0", "0", "0"), form1("0", "0", "0", "1")))
    with pytest.raises(DegreeOverflow):
        wedge(top, A1)


def test_cartan_formula_against_coordinates():
    # (L_X a)_i = X^j d_j a_i + a_j d_i X^j, computed independently in sympy
    syms = [sp.Symbol(v) for v in R4.vars]
    Xs = [to_sympy(c) for c in XV.vector()]
    As = [to_sympy(c) for c in A1.vector()]
    L = lie_deriv(XV, A1)
    for p in PTS[:6]:
        env = dict(zip(syms, p))
        for i in range(4):
            want = sum(Xs[j] * sp.diff(As[i], syms[j]) + As[j] * sp.diff(Xs[j], syms[i]) for j in range(4))
            got = X.evaluate_many([L[(i,)]], dict(zip(R4.vars, p)))[0]
            assert got == pytest.approx(float(want.subs(env)), rel=1e-10, abs=1e-10)


def test_cartan_magic_formula_on_two_forms():
    w = wedge(A1, B1)
    lhs = lie_deriv(XV, w)
    rhs = interior(XV, ext_deriv(w)) + ext_deriv(interior(XV, w))
    assert tensor_residual(lhs, rhs, PTS) <= 1e-12
    # [L_X, i_Y] = i_[X,Y]
    lhs2 = lie_deriv(XV, interior(YV, w)) - interior(YV, lie_deriv(XV, w))
    assert tensor_residual(lhs2, interior(lie_bracket(XV, YV), w), PTS) <= 1e-10


def test_interior_is_antiderivation():
    lhs = interior(XV, wedge(A1, B1))
    rhs = wedge(interior(XV, A1), B1) - wedge(A1, interior(XV, B1))
    assert tensor_residual(lhs, rhs, PTS) <= 1e-13


def test_lie_bracket_jacobi_and_schouten_agreement():
    Z = vf("a", "b*c", "0", "e^2")
    cyc = lie_bracket(XV, lie_bracket(YV, Z)) + lie_bracket(YV, lie_bracket(Z, XV)) + lie_bracket(Z, lie_bracket(XV, YV))
    assert tensor_residual(cyc, MV.zero(R4, 1), PTS) <= 1e-10
    assert tensor_residual(schouten(XV, YV), lie_bracket(XV, YV), PTS) <= 1e-14


def _graded_jacobi(P_, Q, R):
    p, q, r = P_.degree, Q.degree, R.degree
    sgn = lambda k: -1 if k % 2 else 1  # noqa: E731
    t1 = schouten(P_, schouten(Q, R)).scale(sgn((p - 1) * (r - 1)))
    t2 = schouten(Q, schouten(R, P_)).scale(sgn((q - 1) * (p - 1)))
    t3 = schouten(R, schouten(P_, Q)).scale(sgn((r - 1) * (q - 1)))
    return t1 + t2 + t3


def test_schouten_graded_symmetry_and_jacobi():
    Pb = wedge(XV, YV)
    Qb = wedge(vf("1", "a", "0", "c"), vf("e", "0", "b", "1"))
    assert tensor_residual(schouten(Pb, Qb), schouten(Qb, Pb), PTS) <= 1e-12  # symmetric on bivectors
    assert tensor_residual(schouten(XV, Pb), -schouten(Pb, XV), PTS) <= 1e-12
    J = _graded_jacobi(XV, Pb, Qb)
    assert tensor_residual(J, MV.zero(R4, J.degree), PTS) <= 1e-8


def test_schouten_of_bivector_by_hand():
    pi = MV.basis(R4, "a", "b") + MV.basis(R4, "c", "e", coeff=P("exp(a)"))  # d_a ^ d_b + e^a d_c ^ d_e
    br = schouten(pi, pi)
    # by hand: [pi, pi] = 2 [d_a, e^a d_c] ^ d_b ^ d_e = -2 e^a d_b ^ d_c ^ d_e
    expected = wedge(MV.basis(R4, "b"), MV.basis(R4, "c", "e", coeff=P("exp(a)"))).scale(-2.0)
    assert tensor_residual(br, expected, PTS) <= 1e-12
    constant = MV.basis(R4, "a", "b") + MV.basis(R4, "c", "e")
    assert schouten(constant, constant).is_zero()


def test_schouten_lichnerowicz_convention_sign():
    Pb = wedge(XV, YV)
    assert tensor_residual(schouten(Pb, Pb, "lichnerowicz"), -schouten(Pb, Pb), PTS) <= 1e-14
    assert tensor_residual(schouten(XV, Pb, "lichnerowicz"), schouten(XV, Pb), PTS) <= 1e-14
    with pytest.raises(ValueError):
        schouten(XV, Pb, "other")


def test_sharp_flat_conventions():
    Om = wedge(form1("1", "0", "0", "0"), form1("0", "exp(c)", "0", "0")) + \
        wedge(form1("0", "0", "1", "0"), form1("0", "0", "0", "1 + a^2"))
    L = two_form_inverse(Om)
    # flat(sharp(mu)) = -mu
    assert tensor_residual(flat(Om, sharp(L, A1)), -A1, PTS) <= 1e-12


def test_degenerate_two_form_is_rejected():
    Om = wedge(form1("1", "0", "0", "0"), form1("0", "1", "0", "0"))
    with pytest.raises(SingularForm):
        two_form_inverse(Om)


def test_pullback_commutes_with_d_and_wedge():
    S = Chart("S", ("u", "v", "w"))
    phi = SmoothMap("phi", S, R4, tuple(parse_expr(t, S) for t in ("u*v", "sin(w)", "u + w^2", "exp(v)")))
    assert tensor_residual(pullback(phi, ext_deriv(A1)), ext_deriv(pullback(phi, A1)), X.sample_array(S, 30, 1)) <= 1e-12
    lhs = pullback(phi, wedge(A1, B1))
    rhs = wedge(pullback(phi, A1), pullback(phi, B1))
    assert tensor_residual(lhs, rhs, X.sample_array(S, 30, 1)) <= 1e-12


def test_kind_mismatch():
    with pytest.raises(KindMismatch):
        interior(A1, B1)
    with pytest.raises(KindMismatch):
        ext_deriv(XV)


def test_d_of_scalar_requires_chart():
    with pytest.raises(ValueError):
        d(P("a"))
