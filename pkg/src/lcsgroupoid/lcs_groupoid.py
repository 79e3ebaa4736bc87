"""Contact, l.c.s. and Jacobi groupoids, and the Lie algebroid of an l.c.s. groupoid.

Every check returns a CheckReport with one entry per identity.  Identities
between forms on composable pairs are evaluated as identities of pulled-back
forms on the pair chart ``P``: a tangent vector of ``P`` at ``p`` is exactly a
composable tangent pair ``(T pi1 V, T pi2 V)`` with product ``T m V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as X
from .errors import BasicnessViolation, NotInFiber, RankDeficiency
from .expr import Chart, Expr
from .exterior import (
    DifferentialForm,
    MultiVector,
    bivector_apply,
    d,
    ext_deriv,
    interior,
    lie_bracket,
    lie_deriv,
    max_residual,
    one_form,
    pairing,
    pullback,
    sharp,
    tensor_residual,
    wedge,
)
from .groupoid import (
    CotangentGroupoid,
    Elt,
    GroupoidPresentation,
    TangentGroupoid,
    build_action_groupoid_GxR,
    check_multiplicative,
    invariant_extension,
    morphism_check,
    pullback_pair,
)
from .jacobi import (
    JacobiStructure,
    LcsStructure,
    check_jacobi,
    check_lcs,
    conformal_pushforward,
    fresh_variable,
    lcs_first_kind,
    lcs_to_jacobi,
    lift_to_product,
    reeb,
)
from .report import DEFAULT_TOL, CheckReport, record

DEFAULT_SEED = 0xD1CE


# ------------------------------------------------------------ data types

@dataclass(frozen=True, eq=False)
class ContactGroupoidData:
    G: GroupoidPresentation
    eta: DifferentialForm
    sigma: Expr = X.ZERO


@dataclass(frozen=True, eq=False)
class LcsGroupoidData:
    G: GroupoidPresentation
    Omega: DifferentialForm
    omega: DifferentialForm
    sigma: Expr = X.ZERO

    @cached_property
    def theta(self) -> DifferentialForm:
        """``theta = e^sigma (d sigma - omega)``."""
        ch = self.G.chart_g
        return (d(self.sigma, ch) - self.omega).scale(X.exp(self.sigma))

    @cached_property
    def lcs(self) -> LcsStructure:
        return LcsStructure(self.G.chart_g, self.Omega, self.omega)

    @cached_property
    def jacobi(self) -> JacobiStructure:
        return lcs_to_jacobi(self.lcs)

    def jacobi_data(self) -> JacobiGroupoidData:
        return JacobiGroupoidData(self.G, self.jacobi, self.sigma)


@dataclass(frozen=True, eq=False)
class JacobiGroupoidData:
    G: GroupoidPresentation
    jacobi: JacobiStructure
    sigma: Expr = X.ZERO


@dataclass(frozen=True, eq=False)
class AlgebroidBracketData:
    """``(Lambda0, E0, theta0)`` on the base; the bracket is :func:`algebroid_bracket`."""

    base: JacobiStructure
    theta0: DifferentialForm

    @property
    def chart(self) -> Chart:
        return self.base.chart


# --------------------------------------------------------------- helpers

def _form_identity(lhs: DifferentialForm, rhs: DifferentialForm, pts) -> float:
    return tensor_residual(lhs, rhs, pts)


def _values(a, pts: np.ndarray) -> np.ndarray:
    """Components of a degree-1 tensor at each point, shape ``(n, dim)``."""
    return X.evaluate_at(a.vector(), a.chart, np.atleast_2d(pts)).T


def _scalar(f: Expr, chart: Chart, pts: np.ndarray) -> np.ndarray:
    return X.evaluate_at([f], chart, np.atleast_2d(pts))[0]


def _sharp_at(j: JacobiStructure, g: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """``sharp_Lambda(mu)`` at one point: ``<nu, sharp mu> = Lambda(mu, nu)``."""
    L = j.Lambda.dense(g)[0]
    return L.T @ mu


def _vec_at(v: MultiVector, g: np.ndarray) -> np.ndarray:
    return _values(v, g)[0]


def _sigma_pi1(G: GroupoidPresentation, sigma: Expr) -> Expr:
    return G.pi1.pull_scalar(sigma)


def _merge(rep: CheckReport, other: CheckReport, prefix: str = "") -> None:
    rep.merge(other, prefix)


def random_poly_form(chart: Chart, rng: np.random.Generator, degree: int = 2) -> DifferentialForm:
    """A 1-form whose components are random polynomials of total degree <= ``degree``."""
    monos = [X.ONE]
    for _ in range(degree):
        monos = list({id(m): m for m in monos + [X.mul(m, X.var(v)) for m in monos for v in chart.vars]}.values())
    comps = []
    for _ in chart.vars:
        coeffs = np.round(rng.uniform(-1.0, 1.0, len(monos)), 3)
        comps.append(X.total(X.mul(X.const(c), m) for c, m in zip(coeffs, monos) if c != 0.0))
    return one_form(chart, comps)


def random_poly_scalar(chart: Chart, rng: np.random.Generator, degree: int = 2) -> Expr:
    return random_poly_form(chart, rng, degree).vector()[0]


# --------------------------------------------------------- contact groupoids

def check_contact_groupoid(data: ContactGroupoidData, n: int = 100, seed: int = DEFAULT_SEED,
                           tol: float = DEFAULT_TOL) -> CheckReport:
    """Twisted multiplicativity of ``eta`` and its consequences.

    Raises NotContact if ``eta`` is not a contact form.
    """
    G, eta, sigma = data.G, data.eta, X.as_expr(data.sigma)
    contact = reeb(eta)
    rep = CheckReport("contact-groupoid", seed, n, tol)
    _merge(rep, check_multiplicative(G, sigma, n, seed, tol))
    T = TangentGroupoid(G)
    chG = G.chart_g

    def eq3():
        worst = 0.0
        for a, b in T.sample_pairs(n, seed):
            ab = T.product(a, b)
            lhs = _vec_at(eta, ab.base) @ ab.vec
            w = np.exp(_scalar(sigma, chG, a.base)[0])
            rhs = _vec_at(eta, a.base) @ a.vec + w * (_vec_at(eta, b.base) @ b.vec)
            worst = max(worst, max_residual(lhs, rhs))
        return worst

    def eq5():
        gs = X.sample_array(chG, n, seed, contact.guards)
        xi_sigma = pairing(d(sigma, chG), contact.xi)
        return max_residual(_scalar(xi_sigma, chG, gs), 0.0)

    def eq6():
        P = G.chart_p
        pts = X.sample_array(P, n, seed)
        deta = ext_deriv(eta)
        m_de, p1_de, p2_de = pullback_pair(G, deta)
        w = X.exp(_sigma_pi1(G, sigma))
        twist = wedge(pullback(G.pi1, d(sigma, chG)), pullback(G.pi2, eta))
        return _form_identity(m_de, p1_de + (p2_de + twist).scale(w), pts)

    record(rep, "contact.eq3", "Eq.3", eq3)
    record(rep, "contact.eq4", "Eq.4", lambda: rep["sigma.eq4_units"].max_residual)
    record(rep, "contact.eq5", "Eq.5", eq5)
    record(rep, "contact.eq6", "Eq.6", eq6)
    return rep


def build_lcs_from_contact(data: ContactGroupoidData, new_var: str | None = None) -> LcsGroupoidData:
    """The l.c.s. groupoid ``G x R => M x R`` built from a contact groupoid."""
    G = data.G
    taken = set(G.chart_g.vars) | set(G.chart_m.vars) | set(G.chart_p.vars)
    t = new_var or fresh_variable(taken)
    GR = build_action_groupoid_GxR(G, data.sigma, t)
    s = lcs_first_kind(data.eta, t)
    same = s.chart.vars == GR.chart_g.vars and s.chart.name == GR.chart_g.name
    if not same:  # pragma: no cover - both charts come from Chart.extended
        raise AssertionError("chart mismatch between G x R and the l.c.s. chart")
    return LcsGroupoidData(GR, s.Omega, s.omega, X.as_expr(data.sigma))


_PROP31 = {
    "def41.eq14": ("prop31.i", "Prop3.1.i/Eq.14"),
    "def41.eq15_alpha_omega": ("prop31.ii_alpha_omega", "Prop3.1.ii/Eq.15"),
    "def41.eq15_beta_theta": ("prop31.ii_beta_theta", "Prop3.1.ii/Eq.15"),
    "def41.eq16_omega": ("prop31.iii_omega", "Prop3.1.iii/Eq.16"),
    "def41.eq16_theta": ("prop31.iii_theta", "Prop3.1.iii/Eq.16"),
    "def41.eq17_lambda": ("prop31.iv_lambda", "Prop3.1.iv/Eq.17"),
    "def41.eq17_units": ("prop31.iv_units", "Prop3.1.iv/Eq.17"),
}


def check_prop_3_1(data: ContactGroupoidData, n: int = 64, seed: int = DEFAULT_SEED, tol: float = 1e-7,
                   new_var: str | None = None) -> CheckReport:
    """Items i)-iv) for the l.c.s. groupoid built from ``data``, plus ``E = -xi``."""
    lcs = build_lcs_from_contact(data, new_var)
    rep = CheckReport("prop-3-1", seed, n, tol)
    inner = check_lcs_groupoid(lcs, n, seed, tol)
    for e in inner.entries:
        new_id, tag = _PROP31.get(e.id, (e.id, e.paper_tag))
        rep.add(new_id, tag, e.max_residual, e.samples, e.tolerance, e.detail)

    def eq12():
        ch = lcs.G.chart_g
        xi = lift_to_product(reeb(data.eta).xi, ch)
        pts = X.sample_array(ch, n, seed, lcs.jacobi.guards)
        return tensor_residual(lcs.jacobi.E, -xi, pts)

    def omega_is_minus_dt():
        ch = lcs.G.chart_g
        dt = DifferentialForm.basis(ch, ch.vars[-1])
        return tensor_residual(lcs.omega, -dt, X.sample_array(ch, n, seed))

    record(rep, "prop31.eq11_omega", "Eq.11", omega_is_minus_dt)
    record(rep, "prop31.eq12_E_minus_reeb", "Eq.12", eq12)
    return rep


# --------------------------------------------------------- l.c.s. groupoids

def check_lcs_groupoid(data: LcsGroupoidData, n: int = 64, seed: int = DEFAULT_SEED,
                       tol: float = DEFAULT_TOL) -> CheckReport:
    """All conditions of the l.c.s.-groupoid definition, one entry each."""
    G, Omega, omega, sigma = data.G, data.Omega, data.omega, X.as_expr(data.sigma)
    chG, P = G.chart_g, G.chart_p
    rep = CheckReport("lcs-groupoid", seed, n, tol)
    _merge(rep, check_lcs(Omega, omega, n, seed, tol))
    _merge(rep, check_multiplicative(G, sigma, n, seed, tol))
    theta = data.theta
    w = X.exp(_sigma_pi1(G, sigma))
    ppts = X.sample_array(P, n, seed)
    C = CotangentGroupoid(G)

    def eq14():
        m_O, p1_O, p2_O = pullback_pair(G, Omega)
        return _form_identity(m_O, p1_O + p2_O.scale(w), ppts)

    def eq16_omega():
        m_w, p1_w, _ = pullback_pair(G, omega)
        return _form_identity(m_w, p1_w, ppts)

    def eq16_theta():
        m_t, _, p2_t = pullback_pair(G, theta)
        return _form_identity(m_t, p2_t.scale(w), ppts)

    def eq15(form, matrix):
        def run():
            gs = X.sample_array(chG, n, seed)
            vals = _values(form, gs)
            return max((max_residual(matrix(g) @ v, 0.0) for g, v in zip(gs, vals)), default=0.0)
        return run

    def eq17_lambda():
        j = data.jacobi
        gs = X.sample_array(chG, n, seed, j.guards)
        return max_residual(_scalar(bivector_apply(j.Lambda, omega, theta), chG, gs), 0.0)

    def eq17_units():
        xs = X.sample_array(G.chart_m, n, seed)
        worst = 0.0
        for x in xs:
            e = G.eps(x)
            w_e = _vec_at(omega, e)
            back = C.eps_tilde(C.beta_tilde(e, w_e))
            worst = max(worst, max_residual(_vec_at(theta, e) + w_e - back.vec, 0.0))
        return worst

    record(rep, "def41.eq14", "Def4.1/Eq.14", eq14)
    record(rep, "def41.eq15_alpha_omega", "Def4.1/Eq.15", eq15(omega, C.alpha_matrix))
    record(rep, "def41.eq15_beta_theta", "Def4.1/Eq.15", eq15(theta, C.beta_matrix))
    record(rep, "def41.eq16_omega", "Def4.1/Eq.16", eq16_omega)
    record(rep, "def41.eq16_theta", "Def4.1/Eq.16", eq16_theta)
    record(rep, "def41.eq17_lambda", "Def4.1/Eq.17", eq17_lambda)
    record(rep, "def41.eq17_units", "Def4.1/Eq.17", eq17_units)
    return rep


# --------------------------------------------------------- Jacobi groupoids

def jacobi_sharp(j: JacobiStructure):
    """``(mu, gamma) -> (sharp_Lambda mu + gamma E, -mu(E))`` on elements."""
    def Phi(a: Elt) -> Elt:
        E = _vec_at(j.E, a.base)
        vec = _sharp_at(j, a.base, a.vec) + a.ext * E
        return Elt(a.base, vec, float(-(a.vec @ E)))
    return Phi


def lambda_sharp(j: JacobiStructure):
    def Phi(a: Elt) -> Elt:
        return Elt(a.base, _sharp_at(j, a.base, a.vec))
    return Phi


def _jacobi_prelude(data: JacobiGroupoidData, n, seed, tol, rep: CheckReport, structure_check: bool) -> None:
    if structure_check:
        _merge(rep, check_jacobi(data.jacobi, n, seed, tol))
    _merge(rep, check_multiplicative(data.G, data.sigma, n, seed, tol))


def check_jacobi_groupoid(data: JacobiGroupoidData, mode: str = "definition", n: int = 50,
                          seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL,
                          structure_check: bool = True) -> CheckReport:
    """Jacobi-groupoid conditions.

    ``definition``: ``#_(Lambda,E)`` is a groupoid morphism ``T*G x R -> TG x R``
    over ``phi0 = target o # o unit``.  ``characterization``: the three
    conditions (i) ``#_Lambda`` is a morphism from the sigma-cotangent
    groupoid to ``TG``, (ii) ``E`` is right-invariant with ``E(sigma) = 0``,
    (iii) ``#_Lambda(d sigma) = X0_right - e^-sigma X0_left``.
    """
    if mode not in ("definition", "characterization"):
        raise ValueError(f"unknown mode {mode!r}")
    G, j, sigma = data.G, data.jacobi, X.as_expr(data.sigma)
    rep = CheckReport(f"jacobi-groupoid:{mode}", seed, n, tol)
    _jacobi_prelude(data, n, seed, tol, rep, structure_check)
    if mode == "definition":
        dom = CotangentGroupoid(G, sigma, "extended", guards=j.guards)
        cod = TangentGroupoid(G, sigma, guards=j.guards)
        Phi = jacobi_sharp(j)
        phi0 = lambda b: cod.target(Phi(dom.unit(b)))  # noqa: E731
        _merge(rep, morphism_check(Phi, phi0, dom, cod, n, seed, tol, prefix="def43",
                                   tags=("Def4.3/Eq.19", "Def4.3/Eq.19", "Def4.3/Eq.18")))
        return rep

    dom = CotangentGroupoid(G, sigma, "sigma", guards=j.guards)
    cod = TangentGroupoid(G, guards=j.guards)
    Phi = lambda_sharp(j)
    phi0 = lambda b: cod.target(Phi(dom.unit(b)))  # noqa: E731
    _merge(rep, morphism_check(Phi, phi0, dom, cod, n, seed, tol, prefix="prop45.i",
                               tags=("Prop4.5.i/Eq.21", "Prop4.5.i/Eq.21", "Prop4.5.i/Eq.20")))
    chG, M = G.chart_g, G.chart_m
    X0 = [X.substitute(c, G.eps.substitution) for c in (-j.E).vector()]
    gs = X.sample_array(chG, n, seed, j.guards)

    def x0_in_fiber():
        xs = X.sample_array(M, n, seed)
        vals = X.evaluate_at(X0, M, xs).T
        Ja = G.alpha.jacobian_at(G.eps(xs))
        return max_residual(np.einsum("nij,nj->ni", Ja, vals), 0.0)

    def right_invariant():
        right = invariant_extension(G, X0, "right", tol=max(tol, 1e-9))
        return max_residual(_values(j.E, gs), -right(gs))

    def e_sigma():
        return max_residual(_scalar(pairing(d(sigma, chG), j.E), chG, gs), 0.0)

    def identity_iii():
        right = invariant_extension(G, X0, "right", tol=max(tol, 1e-9))(gs)
        left = invariant_extension(G, X0, "left", tol=max(tol, 1e-9))(gs)
        lhs = _values(sharp(j.Lambda, d(sigma, chG)), gs)
        w = np.exp(-_scalar(sigma, chG, gs))[:, None]
        return max_residual(lhs, right - w * left)

    record(rep, "prop45.ii_X0_in_A", "Prop4.5.ii", x0_in_fiber)
    record(rep, "prop45.ii_right_invariant", "Prop4.5.ii", right_invariant)
    record(rep, "prop45.ii_E_sigma", "Prop4.5.ii", e_sigma)
    record(rep, "prop45.iii", "Prop4.5.iii", identity_iii)
    return rep


# ---------------------------------------------------- equivalence check

@dataclass
class Theorem46Outcome:
    """Verdicts of the two sides; ``status`` is ``agree``, ``disagree`` or ``not_lcs``."""

    lcs: CheckReport
    jacobi: CheckReport | None
    status: str
    report: CheckReport = field(repr=False)


def theorem_4_6_crosscheck(data: LcsGroupoidData, n: int = 50, seed: int = DEFAULT_SEED,
                           tol: float = 1e-7) -> Theorem46Outcome:
    """Compare the l.c.s.-groupoid verdict with the Jacobi-groupoid verdict of
    the associated Jacobi structure (definition and characterization modes)."""
    rep = CheckReport("thm-4-6", seed, n, tol)
    lcs_rep = check_lcs_groupoid(data, n, seed, tol)
    pre = [e for e in lcs_rep.entries if e.id.startswith("lcs.")]
    if not all(e.passed for e in pre):
        bad = ", ".join(e.id for e in pre if not e.passed)
        rep.add("thm46.agreement", "Thm4.6", 0.0, detail=f"NotLcs ({bad}): excluded")
        return Theorem46Outcome(lcs_rep, None, "not_lcs", rep)
    jd = data.jacobi_data()
    jac = check_jacobi_groupoid(jd, "definition", n, seed, tol)
    char = check_jacobi_groupoid(jd, "characterization", n, seed, tol, structure_check=False)
    jac.merge(char, "char/")
    d_ok = all(e.passed for e in jac.entries if not e.id.startswith("char/"))
    c_ok = all(e.passed for e in char.entries)
    verdicts = {lcs_rep.passed, d_ok, c_ok}
    status = "agree" if len(verdicts) == 1 else "disagree"
    detail = f"lcs={lcs_rep.verdict} definition={'pass' if d_ok else 'fail'} characterization={'pass' if c_ok else 'fail'}"
    rep.add("thm46.agreement", "Thm4.6", 0.0 if status == "agree" else float("inf"), detail=detail)
    return Theorem46Outcome(lcs_rep, jac, status, rep)


# ----------------------------------------------------------- Section 5

@dataclass(frozen=True, eq=False)
class InducedJacobi:
    jacobi: JacobiStructure
    report: CheckReport


def induced_jacobi_on_M(data: LcsGroupoidData, n: int = 64, seed: int = DEFAULT_SEED,
                        tol: float = DEFAULT_TOL, strict: bool = True) -> InducedJacobi:
    """``(Lambda0, E0)`` making ``(alpha, e^sigma)`` a conformal Jacobi morphism."""
    G = data.G
    pf = conformal_pushforward(G.alpha, G.eps, X.exp(X.as_expr(data.sigma)), data.jacobi, n, seed, tol, strict)
    rep = CheckReport("induced-jacobi", seed, n, tol)
    rep.merge(pf.report)
    rep.merge(check_jacobi(pf.jacobi, n, seed, tol), "base.")
    return InducedJacobi(pf.jacobi, rep)


@dataclass(frozen=True, eq=False)
class Theta0:
    theta0: DifferentialForm
    report: CheckReport


def compute_theta0(data: LcsGroupoidData, n: int = 100, seed: int = DEFAULT_SEED, tol: float = 1e-7,
                   strict: bool = True, base: JacobiStructure | None = None) -> Theta0:
    """``theta0 = eps*(e^-sigma theta)`` with the checks ``alpha* theta0 = e^-sigma theta``,
    ``d theta0 = 0`` and ``sharp_Lambda0(theta0) = E0``."""
    G = data.G
    sigma = X.as_expr(data.sigma)
    target = data.theta.scale(X.exp(X.neg(sigma)))
    theta0 = pullback(G.eps, target)
    rep = CheckReport("theta0", seed, n, tol)
    chG, M = G.chart_g, G.chart_m

    def basic():
        gs = X.sample_array(chG, n, seed)
        return tensor_residual(pullback(G.alpha, theta0), target, gs)

    def closed():
        if M.dim < 2:
            return 0.0
        return tensor_residual(ext_deriv(theta0), DifferentialForm.zero(M, 2), X.sample_array(M, n, seed))

    record(rep, "prop51.basic", "Prop5.1", basic)
    if strict and not rep["prop51.basic"].passed:
        raise BasicnessViolation(f"theta is not alpha-basic (residual {rep['prop51.basic'].max_residual:.3e})")
    record(rep, "prop51.closed", "Prop5.1", closed)

    def sharp_theta0():
        j0 = base if base is not None else induced_jacobi_on_M(data, n, seed, tol, strict=False).jacobi
        xs = X.sample_array(M, n, seed, j0.guards)
        return tensor_residual(sharp(j0.Lambda, theta0), j0.E, xs)

    record(rep, "prop51.sharp_theta0", "Prop5.1", sharp_theta0)
    return Theta0(theta0, rep)


def algebroid_bracket(b: AlgebroidBracketData, mu: DifferentialForm, nu: DifferentialForm) -> DifferentialForm:
    """``L_{#mu} nu - L_{#nu} mu - d(L0(mu, nu)) - i(E0)(mu ^ nu) - L0(mu, nu) theta0``."""
    L0, E0 = b.base.Lambda, b.base.E
    ch = b.chart
    lmn = bivector_apply(L0, mu, nu)
    out = lie_deriv(sharp(L0, mu), nu) - lie_deriv(sharp(L0, nu), mu) - d(lmn, ch)
    if ch.dim >= 2:
        out = out - interior(E0, wedge(mu, nu))
    return out - b.theta0.scale(lmn)


def algebroid_anchor(b: AlgebroidBracketData, mu: DifferentialForm) -> MultiVector:
    return sharp(b.base.Lambda, mu)


def psi(data: LcsGroupoidData, mu: DifferentialForm) -> MultiVector:
    """``Psi(mu) = e^sigma sharp_Lambda(alpha* mu)``."""
    return sharp(data.jacobi.Lambda, pullback(data.G.alpha, mu)).scale(X.exp(X.as_expr(data.sigma)))


def algebroid_data(data: LcsGroupoidData, n: int = 64, seed: int = DEFAULT_SEED,
                   tol: float = DEFAULT_TOL) -> AlgebroidBracketData:
    base = induced_jacobi_on_M(data, n, seed, tol).jacobi
    th = compute_theta0(data, n, seed, max(tol, 1e-7), strict=True, base=base).theta0
    return AlgebroidBracketData(base, th)


def verify_algebroid_iso(data: LcsGroupoidData, n: int = 64, seed: int = DEFAULT_SEED, tol: float = 1e-7,
                         theta0: DifferentialForm | None = None,
                         forms: Sequence[DifferentialForm] | None = None) -> CheckReport:
    """Blocks (a)-(e) relating ``Psi`` to the bracket on ``T*M``.

    ``theta0`` overrides the computed form (to plant failures); ``forms``
    overrides the three random polynomial 1-forms ``mu, nu, lambda``.
    """
    G = data.G
    chG, M = G.chart_g, G.chart_m
    rep = CheckReport("algebroid", seed, n, tol)
    ind = induced_jacobi_on_M(data, n, seed, tol, strict=False)
    rep.merge(ind.report, "induced.")
    if theta0 is None:
        theta0 = compute_theta0(data, n, seed, tol, strict=False, base=ind.jacobi).theta0
    b = AlgebroidBracketData(ind.jacobi, theta0)
    rng = np.random.default_rng([seed & (2**64 - 1), 0xA1])
    if forms is None:
        forms = [random_poly_form(M, rng) for _ in range(3)]
    mu, nu, lam = forms
    f = random_poly_scalar(M, rng)
    j = data.jacobi
    sigma = X.as_expr(data.sigma)
    gs = X.sample_array(chG, n, seed, j.guards)
    xs = X.sample_array(M, n, seed, ind.jacobi.guards)
    Pm, Pn = psi(data, mu), psi(data, nu)

    def beta_vertical():
        worst = 0.0
        for P_ in (Pm, Pn):
            vals = _values(P_, gs)
            Jb = G.beta.jacobian_at(gs)
            worst = max(worst, max_residual(np.einsum("nij,nj->ni", Jb, vals), 0.0))
        return worst

    def left_invariant():
        _, g, h = G.sample_pairs(n, seed, G.pair_guards(j.guards))
        gh = G.product(g, h)
        worst = 0.0
        for P_ in (Pm, Pn):
            at_h, at_gh = _values(P_, h), _values(P_, gh)
            moved = np.array([G.left_translation(gi, hi) @ v for gi, hi, v in zip(g, h, at_h)])
            worst = max(worst, max_residual(at_gh, moved))
        return worst

    def rank():
        worst = 0.0
        basis = [DifferentialForm.basis(M, v) for v in M.vars]
        cols = [psi(data, bf) for bf in basis]
        for x in X.sample_array(M, n, seed):
            e = G.eps(x)
            A = np.column_stack([_vec_at(c, e) for c in cols])
            r = np.linalg.matrix_rank(A, tol=1e-9 * max(1.0, np.abs(A).max()))
            if r != M.dim:
                raise RankDeficiency(f"Psi has rank {r} < {M.dim} at the unit", dict(zip(M.vars, x)))
            # T inv maps the beta-kernel at units onto A_x = ker T alpha
            moved = G.alpha.jacobian_at(e) @ G.inv.jacobian_at(e) @ A
            if np.abs(moved).max() > 1e-9 * (1.0 + np.abs(A).max()):
                raise NotInFiber("T inv Psi(mu) is not in ker T alpha", dict(zip(M.vars, x)))
            worst = max(worst, max_residual(moved, 0.0))
        return worst

    def anchor():
        worst = 0.0
        for form, P_ in ((mu, Pm), (nu, Pn)):
            up = np.einsum("nij,nj->ni", G.alpha.jacobian_at(gs), _values(P_, gs))
            down = _values(algebroid_anchor(b, form), G.alpha(gs))
            worst = max(worst, max_residual(up, down))
        return worst

    def bracket():
        lhs = interior(lie_bracket(Pm, Pn), data.Omega)
        rhs = pullback(G.alpha, algebroid_bracket(b, mu, nu)).scale(X.neg(X.exp(sigma)))
        return tensor_residual(lhs, rhs, gs)

    def jacobi_identity():
        br = lambda a, c: algebroid_bracket(b, a, c)  # noqa: E731
        total = br(mu, br(nu, lam)) + br(nu, br(lam, mu)) + br(lam, br(mu, nu))
        return tensor_residual(total, DifferentialForm.zero(M, 1), xs)

    def leibniz():
        lhs = algebroid_bracket(b, mu, nu.scale(f))
        rhs = algebroid_bracket(b, mu, nu).scale(f) + nu.scale(pairing(d(f, M), sharp(b.base.Lambda, mu)))
        return tensor_residual(lhs, rhs, xs)

    record(rep, "thm52.a_beta_vertical", "Thm5.2(a)", beta_vertical)
    record(rep, "thm52.a_left_invariant", "Thm5.2(a)", left_invariant)
    record(rep, "thm52.b_rank", "Thm5.2(b)", rank)
    record(rep, "thm52.c_anchor", "Thm5.2(c)", anchor)
    record(rep, "thm52.d_bracket", "Thm5.2(d)", bracket)
    record(rep, "thm52.e_jacobi", "Thm5.2(e)", jacobi_identity)
    record(rep, "thm52.e_leibniz", "Thm5.2(e)", leibniz)
    return rep


def koszul_bracket(Pi: MultiVector, mu: DifferentialForm, nu: DifferentialForm) -> DifferentialForm:
    """``L_{#mu} nu - L_{#nu} mu - d(Pi(mu, nu))`` for a Poisson bivector."""
    return lie_deriv(sharp(Pi, mu), nu) - lie_deriv(sharp(Pi, nu), mu) - d(bivector_apply(Pi, mu, nu), Pi.chart)


def check_symplectic_algebroid(data: LcsGroupoidData, n: int = 64, seed: int = DEFAULT_SEED,
                               tol: float = 1e-9) -> CheckReport:
    """For a symplectic groupoid: ``E0 = 0``, ``theta0 = 0`` and the bracket is the Koszul bracket."""
    M = data.G.chart_m
    rep = CheckReport("symplectic-algebroid", seed, n, tol)
    b = algebroid_data(data, n, seed)
    xs = X.sample_array(M, n, seed, b.base.guards)
    rng = np.random.default_rng([seed & (2**64 - 1), 0xC0])
    mu, nu = random_poly_form(M, rng), random_poly_form(M, rng)
    record(rep, "rem53.E0_zero", "Rem5.3", lambda: tensor_residual(b.base.E, MultiVector.zero(M, 1), xs))
    record(rep, "rem53.theta0_zero", "Rem5.3", lambda: tensor_residual(b.theta0, DifferentialForm.zero(M, 1), xs))
    record(rep, "rem53.koszul", "Rem5.3",
           lambda: tensor_residual(algebroid_bracket(b, mu, nu), koszul_bracket(b.base.Lambda, mu, nu), xs))
    return rep
