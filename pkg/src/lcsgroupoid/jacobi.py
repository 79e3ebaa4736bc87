"""L.c.s., Jacobi and contact structures on a single chart, and the maps between them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as X
from .errors import GeometryError, NotContact, NotProjectable, SingularForm
from .expr import Chart, Expr
from .exterior import (
    DifferentialForm,
    MultiVector,
    SmoothMap,
    bivector_apply,
    d,
    ext_deriv,
    flat_inverse,
    max_residual,
    nondegeneracy_guard,
    pairing,
    schouten,
    sharp,
    tensor_residual,
    two_form_inverse,
    vector_field,
    wedge,
)
from .linalg import probe_for, solve_symbolic
from .report import DEFAULT_TOL, CheckReport, record

DEFAULT_SEED = 0xD1CE


@dataclass(frozen=True, eq=False)
class LcsStructure:
    chart: Chart
    Omega: DifferentialForm
    omega: DifferentialForm

    def guard(self) -> Expr:
        return nondegeneracy_guard(self.Omega)


@dataclass(frozen=True, eq=False)
class JacobiStructure:
    chart: Chart
    Lambda: MultiVector
    E: MultiVector
    guards: tuple[Expr, ...] = ()


@dataclass(frozen=True, eq=False)
class ContactStructure:
    chart: Chart
    eta: DifferentialForm
    xi: MultiVector
    guards: tuple[Expr, ...] = field(default=())


def _safe_d(a: DifferentialForm) -> DifferentialForm | None:
    """``d a``, or None when the result would exceed the chart dimension (it is zero)."""
    if a.degree >= a.chart.dim:
        return None
    return ext_deriv(a)


def _safe_wedge(a, b):
    if a.degree + b.degree > a.chart.dim:
        return None
    return wedge(a, b)


def _identity_residual(lhs, rhs, pts) -> float:
    if lhs is None and rhs is None:
        return 0.0
    if lhs is None:
        lhs = type(rhs).zero(rhs.chart, rhs.degree)
    if rhs is None:
        rhs = type(lhs).zero(lhs.chart, lhs.degree)
    return tensor_residual(lhs, rhs, pts)


# ------------------------------------------------------------------ l.c.s.

def check_lcs(Omega: DifferentialForm, omega: DifferentialForm, n: int = 64, seed: int = DEFAULT_SEED,
              tol: float = DEFAULT_TOL) -> CheckReport:
    """Residuals of ``d omega = 0``, ``d Omega = omega ^ Omega`` and nondegeneracy."""
    ch = Omega.chart
    rep = CheckReport("lcs", seed, n, tol)
    if Omega.degree != 2 or omega.degree != 1 or ch.dim % 2:
        rep.fail("lcs.shape", "Sec2", "need a 2-form and a 1-form on an even-dimensional chart")
        return rep
    pts = X.sample_array(ch, n, seed)

    def nondeg():
        guard = nondegeneracy_guard(Omega)
        vals = np.abs(X.evaluate_at([guard], ch, pts)[0])
        bad = vals < X.GUARD_EPS
        if np.any(bad):
            raise SingularForm("2-form degenerates at a sample", dict(zip(ch.vars, pts[int(np.argmax(bad))])))
        return 0.0

    record(rep, "lcs.nondegenerate", "Sec2", nondeg)
    record(rep, "lcs.lee_closed", "Sec2", lambda: _identity_residual(_safe_d(omega), None, pts))
    record(rep, "lcs.eq1", "Eq.1", lambda: _identity_residual(_safe_d(Omega), _safe_wedge(omega, Omega), pts))
    return rep


def lcs_to_jacobi(s: LcsStructure) -> JacobiStructure:
    """``Lambda(a, b) = Omega(flat^-1 a, flat^-1 b)`` and ``E = flat^-1(omega)``."""
    Lam = two_form_inverse(s.Omega)
    E = flat_inverse(s.Omega, s.omega)
    return JacobiStructure(s.chart, Lam, E, (s.guard(),))


def check_jacobi(j: JacobiStructure, n: int = 64, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL) -> CheckReport:
    """Residuals of ``[L, L] = 2 E ^ L`` and ``[E, L] = 0`` (Lichnerowicz bracket)."""
    ch = j.chart
    rep = CheckReport("jacobi", seed, n, tol)
    try:
        pts = X.sample_array(ch, n, seed, j.guards)
    except GeometryError as exc:
        rep.fail("jacobi.sampling", "Sec2", str(exc))
        return rep

    def ll():
        if 3 > ch.dim:
            return 0.0
        lhs = schouten(j.Lambda, j.Lambda, convention="lichnerowicz")
        return tensor_residual(lhs, wedge(j.E, j.Lambda).scale(2.0), pts)

    def el():
        br = schouten(j.E, j.Lambda, convention="lichnerowicz")
        return tensor_residual(br, MultiVector.zero(ch, 2), pts)

    record(rep, "jacobi.LL_eq_2EL", "Sec2", ll)
    record(rep, "jacobi.EL_eq_0", "Sec2", el)
    return rep


def hamiltonian_vf(f, j: JacobiStructure) -> MultiVector:
    """``X_f = sharp_L(d f) + f E``."""
    f = X.as_expr(f)
    return sharp(j.Lambda, d(f, j.chart)) + j.E.scale(f)


# ----------------------------------------------------------------- contact

def reeb(eta: DifferentialForm) -> ContactStructure:
    """Solve ``eta(xi) = 1``, ``i(xi) d eta = 0`` symbolically.

    Uses the bordered system ``[[W^T, eta], [eta^T, 0]] (xi, l) = (0, 1)``,
    which is invertible exactly where ``eta`` is contact (and then ``l = 0``).
    """
    ch = eta.chart
    if eta.degree != 1 or ch.dim % 2 == 0:
        raise NotContact(f"a contact form is a 1-form on an odd-dimensional chart, got degree {eta.degree} on dim {ch.dim}")
    n = ch.dim
    W = ext_deriv(eta).matrix()
    e = eta.vector()
    K = [[W[j][i] for j in range(n)] + [e[i]] for i in range(n)]
    K.append(list(e) + [X.ZERO])
    rhs = [[X.ZERO] for _ in range(n)] + [[X.ONE]]
    try:
        sol, pivots = solve_symbolic(K, rhs, probe_for(ch))
    except SingularForm:
        witness = dict(zip(ch.vars, X.sample_array(ch, 1, 0x5EED)[0]))
        raise NotContact("eta ^ (d eta)^n vanishes", witness) from None
    guard = pivots[0]
    for p in pivots[1:]:
        guard = X.mul(guard, p)
    xi = vector_field(ch, [sol[i][0] for i in range(n)])
    return ContactStructure(ch, eta, xi, (guard,))


def lift_to_product(a, chart: Chart):
    """Pull back a tensor along the projection ``chart -> a.chart`` onto the leading variables."""
    if chart.vars[: a.chart.dim] != a.chart.vars:
        raise ValueError("target chart must extend the source chart's variables")
    return type(a)(chart, a.degree, dict(a.comps))


def fresh_variable(taken, preferred: str = "t") -> str:
    for cand in (preferred, "s", "u", "r", "tau"):
        if cand not in taken:
            return cand
    k = 1
    while f"{preferred}{k}" in taken:
        k += 1
    return f"{preferred}{k}"


def lcs_first_kind(eta: DifferentialForm, new_var: str | None = None) -> LcsStructure:
    """``Omega = -(d eta + dt ^ eta)``, ``omega = -dt`` on ``N x R``."""
    reeb(eta)  # raises NotContact
    ch = eta.chart
    t = new_var or fresh_variable(ch.vars)
    big = ch.extended(t)
    eta_l = lift_to_product(eta, big)
    deta_l = lift_to_product(ext_deriv(eta), big)
    dt = DifferentialForm.basis(big, t)
    Omega = -(deta_l + wedge(dt, eta_l))
    omega = -dt
    return LcsStructure(big, Omega, omega)


# --------------------------------------------------- conformal pushforward

@dataclass(frozen=True, eq=False)
class Pushforward:
    jacobi: JacobiStructure
    report: CheckReport


def conformal_pushforward(phi: SmoothMap, eps: SmoothMap, factor: Expr, j: JacobiStructure,
                          n: int = 64, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL,
                          strict: bool = True, sample_guards=()) -> Pushforward:
    """Push ``(factor * L, X_factor)`` down along ``phi`` using the section ``eps``.

    The base structure is read off at ``eps(x)``; the report then compares
    ``factor * L(phi* mu, phi* nu)`` and ``T phi (X_factor)`` at general
    sampled points ``g`` against the base values at ``phi(g)``.
    """
    src, tgt = phi.source, phi.target
    factor = src.check_expr(X.as_expr(factor))
    dphi = phi.differentials
    Xf = hamiltonian_vf(factor, j)
    up_L = {(a, b): X.mul(factor, bivector_apply(j.Lambda, dphi[a], dphi[b]))
            for a in range(tgt.dim) for b in range(a + 1, tgt.dim)}
    up_E = [pairing(dphi[a], Xf) for a in range(tgt.dim)]
    sub = eps.substitution
    memo: dict = {}
    L0 = MultiVector(tgt, 2, {k: X.substitute(v, sub, memo) for k, v in up_L.items()})
    E0 = vector_field(tgt, [X.substitute(v, sub, memo) for v in up_E])
    guards = tuple(X.substitute(g, sub, memo) for g in j.guards)
    base = JacobiStructure(tgt, L0, E0, guards)

    rep = CheckReport("projectability", seed, n, tol)
    guards_src = tuple(j.guards) + tuple(sample_guards)

    def section():
        xs = X.sample_array(tgt, n, seed, guards)
        return max_residual(phi(eps(xs)), xs)

    def unit_factor():
        xs = X.sample_array(tgt, n, seed, guards)
        return max_residual(X.evaluate_at([X.substitute(factor, sub)], tgt, xs), 1.0)

    def proj(up, down):
        gs = X.sample_array(src, n, seed, guards_src)
        hi = X.evaluate_at(up, src, gs)
        lo = X.evaluate_at(down, tgt, phi(gs))
        return max_residual(hi, lo)

    keys = list(up_L)
    record(rep, "pushforward.section", "Sec5", section)
    record(rep, "pushforward.unit_factor", "Eq.4", unit_factor)
    record(rep, "pushforward.Lambda0", "Sec5", lambda: proj([up_L[k] for k in keys], [L0[k] for k in keys]))
    record(rep, "pushforward.E0", "Sec5", lambda: proj(up_E, E0.vector()))
    if strict and not rep.passed:
        bad = rep.failures()[0]
        raise NotProjectable(f"{bad.id}: residual {bad.max_residual:.3e}", bad.detail or None)
    return Pushforward(base, rep)
