"""Lie groupoids in global coordinates and their derived groupoids.

Conventions: ``g h`` is defined when ``alpha(g) = beta(h)``; then
``alpha(g h) = alpha(h)`` and ``beta(g h) = beta(g)``.  The algebroid fiber is
``A_x = ker T alpha`` at ``eps(x)``; right translation ``R_h`` acts on alpha-fibers
and left-invariant fields are extended along ``L_g o inv``.

A presentation carries a chart ``P`` parametrizing composable pairs through
``sampler: P -> G*G``, the multiplication ``mult: P -> G`` and a ``lift:
G*G -> P`` with ``lift o sampler = id`` which keeps the first factor of its
argument.  ``mult o lift`` is then a smooth extension of the multiplication
to all of ``G*G``; its partial Jacobians with one factor frozen give the
tangent maps of left and right translations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import expr as X
from .errors import NotComposable, NotInFiber, RankDeficiency
from .expr import Chart, Expr
from .exterior import DifferentialForm, SmoothMap, max_residual, pullback, same_chart
from .linalg import DEFAULT_TOL as LINALG_TOL
from .linalg import null_space, numerical_rank, solve
from .report import DEFAULT_TOL, CheckReport, record

DEFAULT_SEED = 0xD1CE


def projection(prod: Chart, factor: Chart, which: int, name: str | None = None) -> SmoothMap:
    """Projection of a product chart (built by ``Chart.product``) onto one factor."""
    off = 0 if which == 1 else prod.dim - factor.dim
    comps = tuple(X.var(prod.vars[off + i]) for i in range(factor.dim))
    return SmoothMap(name or f"pr{which}", prod, factor, comps)


@dataclass(frozen=True, eq=False)
class GroupoidPresentation:
    name: str
    chart_g: Chart
    chart_m: Chart
    chart_p: Chart
    alpha: SmoothMap
    beta: SmoothMap
    mult: SmoothMap
    eps: SmoothMap
    inv: SmoothMap
    sampler: SmoothMap
    lift: SmoothMap

    def __post_init__(self):
        G, M, P = self.chart_g, self.chart_m, self.chart_p
        for m, s, t in ((self.alpha, G, M), (self.beta, G, M), (self.mult, P, G), (self.eps, M, G), (self.inv, G, G)):
            same_chart(m.source, s)
            same_chart(m.target, t)
        same_chart(self.sampler.source, P)
        same_chart(self.lift.target, P)
        same_chart(self.sampler.target, self.lift.source)
        if self.sampler.target.dim != 2 * G.dim:
            raise ValueError("sampler must map into the product chart G*G")

    # ------------------------------------------------------------ derived maps
    @property
    def chart_gg(self) -> Chart:
        return self.sampler.target

    @property
    def dim_g(self) -> int:
        return self.chart_g.dim

    @property
    def dim_m(self) -> int:
        return self.chart_m.dim

    @cached_property
    def pr1(self) -> SmoothMap:
        return projection(self.chart_gg, self.chart_g, 1)

    @cached_property
    def pr2(self) -> SmoothMap:
        return projection(self.chart_gg, self.chart_g, 2)

    @cached_property
    def pi1(self) -> SmoothMap:
        """First factor of a composable pair, as a map ``P -> G``."""
        return self.pr1.compose(self.sampler, "pi1")

    @cached_property
    def pi2(self) -> SmoothMap:
        return self.pr2.compose(self.sampler, "pi2")

    @cached_property
    def mult_ext(self) -> SmoothMap:
        return self.mult.compose(self.lift, "mult_ext")

    def gg(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        return np.concatenate([np.atleast_2d(g), np.atleast_2d(h)], axis=1)

    # ------------------------------------------------------------- numerics
    def product(self, g, h) -> np.ndarray:
        """``g h`` for arrays of composable pairs."""
        single = np.ndim(g) == 1
        out = self.mult(self.lift(self.gg(g, h)))
        return out[0] if single else out

    def pair_coords(self, g, h) -> np.ndarray:
        single = np.ndim(g) == 1
        out = self.lift(self.gg(g, h))
        return out[0] if single else out

    def right_translation(self, a, h) -> np.ndarray:
        """``T R_h`` at ``a`` (``alpha(a) = beta(h)``): Jacobian in the first factor."""
        J = self.mult_ext.jacobian_at(np.concatenate([a, h]))
        return J[:, : self.dim_g]

    def left_translation(self, g, b) -> np.ndarray:
        """``T L_g`` at ``b``: Jacobian of the product in the second factor."""
        J = self.mult_ext.jacobian_at(np.concatenate([g, b]))
        return J[:, self.dim_g:]

    def unit_projector(self, x) -> np.ndarray:
        """Projection of ``T_{eps(x)} G`` onto ``A_x`` along ``im T eps``."""
        e = self.eps(x)
        return np.eye(self.dim_g) - self.eps.jacobian_at(x) @ self.alpha.jacobian_at(e)

    def sample_pairs(self, n: int, seed: int, guards: Sequence[Expr] = ()):
        """``(p, g, h)`` arrays for ``n`` composable pairs."""
        p = X.sample_array(self.chart_p, n, seed, guards)
        gh = self.sampler(p)
        return p, gh[:, : self.dim_g], gh[:, self.dim_g:]

    def pair_guards(self, guards: Sequence[Expr]) -> tuple[Expr, ...]:
        """Pull guards on ``G`` back to ``P`` along both factors."""
        return tuple(pi.pull_scalar(g) for g in guards for pi in (self.pi1, self.pi2))

    def sample_triples(self, n: int, seed: int, guards: Sequence[Expr] = ()):
        """Composable triples: a sampled pair ``(g, h)`` plus ``k`` from ``lift(h, free)``.

        Returns ``(g, h, k, h2)`` where ``h2`` is the first factor recovered
        from the second pair (equal to ``h`` when the lift is correct).
        """
        _, g, h = self.sample_pairs(n, seed, self.pair_guards(guards))
        free = X.sample_array(self.chart_g, n, seed ^ 0x7A1, guards)
        hk = self.sampler(self.lift(self.gg(h, free)))
        return g, h, hk[:, self.dim_g:], hk[:, : self.dim_g]


# --------------------------------------------------------------- axioms

def check_axioms(G: GroupoidPresentation, n: int = 64, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL) -> CheckReport:
    rep = CheckReport(f"axioms:{G.name}", seed, n, tol)
    M = G.chart_m

    def sampler_ok():
        _, g, h = G.sample_pairs(n, seed)
        return max_residual(G.alpha(g), G.beta(h))

    def lift_ok():
        p, _, _ = G.sample_pairs(n, seed)
        return max_residual(G.lift(G.sampler(p)), p)

    def lift_keeps_first():
        g, h, k, h2 = G.sample_triples(n, seed)
        return max_residual(h2, h)

    def units():
        x = X.sample_array(M, n, seed)
        e = G.eps(x)
        return max(max_residual(G.alpha(e), x), max_residual(G.beta(e), x))

    def left_unit():
        g = _sample_g(G, n, seed)
        return max_residual(G.product(G.eps(G.beta(g)), g), g)

    def right_unit():
        g = _sample_g(G, n, seed)
        return max_residual(G.product(g, G.eps(G.alpha(g))), g)

    def source_target_of_product():
        _, g, h = G.sample_pairs(n, seed)
        gh = G.product(g, h)
        return max(max_residual(G.alpha(gh), G.alpha(h)), max_residual(G.beta(gh), G.beta(g)))

    def assoc():
        g, h, k, _ = G.sample_triples(n, seed)
        return max_residual(G.product(G.product(g, h), k), G.product(g, G.product(h, k)))

    def inverse():
        g = _sample_g(G, n, seed)
        gi = G.inv(g)
        return max(
            max_residual(G.product(g, gi), G.eps(G.beta(g))),
            max_residual(G.product(gi, g), G.eps(G.alpha(g))),
        )

    record(rep, "axiom.sampler_composable", "groupoid", sampler_ok)
    record(rep, "axiom.lift_retraction", "groupoid", lift_ok)
    record(rep, "axiom.lift_first_factor", "groupoid", lift_keeps_first)
    record(rep, "axiom.unit_source_target", "groupoid", units)
    record(rep, "axiom.left_unit", "groupoid", left_unit)
    record(rep, "axiom.right_unit", "groupoid", right_unit)
    record(rep, "axiom.product_source_target", "Sec3", source_target_of_product)
    record(rep, "axiom.associativity", "groupoid", assoc)
    record(rep, "axiom.inverse", "groupoid", inverse)
    return rep


def _sample_g(G: GroupoidPresentation, n: int, seed: int) -> np.ndarray:
    return X.sample_array(G.chart_g, n, seed)


# ------------------------------------------------- multiplicative functions

def multiplicativity_defect(G: GroupoidPresentation, sigma: Expr) -> Expr:
    """``sigma(g h) - sigma(g) - sigma(h)`` as a scalar on ``P``."""
    G.chart_g.check_expr(sigma)
    s = lambda m: m.pull_scalar(sigma)  # noqa: E731
    return X.sub(s(G.mult), X.add(s(G.pi1), s(G.pi2)))


def check_multiplicative(G: GroupoidPresentation, sigma: Expr, n: int = 64, seed: int = DEFAULT_SEED,
                         tol: float = DEFAULT_TOL) -> CheckReport:
    rep = CheckReport("multiplicative", seed, n, tol)

    def additive():
        p = X.sample_array(G.chart_p, n, seed)
        lhs = X.evaluate_at([G.mult.pull_scalar(sigma)], G.chart_p, p)
        rhs = X.evaluate_at([X.add(G.pi1.pull_scalar(sigma), G.pi2.pull_scalar(sigma))], G.chart_p, p)
        return max_residual(lhs, rhs)

    def on_units():
        x = X.sample_array(G.chart_m, n, seed)
        return max_residual(X.evaluate_at([G.eps.pull_scalar(sigma)], G.chart_m, x), 0.0)

    record(rep, "sigma.multiplicative", "Sec3", additive)
    record(rep, "sigma.eq4_units", "Eq.4", on_units)
    return rep


# ------------------------------------------------------------- algebroid

@dataclass(frozen=True)
class AlgebroidFiber:
    x: np.ndarray
    basis: np.ndarray  # columns, in chart_g coordinates at eps(x)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def algebroid_fiber(G: GroupoidPresentation, x, tol: float = LINALG_TOL) -> AlgebroidFiber:
    x = np.asarray(x, dtype=float)
    Ja = G.alpha.jacobian_at(G.eps(x))
    if numerical_rank(Ja, tol) < G.dim_m:
        raise RankDeficiency("alpha is not a submersion at the unit", dict(zip(G.chart_m.vars, x)))
    return AlgebroidFiber(x, null_space(Ja, tol))


def tangent_inverse_at_unit(G: GroupoidPresentation, x) -> np.ndarray:
    return G.inv.jacobian_at(G.eps(np.asarray(x, dtype=float)))


# --------------------------------------------------------- invariant fields

@dataclass(frozen=True, eq=False)
class PointwiseVectorField:
    """Vector field known through its values: ``fn`` maps ``(n, dim)`` points to ``(n, dim)``."""

    chart: Chart
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        out = self.fn(np.atleast_2d(pts))
        return out[0] if single else out


def _section_values(G: GroupoidPresentation, X0: Sequence[Expr], xs: np.ndarray, tol: float) -> np.ndarray:
    vals = X.evaluate_at([X.as_expr(c) for c in X0], G.chart_m, xs).T
    for x, v in zip(xs, vals):
        Ja = G.alpha.jacobian_at(G.eps(x))
        if np.linalg.norm(Ja @ v) > tol * (1.0 + np.linalg.norm(v)):
            raise NotInFiber("section value is not in ker T alpha", dict(zip(G.chart_m.vars, x)))
    return vals


def invariant_extension(G: GroupoidPresentation, X0: Sequence[Expr], side: str = "right",
                        tol: float = 1e-9) -> PointwiseVectorField:
    """Right- or left-invariant extension of a section of ``A`` (components in G coordinates).

    right: ``X(g) = T R_g X0(beta g)``; left: ``X(g) = -T L_g T inv X0(alpha g)``
    (the sign makes ``X -> left(X)`` a bracket morphism).
    """
    if len(X0) != G.dim_g:
        raise ValueError("section needs one component per chart_g coordinate")
    for c in X0:
        G.chart_m.check_expr(X.as_expr(c))
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")

    def fn(gs: np.ndarray) -> np.ndarray:
        out = np.empty_like(gs)
        xs = G.beta(gs) if side == "right" else G.alpha(gs)
        vals = _section_values(G, X0, xs, tol)
        for k, (g, x, v) in enumerate(zip(gs, xs, vals)):
            e = G.eps(x)
            if side == "right":
                out[k] = G.right_translation(e, g) @ v
            else:
                out[k] = -G.left_translation(g, e) @ (G.inv.jacobian_at(e) @ v)
        return out

    return PointwiseVectorField(G.chart_g, fn)


# -------------------------------------------------------- derived groupoids

@dataclass(frozen=True)
class Elt:
    """Element of a derived groupoid: a (co)vector ``vec`` over ``base``, plus an optional real."""

    base: np.ndarray
    vec: np.ndarray
    ext: float | None = None

    def flat(self) -> np.ndarray:
        parts = [np.ravel(self.base), np.ravel(self.vec)]
        if self.ext is not None:
            parts.append([self.ext])
        return np.concatenate(parts)


def elt_residual(a: Elt, b: Elt) -> float:
    if (a.ext is None) != (b.ext is None):
        return float("inf")
    return max_residual(a.flat(), b.flat())


class DerivedGroupoid:
    """Interface shared by tangent and cotangent groupoids."""

    name = "derived"

    def source(self, a: Elt) -> Elt:
        raise NotImplementedError

    def target(self, a: Elt) -> Elt:
        raise NotImplementedError

    def unit(self, b: Elt) -> Elt:
        raise NotImplementedError

    def product(self, a: Elt, b: Elt) -> Elt:
        raise NotImplementedError

    def sample_pairs(self, n: int, seed: int) -> list[tuple[Elt, Elt]]:
        raise NotImplementedError

    def sample_triples(self, n: int, seed: int) -> list[tuple[Elt, Elt, Elt]]:
        raise NotImplementedError


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed & (2**64 - 1), tag])


class TangentGroupoid(DerivedGroupoid):
    """``TG => TM``; with ``sigma`` given, the extension ``TG x R => TM x R``."""

    def __init__(self, G: GroupoidPresentation, sigma: Expr | None = None, tol: float = LINALG_TOL,
                 guards: Sequence[Expr] = ()):
        self.G = G
        self.guards = tuple(guards)
        self.sigma = None if sigma is None else G.chart_g.check_expr(X.as_expr(sigma))
        self.tol = tol
        self.name = f"T{G.name}" + ("xR" if sigma is not None else "")
        if self.sigma is not None:
            self._dsigma = [X.partial(self.sigma, v) for v in G.chart_g.vars]

    @property
    def extended(self) -> bool:
        return self.sigma is not None

    def dsigma(self, g) -> np.ndarray:
        return X.evaluate_at(self._dsigma, self.G.chart_g, np.atleast_2d(g))[:, 0]

    def source(self, a: Elt) -> Elt:
        G = self.G
        vec = G.alpha.jacobian_at(a.base) @ a.vec
        ext = None if not self.extended else float(self.dsigma(a.base) @ a.vec + a.ext)
        return Elt(G.alpha(a.base), vec, ext)

    def target(self, a: Elt) -> Elt:
        G = self.G
        vec = G.beta.jacobian_at(a.base) @ a.vec
        return Elt(G.beta(a.base), vec, a.ext if self.extended else None)

    def unit(self, b: Elt) -> Elt:
        G = self.G
        return Elt(G.eps(b.base), G.eps.jacobian_at(b.base) @ b.vec, b.ext if self.extended else None)

    def inverse(self, a: Elt) -> Elt:
        G = self.G
        vec = G.inv.jacobian_at(a.base) @ a.vec
        ext = None if not self.extended else float(self.dsigma(a.base) @ a.vec + a.ext)
        return Elt(G.inv(a.base), vec, ext)

    def composing_vector(self, a: Elt, b: Elt) -> np.ndarray:
        """``V`` in ``T_p P`` with ``T pi1 V = a``, ``T pi2 V = b``; NotComposable otherwise."""
        G = self.G
        if max_residual(G.alpha(a.base), G.beta(b.base)) > 1e-9:
            raise NotComposable("base points are not composable", {"g": a.base.tolist(), "h": b.base.tolist()})
        p = G.pair_coords(a.base, b.base)
        A = np.vstack([G.pi1.jacobian_at(p), G.pi2.jacobian_at(p)])
        sol = solve(A, np.concatenate([a.vec, b.vec]), self.tol)
        if not sol.consistent:
            raise NotComposable(f"T alpha X != T beta Y (residual {sol.residual:.2e})", {"p": p.tolist()})
        return sol.x

    def product(self, a: Elt, b: Elt) -> Elt:
        G = self.G
        if self.extended and max_residual(self.source(a).ext, b.ext) > 1e-9:
            raise NotComposable("R-components do not match", {"lambda": a.ext, "mu": b.ext})
        V = self.composing_vector(a, b)
        p = G.pair_coords(a.base, b.base)
        return Elt(G.mult(p), G.mult.jacobian_at(p) @ V, a.ext if self.extended else None)

    def _pair_from(self, p: np.ndarray, V: np.ndarray, lam: float | None):
        G = self.G
        g, h = G.pi1(p), G.pi2(p)
        X_ = G.pi1.jacobian_at(p) @ V
        Y_ = G.pi2.jacobian_at(p) @ V
        if not self.extended:
            return Elt(g, X_), Elt(h, Y_)
        a = Elt(g, X_, lam)
        return a, Elt(h, Y_, self.source(a).ext)

    def sample_pairs(self, n: int, seed: int) -> list[tuple[Elt, Elt]]:
        G = self.G
        ps = X.sample_array(G.chart_p, n, seed, G.pair_guards(self.guards))
        rng = _rng(seed, 0x7A)
        return [self._pair_from(p, rng.standard_normal(G.chart_p.dim), float(rng.standard_normal())) for p in ps]

    def sample_triples(self, n: int, seed: int) -> list[tuple[Elt, Elt, Elt]]:
        G = self.G
        rng = _rng(seed, 0x7B)
        g, h, k, _ = G.sample_triples(n, seed, self.guards)
        out = []
        for gi, hi, ki in zip(g, h, k):
            p1 = G.pair_coords(gi, hi)
            a, b = self._pair_from(p1, rng.standard_normal(G.chart_p.dim), float(rng.standard_normal()))
            # extend b by a tangent at k composable with it
            p2 = G.pair_coords(hi, ki)
            A = np.vstack([G.pi1.jacobian_at(p2)])
            free = null_space(A, self.tol)
            V2 = solve(A, b.vec, self.tol).x + free @ rng.standard_normal(free.shape[1])
            c = Elt(ki, G.pi2.jacobian_at(p2) @ V2, None if not self.extended else self.source(b).ext)
            out.append((a, b, c))
        return out


class CotangentGroupoid(DerivedGroupoid):
    """``T*G => A*G`` and its twisted variants.

    ``mode`` is ``"plain"`` (no sigma), ``"sigma"`` (the sigma-cotangent
    groupoid) or ``"extended"`` (``T*G x R => A*G``).  An element of ``A*_x G``
    is stored as the covector on ``T_{eps(x)} G`` that vanishes on ``im T eps``,
    so the unit map is the identity on representatives.
    """

    def __init__(self, G: GroupoidPresentation, sigma: Expr | None = None, mode: str = "plain",
                 tol: float = LINALG_TOL, guards: Sequence[Expr] = ()):
        if mode not in ("plain", "sigma", "extended"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode != "plain" and sigma is None:
            sigma = X.ZERO
        self.G = G
        self.guards = tuple(guards)
        self.mode = mode
        self.tol = tol
        self.sigma = X.ZERO if sigma is None else G.chart_g.check_expr(X.as_expr(sigma))
        self._dsigma = [X.partial(self.sigma, v) for v in G.chart_g.vars]
        self.name = {"plain": "T*", "sigma": "T*sigma", "extended": "T*xR"}[mode] + G.name

    # building blocks ----------------------------------------------------
    def sig(self, g) -> float:
        return float(X.evaluate_at([self.sigma], self.G.chart_g, np.atleast_2d(g))[0, 0])

    def dsigma(self, g) -> np.ndarray:
        return X.evaluate_at(self._dsigma, self.G.chart_g, np.atleast_2d(g))[:, 0]

    def alpha_matrix(self, g) -> np.ndarray:
        """Matrix of ``mu -> alpha~(mu)``: ``c = -P^T (T inv)^T (T L_g)^T mu``."""
        G = self.G
        x = G.alpha(g)
        e = G.eps(x)
        return -(G.left_translation(g, e) @ G.inv.jacobian_at(e) @ G.unit_projector(x)).T

    def beta_matrix(self, h) -> np.ndarray:
        """Matrix of ``nu -> beta~(nu)``: ``c = P^T (T R_h)^T nu``."""
        G = self.G
        x = G.beta(h)
        return (G.right_translation(G.eps(x), h) @ G.unit_projector(x)).T

    def alpha_tilde(self, g, mu) -> Elt:
        return Elt(self.G.alpha(g), self.alpha_matrix(g) @ mu)

    def beta_tilde(self, h, nu) -> Elt:
        return Elt(self.G.beta(h), self.beta_matrix(h) @ nu)

    def eps_tilde(self, b: Elt) -> Elt:
        G = self.G
        vec = G.unit_projector(b.base).T @ b.vec
        return Elt(G.eps(b.base), vec)

    def raw_product(self, mu: Elt, nu: Elt) -> Elt:
        """Solve ``rho(T m V) = mu(T pi1 V) + nu(T pi2 V)`` for all ``V`` in ``T P``."""
        G = self.G
        if max_residual(G.alpha(mu.base), G.beta(nu.base)) > 1e-9:
            raise NotComposable("base points are not composable", {"g": mu.base.tolist(), "h": nu.base.tolist()})
        p = G.pair_coords(mu.base, nu.base)
        Jm = G.mult.jacobian_at(p)
        if numerical_rank(Jm, self.tol) < G.dim_g:
            raise RankDeficiency("composable tangent pairs do not span T_{gh} G", {"p": p.tolist()})
        rhs = G.pi1.jacobian_at(p).T @ mu.vec + G.pi2.jacobian_at(p).T @ nu.vec
        sol = solve(Jm.T, rhs, self.tol)
        if not sol.consistent:
            raise NotComposable(f"covectors are not composable (residual {sol.residual:.2e})", {"p": p.tolist()})
        return Elt(G.mult(p), sol.x)

    # groupoid structure -------------------------------------------------
    def source(self, a: Elt) -> Elt:
        s = self.alpha_tilde(a.base, a.vec)
        if self.mode == "plain":
            return s
        return Elt(s.base, np.exp(-self.sig(a.base)) * s.vec)

    def target(self, a: Elt) -> Elt:
        t = self.beta_tilde(a.base, a.vec)
        if self.mode == "extended":
            x = self.G.beta(a.base)
            ds = self.G.unit_projector(x).T @ self.dsigma(self.G.eps(x))
            return Elt(t.base, t.vec - a.ext * ds)
        return t

    def unit(self, b: Elt) -> Elt:
        u = self.eps_tilde(b)
        if self.mode == "extended":
            return Elt(u.base, u.vec, 0.0)
        return u

    def product(self, a: Elt, b: Elt) -> Elt:
        if self.mode == "plain":
            return self.raw_product(a, b)
        w = np.exp(self.sig(a.base))
        if self.mode == "sigma":
            return self.raw_product(a, Elt(b.base, w * b.vec))
        left = Elt(a.base, a.vec + w * b.ext * self.dsigma(a.base))
        out = self.raw_product(left, Elt(b.base, w * b.vec))
        return Elt(out.base, out.vec, a.ext + w * b.ext)

    # sampling -----------------------------------------------------------
    def solve_source(self, g, b: Elt, rng: np.random.Generator, ext: float | None = None) -> Elt:
        """A covector at ``g`` whose source is ``b`` (particular plus random kernel part)."""
        A = self.alpha_matrix(g)
        rhs = b.vec if self.mode == "plain" else np.exp(self.sig(g)) * b.vec
        sol = solve(A, rhs, self.tol)
        if not sol.consistent:
            raise RankDeficiency("alpha~ is not onto A* at this point", {"g": np.asarray(g).tolist()})
        ker = null_space(A, self.tol)
        mu = sol.x + ker @ rng.standard_normal(ker.shape[1])
        return Elt(np.asarray(g, dtype=float), mu, ext if self.mode == "extended" else None)

    def solve_target(self, h, b: Elt, rng: np.random.Generator) -> Elt:
        """A covector at ``h`` whose target is ``b``."""
        zeta = float(rng.standard_normal()) if self.mode == "extended" else None
        rhs = b.vec
        if self.mode == "extended":
            x = self.G.beta(h)
            rhs = rhs + zeta * (self.G.unit_projector(x).T @ self.dsigma(self.G.eps(x)))
        B = self.beta_matrix(h)
        sol = solve(B, rhs, self.tol)
        if not sol.consistent:
            raise RankDeficiency("beta~ is not onto A* at this point", {"h": np.asarray(h).tolist()})
        ker = null_space(B, self.tol)
        nu = sol.x + ker @ rng.standard_normal(ker.shape[1])
        return Elt(np.asarray(h, dtype=float), nu, zeta)

    def _random_elt(self, g, rng) -> Elt:
        ext = float(rng.standard_normal()) if self.mode == "extended" else None
        return Elt(np.asarray(g, dtype=float), rng.standard_normal(self.G.dim_g), ext)

    def sample_pairs(self, n: int, seed: int) -> list[tuple[Elt, Elt]]:
        _, gs, hs = self.G.sample_pairs(n, seed, self.G.pair_guards(self.guards))
        rng = _rng(seed, 0xC0)
        out = []
        for g, h in zip(gs, hs):
            nu = self._random_elt(h, rng)
            mu = self.solve_source(g, self.target(nu), rng, float(rng.standard_normal()))
            out.append((mu, nu))
        return out

    def sample_triples(self, n: int, seed: int) -> list[tuple[Elt, Elt, Elt]]:
        g, h, k, _ = self.G.sample_triples(n, seed, self.guards)
        rng = _rng(seed, 0xC1)
        out = []
        for gi, hi, ki in zip(g, h, k):
            nu = self._random_elt(hi, rng)
            mu = self.solve_source(gi, self.target(nu), rng, float(rng.standard_normal()))
            ka = self.solve_target(ki, self.source(nu), rng)
            out.append((mu, nu, ka))
        return out


def tangent_groupoid(G: GroupoidPresentation, sigma: Expr | None = None, guards: Sequence[Expr] = ()) -> TangentGroupoid:
    """``TG => TM``, or ``TG x R => TM x R`` when ``sigma`` is given."""
    return TangentGroupoid(G, sigma, guards=guards)


def cotangent_groupoid(G: GroupoidPresentation, sigma: Expr | None = None, extended: bool = False,
                       guards: Sequence[Expr] = ()) -> CotangentGroupoid:
    """``T*G => A*G``, or ``T*G x R => A*G`` when ``extended``."""
    if extended:
        return CotangentGroupoid(G, X.ZERO if sigma is None else sigma, "extended", guards=guards)
    return CotangentGroupoid(G, None, "plain", guards=guards)


def sigma_cotangent_groupoid(G: GroupoidPresentation, sigma: Expr, guards: Sequence[Expr] = ()) -> CotangentGroupoid:
    return CotangentGroupoid(G, sigma, "sigma", guards=guards)


def check_derived_axioms(D: DerivedGroupoid, n: int = 50, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL) -> CheckReport:
    """Unit laws, source/target of products and associativity on sampled elements."""
    rep = CheckReport(f"axioms:{D.name}", seed, n, tol)

    def over_pairs(fn):
        def run():
            return max((fn(a, b) for a, b in D.sample_pairs(n, seed)), default=0.0)
        return run

    def left_unit(a, b):
        return elt_residual(D.product(D.unit(D.target(a)), a), a)

    def right_unit(a, b):
        return elt_residual(D.product(a, D.unit(D.source(a))), a)

    def unit_ends(a, b):
        s = D.source(a)
        u = D.unit(s)
        return max(elt_residual(D.source(u), s), elt_residual(D.target(u), s))

    def src_tgt(a, b):
        ab = D.product(a, b)
        return max(elt_residual(D.source(ab), D.source(b)), elt_residual(D.target(ab), D.target(a)))

    def assoc():
        return max((elt_residual(D.product(D.product(a, b), c), D.product(a, D.product(b, c)))
                    for a, b, c in D.sample_triples(n, seed)), default=0.0)

    record(rep, "derived.left_unit", "groupoid", over_pairs(left_unit))
    record(rep, "derived.right_unit", "groupoid", over_pairs(right_unit))
    record(rep, "derived.unit_source_target", "groupoid", over_pairs(unit_ends))
    record(rep, "derived.product_source_target", "groupoid", over_pairs(src_tgt))
    record(rep, "derived.associativity", "groupoid", assoc)
    return rep


# ------------------------------------------------------------- morphisms

def morphism_check(Phi: Callable[[Elt], Elt], phi0: Callable[[Elt], Elt], domain: DerivedGroupoid,
                   codomain: DerivedGroupoid, n: int = 50, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL,
                   prefix: str = "morphism", tags: tuple[str, str, str] = ("Def4.3", "Def4.3", "Def4.3")) -> CheckReport:
    """Source/target intertwining over ``phi0`` and multiplicativity on sampled pairs."""
    rep = CheckReport(prefix, seed, n, tol)
    cache: dict = {}

    def pairs():
        if "pairs" not in cache:
            cache["pairs"] = domain.sample_pairs(n, seed)
        return cache["pairs"]

    def src():
        return max(elt_residual(codomain.source(Phi(a)), phi0(domain.source(a))) for a, _ in pairs())

    def tgt():
        return max(elt_residual(codomain.target(Phi(a)), phi0(domain.target(a))) for a, _ in pairs())

    def mult():
        return max(elt_residual(Phi(domain.product(a, b)), codomain.product(Phi(a), Phi(b))) for a, b in pairs())

    record(rep, f"{prefix}.source", tags[0], src)
    record(rep, f"{prefix}.target", tags[1], tgt)
    record(rep, f"{prefix}.product", tags[2], mult)
    return rep


# ------------------------------------------------------ action groupoid

def build_action_groupoid_GxR(G: GroupoidPresentation, sigma: Expr, new_var: str | None = None) -> GroupoidPresentation:
    """``G x R => M x R`` for the action ``(x, t) g = (alpha(g), sigma(g) + t)``.

    ``alpha(g,t) = (alpha g, sigma g + t)``, ``beta(h,s) = (beta h, s)``,
    ``(g,t)(h,s) = (g h, t)``, ``eps(x,t) = (eps x, t)``,
    ``(g,t)^-1 = (g^-1, sigma(g) + t)``.
    """
    from .jacobi import fresh_variable

    sigma = G.chart_g.check_expr(X.as_expr(sigma))
    taken = set(G.chart_g.vars) | set(G.chart_m.vars) | set(G.chart_p.vars)
    t = new_var or fresh_variable(taken)
    Gr = G.chart_g.extended(t, name=f"{G.chart_g.name}xR")
    Mr = G.chart_m.extended(t, name=f"{G.chart_m.name}xR")
    Pr = G.chart_p.extended(t, name=f"{G.chart_p.name}xR")
    GGr = Gr.product(Gr)
    tv = X.var(t)
    alpha = SmoothMap("alpha_sigma", Gr, Mr, G.alpha.comps + (X.add(sigma, tv),))
    beta = SmoothMap("beta_sigma", Gr, Mr, G.beta.comps + (tv,))
    eps = SmoothMap("eps_sigma", Mr, Gr, G.eps.comps + (tv,))
    inv = SmoothMap("inv_sigma", Gr, Gr, G.inv.comps + (X.add(sigma, tv),))
    mult = SmoothMap("mult_sigma", Pr, Gr, G.mult.comps + (tv,))
    # sampler: p, t -> ((g, t), (h, sigma(g) + t))
    g_of_p = G.pi1
    smp = G.sampler.comps
    d = G.dim_g
    sig_g = g_of_p.pull_scalar(sigma)
    sampler = SmoothMap("sampler_sigma", Pr, GGr, smp[:d] + (tv,) + smp[d:] + (X.add(sig_g, tv),))
    # lift: ((g, t), (h, s)) -> (lift(g, h), t)
    ren = {}
    for i, v in enumerate(G.chart_gg.vars):
        half, j = divmod(i, d)
        ren[v] = X.var(GGr.vars[j + half * (d + 1)])
    lift_comps = tuple(X.substitute(c, ren) for c in G.lift.comps) + (X.var(GGr.vars[d]),)
    lift = SmoothMap("lift_sigma", GGr, Pr, lift_comps)
    return GroupoidPresentation(f"{G.name}xR", Gr, Mr, Pr, alpha, beta, mult, eps, inv, sampler, lift)


def pullback_pair(G: GroupoidPresentation, a: DifferentialForm):
    """``(m* a, pi1* a, pi2* a)`` as forms on ``P``."""
    return pullback(G.mult, a), pullback(G.pi1, a), pullback(G.pi2, a)


# ---------------------------------------------- closed forms on G x R

def _split(GR: GroupoidPresentation, a: Elt) -> tuple[np.ndarray, float, np.ndarray, float]:
    d = GR.dim_g - 1
    return a.base[:d], float(a.base[d]), a.vec[:d], float(a.vec[d])


def check_gxr_lifts(G: GroupoidPresentation, sigma: Expr, n: int = 50, seed: int = DEFAULT_SEED,
                    tol: float = DEFAULT_TOL, new_var: str | None = None) -> CheckReport:
    """Compare the generic tangent and cotangent groupoids of ``G x R`` with
    their closed forms written through the groupoids of ``G``.

    ``A(G x R)`` at ``(x, t)`` is ``{(v, -d sigma(v)) : v in A_x}``, so a
    covector ``(c, c_t)`` there corresponds to ``c - c_t d sigma`` on ``A_x``.
    """
    sigma = G.chart_g.check_expr(X.as_expr(sigma))
    GR = build_action_groupoid_GxR(G, sigma, new_var)
    rep = CheckReport(f"gxr:{G.name}", seed, n, tol)
    d = G.dim_g
    T, TR = TangentGroupoid(G), TangentGroupoid(GR)
    C, CR = CotangentGroupoid(G), CotangentGroupoid(GR)
    dsig = [X.partial(sigma, v) for v in G.chart_g.vars]

    def sig(g):
        return float(X.evaluate_at([sigma], G.chart_g, np.atleast_2d(g))[0, 0])

    def ds(g):
        return X.evaluate_at(dsig, G.chart_g, np.atleast_2d(g))[:, 0]

    def to_a_star(b: Elt) -> Elt:
        x, t = b.base[:-1], b.base[-1]
        c = G.unit_projector(x).T @ (b.vec[:d] - b.vec[d] * ds(G.eps(x)))
        return Elt(np.append(x, t), c)

    def tangent_ends():
        worst = 0.0
        for a, b in TR.sample_pairs(n, seed):
            g, t, X_, lam = _split(GR, a)
            h, s_, Y_, mu = _split(GR, b)
            src = T.source(Elt(g, X_))
            want = Elt(np.append(src.base, sig(g) + t), np.append(src.vec, lam + ds(g) @ X_))
            tgt = T.target(Elt(h, Y_))
            want_t = Elt(np.append(tgt.base, s_), np.append(tgt.vec, mu))
            worst = max(worst, elt_residual(TR.source(a), want), elt_residual(TR.target(b), want_t))
        return worst

    def tangent_product():
        worst = 0.0
        for a, b in TR.sample_pairs(n, seed):
            g, t, X_, lam = _split(GR, a)
            h, _, Y_, _ = _split(GR, b)
            ab = T.product(Elt(g, X_), Elt(h, Y_))
            want = Elt(np.append(ab.base, t), np.append(ab.vec, lam))
            worst = max(worst, elt_residual(TR.product(a, b), want))
        return worst

    def tangent_unit():
        xs = X.sample_array(GR.chart_m, n, seed)
        rng = _rng(seed, 0x9A)
        worst = 0.0
        for xt in xs:
            v = rng.standard_normal(GR.dim_m)
            u = T.unit(Elt(xt[:-1], v[:-1]))
            want = Elt(np.append(u.base, xt[-1]), np.append(u.vec, v[-1]))
            worst = max(worst, elt_residual(TR.unit(Elt(xt, v)), want))
        return worst

    def cotangent_ends():
        worst = 0.0
        for a, b in CR.sample_pairs(n, seed):
            g, t, mu, _ = _split(GR, a)
            h, s_, nu, zeta = _split(GR, b)
            sa = C.alpha_tilde(g, mu)
            want = Elt(np.append(sa.base, sig(g) + t), sa.vec)
            tb = C.beta_tilde(h, nu)
            x = tb.base
            want_t = Elt(np.append(x, s_), tb.vec - zeta * (G.unit_projector(x).T @ ds(G.eps(x))))
            worst = max(worst, elt_residual(to_a_star(CR.source(a)), want),
                        elt_residual(to_a_star(CR.target(b)), want_t))
        return worst

    def cotangent_product():
        worst = 0.0
        for a, b in CR.sample_pairs(n, seed):
            g, t, mu, gamma = _split(GR, a)
            h, _, nu, zeta = _split(GR, b)
            ab = C.raw_product(Elt(g, mu + zeta * ds(g)), Elt(h, nu))
            want = Elt(np.append(ab.base, t), np.append(ab.vec, gamma + zeta))
            worst = max(worst, elt_residual(CR.product(a, b), want))
        return worst

    def cotangent_unit():
        xs = X.sample_array(GR.chart_m, n, seed)
        rng = _rng(seed, 0x9B)
        worst = 0.0
        for xt in xs:
            x = xt[:-1]
            c = G.unit_projector(x).T @ rng.standard_normal(d)
            u = C.eps_tilde(Elt(x, c))
            want = Elt(np.append(u.base, xt[-1]), np.append(u.vec, 0.0))
            worst = max(worst, elt_residual(CR.unit(Elt(xt, np.append(c, 0.0))), want))
        return worst

    record(rep, "gxr.tangent_source_target", "Eq.9", tangent_ends)
    record(rep, "gxr.tangent_product", "Eq.9", tangent_product)
    record(rep, "gxr.tangent_unit", "Eq.9", tangent_unit)
    record(rep, "gxr.cotangent_source_target", "Eq.10", cotangent_ends)
    record(rep, "gxr.cotangent_product", "Eq.10", cotangent_product)
    record(rep, "gxr.cotangent_unit", "Eq.10", cotangent_unit)
    return rep
