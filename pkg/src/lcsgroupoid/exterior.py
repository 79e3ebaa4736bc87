"""Forms, multivectors and smooth maps in coordinates, with the usual calculus.

Components are stored only for strictly increasing multi-indices.  Sign
conventions (fixed here, used everywhere):

* ``dx_I(v_1, ..., v_k)`` is the determinant ``det[dx_{i_r}(v_s)]``, and the
  same for ``d_I`` on covectors, so ``(dx ^ dy)(X, Y) = X^x Y^y - X^y Y^x``.
* ``i(X)`` contracts into the first slot; the covector contraction of a
  multivector obeys ``i(mu)(X ^ Y) = mu(X) Y - mu(Y) X``.
* ``sharp(L, mu) = i(mu) L``, i.e. ``<nu, sharp(L, mu)> = L(mu, nu)``.
* the Schouten bracket extends the vector-field Lie bracket by
  ``[X_1^..^X_p, Y_1^..^Y_q] = sum (-1)^(i+j) [X_i, Y_j] ^ X^_i ^ Y^_j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr as X
from .errors import ChartMismatch, DegreeOverflow, DegreeUnderflow, KindMismatch, SingularForm
from .expr import Chart, Expr
from .linalg import probe_for, solve_symbolic


def sort_sign(idx: Sequence[int]) -> tuple[tuple[int, ...] | None, int]:
    """Sort an index tuple, returning the permutation sign (0 on a repeat)."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return None, 0
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return tuple(idx), sign


def same_chart(a: Chart, b: Chart) -> None:
    if a.name != b.name or a.vars != b.vars:
        raise ChartMismatch(f"chart {a.name!r}{a.vars} does not match {b.name!r}{b.vars}")


class AltTensor:
    """Alternating tensor field: a form (covariant) or a multivector."""

    kind = "tensor"
    __slots__ = ("chart", "degree", "comps")

    def __init__(self, chart: Chart, degree: int, comps: Mapping[tuple[int, ...], Expr] | None = None):
        if degree < 0:
            raise DegreeUnderflow("negative degree")
        if degree > chart.dim:
            raise DegreeOverflow(f"degree {degree} exceeds dimension {chart.dim} of chart {chart.name!r}")
        clean: dict[tuple[int, ...], Expr] = {}
        for idx, val in (comps or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != degree:
                raise ValueError(f"index {idx} has wrong length for degree {degree}")
            if any(i < 0 or i >= chart.dim for i in idx):
                raise ValueError(f"index {idx} out of range for chart {chart.name!r}")
            key, sign = sort_sign(idx)
            if sign == 0:
                continue
            val = chart.check_expr(X.as_expr(val))
            if sign < 0:
                val = X.neg(val)
            val = X.add(clean[key], val) if key in clean else val
            clean[key] = val
        self.chart = chart
        self.degree = degree
        self.comps = {k: v for k, v in sorted(clean.items()) if not X.is_zero(v)}

    # constructors -----------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart, degree: int):
        return cls(chart, degree, {})

    @classmethod
    def scalar(cls, chart: Chart, f) -> AltTensor:
        return cls(chart, 0, {(): X.as_expr(f)})

    @classmethod
    def basis(cls, chart: Chart, *names: str, coeff=1.0):
        idx = tuple(chart.index(n) for n in names)
        return cls(chart, len(idx), {idx: X.as_expr(coeff)})

    @classmethod
    def from_vector(cls, chart: Chart, comps: Sequence) -> AltTensor:
        return cls(chart, 1, {(i,): X.as_expr(c) for i, c in enumerate(comps)})

    def _like(self, degree: int, comps) -> AltTensor:
        return type(self)(self.chart, degree, comps)

    # access ------------------------------------------------------------
    def __getitem__(self, idx) -> Expr:
        if isinstance(idx, int):
            idx = (idx,)
        key, sign = sort_sign(idx)
        if sign == 0:
            return X.ZERO
        val = self.comps.get(key, X.ZERO)
        return val if sign > 0 else X.neg(val)

    def vector(self) -> list[Expr]:
        if self.degree != 1:
            raise KindMismatch("vector() needs degree 1")
        return [self.comps.get((i,), X.ZERO) for i in range(self.chart.dim)]

    def matrix(self) -> list[list[Expr]]:
        if self.degree != 2:
            raise KindMismatch("matrix() needs degree 2")
        d = self.chart.dim
        return [[self[(i, j)] for j in range(d)] for i in range(d)]

    def as_scalar(self) -> Expr:
        if self.degree != 0:
            raise KindMismatch("not a degree-0 tensor")
        return self.comps.get((), X.ZERO)

    def is_zero(self) -> bool:
        return not self.comps

    # arithmetic --------------------------------------------------------
    def _check(self, other: AltTensor) -> None:
        if type(self) is not type(other):
            raise KindMismatch(f"cannot combine {self.kind} with {other.kind}")
        same_chart(self.chart, other.chart)

    def __add__(self, other: AltTensor):
        self._check(other)
        if self.degree != other.degree:
            raise KindMismatch("degree mismatch in sum")
        comps = dict(self.comps)
        for k, v in other.comps.items():
            comps[k] = X.add(comps[k], v) if k in comps else v
        return self._like(self.degree, comps)

    def __neg__(self):
        return self._like(self.degree, {k: X.neg(v) for k, v in self.comps.items()})

    def __sub__(self, other: AltTensor):
        return self + (-other)

    def scale(self, f) -> AltTensor:
        f = X.as_expr(f)
        return self._like(self.degree, {k: X.mul(f, v) for k, v in self.comps.items()})

    def __mul__(self, f):
        return self.scale(f)

    __rmul__ = __mul__

    def map_components(self, fn) -> AltTensor:
        return self._like(self.degree, {k: fn(v) for k, v in self.comps.items()})

    # evaluation --------------------------------------------------------
    def evaluate(self, pts: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
        pts = np.atleast_2d(pts)
        keys = list(self.comps)
        vals = X.evaluate_at([self.comps[k] for k in keys], self.chart, pts)
        return dict(zip(keys, vals))

    def dense(self, pts: np.ndarray) -> np.ndarray:
        """Full antisymmetric component arrays, shape ``(n,) + (dim,)*degree``."""
        pts = np.atleast_2d(pts)
        n, d = pts.shape[0], self.chart.dim
        out = np.zeros((n,) + (d,) * self.degree)
        for idx, val in self.evaluate(pts).items():
            for perm in itertools.permutations(range(self.degree)):
                pidx = tuple(idx[p] for p in perm)
                _, sign = sort_sign(perm)
                out[(slice(None),) + pidx] = sign * val
        return out

    def __repr__(self):
        if not self.comps:
            return f"{type(self).__name__}({self.chart.name}, deg={self.degree}, 0)"
        sym = "d" if self.kind == "form" else "@"
        terms = []
        for idx, v in self.comps.items():
            basis = "^".join(sym + self.chart.vars[i] for i in idx)
            terms.append(f"({v})*{basis}" if basis else f"({v})")
        return " + ".join(terms)

    def to_text(self) -> str:
        """Render in the DSL sum-of-monomials syntax."""
        if not self.comps:
            return "0"
        sym = "d" if self.kind == "form" else "@"
        parts = []
        for idx, v in self.comps.items():
            basis = "^".join(sym + self.chart.vars[i] for i in idx)
            coeff = X.to_text(v)
            if not basis:
                parts.append(f"({coeff})")
            else:
                parts.append(f"({coeff}) * {basis}")
        return " + ".join(parts)


class DifferentialForm(AltTensor):
    kind = "form"
    __slots__ = ()


class MultiVector(AltTensor):
    kind = "multivector"
    __slots__ = ()


def vector_field(chart: Chart, comps: Sequence) -> MultiVector:
    return MultiVector.from_vector(chart, comps)


def one_form(chart: Chart, comps: Sequence) -> DifferentialForm:
    return DifferentialForm.from_vector(chart, comps)


def function_form(chart: Chart, f) -> DifferentialForm:
    return DifferentialForm.scalar(chart, f)


# ------------------------------------------------------------- algebra

def wedge(a: AltTensor, b: AltTensor) -> AltTensor:
    a._check(b)
    deg = a.degree + b.degree
    if deg > a.chart.dim:
        raise DegreeOverflow(f"wedge of degrees {a.degree} and {b.degree} exceeds dimension {a.chart.dim}")
    out: dict[tuple[int, ...], Expr] = {}
    for ia, va in a.comps.items():
        for ib, vb in b.comps.items():
            key, sign = sort_sign(ia + ib)
            if sign == 0:
                continue
            term = X.mul(va, vb)
            if sign < 0:
                term = X.neg(term)
            out[key] = X.add(out[key], term) if key in out else term
    return a._like(deg, out)


def ext_deriv(a: DifferentialForm) -> DifferentialForm:
    if not isinstance(a, DifferentialForm):
        raise KindMismatch("ext_deriv needs a differential form")
    if a.degree >= a.chart.dim:
        raise DegreeOverflow("exterior derivative of a top-degree form")
    out: dict[tuple[int, ...], Expr] = {}
    for idx, f in a.comps.items():
        for j, v in enumerate(a.chart.vars):
            if j in idx:
                continue
            df = X.partial(f, v)
            if X.is_zero(df):
                continue
            key, sign = sort_sign((j,) + idx)
            term = df if sign > 0 else X.neg(df)
            out[key] = X.add(out[key], term) if key in out else term
    return DifferentialForm(a.chart, a.degree + 1, out)


def d(f: Expr | DifferentialForm, chart: Chart | None = None) -> DifferentialForm:
    """Exterior derivative, accepting a bare scalar expression as a 0-form."""
    if isinstance(f, DifferentialForm):
        return ext_deriv(f)
    if chart is None:
        raise ValueError("chart required for a scalar")
    return ext_deriv(function_form(chart, f))


def _contract(vec: Sequence[Expr], a: AltTensor) -> AltTensor:
    out: dict[tuple[int, ...], Expr] = {}
    for idx, val in a.comps.items():
        for r, i in enumerate(idx):
            c = vec[i]
            if X.is_zero(c):
                continue
            key = idx[:r] + idx[r + 1:]
            term = X.mul(c, val)
            if r % 2:
                term = X.neg(term)
            out[key] = X.add(out[key], term) if key in out else term
    return a._like(a.degree - 1, out)


def interior(Xf: MultiVector, a: DifferentialForm) -> DifferentialForm:
    """``i(X) a``: contraction of a vector field into the first slot of a form."""
    if not isinstance(Xf, MultiVector) or Xf.degree != 1:
        raise KindMismatch("interior needs a vector field")
    if not isinstance(a, DifferentialForm):
        raise KindMismatch("interior contracts into a differential form")
    same_chart(Xf.chart, a.chart)
    if a.degree < 1:
        raise DegreeUnderflow("interior product into a 0-form")
    return _contract(Xf.vector(), a)


def contract_covector(mu: DifferentialForm, P: MultiVector) -> MultiVector:
    """``i(mu) P`` for a 1-form ``mu``: ``i(mu)(X^Y) = mu(X) Y - mu(Y) X``."""
    if not isinstance(mu, DifferentialForm) or mu.degree != 1:
        raise KindMismatch("contract_covector needs a 1-form")
    if not isinstance(P, MultiVector):
        raise KindMismatch("contract_covector contracts into a multivector")
    same_chart(mu.chart, P.chart)
    if P.degree < 1:
        raise DegreeUnderflow("contraction into a 0-vector")
    return _contract(mu.vector(), P)


def pairing(a: DifferentialForm, Xf: MultiVector) -> Expr:
    """``a(X)`` for a 1-form and a vector field."""
    same_chart(a.chart, Xf.chart)
    return X.total(X.mul(u, v) for u, v in zip(a.vector(), Xf.vector()))


def sharp(L: MultiVector, mu: DifferentialForm) -> MultiVector:
    """``sharp_L(mu)``, characterized by ``<nu, sharp_L mu> = L(mu, nu)``."""
    if not isinstance(L, MultiVector) or L.degree != 2:
        raise KindMismatch("sharp needs a bivector")
    same_chart(L.chart, mu.chart)
    return contract_covector(mu, L)


def bivector_apply(L: MultiVector, mu: DifferentialForm, nu: DifferentialForm) -> Expr:
    """``L(mu, nu)``."""
    return pairing(nu, sharp(L, mu))


def flat(omega: DifferentialForm, Xf: MultiVector) -> DifferentialForm:
    """``flat(X) = i(X) Omega``."""
    return interior(Xf, omega)


def apply_to_vector(a: DifferentialForm, Xf: MultiVector) -> Expr:
    return pairing(a, Xf)


def directional(Xf: MultiVector, f: Expr) -> Expr:
    """``X(f)``."""
    return X.total(X.mul(c, X.partial(f, v)) for c, v in zip(Xf.vector(), Xf.chart.vars))


def lie_bracket(A: MultiVector, B: MultiVector) -> MultiVector:
    same_chart(A.chart, B.chart)
    a, b = A.vector(), B.vector()
    comps = {}
    for k in range(A.chart.dim):
        term = X.sub(directional(A, b[k]), directional(B, a[k]))
        if not X.is_zero(term):
            comps[(k,)] = term
    return MultiVector(A.chart, 1, comps)


# ----------------------------------------------------------- Schouten

def _monomials(P: MultiVector):
    """Each component ``f d_I`` as a list of vector fields ``[f d_i1, d_i2, ...]``."""
    ch = P.chart
    for idx, f in P.comps.items():
        fields = [MultiVector(ch, 1, {(idx[0],): f})]
        fields += [MultiVector(ch, 1, {(i,): X.ONE}) for i in idx[1:]]
        yield fields


def _wedge_all(ch: Chart, fields: Iterable[MultiVector]) -> MultiVector:
    out = MultiVector.scalar(ch, 1.0)
    for f in fields:
        out = wedge(out, f)
    return out


def _bracket_with_function(P: MultiVector, f: Expr) -> MultiVector:
    # [X_1^..^X_p, f] = sum_i (-1)^(p-i) X_i(f) X_1^..X^_i..^X_p
    ch, p = P.chart, P.degree
    out = MultiVector.zero(ch, p - 1)
    for fields in _monomials(P):
        for i, Xi in enumerate(fields, start=1):
            g = directional(Xi, f)
            if X.is_zero(g):
                continue
            rest = _wedge_all(ch, fields[: i - 1] + fields[i:]).scale(g)
            out = out + (rest if (p - i) % 2 == 0 else -rest)
    return out


def schouten(P: MultiVector, Q: MultiVector, convention: str = "marle") -> MultiVector:
    """Schouten-Nijenhuis bracket; on vector fields it is the Lie bracket.

    ``convention="marle"`` (default) satisfies
    ``[P, Q] = -(-1)^((p-1)(q-1)) [Q, P]``.  ``convention="lichnerowicz"``
    returns ``(-1)^(p-1)`` times that, the bracket in which a Jacobi pair
    obeys ``[L, L] = 2 E ^ L`` together with ``L = -W^{-1}``.
    """
    if convention not in ("marle", "lichnerowicz"):
        raise ValueError(f"unknown convention {convention!r}")
    out = _schouten(P, Q)
    if convention == "lichnerowicz" and P.degree % 2 == 0:
        out = -out
    return out


def _schouten(P: MultiVector, Q: MultiVector) -> MultiVector:
    if not (isinstance(P, MultiVector) and isinstance(Q, MultiVector)):
        raise KindMismatch("schouten needs multivectors")
    same_chart(P.chart, Q.chart)
    ch, p, q = P.chart, P.degree, Q.degree
    deg = p + q - 1
    if deg > ch.dim:
        raise DegreeOverflow(f"bracket degree {deg} exceeds dimension {ch.dim}")
    if p == 0 and q == 0:
        return MultiVector.zero(ch, 0)
    if q == 0:
        return _bracket_with_function(P, Q.as_scalar())
    if p == 0:
        r = _bracket_with_function(Q, P.as_scalar())
        return -r if (q - 1) % 2 == 0 else r
    out = MultiVector.zero(ch, deg)
    for xs in _monomials(P):
        for ys in _monomials(Q):
            for i, Xi in enumerate(xs, start=1):
                for j, Yj in enumerate(ys, start=1):
                    br = lie_bracket(Xi, Yj)
                    if br.is_zero():
                        continue
                    term = _wedge_all(ch, [br] + xs[: i - 1] + xs[i:] + ys[: j - 1] + ys[j:])
                    out = out + (term if (i + j) % 2 == 0 else -term)
    return out


def lie_deriv(Xf: MultiVector, T: AltTensor) -> AltTensor:
    """Lie derivative: Cartan's formula on forms, ``[X, T]`` on multivectors."""
    if not isinstance(Xf, MultiVector) or Xf.degree != 1:
        raise KindMismatch("lie_deriv needs a vector field")
    same_chart(Xf.chart, T.chart)
    if isinstance(T, MultiVector):
        return schouten(Xf, T)
    if not isinstance(T, DifferentialForm):
        raise KindMismatch("lie_deriv acts on forms or multivectors")
    if T.degree == 0:
        return function_form(T.chart, directional(Xf, T.as_scalar()))
    out = interior(Xf, ext_deriv(T)) if T.degree < T.chart.dim else DifferentialForm.zero(T.chart, T.degree)
    return out + ext_deriv(interior(Xf, T))


# ------------------------------------------------------------ smooth maps

@dataclass(frozen=True, eq=False)
class SmoothMap:
    """Coordinate expression of a map: one source expression per target variable."""

    name: str
    source: Chart
    target: Chart
    comps: tuple[Expr, ...]

    def __post_init__(self):
        comps = tuple(X.as_expr(c) for c in self.comps)
        if len(comps) != self.target.dim:
            raise ChartMismatch(f"map {self.name!r} has {len(comps)} components, target {self.target.name!r} has dimension {self.target.dim}")
        for c in comps:
            self.source.check_expr(c)
        object.__setattr__(self, "comps", comps)

    @classmethod
    def identity(cls, chart: Chart) -> SmoothMap:
        return cls(f"id_{chart.name}", chart, chart, tuple(chart.coords()))

    @cached_property
    def substitution(self) -> dict[str, Expr]:
        return dict(zip(self.target.vars, self.comps))

    def compose(self, inner: SmoothMap, name: str | None = None) -> SmoothMap:
        """``self o inner``."""
        same_chart(inner.target, self.source)
        memo: dict = {}
        sub = inner.substitution
        comps = tuple(X.substitute(c, sub, memo) for c in self.comps)
        return SmoothMap(name or f"{self.name}.{inner.name}", inner.source, self.target, comps)

    def pull_scalar(self, f: Expr) -> Expr:
        """``f o self`` for a scalar on the target chart."""
        self.target.check_expr(f)
        return X.substitute(f, self.substitution)

    @cached_property
    def jacobian(self) -> list[list[Expr]]:
        return [[X.partial(c, v) for v in self.source.vars] for c in self.comps]

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        """Image of an ``(n, source_dim)`` array (or single point)."""
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        vals = X.evaluate_at(list(self.comps), self.source, np.atleast_2d(pts)).T
        return vals[0] if single else vals

    def jacobian_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        P = np.atleast_2d(pts)
        flat_j = [e for row in self.jacobian for e in row]
        vals = X.evaluate_at(flat_j, self.source, P)
        J = vals.T.reshape(P.shape[0], self.target.dim, self.source.dim)
        return J[0] if single else J

    @cached_property
    def differentials(self) -> list[DifferentialForm]:
        return [one_form(self.source, row) for row in self.jacobian]


def pullback(phi: SmoothMap, a: DifferentialForm) -> DifferentialForm:
    if not isinstance(a, DifferentialForm):
        raise KindMismatch("pullback acts on differential forms")
    same_chart(phi.target, a.chart)
    src = phi.source
    sub = phi.substitution
    memo: dict = {}
    dphi = phi.differentials
    out = DifferentialForm.zero(src, a.degree)
    for idx, f in a.comps.items():
        term = DifferentialForm.scalar(src, X.substitute(f, sub, memo))
        for i in idx:
            term = wedge(term, dphi[i])
        out = out + term
    return out


# ------------------------------------------------------- two-form inverse

_INVERSE_CACHE: dict[tuple, tuple[MultiVector, Expr]] = {}


def _form_key(a: AltTensor) -> tuple:
    return (a.kind, a.chart.name, a.chart.vars, a.degree, tuple((k, id(v)) for k, v in a.comps.items()))


def _invert(omega: DifferentialForm) -> tuple[MultiVector, Expr]:
    if not isinstance(omega, DifferentialForm) or omega.degree != 2:
        raise KindMismatch("two_form_inverse needs a 2-form")
    key = _form_key(omega)
    hit = _INVERSE_CACHE.get(key)
    if hit is not None:
        return hit
    ch = omega.chart
    n = ch.dim
    W = omega.matrix()
    eye = [[X.ONE if i == j else X.ZERO for j in range(n)] for i in range(n)]
    probe = probe_for(ch)
    try:
        Winv, pivots = solve_symbolic(W, eye, probe)
    except SingularForm:
        witness = dict(zip(ch.vars, X.sample_array(ch, 1, 0x5EED)[0]))
        raise SingularForm(f"2-form on {ch.name!r} is degenerate", witness) from None
    # Lambda(a, b) = -a^T W^{-1} b
    comps = {(i, j): X.neg(Winv[i][j]) for i in range(n) for j in range(i + 1, n)}
    det = pivots[0]
    for p in pivots[1:]:
        det = X.mul(det, p)
    out = (MultiVector(ch, 2, comps), det)
    _INVERSE_CACHE[key] = out
    return out


def two_form_inverse(omega: DifferentialForm) -> MultiVector:
    """Bivector ``L`` with ``L(a, b) = omega(flat^-1 a, flat^-1 b)``.

    Its component matrix is ``-W^{-1}`` for the matrix ``W`` of ``omega``;
    with the conventions above ``flat(sharp_L(mu)) = -mu``.
    """
    return _invert(omega)[0]


def nondegeneracy_guard(omega: DifferentialForm) -> Expr:
    """Scalar vanishing exactly where ``omega`` degenerates (its determinant up to sign)."""
    return _invert(omega)[1]


def flat_inverse(omega: DifferentialForm, a: DifferentialForm) -> MultiVector:
    """The vector field ``Y`` with ``i(Y) omega = a``."""
    return -sharp(two_form_inverse(omega), a)


# ------------------------------------------------------------- residuals

def residual(lhs, rhs) -> np.ndarray:
    """Relative residual ``|l - r| / (1 + max(|l|, |r|))`` elementwise."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return np.abs(lhs - rhs) / (1.0 + np.maximum(np.abs(lhs), np.abs(rhs)))


def max_residual(lhs, rhs) -> float:
    r = residual(lhs, rhs)
    if r.size == 0:
        return 0.0
    if np.any(np.isnan(r)):
        return float("inf")
    return float(np.max(r))


def tensor_residual(a: AltTensor, b: AltTensor, pts: np.ndarray) -> float:
    """Max relative residual between two tensors over all components and points."""
    a._check(b)
    if a.degree != b.degree:
        raise KindMismatch("degree mismatch")
    pts = np.atleast_2d(pts)
    keys = sorted(set(a.comps) | set(b.comps))
    if not keys:
        return 0.0
    exprs = [a[k] for k in keys] + [b[k] for k in keys]
    vals = X.evaluate_at(exprs, a.chart, pts)
    return max_residual(vals[: len(keys)], vals[len(keys):])


def tensor_norm(a: AltTensor, pts: np.ndarray) -> float:
    if not a.comps:
        return 0.0
    vals = X.evaluate_at(list(a.comps.values()), a.chart, np.atleast_2d(pts))
    return float(np.max(np.abs(vals)))
