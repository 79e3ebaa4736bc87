"""Symbolic scalar fields on coordinate charts.

Expressions are hash-consed trees: structurally identical subtrees are the
same Python object, so equality is identity and derivative / substitution
caches can be keyed on ``id``.  Arithmetic through the Python operators folds
constants and drops neutral elements; the parser builds raw trees instead so
that printing reproduces the input grammar.
"""

from __future__ import annotations

import math
import sys
import threading
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DefinitionError, DomainError, ParseError, SamplingExhausted, UnknownVariable

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
_BINARY = ("add", "sub", "mul", "div")


class Expr:
    """Immutable node of a scalar expression tree. Build with the helpers below."""

    __slots__ = ("op", "args", "value", "_vars")

    op: str
    args: tuple[Expr, ...]
    value: object

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    # arithmetic folds constants; see module docstring
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __repr__(self):
        return f"Expr({to_text(self)})"

    def __str__(self):
        return to_text(self)

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def free_vars(self) -> frozenset[str]:
        return free_vars(self)

    def sexpr(self) -> str:
        """Lisp-style rendering of the exact tree, e.g. ``(+ (* x y) (exp t))``."""
        return to_sexpr(self)


_TABLE: dict[tuple, Expr] = {}
_LOCK = threading.Lock()


def _make(op: str, args: tuple = (), value=None) -> Expr:
    key = (op, value, tuple(id(a) for a in args))
    node = _TABLE.get(key)
    if node is not None:
        return node
    with _LOCK:
        node = _TABLE.get(key)
        if node is None:
            node = object.__new__(Expr)
            object.__setattr__(node, "op", op)
            object.__setattr__(node, "args", args)
            object.__setattr__(node, "value", value)
            object.__setattr__(node, "_vars", None)
            _TABLE[key] = node
    return node


def const(v: float) -> Expr:
    v = float(v)
    if not math.isfinite(v):
        raise DomainError(f"non-finite constant {v}")
    if v == 0.0:
        v = 0.0  # fold -0.0
    return _make("const", (), v)


def var(name: str) -> Expr:
    return _make("var", (), name)


ZERO = const(0.0)
ONE = const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def is_zero(e: Expr) -> bool:
    return e.op == "const" and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return e.op == "const" and e.value == 1.0


# ---------------------------------------------------------------- raw builders
# Used by the parser: no folding, the tree mirrors the text.

def raw(op: str, *args: Expr, value=None) -> Expr:
    return _make(op, tuple(args), value)


# ------------------------------------------------------------ smart builders

def add(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    if a.is_const and b.is_const:
        return const(a.value + b.value)
    if b.op == "neg":
        return sub(a, b.args[0])
    return _make("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if is_zero(b):
        return a
    if a is b:
        return ZERO
    if is_zero(a):
        return neg(b)
    if a.is_const and b.is_const:
        return const(a.value - b.value)
    if b.op == "neg":
        return add(a, b.args[0])
    return _make("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if a.is_const and b.is_const:
        return const(a.value * b.value)
    if a.is_const and a.value == -1.0:
        return neg(b)
    if b.is_const and b.value == -1.0:
        return neg(a)
    if a.op == "neg" and b.op == "neg":
        return mul(a.args[0], b.args[0])
    if a.op == "neg":
        return neg(mul(a.args[0], b))
    if b.op == "neg":
        return neg(mul(a, b.args[0]))
    if b.is_const and not a.is_const:
        a, b = b, a
    return _make("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return ZERO
    if _is_one(b):
        return a
    if a is b:
        return ONE
    if a.is_const and b.is_const and b.value != 0.0:
        return const(a.value / b.value)
    if b.is_const and b.value != 0.0:
        return mul(const(1.0 / b.value), a)
    return _make("div", (a, b))


def neg(a: Expr) -> Expr:
    if a.is_const:
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return _make("neg", (a,))


def power(a: Expr, n: int) -> Expr:
    n = int(n)
    if n < 0:
        raise ValueError("only unsigned integer powers are supported")
    if n == 0:
        return ONE
    if n == 1:
        return a
    if a.is_const:
        return const(a.value ** n)
    return _make("pow", (a,), n)


def exp(a: Expr) -> Expr:
    if is_zero(a):
        return ONE
    if a.op == "log":
        pass  # exp(log u) != u off the domain; keep the tree
    return _make("exp", (a,))


def log(a: Expr) -> Expr:
    if _is_one(a):
        return ZERO
    return _make("log", (a,))


def sin(a: Expr) -> Expr:
    if is_zero(a):
        return ZERO
    return _make("sin", (a,))


def cos(a: Expr) -> Expr:
    if is_zero(a):
        return ONE
    return _make("cos", (a,))


def sqrt(a: Expr) -> Expr:
    if a.is_const and a.value >= 0:
        return const(math.sqrt(a.value))
    return _make("sqrt", (a,))


_FUNC_BUILDERS: dict[str, Callable[[Expr], Expr]] = {
    "exp": exp, "log": log, "sin": sin, "cos": cos, "sqrt": sqrt,
}


def apply_function(name: str, a: Expr) -> Expr:
    return _FUNC_BUILDERS[name](a)


def total(terms: Iterable[Expr]) -> Expr:
    out = ZERO
    for t in terms:
        out = add(out, t)
    return out


# ------------------------------------------------------------------ analysis

def free_vars(e: Expr) -> frozenset[str]:
    if e._vars is not None:
        return e._vars
    if e.op == "var":
        vs = frozenset((e.value,))
    elif e.op == "const":
        vs = frozenset()
    else:
        vs = frozenset().union(*(free_vars(a) for a in e.args))
    object.__setattr__(e, "_vars", vs)
    return vs


_DERIV: dict[tuple[int, str], Expr] = {}


def partial(e: Expr, v: str) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to variable ``v``."""
    if v not in free_vars(e):
        return ZERO
    key = (id(e), v)
    hit = _DERIV.get(key)
    if hit is not None:
        return hit
    op, args = e.op, e.args
    if op == "var":
        d = ONE
    elif op == "add":
        d = add(partial(args[0], v), partial(args[1], v))
    elif op == "sub":
        d = sub(partial(args[0], v), partial(args[1], v))
    elif op == "neg":
        d = neg(partial(args[0], v))
    elif op == "mul":
        a, b = args
        d = add(mul(partial(a, v), b), mul(a, partial(b, v)))
    elif op == "div":
        a, b = args
        da, db = partial(a, v), partial(b, v)
        if is_zero(db):
            d = div(da, b)
        else:
            d = div(sub(mul(da, b), mul(a, db)), power(b, 2))
    elif op == "pow":
        a = args[0]
        n = e.value
        d = mul(mul(const(n), power(a, n - 1)), partial(a, v))
    elif op == "exp":
        d = mul(e, partial(args[0], v))
    elif op == "log":
        d = div(partial(args[0], v), args[0])
    elif op == "sin":
        d = mul(cos(args[0]), partial(args[0], v))
    elif op == "cos":
        d = neg(mul(sin(args[0]), partial(args[0], v)))
    elif op == "sqrt":
        d = div(partial(args[0], v), mul(const(2.0), e))
    else:  # pragma: no cover
        raise AssertionError(op)
    _DERIV[key] = d
    return d


def substitute(e: Expr, mapping: Mapping[str, Expr], _memo: dict | None = None) -> Expr:
    """Replace variables by expressions (composition of fields with maps)."""
    memo = {} if _memo is None else _memo
    return _subst(e, mapping, memo)


def _subst(e: Expr, mapping, memo) -> Expr:
    if not (free_vars(e) & mapping.keys()):
        return e
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    if e.op == "var":
        out = mapping[e.value]
    else:
        args = [_subst(a, mapping, memo) for a in e.args]
        op = e.op
        if op == "add":
            out = add(*args)
        elif op == "sub":
            out = sub(*args)
        elif op == "mul":
            out = mul(*args)
        elif op == "div":
            out = div(*args)
        elif op == "neg":
            out = neg(args[0])
        elif op == "pow":
            out = power(args[0], e.value)
        else:
            out = apply_function(op, args[0])
    memo[id(e)] = out
    return out


def rename(e: Expr, mapping: Mapping[str, str]) -> Expr:
    return substitute(e, {k: var(v) for k, v in mapping.items()})


def node_count(e: Expr) -> int:
    seen: set[int] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        stack.extend(n.args)
    return len(seen)


# ---------------------------------------------------------------- evaluation

class _Domain(Exception):
    def __init__(self, what, mask):
        self.what = what
        self.mask = mask


def _check(what, bad):
    if np.any(bad):
        raise _Domain(what, bad)


_PROGRAMS: dict[tuple[int, ...], tuple] = {}


def _compile(exprs: Sequence[Expr]) -> tuple:
    """Flatten a list of trees into one post-order instruction list (shared nodes once)."""
    key = tuple(id(e) for e in exprs)
    prog = _PROGRAMS.get(key)
    if prog is not None:
        return prog
    slot: dict[int, int] = {}
    code: list[tuple] = []
    for root in exprs:
        stack = [(root, False)]
        while stack:
            node, ready = stack.pop()
            if id(node) in slot:
                continue
            if ready or not node.args:
                slot[id(node)] = len(code)
                code.append((node.op, node.value, tuple(slot[id(a)] for a in node.args)))
                continue
            stack.append((node, True))
            for a in node.args:
                if id(a) not in slot:
                    stack.append((a, False))
    prog = (tuple(code), tuple(slot[id(e)] for e in exprs))
    _PROGRAMS[key] = prog
    return prog


def _run(code, env: Mapping[str, object]) -> list:
    vals: list = [None] * len(code)
    for k, (op, value, args) in enumerate(code):
        if op == "const":
            vals[k] = value
            continue
        if op == "var":
            try:
                vals[k] = env[value]
            except KeyError:
                raise UnknownVariable(value) from None
            continue
        a = vals[args[0]]
        if op == "add":
            r = a + vals[args[1]]
        elif op == "sub":
            r = a - vals[args[1]]
        elif op == "mul":
            r = a * vals[args[1]]
        elif op == "div":
            b = vals[args[1]]
            _check("division by zero", np.asarray(b) == 0)
            r = a / b
        elif op == "neg":
            r = -a
        elif op == "pow":
            r = a ** value
        elif op == "exp":
            r = np.exp(a)
            _check("exp overflow", ~np.isfinite(r))
        elif op == "log":
            _check("log of non-positive value", np.asarray(a) <= 0)
            r = np.log(a)
        elif op == "sin":
            r = np.sin(a)
        elif op == "cos":
            r = np.cos(a)
        elif op == "sqrt":
            _check("sqrt of negative value", np.asarray(a) < 0)
            r = np.sqrt(a)
        else:  # pragma: no cover
            raise AssertionError(op)
        vals[k] = r
    return vals


def _evaluate(exprs: Sequence[Expr], env: Mapping[str, object]) -> list:
    code, roots = _compile(exprs)
    try:
        with np.errstate(all="ignore"):
            vals = _run(code, env)
    except _Domain as exc:
        raise DomainError(exc.what, _witness(env, exc.mask)) from None
    return [vals[r] for r in roots]


def evaluate_many(exprs: Sequence[Expr], env: Mapping[str, object], size: int | None = None) -> list:
    """Evaluate several expressions sharing common subtrees.

    ``env`` maps variable names to floats or 1-d arrays of equal length.  The
    results are arrays of that length (or floats when every input is scalar
    and ``size`` is None).  Raises DomainError naming the first bad sample.
    """
    out = []
    for val in _evaluate(exprs, env):
        if size is not None:
            val = np.broadcast_to(np.asarray(val, dtype=float), (size,)).copy()
        if not np.all(np.isfinite(val)):
            raise DomainError("non-finite value", _witness(env, ~np.isfinite(val)))
        out.append(val)
    return out


def _witness(env, mask):
    mask = np.atleast_1d(mask)
    idx = int(np.argmax(mask)) if mask.size > 1 else 0
    pt = {}
    for k, v in env.items():
        arr = np.atleast_1d(v)
        pt[k] = float(arr[idx] if arr.size > 1 else arr[0])
    return pt


# ------------------------------------------------------------------- charts

@dataclass(frozen=True)
class Chart:
    """Global coordinate chart: named variables with a sampling box."""

    name: str
    vars: tuple[str, ...]
    box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        if len(set(self.vars)) != len(self.vars):
            raise DefinitionError(f"chart {self.name!r}: duplicate variable names")
        for v in self.vars:
            if not v.isidentifier():
                raise DefinitionError(f"chart {self.name!r}: bad variable name {v!r}")
        box = tuple(tuple(map(float, b)) for b in self.box) or tuple((-1.0, 1.0) for _ in self.vars)
        if len(box) != len(self.vars):
            raise DefinitionError(f"chart {self.name!r}: box has {len(box)} intervals for {len(self.vars)} variables")
        for lo, hi in box:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise DefinitionError(f"chart {self.name!r}: bad interval [{lo}, {hi}]")
        object.__setattr__(self, "box", box)

    @property
    def dim(self) -> int:
        return len(self.vars)

    def index(self, v: str) -> int:
        try:
            return self.vars.index(v)
        except ValueError:
            raise UnknownVariable(v, self.name) from None

    def coords(self) -> list[Expr]:
        return [var(v) for v in self.vars]

    def env(self, pts: np.ndarray) -> dict[str, np.ndarray]:
        """Variable bindings for an ``(n, dim)`` array (or one ``(dim,)`` point)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            return {v: float(pts[i]) for i, v in enumerate(self.vars)}
        return {v: pts[:, i] for i, v in enumerate(self.vars)}

    def check_expr(self, e: Expr) -> Expr:
        extra = free_vars(e) - set(self.vars)
        if extra:
            raise UnknownVariable(sorted(extra)[0], self.name)
        return e

    def product(self, other: Chart, name: str | None = None, suffixes=("_1", "_2")) -> Chart:
        a, b = suffixes
        return Chart(
            name or f"{self.name}*{other.name}",
            tuple(v + a for v in self.vars) + tuple(v + b for v in other.vars),
            self.box + other.box,
        )

    def extended(self, new_var: str, interval=(-1.0, 1.0), name: str | None = None) -> Chart:
        return Chart(name or f"{self.name}xR", self.vars + (new_var,), self.box + (tuple(interval),))


@dataclass(frozen=True)
class Point:
    chart: Chart
    coords: np.ndarray = field(compare=False)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).copy()
        if c.shape != (self.chart.dim,):
            raise DefinitionError(f"point has {c.size} coordinates, chart {self.chart.name!r} has {self.chart.dim}")
        if not np.all(np.isfinite(c)):
            raise DefinitionError("point coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __eq__(self, other):
        return isinstance(other, Point) and self.chart == other.chart and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.chart, self.coords.tobytes()))


def evaluate(e: Expr, p: Point) -> float:
    """Evaluate ``e`` at a single point of its chart."""
    p.chart.check_expr(e)
    return float(evaluate_many([e], p.chart.env(p.coords))[0])


def evaluate_at(exprs: Sequence[Expr], chart: Chart, pts: np.ndarray) -> np.ndarray:
    """Evaluate expressions on an ``(n, dim)`` array; returns ``(len(exprs), n)``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.empty((len(exprs), pts.shape[0]))
    if not exprs:
        return out
    env = chart.env(pts)
    for i, val in enumerate(_evaluate(exprs, env)):
        out[i] = val
    bad = ~np.isfinite(out)
    if bad.any():
        raise DomainError("non-finite value", _witness(env, bad.any(axis=0)))
    return out


# ----------------------------------------------------------------- sampling

GUARD_EPS = 1e-6
MAX_REDRAWS = 100


def _stream(chart: Chart) -> int:
    return zlib.crc32(chart.name.encode())


def _draw(chart: Chart, seed: int, i: int, attempt: int) -> np.ndarray:
    rng = np.random.default_rng([seed & (2**64 - 1), _stream(chart), i, attempt])
    lo = np.array([b[0] for b in chart.box])
    hi = np.array([b[1] for b in chart.box])
    return lo + (hi - lo) * rng.random(chart.dim)


def _rejected(chart: Chart, guards: Sequence[Expr], pts: np.ndarray) -> np.ndarray:
    bad = np.zeros(len(pts), dtype=bool)
    for g in guards:
        for k, p in enumerate(pts):
            if bad[k]:
                continue
            try:
                val = float(evaluate_many([g], chart.env(p))[0])
            except DomainError:
                bad[k] = True
                continue
            bad[k] = abs(val) < GUARD_EPS
    return bad


def sample_array(chart: Chart, n: int, seed: int, guards: Sequence[Expr] = ()) -> np.ndarray:
    """Deterministic uniform samples in the chart box as an ``(n, dim)`` array.

    Point ``i`` at redraw ``r`` comes from its own seeded stream
    ``(seed, chart, i, r)``, so results do not depend on evaluation order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    for g in guards:
        chart.check_expr(g)
    pts = np.array([_draw(chart, seed, i, 0) for i in range(n)])
    if not guards:
        return pts
    attempt = np.zeros(n, dtype=int)
    bad = _rejected(chart, guards, pts)
    while np.any(bad):
        for i in np.flatnonzero(bad):
            attempt[i] += 1
            if attempt[i] > MAX_REDRAWS:
                raise SamplingExhausted(f"chart {chart.name!r}: point {i} rejected {MAX_REDRAWS} times by guards")
            pts[i] = _draw(chart, seed, int(i), int(attempt[i]))
        idx = np.flatnonzero(bad)
        bad[idx] = _rejected(chart, guards, pts[idx])
    return pts


def sample_points(chart: Chart, n: int, seed: int, guards: Sequence[Expr] = ()) -> list[Point]:
    return [Point(chart, p) for p in sample_array(chart, n, seed, guards)]


# --------------------------------------------------------------- text I/O

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(e: Expr) -> str:
    """Print in the DSL grammar; ``parse_expr(to_text(e))`` evaluates like ``e``."""
    op = e.op
    if op == "const":
        s = _fmt_number(abs(e.value))
        return f"(-{s})" if e.value < 0 else s
    if op == "var":
        return e.value
    if op in _BINARY:
        a, b = e.args
        p = _PREC[op]
        left = to_text(a)
        if _prec_of(a) < p:
            left = f"({left})"
        right = to_text(b)
        if _prec_of(b) <= p and b.op != "neg":
            right = f"({right})"
        return f"{left} {_SYM[op]} {right}"
    if op == "neg":
        inner = e.args[0]
        s = to_text(inner)
        if _prec_of(inner) < 4:
            s = f"({s})"
        return f"-{s}"
    if op == "pow":
        inner = e.args[0]
        s = to_text(inner)
        if _prec_of(inner) < 5:
            s = f"({s})"
        return f"{s}^{e.value}"
    return f"{op}({to_text(e.args[0])})"


def _prec_of(e: Expr) -> int:
    if e.op == "const":
        return 5 if e.value >= 0 else 3
    return _PREC.get(e.op, 5)


_SEXPR = {"add": "+", "sub": "-", "mul": "*", "div": "/", "neg": "neg", "pow": "pow"}


def to_sexpr(e: Expr) -> str:
    if e.op == "const":
        return _fmt_number(e.value)
    if e.op == "var":
        return e.value
    head = _SEXPR.get(e.op, e.op)
    parts = [to_sexpr(a) for a in e.args]
    if e.op == "pow":
        parts.append(str(e.value))
    return f"({head} {' '.join(parts)})"


# ----------------------------------------------------------------- parsing

@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | op | end
    text: str
    line: int
    col: int


_OPS = set("+-*/^(),@")


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        start = i
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            while i < n and (text[i].isdigit() or text[i] == "."):
                i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            lexeme = text[start:i]
            if lexeme.count(".") > 1:
                raise ParseError(f"malformed number {lexeme!r}", line, col)
            toks.append(Token("num", lexeme, line, col))
        elif ch.isalpha() or ch == "_":
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(Token("ident", text[start:i], line, col))
        elif ch in _OPS:
            i += 1
            toks.append(Token("op", ch, line, col))
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        col += i - start
    toks.append(Token("end", "", line, col))
    return toks


class ExprParser:
    """Recursive-descent parser for the expression grammar::

        expr   := term (("+"|"-") term)*
        term   := factor (("*"|"/") factor)*
        factor := "-"? atom ("^" unsigned-int)?
        atom   := number | ident | func "(" expr ")" | "(" expr ")"

    ``resolve`` maps an identifier to an Expr (chart variable or named scalar).
    """

    def __init__(self, tokens: list[Token], resolve: Callable[[Token], Expr]):
        self.toks = tokens
        self.pos = 0
        self.resolve = resolve

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        shown = tok.text or "end of input"
        raise ParseError(f"{msg}, found {shown!r}", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("op",):
            self.error(f"expected {text!r}")
        return self.advance()

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def parse_all(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.error("unexpected token")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.at_op("+", "-"):
            op = "add" if self.advance().text == "+" else "sub"
            e = raw(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.at_op("*", "/"):
            op = "mul" if self.advance().text == "*" else "div"
            e = raw(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        negate = False
        if self.at_op("-"):
            self.advance()
            negate = True
        e = self.atom()
        if self.at_op("^"):
            self.advance()
            if self.tok.kind != "num" or not self.tok.text.isdigit():
                self.error("expected unsigned integer exponent")
            e = raw("pow", e, value=int(self.advance().text))
        return raw("neg", e) if negate else e

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return const(float(t.text))
        if t.kind == "ident":
            if t.text in FUNCTIONS and self.peek().text == "(":
                self.advance()
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return raw(t.text, inner)
            self.advance()
            return self.resolve(t)
        if self.at_op("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected a number, variable, function or '('")


def chart_resolver(chart: Chart, scalars: Mapping[str, Expr] | None = None) -> Callable[[Token], Expr]:
    scalars = scalars or {}

    def resolve(tok: Token) -> Expr:
        if tok.text in chart.vars:
            return var(tok.text)
        if tok.text in scalars:
            return chart.check_expr(scalars[tok.text])
        raise UnknownVariable(tok.text, chart.name)

    return resolve


def parse_expr(text: str, chart: Chart, scalars: Mapping[str, Expr] | None = None) -> Expr:
    """Parse DSL expression text over ``chart``'s variables (and named scalars)."""
    return ExprParser(tokenize(text), chart_resolver(chart, scalars)).parse_all()
