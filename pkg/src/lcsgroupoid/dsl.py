"""Parser for ``.geo`` definition files.

A file is a sequence of blocks.  Each block opens with ``[kind name]`` and
holds ``key = value`` lines; a line starting with whitespace continues the
previous value.  ``#`` starts a comment.  Kinds::

    [chart G]        vars = q1, p1      box = -1, 1      box.q1 = 0, 2
    [scalar f]       chart = M          value = 0.5*sin(q)
    [map alpha]      source = G         target = M       comps = q2, p2
    [form Omega]     chart = G          value = dp1^dq1 - exp(s)*dp2^dq2   (degree = k for "0")
    [multivector L]  chart = G          value = @q^@p
    [groupoid pair]  G, M, P, alpha, beta, mult, eps, inv, sampler, lift
    [structure S]    kind = lcs|contact|jacobi, groupoid or chart, then
                     Omega/omega | eta | Lambda/E, and sigma (default 0)
    [suite name]     structure = S, run = lcs-groupoid, thm-4-6,
                     expect.<suite> = pass|fail, description, anchor

A map target (or source) written ``G*G`` is the product chart with variables
suffixed ``_1`` and ``_2``.  Structure fields name a previously defined
object or give it inline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from . import expr as X
from .errors import DefinitionError, ParseError
from .expr import Chart, Expr, ExprParser, Token, chart_resolver, tokenize
from .exterior import AltTensor, DifferentialForm, MultiVector, SmoothMap
from .groupoid import GroupoidPresentation

BLOCK_KINDS = ("chart", "scalar", "map", "form", "multivector", "groupoid", "structure", "suite")
STRUCTURE_KINDS = ("lcs", "contact", "jacobi")
_HEADER = re.compile(r"^\[\s*([A-Za-z_]+)\s+([A-Za-z_][A-Za-z0-9_]*)\s*\]\s*$")
_GROUPOID_MAPS = ("alpha", "beta", "mult", "eps", "inv", "sampler", "lift")


@dataclass
class Block:
    kind: str
    name: str
    line: int
    items: dict[str, tuple[str, int]] = field(default_factory=dict)

    def get(self, key: str, default: str | None = None) -> str | None:
        v = self.items.get(key)
        return default if v is None else v[0]

    def need(self, key: str) -> str:
        if key not in self.items:
            raise ParseError(f"[{self.kind} {self.name}] is missing key {key!r}", self.line, 1)
        return self.items[key][0]

    def line_of(self, key: str) -> int:
        return self.items.get(key, ("", self.line))[1]


@dataclass
class Structure:
    name: str
    kind: str
    chart: Chart
    groupoid: GroupoidPresentation | None
    fields: dict[str, object]
    sigma: Expr = X.ZERO


@dataclass
class SuiteSpec:
    name: str
    structure: str | None
    run: tuple[str, ...]
    expect: dict[str, str]
    description: str = ""
    anchor: str = ""


@dataclass
class Definitions:
    """Everything defined by a file, by kind and name."""

    path: str = "<string>"
    charts: dict[str, Chart] = field(default_factory=dict)
    scalars: dict[str, Expr] = field(default_factory=dict)
    maps: dict[str, SmoothMap] = field(default_factory=dict)
    forms: dict[str, DifferentialForm] = field(default_factory=dict)
    multivectors: dict[str, MultiVector] = field(default_factory=dict)
    groupoids: dict[str, GroupoidPresentation] = field(default_factory=dict)
    structures: dict[str, Structure] = field(default_factory=dict)
    suites: dict[str, SuiteSpec] = field(default_factory=dict)

    def names(self) -> set[str]:
        out: set[str] = set()
        for table in (self.charts, self.scalars, self.maps, self.forms, self.multivectors,
                      self.groupoids, self.structures, self.suites):
            out |= set(table)
        return out

    def structure(self, name: str | None = None) -> Structure:
        if not self.structures:
            raise DefinitionError(f"{self.path}: no [structure] block")
        if name is None:
            return list(self.structures.values())[-1]
        if name not in self.structures:
            raise DefinitionError(f"{self.path}: unknown structure {name!r}")
        return self.structures[name]

    def suite(self) -> SuiteSpec | None:
        return next(iter(self.suites.values()), None)


# ------------------------------------------------------------ block reader

def split_blocks(text: str) -> list[Block]:
    blocks: list[Block] = []
    last_key: str | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        m = _HEADER.match(line.strip())
        if m and not raw[0].isspace():
            kind, name = m.groups()
            if kind not in BLOCK_KINDS:
                raise ParseError(f"unknown block kind {kind!r}", lineno, 1)
            blocks.append(Block(kind, name, lineno))
            last_key = None
            continue
        if line.lstrip().startswith("["):
            raise ParseError("malformed block header", lineno, 1)
        if not blocks:
            raise ParseError("content before the first block header", lineno, 1)
        blk = blocks[-1]
        if raw[0].isspace() and last_key is not None:
            val, ln = blk.items[last_key]
            blk.items[last_key] = (f"{val} {line.strip()}", ln)
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno, 1)
        key, val = (s.strip() for s in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.-]*", key):
            raise ParseError(f"bad key {key!r}", lineno, 1)
        if key in blk.items:
            raise ParseError(f"duplicate key {key!r} in [{blk.kind} {blk.name}]", lineno, 1)
        blk.items[key] = (val, lineno)
        last_key = key
    return blocks


def _list(value: str) -> list[str]:
    """Split on top-level commas."""
    out, depth, cur = [], 0, []
    for ch in value:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or out:
        out.append(tail)
    return out


def _float(text: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, found {text!r}", line, 1) from None


# --------------------------------------------------------- tensor parsing

def _split_terms(toks: list[Token]) -> list[tuple[int, list[Token]]]:
    """Split a token list on top-level binary ``+``/``-`` into signed terms."""
    terms: list[tuple[int, list[Token]]] = []
    sign, cur, depth = 1, [], 0
    prev: Token | None = None
    for t in toks[:-1]:
        if t.kind == "op" and t.text == "(":
            depth += 1
        elif t.kind == "op" and t.text == ")":
            depth -= 1
        binary = prev is not None and not (prev.kind == "op" and prev.text in "+-*/^(@")
        if depth == 0 and t.kind == "op" and t.text in "+-" and binary:
            terms.append((sign, cur))
            sign, cur, prev = (1 if t.text == "+" else -1), [], t
            continue
        cur.append(t)
        prev = t
    terms.append((sign, cur))
    return terms


def _basis_suffix(toks: list[Token], chart: Chart, kind: str) -> tuple[list[Token], list[str]]:
    """Peel ``b1 ^ b2 ^ ...`` off the end of a term; return (coefficient tokens, variables)."""
    names: list[str] = []
    i = len(toks)
    while True:
        if kind == "form":
            t = toks[i - 1] if i >= 1 else None
            if t is None or t.kind != "ident" or not t.text.startswith("d") or t.text[1:] not in chart.vars:
                break
            names.append(t.text[1:])
            i -= 1
        else:
            if i < 2 or toks[i - 1].kind != "ident" or toks[i - 2].text != "@":
                break
            if toks[i - 1].text not in chart.vars:
                raise ParseError(f"unknown coordinate direction @{toks[i - 1].text}", toks[i - 1].line, toks[i - 1].col)
            names.append(toks[i - 1].text)
            i -= 2
        if i >= 1 and toks[i - 1].kind == "op" and toks[i - 1].text == "^":
            i -= 1
            continue
        break
    names.reverse()
    coeff = toks[:i]
    if names and coeff:
        if coeff[-1].kind != "op" or coeff[-1].text != "*":
            t = coeff[-1]
            raise ParseError("expected '*' between coefficient and basis", t.line, t.col)
        coeff = coeff[:-1]
    return coeff, names


def parse_tensor(text: str, chart: Chart, kind: str, scalars=None, degree: int | None = None,
                 line: int = 1) -> AltTensor:
    """Parse ``coeff * dx^dy + ...`` (forms) or ``coeff * @x^@y + ...`` (multivectors)."""
    cls = DifferentialForm if kind == "form" else MultiVector
    toks = tokenize(text, line)
    resolve = chart_resolver(chart, scalars)
    total: AltTensor | None = None
    for sign, term in _split_terms(toks):
        if not term:
            t = toks[-1]
            raise ParseError("empty term", t.line, t.col)
        if term[0].kind == "op" and term[0].text == "-":
            sign, term = -sign, term[1:]  # leading unary minus
        coeff_toks, names = _basis_suffix(term, chart, kind)
        if coeff_toks:
            end = Token("end", "", coeff_toks[-1].line, coeff_toks[-1].col + 1)
            coeff = ExprParser(coeff_toks + [end], resolve).parse_all()
        else:
            coeff = X.ONE
        if sign < 0:
            coeff = X.neg(coeff)
        if not names:
            if not X.free_vars(coeff) and X.evaluate_many([coeff], {})[0] == 0.0:
                continue  # an explicit zero term
            t = term[0]
            raise ParseError(f"term has no basis element ({'d' if kind == 'form' else '@'}<var>)", t.line, t.col)
        piece = cls.basis(chart, *names, coeff=coeff)
        if total is not None and piece.degree != total.degree:
            raise ParseError("mixed degrees in one tensor", line, 1)
        total = piece if total is None else total + piece
    if total is None:
        if degree is None:
            raise ParseError("zero tensor needs an explicit 'degree'", line, 1)
        return cls.zero(chart, degree)
    if degree is not None and total.degree != degree:
        raise ParseError(f"declared degree {degree} but value has degree {total.degree}", line, 1)
    return total


# ------------------------------------------------------------------ loader

class _Loader:
    def __init__(self, path: str):
        self.d = Definitions(path)

    def define(self, blk: Block, table: dict, value) -> None:
        if blk.name in self.d.names():
            raise ParseError(f"redefinition of {blk.name!r}", blk.line, 1)
        table[blk.name] = value

    def chart(self, name: str, line: int) -> Chart:
        name = name.strip()
        if "*" in name:
            a, b = (s.strip() for s in name.split("*", 1))
            ca, cb = self.chart(a, line), self.chart(b, line)
            return ca.product(cb, f"{ca.name}*{cb.name}")
        if name not in self.d.charts:
            raise ParseError(f"unknown chart {name!r}", line, 1)
        return self.d.charts[name]

    def expr(self, text: str, chart: Chart, line: int) -> Expr:
        toks = tokenize(text, line)
        e = ExprParser(toks, chart_resolver(chart, self.d.scalars)).parse_all()
        return chart.check_expr(e)

    # blocks -------------------------------------------------------------
    def load_chart(self, blk: Block) -> None:
        names = _list(blk.need("vars"))
        ln = blk.line_of("vars")
        box = [(-1.0, 1.0)] * len(names)
        if blk.get("box"):
            lo, hi = self._interval(blk.need("box"), blk.line_of("box"))
            box = [(lo, hi)] * len(names)
        for key in blk.items:
            if key.startswith("box."):
                v = key[4:]
                if v not in names:
                    raise ParseError(f"box for unknown variable {v!r}", blk.line_of(key), 1)
                box[names.index(v)] = self._interval(blk.need(key), blk.line_of(key))
            elif key not in ("vars", "box"):
                raise ParseError(f"unknown key {key!r} in chart", blk.line_of(key), 1)
        try:
            ch = Chart(blk.name, tuple(names), tuple(box))
        except DefinitionError as exc:
            raise ParseError(str(exc), ln, 1) from None
        self.define(blk, self.d.charts, ch)

    def _interval(self, text: str, line: int) -> tuple[float, float]:
        parts = _list(text)
        if len(parts) != 2:
            raise ParseError("an interval is 'lo, hi'", line, 1)
        return _float(parts[0], line), _float(parts[1], line)

    def load_scalar(self, blk: Block) -> None:
        ch = self.chart(blk.need("chart"), blk.line_of("chart"))
        self.define(blk, self.d.scalars, self.expr(blk.need("value"), ch, blk.line_of("value")))

    def load_map(self, blk: Block) -> None:
        src = self.chart(blk.need("source"), blk.line_of("source"))
        tgt = self.chart(blk.need("target"), blk.line_of("target"))
        ln = blk.line_of("comps")
        comps = [self.expr(c, src, ln) for c in _list(blk.need("comps"))]
        if len(comps) != tgt.dim:
            raise ParseError(f"map {blk.name!r} has {len(comps)} components for a {tgt.dim}-dimensional target", ln, 1)
        self.define(blk, self.d.maps, SmoothMap(blk.name, src, tgt, tuple(comps)))

    def load_tensor(self, blk: Block) -> None:
        ch = self.chart(blk.need("chart"), blk.line_of("chart"))
        deg = blk.get("degree")
        deg_i = None if deg is None else int(_float(deg, blk.line_of("degree")))
        t = parse_tensor(blk.need("value"), ch, blk.kind, self.d.scalars, deg_i, blk.line_of("value"))
        self.define(blk, self.d.forms if blk.kind == "form" else self.d.multivectors, t)

    def load_groupoid(self, blk: Block) -> None:
        G = self.chart(blk.need("G"), blk.line_of("G"))
        M = self.chart(blk.need("M"), blk.line_of("M"))
        P = self.chart(blk.need("P"), blk.line_of("P"))
        maps = {}
        for key in _GROUPOID_MAPS:
            ref = blk.need(key)
            if ref not in self.d.maps:
                raise ParseError(f"unknown map {ref!r}", blk.line_of(key), 1)
            maps[key] = self.d.maps[ref]
        try:
            gp = GroupoidPresentation(blk.name, G, M, P, **maps)
        except (DefinitionError, ValueError) as exc:
            raise ParseError(str(exc), blk.line, 1) from None
        self.define(blk, self.d.groupoids, gp)

    def _field(self, blk: Block, key: str, chart: Chart, kind: str, degree: int):
        ref = blk.need(key)
        table = self.d.forms if kind == "form" else self.d.multivectors
        if ref in table:
            t = table[ref]
            if t.chart != chart:
                raise ParseError(f"{key} lives on chart {t.chart.name!r}, expected {chart.name!r}", blk.line_of(key), 1)
        else:
            t = parse_tensor(ref, chart, kind, self.d.scalars, degree, blk.line_of(key))
        if t.degree != degree:
            raise ParseError(f"{key} must have degree {degree}", blk.line_of(key), 1)
        return t

    def load_structure(self, blk: Block) -> None:
        kind = blk.need("kind")
        if kind not in STRUCTURE_KINDS:
            raise ParseError(f"structure kind must be one of {', '.join(STRUCTURE_KINDS)}", blk.line_of("kind"), 1)
        gp = None
        if blk.get("groupoid"):
            ref = blk.need("groupoid")
            if ref not in self.d.groupoids:
                raise ParseError(f"unknown groupoid {ref!r}", blk.line_of("groupoid"), 1)
            gp = self.d.groupoids[ref]
            ch = gp.chart_g
        else:
            ch = self.chart(blk.need("chart"), blk.line_of("chart"))
        spec = {"lcs": (("Omega", "form", 2), ("omega", "form", 1)),
                "contact": (("eta", "form", 1),),
                "jacobi": (("Lambda", "multivector", 2), ("E", "multivector", 1))}[kind]
        fields = {key: self._field(blk, key, ch, k, deg) for key, k, deg in spec}
        allowed = {"kind", "groupoid", "chart", "sigma"} | {k for k, _, _ in spec}
        for key in blk.items:
            if key not in allowed:
                raise ParseError(f"unknown key {key!r} in structure", blk.line_of(key), 1)
        sigma = X.ZERO
        if blk.get("sigma"):
            sigma = self.expr(blk.need("sigma"), ch, blk.line_of("sigma"))
        self.define(blk, self.d.structures, Structure(blk.name, kind, ch, gp, fields, sigma))

    def load_suite(self, blk: Block) -> None:
        st = blk.get("structure")
        if st is not None and st not in self.d.structures:
            raise ParseError(f"unknown structure {st!r}", blk.line_of("structure"), 1)
        run = tuple(_list(blk.get("run", "")))
        expect = {}
        for key in blk.items:
            if key.startswith("expect."):
                v = blk.need(key)
                if v not in ("pass", "fail"):
                    raise ParseError("expected verdict is 'pass' or 'fail'", blk.line_of(key), 1)
                expect[key[7:]] = v
            elif key not in ("structure", "run", "description", "anchor"):
                raise ParseError(f"unknown key {key!r} in suite", blk.line_of(key), 1)
        self.define(blk, self.d.suites, SuiteSpec(blk.name, st, run, expect,
                                                  blk.get("description", ""), blk.get("anchor", "")))


def loads(text: str, path: str = "<string>") -> Definitions:
    """Parse definition-file text.  Raises ParseError on any malformed input."""
    ld = _Loader(path)
    handlers = {"chart": ld.load_chart, "scalar": ld.load_scalar, "map": ld.load_map,
                "form": ld.load_tensor, "multivector": ld.load_tensor, "groupoid": ld.load_groupoid,
                "structure": ld.load_structure, "suite": ld.load_suite}
    for blk in split_blocks(text):
        try:
            handlers[blk.kind](blk)
        except ParseError:
            raise
        except DefinitionError as exc:
            raise ParseError(str(exc), blk.line, 1) from None
    return ld.d


def load(path: str | Path) -> Definitions:
    p = Path(path)
    return loads(p.read_text(), str(p))
