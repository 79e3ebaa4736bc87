from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from lcsgroupoid import dsl
from lcsgroupoid import expr as X
from lcsgroupoid.cli import _contact_data, _lcs_data, resolve_file


def to_sympy(e: X.Expr, symbols: dict[str, sp.Symbol] | None = None) -> sp.Expr:
    """Independent translation of an expression tree to sympy."""
    text = X.to_text(e).replace("^", "**")
    names = {v: sp.Symbol(v) for v in X.free_vars(e)}
    if symbols:
        names.update(symbols)
    return sp.sympify(text, locals=names)


def catalog_defs(name: str) -> dsl.Definitions:
    return dsl.load(resolve_file(name))


def catalog_lcs(name: str):
    defs = catalog_defs(name)
    return _lcs_data(defs.structure(), "test")


def catalog_contact(name: str):
    defs = catalog_defs(name)
    return _contact_data(defs.structure(), "test")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ------------------------------------------------------------- acceptance

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, text = mark.args
    if rep.failed:
        _CRITERIA[n] = ("FAIL", text)
    elif rep.when == "call":
        _CRITERIA.setdefault(n, ("PASS", text))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        verdict, text = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {verdict}  {text}")
