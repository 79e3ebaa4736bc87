"""Numerical verification of l.c.s., contact and Jacobi groupoid identities."""

from __future__ import annotations

from .dsl import Definitions, load, loads
from .errors import GeometryError
from .expr import Chart, Expr, parse_expr
from .exterior import DifferentialForm, MultiVector, SmoothMap
from .groupoid import GroupoidPresentation, check_axioms
from .jacobi import JacobiStructure, LcsStructure, check_jacobi, check_lcs, lcs_to_jacobi, reeb
from .lcs_groupoid import (
    ContactGroupoidData,
    JacobiGroupoidData,
    LcsGroupoidData,
    build_lcs_from_contact,
    check_contact_groupoid,
    check_jacobi_groupoid,
    check_lcs_groupoid,
    check_prop_3_1,
    compute_theta0,
    theorem_4_6_crosscheck,
    verify_algebroid_iso,
)
from .report import CheckReport

__all__ = [
    "Chart", "CheckReport", "ContactGroupoidData", "Definitions", "DifferentialForm", "Expr",
    "GeometryError", "GroupoidPresentation", "JacobiGroupoidData", "JacobiStructure", "LcsGroupoidData",
    "LcsStructure", "MultiVector", "SmoothMap", "build_lcs_from_contact", "check_axioms",
    "check_contact_groupoid", "check_jacobi", "check_jacobi_groupoid", "check_lcs", "check_lcs_groupoid",
    "check_prop_3_1", "compute_theta0", "lcs_to_jacobi", "load", "loads", "parse_expr", "reeb",
    "theorem_4_6_crosscheck", "verify_algebroid_iso",
]
