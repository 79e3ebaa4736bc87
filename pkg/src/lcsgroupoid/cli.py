"""Command-line front end: run check suites on ``.geo`` definition files.

Exit codes: 0 when every verdict passes, 1 on any failing condition, 2 on a
definition error (parse error, unknown suite, suite not applicable).
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from . import dsl
from . import expr as X
from .errors import DefinitionError, GeometryError, UnknownSuite
from .groupoid import (
    CotangentGroupoid,
    TangentGroupoid,
    check_axioms,
    check_derived_axioms,
    check_gxr_lifts,
)
from .jacobi import JacobiStructure, LcsStructure, check_jacobi, check_lcs, lcs_first_kind, lcs_to_jacobi, lift_to_product, reeb
from .exterior import tensor_residual
from .lcs_groupoid import (
    ContactGroupoidData,
    JacobiGroupoidData,
    LcsGroupoidData,
    build_lcs_from_contact,
    check_contact_groupoid,
    check_jacobi_groupoid,
    check_lcs_groupoid,
    check_prop_3_1,
    check_symplectic_algebroid,
    compute_theta0,
    theorem_4_6_crosscheck,
    verify_algebroid_iso,
)
from .report import CheckReport, record

DEFAULT_SEED = 0xD1CE
DEFAULT_SAMPLES = 64
DEFAULT_TOL = 1e-8

SUITES = ("lcs", "jacobi", "axioms", "contact-groupoid", "prop-3-1", "lcs-groupoid",
          "jacobi-groupoid", "thm-4-6", "theta0", "algebroid")


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    samples: int = DEFAULT_SAMPLES
    tol: float = DEFAULT_TOL


class NotApplicable(DefinitionError):
    """The suite needs data the structure does not provide."""


# ------------------------------------------------------ structure adapters

def _need_groupoid(st: dsl.Structure, suite: str):
    if st.groupoid is None:
        raise NotApplicable(f"suite {suite!r} needs a groupoid; structure {st.name!r} lives on a chart")
    return st.groupoid


def _chart_lcs(st: dsl.Structure, suite: str) -> LcsStructure:
    if st.kind == "lcs":
        return LcsStructure(st.chart, st.fields["Omega"], st.fields["omega"])
    if st.kind == "contact":
        return lcs_first_kind(st.fields["eta"])
    raise NotApplicable(f"suite {suite!r} does not apply to a jacobi structure")


def _lcs_data(st: dsl.Structure, suite: str) -> LcsGroupoidData:
    G = _need_groupoid(st, suite)
    if st.kind == "lcs":
        return LcsGroupoidData(G, st.fields["Omega"], st.fields["omega"], st.sigma)
    if st.kind == "contact":
        return build_lcs_from_contact(ContactGroupoidData(G, st.fields["eta"], st.sigma))
    raise NotApplicable(f"suite {suite!r} needs an l.c.s. or contact structure")


def _contact_data(st: dsl.Structure, suite: str) -> ContactGroupoidData:
    if st.kind != "contact":
        raise NotApplicable(f"suite {suite!r} needs a contact structure")
    return ContactGroupoidData(_need_groupoid(st, suite), st.fields["eta"], st.sigma)


def _jacobi_data(st: dsl.Structure, suite: str) -> JacobiGroupoidData:
    if st.kind == "jacobi":
        j = JacobiStructure(st.chart, st.fields["Lambda"], st.fields["E"])
        return JacobiGroupoidData(_need_groupoid(st, suite), j, st.sigma)
    return _lcs_data(st, suite).jacobi_data()


# ---------------------------------------------------------------- suites

def suite_lcs(st: dsl.Structure, s: Settings) -> CheckReport:
    lcs = _chart_lcs(st, "lcs")
    return check_lcs(lcs.Omega, lcs.omega, s.samples, s.seed, s.tol)


def suite_jacobi(st: dsl.Structure, s: Settings) -> CheckReport:
    if st.kind == "jacobi":
        return check_jacobi(JacobiStructure(st.chart, st.fields["Lambda"], st.fields["E"]), s.samples, s.seed, s.tol)
    lcs = _chart_lcs(st, "jacobi")
    j = lcs_to_jacobi(lcs)
    rep = check_jacobi(j, s.samples, s.seed, s.tol)
    if st.kind == "contact":
        def e_minus_reeb():
            xi = lift_to_product(reeb(st.fields["eta"]).xi, lcs.chart)
            pts = X.sample_array(lcs.chart, s.samples, s.seed, j.guards)
            return tensor_residual(j.E, -xi, pts)
        record(rep, "eq12.E_minus_reeb", "Eq.12", e_minus_reeb)
    return rep


def suite_axioms(st: dsl.Structure, s: Settings) -> CheckReport:
    G = _need_groupoid(st, "axioms")
    n = s.samples
    rep = CheckReport("axioms", s.seed, n, s.tol)
    rep.merge(check_axioms(G, n, s.seed, s.tol))
    rep.merge(check_derived_axioms(TangentGroupoid(G), n, s.seed, s.tol), "TG.")
    rep.merge(check_derived_axioms(CotangentGroupoid(G), n, s.seed, s.tol), "T*G.")
    if not X.is_zero(st.sigma):
        rep.merge(check_derived_axioms(TangentGroupoid(G, st.sigma), n, s.seed, s.tol), "TGxR.")
        rep.merge(check_derived_axioms(CotangentGroupoid(G, st.sigma, "sigma"), n, s.seed, s.tol), "T*G_sigma.")
        rep.merge(check_derived_axioms(CotangentGroupoid(G, st.sigma, "extended"), n, s.seed, s.tol), "T*GxR.")
        rep.merge(check_gxr_lifts(G, st.sigma, n, s.seed, s.tol))
    return rep


def suite_contact_groupoid(st, s):
    return check_contact_groupoid(_contact_data(st, "contact-groupoid"), s.samples, s.seed, s.tol)


def suite_prop_3_1(st, s):
    return check_prop_3_1(_contact_data(st, "prop-3-1"), s.samples, s.seed, s.tol)


def suite_lcs_groupoid(st, s):
    return check_lcs_groupoid(_lcs_data(st, "lcs-groupoid"), s.samples, s.seed, s.tol)


def suite_jacobi_groupoid(st, s):
    jd = _jacobi_data(st, "jacobi-groupoid")
    rep = CheckReport("jacobi-groupoid", s.seed, s.samples, s.tol)
    rep.merge(check_jacobi_groupoid(jd, "definition", s.samples, s.seed, s.tol))
    rep.merge(check_jacobi_groupoid(jd, "characterization", s.samples, s.seed, s.tol, structure_check=False), "char/")
    return rep


def suite_thm_4_6(st, s):
    return theorem_4_6_crosscheck(_lcs_data(st, "thm-4-6"), s.samples, s.seed, s.tol).report


def suite_theta0(st, s):
    return compute_theta0(_lcs_data(st, "theta0"), s.samples, s.seed, s.tol, strict=False).report


def suite_algebroid(st, s):
    data = _lcs_data(st, "algebroid")
    rep = verify_algebroid_iso(data, s.samples, s.seed, s.tol)
    if X.is_zero(data.sigma) and data.omega.is_zero():
        rep.merge(check_symplectic_algebroid(data, s.samples, s.seed, min(s.tol, 1e-9)))
    return rep


RUNNERS: dict[str, Callable[[dsl.Structure, Settings], CheckReport]] = {
    "lcs": suite_lcs,
    "jacobi": suite_jacobi,
    "axioms": suite_axioms,
    "contact-groupoid": suite_contact_groupoid,
    "prop-3-1": suite_prop_3_1,
    "lcs-groupoid": suite_lcs_groupoid,
    "jacobi-groupoid": suite_jacobi_groupoid,
    "thm-4-6": suite_thm_4_6,
    "theta0": suite_theta0,
    "algebroid": suite_algebroid,
}


def applicable_suites(st: dsl.Structure) -> list[str]:
    """Suites whose inputs ``st`` provides, in canonical order."""
    out = []
    for name in SUITES:
        if name in ("lcs",) and st.kind == "jacobi":
            continue
        if name in ("contact-groupoid", "prop-3-1") and st.kind != "contact":
            continue
        if name not in ("lcs", "jacobi") and st.groupoid is None:
            continue
        if name in ("lcs-groupoid", "thm-4-6", "theta0", "algebroid") and st.kind == "jacobi":
            continue
        out.append(name)
    return out


def run_suite(defs: dsl.Definitions, suite: str, settings: Settings, structure: str | None = None) -> CheckReport:
    """Run one named suite.  Raises UnknownSuite or a DefinitionError."""
    if suite not in RUNNERS:
        raise UnknownSuite(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    spec = defs.suite()
    st = defs.structure(structure or (spec.structure if spec else None))
    try:
        rep = RUNNERS[suite](st, settings)
    except DefinitionError:
        raise
    except GeometryError as exc:
        rep = CheckReport(suite, settings.seed, settings.samples, settings.tol)
        rep.fail(f"{suite}.error", "-", f"{type(exc).__name__}: {exc}")
    rep.suite = suite
    rep.seed, rep.samples, rep.tolerance = settings.seed, settings.samples, settings.tol
    return rep


def selected_suites(defs: dsl.Definitions, suite: str | None) -> list[str]:
    spec = defs.suite()
    if suite == "all":
        return applicable_suites(defs.structure(spec.structure if spec else None))
    if suite is not None:
        return [suite]
    if spec and spec.run:
        return list(spec.run)
    return applicable_suites(defs.structure())


def combine(reports: list[CheckReport], name: str, settings: Settings) -> CheckReport:
    if len(reports) == 1:
        return reports[0]
    out = CheckReport(name, settings.seed, settings.samples, settings.tol)
    for r in reports:
        out.merge(r, f"{r.suite}:")
    return out


def _run_many(jobs: list[Callable[[], CheckReport]], workers: int, fail_fast: bool) -> list[CheckReport]:
    if fail_fast or workers <= 1:
        out = []
        for job in jobs:
            out.append(job())
            if fail_fast and not out[-1].passed:
                break
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda f: f(), jobs))


# --------------------------------------------------------------- catalog

def catalog_dir() -> Path:
    return Path(str(resources.files("lcsgroupoid") / "catalog"))


def catalog_files() -> list[Path]:
    return sorted(catalog_dir().glob("*.geo"))


def resolve_file(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    cand = catalog_dir() / (name if name.endswith(".geo") else f"{name}.geo")
    if cand.exists():
        return cand
    raise FileNotFoundError(name)


def list_catalog() -> list[dict]:
    """One row per shipped example: id, description, anchor and expected verdicts."""
    rows = []
    for f in catalog_files():
        defs = dsl.load(f)
        spec = defs.suite()
        rows.append({
            "id": f.stem,
            "description": spec.description if spec else "",
            "anchor": spec.anchor if spec else "",
            "expected": dict(spec.expect) if spec else {},
        })
    return rows


def run_catalog(settings: Settings, workers: int = 1) -> tuple[CheckReport, list[tuple[str, str, str, str]]]:
    """Run every catalog file's default suites.

    Returns the merged report and rows ``(file, suite, expected, actual)``.
    """
    jobs, keys = [], []
    for f in catalog_files():
        defs = dsl.load(f)
        spec = defs.suite()
        for suite in selected_suites(defs, None):
            jobs.append(lambda d=defs, su=suite: run_suite(d, su, settings))
            keys.append((f.stem, suite, (spec.expect.get(suite, "pass") if spec else "pass")))
    reports = _run_many(jobs, workers, False)
    merged = CheckReport("catalog", settings.seed, settings.samples, settings.tol)
    rows = []
    for (stem, suite, expected), rep in zip(keys, reports):
        merged.merge(rep, f"{stem}:{suite}:")
        rows.append((stem, suite, expected, rep.verdict))
    return merged, rows


# ------------------------------------------------------------------- main

def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcsgroupoid", description="Verify l.c.s., contact and Jacobi groupoid identities.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="sampling seed (default 0xD1CE)")
        p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="sample points per condition")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="residual tolerance")
        p.add_argument("--json", metavar="PATH", help="write the report as JSON ('-' for stdout)")
        p.add_argument("--jobs", type=int, default=1, help="suites run in parallel")
        p.add_argument("--timing", action="store_true", help="record elapsed_ms (reports are then not reproducible)")
        p.add_argument("--quiet", action="store_true", help="no text summary")

    run = sub.add_parser("run", help="run suites on a definition file")
    run.add_argument("file", help="path to a .geo file or a catalog id")
    run.add_argument("--suite", default=None, help=f"one of {', '.join(SUITES)}, or all")
    run.add_argument("--structure", default=None, help="structure block to check (default: the suite block's)")
    run.add_argument("--fail-fast", action="store_true", help="stop after the first failing suite")
    common(run)

    cat = sub.add_parser("catalog", help="run the whole shipped catalog against its expected verdicts")
    common(cat)

    sub.add_parser("list", help="list the shipped catalog")
    return ap


def _emit(rep: CheckReport, args) -> None:
    if not args.quiet:
        print(rep.summary())
    if args.json:
        text = rep.to_json() + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            Path(args.json).write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for row in list_catalog():
            exp = ", ".join(f"{k}={v}" for k, v in sorted(row["expected"].items()))
            print(f"{row['id']:<22} {row['anchor']:<28} {row['description']}  [{exp}]")
        return 0

    settings = Settings(args.seed, args.samples, args.tol)
    t0 = time.perf_counter()
    if args.command == "catalog":
        try:
            rep, rows = run_catalog(settings, args.jobs)
        except DefinitionError as exc:
            print(f"definition error: {exc}", file=sys.stderr)
            return 2
        if args.timing:
            rep.elapsed_ms = round((time.perf_counter() - t0) * 1e3, 3)
        if not args.quiet:
            for stem, suite, expected, actual in rows:
                mark = "ok" if expected == actual else "MISMATCH"
                print(f"{stem:<22} {suite:<18} expected={expected:<4} actual={actual:<4} {mark}")
        args.quiet = True
        _emit(rep, args)
        return 0 if all(r[2] == r[3] for r in rows) else 1

    try:
        defs = dsl.load(resolve_file(args.file))
        suites = selected_suites(defs, args.suite)
        for su in suites:
            if su not in RUNNERS:
                raise UnknownSuite(f"unknown suite {su!r}; choose from {', '.join(SUITES)} or all")
        jobs = [lambda su=su: run_suite(defs, su, settings, args.structure) for su in suites]
        reports = _run_many(jobs, args.jobs, args.fail_fast)
    except FileNotFoundError as exc:
        print(f"definition error: no such file {exc}", file=sys.stderr)
        return 2
    except DefinitionError as exc:
        print(f"definition error: {exc}", file=sys.stderr)
        return 2
    rep = combine(reports, args.suite or "+".join(suites), settings)
    if args.timing:
        rep.elapsed_ms = round((time.perf_counter() - t0) * 1e3, 3)
    _emit(rep, args)
    return 0 if rep.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
