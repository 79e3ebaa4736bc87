"""Check reports: per-condition residual maxima with pass/fail verdicts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

from .errors import GeometryError

DEFAULT_TOL = 1e-8


@dataclass
class Entry:
    id: str
    paper_tag: str
    max_residual: float
    samples: int
    tolerance: float
    detail: str = ""

    @property
    def verdict(self) -> str:
        ok = math.isfinite(self.max_residual) and self.max_residual <= self.tolerance
        return "pass" if ok else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        res = self.max_residual
        d = {
            "id": self.id,
            "paper_tag": self.paper_tag,
            "max_residual": res if math.isfinite(res) else None,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }
        if self.detail:
            d["detail"] = self.detail
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Entry:
        res = d["max_residual"]
        return cls(
            d["id"], d["paper_tag"], math.inf if res is None else float(res),
            int(d.get("samples", 0)), float(d["tolerance"]), d.get("detail", ""),
        )


@dataclass
class CheckReport:
    suite: str
    seed: int = 0
    samples: int = 0
    tolerance: float = DEFAULT_TOL
    entries: list[Entry] = field(default_factory=list)
    elapsed_ms: float | None = None

    def add(self, id: str, paper_tag: str, residual: float, samples: int | None = None,
            tolerance: float | None = None, detail: str = "") -> Entry:
        if any(e.id == id for e in self.entries):
            raise ValueError(f"duplicate report entry {id!r}")
        e = Entry(id, paper_tag, float(residual), self.samples if samples is None else samples,
                  self.tolerance if tolerance is None else tolerance, detail)
        self.entries.append(e)
        return e

    def fail(self, id: str, paper_tag: str, detail: str, samples: int | None = None) -> Entry:
        return self.add(id, paper_tag, math.inf, samples, detail=detail)

    def merge(self, other: CheckReport, prefix: str = "") -> CheckReport:
        for e in other.entries:
            self.add(prefix + e.id, e.paper_tag, e.max_residual, e.samples, e.tolerance, e.detail)
        return self

    def __getitem__(self, id: str) -> Entry:
        for e in self.entries:
            if e.id == id:
                return e
        raise KeyError(id)

    def __contains__(self, id: str) -> bool:
        return any(e.id == id for e in self.entries)

    def __iter__(self):
        return iter(self.sorted_entries())

    def sorted_entries(self) -> list[Entry]:
        return sorted(self.entries, key=lambda e: e.id)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def failures(self) -> list[Entry]:
        return [e for e in self.sorted_entries() if not e.passed]

    def max_residual(self, ids: Iterable[str] | None = None) -> float:
        sel = self.entries if ids is None else [self[i] for i in ids]
        return max((e.max_residual for e in sel), default=0.0)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "entries": [e.to_dict() for e in self.sorted_entries()],
            "elapsed_ms": self.elapsed_ms,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> CheckReport:
        return cls(
            d["suite"], int(d["seed"]), int(d["samples"]), float(d["tolerance"]),
            [Entry.from_dict(e) for e in d["entries"]], d.get("elapsed_ms"),
        )

    @classmethod
    def from_json(cls, text: str) -> CheckReport:
        return cls.from_dict(json.loads(text))

    def summary(self) -> str:
        lines = [f"{self.suite}: {self.verdict} (seed={self.seed}, samples={self.samples})"]
        for e in self.sorted_entries():
            lines.append(f"  [{e.verdict}] {e.id:<40} {e.paper_tag:<22} {e.max_residual:.3e} <= {e.tolerance:.0e}"
                         + (f"  ({e.detail})" if e.detail else ""))
        return "\n".join(lines)


def record(report: CheckReport, id: str, paper_tag: str, compute, samples: int | None = None,
           tolerance: float | None = None) -> Entry:
    """Run ``compute()`` (returning a residual) and file the result.

    Geometry errors raised by the computation become failing entries carrying
    the error message, so a broken structure yields a report instead of a crash.
    """
    try:
        res = compute()
    except GeometryError as exc:
        return report.add(id, paper_tag, math.inf, samples, tolerance, detail=f"{type(exc).__name__}: {exc}")
    return report.add(id, paper_tag, res, samples, tolerance)
