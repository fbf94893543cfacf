"""Structural checks on an analyzed pencil.

Every numbered bound the analysis must satisfy becomes a named three-valued
verdict (pass / fail / not_applicable): per-fiber Euler bounds, the
concurrent-lines characterization of the maximal Euler characteristic, the
member-count bound m <= 6 - p, node counts for general-position members,
the Milnor bound on non-special fibers, and the structure forced on a
six-member pencil. A fail on the member-count bound over a valid transverse
pencil would be a reportable event; it never happens on the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import List, Optional, Sequence

import numpy as np

from . import euler as euler_mod
from . import pencil as pencil_mod
from .forms import DEFAULT_TOL, Tolerances
from .pencil import BaseLocus, Pencil, SingularFiber


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str  # "pass" | "fail" | "not_applicable"
    details: str = ""


@dataclass
class AnalysisReport:
    degree: int
    seed: int
    tol: Tolerances
    base: BaseLocus
    fibers: List[SingularFiber]
    m: int
    p: int
    qbar: int
    ledger: Optional[euler_mod.Ledger]
    verdicts: List[Verdict] = field(default_factory=list)
    analyzed: bool = True
    diagnostics: List[str] = field(default_factory=list)

    @property
    def conic_line_fibers(self) -> List[SingularFiber]:
        return [f for f in self.fibers if f.special and f.reduced]

    @property
    def nonspecial_fibers(self) -> List[SingularFiber]:
        return [f for f in self.fibers if not f.special and f.reduced]


def analyze_pencil(p: Pencil) -> AnalysisReport:
    """Full analysis: base locus, singular members, summary counts, ledger,
    verdicts. A non-transverse base locus yields a report with analyzed=False."""
    base = pencil_mod.base_locus(p)
    if not base.transverse:
        return AnalysisReport(
            p.d, p.seed, p.tol, base, [], 0, 0, 0, None, [],
            analyzed=False,
            diagnostics=["base locus not transverse: pencil detected, not analyzed"],
        )
    fibers = pencil_mod.singular_members(p, base)
    m = sum(1 for f in fibers if f.special and f.reduced)
    pcount = sum(1 for f in fibers if f.special and f.reduced and f.concurrent)
    qbar = sum(f.q for f in fibers if f.special and f.reduced and not f.concurrent)
    ledger = euler_mod.global_ledger([f for f in fibers if f.reduced], p.d)
    diagnostics = [d for f in fibers for d in f.diagnostics]
    if any(not f.reduced for f in fibers):
        diagnostics.append("non-reduced member encountered; excluded from m and the ledger")
    report = AnalysisReport(p.d, p.seed, p.tol, base, fibers, m, pcount, qbar,
                            ledger, [], True, diagnostics)
    report.verdicts = run_checks(report)
    return report


# ---------------------------------------------------------------------------
# individual checkers
# ---------------------------------------------------------------------------


def check_euler_bounds(fiber: SingularFiber, d: int) -> Verdict:
    """Per special fiber: d(5-d)/2 - q <= e <= d + 1."""
    name = "euler_bounds"
    if not (fiber.special and fiber.reduced):
        return Verdict(name, "not_applicable", "fiber is not a reduced conic-line member")
    lower = d * (5 - d) // 2 - fiber.q
    upper = d + 1
    ok = lower <= fiber.euler <= upper
    return Verdict(name, "pass" if ok else "fail",
                   f"{lower} <= e={fiber.euler} <= {upper} with q={fiber.q}")


def check_concurrent_iff_max_euler(fiber: SingularFiber, d: int) -> Verdict:
    """Per special fiber: e = d+1 exactly for a pencil of d concurrent lines."""
    name = "max_euler_iff_concurrent"
    if not (fiber.special and fiber.reduced):
        return Verdict(name, "not_applicable", "fiber is not a reduced conic-line member")
    is_max = fiber.euler == d + 1
    is_pencil_of_lines = (
        fiber.decomposition is not None
        and fiber.q == 0
        and sum(l.multiplicity for l in fiber.decomposition.lines) == d
        and fiber.decomposition.concurrent_point is not None
    )
    ok = is_max == is_pencil_of_lines
    return Verdict(name, "pass" if ok else "fail",
                   f"e={fiber.euler} (max={is_max}) vs concurrent-lines={is_pencil_of_lines}")


def check_member_count_bound(report: AnalysisReport) -> Verdict:
    """m <= 6, p <= 3, and m <= 6 - p whenever p >= 1 (degree > 2 pencils)."""
    name = "member_count_bound"
    if report.degree <= 2:
        return Verdict(name, "not_applicable", "bound needs degree > 2")
    m, p = report.m, report.p
    ok = m <= 6 and p <= 3 and (p == 0 or m <= 6 - p)
    return Verdict(name, "pass" if ok else "fail", f"m={m}, p={p}")


def check_node_count(fiber: SingularFiber, d: int) -> Verdict:
    """Per general-position special fiber: exactly C(d,2) - q nodes."""
    name = "node_count"
    if not (fiber.special and fiber.reduced and fiber.decomposition is not None
            and fiber.decomposition.general_position):
        return Verdict(name, "not_applicable", "fiber is not in general position")
    expected = comb(d, 2) - fiber.q
    nodes = sum(1 for s in fiber.singular_points if s.mu == 1)
    ok = nodes == expected and all(s.mu == 1 for s in fiber.singular_points)
    return Verdict(name, "pass" if ok else "fail",
                   f"{nodes} nodes vs C({d},2) - {fiber.q} = {expected}")


def check_nonspecial_milnor_bound(report: AnalysisReport) -> Verdict:
    """Odd degree, non-concurrent members in general position: the total
    Milnor number of non-special fibers is at most (d-1)^2 (6-m) / 2."""
    name = "nonspecial_milnor_bound"
    d, m = report.degree, report.m
    if d % 2 == 0:
        return Verdict(name, "not_applicable", "bound needs odd degree")
    free_members = [f for f in report.conic_line_fibers if not f.concurrent]
    if any(f.decomposition is None or not f.decomposition.general_position
           for f in free_members):
        return Verdict(name, "not_applicable",
                       "a non-concurrent conic-line member is not in general position")
    total = sum(f.mu_total for f in report.nonspecial_fibers)
    bound = (d - 1) ** 2 * (6 - m) / 2
    ok = total <= bound
    return Verdict(name, "pass" if ok else "fail",
                   f"non-special milnor total {total} <= {bound}")


def check_six_member_structure(report: AnalysisReport) -> Verdict:
    """For odd degree and m = 6 with all members in general position:
    (i) no non-special singular fibers, (ii) every member is 1 line plus
    (d-1)/2 conics, (iii) for d = 3 every base point lies on a conic
    component of some member."""
    name = "six_member_structure"
    d, m = report.degree, report.m
    if d % 2 == 0 or m != 6:
        return Verdict(name, "not_applicable", f"needs odd degree and m=6 (m={m})")
    members = report.conic_line_fibers
    if any(f.decomposition is None or not f.decomposition.general_position for f in members):
        return Verdict(name, "not_applicable", "members not all in general position")
    clauses = []
    ok1 = len(report.nonspecial_fibers) == 0
    clauses.append(f"(i) non-special fibers: {len(report.nonspecial_fibers)}")
    ok2 = all(
        len(f.decomposition.lines) == 1
        and sum(l.multiplicity for l in f.decomposition.lines) == 1
        and f.q == (d - 1) // 2
        for f in members
    )
    clauses.append("(ii) 1 line + (d-1)/2 conics: " + ("yes" if ok2 else "no"))
    ok3 = True
    if d == 3:
        tol = report.tol
        for bp, _ in report.base.points:
            on_conic = any(
                abs(c.form()(*bp.coords)) <= 1e-6 * c.form().norm()
                for f in members
                for c in (f.decomposition.conics if f.decomposition else ())
            )
            if not on_conic:
                ok3 = False
                break
        clauses.append("(iii) every base point on a conic: " + ("yes" if ok3 else "no"))
    ok = ok1 and ok2 and ok3
    return Verdict(name, "pass" if ok else "fail", "; ".join(clauses))


def run_checks(report: AnalysisReport) -> List[Verdict]:
    """All checkers over a report, plus internal consistency verdicts."""
    out: List[Verdict] = []
    d = report.degree
    for i, fiber in enumerate(report.fibers):
        for verdict in (check_euler_bounds(fiber, d),
                        check_concurrent_iff_max_euler(fiber, d),
                        check_node_count(fiber, d)):
            out.append(Verdict(f"{verdict.name}[{_param_str(fiber.param)}]",
                               verdict.status, verdict.details))
    out.append(check_member_count_bound(report))
    out.append(check_nonspecial_milnor_bound(report))
    out.append(check_six_member_structure(report))
    if report.ledger is not None:
        ok = report.ledger.balance == 0
        out.append(Verdict("euler_ledger_balance", "pass" if ok else "fail",
                           f"balance={report.ledger.balance}"))
    qb_ok = report.qbar <= (report.m - report.p) * (report.degree // 2)
    out.append(Verdict("qbar_bound", "pass" if qb_ok else "fail",
                       f"qbar={report.qbar} <= (m-p)*floor(d/2)="
                       f"{(report.m - report.p) * (report.degree // 2)}"))
    cross_ok = not any("euler mismatch" in diag for f in report.fibers for diag in f.diagnostics)
    out.append(Verdict("euler_cross_validation", "pass" if cross_ok else "fail",
                       "component count vs milnor sum on every conic-line fiber"))
    mu_ok = not any("invariant violation" in diag for f in report.fibers for diag in f.diagnostics)
    out.append(Verdict("milnor_branch_invariant", "pass" if mu_ok else "fail",
                       "mu = 2*delta - r + 1 at every conic-line singular point"))
    return out


def _param_str(param) -> str:
    a, b = param
    return f"[{a.real:.4g}{a.imag:+.4g}i:{b.real:.4g}{b.imag:+.4g}i]"


def failed(verdicts: Sequence[Verdict]) -> List[Verdict]:
    return [v for v in verdicts if v.status == "fail"]
