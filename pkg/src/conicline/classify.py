"""Conic-line decomposition of plane curves.

A degree-d member is a conic-line curve when it splits completely into
linear and irreducible quadratic factors. Detection is numerical: candidate
lines come from pairs of singular points and curve samples, candidate conics
from five-point null-space fits; a candidate is accepted only when its
least-squares division residual clears tau_div, then the quotient is
searched again. NotConicLine is an ordinary value (non-special singular
fibers are expected), not an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from . import forms
from .forms import (
    DEFAULT_TOL,
    HomTernaryForm,
    ProjPoint,
    QC,
    Tolerances,
    exact_divide,
    least_squares_divide,
    rationalize,
    restrict_to_line,
)
from .roots import DegenerateSystem, common_roots, cluster_points, solve_binary


class NonReducedInput(Exception):
    pass


@dataclass(frozen=True)
class LineFactor:
    """Linear component a x + b y + c z, coefficients normalized."""

    coeffs: np.ndarray  # (3,) complex
    multiplicity: int = 1
    certified: Optional[bool] = None  # exact-division confirmation, when attempted

    def form(self) -> HomTernaryForm:
        return HomTernaryForm(1, np.array(self.coeffs, dtype=np.complex128))


@dataclass(frozen=True)
class ConicFactor:
    """Irreducible quadratic component, stored via its symmetric matrix."""

    sym: np.ndarray  # (3, 3) complex symmetric
    multiplicity: int = 1
    irreducible: bool = True
    certified: Optional[bool] = None

    def form(self) -> HomTernaryForm:
        a = self.sym
        arr = np.array(
            [a[0, 0], 2 * a[0, 1], 2 * a[0, 2], a[1, 1], 2 * a[1, 2], a[2, 2]],
            dtype=np.complex128,
        )
        return HomTernaryForm(2, arr)


@dataclass(frozen=True)
class IntersectionCluster:
    """A point where components of a decomposition meet."""

    point: ProjPoint
    components: tuple  # indices into Decomposition.components()
    delta: int  # sum of pairwise local intersection multiplicities here
    transverse: bool  # every pairwise multiplicity is 1


@dataclass(frozen=True)
class Decomposition:
    degree: int
    lines: tuple
    conics: tuple
    q: int
    is_conic_line: bool
    concurrent_point: Optional[ProjPoint]
    general_position: bool
    intersections: tuple = field(default=())

    def components(self) -> list:
        return list(self.lines) + list(self.conics)


@dataclass(frozen=True)
class NotConicLine:
    """Verdict value: an undecomposable remainder of the stated degree is left."""

    remainder_degree: int
    lines: tuple = ()
    conics: tuple = ()


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_curve_points(h: HomTernaryForm, n: int, seed, tol: Tolerances = DEFAULT_TOL) -> List[ProjPoint]:
    """Up to n*deg(h) points on {h = 0}: intersections with n seeded random lines."""
    if h.is_zero or n < 1:
        raise ValueError("need a nonzero form and n >= 1")
    hf = h.to_float().normalized()
    rng = np.random.default_rng(_seed_list(seed) + [11])
    scale = hf.norm()
    out = []
    for _ in range(n):
        p = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        q = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        try:
            b = restrict_to_line(hf, p, q)
            clusters = solve_binary(b, tol)
        except Exception:
            continue
        for c in clusters:
            s, t = c.representative
            pt = ProjPoint.normalize(s * p + t * q)
            if abs(hf(*pt.coords)) <= tol.tau * scale:
                out.append(pt)
    return out


def _seed_list(seed) -> list:
    if isinstance(seed, (list, tuple)):
        return list(seed)
    return [int(seed)]


# ---------------------------------------------------------------------------
# candidate construction
# ---------------------------------------------------------------------------


def line_through(p: ProjPoint, q: ProjPoint) -> Optional[np.ndarray]:
    c = np.cross(p.coords, q.coords)
    n = np.abs(c).max()
    if n < 1e-12:
        return None
    return c / c[int(np.argmax(np.abs(c)))]


def conic_through(points: Sequence[ProjPoint]) -> Optional[np.ndarray]:
    """Null-space fit through five points; returns the 6-vector of monomial
    coefficients in the order x^2, xy, xz, y^2, yz, z^2 or None if degenerate."""
    rows = []
    for p in points:
        x, y, z = p.coords
        rows.append([x * x, x * y, x * z, y * y, y * z, z * z])
    m = np.array(rows, dtype=np.complex128)
    _, s, vh = np.linalg.svd(m)
    if s[-2 if len(s) > 4 else -1] < 1e-10 * s[0]:
        return None  # more than one conic fits: degenerate sample subset
    v = vh[-1].conj()
    return v / v[int(np.argmax(np.abs(v)))]


def conic_sym(coeffs6: np.ndarray) -> np.ndarray:
    cx2, cxy, cxz, cy2, cyz, cz2 = coeffs6
    return np.array(
        [
            [cx2, cxy / 2, cxz / 2],
            [cxy / 2, cy2, cyz / 2],
            [cxz / 2, cyz / 2, cz2],
        ],
        dtype=np.complex128,
    )


def split_conic(coeffs6: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> Optional[tuple]:
    """Split a rank-2 quadratic form into its two lines, or None if irreducible."""
    a = conic_sym(coeffs6)
    u, s, vh = np.linalg.svd(a)
    if s[2] > tol.tau_rank * s[0]:
        return None
    vertex = vh[2].conj()  # the lines cross here
    vertex /= np.abs(vertex).max()
    q_form = HomTernaryForm(2, np.array(coeffs6, dtype=np.complex128))
    rng = np.random.default_rng(321)
    for _ in range(6):
        p0 = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        q0 = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        b = restrict_to_line(q_form, p0, q0)
        if b.is_zero:
            continue
        clusters = solve_binary(b, tol)
        pts = [s0 * p0 + t0 * q0 for s0, t0 in (c.representative for c in clusters)]
        if len(pts) != 2:
            continue
        l1 = np.cross(vertex, pts[0])
        l2 = np.cross(vertex, pts[1])
        if np.abs(l1).max() < 1e-10 or np.abs(l2).max() < 1e-10:
            continue
        return (l1 / l1[np.argmax(np.abs(l1))], l2 / l2[np.argmax(np.abs(l2))])
    return None


# ---------------------------------------------------------------------------
# factor refinement and acceptance
# ---------------------------------------------------------------------------


def _refine_factor(remaining: HomTernaryForm, factor: HomTernaryForm, rounds: int = 4) -> tuple:
    """Alternating least squares on (factor, quotient); returns (factor, residual)."""
    fac = factor
    res = np.inf
    for _ in range(rounds):
        quot, res = least_squares_divide(remaining, fac)
        m = forms._conv_matrix(quot, fac.degree)
        sol, *_ = np.linalg.lstsq(m, remaining.to_float().coeffs, rcond=None)
        fac = HomTernaryForm(fac.degree, sol).normalized()
    quot, res = least_squares_divide(remaining, fac)
    return fac, res


def _certify_factor(exact_h: Optional[HomTernaryForm], factor: HomTernaryForm,
                    tol: Tolerances) -> Optional[bool]:
    """Exact-division check of a rationalized factor against an exact dividend.

    Returns True/False when the factor rationalizes (denominators <= 1e6)
    and an exact dividend is available, None otherwise.
    """
    if exact_h is None or not exact_h.exact:
        return None
    rat = []
    for c in factor.to_float().normalized().coeffs:
        r = rationalize(c)
        if r is None:
            return None
        rat.append(r)
    arr = np.empty(len(rat), dtype=object)
    arr[:] = rat
    exact_factor = HomTernaryForm(factor.degree, arr)
    if exact_factor.is_zero:
        return None
    quot = exact_divide(exact_h, exact_factor)
    return quot is not None


# ---------------------------------------------------------------------------
# the decomposition search
# ---------------------------------------------------------------------------


def detect_components(
    h: HomTernaryForm,
    singular_pts: Sequence[ProjPoint],
    seed,
    tol: Tolerances = DEFAULT_TOL,
    exact_h: Optional[HomTernaryForm] = None,
    check_reduced: bool = True,
) -> Union[Decomposition, NotConicLine]:
    """Decompose h into lines and irreducible conics, or report NotConicLine.

    singular_pts seed the line search (components of a reduced curve meet the
    rest of the curve in singular points). exact_h, when supplied, enables
    exact certification of factors whose coefficients rationalize.
    """
    if check_reduced and gcd_degenerate(h, seed, tol):
        raise NonReducedInput("input form has a repeated factor")
    return _decompose(h, singular_pts, seed, tol, exact_h)


def gcd_degenerate(h: HomTernaryForm, seed, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True when h shares a factor with its x-partial (checked generically)."""
    hf = h.to_float().normalized()
    if hf.degree < 2:
        return False
    t = forms.random_transform(_seed_list(seed) + [41])
    ht = forms.apply_transform(t, hf).normalized()
    hx = forms.partials(ht)[0]
    if hx.is_zero:
        return True
    eliminant = forms.resultant_eliminate(ht, hx, "z", zero_rel_tol=1e-9)
    return eliminant.is_zero


def _decompose(h, singular_pts, seed, tol, exact_h=None):
    hf = h.to_float().normalized()
    d = hf.degree
    remaining = hf
    lines: list = []
    conics: list = []
    round_no = 0
    while remaining.degree >= 3:
        found = False
        samples = sample_curve_points(remaining, 20, _seed_list(seed) + [round_no], tol)
        alive = [p for p in singular_pts
                 if abs(remaining(*p.coords)) <= 1e-4 * remaining.norm()]
        cands = _line_candidates(alive, samples)
        cands = _prefilter_lines(cands, samples, keep_first=len(alive) * max(0, len(alive) - 1) // 2)
        scored = []
        for c in cands:
            _, res = least_squares_divide(remaining, HomTernaryForm(1, c))
            scored.append((res, c))
        scored.sort(key=lambda item: item[0])
        for res, c in scored:
            if res > 100 * tol.tau_div:
                break
            fac, res2 = _refine_factor(remaining, HomTernaryForm(1, c))
            if res2 <= tol.tau_div:
                remaining, mult = _deflate(remaining, fac, tol)
                if mult:
                    lines.append((fac.coeffs, mult))
                    found = True
                    if remaining.degree < 3:
                        break
        if remaining.degree < 3:
            break
        if not found:
            cdec = _conic_candidates(remaining, samples, _seed_list(seed) + [round_no, 7], tol)
            for coeffs6 in cdec:
                fac, res2 = _refine_factor(remaining, HomTernaryForm(2, coeffs6))
                if res2 > tol.tau_div:
                    continue
                pair = split_conic(fac.coeffs, tol)
                if pair is not None:
                    ok = True
                    rem2 = remaining
                    got = []
                    for lc in pair:
                        lfac, lres = _refine_factor(rem2, HomTernaryForm(1, lc))
                        if lres > tol.tau_div:
                            ok = False
                            break
                        rem2, mult = _deflate(rem2, lfac, tol)
                        got.append((lfac.coeffs, mult))
                    if ok and got:
                        lines.extend(got)
                        remaining = rem2
                        found = True
                        break
                else:
                    remaining, mult = _deflate(remaining, fac, tol)
                    if mult:
                        conics.append((fac.coeffs, mult))
                        found = True
                        break
        if not found:
            return NotConicLine(remaining.degree,
                                tuple(_mk_line(c, m, exact_h, tol) for c, m in lines),
                                tuple(_mk_conic(c, m, exact_h, tol) for c, m in conics))
        round_no += 1
    # endgame: remaining degree 0, 1 or 2
    if remaining.degree == 1:
        lines.append((remaining.normalized().coeffs, 1))
    elif remaining.degree == 2:
        pair = split_conic(remaining.normalized().coeffs, tol)
        if pair is not None:
            rem2 = remaining
            for lc in pair:
                lfac, lres = _refine_factor(rem2, HomTernaryForm(1, lc))
                if lres <= tol.tau_div:
                    rem2, mult = _deflate(rem2, lfac, tol)
                    lines.append((lfac.coeffs, mult))
            if rem2.degree != 0:
                return NotConicLine(rem2.degree, tuple(), tuple())
        else:
            conics.append((remaining.normalized().coeffs, 1))
    line_factors = tuple(_mk_line(c, m, exact_h, tol) for c, m in lines)
    conic_factors = tuple(_mk_conic(c, m, exact_h, tol) for c, m in conics)
    q = sum(c.multiplicity for c in conic_factors)
    concurrent = None
    if not conic_factors and len(line_factors) >= 2 and sum(l.multiplicity for l in line_factors) == d:
        concurrent = concurrency(line_factors, tol)
    dec = Decomposition(d, line_factors, conic_factors, q, True, concurrent, False)
    inters = component_intersections(dec, tol, seed)
    gp = all(len(c.components) == 2 and c.transverse for c in inters)
    return Decomposition(d, line_factors, conic_factors, q, True, concurrent, gp, tuple(inters))


def _mk_line(coeffs, mult, exact_h, tol):
    cert = _certify_factor(exact_h, HomTernaryForm(1, np.array(coeffs, dtype=np.complex128)), tol)
    return LineFactor(np.array(coeffs, dtype=np.complex128), mult, cert)


def _mk_conic(coeffs6, mult, exact_h, tol):
    form2 = HomTernaryForm(2, np.array(coeffs6, dtype=np.complex128))
    cert = _certify_factor(exact_h, form2, tol)
    return ConicFactor(conic_sym(coeffs6), mult, True, cert)


def _deflate(remaining, factor, tol):
    """Divide out the factor as many times as the residual stays below tau_div."""
    mult = 0
    while remaining.degree >= factor.degree:
        quot, res = least_squares_divide(remaining, factor)
        if res > tol.tau_div:
            break
        remaining = quot.normalized()
        mult += 1
        if remaining.degree == 0:
            break
    return remaining, mult


def _line_candidates(sing, samples):
    """Candidate lines from point pairs: singular pairs first, then mixed, then samples."""
    seen = {}
    order = []

    def push(p, q, cls):
        line = line_through(p, q)
        if line is None:
            return
        key = tuple(np.round(line, 5).view(float))
        if key not in seen:
            seen[key] = (line, cls)
            order.append(key)

    for i in range(len(sing)):
        for j in range(i + 1, len(sing)):
            push(sing[i], sing[j], 0)
    for p in sing:
        for s in samples:
            push(p, s, 1)
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            push(samples[i], samples[j], 2)
    return [seen[k] for k in order]


def _prefilter_lines(cands, samples, keep_first=0):
    """Keep candidates vanishing on enough samples (true components collect
    about one sample per random sampling line); singular-pair candidates
    are kept unconditionally."""
    if not cands:
        return []
    if not samples:
        return [c for c, _ in cands]
    mat = np.stack([p.coords for p in samples])  # (ns, 3)
    lines = np.stack([c for c, _ in cands])  # (nc, 3)
    vals = np.abs(lines @ mat.T)  # (nc, ns)
    counts = (vals <= 1e-6).sum(axis=1)
    out = []
    for i, (c, cls) in enumerate(cands):
        if cls == 0 or counts[i] >= 3:
            out.append(c)
    return out


def _conic_candidates(remaining, samples, seed, tol, budget: int = 400):
    if len(samples) < 5 or remaining.degree < 2:
        return []
    rng = np.random.default_rng(seed)
    mat = np.stack([p.coords for p in samples])
    lifted = np.stack([
        mat[:, 0] ** 2, mat[:, 0] * mat[:, 1], mat[:, 0] * mat[:, 2],
        mat[:, 1] ** 2, mat[:, 1] * mat[:, 2], mat[:, 2] ** 2,
    ], axis=1)  # (ns, 6)
    seen = {}
    order = []
    for _ in range(budget):
        subset = rng.choice(len(samples), size=5, replace=False)
        coeffs6 = conic_through([samples[i] for i in subset])
        if coeffs6 is None:
            continue
        counts = int((np.abs(lifted @ coeffs6) <= 1e-6).sum())
        if counts < 5:
            continue
        key = tuple(np.round(coeffs6, 5).view(float))
        if key not in seen:
            seen[key] = coeffs6
            order.append(key)
    scored = []
    for k in order:
        c6 = seen[k]
        _, res = least_squares_divide(remaining, HomTernaryForm(2, c6))
        scored.append((res, c6))
    scored.sort(key=lambda item: item[0])
    return [c for r, c in scored if r <= 100 * tol.tau_div]


# ---------------------------------------------------------------------------
# concurrency and general position
# ---------------------------------------------------------------------------


def concurrency(lines: Sequence[LineFactor], tol: Tolerances = DEFAULT_TOL) -> Optional[ProjPoint]:
    """Common point of all lines when their coefficient matrix has rank <= 2."""
    if len(lines) < 2:
        raise ValueError("concurrency needs at least 2 lines")
    m = np.stack([l.coeffs for l in lines])
    _, s, vh = np.linalg.svd(m)
    rank = int((s > tol.tau_rank * s[0]).sum())
    if rank <= 2:
        return ProjPoint.normalize(vh[2].conj())
    return None


def _line_span(line_coeffs: np.ndarray) -> tuple:
    """Two points spanning the projective line with the given coefficients."""
    _, _, vh = np.linalg.svd(line_coeffs[None, :])
    return ProjPoint.normalize(vh[1].conj()), ProjPoint.normalize(vh[2].conj())


def component_intersections(dec: Decomposition, tol: Tolerances = DEFAULT_TOL,
                            seed=0) -> List[IntersectionCluster]:
    """All pairwise intersection points of the decomposition's components,
    merged into clusters carrying branch membership and local multiplicities."""
    comps = dec.components()
    records = []  # (point, i, j, mult)
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            for pt, mult in _pair_intersections(comps[i], comps[j], tol, seed):
                records.append((pt, i, j, mult))
    if not records:
        return []
    reps = cluster_points([r[0] for r in records], tol.rho_c)
    out = []
    for rep, members in reps:
        idx = {id(m) for m in members}
        comps_here = set()
        delta = 0
        transverse = True
        for pt, i, j, mult in records:
            if id(pt) in idx:
                comps_here.update((i, j))
                delta += mult
                if mult != 1:
                    transverse = False
        out.append(IntersectionCluster(rep, tuple(sorted(comps_here)), delta, transverse))
    return out


def _pair_intersections(a, b, tol, seed):
    fa, fb = a.form(), b.form()
    if isinstance(a, LineFactor) and isinstance(b, LineFactor):
        pt = np.cross(a.coeffs, b.coeffs)
        return [(ProjPoint.normalize(pt), 1)]
    if isinstance(a, LineFactor) or isinstance(b, LineFactor):
        line, conic = (a, fb) if isinstance(a, LineFactor) else (b, fa)
        p0, q0 = _line_span(line.coeffs)
        restricted = restrict_to_line(conic, p0, q0)
        if restricted.is_zero:
            return []  # the line lies on the conic: never happens for irreducible conics
        clusters = solve_binary(restricted, tol)
        return [
            (ProjPoint.normalize(c.representative[0] * p0.coords + c.representative[1] * q0.coords),
             c.multiplicity)
            for c in clusters
        ]
    try:
        pts = common_roots(fa, fb, tol, seed=_seed_list(seed) + [29])
    except DegenerateSystem:
        return []
    return pts
