"""Pencil assembly: base locus, critical points, singular members.

A pencil is the family lambda*f + mu*g of degree-d curves through two
coprime generators. Its singular members are located through the critical
scheme of the two-form map: the 2x2 minors of the Jacobian of (f, g) cut
out all points where some member is singular, and the member parameter at
such a point is [g(p) : -f(p)]. All elimination runs in seeded generic
coordinates; every numeric candidate is Newton-polished before use.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import classify, euler
from .forms import (
    DEFAULT_TOL,
    HomTernaryForm,
    ProjPoint,
    ProjTransform,
    QC,
    Tolerances,
    apply_transform,
    multiply,
    normalize_pair,
    partials,
    random_transform,
    rationalize,
    resultant_eliminate,
)
from .roots import (
    DegenerateSystem,
    common_roots,
    cluster_points,
    _p1_sort_key,
    _p2_sort_key,
)


class CommonComponent(Exception):
    pass


class ZeroParam(Exception):
    pass


class LiftFailure(Exception):
    pass


class DegenerateEliminant(Exception):
    pass


class NotTransverse(Exception):
    pass


@dataclass
class Pencil:
    f: HomTernaryForm
    g: HomTernaryForm
    d: int
    seed: int
    tol: Tolerances
    transform: ProjTransform
    f_float: HomTernaryForm = field(repr=False, default=None)
    g_float: HomTernaryForm = field(repr=False, default=None)
    fT: HomTernaryForm = field(repr=False, default=None)
    gT: HomTernaryForm = field(repr=False, default=None)

    _partials: tuple = field(repr=False, default=None)
    _hessians: tuple = field(repr=False, default=None)

    def partials_fg(self):
        if self._partials is None:
            self._partials = (partials(self.f_float), partials(self.g_float))
        return self._partials

    def hessians_fg(self):
        if self._hessians is None:
            fp, gp = self.partials_fg()
            self._hessians = (
                tuple(partials(fp[i]) for i in range(3)),
                tuple(partials(gp[i]) for i in range(3)),
            )
        return self._hessians


@dataclass(frozen=True)
class BaseLocus:
    points: tuple  # (ProjPoint, multiplicity) pairs
    count: int  # number of distinct points
    transverse: bool

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.points)


@dataclass(frozen=True)
class CriticalPoint:
    point: ProjPoint
    param: np.ndarray  # normalized (lambda, mu)
    cluster_id: int


@dataclass
class SingularFiber:
    param: np.ndarray  # normalized (lambda, mu)
    form: HomTernaryForm
    singular_points: List[euler.LocalSingularity]
    euler: Optional[int]
    special: bool
    decomposition: Optional[classify.Decomposition]
    not_conic_line: Optional[classify.NotConicLine]
    reduced: bool
    diagnostics: List[str] = field(default_factory=list)

    @property
    def mu_total(self) -> int:
        return sum(s.mu for s in self.singular_points)

    @property
    def q(self) -> int:
        if self.decomposition is None:
            return 0
        return self.decomposition.q

    @property
    def concurrent(self) -> bool:
        return self.decomposition is not None and self.decomposition.concurrent_point is not None


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def make_pencil(f: HomTernaryForm, g: HomTernaryForm, seed: int = 0,
                tol: Tolerances = DEFAULT_TOL) -> Pencil:
    """Validate and assemble a pencil from two coprime equal-degree forms."""
    if f.is_zero or g.is_zero:
        raise ValueError("pencil generators must be nonzero")
    if f.degree != g.degree:
        raise forms_degree_error(f, g)
    if f.degree < 2:
        raise ValueError("pencil degree must be at least 2")
    ff = f.to_float().normalized()
    gf = g.to_float().normalized()
    for attempt in range(3):
        t = random_transform([seed, 0, attempt])
        ft = apply_transform(t, ff).normalized()
        gt = apply_transform(t, gf).normalized()
        eliminant = resultant_eliminate(ft, gt, "z")
        if not eliminant.is_zero:
            return Pencil(f, g, f.degree, seed, tol, t, ff, gf, ft, gt)
    raise CommonComponent("generators share a component (eliminant identically zero)")


def forms_degree_error(f, g):
    from .forms import DegreeMismatch

    return DegreeMismatch(f"generator degrees differ: {f.degree} vs {g.degree}")


def member(p: Pencil, param: Sequence) -> HomTernaryForm:
    """The member lambda*f + mu*g, coefficient-normalized.

    Exact parameters on exact generators give an exact member.
    """
    lam, mu = param
    exact = p.f.exact and p.g.exact and _is_exact_scalar(lam) and _is_exact_scalar(mu)
    if exact:
        lam = lam if isinstance(lam, QC) else QC(lam)
        mu = mu if isinstance(mu, QC) else QC(mu)
        if not lam and not mu:
            raise ZeroParam("member parameter (0, 0)")
        return (p.f.scale(lam) + p.g.scale(mu)).normalized()
    lam, mu = complex(lam), complex(mu)
    if lam == 0 and mu == 0:
        raise ZeroParam("member parameter (0, 0)")
    return (p.f_float.scale(lam) + p.g_float.scale(mu)).normalized()


def _is_exact_scalar(v) -> bool:
    from fractions import Fraction

    return isinstance(v, (int, Fraction, QC))


# ---------------------------------------------------------------------------
# base locus
# ---------------------------------------------------------------------------


def base_locus(p: Pencil) -> BaseLocus:
    """Intersection of the two generators, with multiplicities and the
    transversality verdict (d^2 simple points with rank-2 Jacobian)."""
    try:
        pts = common_roots(p.f_float, p.g_float, p.tol, seed=[p.seed, 1])
    except DegenerateSystem as exc:
        raise LiftFailure(str(exc)) from exc
    total = sum(m for _, m in pts)
    if total != p.d * p.d:
        # retry once under a fresh stream before giving up
        try:
            pts = common_roots(p.f_float, p.g_float, p.tol, seed=[p.seed, 101])
        except DegenerateSystem as exc:
            raise LiftFailure(str(exc)) from exc
        total = sum(m for _, m in pts)
        if total != p.d * p.d:
            raise LiftFailure(f"base-point multiplicities sum to {total}, expected {p.d * p.d}")
    transverse = all(m == 1 for _, m in pts) and len(pts) == p.d * p.d
    if transverse:
        fp, gp = p.partials_fg()
        for q, _ in pts:
            jac = np.array([
                [fp[i](*q.coords) for i in range(3)],
                [gp[i](*q.coords) for i in range(3)],
            ])
            s = np.linalg.svd(jac, compute_uv=False)
            if s[1] <= 1e-6 * max(s[0], 1e-300):
                transverse = False
                break
    return BaseLocus(tuple(pts), len(pts), transverse)


# ---------------------------------------------------------------------------
# critical points
# ---------------------------------------------------------------------------


def _minors(fp, gp) -> tuple:
    """The three 2x2 minors of the Jacobian [grad f; grad g]."""
    m_xy = multiply(fp[0], gp[1]) - multiply(fp[1], gp[0])
    m_xz = multiply(fp[0], gp[2]) - multiply(fp[2], gp[0])
    m_yz = multiply(fp[1], gp[2]) - multiply(fp[2], gp[1])
    return m_xy, m_xz, m_yz


def critical_points(p: Pencil, base: Optional[BaseLocus] = None) -> List[CriticalPoint]:
    """All points where the gradients of f and g are parallel, excluding the
    base locus, each with the member parameter [g(p) : -f(p)] attached."""
    if base is None:
        base = base_locus(p)
    if not base.transverse:
        raise NotTransverse("critical-point analysis needs a transverse base locus")
    tol = p.tol
    minors_orig = _minors(*p.partials_fg())
    norm_orig = [m.norm() for m in minors_orig]
    # critical points of high-multiplicity singularities scatter the eliminant
    # roots at eps**(1/mult); the lift must tolerate the matching slack (the
    # Newton polish below recovers full accuracy afterwards)
    crit_tol = dataclasses.replace(tol, tau_lift=3e-3)
    last_exc: Optional[Exception] = None
    for attempt in range(3):
        t = p.transform if attempt == 0 else random_transform([p.seed, 2, attempt])
        ft = apply_transform(t, p.f_float).normalized()
        gt = apply_transform(t, p.g_float).normalized()
        mt = _minors(partials(ft), partials(gt))
        try:
            raw = common_roots(mt[0].normalized(), mt[1].normalized(), crit_tol,
                               transform="identity", refine_simple=False)
        except DegenerateSystem as exc:
            last_exc = exc
            continue
        cands = []
        for q, mult in raw:
            pt = ProjPoint.normalize(t.matrix @ q.coords)
            # quick filter: all three minors must be small before polishing
            rel = max(abs(minors_orig[i](*pt.coords)) / norm_orig[i] for i in range(3))
            if rel > 1e-2:
                continue
            refined, param, res = _refine_critical(p, pt)
            if refined is None:
                continue
            rel2 = max(abs(minors_orig[i](*refined.coords)) / norm_orig[i] for i in range(3))
            if rel2 > tol.tau:
                continue
            if any(refined.chordal(bp) <= tol.rho_c for bp, _ in base.points):
                continue
            cands.append((refined, param))
        if not cands:
            last_exc = DegenerateEliminant("no critical points survived filtering")
            continue
        # dedupe: collapse repeats of the same critical point
        reps = cluster_points([c[0] for c in cands], tol.rho_root)
        out = []
        for cid, (rep, members_pts) in enumerate(reps):
            ids = {id(m) for m in members_pts}
            params = [normalize_pair(prm) for pt2, prm in cands if id(pt2) in ids]
            param = normalize_pair(np.mean(_align_pairs(params), axis=0))
            out.append(CriticalPoint(rep, param, cid))
        out.sort(key=lambda c: (_p1_sort_key(c.param), _p2_sort_key(c.point)))
        return out
    raise DegenerateEliminant(str(last_exc) if last_exc else "critical system stayed degenerate")


def _align_pairs(pairs):
    anchor = int(np.argmax(np.abs(pairs[0])))
    return np.stack([pr / pr[anchor] for pr in pairs])


def _refine_critical(p: Pencil, pt: ProjPoint, iters: int = 150):
    """Newton polish of (point, parameter): solve grad(lam f + mu g) = 0 with
    the parameter as a third unknown, in the largest-coordinate charts."""
    fval, gval = p.f_float(*pt.coords), p.g_float(*pt.coords)
    if abs(fval) < 1e-14 and abs(gval) < 1e-14:
        return None, None, np.inf  # base point, not a critical point
    param = normalize_pair(np.array([gval, -fval]))
    use_t = abs(param[0]) >= abs(param[1])  # h = f + t g  vs  h = s f + g
    tpar = param[1] / param[0] if use_t else param[0] / param[1]
    fp, gp = p.partials_fg()
    fh, gh = p.hessians_fg()
    coords = np.array(pt.coords, dtype=np.complex128)
    k = int(np.argmax(np.abs(coords)))
    free = [i for i in range(3) if i != k]
    grad_scale = sum(f.norm() for f in fp) + sum(g.norm() for g in gp)

    def gradient(c, t):
        if use_t:
            return np.array([fp[i](*c) + t * gp[i](*c) for i in range(3)])
        return np.array([t * fp[i](*c) + gp[i](*c) for i in range(3)])

    state = np.array([coords[free[0]], coords[free[1]], tpar], dtype=np.complex128)

    def unpack(st):
        c = np.empty(3, dtype=np.complex128)
        c[k] = coords[k]
        c[free[0]], c[free[1]] = st[0], st[1]
        return c, st[2]

    c0, t0 = unpack(state)
    best_state = state
    best_res = np.linalg.norm(gradient(c0, t0))
    cur_res = best_res
    for _ in range(iters):
        c, t = unpack(state)
        e = gradient(c, t)
        jac = np.zeros((3, 3), dtype=np.complex128)
        for i in range(3):
            for col, var in enumerate(free):
                if use_t:
                    jac[i, col] = fh[i][var](*c) + t * gh[i][var](*c)
                else:
                    jac[i, col] = t * fh[i][var](*c) + gh[i][var](*c)
            jac[i, 2] = gp[i](*c) if use_t else fp[i](*c)
        try:
            step = np.linalg.lstsq(jac, -e, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        # damped update
        for damp in range(5):
            trial = state + step * (0.5 ** damp)
            ct, tt = unpack(trial)
            res = np.linalg.norm(gradient(ct, tt))
            if res < cur_res:
                state = trial
                cur_res = res
                break
        else:
            break
        if cur_res < best_res:
            best_res = cur_res
            best_state = state
        if cur_res <= 1e-16 * grad_scale:
            break
    c, t = unpack(best_state)
    refined = ProjPoint.normalize(c)
    fv, gv = p.f_float(*refined.coords), p.g_float(*refined.coords)
    if abs(fv) < 1e-14 and abs(gv) < 1e-14:
        return None, None, np.inf
    param = normalize_pair(np.array([gv, -fv]))
    return refined, param, best_res / max(grad_scale, 1e-300)


# ---------------------------------------------------------------------------
# reducedness
# ---------------------------------------------------------------------------


def is_reduced(h: HomTernaryForm, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True when h has no repeated factor (nonzero discriminant-type eliminant)."""
    if h.is_zero:
        raise ValueError("the zero form has no reduced/non-reduced status")
    return not classify.gcd_degenerate(h, seed, tol)


# ---------------------------------------------------------------------------
# singular members
# ---------------------------------------------------------------------------


def singular_members(p: Pencil, base: Optional[BaseLocus] = None) -> List[SingularFiber]:
    """All singular fibers of the pencil: cluster critical points by member
    parameter, then decompose, measure and cross-check each fiber."""
    if base is None:
        base = base_locus(p)
    if not base.transverse:
        raise NotTransverse("singular-member analysis needs a transverse base locus")
    crits = critical_points(p, base)
    tol = p.tol
    groups = _group_by_param(crits, tol)
    fibers = []
    for param, pts in groups:
        h = member(p, param)
        exact_h = _exact_member(p, param)
        diagnostics: List[str] = []
        if not is_reduced(h, p.seed, tol):
            fibers.append(SingularFiber(param, h, [], None, False, None, None, False,
                                        ["non-reduced member: analysis skipped"]))
            continue
        cand_pts = [rep for rep, _ in cluster_points(pts, tol.rho_root)]
        dec = classify.detect_components(h, cand_pts, [p.seed, 5], tol,
                                         exact_h=exact_h, check_reduced=False)
        if isinstance(dec, classify.Decomposition):
            sing = _special_singularities(p, h, dec, diagnostics)
            e_components = euler.euler_conic_line(dec, sing)
            e_milnor = euler.euler_fiber(p.d, [s.mu for s in sing])
            if e_components != e_milnor:
                diagnostics.append(
                    f"euler mismatch: components give {e_components}, milnor sum gives {e_milnor}")
            fibers.append(SingularFiber(param, h, sing, e_components, True, dec, None,
                                        True, diagnostics))
        else:
            sing = _nonspecial_singularities(p, h, cand_pts, diagnostics)
            e = euler.euler_fiber(p.d, [s.mu for s in sing])
            fibers.append(SingularFiber(param, h, sing, e, False, None, dec, True,
                                        diagnostics))
    fibers.sort(key=lambda fb: _p1_sort_key(fb.param))
    return fibers


def _group_by_param(crits: Sequence[CriticalPoint], tol: Tolerances) -> list:
    groups: list = []  # (param, [points])
    for c in crits:
        for i, (param, pts) in enumerate(groups):
            det = abs(param[0] * c.param[1] - param[1] * c.param[0])
            det /= np.linalg.norm(param) * np.linalg.norm(c.param)
            if det <= tol.rho_c:
                pts.append(c.point)
                break
        else:
            groups.append((c.param, [c.point]))
    return groups


def _exact_member(p: Pencil, param) -> Optional[HomTernaryForm]:
    """Exact member form when the generators are exact and the parameter
    rationalizes; used to certify factor divisions."""
    if not (p.f.exact and p.g.exact):
        return None
    lam = rationalize(param[0], max_den=10**6, tol=1e-9)
    mu = rationalize(param[1], max_den=10**6, tol=1e-9)
    if lam is None or mu is None:
        return None
    exact = (p.f.scale(lam) + p.g.scale(mu))
    if exact.is_zero:
        return None
    diff = (exact.to_float().normalized().coeffs - member(p, param).coeffs)
    if np.linalg.norm(diff) > 1e-6:
        return None
    return exact.normalized()


def _special_singularities(p, h, dec, diagnostics) -> List[euler.LocalSingularity]:
    """Singular points of a conic-line member are its pairwise component
    intersections; branch counts and deltas come from the intersection data,
    Milnor numbers independently from the gradient degree."""
    tol = p.tol
    out = []
    for cluster in dec.intersections:
        r = len(cluster.components)
        delta = cluster.delta
        try:
            mu = euler.milnor_number(h, cluster.point, seed=[p.seed, 6], tol=tol)
        except euler.NonIsolated:
            mu = 2 * delta - r + 1
            diagnostics.append(
                f"milnor count did not stabilize at {cluster.point}; "
                f"using 2*delta - r + 1 = {mu}")
        if mu != 2 * delta - r + 1:
            diagnostics.append(
                f"invariant violation at {cluster.point}: mu={mu}, delta={delta}, r={r}")
        out.append(euler.LocalSingularity(cluster.point, mu, r, delta))
    return out


def _nonspecial_singularities(p, h, cand_pts, diagnostics) -> List[euler.LocalSingularity]:
    tol = p.tol
    out = []
    for pt in cand_pts:
        refined = _refine_fiber_singularity(h, pt)
        try:
            mu = euler.milnor_number(h, refined, seed=[p.seed, 7], tol=tol)
        except euler.NonIsolated:
            diagnostics.append(f"milnor count did not stabilize at {refined}; assuming node")
            mu = 1
        r = 2 if mu == 1 else _tangent_cone_branches(h, refined, tol)
        delta = (mu + r - 1) // 2 if (mu + r - 1) % 2 == 0 else None
        out.append(euler.LocalSingularity(refined, mu, r, delta))
    return out


def _refine_fiber_singularity(h: HomTernaryForm, pt: ProjPoint, iters: int = 20) -> ProjPoint:
    """Newton polish of a singular point: solve two chart partials of h."""
    hf = h.to_float()
    hp = partials(hf)
    coords = np.array(pt.coords, dtype=np.complex128)
    k = int(np.argmax(np.abs(coords)))
    free = [i for i in range(3) if i != k]
    hh = tuple(partials(hp[i]) for i in range(3))
    best = coords
    best_res = sum(abs(hp[i](*coords)) for i in range(3))
    cur = coords.copy()
    for _ in range(iters):
        e = np.array([hp[free[0]](*cur), hp[free[1]](*cur)])
        jac = np.array([
            [hh[free[0]][free[0]](*cur), hh[free[0]][free[1]](*cur)],
            [hh[free[1]][free[0]](*cur), hh[free[1]][free[1]](*cur)],
        ])
        try:
            step = np.linalg.solve(jac, -e)
        except np.linalg.LinAlgError:
            break
        cur = cur.copy()
        cur[free[0]] += step[0]
        cur[free[1]] += step[1]
        res = sum(abs(hp[i](*cur)) for i in range(3))
        if res < best_res:
            best, best_res = cur, res
        else:
            break
    return ProjPoint.normalize(best)


def _tangent_cone_branches(h: HomTernaryForm, pt: ProjPoint, tol: Tolerances) -> int:
    """Distinct tangent directions at the singular point (branch count for
    ordinary singularities; a lower bound in general)."""
    from .euler import _chart_coeffs, _shift_zoom
    from .forms import BinaryForm
    from .roots import solve_binary

    hf = h.to_float().normalized()
    coords = pt.coords
    k = int(np.argmax(np.abs(coords)))
    free = [i for i in range(3) if i != k]
    c = _chart_coeffs(hf, k, free)
    local = _shift_zoom(c, coords[free[0]] / coords[k], coords[free[1]] / coords[k], 1.0)
    n = local.shape[0]
    scale = np.abs(local).max()
    for m in range(n):
        anti = np.array([local[i, m - i] if 0 <= m - i < n else 0.0 for i in range(m + 1)])
        if np.abs(anti).max(initial=0.0) > 1e-7 * scale:
            cone = BinaryForm(m, anti.astype(np.complex128))
            return len(solve_binary(cone, tol))
    return 1
