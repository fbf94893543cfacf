"""Simultaneous complex root finding for binary forms, with clustering.

The kernel is an Ehrlich-Aberth iteration: all roots are refined at once,
with Newton-polygon initial radii and a backward-error stopping rule, so
multiple roots stop cleanly once their residual reaches the double-precision
floor. Roots of a binary form live on CP^1; the form is rotated to a generic
affine chart first so points at infinity need no special casing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .forms import (
    BinaryForm,
    DEFAULT_TOL,
    HomTernaryForm,
    ProjPoint,
    ProjTransform,
    Tolerances,
    apply_transform,
    chordal_p1,
    chordal_p2,
    normalize_pair,
    partials,
    random_transform,
    resultant_eliminate,
    univariate_slice,
)


class ZeroForm(Exception):
    pass


class NonConvergence(Exception):
    pass


class DegenerateSystem(Exception):
    """Elimination kept degenerating: shared component or bad coordinates."""


@dataclass(frozen=True)
class RootCluster:
    """A root of a binary form in CP^1 with its multiplicity.

    representative  normalized (s, t) pair
    multiplicity    number of iterated roots that collapsed here
    radius          max chordal distance of a member from the representative
    max_residual    max |B(member)| / ||B|| over members and representative
    """

    representative: np.ndarray
    multiplicity: int
    radius: float
    max_residual: float


# deterministic sequence of chart rotations (angle pairs) for retries
_CHART_ANGLES = [(0.7, 0.4), (1.3, 2.1), (2.45, 0.95), (0.17, 1.71)]


def _chart_matrix(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s * np.exp(1j * phi)], [-s * np.exp(-1j * phi), c]])


def _poly_roots_aberth(a: np.ndarray, max_iter: int) -> np.ndarray:
    """All roots of sum_k a[k] w^k (a[-1] != 0) by Ehrlich-Aberth iteration."""
    n = len(a) - 1
    if n == 0:
        return np.empty(0, dtype=np.complex128)
    a = a / np.abs(a).max()
    da = a[1:] * np.arange(1, n + 1)
    w = _initial_points(a)
    mags = np.abs(a)
    converged = np.zeros(n, dtype=bool)
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        pw = _horner(a, w)
        dpw = _horner(da, w)
        # backward-error floor: |p(w)| below rounding noise of its own evaluation
        floor = eps * 4 * (n + 1) * _horner_abs(mags, np.abs(w))
        newly = np.abs(pw) <= floor
        converged |= newly
        if converged.all():
            break
        active = ~converged
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = np.where(np.abs(dpw) > 0, pw / dpw, pw * 0 + 0.1)
        diff = w[:, None] - w[None, :]
        np.fill_diagonal(diff, np.inf)
        small = np.abs(diff) < 1e-280
        if small.any():
            diff = diff + small * 1e-280
        ssum = (1.0 / diff).sum(axis=1)
        denom = 1.0 - newton * ssum
        bad = np.abs(denom) < 1e-12
        denom = np.where(bad, 1.0, denom)
        step = newton / denom
        w = np.where(active, w - step, w)
    else:
        if not converged.all():
            raise NonConvergence(f"{(~converged).sum()} roots unconverged after {max_iter} iterations")
    return w


def _horner(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    acc = np.full_like(w, a[-1])
    for c in a[-2::-1]:
        acc = acc * w + c
    return acc


def _horner_abs(mags: np.ndarray, x: np.ndarray) -> np.ndarray:
    acc = np.full_like(x, mags[-1])
    for c in mags[-2::-1]:
        acc = acc * x + c
    return acc


def _initial_points(a: np.ndarray) -> np.ndarray:
    """Starting points on circles whose radii come from the Newton polygon."""
    n = len(a) - 1
    mags = np.abs(a)
    ks = np.flatnonzero(mags > 0)
    logs = np.log(mags[ks])
    # upper convex hull of (k, log|a_k|)
    hull = []
    for k, v in zip(ks, logs):
        while len(hull) >= 2:
            (k1, v1), (k2, v2) = hull[-2], hull[-1]
            if (v2 - v1) * (k - k1) <= (v - v1) * (k2 - k1):
                hull.pop()
            else:
                break
        hull.append((int(k), float(v)))
    pts = []
    offset = 0.397  # breaks symmetric configurations
    for (k1, v1), (k2, v2) in zip(hull, hull[1:]):
        r = np.exp((v1 - v2) / (k2 - k1))
        m = k2 - k1
        ang = 2 * np.pi * (np.arange(m) + offset) / m + 0.31 * k1
        pts.append(r * np.exp(1j * ang))
        offset += 0.211
    out = np.concatenate(pts) if pts else np.empty(0, dtype=np.complex128)
    if len(out) < n:  # low-order zero coefficients: roots at the origin
        out = np.concatenate([out, 1e-3 * np.exp(2j * np.pi * np.arange(n - len(out)) / max(1, n - len(out)))])
    return out[:n].astype(np.complex128)


def solve_binary(b: BinaryForm, tol: Tolerances = DEFAULT_TOL) -> List[RootCluster]:
    """All deg(b) roots of a nonzero binary form, clustered into multiplicities.

    The form is solved in a rotated chart (so [1:0] is an ordinary root),
    then single-linkage clustered at tol.rho_root in the chordal metric.
    Raises ZeroForm on the zero form and NonConvergence when the iteration
    cap is hit in every retry chart.
    """
    bf = b.to_float()
    if bf.is_zero:
        raise ZeroForm("cannot solve the zero form")
    n = bf.degree
    if n == 0:
        return []
    coeffs = bf.coeffs / np.abs(bf.coeffs).max()
    last_err: Exception | None = None
    for theta, phi in _CHART_ANGLES:
        u = _chart_matrix(theta, phi)
        rotated = _rotate_binary(coeffs, u)
        if np.abs(rotated[-1]) < 1e-10 * np.abs(rotated).max():
            continue  # a root sits at this chart's infinity: try the next chart
        try:
            w = _poly_roots_aberth(rotated, tol.max_root_iter)
        except NonConvergence as exc:
            last_err = exc
            continue
        pairs = np.stack([u[0, 0] * w + u[0, 1], u[1, 0] * w + u[1, 1]], axis=1)
        return _cluster_pairs(pairs, bf, tol)
    raise last_err or NonConvergence("no usable chart for solve_binary")


def _rotate_binary(coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Coefficients of B(u00 w + u01, u10 w + u11) as a univariate in w."""
    n = len(coeffs) - 1
    out = np.zeros(n + 1, dtype=np.complex128)
    # binomial expansion of (u00 w + u01)^k (u10 w + u11)^(n-k)
    s_pows = [np.array([1.0 + 0j])]
    t_pows = [np.array([1.0 + 0j])]
    for _ in range(n):
        s_pows.append(np.convolve(s_pows[-1], np.array([u[0, 1], u[0, 0]])))
        t_pows.append(np.convolve(t_pows[-1], np.array([u[1, 1], u[1, 0]])))
    for k, c in enumerate(coeffs):
        if c != 0:
            prod = np.convolve(s_pows[k], t_pows[n - k])
            out[: len(prod)] += c * prod
    return out


def _cluster_pairs(pairs: np.ndarray, bf: BinaryForm, tol: Tolerances) -> List[RootCluster]:
    n = len(pairs)
    norms = np.linalg.norm(pairs, axis=1)
    dist = np.abs(pairs[:, 0, None] * pairs[None, :, 1] - pairs[:, 1, None] * pairs[None, :, 0])
    dist /= norms[:, None] * norms[None, :]
    groups = _single_linkage(dist, tol.rho_root)
    scale = bf.norm()
    clusters = []
    for members in groups:
        sub = pairs[members]
        rep = _aligned_mean(sub)
        radius = max(chordal_p1(rep, sub[i]) for i in range(len(sub)))
        normed = [normalize_pair(p) for p in sub]
        resid = max(abs(bf(rep[0], rep[1])), max(abs(bf(p[0], p[1])) for p in normed)) / scale
        clusters.append(RootCluster(rep, len(members), radius, resid))
    clusters.sort(key=lambda c: _p1_sort_key(c.representative))
    return clusters


def _single_linkage(dist: np.ndarray, radius: float) -> List[List[int]]:
    n = dist.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] <= radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _aligned_mean(vecs: np.ndarray) -> np.ndarray:
    """Mean of projective representatives, phase-aligned to a common chart."""
    anchor = int(np.argmax(np.abs(vecs[0])))
    usable = np.abs(vecs[:, anchor]) > 0
    aligned = vecs[usable] / vecs[usable, anchor][:, None]
    return normalize_pair(aligned.mean(axis=0))


def _p1_sort_key(pair: np.ndarray):
    s, t = pair
    d = abs(s) ** 2 + abs(t) ** 2
    w = s * np.conj(t) / d
    return (round(w.real, 9), round(w.imag, 9), round(abs(s) ** 2 / d, 9))


def solve_univariate(coeffs: Sequence[complex], tol: Tolerances = DEFAULT_TOL) -> List[RootCluster]:
    """Roots of sum_k coeffs[k] z^k as clusters on CP^1 ([1:0] = infinity)."""
    arr = np.asarray(coeffs, dtype=np.complex128)
    return solve_binary(BinaryForm(len(arr) - 1, arr), tol)


# ---------------------------------------------------------------------------
# point clustering in CP^2
# ---------------------------------------------------------------------------


def cluster_points(pts: Sequence[ProjPoint], radius: float) -> List[tuple]:
    """Single-linkage clusters of projective points under the chordal metric.

    Returns (representative, members) pairs; the representative is the
    phase-aligned component-wise mean, renormalized.
    """
    if radius <= 0:
        raise ValueError("cluster radius must be positive")
    if not pts:
        return []
    arr = np.stack([p.coords for p in pts])
    n = len(pts)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = chordal_p2(arr[i], arr[j])
    groups = _single_linkage(dist, radius)
    out = []
    for members in groups:
        sub = arr[members]
        anchor = int(np.argmax(np.abs(sub[0])))
        aligned = sub / sub[:, anchor][:, None]
        rep = ProjPoint.normalize(aligned.mean(axis=0))
        out.append((rep, [pts[i] for i in members]))
    out.sort(key=lambda item: _p2_sort_key(item[0]))
    return out


def _p2_sort_key(p: ProjPoint):
    c = p.coords / np.linalg.norm(p.coords)
    return tuple(np.round([c[0].real, c[0].imag, c[1].real, c[1].imag, c[2].real, c[2].imag], 9))


# ---------------------------------------------------------------------------
# common roots of a pair of ternary forms (eliminate, solve, lift, refine)
# ---------------------------------------------------------------------------


def common_roots(
    f: HomTernaryForm,
    g: HomTernaryForm,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
    transform: ProjTransform | str = "random",
    refine_simple: bool = True,
    max_attempts: int = 3,
) -> List[tuple]:
    """Isolated common zeros of two coprime ternary forms, with multiplicity.

    Eliminates z in generic coordinates, solves the binary eliminant, then
    lifts every shadow by matching the z-roots of the two slices. Returns
    (ProjPoint, multiplicity) pairs summing to deg(f)*deg(g) in the clean
    transverse case. Pass transform="identity" when the inputs are already
    in generic position (skips the coordinate change).

    Raises DegenerateSystem when the eliminant stays identically zero over
    all retries (shared component or a positive-dimensional solution set).
    """
    ff, gf = f.to_float().normalized(), g.to_float().normalized()
    for attempt in range(max_attempts):
        if transform == "identity":
            t = ProjTransform.identity()
        elif isinstance(transform, ProjTransform):
            t = transform
        else:
            t = random_transform([seed, 17, attempt])
        ft = apply_transform(t, ff).normalized()
        gt = apply_transform(t, gf).normalized()
        eliminant = resultant_eliminate(ft, gt, "z")
        if eliminant.is_zero:
            if transform != "random":
                raise DegenerateSystem("zero eliminant in fixed coordinates")
            continue
        try:
            shadows = solve_binary(eliminant, tol)
        except NonConvergence:
            continue
        lifted = _lift_all(ft, gt, shadows, tol)
        if lifted is None:
            if transform != "random":
                raise DegenerateSystem("lift failed in fixed coordinates")
            continue
        out = []
        for q, mult in lifted:
            p = ProjPoint.normalize(t.matrix @ q)
            if refine_simple and mult == 1:
                p = _refine_pair_root(ff, gf, p)
            out.append((p, mult))
        out.sort(key=lambda item: _p2_sort_key(item[0]))
        return out
    raise DegenerateSystem("eliminant identically zero after retries")


def _lift_all(ft, gt, shadows, tol):
    """Lift shadow roots to full points; None on failure.

    For each shadow the z-roots of both slices seed a one-dimensional
    Gauss-Newton polish on |f_slice|^2 + |g_slice|^2; a candidate is a
    common z exactly when its polished relative residual is small. This is
    far more robust than distance matching when the shadow itself carries
    error (scattered multiple roots of the eliminant).
    """
    out = []
    for cluster in shadows:
        x0, y0 = cluster.representative
        accept = max(tol.tau_lift, 30.0 * cluster.radius)
        fs = univariate_slice(ft, x0, y0)
        gs = univariate_slice(gt, x0, y0)
        nf, ng = np.linalg.norm(fs), np.linalg.norm(gs)
        if nf == 0 or ng == 0:
            return None
        zf = _affine_slice_roots(fs, tol)
        zg = _affine_slice_roots(gs, tol)
        if zf is None or zg is None:
            return None
        candidates = []
        for z0 in zf + zg:
            z, res = _gn_common_1d(fs / nf, gs / ng, z0)
            if res <= accept:
                candidates.append(z)
        dedupe_radius = max(tol.tau_lift, 4.0 * cluster.radius)
        matches = []
        for z in candidates:
            if all(abs(z - w) / (1 + abs(z)) > dedupe_radius for w in matches):
                matches.append(z)
        if not matches:
            return None
        m = cluster.multiplicity
        share, extra = divmod(m, len(matches))
        for i, z in enumerate(matches):
            mult = share + (1 if i < extra else 0) if len(matches) > 1 else m
            if mult > 0:
                out.append((np.array([x0, y0, z], dtype=np.complex128), mult))
    return out


def _affine_slice_roots(coeffs, tol):
    """Affine z-roots of a slice polynomial (post-transform: none at infinity)."""
    if np.abs(coeffs).max(initial=0.0) == 0:
        return None
    try:
        clusters = solve_binary(BinaryForm(len(coeffs) - 1, coeffs), tol)
    except (ZeroForm, NonConvergence):
        return None
    roots = []
    for c in clusters:
        z, w = c.representative
        if abs(w) < 1e-8:
            continue  # root at infinity: cannot be a common affine lift
        roots.append(z / w)
    return roots


def _gn_common_1d(fs, gs, z0, iters: int = 15):
    """Minimize |fs(z)|^2 + |gs(z)|^2 from z0; returns (z, relative residual)."""
    dfs = fs[1:] * np.arange(1, len(fs))
    dgs = gs[1:] * np.arange(1, len(gs))

    def ev(c, z):
        acc = 0j
        for ck in c[::-1]:
            acc = acc * z + ck
        return acc

    def res(z):
        scale_f = max(1.0, abs(z)) ** (len(fs) - 1)
        scale_g = max(1.0, abs(z)) ** (len(gs) - 1)
        return abs(ev(fs, z)) / scale_f + abs(ev(gs, z)) / scale_g

    z = z0
    best, best_res = z, res(z)
    for _ in range(iters):
        f, g = ev(fs, z), ev(gs, z)
        df, dg = ev(dfs, z), ev(dgs, z)
        denom = abs(df) ** 2 + abs(dg) ** 2
        if denom < 1e-300:
            break
        step = -(np.conj(df) * f + np.conj(dg) * g) / denom
        z = z + step
        r = res(z)
        if r < best_res:
            best, best_res = z, r
        if r < 1e-15:
            break
        if abs(step) < 1e-16 * (1 + abs(z)):
            break
    return best, best_res


def _refine_pair_root(f, g, p: ProjPoint, iters: int = 12) -> ProjPoint:
    """Newton polish of a simple common zero of (f, g) in the largest-coordinate chart."""
    fx = partials(f)
    gx = partials(g)
    coords = np.array(p.coords, dtype=np.complex128)
    k = int(np.argmax(np.abs(coords)))
    free = [i for i in range(3) if i != k]
    best = coords
    best_res = _pair_res(f, g, coords)
    cur = coords.copy()
    for _ in range(iters):
        e = np.array([f(*cur), g(*cur)])
        jac = np.array([[fx[i](*cur) for i in free], [gx[i](*cur) for i in free]])
        try:
            step = np.linalg.solve(jac, -e)
        except np.linalg.LinAlgError:
            break
        cur = cur.copy()
        cur[free[0]] += step[0]
        cur[free[1]] += step[1]
        res = _pair_res(f, g, cur)
        if res < best_res:
            best, best_res = cur, res
        if res < 1e-16:
            break
    return ProjPoint.normalize(best)


def _pair_res(f, g, coords):
    c = coords / np.abs(coords).max()
    return abs(f(*c)) + abs(g(*c))
