"""Local singularity invariants and Euler-characteristic bookkeeping.

Milnor numbers are computed as local degrees of the gradient: perturb two
chart partials by a small random covector and count solutions inside the
local ball. Fiber Euler characteristics come two independent ways (component
count minus branch excess for conic-line fibers, generic value plus total
Milnor number for any reduced fiber) and must agree; the global ledger
checks that all singular fibers of a pencil have been found.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from math import comb
from typing import List, Optional, Sequence

import numpy as np

from .classify import Decomposition
from .forms import DEFAULT_TOL, HomTernaryForm, ProjPoint, Tolerances, partials
from .roots import DegenerateSystem, common_roots


class SharedComponent(Exception):
    pass


class NonIsolated(Exception):
    pass


@dataclass(frozen=True)
class LocalSingularity:
    """An isolated singular point of a reduced member.

    mu     Milnor number (local degree of the gradient)
    r      number of local branches (component count for conic-line fibers)
    delta  sum of pairwise local intersection multiplicities of the branches,
           when known; mu = 2*delta - r + 1 for curve singularities
    """

    point: ProjPoint
    mu: int
    r: Optional[int] = None
    delta: Optional[int] = None


@dataclass(frozen=True)
class Ledger:
    """Euler-characteristic balance sheet of a degree-d pencil fibration.

    Blowing up the d^2 base points gives a surface of Euler characteristic
    3 + d^2; a smooth fiber contributes 3d - d^2 and every singular fiber
    adds its total Milnor number on top, so balance == 0 exactly when
    sum of all Milnor numbers over the singular fibers equals 3(d-1)^2.
    """

    d: int
    e_surface: int
    e_generic: int
    genus: int
    fibers: tuple  # (param, euler, mu_total) triples
    balance: int


def local_intersection(f1: HomTernaryForm, f2: HomTernaryForm, p: ProjPoint,
                       tol: Tolerances = DEFAULT_TOL, seed=0) -> int:
    """Local intersection multiplicity of {f1=0} and {f2=0} at p.

    Counts common-root clusters within rho_loc of p, with multiplicity.
    Raises SharedComponent when the pair has no isolated intersection.
    """
    try:
        pts = common_roots(f1, f2, tol, seed=_seeds(seed) + [3])
    except DegenerateSystem as exc:
        raise SharedComponent(str(exc)) from exc
    return sum(m for q, m in pts if q.chordal(p) <= tol.rho_loc)


def milnor_number(h: HomTernaryForm, p: ProjPoint, seed=0,
                  tol: Tolerances = DEFAULT_TOL) -> int:
    """Milnor number of the isolated singular point p of the reduced curve {h=0}.

    Implements the degree definition: in the chart where p's largest
    coordinate is 1, solutions of grad(h) = eps * (a, b) near p are counted
    for a seeded random unit covector and eps = eps_milnor * ||h||. The
    chart is recentered on p and zoomed by rho_loc before solving, so the
    clustered perturbed solutions stay well conditioned. Counts for two
    seeds must agree; solutions smearing across the counting boundary
    trigger retries with eps / 1000, then NonIsolated.
    """
    hf = h.to_float().normalized()
    hp = partials(hf)
    k = int(np.argmax(np.abs(p.coords)))
    free = [i for i in range(3) if i != k]
    u0, v0 = p.coords[free[0]] / p.coords[k], p.coords[free[1]] / p.coords[k]
    charts = [_chart_coeffs(hp[free[0]], k, free), _chart_coeffs(hp[free[1]], k, free)]
    local = [_shift_zoom(c, u0, v0, tol.rho_loc) for c in charts]
    scale = hf.norm()
    # perturbed solutions are simple and well separated after the zoom
    ltol = dataclasses.replace(tol, rho_root=1e-7)
    eps = tol.eps_milnor * scale
    for attempt in range(3):
        counts = []
        ambiguous = False
        for s in range(2):
            rng = np.random.default_rng(_seeds(seed) + [23, s, attempt])
            a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            a /= np.linalg.norm(a)
            sys1 = _homogenize(local[0] - _const_like(local[0], eps * a[0]))
            sys2 = _homogenize(local[1] - _const_like(local[1], eps * a[1]))
            try:
                sols = common_roots(sys1, sys2, ltol, seed=_seeds(seed) + [31, s, attempt])
            except DegenerateSystem:
                ambiguous = True
                break
            dists = _affine_dists(sols)
            if any(1.0 / 3.0 <= dd <= 3.0 for dd, _ in dists):
                ambiguous = True
                break
            counts.append(sum(m for dd, m in dists if dd < 1.0))
        if not ambiguous and len(counts) == 2 and counts[0] == counts[1] and counts[0] > 0:
            return counts[0]
        eps /= 1000.0
    raise NonIsolated(f"gradient degree at {p} did not stabilize")


def _chart_coeffs(form: HomTernaryForm, k: int, free) -> np.ndarray:
    """Dehomogenize: 2D array c[i, j] of the chart polynomial sum c u^i v^j."""
    d = form.degree
    out = np.zeros((d + 1, d + 1), dtype=np.complex128)
    for mono, coeff in form.to_float().terms():
        out[mono[free[0]], mono[free[1]]] += coeff
    return out


def _shift_zoom(c: np.ndarray, u0: complex, v0: complex, sigma: float) -> np.ndarray:
    """Coefficients of p(u0 + sigma*U, v0 + sigma*V) from those of p(u, v)."""
    n = c.shape[0]
    binom = np.zeros((n, n))
    for i in range(n):
        binom[i, 0] = 1.0
        for j in range(1, i + 1):
            binom[i, j] = binom[i - 1, j - 1] + (binom[i - 1, j] if j <= i - 1 else 0.0)
    out = np.zeros_like(c)
    # shift along u then v, then zoom both
    tmp = np.zeros_like(c)
    for i in range(n):
        for ii in range(i, n):
            tmp[i] += c[ii] * binom[ii, i] * u0 ** (ii - i)
    for j in range(n):
        for jj in range(j, n):
            out[:, j] += tmp[:, jj] * binom[jj, j] * v0 ** (jj - j)
    powers = sigma ** np.add.outer(np.arange(n), np.arange(n))
    return out * powers


def _const_like(c: np.ndarray, value: complex) -> np.ndarray:
    out = np.zeros_like(c)
    out[0, 0] = value
    return out


def _homogenize(c: np.ndarray) -> HomTernaryForm:
    """Bivariate coefficients to a ternary form via the third coordinate."""
    nz = np.argwhere(np.abs(c) > 0)
    d = int(max((i + j for i, j in nz), default=0))
    terms = {(int(i), int(j), d - int(i) - int(j)): c[i, j] for i, j in nz}
    return HomTernaryForm.from_terms(d, terms)


def _affine_dists(sols) -> list:
    out = []
    for q, m in sols:
        x, y, w = q.coords
        if abs(w) < 1e-9:
            out.append((np.inf, m))
        else:
            out.append((float(np.hypot(abs(x / w), abs(y / w))), m))
    return out


def _seeds(seed) -> list:
    if isinstance(seed, (list, tuple)):
        return list(seed)
    return [int(seed)]


# ---------------------------------------------------------------------------
# Euler characteristics
# ---------------------------------------------------------------------------


def euler_conic_line(dec: Decomposition, sing: Sequence[LocalSingularity]) -> int:
    """Euler characteristic of the fiber over a reduced conic-line member:
    twice the component count minus the branch excess sum(r_p - 1)."""
    ncomp = len(dec.lines) + len(dec.conics)
    excess = sum((s.r or 1) - 1 for s in sing)
    return 2 * ncomp - excess


def euler_fiber(d: int, mu_list: Sequence[int]) -> int:
    """Euler characteristic of a reduced fiber: generic value plus Milnor sum."""
    return (3 * d - d * d) + sum(mu_list)


def node_count_general_position(d: int, q: int) -> int:
    """Node count of a general-position conic-line member: C(d,2) - q."""
    if not 0 <= q <= d // 2:
        raise ValueError("q must lie in [0, floor(d/2)]")
    return comb(d, 2) - q


def global_ledger(fibers: Sequence, d: int) -> Ledger:
    """Balance the fibration's Euler characteristic over the singular fibers.

    fibers need .param, .euler and .singular_points (with .mu); balance 0
    certifies that every singular fiber was found with correct invariants.
    """
    e_surface = 3 + d * d
    e_generic = 3 * d - d * d
    genus = (d - 1) * (d - 2) // 2
    entries = []
    total_mu = 0
    for fib in fibers:
        mu_total = sum(s.mu for s in fib.singular_points)
        total_mu += mu_total
        entries.append((tuple(fib.param), fib.euler, mu_total))
    balance = 3 * (d - 1) ** 2 - total_mu
    return Ledger(d, e_surface, e_generic, genus, tuple(entries), balance)
