"""Homogeneous ternary and binary forms over the complex numbers.

Coefficients live in one of two scalar modes:

* floating: numpy complex128 (the default numerical pipeline),
* exact: Gaussian rationals ``QC`` (Fraction real + Fraction imaginary),
  used by the built-in families and to certify divisibility.

Forms are immutable value objects; all operations are pure. Exact-mode
arithmetic never silently demotes to floating point: mixing a ``QC``
with a float raises ``TypeError``, conversions go through ``to_float``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

import numpy as np


class FormError(Exception):
    """Base class for errors raised by the forms layer."""


class ParseError(FormError):
    pass


class NotHomogeneous(FormError):
    pass


class DegreeMismatch(FormError):
    pass


class CoincidentPoints(FormError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Numeric knobs shared across the pipeline.

    tau        relative residual for "this value is zero"
    tau_div    relative residual for "this factor divides"
    rho_c      clustering radius for projective points
    rho_root   clustering radius for solver output (multiple roots of a
               double-precision polynomial scatter like eps**(1/m), so this
               sits well above rho_c)
    rho_loc    radius of the local ball used for singularity counting
    eps_milnor gradient perturbation scale for Milnor-number counts
    tau_rank   relative cutoff for numerical rank decisions
    tau_lift   relative-residual acceptance when lifting slice roots
    """

    tau: float = 1e-8
    tau_div: float = 1e-7
    rho_c: float = 1e-6
    rho_root: float = 1e-3
    rho_loc: float = 1e-2
    eps_milnor: float = 1e-6
    tau_rank: float = 1e-6
    tau_lift: float = 1e-4
    max_root_iter: int = 500


DEFAULT_TOL = Tolerances()


# ---------------------------------------------------------------------------
# exact scalars
# ---------------------------------------------------------------------------


class QC:
    """Exact complex scalar with Fraction real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("QC is immutable")

    @staticmethod
    def _coerce(other) -> Optional["QC"]:
        if isinstance(other, QC):
            return other
        if isinstance(other, (int, Fraction)):
            return QC(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QC(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QC(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QC(o.re - self.re, o.im - self.im)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QC(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero QC")
        return QC((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        out = QC(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __neg__(self):
        return QC(-self.re, -self.im)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def conjugate(self) -> "QC":
        return QC(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"QC({self.re!s}, {self.im!s})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


QC_ZERO = QC(0)
QC_ONE = QC(1)

Scalar = Union[complex, QC]


def rationalize(value: complex, max_den: int = 10**6, tol: float = 1e-9) -> Optional[QC]:
    """Round a complex float to a Gaussian rational via continued fractions.

    Returns None when no rational with denominator <= max_den reproduces
    the value to within tol (absolute).
    """
    re = Fraction(float(np.real(value))).limit_denominator(max_den)
    im = Fraction(float(np.imag(value))).limit_denominator(max_den)
    if abs(float(re) - np.real(value)) > tol or abs(float(im) - np.imag(value)) > tol:
        return None
    return QC(re, im)


# ---------------------------------------------------------------------------
# monomial bookkeeping (dense, graded-lex within a fixed degree)
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def monomials(degree: int) -> tuple:
    """Exponent triples (a, b, c) with a+b+c = degree, lex-descending."""
    out = []
    for a in range(degree, -1, -1):
        for b in range(degree - a, -1, -1):
            out.append((a, b, degree - a - b))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def mono_index_map(degree: int) -> dict:
    return {m: i for i, m in enumerate(monomials(degree))}


def n_coeffs(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def _zeros(n: int, exact: bool) -> np.ndarray:
    if exact:
        arr = np.empty(n, dtype=object)
        arr[:] = [QC_ZERO] * n
        return arr
    return np.zeros(n, dtype=np.complex128)


def _is_exact_array(arr: np.ndarray) -> bool:
    return arr.dtype == object


# ---------------------------------------------------------------------------
# ternary forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HomTernaryForm:
    """Dense homogeneous form in (x, y, z) of fixed degree."""

    degree: int
    coeffs: np.ndarray  # length (d+1)(d+2)/2, complex128 or object(QC)

    def __post_init__(self):
        if len(self.coeffs) != n_coeffs(self.degree):
            raise ValueError("coefficient vector length does not match degree")
        self.coeffs.setflags(write=False)

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def from_terms(degree: int, terms: dict, exact: bool = False) -> "HomTernaryForm":
        arr = _zeros(n_coeffs(degree), exact)
        idx = mono_index_map(degree)
        for mono, c in terms.items():
            if sum(mono) != degree:
                raise NotHomogeneous(f"term {mono} has degree {sum(mono)}, expected {degree}")
            arr[idx[mono]] = arr[idx[mono]] + (c if exact else complex(c))
        return HomTernaryForm(degree, arr)

    @staticmethod
    def zero(degree: int, exact: bool = False) -> "HomTernaryForm":
        return HomTernaryForm(degree, _zeros(n_coeffs(degree), exact))

    # -- basic predicates ----------------------------------------------------

    @property
    def exact(self) -> bool:
        return _is_exact_array(self.coeffs)

    @property
    def is_zero(self) -> bool:
        if self.exact:
            return all(not c for c in self.coeffs)
        return not np.any(self.coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_float().coeffs))

    def to_float(self) -> "HomTernaryForm":
        if not self.exact:
            return self
        arr = np.array([complex(c) for c in self.coeffs], dtype=np.complex128)
        return HomTernaryForm(self.degree, arr)

    def coeff(self, a: int, b: int, c: int) -> Scalar:
        return self.coeffs[mono_index_map(self.degree)[(a, b, c)]]

    def terms(self) -> Iterator[tuple]:
        for mono, c in zip(monomials(self.degree), self.coeffs):
            if (c if self.exact else c != 0):
                yield mono, c

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "HomTernaryForm") -> "HomTernaryForm":
        if self.degree != other.degree:
            raise DegreeMismatch("cannot add forms of different degrees")
        return HomTernaryForm(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "HomTernaryForm") -> "HomTernaryForm":
        if self.degree != other.degree:
            raise DegreeMismatch("cannot subtract forms of different degrees")
        return HomTernaryForm(self.degree, self.coeffs - other.coeffs)

    def scale(self, s: Scalar) -> "HomTernaryForm":
        return HomTernaryForm(self.degree, self.coeffs * s)

    def __neg__(self) -> "HomTernaryForm":
        return self.scale(QC(-1) if self.exact else -1.0)

    def __call__(self, x, y, z):
        """Evaluate at a coordinate triple; exact in, exact out."""
        exact = self.exact
        acc = QC_ZERO if exact else 0j
        xp = _pows(x, self.degree, exact)
        yp = _pows(y, self.degree, exact)
        zp = _pows(z, self.degree, exact)
        for (a, b, c), coefficient in zip(monomials(self.degree), self.coeffs):
            if exact:
                if coefficient:
                    acc = acc + coefficient * xp[a] * yp[b] * zp[c]
            elif coefficient != 0:
                acc = acc + coefficient * xp[a] * yp[b] * zp[c]
        return acc

    def normalized(self) -> "HomTernaryForm":
        """Scale so the largest-modulus coefficient becomes exactly 1."""
        if self.is_zero:
            return self
        if self.exact:
            best = max(range(len(self.coeffs)), key=lambda i: self.coeffs[i].abs2())
            return self.scale(QC_ONE / self.coeffs[best])
        best = int(np.argmax(np.abs(self.coeffs)))
        return self.scale(1.0 / self.coeffs[best])


def _pows(v, n: int, exact: bool) -> list:
    one = QC_ONE if exact else 1.0 + 0j
    out = [one]
    for _ in range(n):
        out.append(out[-1] * v)
    return out


def multiply(f: HomTernaryForm, g: HomTernaryForm) -> HomTernaryForm:
    """Product of two forms; stays exact when both inputs are exact."""
    exact = f.exact and g.exact
    if f.exact != g.exact:
        f, g = f.to_float(), g.to_float()
    d = f.degree + g.degree
    out = _zeros(n_coeffs(d), exact)
    idx = mono_index_map(d)
    for (a1, b1, c1), cf in f.terms():
        for (a2, b2, c2), cg in g.terms():
            k = idx[(a1 + a2, b1 + b2, c1 + c2)]
            out[k] = out[k] + cf * cg
    return HomTernaryForm(d, out)


def partials(f: HomTernaryForm) -> tuple:
    """(df/dx, df/dy, df/dz); the Euler identity x fx + y fy + z fz = d f holds."""
    if f.degree < 1:
        raise DegreeMismatch("partials need degree >= 1")
    d = f.degree
    exact = f.exact
    outs = [_zeros(n_coeffs(d - 1), exact) for _ in range(3)]
    idx = mono_index_map(d - 1)
    for (a, b, c), coefficient in f.terms():
        if a:
            outs[0][idx[(a - 1, b, c)]] = outs[0][idx[(a - 1, b, c)]] + coefficient * a
        if b:
            outs[1][idx[(a, b - 1, c)]] = outs[1][idx[(a, b - 1, c)]] + coefficient * b
        if c:
            outs[2][idx[(a, b, c - 1)]] = outs[2][idx[(a, b, c - 1)]] + coefficient * c
    return tuple(HomTernaryForm(d - 1, arr) for arr in outs)


# ---------------------------------------------------------------------------
# binary forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BinaryForm:
    """Dense homogeneous form in (s, t); coeffs[k] multiplies s^k t^(d-k)."""

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("coefficient vector length does not match degree")
        self.coeffs.setflags(write=False)

    @property
    def exact(self) -> bool:
        return _is_exact_array(self.coeffs)

    @property
    def is_zero(self) -> bool:
        if self.exact:
            return all(not c for c in self.coeffs)
        return not np.any(self.coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_float().coeffs))

    def to_float(self) -> "BinaryForm":
        if not self.exact:
            return self
        return BinaryForm(self.degree, np.array([complex(c) for c in self.coeffs], dtype=np.complex128))

    def __call__(self, s, t):
        exact = self.exact
        acc = QC_ZERO if exact else 0j
        sp = _pows(s, self.degree, exact)
        tp = _pows(t, self.degree, exact)
        for k, c in enumerate(self.coeffs):
            if (c if exact else c != 0):
                acc = acc + c * sp[k] * tp[self.degree - k]
        return acc

    @staticmethod
    def zero(degree: int, exact: bool = False) -> "BinaryForm":
        return BinaryForm(degree, _zeros(degree + 1, exact))


def multiply_binary(f: BinaryForm, g: BinaryForm) -> BinaryForm:
    exact = f.exact and g.exact
    if f.exact != g.exact:
        f, g = f.to_float(), g.to_float()
    out = _zeros(f.degree + g.degree + 1, exact)
    for i, cf in enumerate(f.coeffs):
        for j, cg in enumerate(g.coeffs):
            out[i + j] = out[i + j] + cf * cg
    return BinaryForm(f.degree + g.degree, out)


# ---------------------------------------------------------------------------
# projective points and transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """Point of CP^2, stored with its largest-modulus coordinate scaled to 1."""

    coords: np.ndarray  # complex128, shape (3,)

    def __post_init__(self):
        self.coords.setflags(write=False)

    @staticmethod
    def normalize(vec: Sequence[complex]) -> "ProjPoint":
        v = np.asarray(vec, dtype=np.complex128)
        n = np.abs(v)
        if not n.max() > 0:
            raise ValueError("cannot normalize the zero vector")
        return ProjPoint(v / v[int(np.argmax(n))])

    def chordal(self, other: "ProjPoint") -> float:
        return chordal_p2(self.coords, other.coords)

    def __repr__(self):
        c = self.coords
        return "[" + " : ".join(f"{v.real:.6g}{v.imag:+.6g}i" for v in c) + "]"


def chordal_p2(u: np.ndarray, v: np.ndarray) -> float:
    """Chordal (Fubini-Study sine) distance between two CP^2 representatives."""
    cross = np.cross(u, v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("zero vector has no projective class")
    return float(np.linalg.norm(cross) / (nu * nv))


def chordal_p1(a: np.ndarray, b: np.ndarray) -> float:
    """Chordal distance between two CP^1 representatives (s, t) pairs."""
    det = a[0] * b[1] - a[1] * b[0]
    return float(abs(det) / (np.linalg.norm(a) * np.linalg.norm(b)))


def normalize_pair(pair: Sequence[complex]) -> np.ndarray:
    v = np.asarray(pair, dtype=np.complex128)
    n = np.abs(v)
    if not n.max() > 0:
        raise ValueError("cannot normalize the zero pair")
    return v / v[int(np.argmax(n))]


@dataclass(frozen=True, eq=False)
class ProjTransform:
    """Invertible coordinate change of CP^2."""

    matrix: np.ndarray  # 3x3 complex128

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @staticmethod
    def identity() -> "ProjTransform":
        return ProjTransform(np.eye(3, dtype=np.complex128))

    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def inverse(self) -> "ProjTransform":
        return ProjTransform(np.linalg.inv(self.matrix))

    def compose(self, other: "ProjTransform") -> "ProjTransform":
        """self after other, as maps on points."""
        return ProjTransform(self.matrix @ other.matrix)

    def map_point(self, p: ProjPoint) -> ProjPoint:
        return ProjPoint.normalize(self.matrix @ p.coords)


def random_transform(seed) -> ProjTransform:
    """Seeded generic coordinate change; deterministic for a fixed seed.

    seed may be an int or a sequence of ints (stream spawning).
    """
    rng = np.random.default_rng(seed)
    while True:
        m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        if abs(np.linalg.det(m)) > 0.3:
            return ProjTransform(m)


def apply_transform(t: ProjTransform, f: HomTernaryForm) -> HomTernaryForm:
    """Substitute coordinates: (apply_transform(t, f))(p) == f(t.matrix @ p).

    Composition law: apply(t1, apply(t2, f)) == apply(t2.compose(t1), f).
    """
    f = f.to_float()
    d = f.degree
    if d == 0:
        return f
    rows = t.matrix
    lin = [
        HomTernaryForm(1, np.array(rows[i], dtype=np.complex128))
        for i in range(3)
    ]
    pow_cache = [[_form_one()], [_form_one()], [_form_one()]]
    for i in range(3):
        for _ in range(d):
            pow_cache[i].append(multiply(pow_cache[i][-1], lin[i]))
    out = HomTernaryForm.zero(d)
    for (a, b, c), coefficient in f.terms():
        term = multiply(multiply(pow_cache[0][a], pow_cache[1][b]), pow_cache[2][c])
        out = out + term.scale(coefficient)
    return out


def _form_one() -> HomTernaryForm:
    return HomTernaryForm(0, np.array([1.0 + 0j], dtype=np.complex128))


# ---------------------------------------------------------------------------
# restriction to a line
# ---------------------------------------------------------------------------


def restrict_to_line(f: HomTernaryForm, p, q) -> BinaryForm:
    """Binary form (s, t) -> f(s*p + t*q).

    p, q may be ProjPoint or coordinate triples (exact triples keep the
    result exact). Identically zero output means the line lies on {f = 0}.
    """
    pc = p.coords if isinstance(p, ProjPoint) else p
    qc = q.coords if isinstance(q, ProjPoint) else q
    exact = f.exact and not isinstance(pc, np.ndarray) and not isinstance(qc, np.ndarray)
    if exact:
        pcs = [c if isinstance(c, QC) else QC(c) for c in pc]
        qcs = [c if isinstance(c, QC) else QC(c) for c in qc]
        cross = [
            pcs[1] * qcs[2] - pcs[2] * qcs[1],
            pcs[2] * qcs[0] - pcs[0] * qcs[2],
            pcs[0] * qcs[1] - pcs[1] * qcs[0],
        ]
        if not any(cross):
            raise CoincidentPoints("restriction needs two distinct points")
    else:
        f = f.to_float()
        pcs = np.asarray([complex(c) for c in pc], dtype=np.complex128)
        qcs = np.asarray([complex(c) for c in qc], dtype=np.complex128)
        if chordal_p2(pcs, qcs) < 1e-12:
            raise CoincidentPoints("restriction needs two distinct points")
    d = f.degree
    # coordinate i restricted to the line is the degree-1 binary form pcs[i]*s + qcs[i]*t
    lins = [
        BinaryForm(1, np.array([qcs[i], pcs[i]], dtype=object if exact else np.complex128))
        for i in range(3)
    ]
    one = BinaryForm(0, np.array([QC_ONE] if exact else [1.0 + 0j], dtype=object if exact else np.complex128))
    pow_cache = [[one], [one], [one]]
    for i in range(3):
        for _ in range(d):
            pow_cache[i].append(multiply_binary(pow_cache[i][-1], lins[i]))
    out = BinaryForm.zero(d, exact)
    acc = out.coeffs.copy()
    for (a, b, c), coefficient in f.terms():
        term = multiply_binary(multiply_binary(pow_cache[0][a], pow_cache[1][b]), pow_cache[2][c])
        acc = acc + term.coeffs * coefficient
    return BinaryForm(d, acc)


# ---------------------------------------------------------------------------
# least-squares division and exact division
# ---------------------------------------------------------------------------


def _conv_matrix(g: HomTernaryForm, quot_degree: int) -> np.ndarray:
    """Matrix of 'multiply by g' from degree quot_degree to degree g.degree+quot_degree."""
    g = g.to_float()
    dq = quot_degree
    dt = g.degree + dq
    rows = n_coeffs(dt)
    cols = n_coeffs(dq)
    m = np.zeros((rows, cols), dtype=np.complex128)
    idx_t = mono_index_map(dt)
    for j, (a2, b2, c2) in enumerate(monomials(dq)):
        for (a1, b1, c1), cg in g.terms():
            m[idx_t[(a1 + a2, b1 + b2, c1 + c2)], j] += cg
    return m


def least_squares_divide(f: HomTernaryForm, g: HomTernaryForm) -> tuple:
    """Best-fit quotient of f by g in the coefficient 2-norm.

    Returns (quotient, residual) where residual = min_Q ||f - g*Q|| / ||f||.
    A residual below tau_div certifies divisibility at working precision.
    """
    if g.is_zero:
        raise ValueError("division by the zero form")
    if g.degree > f.degree:
        raise DegreeMismatch("divisor degree exceeds dividend degree")
    ff, gf = f.to_float(), g.to_float()
    m = _conv_matrix(gf, f.degree - g.degree)
    rhs = ff.coeffs
    sol, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    resid = float(np.linalg.norm(rhs - m @ sol))
    nf = float(np.linalg.norm(rhs))
    quotient = HomTernaryForm(f.degree - g.degree, sol)
    return quotient, (resid / nf if nf > 0 else 0.0)


def exact_divide(f: HomTernaryForm, g: HomTernaryForm) -> Optional[HomTernaryForm]:
    """Exact quotient over the Gaussian rationals, or None when g does not divide f."""
    if not (f.exact and g.exact):
        raise ValueError("exact_divide needs exact-mode forms")
    if g.is_zero:
        raise ValueError("division by the zero form")
    if g.degree > f.degree:
        raise DegreeMismatch("divisor degree exceeds dividend degree")
    dq = f.degree - g.degree
    cols = n_coeffs(dq)
    rows = n_coeffs(f.degree)
    idx_t = mono_index_map(f.degree)
    aug = [[QC_ZERO] * cols + [f.coeffs[r]] for r in range(rows)]
    for j, (a2, b2, c2) in enumerate(monomials(dq)):
        for (a1, b1, c1), cg in g.terms():
            r = idx_t[(a1 + a2, b1 + b2, c1 + c2)]
            aug[r][j] = aug[r][j] + cg
    # Gaussian elimination over QC
    pivot_row = 0
    pivots = []
    for col in range(cols):
        sel = None
        for r in range(pivot_row, rows):
            if aug[r][col]:
                sel = r
                break
        if sel is None:
            continue
        aug[pivot_row], aug[sel] = aug[sel], aug[pivot_row]
        pv = aug[pivot_row][col]
        aug[pivot_row] = [v / pv for v in aug[pivot_row]]
        for r in range(rows):
            if r != pivot_row and aug[r][col]:
                fac = aug[r][col]
                aug[r] = [v - fac * w for v, w in zip(aug[r], aug[pivot_row])]
        pivots.append(col)
        pivot_row += 1
        if pivot_row == rows:
            break
    for r in range(pivot_row, rows):
        if aug[r][cols]:
            return None  # inconsistent: g does not divide f
    sol = [QC_ZERO] * cols
    for i, col in enumerate(pivots):
        sol[col] = aug[i][cols]
    arr = np.empty(cols, dtype=object)
    arr[:] = sol
    return HomTernaryForm(dq, arr)


# ---------------------------------------------------------------------------
# resultants (Sylvester elimination by interpolation at roots of unity)
# ---------------------------------------------------------------------------

_VAR_PERM = {"x": (1, 2, 0), "y": (0, 2, 1), "z": (0, 1, 2)}


def _permute_vars(f: HomTernaryForm, perm) -> HomTernaryForm:
    if perm == (0, 1, 2):
        return f
    d = f.degree
    arr = _zeros(n_coeffs(d), f.exact)
    idx = mono_index_map(d)
    for mono, c in f.terms():
        new = tuple(mono[perm[k]] for k in range(3))
        arr[idx[new]] = c
    return HomTernaryForm(d, arr)


def _z_coeff_forms(f: HomTernaryForm) -> list:
    """Binary forms F_j(x, y) with f = sum_j F_j(x, y) z^j."""
    f = f.to_float()
    d = f.degree
    out = [np.zeros(d - j + 1, dtype=np.complex128) for j in range(d + 1)]
    for (a, b, c), coefficient in f.terms():
        out[c][a] = coefficient  # degree of F_c is d - c; index by x-exponent
    return [BinaryForm(d - j, arr) for j, arr in enumerate(out)]


def _z_degree(f: HomTernaryForm, rel_tol: float = 1e-13) -> int:
    slices = _z_coeff_forms(f)
    scale = f.norm()
    for j in range(len(slices) - 1, -1, -1):
        if np.abs(slices[j].coeffs).max(initial=0.0) > rel_tol * scale:
            return j
    return -1


def resultant_eliminate(f: HomTernaryForm, g: HomTernaryForm, var: str = "z",
                        zero_rel_tol: float = 1e-12) -> BinaryForm:
    """Sylvester resultant of f and g as univariates in ``var``.

    The output is a binary form in the two remaining variables; it vanishes
    at [a:b] exactly when f and g share a root on the corresponding line.
    An identically zero output (``.is_zero``) flags a common component or a
    degenerate coordinate direction; callers retry under a generic transform.
    """
    if var not in _VAR_PERM:
        raise ValueError("var must be one of x, y, z")
    if f.is_zero or g.is_zero:
        raise ValueError("resultant of a zero form")
    perm = _VAR_PERM[var]
    fp = _permute_vars(f, perm).to_float().normalized()
    gp = _permute_vars(g, perm).to_float().normalized()
    p, q = _z_degree(fp), _z_degree(gp)
    if p <= 0 and q <= 0:
        # both free of the eliminated variable: no elimination content
        return BinaryForm(0, np.array([1.0 + 0j]))
    fslices = _z_coeff_forms(fp)
    gslices = _z_coeff_forms(gp)
    deg_out = q * fp.degree + p * gp.degree - p * q
    n = deg_out + 1
    omega = np.exp(2j * np.pi * np.arange(n) / n)
    # evaluate every z-coefficient form at the samples (1, omega^k)
    fvals = np.array([[s(1.0, w) for w in omega] for s in fslices[: p + 1]])
    gvals = np.array([[s(1.0, w) for w in omega] for s in gslices[: q + 1]])
    size = p + q
    mats = np.zeros((n, size, size), dtype=np.complex128)
    for r in range(q):
        for j in range(p + 1):
            mats[:, r, r + j] = fvals[p - j, :]
    for r in range(p):
        for j in range(q + 1):
            mats[:, q + r, r + j] = gvals[q - j, :]
    dets = np.linalg.det(mats) if size else np.ones(n, dtype=np.complex128)
    # zero test, stage 1: healthy determinants relative to the Hadamard bound
    row_scale = np.sqrt((np.abs(mats) ** 2).sum(axis=2)).prod(axis=1) if size else np.ones(n)
    rel = np.abs(dets) / np.maximum(row_scale, 1e-300)
    if rel.max(initial=0.0) <= max(zero_rel_tol, 1e-6) and size:
        # stage 2: graded Sylvester matrices produce legitimately tiny but
        # accurately computed determinants; an identically zero resultant
        # instead yields pure rounding noise that is not reproducible under
        # a small relative perturbation of the entries
        rng = np.random.default_rng(987654321)
        noise = 1.0 + 3e-13 * (rng.standard_normal(mats.shape) + 1j * rng.standard_normal(mats.shape))
        dets2 = np.linalg.det(mats * noise)
        change = np.abs(dets2 - dets) / np.maximum(np.abs(dets), 1e-300)
        if np.median(change) > 1e-3:
            return BinaryForm.zero(deg_out)
    # dets[k] = R(1, omega^k) = sum_m c_{x^{D-m} y^m} omega^{k m}: inverse DFT
    pm = np.fft.fft(dets) / n
    coeffs = np.empty(n, dtype=np.complex128)
    for m in range(n):
        coeffs[deg_out - m] = pm[m]  # coeffs indexed by x-exponent
    return BinaryForm(deg_out, coeffs)


# ---------------------------------------------------------------------------
# comparisons
# ---------------------------------------------------------------------------


def univariate_slice(f: HomTernaryForm, x0: complex, y0: complex) -> np.ndarray:
    """Coefficients (ascending in z) of the univariate z -> f(x0, y0, z)."""
    out = np.zeros(f.degree + 1, dtype=np.complex128)
    for j, s in enumerate(_z_coeff_forms(f)):
        out[j] = s(x0, y0)
    return out


def rel_distance_up_to_scale(a: HomTernaryForm, b: HomTernaryForm) -> float:
    """min_s ||a - s b|| / ||a|| over complex scalars s."""
    av = a.to_float().coeffs
    bv = b.to_float().coeffs
    if len(av) != len(bv):
        raise DegreeMismatch("cannot compare forms of different degrees")
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0:
        return 0.0 if nb == 0 else 1.0
    if nb == 0:
        return 1.0
    s = np.vdot(bv, av) / np.vdot(bv, bv)
    return float(np.linalg.norm(av - s * bv) / na)


def forms_equal_exact(a: HomTernaryForm, b: HomTernaryForm) -> bool:
    """Exact projective equality of two exact-mode forms."""
    if not (a.exact and b.exact):
        raise ValueError("exact comparison needs exact-mode forms")
    if a.degree != b.degree:
        return False
    an, bn = a.normalized(), b.normalized()
    return all(ca == cb for ca, cb in zip(an.coeffs, bn.coeffs))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN_CHARS = set("xyz+-*/^()i")


def _tokenize(text: str) -> list:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("num", int(text[i:j])))
            i = j
            continue
        if ch in _TOKEN_CHARS:
            tokens.append((ch, ch))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r} at position {i}")
    return tokens


class _Parser:
    """Recursive-descent parser for polynomial expressions in x, y, z.

    Grammar (whitespace ignored): a sum of terms, each term a product of
    factors written with '*' or by juxtaposition; factors are rational or
    imaginary-unit coefficients, variables, or parenthesized subexpressions,
    optionally raised to a non-negative integer power.
    """

    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        if self.peek() != kind:
            raise ParseError(f"expected {kind!r} at token {self.pos}")
        return self.take()

    # polynomials are dicts {(a, b, c): QC}, possibly mixing degrees mid-parse
    def parse(self) -> dict:
        poly = self.parse_sum()
        if self.pos != len(self.tokens):
            raise ParseError(f"trailing input at token {self.pos}")
        return poly

    def parse_sum(self) -> dict:
        sign = 1
        if self.peek() in ("+", "-"):
            sign = -1 if self.take()[0] == "-" else 1
        poly = _poly_scale(self.parse_term(), QC(sign))
        while self.peek() in ("+", "-"):
            op = self.take()[0]
            nxt = self.parse_term()
            poly = _poly_add(poly, _poly_scale(nxt, QC(-1 if op == "-" else 1)))
        return poly

    def parse_term(self) -> dict:
        poly = self.parse_factor()
        while True:
            nxt = self.peek()
            if nxt == "*":
                self.take()
                poly = _poly_mul(poly, self.parse_factor())
            elif nxt in ("x", "y", "z", "(", "num", "i"):
                poly = _poly_mul(poly, self.parse_factor())
            else:
                return poly

    def parse_factor(self) -> dict:
        base = self.parse_base()
        if self.peek() == "^":
            self.take()
            kind, value = self.take() if self.peek() == "num" else (None, None)
            if kind != "num":
                raise ParseError("exponent must be a non-negative integer")
            out = {(0, 0, 0): QC_ONE}
            for _ in range(value):
                out = _poly_mul(out, base)
            return out
        return base

    def parse_base(self) -> dict:
        kind = self.peek()
        if kind == "(":
            self.take()
            poly = self.parse_sum()
            self.expect(")")
            return poly
        if kind in ("x", "y", "z"):
            self.take()
            mono = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}[kind]
            return {mono: QC_ONE}
        if kind == "i":
            self.take()
            return {(0, 0, 0): QC(0, 1)}
        if kind == "num":
            value = self.take()[1]
            num = Fraction(value)
            if self.peek() == "/":
                self.take()
                dkind, dval = self.take() if self.peek() == "num" else (None, None)
                if dkind != "num" or dval == 0:
                    raise ParseError("denominator must be a positive integer")
                num = Fraction(value, dval)
            if self.peek() == "i":
                self.take()
                return {(0, 0, 0): QC(0, num)}
            return {(0, 0, 0): QC(num)}
        raise ParseError(f"unexpected token at position {self.pos}")


def _poly_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, QC_ZERO) + v
    return {k: v for k, v in out.items() if v}


def _poly_scale(a: dict, s: QC) -> dict:
    if not s:
        return {}
    return {k: v * s for k, v in a.items()}


def _poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for (a1, b1, c1), va in a.items():
        for (a2, b2, c2), vb in b.items():
            k = (a1 + a2, b1 + b2, c1 + c2)
            out[k] = out.get(k, QC_ZERO) + va * vb
    return {k: v for k, v in out.items() if v}


def parse_form(text: str, degree_hint: Optional[int] = None) -> HomTernaryForm:
    """Parse an expression into an exact-mode homogeneous form.

    Rejects inhomogeneous input. A zero result takes its degree from
    degree_hint (default 0).
    """
    poly = _Parser(_tokenize(text)).parse()
    if not poly:
        d = degree_hint if degree_hint is not None else 0
        return HomTernaryForm.zero(d, exact=True)
    degrees = {sum(m) for m in poly}
    if len(degrees) > 1:
        raise NotHomogeneous(f"mixed total degrees {sorted(degrees)} in {text!r}")
    d = degrees.pop()
    return HomTernaryForm.from_terms(d, poly, exact=True)


def format_form(f: HomTernaryForm) -> str:
    """Render a form as parseable text (exact coefficients stay exact)."""
    parts = []
    for (a, b, c), coefficient in f.terms():
        mono = "*".join(
            filter(None, [
                _mono_str("x", a), _mono_str("y", b), _mono_str("z", c),
            ])
        )
        if isinstance(coefficient, QC):
            cs = _qc_str(coefficient)
        else:
            cs = _complex_str(complex(coefficient))
        if mono:
            parts.append(f"({cs})*{mono}" if _needs_parens(cs) else (f"{cs}*{mono}" if cs != "1" else mono))
        else:
            parts.append(f"({cs})" if _needs_parens(cs) else cs)
    return " + ".join(parts) if parts else "0"


def _mono_str(v: str, e: int) -> str:
    if e == 0:
        return ""
    return v if e == 1 else f"{v}^{e}"


def _qc_str(c: QC) -> str:
    if c.im == 0:
        return str(c.re)
    if c.re == 0:
        return f"{c.im}i" if c.im != 1 else "i"
    sign = "+" if c.im >= 0 else "-"
    return f"{c.re}{sign}{abs(c.im)}i"


def _complex_str(c: complex) -> str:
    if c.imag == 0:
        return f"{c.real:.17g}"
    raise ValueError("only exact or real coefficients can be formatted as text")


def _needs_parens(cs: str) -> bool:
    return ("+" in cs[1:]) or ("-" in cs[1:]) or cs.endswith("i")
