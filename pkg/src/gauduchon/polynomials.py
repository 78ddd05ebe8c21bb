"""Exact univariate polynomial algebra in the connection parameter s.

Holds the torsion-rule coefficient functions a(s), b(s), c(s), the 4x4
linear system in the scalar contractions (A, B, C, <d|eta|^2, eta-bar>),
its determinant (computed by two independent algorithms), the factored
reference form, rational root extraction, and the exact rank analysis of
the gradient-dropped system at the exceptional parameter values.

Matrix entries are constructed from their defining a/b/c combinations.
``coefficient_identities`` re-derives every entry along the independent
assembly route (second-derivative closed forms plus first-order terms)
and fails loudly on any transcription mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Iterable, Sequence


class PolynomialError(ValueError):
    """Raised when an exact polynomial computation does not verify."""


class RationalPoly:
    """Dense univariate polynomial over Fractions, ascending degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Fraction | int] = ()):
        cs = [Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    @classmethod
    def const(cls, c) -> "RationalPoly":
        return cls((Fraction(c),))

    @property
    def degree(self) -> int:
        """Degree, with the zero polynomial assigned -1."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return self.coeffs[-1]

    def _coerce(self, other):
        if isinstance(other, RationalPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return RationalPoly.const(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        n = max(len(self.coeffs), len(o.coeffs))
        a = list(self.coeffs) + [Fraction(0)] * (n - len(self.coeffs))
        for i, c in enumerate(o.coeffs):
            a[i] += c
        return RationalPoly(a)

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly(tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if self.is_zero or o.is_zero:
            return RationalPoly()
        out = [Fraction(0)] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, ci in enumerate(self.coeffs):
            if ci == 0:
                continue
            for j, cj in enumerate(o.coeffs):
                out[i + j] += ci * cj
        return RationalPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = RationalPoly.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.coeffs == o.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __call__(self, x) -> Fraction:
        x = Fraction(x)
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def divmod(self, other: "RationalPoly"):
        o = self._coerce(other)
        if o is None or o.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        q = [Fraction(0)] * max(0, len(rem) - len(o.coeffs) + 1)
        dv = o.coeffs
        while len(rem) >= len(dv) and any(rem):
            while rem and rem[-1] == 0:
                rem.pop()
            if len(rem) < len(dv):
                break
            f = rem[-1] / dv[-1]
            k = len(rem) - len(dv)
            q[k] = f
            for i, c in enumerate(dv):
                rem[k + i] -= f * c
            rem.pop()
        return RationalPoly(q), RationalPoly(rem)

    def exact_div(self, other: "RationalPoly") -> "RationalPoly":
        q, r = self.divmod(other)
        if not r.is_zero:
            raise PolynomialError(f"inexact polynomial division, remainder {r}")
        return q

    def __repr__(self):
        if self.is_zero:
            return "0"
        parts = []
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            mag = abs(c)
            cs = "" if (mag == 1 and k > 0) else str(mag)
            if k == 0:
                term = str(mag)
            elif k == 1:
                term = f"{cs}s" if cs == "" else f"{cs}*s"
            else:
                term = f"{cs}s^{k}" if cs == "" else f"{cs}*s^{k}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, term))
        out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, term in parts[1:]:
            out += f" {sign} {term}"
        return out


S = RationalPoly((0, 1))
ZERO = RationalPoly()
ONE = RationalPoly.const(1)


def abc() -> tuple[RationalPoly, RationalPoly, RationalPoly]:
    """Coefficient functions of the torsion derivative rules.

    a = -4s(s-1)^2, b = -s(5s^2 - 10s + 4), c = 4(s-1)(2s-1);
    degrees 3, 3, 2.
    """
    a = -4 * S * (S - 1) ** 2
    b = -S * (5 * S * S - 10 * S + 4)
    c = 4 * (S - 1) * (2 * S - 1)
    return a, b, c


Coeffs = tuple[RationalPoly, RationalPoly, RationalPoly]


def _entries_defining(coeffs: Coeffs | None = None) -> dict[str, RationalPoly]:
    """The nine lower-row entries from their defining a/b/c combinations."""
    a, b, c = coeffs if coeffs is not None else abc()
    s3 = S ** 3
    s6 = S ** 6
    return {
        "x1": -(a - b + 2 * s3) * (a + b + c * S + s3),
        "x2": 2 * b * c * (1 - S) - (a - b) * s3 - b * b,
        "x3": b * (a - b + s3) + s3 * (a + s3 - 2 * c * (1 - S)),
        "y1": -(a - b + 2 * s3) * (a - 2 * c * (S - 1)),
        "y2": s3 * (2 * b - a - c * S) + c * c * S * (S - 2),
        "y3": a * c * S - b * b - b * s3 - s6,
        "z1": -(a + s3) * (a + s3 + c * S) - s3 * (a - b + 2 * s3),
        "z2": s3 * (a - b + s3),
        "z3": s6,
    }


def eta_second_derivative_coefficients(coeffs: Coeffs | None = None) -> dict[str, RationalPoly]:
    """(A, B, C)-coefficients of the four eta second-derivative closed forms.

    Keys ``e<k>_A`` etc. for items 1..4; item 2 also carries the gradient
    coefficient ``e2_grad`` multiplying <d|eta|^2, eta-bar>.
    """
    a, b, c = coeffs if coeffs is not None else abc()
    s3 = S ** 3
    s6 = S ** 6
    return {
        "e1_A": (a - b) * (-c * (S - 2) + a - 2 * b + 2 * s3) - 2 * a * s3,
        "e1_B": (2 * b - a) * s3,
        "e1_C": -(b * b + b * s3 + s6),
        "e2_A": 2 * (a - b + s3) * (a - b - c * (S - 2)),
        "e2_grad": c * (b - s3),
        "e3_A": (a - b) * (a - 3 * b + s3 - c * (S - 2)) - 2 * s3 * (a + b + s3),
        "e3_B": -((a - b) * s3 + b * b),
        "e3_C": b * (a - b + s3) + s3 * (a + s3),
        "e4_A": (a + s3) * (-a - s3 + c * (S - 2)) - s3 * (a - b + 2 * s3),
        "e4_B": s3 * (a - b + s3),
        "e4_C": s6,
    }


def _entries_assembled(coeffs: Coeffs | None = None) -> dict[str, RationalPoly]:
    """Independent route: assemble rows 2-4 from the second-derivative
    closed forms and the first-order curvature terms."""
    a, b, c = coeffs if coeffs is not None else abc()
    e = eta_second_derivative_coefficients(coeffs)
    s3 = S ** 3
    return {
        # type-condition row: item3 - item2 + first-order terms
        "x1": e["e3_A"] - e["e2_A"] + 2 * c * (1 - S) * (a - b + 2 * s3),
        "x2": e["e3_B"] + 2 * b * c * (1 - S),
        "x3": e["e3_C"] - 2 * c * s3 * (1 - S),
        # Bianchi row: item1 - item2 + first-order terms
        "y1": e["e1_A"] - e["e2_A"] + c * S * (a - b + 2 * s3),
        "y2": e["e1_B"] + c * S * (c * (S - 2) - s3),
        "y3": e["e1_C"] + a * c * S,
        # curvature-on-torsion row: item4 + first-order terms
        "z1": e["e4_A"] - 2 * a * c * (S - 1) - 2 * c * s3 * (S - 1),
        "z2": e["e4_B"],
        "z3": e["e4_C"],
    }


@dataclass(frozen=True)
class PolyMatrix:
    """4x4 grid of polynomials; columns (A, B, C, <d|eta|^2, eta-bar>)."""

    entries: tuple[tuple[RationalPoly, ...], ...]
    column_labels: tuple[str, ...] = ("A", "B", "C", "grad_eta")

    def __getitem__(self, rc):
        r, c = rc
        return self.entries[r][c]

    def evaluate(self, s0) -> list[list[Fraction]]:
        s0 = Fraction(s0)
        return [[p(s0) for p in row] for row in self.entries]


def system_matrix(coeffs: Coeffs | None = None,
                  flip_entry: tuple[int, int] | None = None) -> PolyMatrix:
    """The 4x4 linear system in (A, B, C, <d|eta|^2, eta-bar>).

    ``flip_entry`` negates one entry; used by mutation-sensitivity tests.
    """
    a, b, c = coeffs if coeffs is not None else abc()
    e = _entries_defining(coeffs)
    rows = [
        [ZERO, c * (S - 2), b - a, c],
        [e["x1"], e["x2"], e["x3"], -c * (b - S ** 3)],
        [e["y1"], e["y2"], e["y3"], -c * (b - S ** 3)],
        [e["z1"], e["z2"], e["z3"], ZERO],
    ]
    if flip_entry is not None:
        r, cidx = flip_entry
        rows[r][cidx] = -rows[r][cidx]
    return PolyMatrix(tuple(tuple(row) for row in rows))


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of the coefficient transcription checks."""

    ok: bool
    failures: tuple[str, ...]


def coefficient_identities(coeffs: Coeffs | None = None,
                           matrix: PolyMatrix | None = None) -> IdentityReport:
    """Verify the coefficient algebra guarding the system transcription.

    Checks 2(a - b - c(s-2)) = -2(s-2)(7s^2 - 12s + 4) and that every
    entry x1..z3 of the matrix equals both its defining combination and
    the independently assembled form.
    """
    a, b, c = coeffs if coeffs is not None else abc()
    failures = []

    lhs = 2 * (a - b - c * (S - 2))
    rhs = -2 * (S - 2) * (7 * S * S - 12 * S + 4)
    if lhs != rhs:
        failures.append(f"norm-derivative coefficient: difference {lhs - rhs}")

    defined = _entries_defining(coeffs)
    assembled = _entries_assembled(coeffs)
    mat = matrix if matrix is not None else system_matrix(coeffs)
    positions = {
        "x1": (1, 0), "x2": (1, 1), "x3": (1, 2),
        "y1": (2, 0), "y2": (2, 1), "y3": (2, 2),
        "z1": (3, 0), "z2": (3, 1), "z3": (3, 2),
    }
    for name, pos in positions.items():
        if defined[name] != assembled[name]:
            failures.append(
                f"{name}: defining vs assembled differ by {defined[name] - assembled[name]}")
        if mat[pos] != defined[name]:
            failures.append(
                f"{name}: stored entry differs from defining form by {mat[pos] - defined[name]}")
    return IdentityReport(ok=not failures, failures=tuple(failures))


def _det_cofactor(m: Sequence[Sequence[RationalPoly]]) -> RationalPoly:
    n = len(m)
    if n == 1:
        return m[0][0]
    out = ZERO
    for j in range(n):
        if m[0][j].is_zero:
            continue
        minor = [[m[i][k] for k in range(n) if k != j] for i in range(1, n)]
        term = m[0][j] * _det_cofactor(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


def _det_bareiss(m: Sequence[Sequence[RationalPoly]]) -> RationalPoly:
    """Fraction-free (Bareiss) elimination; all divisions are exact."""
    n = len(m)
    a = [list(row) for row in m]
    sign = 1
    prev = ONE
    for k in range(n - 1):
        if a[k][k].is_zero:
            for i in range(k + 1, n):
                if not a[i][k].is_zero:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return ZERO
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[k][k] * a[i][j] - a[i][k] * a[k][j]).exact_div(prev)
        prev = a[k][k]
    det = a[n - 1][n - 1]
    return det if sign == 1 else -det


def determinant(matrix: PolyMatrix | None = None) -> RationalPoly:
    """Exact determinant of the system matrix.

    Computed by cofactor expansion and by fraction-free elimination;
    raises PolynomialError if the two disagree.
    """
    mat = matrix if matrix is not None else system_matrix()
    d1 = _det_cofactor(mat.entries)
    d2 = _det_bareiss(mat.entries)
    if d1 != d2:
        raise PolynomialError("cofactor and fraction-free determinants disagree")
    return d1


def determinant_factored() -> RationalPoly:
    """Expanded form of 64 s^8 (s-2)^3 (s-1)^3 (2s-1)^3 (3s-2)^2 (5s-4)."""
    return (RationalPoly.const(64) * S ** 8 * (S - 2) ** 3 * (S - 1) ** 3
            * (2 * S - 1) ** 3 * (3 * S - 2) ** 2 * (5 * S - 4))


def _rational_roots(p: RationalPoly) -> list[tuple[Fraction, int]]:
    """Roots with multiplicities by candidate testing; raises if a
    nonconstant factor remains (all roots here must be rational)."""
    roots: list[tuple[Fraction, int]] = []
    # strip the s^k factor first
    k = 0
    while k < len(p.coeffs) and p.coeffs[k] == 0:
        k += 1
    if k:
        p = RationalPoly(p.coeffs[k:])
        roots.append((Fraction(0), k))
    while p.degree > 0:
        den = 1
        for c in p.coeffs:
            den = den * c.denominator // gcd(den, c.denominator)
        ints = [int(c * den) for c in p.coeffs]
        g = 0
        for v in ints:
            g = gcd(g, abs(v))
        ints = [v // g for v in ints]
        lead, trail = abs(ints[-1]), abs(ints[0])

        def divisors(v: int) -> list[int]:
            out = [d for d in range(1, v + 1) if v % d == 0]
            return out

        found = None
        for q in divisors(lead):
            for pnum in divisors(trail):
                for sgn in (1, -1):
                    cand = Fraction(sgn * pnum, q)
                    if p(cand) == 0:
                        found = cand
                        break
                if found is not None:
                    break
            if found is not None:
                break
        if found is None:
            raise PolynomialError(f"nonrational factor remains: {p}")
        mult = 0
        factor = RationalPoly((-found, Fraction(1)))
        while True:
            q, r = p.divmod(factor)
            if not r.is_zero:
                break
            p = q
            mult += 1
        roots.append((found, mult))
    return sorted(roots)


def singular_set(matrix: PolyMatrix | None = None) -> list[tuple[Fraction, int]]:
    """Rational roots of the determinant with multiplicities, sorted."""
    return _rational_roots(determinant(matrix))


def _rank(rows: list[list[Fraction]]) -> int:
    m = [row[:] for row in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][col]
        m[rank] = [v / pv for v in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][col] != 0:
                f = m[i][col]
                m[i] = [v - f * w for v, w in zip(m[i], m[rank])]
        rank += 1
    return rank


def reduced_rank(s0, matrix: PolyMatrix | None = None
                 ) -> tuple[int, tuple[tuple[Fraction, ...], ...]]:
    """Rank of the 4x3 system with the gradient column dropped, at s = s0.

    This is the maximum-point scenario where <d|eta|^2, eta-bar> = 0.
    Returns (rank, rows) where each returned row is the evaluated row
    normalised so its first nonzero entry is 1 (zero rows kept as zeros).
    """
    s0 = Fraction(s0)
    mat = matrix if matrix is not None else system_matrix()
    rows = [[p(s0) for p in row[:3]] for row in mat.entries]
    rank = _rank(rows)
    normed = []
    for row in rows:
        lead = next((v for v in row if v != 0), None)
        if lead is None:
            normed.append(tuple(row))
        else:
            normed.append(tuple(v / lead for v in row))
    return rank, tuple(normed)


def conclude_C_zero(s0, matrix: PolyMatrix | None = None) -> bool:
    """True iff the full 4x4 system at s0 is nonsingular, so that the only
    solution is A = B = C = <d|eta|^2, eta-bar> = 0."""
    return determinant(matrix)(Fraction(s0)) != 0
