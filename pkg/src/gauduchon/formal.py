"""Formal verification of the torsion derivative calculus.

Torsion components are treated as free values subject to the substitution
rules for their covariant derivatives; the long identity chains between
the contraction scalars (A, At, B, C), the U/V/W/X/Y/Z tables, their
derivatives, and the rows of the 4x4 linear system are then verified as
exact polynomial identities in the parameter s.

Verification runs on the LCK torsion family T^k_ij = a_i d^k_j - a_j d^k_i,
which satisfies the cyclic torsion identity and its trace exactly while
being parameterised by an unconstrained vector.  All arithmetic is exact;
s stays symbolic unless a rational value is pinned on the point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Sequence

from . import polynomials as _polys
from .gpoly import (
    C_ZERO,
    P_ZERO,
    cadd,
    cconj,
    cis0,
    cmul,
    csub,
    p_add,
    p_conj,
    p_eval,
    p_is_zero,
    p_mul,
    p_neg,
    p_repr,
    p_scale,
    p_sub,
    p_trim,
)
from .scalars import QI


class FormalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# public scalar wrapper


class SPoly:
    """Polynomial in s with Gaussian-rational coefficients (public face)."""

    __slots__ = ("_raw",)

    def __init__(self, raw=()):
        self._raw = p_trim(list(raw))

    @classmethod
    def _wrap(cls, raw):
        p = object.__new__(cls)
        p._raw = raw
        return p

    @property
    def coeffs(self) -> tuple[QI, ...]:
        return tuple(QI(re, im) for re, im in self._raw)

    @property
    def is_zero(self) -> bool:
        return not self._raw

    @property
    def degree(self) -> int:
        return len(self._raw) - 1

    def __call__(self, s) -> QI:
        re, im = p_eval(self._raw, Fraction(s))
        return QI(re, im)

    def __eq__(self, other):
        if isinstance(other, SPoly):
            return p_is_zero(p_sub(self._raw, other._raw))
        return NotImplemented

    def __hash__(self):
        return hash(self._raw)

    def __repr__(self):
        return f"SPoly({p_repr(self._raw)})"


# ---------------------------------------------------------------------------
# points


def _to_qi(v) -> QI:
    if isinstance(v, QI):
        return v
    if isinstance(v, (int, Fraction)):
        return QI(v)
    if isinstance(v, complex):
        return QI(Fraction(v.real), Fraction(v.imag))
    if isinstance(v, tuple) and len(v) == 2:
        return QI(Fraction(v[0]), Fraction(v[1]))
    raise FormalError(f"cannot coerce {v!r} to an exact Gaussian rational")


@dataclass(frozen=True)
class FormalPoint:
    """Free torsion assignment (antisymmetric in the lower pair) plus an
    optional rational value of s (None keeps s symbolic)."""

    n: int
    torsion: tuple  # [k][i][j] of QI
    s: Fraction | None = None

    def __post_init__(self):
        n = self.n
        t = self.torsion
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    if t[k][i][j] != -t[k][j][i]:
                        raise FormalError(f"torsion not antisymmetric at {(k, i, j)}")

    @classmethod
    def from_torsion(cls, values, s=None) -> "FormalPoint":
        n = len(values)
        t = tuple(tuple(tuple(_to_qi(values[k][i][j]) for j in range(n))
                        for i in range(n)) for k in range(n))
        return cls(n=n, torsion=t, s=None if s is None else Fraction(s))

    @property
    def eta(self) -> tuple[QI, ...]:
        n = self.n
        return tuple(sum((self.torsion[k][k][j] for k in range(n)), QI(0))
                     for j in range(n))


def lck_torsion(a: Sequence, s=None) -> FormalPoint:
    """Point of the LCK family T^k_ij = a_i d^k_j - a_j d^k_i.

    Satisfies the cyclic torsion identity and T^i_jk eta_i = 0 exactly,
    with eta_j = (1-n) a_j.
    """
    av = [_to_qi(v) for v in a]
    n = len(av)
    if n < 2:
        raise FormalError("LCK family needs n >= 2")
    vals = [[[QI(0) for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                v = QI(0)
                if k == j:
                    v = v + av[i]
                if k == i:
                    v = v - av[j]
                vals[k][i][j] = v
    return FormalPoint.from_torsion(vals, s=s)


# ---------------------------------------------------------------------------
# raw numeric tables at a point

def _point_pairs(p: FormalPoint, integerize: bool) -> list:
    """Nested [k][i][j] pair table.  With ``integerize`` the point is
    rescaled by the positive lcm of all denominators; every verified
    identity is jointly degree-homogeneous in (T, conj T), so exact-zero
    residuals are preserved by the rescaling."""
    n = p.n
    if integerize:
        den = 1
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    q = p.torsion[k][i][j]
                    den = lcm(den, q.re.denominator, q.im.denominator)
        return [[[(int(p.torsion[k][i][j].re * den), int(p.torsion[k][i][j].im * den))
                  for j in range(n)] for i in range(n)] for k in range(n)]
    return [[[(p.torsion[k][i][j].re, p.torsion[k][i][j].im) for j in range(n)]
             for i in range(n)] for k in range(n)]


def _contraction_tables(n: int, t) -> dict:
    tb = [[[cconj(t[k][i][j]) for j in range(n)] for i in range(n)] for k in range(n)]
    eta = [C_ZERO] * n
    for j in range(n):
        acc = C_ZERO
        for k in range(n):
            acc = cadd(acc, t[k][k][j])
        eta[j] = acc
    etab = [cconj(v) for v in eta]

    u = [[C_ZERO] * n for _ in range(n)]
    v = [[C_ZERO] * n for _ in range(n)]
    w = [[C_ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            au = C_ZERO
            for k in range(n):
                au = cadd(au, cmul(t[i][j][k], etab[k]))
            u[i][j] = au
            av = aw = C_ZERO
            for r in range(n):
                for k in range(n):
                    av = cadd(av, cmul(t[r][i][k], tb[r][j][k]))
                    aw = cadd(aw, cmul(t[i][r][k], tb[j][r][k]))
            v[i][j] = av
            w[i][j] = aw

    x = [[[C_ZERO] * n for _ in range(n)] for _ in range(n)]
    y = [[[C_ZERO] * n for _ in range(n)] for _ in range(n)]
    z = [[[C_ZERO] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for pp in range(n):
            for l in range(n):
                ax = ay = az = C_ZERO
                for k in range(n):
                    for j in range(n):
                        for r in range(n):
                            # X^i_pl = T^k_pj T^r_kl conj(T^r_ij)
                            ax = cadd(ax, cmul(cmul(t[k][pp][j], t[r][k][l]), tb[r][i][j]))
                            # Y^i_pl = T^k_rj T^r_kp conj(T^l_ij)
                            ay = cadd(ay, cmul(cmul(t[k][r][j], t[r][k][pp]), tb[l][i][j]))
                            # Z^i_pl = T^k_jp T^i_kr conj(T^l_jr)
                            az = cadd(az, cmul(cmul(t[k][j][pp], t[i][k][r]), tb[l][j][r]))
                x[i][pp][l] = ax
                y[i][pp][l] = ay
                z[i][pp][l] = az

    A = At = B = C = C_ZERO
    for k in range(n):
        for pp in range(n):
            A = cadd(A, cmul(v[k][pp], u[k][pp]))
            At = cadd(At, cmul(w[k][pp], u[pp][k]))
            B = cadd(B, cmul(u[k][pp], u[pp][k]))
            C = cadd(C, cmul(u[k][pp], cconj(u[k][pp])))

    return dict(n=n, t=t, tb=tb, eta=eta, etab=etab, u=u, v=v, w=w,
                x=x, y=y, z=z, A=A, At=At, B=B, C=C)


# ---------------------------------------------------------------------------
# substitution rules (single source of truth for both derivative passes)

# c T^k_{ij,lbar} = sum over r of the five products below; each term is an
# unbarred generator times a barred one.
_RULE3 = (
    ("a", +1, lambda k, i, j, l, r: (r, i, j), lambda k, i, j, l, r: (r, k, l)),
    ("b", +1, lambda k, i, j, l, r: (k, i, r), lambda k, i, j, l, r: (j, l, r)),
    ("b", -1, lambda k, i, j, l, r: (k, j, r), lambda k, i, j, l, r: (i, l, r)),
    ("s3", +1, lambda k, i, j, l, r: (l, i, r), lambda k, i, j, l, r: (j, k, r)),
    ("s3", -1, lambda k, i, j, l, r: (l, j, r), lambda k, i, j, l, r: (i, k, r)),
)


def _raw_poly(p: _polys.RationalPoly):
    out = []
    for c in p.coeffs:
        if c.denominator != 1:
            raise FormalError("rule coefficient polynomial must have integer coefficients")
        out.append((int(c), 0))
    return tuple(out)


def _coeff_polys(coeffs=None) -> dict:
    a, b, c = coeffs if coeffs is not None else _polys.abc()
    s = _polys.S
    return {
        "a": _raw_poly(a),
        "b": _raw_poly(b),
        "c": _raw_poly(c),
        "s": _raw_poly(s),
        "s3": _raw_poly(s ** 3),
        "two_minus_s": _raw_poly(2 - s),          # -(s-2)
        "c_sm2": _raw_poly(c * (s - 2)),
        "a_minus_b": _raw_poly(a - b),
        "b_minus_s3": _raw_poly(b - s ** 3),
        "norm2_rhs": _raw_poly(-2 * (s - 2) * (7 * s * s - 12 * s + 4)),
        "a_minus_c_sm2": _raw_poly(a - c * (s - 2)),
        "two_1ms": _raw_poly(2 * (1 - s)),
        "c_sm1": _raw_poly(c * (s - 1)),
        "trace4_lhs": _raw_poly(2 * (2 * s - 1)),
        "trace4_t": _raw_poly(c * s * s),
        "trace4_eta": _raw_poly(c * s * (2 - 3 * s)),
    }


def _first_tables(n: int, tabs: dict, cp: dict) -> dict:
    t, tb = tabs["t"], tabs["tb"]
    two_minus_s = cp["two_minus_s"]
    cpoly = cp["c"]

    t_l = [[[[P_ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    ct_lb = [[[[P_ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    acc = C_ZERO
                    for r in range(n):
                        acc = cadd(acc, cmul(t[r][i][j], t[k][r][l]))
                    t_l[k][i][j][l] = p_scale(two_minus_s, acc)

                    accs = {"a": C_ZERO, "b": C_ZERO, "s3": C_ZERO}
                    for key, sgn, fu, fb in _RULE3:
                        inner = C_ZERO
                        for r in range(n):
                            au = fu(k, i, j, l, r)
                            ab = fb(k, i, j, l, r)
                            val = cmul(t[au[0]][au[1]][au[2]], tb[ab[0]][ab[1]][ab[2]])
                            inner = cadd(inner, val) if sgn > 0 else csub(inner, val)
                        accs[key] = cadd(accs[key], inner)
                    entry = P_ZERO
                    for key, zval in accs.items():
                        entry = p_add(entry, p_scale(cp[key], zval))
                    ct_lb[k][i][j][l] = entry

    eta_l = [[P_ZERO] * n for _ in range(n)]
    ceta_lb = [[P_ZERO] * n for _ in range(n)]
    for j in range(n):
        for l in range(n):
            e1 = P_ZERO
            e2 = P_ZERO
            for k in range(n):
                e1 = p_add(e1, t_l[k][k][j][l])
                e2 = p_add(e2, ct_lb[k][k][j][l])
            eta_l[j][l] = e1
            ceta_lb[j][l] = e2

    ct_l = [[[[p_mul(cpoly, t_l[k][i][j][l]) for l in range(n)] for j in range(n)]
             for i in range(n)] for k in range(n)]
    ct_l_conj = [[[[p_conj(ct_l[k][i][j][l]) for l in range(n)] for j in range(n)]
                  for i in range(n)] for k in range(n)]
    ct_lb_conj = [[[[p_conj(ct_lb[k][i][j][l]) for l in range(n)] for j in range(n)]
                   for i in range(n)] for k in range(n)]

    return dict(t_l=t_l, ct_l=ct_l, ct_lb=ct_lb,
                ct_l_conj=ct_l_conj, ct_lb_conj=ct_lb_conj,
                eta_l=eta_l, ceta_lb=ceta_lb)


def _second_table(n: int, tabs: dict, first: dict, cp: dict, barred_dir: bool) -> list:
    """One further substitution pass: c^2 T^k_{ij,lbar m} (barred_dir=False)
    or c^2 T^k_{ij,lbar mbar} (barred_dir=True), index order [k][i][j][l][m]."""
    t, tb = tabs["t"], tabs["tb"]
    if barred_dir:
        d_un, d_bar = first["ct_lb"], first["ct_l_conj"]
    else:
        d_un, d_bar = first["ct_l"], first["ct_lb_conj"]

    out = [[[[[P_ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
           for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    row = out[k][i][j][l]
                    for m in range(n):
                        acc = P_ZERO
                        for key, sgn, fu, fb in _RULE3:
                            inner = P_ZERO
                            for r in range(n):
                                au = fu(k, i, j, l, r)
                                ab = fb(k, i, j, l, r)
                                vu = t[au[0]][au[1]][au[2]]
                                vb = tb[ab[0]][ab[1]][ab[2]]
                                du = d_un[au[0]][au[1]][au[2]][m]
                                db = d_bar[ab[0]][ab[1]][ab[2]][m]
                                if du and not cis0(vb):
                                    inner = p_add(inner, p_scale(du, vb))
                                if db and not cis0(vu):
                                    inner = p_add(inner, p_scale(db, vu))
                            if inner:
                                term = p_mul(cp[key], inner)
                                acc = p_add(acc, term) if sgn > 0 else p_sub(acc, term)
                        row[m] = acc
    return out


# ---------------------------------------------------------------------------
# scalar assemblies


def _c_grad_t_norm(n, tabs, first):
    """c <d|T|^2, eta-bar> by the product rule over the first tables."""
    t, tb, etab = tabs["t"], tabs["tb"], tabs["etab"]
    total = P_ZERO
    for l in range(n):
        inner = P_ZERO
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    inner = p_add(inner, p_scale(first["ct_l"][k][i][j][l], tb[k][i][j]))
                    inner = p_add(inner, p_scale(first["ct_lb_conj"][k][i][j][l], t[k][i][j]))
        total = p_add(total, p_scale(inner, etab[l]))
    return total


def _c_grad_eta_norm(n, tabs, first, cpr):
    """c <d|eta|^2, eta-bar> by the product rule over the eta tables."""
    eta, etab = tabs["eta"], tabs["etab"]
    total = P_ZERO
    for l in range(n):
        inner = P_ZERO
        for j in range(n):
            inner = p_add(inner, p_scale(p_mul(cpr["c"], first["eta_l"][j][l]), cconj(eta[j])))
            inner = p_add(inner, p_scale(p_conj(first["ceta_lb"][j][l]), eta[j]))
        total = p_add(total, p_scale(inner, etab[l]))
    return total


# ---------------------------------------------------------------------------
# check reports


@dataclass(frozen=True)
class CheckReport:
    """Per-item outcome of one lemma suite; residuals hold the nonzero
    difference polynomials (empty means everything verified exactly)."""

    name: str
    items: tuple[str, ...]
    residuals: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.residuals

    def failed_items(self) -> tuple[str, ...]:
        return tuple(sorted({i.split("#")[0] for i in self.residuals}))


class _Collector:
    def __init__(self, name: str, s: Fraction | None):
        self.name = name
        self.s = s
        self.items: list[str] = []
        self.residuals: dict[str, str] = {}

    def equal(self, item: str, lhs, rhs, index=None) -> None:
        if item not in self.items:
            self.items.append(item)
        diff = p_sub(lhs, rhs)
        if self.s is not None and not p_is_zero(diff):
            val = p_eval(diff, self.s)
            if val == (0, 0):
                diff = P_ZERO
            else:
                diff = (val,)
        if not p_is_zero(diff):
            key = item if index is None else f"{item}#{index}"
            self.residuals[key] = p_repr(diff)

    def report(self) -> CheckReport:
        return CheckReport(self.name, tuple(self.items), dict(self.residuals))


def _as_poly(z) -> tuple:
    return () if cis0(z) else (z,)


# ---------------------------------------------------------------------------
# the individual suites (operating on prepared tables)


def _run_norm_derivative(ctx) -> CheckReport:
    n, tabs, first, cp = ctx["n"], ctx["tabs"], ctx["first"], ctx["cp"]
    col = _Collector("norm-derivative", ctx["s"])
    col.equal("1", _as_poly(tabs["At"]), _as_poly(cmul((2, 0), tabs["A"])))
    col.equal("2", ctx["c_grad_t"], p_scale(cp["norm2_rhs"], tabs["A"]))
    rhs3 = p_add(p_neg(p_scale(cp["c_sm2"], tabs["B"])),
                 p_scale(cp["a_minus_b"], tabs["C"]))
    col.equal("3", ctx["c_grad_eta"], rhs3)
    return col.report()


def _run_xyz(ctx) -> CheckReport:
    n, tabs = ctx["n"], ctx["tabs"]
    col = _Collector("xyz-traces", ctx["s"])
    x, y, z, etab = tabs["x"], tabs["y"], tabs["z"], tabs["etab"]

    def tr_pi(tab):
        acc = C_ZERO
        for i in range(n):
            for p in range(n):
                acc = cadd(acc, cmul(tab[i][p][i], etab[p]))
        return acc

    def tr_il(tab):
        acc = C_ZERO
        for i in range(n):
            for l in range(n):
                acc = cadd(acc, cmul(tab[i][i][l], etab[l]))
        return acc

    A, B = tabs["A"], tabs["B"]
    col.equal("X-pi", _as_poly(tr_pi(x)), _as_poly(A))
    col.equal("X-il", _as_poly(tr_il(x)), _as_poly(cmul((2, 0), A)))
    col.equal("Y-pi", _as_poly(tr_pi(y)), _as_poly(B))
    col.equal("Y-il", _as_poly(tr_il(y)), P_ZERO)
    col.equal("Z-pi", _as_poly(tr_pi(z)), _as_poly(A))
    col.equal("Z-il", _as_poly(tr_il(z)), P_ZERO)
    return col.report()


def _run_eta_first(ctx) -> CheckReport:
    """Closed form of c eta_{j,lbar} plus the two trace identities."""
    n, tabs, first, cp = ctx["n"], ctx["tabs"], ctx["first"], ctx["cp"]
    col = _Collector("eta-first-derivatives", ctx["s"])
    u, v, w = tabs["u"], tabs["v"], tabs["w"]
    for j in range(n):
        for l in range(n):
            rhs = p_scale(cp["a_minus_b"], v[j][l])
            rhs = p_add(rhs, p_scale(cp["b"], cconj(u[j][l])))
            rhs = p_add(rhs, p_scale(cp["s3"], csub(w[l][j], u[l][j])))
            col.equal("closed-form", first["ceta_lb"][j][l], rhs, index=(j, l))

    # trace: 2(2s-1) eta_{r,rbar} = s^2 |T|^2 + s(2-3s)|eta|^2, times c
    tr = P_ZERO
    for r in range(n):
        tr = p_add(tr, first["ceta_lb"][r][r])
    t_norm = C_ZERO
    for k in range(n):
        for i in range(n):
            for j in range(n):
                t_norm = cadd(t_norm, cmul(tabs["t"][k][i][j], tabs["tb"][k][i][j]))
    eta_norm = C_ZERO
    for j in range(n):
        eta_norm = cadd(eta_norm, cmul(tabs["eta"][j], tabs["etab"][j]))
    lhs = p_mul(cp["trace4_lhs"], tr)
    rhs = p_add(p_scale(cp["trace4_t"], t_norm), p_scale(cp["trace4_eta"], eta_norm))
    col.equal("trace-4", lhs, rhs)

    # c eta_{j,lbar} etabar_j = (a-b) V_{j lbar} etabar_j, componentwise in l
    for l in range(n):
        lhs5 = P_ZERO
        rhs5 = C_ZERO
        for j in range(n):
            lhs5 = p_add(lhs5, p_scale(first["ceta_lb"][j][l], tabs["etab"][j]))
            rhs5 = cadd(rhs5, cmul(v[j][l], tabs["etab"][j]))
        col.equal("trace-5", lhs5, p_scale(cp["a_minus_b"], rhs5), index=l)
    return col.report()


def _run_uvw(ctx) -> CheckReport:
    n, tabs, first, cp = ctx["n"], ctx["tabs"], ctx["first"], ctx["cp"]
    col = _Collector("uvw-derivatives", ctx["s"])
    t, tb = tabs["t"], tabs["tb"]
    u, v, w, y, z, x = tabs["u"], tabs["v"], tabs["w"], tabs["y"], tabs["z"], tabs["x"]
    eta, etab = tabs["eta"], tabs["etab"]

    # item 1: c U^p_{q,l}
    for p in range(n):
        for q in range(n):
            for l in range(n):
                lhs = P_ZERO
                for j in range(n):
                    lhs = p_add(lhs, p_scale(first["ct_l"][p][q][j][l], etab[j]))
                    lhs = p_add(lhs, p_scale(p_conj(first["ceta_lb"][j][l]), t[p][q][j]))
                rhs = P_ZERO
                for r in range(n):
                    rhs = p_sub(rhs, p_scale(cp["c_sm2"], cmul(t[p][r][l], u[r][q])))
                    inner = p_scale(cp["a_minus_b"], v[l][r])
                    inner = p_add(inner, p_scale(cp["b"], u[r][l]))
                    inner = p_add(inner, p_scale(cp["s3"], csub(w[r][l], cconj(u[l][r]))))
                    rhs = p_add(rhs, p_scale(inner, t[p][q][r]))
                col.equal("1", lhs, rhs, index=(p, q, l))

    # item 2: c U^k_{i,lbar}
    cpr = ctx["cpr"]
    for k in range(n):
        for i in range(n):
            for l in range(n):
                lhs = P_ZERO
                for j in range(n):
                    lhs = p_add(lhs, p_scale(first["ct_lb"][k][i][j][l], etab[j]))
                    lhs = p_add(lhs, p_scale(p_conj(p_mul(cpr["c"], first["eta_l"][j][l])),
                                             t[k][i][j]))
                rhs = P_ZERO
                for r in range(n):
                    rhs = p_add(rhs, p_scale(cp["a"], cmul(u[r][i], tb[r][k][l])))
                    rhs = p_sub(rhs, p_scale(cp["b"], cmul(u[k][r], tb[i][r][l])))
                    rhs = p_sub(rhs, p_scale(cp["s3"], cmul(u[l][r], tb[i][r][k])))
                rhs = p_sub(rhs, p_scale(cp["c_sm2"], cconj(y[i][l][k])))
                col.equal("2", lhs, rhs, index=(k, i, l))

    # item 3: c V_{p ibar, l} with its conjugate-direction equality
    for p in range(n):
        for i in range(n):
            for l in range(n):
                lhs = P_ZERO
                for k in range(n):
                    for j in range(n):
                        lhs = p_add(lhs, p_scale(first["ct_l"][k][p][j][l], tb[k][i][j]))
                        lhs = p_add(lhs, p_scale(first["ct_lb_conj"][k][i][j][l], t[k][p][j]))
                rhs = p_scale(cp["a_minus_c_sm2"], x[i][p][l])
                rhs = p_sub(rhs, p_scale(cp["b"], x[i][l][p]))
                for r in range(n):
                    rhs = p_sub(rhs, p_scale(cp["b"], cmul(v[p][r], t[i][r][l])))
                rhs = p_sub(rhs, p_scale(cp["s3"], y[i][p][l]))
                rhs = p_add(rhs, p_scale(cp["s3"], z[i][p][l]))
                col.equal("3", lhs, rhs, index=(p, i, l))

                conj_dir = P_ZERO
                for k in range(n):
                    for j in range(n):
                        conj_dir = p_add(conj_dir,
                                         p_scale(first["ct_lb"][k][i][j][l], tb[k][p][j]))
                        conj_dir = p_add(conj_dir,
                                         p_scale(first["ct_l_conj"][k][p][j][l], t[k][i][j]))
                col.equal("3", lhs, p_conj(conj_dir), index=("conj", p, i, l))

    # item 4: c W^{p kbar}_{,l} with its conjugate-direction equality
    for p in range(n):
        for k in range(n):
            for l in range(n):
                lhs = P_ZERO
                for i in range(n):
                    for j in range(n):
                        lhs = p_add(lhs, p_scale(first["ct_l"][p][i][j][l], tb[k][i][j]))
                        lhs = p_add(lhs, p_scale(first["ct_lb_conj"][k][i][j][l], t[p][i][j]))
                rhs = P_ZERO
                for r in range(n):
                    rhs = p_add(rhs, p_scale(cp["a"], cmul(w[p][r], t[r][k][l])))
                    rhs = p_sub(rhs, p_scale(cp["c_sm2"], cmul(w[r][k], t[p][r][l])))
                rhs = p_sub(rhs, p_scale(p_add(cp["b"], cp["b"]), z[p][l][k]))
                rhs = p_sub(rhs, p_scale(p_add(cp["s3"], cp["s3"]), z[p][k][l]))
                col.equal("4", lhs, rhs, index=(p, k, l))

                conj_dir = P_ZERO
                for i in range(n):
                    for j in range(n):
                        conj_dir = p_add(conj_dir,
                                         p_scale(first["ct_lb"][k][i][j][l], tb[p][i][j]))
                        conj_dir = p_add(conj_dir,
                                         p_scale(first["ct_l_conj"][p][i][j][l], t[k][i][j]))
                col.equal("4", lhs, p_conj(conj_dir), index=("conj", p, k, l))
    return col.report()


def _eta_second_traces(n, second_m, second_mb):
    """eta second-derivative traces from the T tables; index order
    [j][first direction][second direction], c^2-scaled."""
    e_lb_m = [[[P_ZERO] * n for _ in range(n)] for _ in range(n)]
    e_lb_mb = [[[P_ZERO] * n for _ in range(n)] for _ in range(n)]
    for j in range(n):
        for l in range(n):
            for m in range(n):
                a1 = P_ZERO
                a2 = P_ZERO
                for k in range(n):
                    a1 = p_add(a1, second_m[k][k][j][l][m])
                    a2 = p_add(a2, second_mb[k][k][j][l][m])
                e_lb_m[j][l][m] = a1
                e_lb_mb[j][l][m] = a2
    return e_lb_m, e_lb_mb


def _run_eta_second(ctx) -> CheckReport:
    n, tabs, cp = ctx["n"], ctx["tabs"], ctx["cp"]
    col = _Collector("eta-second-derivatives", ctx["s"])
    e_lb_m, e_lb_mb = ctx["eta_second"]
    etab, eta = tabs["etab"], tabs["eta"]
    A, B, C = tabs["A"], tabs["B"], tabs["C"]
    ecoeff = {k: _raw_poly(p) for k, p in
              _polys.eta_second_derivative_coefficients(ctx["coeffs"]).items()}

    def combo(pa, pb, pc):
        out = p_scale(pa, A)
        out = p_add(out, p_scale(pb, B))
        return p_add(out, p_scale(pc, C))

    # item 1: c^2 eta_{j,lbar l} etabar_j
    lhs1 = P_ZERO
    for j in range(n):
        for l in range(n):
            lhs1 = p_add(lhs1, p_scale(e_lb_m[j][l][l], etab[j]))
    col.equal("1", lhs1, combo(ecoeff["e1_A"], ecoeff["e1_B"], ecoeff["e1_C"]))

    # item 2: c^2 eta_{j,jbar l} etabar_l, plus its conjugate form
    lhs2 = P_ZERO
    lhs2c = P_ZERO
    for j in range(n):
        for l in range(n):
            lhs2 = p_add(lhs2, p_scale(e_lb_m[j][j][l], etab[l]))
            lhs2c = p_add(lhs2c, p_scale(p_conj(e_lb_mb[j][j][l]), cconj(eta[l])))
    rhs2 = p_add(p_scale(ecoeff["e2_A"], A),
                 p_mul(cp["b_minus_s3"], ctx["c_grad_eta"]))
    col.equal("2", lhs2, rhs2)
    col.equal("2", lhs2, lhs2c, index="conj")

    # item 3: c^2 conj(eta_{j,lbar jbar} eta_l)
    lhs3 = P_ZERO
    for j in range(n):
        for l in range(n):
            lhs3 = p_add(lhs3, p_scale(p_conj(e_lb_mb[j][l][j]), cconj(eta[l])))
    col.equal("3", lhs3, combo(ecoeff["e3_A"], ecoeff["e3_B"], ecoeff["e3_C"]))

    # item 4: c^2 conj(T^k_{ij,ibar jbar} eta_k)
    lhs4 = P_ZERO
    second_mb = ctx["second_mb"]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                lhs4 = p_add(lhs4, p_conj(p_scale(second_mb[k][i][j][i][j], eta[k])))
    col.equal("4", lhs4, combo(ecoeff["e4_A"], ecoeff["e4_B"], ecoeff["e4_C"]))
    return col.report()


def _run_rows(ctx) -> CheckReport:
    """Rows 2-4 of the linear system as expression equalities: the proof's
    assembled second-derivative expression equals x A + y B + z C minus
    c(b - s^3) <d|eta|^2, eta-bar>.  Vanishing is NOT asserted here (that
    needs the Kahler-like hypothesis)."""
    n, tabs, first, cp = ctx["n"], ctx["tabs"], ctx["first"], ctx["cp"]
    cpr = ctx["cpr"]
    col = _Collector("linear-system-rows", ctx["s"])
    e_lb_m, e_lb_mb = ctx["eta_second"]
    t, eta, etab = tabs["t"], tabs["eta"], tabs["etab"]
    A, B, C = tabs["A"], tabs["B"], tabs["C"]
    entries = {k: _raw_poly(v) for k, v in ctx["entries"].items()}
    grad_term = p_neg(p_mul(cp["b_minus_s3"], ctx["c_grad_eta"]))

    def row_rhs(e1, e2, e3, with_grad: bool):
        out = p_add(p_add(p_scale(entries[e1], A), p_scale(entries[e2], B)),
                    p_scale(entries[e3], C))
        return p_add(out, grad_term) if with_grad else out

    # row 2 (type condition): c^2 (conj(eta_{j,lbar jbar}) - conj(eta_{j,jbar lbar})
    #   + 2(1-s) T^k_{jl} conj(eta_{j,kbar})) etabar_l
    E2 = P_ZERO
    for j in range(n):
        for l in range(n):
            term = p_sub(p_conj(e_lb_mb[j][l][j]), p_conj(e_lb_mb[j][j][l]))
            E2 = p_add(E2, p_scale(term, etab[l]))
    fo = P_ZERO
    for j in range(n):
        for k in range(n):
            for l in range(n):
                fo = p_add(fo, p_scale(p_mul(cpr["c"], p_conj(first["ceta_lb"][j][k])),
                                       cmul(t[k][j][l], etab[l])))
    E2 = p_add(E2, p_mul(cpr["two_1ms"], fo))
    col.equal("2", E2, row_rhs("x1", "x2", "x3", with_grad=True))

    # row 3 (Bianchi): c^2 (eta_{j,lbar l} - eta_{l,lbar j}) etabar_j
    #   + c^2 s (eta_k eta_{j,kbar} - etabar_k eta_{j,k} - T^l_{jk} eta_{l,kbar}) etabar_j
    E3 = P_ZERO
    for j in range(n):
        second = P_ZERO
        for l in range(n):
            second = p_add(second, p_sub(e_lb_m[j][l][l], e_lb_m[l][l][j]))
        E3 = p_add(E3, p_scale(second, etab[j]))
    fo3 = P_ZERO
    for j in range(n):
        for k in range(n):
            fo3 = p_add(fo3, p_scale(p_mul(cpr["c"], first["ceta_lb"][j][k]),
                                     cmul(eta[k], etab[j])))
            fo3 = p_sub(fo3, p_scale(p_mul(cpr["c"], p_mul(cpr["c"], first["eta_l"][j][k])),
                                     cmul(etab[k], etab[j])))
            for l in range(n):
                fo3 = p_sub(fo3, p_scale(p_mul(cpr["c"], first["ceta_lb"][l][k]),
                                         cmul(t[l][j][k], etab[j])))
    E3 = p_add(E3, p_mul(cpr["s"], fo3))
    col.equal("3", E3, row_rhs("y1", "y2", "y3", with_grad=True))

    # row 4 (curvature on T): c^2 conj(T^k_{ij,ibar jbar} eta_k)
    #   + c^2 (s-1) T^l_{ij} conj(T^k_{ij,lbar} eta_k)
    E4 = P_ZERO
    second_mb = ctx["second_mb"]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                E4 = p_add(E4, p_conj(p_scale(second_mb[k][i][j][i][j], eta[k])))
    fo4 = P_ZERO
    for l in range(n):
        for i in range(n):
            for j in range(n):
                inner = P_ZERO
                for k in range(n):
                    inner = p_add(inner, p_scale(first["ct_lb_conj"][k][i][j][l],
                                                 cconj(eta[k])))
                fo4 = p_add(fo4, p_scale(inner, t[l][i][j]))
    E4 = p_add(E4, p_mul(cpr["c_sm1"], fo4))
    col.equal("4", E4, row_rhs("z1", "z2", "z3", with_grad=False))
    return col.report()


# ---------------------------------------------------------------------------
# orchestration


def _prepare(p: FormalPoint, coeffs=None, matrix: _polys.PolyMatrix | None = None,
             integerize: bool = True, rule_coeffs=None, level: int = 2) -> dict:
    """Build shared tables.  ``coeffs`` feeds the stated right-hand-side
    forms, ``rule_coeffs`` the substitution rules (defaults to ``coeffs``);
    splitting them lets a tamper hook corrupt the engine while the
    reference forms stay intact."""
    n = p.n
    cp = _coeff_polys(coeffs)
    cpr = _coeff_polys(rule_coeffs if rule_coeffs is not None else coeffs)
    t = _point_pairs(p, integerize=integerize)
    tabs = _contraction_tables(n, t)
    first = _first_tables(n, tabs, cpr)
    ctx = dict(n=n, s=p.s, cp=cp, cpr=cpr, coeffs=coeffs, tabs=tabs, first=first,
               c_grad_t=_c_grad_t_norm(n, tabs, first),
               c_grad_eta=_c_grad_eta_norm(n, tabs, first, cpr))
    if level >= 2:
        second_m = _second_table(n, tabs, first, cpr, barred_dir=False)
        second_mb = _second_table(n, tabs, first, cpr, barred_dir=True)
        ctx["second_m"] = second_m
        ctx["second_mb"] = second_mb
        ctx["eta_second"] = _eta_second_traces(n, second_m, second_mb)
    mat = matrix if matrix is not None else _polys.system_matrix(coeffs)
    ctx["entries"] = {
        "x1": mat[1, 0], "x2": mat[1, 1], "x3": mat[1, 2],
        "y1": mat[2, 0], "y2": mat[2, 1], "y3": mat[2, 2],
        "z1": mat[3, 0], "z2": mat[3, 1], "z3": mat[3, 2],
    }
    return ctx


def verify_point(p: FormalPoint, coeffs=None,
                 matrix: _polys.PolyMatrix | None = None,
                 rule_coeffs=None) -> list[CheckReport]:
    """Run every lemma suite on one point; shared tables are built once."""
    ctx = _prepare(p, coeffs=coeffs, matrix=matrix, rule_coeffs=rule_coeffs)
    return [
        _run_norm_derivative(ctx),
        _run_xyz(ctx),
        _run_eta_first(ctx),
        _run_uvw(ctx),
        _run_eta_second(ctx),
        _run_rows(ctx),
    ]


def norm_derivative_checks(p: FormalPoint, coeffs=None, rule_coeffs=None) -> CheckReport:
    ctx = _prepare(p, coeffs=coeffs, rule_coeffs=rule_coeffs, level=1)
    return _run_norm_derivative(ctx)


def xyz_trace_checks(p: FormalPoint) -> CheckReport:
    ctx = _prepare(p, level=1)
    return _run_xyz(ctx)


def uvw_derivative_checks(p: FormalPoint, coeffs=None, rule_coeffs=None) -> CheckReport:
    ctx = _prepare(p, coeffs=coeffs, rule_coeffs=rule_coeffs, level=1)
    return _run_uvw(ctx)


def eta_second_derivative_checks(p: FormalPoint, coeffs=None,
                                 rule_coeffs=None) -> CheckReport:
    ctx = _prepare(p, coeffs=coeffs, rule_coeffs=rule_coeffs)
    return _run_eta_second(ctx)


def linear_system_row_checks(p: FormalPoint, coeffs=None,
                             matrix: _polys.PolyMatrix | None = None,
                             rule_coeffs=None) -> CheckReport:
    ctx = _prepare(p, coeffs=coeffs, matrix=matrix, rule_coeffs=rule_coeffs)
    return _run_rows(ctx)


def eta_first_derivative_checks(p: FormalPoint, coeffs=None, rule_coeffs=None) -> CheckReport:
    ctx = _prepare(p, coeffs=coeffs, rule_coeffs=rule_coeffs, level=1)
    return _run_eta_first(ctx)


# ---------------------------------------------------------------------------
# public value types


def _wrap_spoly(raw) -> SPoly:
    return SPoly._wrap(raw)


def _wrap_table(tbl) -> tuple:
    if isinstance(tbl, list):
        return tuple(_wrap_table(x) for x in tbl)
    return _wrap_spoly(tbl)


def _qi(pair) -> QI:
    return QI(pair[0], pair[1])


@dataclass(frozen=True)
class ContractionValues:
    """The contraction tables and scalars of one torsion point.

    u[i][j] = T^i_jk etabar_k, v[i][j] = T^r_ik conj(T^r_jk),
    w[i][j] = T^i_kl conj(T^j_kl); x/y/z are the cubic tables; the
    scalars are a = V.U, a_tilde = W.U, b = tr(U^2), c = |U|^2, and the
    two c-scaled gradient pairings (polynomials in s).
    """

    n: int
    u: tuple
    v: tuple
    w: tuple
    x: tuple
    y: tuple
    z: tuple
    a: QI
    a_tilde: QI
    b: QI
    c: QI
    c_grad_t_norm: SPoly
    c_grad_eta_norm: SPoly


def contractions(p: FormalPoint) -> ContractionValues:
    """All contraction values at the exact (unscaled) point."""
    ctx = _prepare(p, integerize=False)
    tabs = ctx["tabs"]

    def wrap2(tab):
        return tuple(tuple(_qi(z) for z in row) for row in tab)

    def wrap3(tab):
        return tuple(tuple(tuple(_qi(z) for z in row) for row in plane) for plane in tab)

    return ContractionValues(
        n=p.n,
        u=wrap2(tabs["u"]), v=wrap2(tabs["v"]), w=wrap2(tabs["w"]),
        x=wrap3(tabs["x"]), y=wrap3(tabs["y"]), z=wrap3(tabs["z"]),
        a=_qi(tabs["A"]), a_tilde=_qi(tabs["At"]), b=_qi(tabs["B"]), c=_qi(tabs["C"]),
        c_grad_t_norm=_wrap_spoly(ctx["c_grad_t"]),
        c_grad_eta_norm=_wrap_spoly(ctx["c_grad_eta"]),
    )


@dataclass(frozen=True)
class DerivativeTable:
    """Substitution-rule derivative tables at a point, c-scaled so that
    every entry is polynomial in s.  Index orders: t_hol[k][i][j][l] is
    T^k_{ij,l}; ct_anti is c T^k_{ij,lbar}; the second tables carry the
    first (barred) direction then the second direction."""

    n: int
    t_hol: tuple
    ct_anti: tuple
    eta_hol: tuple
    ceta_anti: tuple
    c2t_anti_hol: tuple
    c2t_anti_anti: tuple


def first_derivatives(p: FormalPoint, coeffs=None) -> DerivativeTable:
    """Derivative tables at the exact point (first plus one further
    substitution pass for the second derivatives)."""
    ctx = _prepare(p, coeffs=coeffs, integerize=False)
    first = ctx["first"]
    return DerivativeTable(
        n=p.n,
        t_hol=_wrap_table(first["t_l"]),
        ct_anti=_wrap_table(first["ct_lb"]),
        eta_hol=_wrap_table(first["eta_l"]),
        ceta_anti=_wrap_table(first["ceta_lb"]),
        c2t_anti_hol=_wrap_table(ctx["second_m"]),
        c2t_anti_anti=_wrap_table(ctx["second_mb"]),
    )
