"""Lean exact arithmetic for the formal torsion calculus.

Complex scalars are (re, im) pairs; polynomials in the real parameter s
are tuples of pairs, ascending degree, trailing zeros trimmed.  The part
type is anything supporting +, -, *: plain ints on the fast path, exact
Fractions on the public single-point path.  Conjugation of a polynomial
is coefficientwise (s is a real parameter).
"""

from __future__ import annotations

from fractions import Fraction

Pair = tuple
Poly = tuple

C_ZERO: Pair = (0, 0)
P_ZERO: Poly = ()
P_ONE: Poly = ((1, 0),)


def cadd(x: Pair, y: Pair) -> Pair:
    return (x[0] + y[0], x[1] + y[1])


def csub(x: Pair, y: Pair) -> Pair:
    return (x[0] - y[0], x[1] - y[1])


def cmul(x: Pair, y: Pair) -> Pair:
    a, b = x
    c, d = y
    return (a * c - b * d, a * d + b * c)


def cneg(x: Pair) -> Pair:
    return (-x[0], -x[1])


def cconj(x: Pair) -> Pair:
    return (x[0], -x[1])


def cis0(x: Pair) -> bool:
    return not x[0] and not x[1]


def p_trim(cs: list) -> Poly:
    while cs and cis0(cs[-1]):
        cs.pop()
    return tuple(cs)


def p_const(z: Pair) -> Poly:
    return () if cis0(z) else (z,)


def p_from_ints(ints) -> Poly:
    """Real polynomial from an ascending integer coefficient list."""
    return p_trim([(int(c), 0) for c in ints])


def p_add(p: Poly, q: Poly) -> Poly:
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, z in enumerate(q):
        out[i] = cadd(out[i], z)
    return p_trim(out)


def p_sub(p: Poly, q: Poly) -> Poly:
    out = list(p) + [C_ZERO] * max(0, len(q) - len(p))
    for i, z in enumerate(q):
        out[i] = csub(out[i], z)
    return p_trim(out)


def p_neg(p: Poly) -> Poly:
    return tuple(cneg(z) for z in p)


def p_conj(p: Poly) -> Poly:
    return tuple(cconj(z) for z in p)


def p_scale(p: Poly, z: Pair) -> Poly:
    if cis0(z) or not p:
        return P_ZERO
    return p_trim([cmul(c, z) for c in p])


def p_mul(p: Poly, q: Poly) -> Poly:
    if not p or not q:
        return P_ZERO
    out = [C_ZERO] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if cis0(a):
            continue
        for j, b in enumerate(q):
            if cis0(b):
                continue
            out[i + j] = cadd(out[i + j], cmul(a, b))
    return p_trim(out)


def p_is_zero(p: Poly) -> bool:
    return not p


def p_eval(p: Poly, x: Fraction) -> Pair:
    """Evaluate at a rational point; returns a Fraction pair."""
    re, im = Fraction(0), Fraction(0)
    for c in reversed(p):
        re, im = re * x + c[0], im * x + c[1]
    return (re, im)


def p_repr(p: Poly) -> str:
    if not p:
        return "0"
    parts = []
    for k, (re, im) in enumerate(p):
        if not re and not im:
            continue
        coef = f"{re}" if not im else f"({re}{'+' if im >= 0 else '-'}{abs(im)}i)"
        if k == 0:
            parts.append(coef)
        elif k == 1:
            parts.append(f"{coef}*s")
        else:
            parts.append(f"{coef}*s^{k}")
    return " + ".join(parts)
