"""Exact univariate polynomials over the rationals.

A polynomial is a tuple of :class:`fractions.Fraction` coefficients in
ascending degree order, always trimmed so the last coefficient is nonzero.
The zero polynomial is the empty tuple. Only what the Wronskian partition
needs is here: ring operations, Euclidean division, gcd, Sturm sequences and
real-root isolation.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from typing import Iterable, Sequence

Poly = tuple  # tuple[Fraction, ...]

ZERO: Poly = ()
ONE: Poly = (Fraction(1),)


def poly(coeffs: Iterable) -> Poly:
    """Build a trimmed polynomial from ascending coefficients.

    Strings such as ``"1/10"`` are accepted and parsed exactly.
    """
    out = [Fraction(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


def degree(a: Poly) -> int:
    return len(a) - 1  # -1 for the zero polynomial


def add(a: Poly, b: Poly) -> Poly:
    n = max(len(a), len(b))
    return poly((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n))


def neg(a: Poly) -> Poly:
    return tuple(-c for c in a)


def sub(a: Poly, b: Poly) -> Poly:
    return add(a, neg(b))


def scale(a: Poly, c) -> Poly:
    return poly(c * x for x in a)


def mul(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return ZERO
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return poly(out)


def deriv(a: Poly, order: int = 1) -> Poly:
    for _ in range(order):
        a = poly(i * c for i, c in enumerate(a) if i > 0)
    return a


def evaluate(a: Poly, t) -> Fraction:
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * t + c
    return acc


def divmod_poly(a: Poly, b: Poly) -> tuple[Poly, Poly]:
    if not b:
        raise ZeroDivisionError("division by the zero polynomial")
    rem = list(a)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    lead = b[-1]
    for k in range(len(a) - len(b), -1, -1):
        c = rem[k + len(b) - 1] / lead
        q[k] = c
        if c:
            for j, bj in enumerate(b):
                rem[k + j] -= c * bj
    return poly(q), poly(rem[: len(b) - 1])


def monic(a: Poly) -> Poly:
    return scale(a, 1 / a[-1]) if a else a


def gcd(a: Poly, b: Poly) -> Poly:
    while b:
        a, b = b, divmod_poly(a, b)[1]
    return monic(a)


def squarefree(a: Poly) -> Poly:
    """Product of the distinct irreducible factors of ``a`` (made monic)."""
    if degree(a) < 1:
        return monic(a)
    return monic(divmod_poly(a, gcd(a, deriv(a)))[0])


def determinant(matrix: Sequence[Sequence[Poly]]) -> Poly:
    """Leibniz expansion; fine for the small orders used by Wronskians."""
    n = len(matrix)
    total = ZERO
    for perm in permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = ONE
        for row, col in enumerate(perm):
            term = mul(term, matrix[row][col])
            if not term:
                break
        total = sub(total, term) if inversions % 2 else add(total, term)
    return total


def wronskian(polys: Sequence[Poly]) -> Poly:
    """Exact Wronskian ``det[D^i p_j]`` for i, j = 0..k-1."""
    k = len(polys)
    return determinant([[deriv(p, i) for p in polys] for i in range(k)])


def sign(x) -> int:
    return (x > 0) - (x < 0)


def sturm_sequence(a: Poly) -> list[Poly]:
    seq = [a, deriv(a)]
    while seq[-1]:
        seq.append(neg(divmod_poly(seq[-2], seq[-1])[1]))
    return seq[:-1]


def sign_changes(seq: Sequence[Poly], t) -> int:
    signs = [s for s in (sign(evaluate(p, t)) for p in seq) if s]
    return sum(1 for x, y in zip(signs, signs[1:]) if x != y)


def real_roots(a: Poly, lo, hi, resolution=Fraction(1, 2**64)) -> list[Fraction]:
    """Distinct real roots of ``a`` in the open interval ``(lo, hi)``.

    Rational roots met during bisection are returned exactly; any other root
    is returned as the midpoint of an isolating interval narrower than
    ``resolution``.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    s = squarefree(a)
    if degree(s) < 1:
        return []
    # strip roots sitting on the endpoints so Sturm counts are clean
    for end in (lo, hi):
        if evaluate(s, end) == 0:
            s = divmod_poly(s, poly([-end, 1]))[0]
    if degree(s) < 1:
        return []
    seq = sturm_sequence(s)
    roots: list[Fraction] = []

    def count(a_, b_):
        # distinct roots in the open interval (a_, b_); valid for root endpoints
        return sign_changes(seq, a_) - sign_changes(seq, b_) - (evaluate(s, b_) == 0)

    def isolate(a_, b_, n):
        if n == 0:
            return
        mid = (a_ + b_) / 2
        if n == 1 and b_ - a_ < resolution:
            roots.append(mid)
            return
        if evaluate(s, mid) == 0:
            roots.append(mid)
        left = count(a_, mid)
        isolate(a_, mid, left)
        isolate(mid, b_, n - left - (evaluate(s, mid) == 0))

    isolate(lo, hi, count(lo, hi))
    return sorted(roots)


def to_text(a: Poly, var: str = "t") -> str:
    if not a:
        return "0"
    parts = []
    for i, c in enumerate(a):
        if c:
            parts.append(f"{c}" if i == 0 else f"{c}*{var}" + (f"^{i}" if i > 1 else ""))
    return " + ".join(parts)
