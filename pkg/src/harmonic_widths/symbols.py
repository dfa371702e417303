"""Exact bivariate symbols of constant-coefficient operators.

A symbol is a polynomial in (xi, eta) with rational coefficients. The
convention throughout the package is that ``xi**2`` stands for the second
partial derivative in x and ``eta**2`` for the one in y, so the Laplacian has
symbol ``xi^2 + eta^2``.

Term order is graded lexicographic with xi > eta: higher total degree first,
ties broken by the larger xi exponent.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, NamedTuple

from .errors import DivisionByZeroPolynomial, InputError, NotHomogeneous

Monomial = tuple  # (a, b)


def grlex_key(mono: Monomial) -> tuple[int, int]:
    a, b = mono
    return (a + b, a)


class Polynomial2:
    """Polynomial in two variables with exact rational coefficients.

    Parameters
    ----------
    terms : mapping
        Map ``(a, b) -> coefficient`` for the monomial ``xi**a * eta**b``.
        Zero coefficients are dropped; anything :class:`Fraction` accepts is
        a valid coefficient.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        clean: dict[Monomial, Fraction] = {}
        for (a, b), c in (terms or {}).items():
            if a < 0 or b < 0:
                raise InputError(f"negative exponent in monomial {(a, b)}")
            c = Fraction(c)
            if c:
                clean[(int(a), int(b))] = clean.get((int(a), int(b)), Fraction(0)) + c
        self._terms = {k: v for k, v in clean.items() if v}

    # -- construction ---------------------------------------------------
    @classmethod
    def xi(cls) -> "Polynomial2":
        return cls({(1, 0): 1})

    @classmethod
    def eta(cls) -> "Polynomial2":
        return cls({(0, 1): 1})

    @classmethod
    def constant(cls, c) -> "Polynomial2":
        return cls({(0, 0): c})

    @classmethod
    def laplacian(cls, power: int = 1) -> "Polynomial2":
        return cls({(2, 0): 1, (0, 2): 1}) ** power

    @classmethod
    def parse(cls, text: str) -> "Polynomial2":
        """Read the ``a,b:c`` whitespace-separated text format."""
        terms: dict[Monomial, Fraction] = {}
        for tok in text.split():
            try:
                mono, coeff = tok.split(":")
                a, b = (int(x) for x in mono.split(","))
                c = Fraction(coeff)
            except ValueError as exc:
                raise InputError(f"malformed term {tok!r}") from exc
            if a < 0 or b < 0:
                raise InputError(f"negative exponent in term {tok!r}")
            terms[(a, b)] = terms.get((a, b), Fraction(0)) + c
        return cls(terms)

    # -- inspection -----------------------------------------------------
    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((a + b for a, b in self._terms), default=-1)

    def monomials(self) -> list[Monomial]:
        """Monomials in descending term order."""
        return sorted(self._terms, key=grlex_key, reverse=True)

    def leading_term(self) -> tuple[Monomial, Fraction]:
        if not self._terms:
            raise DivisionByZeroPolynomial("the zero polynomial has no leading term")
        mono = max(self._terms, key=grlex_key)
        return mono, self._terms[mono]

    def is_homogeneous(self) -> bool:
        return len({a + b for a, b in self._terms}) <= 1

    def has_even_powers_only(self) -> bool:
        return all(a % 2 == 0 and b % 2 == 0 for a, b in self._terms)

    def __call__(self, x, y):
        return sum((c * x**a * y**b for (a, b), c in self._terms.items()), Fraction(0))

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other: "Polynomial2") -> "Polynomial2":
        out = dict(self._terms)
        for k, v in _coerce(other)._terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return Polynomial2(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial2":
        return Polynomial2({k: -v for k, v in self._terms.items()})

    def __sub__(self, other: "Polynomial2") -> "Polynomial2":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Polynomial2":
        return _coerce(other) - self

    def __mul__(self, other) -> "Polynomial2":
        other = _coerce(other)
        out: dict[Monomial, Fraction] = {}
        for (a1, b1), c1 in self._terms.items():
            for (a2, b2), c2 in other._terms.items():
                k = (a1 + a2, b1 + b2)
                out[k] = out.get(k, Fraction(0)) + c1 * c2
        return Polynomial2(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial2":
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial2.constant(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Polynomial2.constant(other)
        if not isinstance(other, Polynomial2):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    # -- text -----------------------------------------------------------
    def to_text(self) -> str:
        """Bit-exact text form; the zero polynomial is the empty string."""
        return " ".join(f"{a},{b}:{self._terms[(a, b)]}" for a, b in self.monomials())

    __str__ = to_text

    def __repr__(self) -> str:
        return f"Polynomial2.parse({self.to_text()!r})"


def _coerce(x) -> Polynomial2:
    if isinstance(x, Polynomial2):
        return x
    if isinstance(x, (int, Fraction)):
        return Polynomial2.constant(x)
    raise TypeError(f"cannot combine Polynomial2 with {type(x).__name__}")


def divide(num: Polynomial2, den: Polynomial2) -> tuple[Polynomial2, Polynomial2]:
    """Long division in grlex order.

    Returns ``(q, r)`` with ``num == q * den + r`` and no monomial of ``r``
    divisible by the leading monomial of ``den``.

    Raises
    ------
    DivisionByZeroPolynomial
        If ``den`` is zero.
    """
    if den.is_zero():
        raise DivisionByZeroPolynomial("divisor is the zero polynomial")
    (la, lb), lc = den.leading_term()
    dterms = den.terms
    work = num.terms
    quot: dict[Monomial, Fraction] = {}
    rem: dict[Monomial, Fraction] = {}
    while work:
        mono = max(work, key=grlex_key)
        c = work[mono]
        a, b = mono
        if a >= la and b >= lb:
            shift = (a - la, b - lb)
            f = c / lc
            quot[shift] = quot.get(shift, Fraction(0)) + f
            for (da, db), dc in dterms.items():
                k = (da + shift[0], db + shift[1])
                v = work.get(k, Fraction(0)) - f * dc
                if v:
                    work[k] = v
                else:
                    work.pop(k, None)
        else:
            rem[mono] = c
            del work[mono]
    return Polynomial2(quot), Polynomial2(rem)


def circle_directions(samples: int) -> list[tuple[Fraction, Fraction]]:
    """Rational direction vectors for ``theta_i = pi * i / samples``.

    Generic directions are the rational circle points
    ``((1 - s^2)/(1 + s^2), 2s/(1 + s^2))`` with ``s`` a rational close to
    ``tan(theta/2)``. Multiples of ``pi/4`` are snapped to the exact
    vectors ``(1, 0)``, ``(1, 1)``, ``(0, 1)`` and ``(-1, 1)``; these are not
    unit length, which is harmless because callers divide by the matching
    power of ``xi^2 + eta^2``. The upper half circle suffices for
    even-degree symbols.
    """
    if samples < 1:
        raise InputError("samples must be positive")
    exact = {0: (1, 0), 1: (1, 1), 2: (0, 1), 3: (-1, 1)}
    out = []
    for i in range(samples):
        if (4 * i) % samples == 0:
            x, y = exact[4 * i // samples]
            out.append((Fraction(x), Fraction(y)))
            continue
        s = Fraction(math.tan(math.pi * i / samples / 2)).limit_denominator(10**12)
        d = 1 + s * s
        out.append(((1 - s * s) / d, 2 * s / d))
    return out


class EllipticityCheck(NamedTuple):
    ok: bool
    c0: Fraction
    c1: Fraction


def is_strongly_elliptic(p: Polynomial2, samples: int = 64) -> EllipticityCheck:
    """Sample-based strong-ellipticity test.

    Evaluates ``|p(xi, eta)| / (xi^2 + eta^2)^m`` exactly along the
    directions of :func:`circle_directions`; ``c0`` and ``c1`` are the
    smallest and largest values seen. These are bounds over the samples
    only, not global certificates. A symbol that takes both signs is
    rejected even when no sample hits a zero exactly.

    Raises
    ------
    NotHomogeneous
        If ``p`` is zero or not homogeneous.
    """
    if p.is_zero() or not p.is_homogeneous():
        raise NotHomogeneous(f"symbol {p.to_text()!r} is not homogeneous")
    deg = p.degree
    if deg % 2:
        return EllipticityCheck(False, Fraction(0), Fraction(0))
    m = deg // 2
    vals = [p(x, y) / (x * x + y * y) ** m for x, y in circle_directions(samples)]
    mags = [abs(v) for v in vals]
    c0, c1 = min(mags), max(mags)
    ok = c0 > 0 and len({v > 0 for v in vals}) == 1
    return EllipticityCheck(ok, c0, c1)


class FactorizationCertificate(NamedTuple):
    divides: bool
    quotient_elliptic: bool | None
    quotient: Polynomial2
    remainder: Polynomial2


def factorization_certificate(
    P: Polynomial2, L: Polynomial2, samples: int = 64
) -> FactorizationCertificate:
    """Check ``P = Q * L`` exactly and whether ``Q`` is strongly elliptic.

    ``quotient_elliptic`` is ``None`` when the division leaves a remainder.
    """
    if not (P.is_homogeneous() and L.is_homogeneous()):
        raise NotHomogeneous("both symbols must be homogeneous")
    if P.degree < L.degree:
        raise InputError("deg P must be at least deg L")
    q, r = divide(P, L)
    if not r.is_zero():
        return FactorizationCertificate(False, None, q, r)
    return FactorizationCertificate(True, is_strongly_elliptic(q, samples).ok, q, r)
