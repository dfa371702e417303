from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmonic_widths.errors import DivisionByZeroPolynomial, InputError, NotHomogeneous
from harmonic_widths.symbols import (
    Polynomial2,
    divide,
    factorization_certificate,
    is_strongly_elliptic,
)

P = Polynomial2.parse
LAP = Polynomial2.laplacian()


class TestText:
    def test_biharmonic_text(self):
        assert Polynomial2.laplacian(2).to_text() == "4,0:1 2,2:2 0,4:1"

    def test_roundtrip(self):
        s = "4,0:3/2 3,1:-1 0,4:7"
        assert P(s).to_text() == s

    def test_zero_is_empty(self):
        assert Polynomial2().to_text() == ""
        assert P("").is_zero()

    @pytest.mark.parametrize("bad", ["1,0", "a,b:1", "1,0:x", "-1,0:1"])
    def test_malformed(self, bad):
        with pytest.raises(InputError):
            P(bad)

    def test_no_zero_coefficients_stored(self):
        p = P("2,0:1 0,2:1") - P("2,0:1")
        assert p.terms == {(0, 2): 1}


class TestDivide:
    def test_laplacian_square(self):
        q, r = divide(Polynomial2.laplacian(2), LAP)
        assert q == LAP and r.is_zero()

    def test_polyharmonic_tower(self):
        q, r = divide(Polynomial2.laplacian(3), Polynomial2.laplacian(2))
        assert q == LAP and r.is_zero()

    def test_anisotropic_remainder(self):
        # hand division: xi^4 + eta^4 = (xi^2 - 2 eta^2)(xi^2 + 2 eta^2) + 5 eta^4
        q, r = divide(P("4,0:1 0,4:1"), P("2,0:1 0,2:2"))
        assert q == P("2,0:1 0,2:-2")
        assert r == P("0,4:5")

    def test_isotropic_remainder(self):
        # first step leaves -xi^2 eta^2 + eta^4; second step finishes with 2 eta^4
        q, r = divide(P("4,0:1 0,4:1"), LAP)
        assert q == P("2,0:1 0,2:-1")
        assert r == P("0,4:2")

    def test_zero_divisor(self):
        with pytest.raises(DivisionByZeroPolynomial):
            divide(LAP, Polynomial2())

    def test_remainder_not_divisible_by_leading_term(self):
        num = P("5,1:3 3,3:-2 1,1:1 0,2:4")
        den = P("2,1:2 0,3:1 1,0:1")
        q, r = divide(num, den)
        (la, lb), _ = den.leading_term()
        assert all(not (a >= la and b >= lb) for a, b in r.terms)
        assert q * den + r == num


coeff = st.fractions(min_value=-4, max_value=4, max_denominator=4)


@st.composite
def polynomials(draw, max_deg=4):
    n = draw(st.integers(0, 6))
    terms = {}
    for _ in range(n):
        a = draw(st.integers(0, max_deg))
        b = draw(st.integers(0, max_deg - a))
        terms[(a, b)] = draw(coeff)
    return Polynomial2(terms)


@st.composite
def elliptic_quadratic_forms(draw):
    """``a xi^2 + b eta^2`` with positive ``a, b``, or products of two of them."""
    pos = st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=4)
    q = Polynomial2({(2, 0): draw(pos), (0, 2): draw(pos)})
    if draw(st.booleans()):
        q = q * Polynomial2({(2, 0): draw(pos), (0, 2): draw(pos)})
    return q


class TestDivisionProperties:
    @settings(max_examples=100, deadline=None)
    @given(polynomials(), polynomials())
    def test_identity(self, num, den):
        if den.is_zero():
            return
        q, r = divide(num, den)
        assert q * den + r == num

    @settings(max_examples=50, deadline=None)
    @given(elliptic_quadratic_forms())
    def test_certificate_idempotent(self, q):
        cert = factorization_certificate(q * LAP, LAP)
        assert cert.divides
        assert cert.quotient == q
        assert cert.quotient_elliptic == is_strongly_elliptic(q).ok

    @settings(max_examples=50, deadline=None)
    @given(elliptic_quadratic_forms(), elliptic_quadratic_forms())
    def test_quotient_homogeneous(self, q, l):
        num = q * l
        quot, rem = divide(num, l)
        assert rem.is_zero()
        assert quot.is_homogeneous() and quot.degree == num.degree - l.degree


class TestEllipticity:
    def test_isotropic(self):
        res = is_strongly_elliptic(LAP, 16)
        assert res == (True, 1, 1)

    def test_hyperbolic(self):
        assert not is_strongly_elliptic(P("2,0:1 0,2:-1"), 16).ok

    def test_quartic_bounds(self):
        # min of xi^4 + eta^4 on the circle is 1/2 at 45 degrees, max 1 on the axes
        res = is_strongly_elliptic(P("4,0:1 0,4:1"), 8)
        assert res.ok
        assert res.c0 == Fraction(1, 2)
        assert res.c1 == 1

    def test_odd_degree(self):
        assert not is_strongly_elliptic(P("1,0:1"), 8).ok

    def test_not_homogeneous(self):
        with pytest.raises(NotHomogeneous):
            is_strongly_elliptic(P("2,0:1 0,0:1"), 8)

    def test_negative_definite_counts(self):
        # |p| is what is bounded, so -Laplacian is strongly elliptic too
        assert is_strongly_elliptic(-LAP, 8).ok


class TestCertificate:
    def test_laplacian_square(self):
        cert = factorization_certificate(Polynomial2.laplacian(2), LAP)
        assert (cert.divides, cert.quotient_elliptic) == (True, True)

    def test_anisotropic_product(self):
        aniso = P("2,0:1 0,2:2")
        cert = factorization_certificate(aniso * LAP, LAP)
        assert (cert.divides, cert.quotient_elliptic) == (True, True)
        assert cert.quotient == aniso

    def test_quartic_not_divisible(self):
        cert = factorization_certificate(P("4,0:1 0,4:1"), LAP)
        assert not cert.divides
        assert cert.quotient_elliptic is None

    def test_non_elliptic_quotient(self):
        hyper = P("2,0:1 0,2:-1")
        cert = factorization_certificate(hyper * LAP, LAP)
        assert cert.divides and cert.quotient_elliptic is False
