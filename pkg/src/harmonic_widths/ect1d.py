"""One-dimensional ECT systems.

An ECT system on ``[a, b]`` is generated by positive weights
``rho_1, ..., rho_N`` through nested integration::

    v_1 = rho_1
    v_2 = rho_1 * int_a^t rho_2
    v_3 = rho_1 * int_a^t rho_2 * int_a^s rho_3
    ...

Its Wronskians factor as ``W_k = rho_1^k rho_2^(k-1) ... rho_k`` and the
weights are recovered from them by ``rho_1 = W_1``, ``rho_2 = W_2 / W_1^2``
and ``rho_k = W_k W_(k-2) / W_(k-1)^2``.

Sampled quantities live on a uniform grid. Exact partitioning of polynomial
bases into sign-stable segments uses rational arithmetic (see
:mod:`harmonic_widths.upoly`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import upoly
from .errors import (
    DependentBasis,
    GridTooCoarse,
    InputError,
    NonPositiveWeight,
    ZeroWronskian,
)

MIN_QUAD = 16


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise InputError(f"interval needs a < b, got ({self.a}, {self.b})")

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.a, self.b, n)


class Sampled(NamedTuple):
    """Function values ``values`` at nodes ``t``."""

    t: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class WeightSystem:
    """Weights sampled on a uniform grid of ``n_quad`` nodes.

    ``values`` has shape ``(N, n_quad)``. Between nodes the weights are
    piecewise linear (see :meth:`evaluate`). Positivity is checked by
    :func:`build_ect`, not here, so recovered weights that change sign can
    still be represented.
    """

    interval: Interval
    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[0] < 1:
            raise InputError("need at least one weight")
        if v.shape[1] < MIN_QUAD:
            raise GridTooCoarse(f"n_quad = {v.shape[1]} < {MIN_QUAD}")
        if not np.all(np.isfinite(v)):
            raise InputError("weights must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_functions(
        cls, interval: Interval, funcs: Sequence[Callable[[np.ndarray], np.ndarray]], n_quad: int
    ) -> "WeightSystem":
        t = interval.grid(n_quad)
        return cls(interval, np.array([np.broadcast_to(f(t), t.shape) for f in funcs], dtype=float))

    @classmethod
    def constant(cls, interval: Interval, consts: Sequence[float], n_quad: int) -> "WeightSystem":
        return cls(interval, np.outer(np.asarray(consts, dtype=float), np.ones(n_quad)))

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n_quad(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.interval.grid(self.n_quad)

    @property
    def h(self) -> float:
        return (self.interval.b - self.interval.a) / (self.n_quad - 1)

    def evaluate(self, j: int, x) -> np.ndarray:
        """Piecewise-linear interpolant of ``rho_(j+1)`` (zero-based ``j``)."""
        return np.interp(x, self.t, self.values[j])


@dataclass(frozen=True)
class EctBasis:
    weights: WeightSystem
    basis: np.ndarray
    wronskians: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.weights.t

    @property
    def N(self) -> int:
        return self.basis.shape[0]


def build_ect(weights: WeightSystem) -> EctBasis:
    """Nested trapezoid integration from the left endpoint.

    Wronskians come from the product formula, not from differentiation.

    Raises
    ------
    NonPositiveWeight
        If some weight is not strictly positive at a node.
    """
    rho = weights.values
    bad = np.argwhere(rho <= 0)
    if bad.size:
        j, i = bad[0]
        raise NonPositiveWeight(f"rho_{j + 1} = {rho[j, i]:g} at t = {weights.t[i]:g}")
    t = weights.t
    N = weights.N
    basis = np.empty_like(rho)
    for k in range(N):
        g = rho[k]
        for j in range(k - 1, -1, -1):
            g = rho[j] * cumulative_trapezoid(g, t, initial=0.0)
        basis[k] = g
    logs = np.log(rho)
    wr = np.empty_like(rho)
    for k in range(N):
        expo = np.arange(k + 1, 0, -1, dtype=float)
        wr[k] = np.exp(expo @ logs[: k + 1])
    return EctBasis(weights, basis, wr)


def central_stencil(order: int) -> np.ndarray:
    """Centred weights for the ``order``-th derivative, second-order accurate.

    The half-width is ``max(1, (order + 1) // 2)``; the result multiplies
    samples at offsets ``-r..r`` and must be divided by ``h**order``.
    """
    if order == 0:
        return np.array([1.0])
    r = max(1, (order + 1) // 2)
    x = np.arange(-r, r + 1, dtype=float)
    V = np.vander(x, increasing=True).T
    rhs = np.zeros(2 * r + 1)
    rhs[order] = factorial(order)
    return np.linalg.solve(V, rhs)


def _diff(values: np.ndarray, order: int, h: float, trim: int) -> np.ndarray:
    """Centred derivative along the last axis on nodes ``trim..n-1-trim``."""
    w = central_stencil(order)
    r = (len(w) - 1) // 2
    n = values.shape[-1]
    out = np.zeros(values.shape[:-1] + (n - 2 * trim,))
    for i, c in enumerate(w):
        off = i - r
        out += c * values[..., trim + off : n - trim + off]
    return out / h**order


def wronskian_numeric(values: np.ndarray, k: int, t: np.ndarray) -> Sampled:
    """Wronskian of the first ``k`` rows of ``values`` by finite differences.

    Derivatives of orders ``0..k-1`` use centred stencils; ``k`` nodes are
    dropped at each end so every order shares the same node set.

    Raises
    ------
    GridTooCoarse
        If there are fewer than ``2k + 1`` nodes.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    t = np.asarray(t, dtype=float)
    n = t.size
    if k < 1 or k > values.shape[0]:
        raise InputError(f"k = {k} outside 1..{values.shape[0]}")
    if n < 2 * k + 1:
        raise GridTooCoarse(f"{n} nodes cannot support a order-{k} Wronskian")
    h = t[1] - t[0]
    rows = values[:k]
    mats = np.stack([_diff(rows, d, h, k) for d in range(k)], axis=0)  # (d, j, node)
    W = np.linalg.det(np.moveaxis(mats, -1, 0))
    return Sampled(t[k : n - k], W)


def recover_weights(basis: EctBasis, *, method: str = "numeric") -> WeightSystem:
    """Invert the Wronskian product formula.

    With ``method="numeric"`` (default) the Wronskians are recomputed from
    the basis samples by :func:`wronskian_numeric` and the result lives on
    the grid with ``N`` nodes trimmed at each end. ``method="product"`` uses
    the stored Wronskians on the full grid.

    Raises
    ------
    ZeroWronskian
        If some ``W_k`` vanishes at a node.
    """
    N = basis.N
    t = basis.t
    if method == "numeric":
        W = []
        for k in range(1, N + 1):
            s = wronskian_numeric(basis.basis, k, t)
            trim = N - k
            W.append(s.values[trim : s.values.size - trim] if trim else s.values)
        W = np.array(W)
        tt = t[N : t.size - N]
    elif method == "product":
        W = basis.wronskians
        tt = t
    else:
        raise InputError(f"unknown method {method!r}")
    rho = weights_from_wronskians(W)
    return WeightSystem(Interval(float(tt[0]), float(tt[-1])), rho)


def weights_from_wronskians(W: np.ndarray) -> np.ndarray:
    W = np.atleast_2d(W)
    if np.any(W == 0):
        k, i = np.argwhere(W == 0)[0]
        raise ZeroWronskian(f"W_{k + 1} vanishes at node {i}")
    rho = np.empty_like(W)
    rho[0] = W[0]
    if W.shape[0] > 1:
        rho[1] = W[1] / W[0] ** 2
    for k in range(2, W.shape[0]):
        rho[k] = W[k] * W[k - 2] / W[k - 1] ** 2
    return rho


def apply_LN(weights: WeightSystem, u: np.ndarray) -> Sampled:
    """Apply ``D(1/rho_N) ... D(1/rho_1)`` to samples ``u``.

    Each step divides by a weight and takes a centred first difference, so
    one node is lost at each end per step.

    Raises
    ------
    GridTooCoarse
        If fewer than ``2N + 1`` nodes are available.
    """
    u = np.asarray(u, dtype=float)
    N, n = weights.N, weights.n_quad
    if u.shape != (n,):
        raise InputError(f"u must have {n} samples")
    if n < 2 * N + 1:
        raise GridTooCoarse(f"{n} nodes cannot support L_{N}")
    h = weights.h
    g = u
    for j in range(N):
        rho = weights.values[j, j : n - j]
        g = g / rho
        g = (g[2:] - g[:-2]) / (2 * h)
    t = weights.t
    return Sampled(t[N : n - N], g)


# ---------------------------------------------------------------------------
# exact partition of polynomial bases


RationalFunction = tuple  # (numerator Poly, denominator Poly)


@dataclass(frozen=True)
class EctPartition:
    """Sign-stable segments of the Wronskians of a polynomial basis.

    ``breakpoints`` runs from ``a`` to ``b`` inclusive; ``roots`` holds just
    the interior zeros. ``segment_signs[i]`` is the sign vector of
    ``(W_1, ..., W_N)`` on ``(breakpoints[i], breakpoints[i+1])``.
    """

    interval: Interval
    breakpoints: tuple
    segment_signs: tuple
    wronskians: tuple = field(repr=False)

    @property
    def roots(self) -> tuple:
        return self.breakpoints[1:-1]

    @property
    def ect_segments(self) -> tuple:
        return tuple(all(s > 0 for s in sv) for sv in self.segment_signs)


def exact_wronskians(polys: Sequence) -> list:
    polys = [upoly.poly(p) for p in polys]
    return [upoly.wronskian(polys[:k]) for k in range(1, len(polys) + 1)]


def piecewise_partition(basis: Sequence, interval: Interval) -> EctPartition:
    """Split ``interval`` where some exact Wronskian changes sign or vanishes.

    ``basis`` is a sequence of polynomials given by ascending coefficients
    (anything :class:`fractions.Fraction` accepts). Irrational roots are
    reported as rationals within ``2**-64``.

    Raises
    ------
    DependentBasis
        If some ``W_k`` is the zero polynomial.
    """
    if not basis:
        raise InputError("empty basis")
    W = exact_wronskians(basis)
    for k, w in enumerate(W, start=1):
        if not w:
            raise DependentBasis(f"W_{k} vanishes identically")
    a, b = Fraction(interval.a), Fraction(interval.b)
    prod = upoly.ONE
    for w in W:
        prod = upoly.mul(prod, upoly.squarefree(w))
    roots = upoly.real_roots(prod, a, b)
    bps = (a, *roots, b)
    signs = []
    for lo, hi in zip(bps, bps[1:]):
        mid = (lo + hi) / 2
        signs.append(tuple(upoly.sign(upoly.evaluate(w, mid)) for w in W))
    return EctPartition(interval, bps, tuple(signs), tuple(W))


def recover_weights_exact(basis: Sequence) -> list:
    """Weights of a polynomial basis as reduced rational functions.

    Returns a list of ``(num, den)`` pairs, with ``den`` monic.

    Raises
    ------
    DependentBasis
        If some ``W_k`` is the zero polynomial.
    """
    W = exact_wronskians(basis)
    for k, w in enumerate(W, start=1):
        if not w:
            raise DependentBasis(f"W_{k} vanishes identically")
    out = [_reduce(W[0], upoly.ONE)]
    if len(W) > 1:
        out.append(_reduce(W[1], upoly.mul(W[0], W[0])))
    for k in range(2, len(W)):
        out.append(_reduce(upoly.mul(W[k], W[k - 2]), upoly.mul(W[k - 1], W[k - 1])))
    return out


def _reduce(num, den) -> RationalFunction:
    g = upoly.gcd(num, den)
    num = upoly.divmod_poly(num, g)[0]
    den = upoly.divmod_poly(den, g)[0]
    lead = den[-1]
    return upoly.scale(num, 1 / lead), upoly.scale(den, 1 / lead)


def evaluate_rational(rf: RationalFunction, t) -> Fraction:
    num, den = rf
    d = upoly.evaluate(den, t)
    if d == 0:
        raise ZeroDivisionError(f"pole at t = {t}")
    return upoly.evaluate(num, t) / d


def heaviside_surrogate(eps) -> dict:
    """Polynomial pieces of the smoothed step example.

    With ``u_1 = chi t^2 + eps`` and ``u_2 = t^2``, where ``chi`` is the unit
    step at 0, the basis is ``(eps, t^2)`` on ``(-1, 0)`` and
    ``(t^2 + eps, t^2)`` on ``(0, 1)``. Both pieces have ``W_2 = 2 eps t``.
    """
    eps = Fraction(eps)
    return {
        "left": (Interval(-1.0, 0.0), [upoly.poly([eps]), upoly.poly([0, 0, 1])]),
        "right": (Interval(0.0, 1.0), [upoly.poly([eps, 0, 1]), upoly.poly([0, 0, 1])]),
        "whole": (Interval(-1.0, 1.0), [upoly.poly([eps, 0, 1]), upoly.poly([0, 0, 1])]),
    }
