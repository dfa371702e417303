"""Discrete spectral problem for the 1D ellipsoid ``{f : ||f^(p)|| <= 1}``.

The quadratic form ``||f^(p)||^2`` is discretised as ``A = B^T (h I) B``
where ``B`` is the p-th forward difference scaled by ``h^-p``. Using the
form directly (rather than a strong-form stencil with one-sided closures)
imposes the natural boundary conditions weakly, keeps ``A`` exactly
symmetric, and makes its kernel exactly the sampled polynomials of degree
below ``p``. The L2 inner product uses the trapezoid mass ``M``.

Eigenvalues are indexed from 1 and include the zero block, so the width of
the ellipsoid relative to N-dimensional subspaces is ``1/sqrt(lambda_(N+1))``
for ``N >= p`` and infinite below that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import EigenFailure, GridTooCoarse, InputError, InsufficientSpectrum

MAX_P = 4
RESIDUAL_TOL = 1e-10


def spacing(n: int) -> float:
    return 1.0 / (n - 1)


def derivative_map(p: int, n: int) -> sp.csr_matrix:
    """Scaled p-th forward difference, shape ``(n - p, n)``."""
    if not 1 <= p <= MAX_P:
        raise InputError(f"p must be in 1..{MAX_P}, got {p}")
    if n < p + 1:
        raise GridTooCoarse(f"n = {n} too small for p = {p}")
    coeffs = [(-1) ** (p - k) * math.comb(p, k) for k in range(p + 1)]
    B = sp.diags(coeffs, offsets=list(range(p + 1)), shape=(n - p, n), format="csr")
    return B * spacing(n) ** (-p)


def trapezoid_mass(n: int) -> np.ndarray:
    w = np.full(n, spacing(n))
    w[[0, -1]] *= 0.5
    return w


def assemble_gram(p: int, n: int) -> sp.csr_matrix:
    """Stiffness form ``A = B^T (h I) B`` of the p-th derivative.

    Raises
    ------
    GridTooCoarse
        If ``n < 4p + 4``.
    """
    if n < 4 * p + 4:
        raise GridTooCoarse(f"n = {n} < 4p + 4 = {4 * p + 4}")
    B = derivative_map(p, n)
    return (B.T @ B * spacing(n)).tocsr()


def kernel_basis(p: int, n: int) -> np.ndarray:
    """Mass-orthonormal basis of sampled polynomials of degree < p, shape (n, p)."""
    t = np.linspace(0.0, 1.0, n)
    w = trapezoid_mass(n)
    V = np.vander(2 * t - 1, p, increasing=True)
    Q, _ = np.linalg.qr(np.sqrt(w)[:, None] * V)
    return Q / np.sqrt(w)[:, None]


@dataclass(frozen=True)
class Spectrum1D:
    """Lowest eigenpairs of ``A x = lambda M x``, zero block first.

    ``eigenvectors[:, j]`` is ``psi_(j+1)``; columns are orthonormal in the
    trapezoid inner product.
    """

    p: int
    n: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def mass(self) -> np.ndarray:
        return trapezoid_mass(self.n)

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    def inner(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        return f.T @ (self.mass[:, None] * g if g.ndim > 1 else self.mass * g)

    def gram(self) -> np.ndarray:
        X = self.eigenvectors
        return X.T @ (self.mass[:, None] * X)


def solve_spectrum(p: int, n: int, count: int) -> Spectrum1D:
    """Lowest ``count`` eigenpairs of the discrete problem.

    The zero block is filled with the exact kernel. Positive modes come
    from a banded symmetric solve of ``M^-1/2 A M^-1/2``, are made
    mass-orthogonal to the kernel, and their eigenvalues are taken as
    Rayleigh quotients in factored form ``||B x||^2 h / ||x||_M^2``.

    Raises
    ------
    EigenFailure
        If a returned pair has relative residual above ``1e-10``.
    """
    if count < 1 or count > n:
        raise InputError(f"count must be in 1..{n}")
    A = assemble_gram(p, n)
    B = derivative_map(p, n)
    w = trapezoid_mass(n)
    s = 1.0 / np.sqrt(w)
    K = kernel_basis(p, n)
    nk = min(p, count)
    vals = np.zeros(count)
    vecs = np.empty((n, count))
    vecs[:, :nk] = K[:, :nk]
    if count > p:
        C = sp.diags(s) @ A @ sp.diags(s)
        ab = np.zeros((p + 1, n))
        for d in range(p + 1):
            ab[p - d, d:] = C.diagonal(d)
        _, Y = sla.eig_banded(ab, lower=False, select="i", select_range=(p, count - 1))
        X = s[:, None] * Y
        X -= K @ (K.T @ (w[:, None] * X))
        # re-orthonormalise in the mass inner product
        G = X.T @ (w[:, None] * X)
        X = X @ np.linalg.inv(np.linalg.cholesky(G)).T
        BX = B @ X
        lam = spacing(n) * np.sum(BX * BX, axis=0) / np.sum(w[:, None] * X * X, axis=0)
        order = np.argsort(lam)
        lam, X = lam[order], X[:, order]
        # fix sign so the left endpoint value is nonnegative
        X *= np.where(X[0] < 0, -1.0, 1.0)
        R = A @ X - (w[:, None] * X) * lam
        scale = np.abs(A).sum(axis=1).max() * np.abs(X).max(axis=0)
        rel = np.abs(R).max(axis=0) / scale
        if np.any(rel > RESIDUAL_TOL):
            j = int(np.argmax(rel))
            raise EigenFailure(f"mode {p + j + 1}: relative residual {rel[j]:.2e}")
        vals[p:] = lam
        vecs[:, p:] = X
    return Spectrum1D(p, n, vals, vecs)


@dataclass(frozen=True)
class WidthValue:
    """Width on the extended real line; ``math.inf`` marks an infinite width."""

    value: float
    N: int
    p: int

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


def kolmogorov_width(spectrum: Spectrum1D, N: int) -> WidthValue:
    """``1/sqrt(lambda_(N+1))`` for ``N >= p``, infinite otherwise.

    Raises
    ------
    InsufficientSpectrum
        If fewer than ``N + 1`` eigenvalues are held.
    """
    if N < 0:
        raise InputError("N must be nonnegative")
    if N < spectrum.p:
        return WidthValue(math.inf, N, spectrum.p)
    if spectrum.count < N + 1:
        raise InsufficientSpectrum(f"need {N + 1} eigenvalues, have {spectrum.count}")
    return WidthValue(1.0 / math.sqrt(spectrum.eigenvalues[N]), N, spectrum.p)


class JacksonResult(NamedTuple):
    residual: float
    bound: float
    member: bool


def energy(p: int, f: np.ndarray) -> float:
    """Discrete ``||f^(p)||^2``, i.e. ``sum_j lambda_j f_j^2``."""
    Bf = derivative_map(p, f.size) @ f
    return float(spacing(f.size) * Bf @ Bf)


def jackson_residual(
    spectrum: Spectrum1D, f: np.ndarray, N: int, tol: float = 1e-12
) -> JacksonResult:
    """Truncation error of the eigen-expansion of ``f`` after ``N`` terms.

    ``residual`` is the mass norm of ``f`` minus its projection onto
    ``psi_1..psi_N``; ``member`` tests ``sum_j lambda_j f_j^2 <= 1 + tol``.
    """
    p = spectrum.p
    if N < p:
        raise InputError(f"N = {N} < p = {p}")
    if spectrum.count < N + 1:
        raise InsufficientSpectrum(f"need {N + 1} eigenvalues, have {spectrum.count}")
    f = np.asarray(f, dtype=float)
    w = spectrum.mass
    P = spectrum.eigenvectors[:, :N]
    tail = f - P @ (P.T @ (w * f))
    residual = math.sqrt(max(float(tail @ (w * tail)), 0.0))
    bound = 1.0 / math.sqrt(spectrum.eigenvalues[N])
    return JacksonResult(residual, bound, energy(p, f) <= 1 + tol)


def random_member(
    spectrum: Spectrum1D, rng: np.random.Generator, level: float = 0.99
) -> np.ndarray:
    """Random ``f`` with ``sum_j lambda_j f_j^2 = level`` over the held modes.

    Kernel coefficients are drawn freely; they do not enter the energy.
    """
    p = spectrum.p
    c = rng.standard_normal(spectrum.count)
    lam = spectrum.eigenvalues
    e = float(np.sum(lam[p:] * c[p:] ** 2))
    c[p:] *= math.sqrt(level / e)
    return spectrum.eigenvectors @ c


def random_grid_member(
    p: int, n: int, rng: np.random.Generator, level: float = 0.99
) -> np.ndarray:
    """Random grid function scaled to discrete energy ``level``."""
    f = rng.standard_normal(n)
    return f * math.sqrt(level / energy(p, f))

