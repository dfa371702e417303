"""Constant-coefficient elliptic operators on a uniform grid of the unit square.

Fields are vectors over the ``m x m`` lattice in row-major order: node
``(ix, iy)`` with coordinates ``(ix*h, iy*h)`` sits at index ``ix*m + iy``.
An operator of order ``2p`` is a matrix ``L`` mapping all nodes to
``interior(p)``, the nodes at distance at least ``p`` from the edge. Its
kernel is the discrete analogue of the L-harmonic functions; the frame of
width ``p`` outside ``interior(p)`` is the boundary band.

The inner product is ``<u, v> = h^2 sum u v`` on both sides of ``L``, so
the adjoint of ``L`` is its transpose. Eigenfunctions of ``L^T L`` are
built in two stages: first the clamped problem ``L L^T phi = mu phi`` on
the interior, then the lift ``psi = L^T (L L^T)^-1 phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    EigenFailure,
    GridTooCoarse,
    InputError,
    NotElliptic,
    NotHomogeneous,
    OddSymbol,
    ResidualTooLarge,
    SingularSystem,
)
from .symbols import Polynomial2, is_strongly_elliptic

DENSE_MAX_M = 33
EIG_TOL = 1e-10
LIFT_TOL = 1e-8


@dataclass(frozen=True)
class RectGrid:
    """Uniform ``m x m`` lattice on the unit square."""

    m: int

    def __post_init__(self):
        if self.m < 5:
            raise GridTooCoarse(f"m = {self.m} < 5")

    @property
    def h(self) -> float:
        return 1.0 / (self.m - 1)

    @property
    def size(self) -> int:
        return self.m * self.m

    @property
    def coords(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X, Y)`` as flat arrays in field order."""
        X, Y = np.meshgrid(self.coords, self.coords, indexing="ij")
        return X.ravel(), Y.ravel()

    def sample(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        X, Y = self.mesh()
        return np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape).copy()

    def check_order(self, p: int) -> None:
        if p < 1:
            raise InputError(f"p must be positive, got {p}")
        if self.m < 2 * p + 3:
            raise GridTooCoarse(f"m = {self.m} < 2p + 3 = {2 * p + 3}")

    def ring(self) -> np.ndarray:
        """Distance of each node to the nearest edge, in nodes."""
        i = np.arange(self.m)
        d = np.minimum(i, self.m - 1 - i)
        return np.minimum.outer(d, d).ravel()

    def interior_mask(self, p: int) -> np.ndarray:
        return self.ring() >= p

    def interior(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.interior_mask(p))

    def band(self, p: int) -> np.ndarray:
        return np.flatnonzero(~self.interior_mask(p))


def _second_difference_power(k: int, m: int, p: int) -> sp.csr_matrix:
    """``[1, -2, 1]`` composed ``k`` times, rows ``p..m-1-p``, unscaled."""
    rows = m - 2 * p
    if k == 0:
        return sp.eye(rows, m, k=p, format="csr")
    stencil = np.array([1.0])
    for _ in range(k):
        stencil = np.convolve(stencil, [1.0, -2.0, 1.0])
    offsets = [p - k + j for j in range(2 * k + 1)]
    return sp.diags(stencil, offsets=offsets, shape=(rows, m), format="csr")


def validate_symbol(symbol: Polynomial2, p: int, samples: int = 64) -> None:
    """Raise unless ``symbol`` is a usable strongly elliptic symbol of order 2p."""
    if symbol.is_zero() or not symbol.is_homogeneous():
        raise NotHomogeneous(f"symbol {symbol.to_text()!r} is not homogeneous")
    if symbol.degree != 2 * p:
        raise InputError(f"symbol has degree {symbol.degree}, expected {2 * p}")
    if not symbol.has_even_powers_only():
        raise OddSymbol(f"symbol {symbol.to_text()!r} has odd powers")
    if not is_strongly_elliptic(symbol, samples).ok:
        raise NotElliptic(f"symbol {symbol.to_text()!r} is not strongly elliptic")


@dataclass(frozen=True)
class EllipticOperator2D:
    """Discrete operator of order ``2p``: ``matrix`` maps all nodes to interior(p)."""

    p: int
    symbol: Polynomial2
    grid: RectGrid
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def h_scale(self) -> float:
        return self.grid.h ** (-2 * self.p)

    @property
    def interior(self) -> np.ndarray:
        return self.grid.interior(self.p)

    @property
    def band(self) -> np.ndarray:
        return self.grid.band(self.p)

    @property
    def n_interior(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def interior_block(self) -> sp.csc_matrix:
        return self.matrix[:, self.interior].tocsc()

    def perturbed(self, row: int, col: int, rel: float) -> "EllipticOperator2D":
        """Copy with one entry scaled by ``1 + rel`` (fault injection)."""
        L = self.matrix.tolil(copy=True)
        L[row, col] = L[row, col] * (1 + rel)
        return EllipticOperator2D(self.p, self.symbol, self.grid, L.tocsr())


def assemble(symbol: Polynomial2, p: int, grid: RectGrid) -> EllipticOperator2D:
    """Stencil of ``symbol`` with ``xi^2 -> d^2/dx^2`` and ``eta^2 -> d^2/dy^2``.

    Each term ``c xi^(2i) eta^(2j)`` contributes ``c`` times the tensor
    product of the ``i``-fold and ``j``-fold composed second differences,
    so for ``(xi^2 + eta^2)^p`` the result is the p-fold composed 5-point
    Laplacian.

    Raises
    ------
    NotHomogeneous, OddSymbol, NotElliptic
        If the symbol is unusable.
    """
    grid.check_order(p)
    validate_symbol(symbol, p)
    m = grid.m
    L = None
    for (a, b), c in symbol.terms.items():
        term = sp.kron(
            _second_difference_power(a // 2, m, p),
            _second_difference_power(b // 2, m, p),
            format="csr",
        ) * float(c)
        L = term if L is None else L + term
    L = (L * grid.h ** (-2 * p)).tocsr()
    L.eliminate_zeros()
    return EllipticOperator2D(p, symbol, grid, L)


def laplacian_power(p: int, grid: RectGrid) -> EllipticOperator2D:
    return assemble(Polynomial2.laplacian(p), p, grid)


@dataclass(frozen=True)
class BoundaryData:
    """Values on the boundary band, one array per ring.

    ``layers[j]`` holds the values on the nodes at distance ``j`` from the
    edge, in field order. Pinning the ``p`` rings is the discrete form of
    prescribing ``p`` normal derivatives.
    """

    grid: RectGrid
    layers: tuple

    def __post_init__(self):
        ring = self.grid.ring()
        for j, layer in enumerate(self.layers):
            if np.asarray(layer).shape != (int(np.sum(ring == j)),):
                raise InputError(f"layer {j} has the wrong number of nodes")

    @property
    def p(self) -> int:
        return len(self.layers)

    @classmethod
    def from_field(cls, grid: RectGrid, u: np.ndarray, p: int) -> "BoundaryData":
        ring = grid.ring()
        return cls(grid, tuple(np.asarray(u, dtype=float)[ring == j].copy() for j in range(p)))

    @classmethod
    def from_function(cls, grid: RectGrid, f: Callable, p: int) -> "BoundaryData":
        return cls.from_field(grid, grid.sample(f), p)

    @classmethod
    def zeros(cls, grid: RectGrid, p: int) -> "BoundaryData":
        return cls.from_field(grid, np.zeros(grid.size), p)

    def to_field(self) -> np.ndarray:
        u = np.zeros(self.grid.size)
        ring = self.grid.ring()
        for j, layer in enumerate(self.layers):
            u[ring == j] = layer
        return u


def solve_dirichlet(
    op: EllipticOperator2D, rhs: np.ndarray, boundary: BoundaryData
) -> np.ndarray:
    """Solve ``L u = rhs`` on interior(p) with the band pinned to ``boundary``.

    ``rhs`` is either a full-grid field (only interior values are read) or
    a vector over interior(p).

    Raises
    ------
    SingularSystem
        If the interior block cannot be factorised.
    ResidualTooLarge
        If the solve misses the ``1e-10`` relative residual.
    """
    if boundary.p != op.p or boundary.grid != op.grid:
        raise InputError("boundary data does not match the operator")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape == (op.grid.size,):
        rhs = rhs[op.interior]
    if rhs.shape != (op.n_interior,):
        raise InputError("rhs has the wrong shape")
    u = boundary.to_field()
    b = rhs - op.matrix @ u
    try:
        lu = spla.splu(op.interior_block())
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    u[op.interior] = lu.solve(b)
    res = op.matrix @ u - rhs
    scale = abs(op.matrix).sum(axis=1).max() * max(np.abs(u).max(), 1e-300) + np.abs(rhs).max()
    if np.abs(res).max() > 1e-10 * scale:
        raise ResidualTooLarge(f"Dirichlet residual {np.abs(res).max():.2e}")
    return u


class ClampedPair(NamedTuple):
    mu: float
    phi: np.ndarray


def clamped_spectrum(op: EllipticOperator2D, count: int) -> list[ClampedPair]:
    """Lowest eigenpairs of ``L L^T`` on interior(p).

    Dense LAPACK (tridiagonal reduction and implicit QL) is used for
    ``m <= 33``; shift-invert Lanczos around zero above that. Each
    eigenvalue is then replaced by its factored Rayleigh quotient
    ``||L^T phi||^2 / ||phi||^2``. ``phi`` has unit discrete norm
    ``h^2 sum phi^2 = 1``.

    Raises
    ------
    EigenFailure
        If a pair misses the ``1e-10`` relative residual or ``mu <= 0``.
    """
    n = op.n_interior
    if not 1 <= count <= n:
        raise InputError(f"count must be in 1..{n}")
    L = op.matrix
    LT = L.T.tocsr()
    G = (L @ LT).tocsr()
    if op.grid.m <= DENSE_MAX_M:
        w, V = sla.eigh(G.toarray(), driver="ev")
        norm = w[-1]
        w, V = w[:count], V[:, :count]
    else:
        try:
            w, V = spla.eigsh(G.tocsc(), k=count, sigma=0.0, which="LM", tol=1e-14)
            norm = spla.eigsh(G, k=1, which="LA", return_eigenvectors=False, tol=1e-8)[0]
        except spla.ArpackNoConvergence as exc:
            raise EigenFailure(str(exc)) from exc
        order = np.argsort(w)
        w, V = w[order], V[:, order]
    LtV = LT @ V
    mu = np.sum(LtV * LtV, axis=0) / np.sum(V * V, axis=0)
    # refined values inside a degenerate cluster may swap order
    order = np.argsort(mu, kind="stable")
    mu, V, LtV = mu[order], V[:, order], LtV[:, order]
    R = L @ LtV - V * mu
    rel = np.linalg.norm(R, axis=0) / (norm * np.linalg.norm(V, axis=0))
    if np.any(rel > EIG_TOL):
        j = int(np.argmax(rel))
        raise EigenFailure(f"clamped mode {j + 1}: relative residual {rel[j]:.2e}")
    if np.any(mu <= 0):
        raise EigenFailure("nonpositive clamped eigenvalue")
    V = V / (op.grid.h * np.linalg.norm(V, axis=0))
    return [ClampedPair(float(mu[k]), V[:, k]) for k in range(count)]


def kernel_basis(op: EllipticOperator2D) -> np.ndarray:
    """Orthonormal (``h^2``-weighted) basis of ``ker L``, shape ``(m^2, K)``."""
    return sla.null_space(op.matrix.toarray()) / op.grid.h


@dataclass(frozen=True)
class Spectrum2D:
    """Kernel basis plus ascending positive eigenpairs of ``L^T L``.

    Positive modes are numbered from 1 and exclude the kernel. Columns of
    ``kernel_basis`` and ``psi`` are orthonormal under ``h^2 sum``;
    ``lifted[:, k] = L psi[:, k]`` lives on interior(p).
    """

    operator: EllipticOperator2D
    kernel_basis: np.ndarray
    eigenvalues: np.ndarray
    psi: np.ndarray
    lifted: np.ndarray

    @property
    def grid(self) -> RectGrid:
        return self.operator.grid

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    @property
    def is_complete(self) -> bool:
        return self.kernel_basis.shape[1] + self.count == self.grid.size

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.grid.h**2 * (u.T @ v)


def lift_eigenfunctions(
    op: EllipticOperator2D, clamped: Sequence[ClampedPair], *, with_kernel: bool = True
) -> Spectrum2D:
    """Lift clamped eigenpairs to eigenpairs of ``L^T L``.

    Solves ``L L^T phi_hat = phi``, sets ``psi = L^T phi_hat`` and
    orthonormalises the ``psi`` in ascending order. ``lambda`` is the factored Rayleigh quotient of ``psi`` and
    must match ``mu`` to ``1e-8`` relative; the eigen-residual of ``psi``
    must be below ``1e-8`` relative to a bound on ``||L^T L||``.

    Raises
    ------
    ResidualTooLarge
        If a lifted pair is inconsistent with its clamped pair.
    """
    h = op.grid.h
    L = op.matrix
    LT = L.T.tocsr()
    Phi = np.column_stack([c.phi for c in clamped]) if clamped else np.zeros((op.n_interior, 0))
    mu = np.array([c.mu for c in clamped])
    lu = spla.splu((L @ LT).tocsc())
    Psi = LT @ lu.solve(Phi)
    # the solve damps high-mode pollution of low modes most, so
    # orthonormalise in ascending order; QR stays inside range(L^T)
    Q, R = np.linalg.qr(Psi)
    Psi = Q * (np.sign(np.diag(R)) / h)
    LPsi = L @ Psi
    lam = np.sum(LPsi * LPsi, axis=0) / np.sum(Psi * Psi, axis=0)
    order = np.argsort(lam, kind="stable")
    lam, Psi, LPsi, mu = lam[order], Psi[:, order], LPsi[:, order], mu[order]
    if mu.size:
        gap = np.abs(lam - mu) / mu
        # backward error against ||L||_1 ||L||_inf >= ||L^T L||_2
        scale = spla.norm(L, 1) * spla.norm(L, np.inf)
        res = np.linalg.norm(LT @ LPsi - Psi * lam, axis=0) / (scale * np.linalg.norm(Psi, axis=0))
        bad = np.maximum(gap, res)
        if np.any(bad > LIFT_TOL):
            j = int(np.argmax(bad))
            raise ResidualTooLarge(f"lifted mode {j + 1}: mismatch {bad[j]:.2e}")
    K = kernel_basis(op) if with_kernel else np.zeros((op.grid.size, 0))
    return Spectrum2D(op, K, lam, Psi, LPsi)


def complete_spectrum(op: EllipticOperator2D) -> Spectrum2D:
    """Every positive mode plus the kernel, for ``m <= 33``."""
    return lift_eigenfunctions(op, clamped_spectrum(op, op.n_interior))


def gram_positive_spectrum(op: EllipticOperator2D, count: int) -> np.ndarray:
    """Lowest ``count`` positive eigenvalues of ``L^T L`` (dense, independent path).

    The kernel dimension is known exactly, so the positive part starts at
    index ``m^2 - |interior(p)|`` of the ascending spectrum. Eigenvalues are
    returned as factored Rayleigh quotients ``||L v||^2 / ||v||^2``.
    """
    A = (op.matrix.T @ op.matrix).toarray()
    K = op.grid.size - op.n_interior
    _, V = sla.eigh(A, subset_by_index=(K, K + count - 1))
    LV = op.matrix @ V
    return np.sum(LV * LV, axis=0) / np.sum(V * V, axis=0)


def green_orthogonality_check(
    op: EllipticOperator2D, spectrum: Spectrum2D, trials: int, rng: np.random.Generator
) -> float:
    """Largest deviation from the discrete Green identity on random pairs.

    For a random unit kernel element ``v`` and a random mode ``psi_k`` the
    two quantities ``|<L^T L psi_k, v> - lambda_k <psi_k, v>| / lambda_k``
    and ``|<psi_k, v>|`` should vanish to round-off. ``op`` is used to apply
    ``L``, so passing a perturbed operator exposes the inconsistency.
    """
    if spectrum.count == 0 or spectrum.kernel_basis.shape[1] == 0:
        raise InputError("spectrum needs positive modes and a kernel basis")
    h2 = op.grid.h ** 2
    K = spectrum.kernel_basis
    worst = 0.0
    for _ in range(trials):
        c = rng.standard_normal(K.shape[1])
        v = K @ (c / np.linalg.norm(c))
        k = int(rng.integers(spectrum.count))
        psi = spectrum.psi[:, k]
        lam = spectrum.eigenvalues[k]
        pv = h2 * psi @ v
        green = h2 * (op.matrix @ psi) @ (op.matrix @ v) - lam * pv
        worst = max(worst, abs(green) / lam, abs(pv))
    return worst


def apply_symbol_fourth_order(symbol: Polynomial2, grid: RectGrid, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply a second-order symbol ``a xi^2 + b eta^2`` with 5-point-per-axis stencils.

    Uses ``(-1, 16, -30, 16, -1) / 12 h^2`` along each axis, fourth-order
    accurate. Returns the full-grid result and the mask of nodes where it is
    defined (two nodes from each edge); other entries are NaN.
    """
    if symbol.degree != 2 or not symbol.has_even_powers_only() or (1, 1) in symbol.terms:
        raise InputError("only a xi^2 + b eta^2 symbols are supported")
    m, h = grid.m, grid.h
    U = np.asarray(u, dtype=float).reshape(m, m)
    w = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    out = np.full((m, m), np.nan)
    core = np.zeros((m - 4, m - 4))
    a = float(symbol.terms.get((2, 0), 0))
    b = float(symbol.terms.get((0, 2), 0))
    for i, c in enumerate(w):
        core += a * c * U[i : m - 4 + i, 2 : m - 2] + b * c * U[2 : m - 2, i : m - 4 + i]
    out[2 : m - 2, 2 : m - 2] = core
    mask = np.zeros((m, m), dtype=bool)
    mask[2 : m - 2, 2 : m - 2] = True
    return out.ravel(), mask.ravel()


def max_on(values: np.ndarray, mask: np.ndarray) -> float:
    sel = np.abs(values[mask])
    if sel.size == 0:
        raise InputError("empty evaluation set")
    return float(sel.max())


def observed_orders(errors: Sequence[float]) -> list[float]:
    """``log2`` ratios of successive errors under grid halving."""
    e = list(errors)
    return [math.log2(e[i] / e[i + 1]) if e[i + 1] > 0 else math.inf for i in range(len(e) - 1)]
