"""Ellipsoids, subspace distances and widths.

All distance computations work in normalised coordinates ``y = s * u``
where ``s`` is the square root of the quadrature weight (``h`` for the 2D
grid, the trapezoid weights for the 1D grid). In these coordinates the L2
norm is Euclidean and the ellipsoid is ``{y : ||E y|| <= 1}`` for a matrix
``E`` (``E = L`` in 2D, ``E = sqrt(h) B M^-1/2`` in 1D).

The brute-force distance from a subspace ``S`` to the ellipsoid is the
largest generalized eigenvalue of ``(I - P_S)`` against ``E^T E`` on
``ker(E)^perp``. It is computed in factored form: with ``E^T = Q R``,
every admissible ``y`` in ``ker(E)^perp`` is ``Q R^-T x`` with ``||x|| <= 1``,
so the distance is the largest singular value of ``(I - P_S) Q R^-T``,
obtained from the top eigenpair of its Gram matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .elliptic2d import (
    BoundaryData,
    EllipticOperator2D,
    RectGrid,
    Spectrum2D,
    apply_symbol_fourth_order,
    laplacian_power,
    solve_dirichlet,
)
from .errors import InputError, InsufficientSpectrum, ResidualTooLarge, WeightVanishes
from .spectral1d import derivative_map, spacing, trapezoid_mass

KERNEL_TOL = 1e-8
MEMBER_TOL = 1e-12
ORACLE_RTOL = 1e-8

LABELS = ("X_tilde_p", "F_tilde_N", "X_tilde_p+F_tilde_N", "FirstKind", "F_N")


class Membership(NamedTuple):
    norm: float
    member: bool


class Ellipsoid:
    """Unit ball of ``u -> ||E (s u)||`` with ``s`` the root quadrature weight.

    Parameters
    ----------
    matrix : array or sparse matrix
        ``E`` acting on normalised coordinates.
    sqrt_mass : float or array
        ``s``; a scalar for uniform weights.
    """

    def __init__(self, matrix, sqrt_mass):
        self.matrix = matrix
        self.sqrt_mass = sqrt_mass
        self._factor = None

    @classmethod
    def from_operator(cls, op: EllipticOperator2D) -> "Ellipsoid":
        # h^2 ||L u||^2 = ||L (h u)||^2
        return cls(op.matrix, op.grid.h)

    @classmethod
    def from_1d(cls, p: int, n: int) -> "Ellipsoid":
        s = np.sqrt(trapezoid_mass(n))
        E = math.sqrt(spacing(n)) * (derivative_map(p, n) @ sp.diags(1.0 / s))
        return cls(E.tocsr(), s)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def normalise(self, u: np.ndarray) -> np.ndarray:
        s = self.sqrt_mass
        return s * u if np.isscalar(s) else (s[:, None] * u if u.ndim > 1 else s * u)

    def denormalise(self, y: np.ndarray) -> np.ndarray:
        s = self.sqrt_mass
        return y / s if np.isscalar(s) else (y / s[:, None] if y.ndim > 1 else y / s)

    def norm(self, u: np.ndarray) -> float:
        return float(np.linalg.norm(self.matrix @ self.normalise(np.asarray(u, dtype=float))))

    def factor(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(Q, X, K)``: ``Q`` spans ``ker(E)^perp``, ``X = Q R^-T``, ``K`` spans ``ker(E)``."""
        if self._factor is None:
            Et = self.matrix.T
            Et = Et.toarray() if sp.issparse(Et) else np.asarray(Et)
            Qf, R = sla.qr(Et, mode="full")
            r = Et.shape[1]
            Q, R = Qf[:, :r], R[:r]
            X = sla.solve_triangular(R, Q.T, lower=False).T
            self._factor = (Q, X, Qf[:, r:])
        return self._factor


def membership(e: Ellipsoid, u: np.ndarray) -> Membership:
    """Discrete energy norm of ``u`` and whether it lies in the unit ball."""
    nrm = e.norm(u)
    return Membership(nrm, nrm <= 1 + MEMBER_TOL)


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of a subspace, stored in normalised coordinates.

    ``normalised`` has Euclidean-orthonormal columns; :meth:`columns` gives
    the fields themselves.
    """

    normalised: np.ndarray
    label: str
    sqrt_mass: object = field(repr=False)

    def __post_init__(self):
        if self.label not in LABELS:
            raise InputError(f"unknown subspace label {self.label!r}")
        Q = self.normalised
        if Q.shape[1] and np.abs(Q.T @ Q - np.eye(Q.shape[1])).max() > 1e-12:
            raise InputError("subspace columns are not orthonormal")

    @classmethod
    def from_fields(cls, fields: np.ndarray, label: str, sqrt_mass) -> "SubspaceBasis":
        """Orthonormalise ``fields`` (columns) and wrap them."""
        F = np.atleast_2d(np.asarray(fields, dtype=float))
        Y = sqrt_mass * F if np.isscalar(sqrt_mass) else sqrt_mass[:, None] * F
        if Y.shape[1] == 0:
            return cls(Y, label, sqrt_mass)
        Q, R = sla.qr(Y, mode="economic")
        if np.abs(np.diag(R)).min() <= 1e-12 * np.abs(np.diag(R)).max():
            raise InputError("fields are linearly dependent")
        return cls(Q, label, sqrt_mass)

    @property
    def dim(self) -> int:
        return self.normalised.shape[1]

    def columns(self) -> np.ndarray:
        s = self.sqrt_mass
        return self.normalised / s if np.isscalar(s) else self.normalised / s[:, None]

    def residual(self, y: np.ndarray) -> np.ndarray:
        """``(I - P) y`` in normalised coordinates."""
        Q = self.normalised
        return y - Q @ (Q.T @ y)


def tilde_subspace(spectrum: Spectrum2D, N: int) -> SubspaceBasis:
    """Kernel of ``L`` plus the first ``N`` positive modes."""
    if N > spectrum.count:
        raise InsufficientSpectrum(f"need {N} modes, have {spectrum.count}")
    F = np.hstack([spectrum.kernel_basis, spectrum.psi[:, :N]])
    label = "X_tilde_p+F_tilde_N" if N else "X_tilde_p"
    return SubspaceBasis.from_fields(F, label, spectrum.grid.h)


def point_distance(subspace: SubspaceBasis, u: np.ndarray) -> float:
    """L2 distance from the field ``u`` to the subspace."""
    s = subspace.sqrt_mass
    y = s * np.asarray(u, dtype=float)
    return float(np.linalg.norm(subspace.residual(y)))


class FarthestPoint(NamedTuple):
    """Result of the brute-force distance.

    ``value`` is ``math.inf`` when the subspace misses a kernel direction;
    ``direction`` is then that kernel field (unit L2 norm), otherwise the
    maximiser scaled to the ellipsoid boundary.
    """

    value: float
    direction: np.ndarray
    kernel_contained: bool


def farthest_point(subspace: SubspaceBasis, e: Ellipsoid) -> FarthestPoint:
    Q, X, K = e.factor()
    if subspace.normalised.shape[0] != e.dim:
        raise InputError("subspace and ellipsoid live on different grids")
    if K.shape[1]:
        _, sv, Vt = sla.svd(subspace.residual(K), full_matrices=False)
        if sv[0] > KERNEL_TOL:
            return FarthestPoint(math.inf, e.denormalise(K @ Vt[0]), False)
    # largest singular value of D = (I - P) X from the top eigenpair of D^T D
    S = subspace.normalised
    C = S.T @ X
    G = X.T @ X - C.T @ C
    r = G.shape[0]
    w, v = sla.eigh(G, subset_by_index=(r - 1, r - 1))
    y = X @ v[:, 0]
    return FarthestPoint(math.sqrt(max(float(w[0]), 0.0)), e.denormalise(y), True)


def brute_force_distance(subspace: SubspaceBasis, e: Ellipsoid) -> float:
    """``sup_{u in e} dist(u, subspace)``; ``math.inf`` if a kernel direction is missing."""
    return farthest_point(subspace, e).value


@dataclass(frozen=True)
class WidthReport2D:
    p: int
    N: int
    grid: int
    value: float
    jackson_bound: float
    oracle_value: float
    lambda_next: float

    def to_dict(self) -> dict:
        inf = lambda x: "inf" if math.isinf(x) else x  # noqa: E731
        return {
            "p": self.p,
            "N": self.N,
            "grid": self.grid,
            "value": inf(self.value),
            "jackson_bound": inf(self.jackson_bound),
            "oracle_value": inf(self.oracle_value),
            "lambda_next": self.lambda_next,
        }


def harmonic_width(
    spectrum: Spectrum2D, p: int, N: int, *, ellipsoid: Ellipsoid | None = None, check: bool = True
) -> WidthReport2D:
    """Width ``1/sqrt(lambda_(N+1))`` with its brute-force oracle.

    Raises
    ------
    InsufficientSpectrum
        If fewer than ``N + 1`` positive modes are held.
    ResidualTooLarge
        If ``check`` and the oracle disagrees by more than ``1e-8`` relative.
    """
    op = spectrum.operator
    if p != op.p:
        raise InputError(f"p = {p} does not match the operator order {op.p}")
    if N < 0:
        raise InputError("N must be nonnegative")
    if spectrum.count < N + 1:
        raise InsufficientSpectrum(f"need {N + 1} positive modes, have {spectrum.count}")
    lam = float(spectrum.eigenvalues[N])
    value = 1.0 / math.sqrt(lam)
    e = ellipsoid or Ellipsoid.from_operator(op)
    oracle = brute_force_distance(tilde_subspace(spectrum, N), e)
    if check and not abs(value - oracle) <= ORACLE_RTOL * value:
        raise ResidualTooLarge(f"width {value:.16g} vs oracle {oracle:.16g}")
    return WidthReport2D(p, N, op.grid.m, value, value, oracle, lam)


def subspace_sup_distance(A: SubspaceBasis, B: SubspaceBasis) -> float:
    """Largest principal-angle sine: ``sup`` over unit ``u`` in B of ``dist(u, A)``.

    Computed as the spectral norm of ``Q_B - Q_A (Q_A^T Q_B)``, whose
    singular values are the sines of the principal angles.
    """
    if B.dim == 0:
        return 0.0
    return float(sla.svdvals(A.residual(B.normalised))[0])


class AxesExpansion(NamedTuple):
    kernel_coeffs: np.ndarray
    axis_coeffs: np.ndarray
    member: bool
    reconstruction_error: float


def principal_axes(spectrum: Spectrum2D, f: np.ndarray, tol: float = MEMBER_TOL) -> AxesExpansion:
    """Expand ``f`` in the kernel basis and the positive modes."""
    if not spectrum.is_complete:
        raise InsufficientSpectrum("principal axes need the complete spectrum")
    f = np.asarray(f, dtype=float)
    kc = spectrum.inner(spectrum.kernel_basis, f)
    ac = spectrum.inner(spectrum.psi, f)
    rec = spectrum.kernel_basis @ kc + spectrum.psi @ ac
    err = float(np.abs(rec - f).max())
    return AxesExpansion(kc, ac, float(np.sum(spectrum.eigenvalues * ac**2)) <= 1 + tol, err)


def random_member(
    spectrum: Spectrum2D, rng: np.random.Generator, level: float = 0.99
) -> np.ndarray:
    """Random field with ``sum_j lambda_j f_j^2 = level`` over the held modes."""
    c = rng.standard_normal(spectrum.count)
    c *= math.sqrt(level / float(np.sum(spectrum.eigenvalues * c**2)))
    k = rng.standard_normal(spectrum.kernel_basis.shape[1])
    return spectrum.kernel_basis @ k + spectrum.psi @ c


def scaling_witness(
    subspace: SubspaceBasis, f: np.ndarray, scales: Sequence[float] = (1, 10, 100)
) -> list[float]:
    """Distances of ``t f`` to the subspace for each ``t`` in ``scales``."""
    return [point_distance(subspace, t * f) for t in scales]


# ---------------------------------------------------------------------------
# first-kind spaces


@dataclass(frozen=True)
class FirstKindSpace:
    """Data of the factored operator ``Q_M (1/rho_M) ... Q_1 (1/rho_1)``.

    Parameters
    ----------
    factor_operators : list of EllipticOperator2D
        Second-order operators ``Q_1..Q_M`` on a common grid.
    weights : list of arrays
        ``rho_1..rho_M`` on the full grid. They may vanish only near the
        declared exceptional set.
    partition : list of bool arrays
        Subdomain masks, covering the grid.
    exceptional_distance : array, optional
        Distance of each node to the interface set and to any point where a
        weight is not smooth. Nodes closer than ``h`` are exempt from the
        vanishing-weight check.
    """

    factor_operators: tuple
    weights: tuple
    partition: tuple
    exceptional_distance: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.factor_operators or len(self.factor_operators) != len(self.weights):
            raise InputError("need one weight per factor operator")
        grid = self.grid
        for q in self.factor_operators:
            if q.p != 1 or q.grid != grid:
                raise InputError("factor operators must be second order on a common grid")
        for w in self.weights:
            if np.shape(w) != (grid.size,):
                raise InputError("weights must be full-grid fields")

    @property
    def grid(self) -> RectGrid:
        return self.factor_operators[0].grid

    @property
    def M(self) -> int:
        return len(self.factor_operators)

    def exempt(self) -> np.ndarray:
        if self.exceptional_distance is None:
            return np.zeros(self.grid.size, dtype=bool)
        return self.exceptional_distance < self.grid.h

    def check_weights(self) -> None:
        """Raise :class:`WeightVanishes` if a weight vanishes off the exceptional set.

        Weights may change sign across an interface, so only vanishing is
        tested, not positivity.
        """
        off = ~self.exempt()
        for j, w in enumerate(self.weights, start=1):
            w = np.asarray(w, dtype=float)
            tiny = 1e-12 * max(np.abs(w).max(), 1e-300)
            bad = off & (np.abs(w) <= tiny)
            if bad.any():
                raise WeightVanishes(f"rho_{j} vanishes at node {int(np.flatnonzero(bad)[0])}")

    def apply_product(self, u: np.ndarray) -> np.ndarray:
        """``Q_M (1/rho_M) ... Q_1 (1/rho_1) u`` with fourth-order stencils.

        Nodes where the chained stencils do not fit, or where a weight is
        zero, come back as NaN.
        """
        g = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            for q, w in zip(self.factor_operators, self.weights):
                g, mask = apply_symbol_fourth_order(q.symbol, self.grid, g / w)
                g = np.where(mask, g, np.nan)
        return g


class DirectSolution(NamedTuple):
    u: np.ndarray
    residual: float
    residual_mask: np.ndarray


def residual_region(
    space: FirstKindSpace, away: float = 0.1, margin: float = 0.25
) -> np.ndarray:
    """Nodes at least ``away`` from the exceptional set and ``margin`` from the edge."""
    X, Y = space.grid.mesh()
    edge = np.minimum.reduce([X, 1 - X, Y, 1 - Y])
    keep = edge >= margin - 1e-12
    if space.exceptional_distance is not None:
        keep &= space.exceptional_distance >= away - 1e-12
    return keep


def direct_solution(
    space: FirstKindSpace,
    data: Sequence[BoundaryData],
    *,
    away: float = 0.1,
    margin: float = 0.25,
) -> DirectSolution:
    """Nested weighted Dirichlet solves.

    ``u = rho_1 I_1(rho_2 I_2(... rho_M I_M(0; h_M) ...; h_2); h_1)`` with
    ``I_j(f, h)`` the solution of ``Q_j w = f``, ``w = h`` on the edge. The
    residual is the max of ``|P u|`` over :func:`residual_region`.

    Raises
    ------
    WeightVanishes
        If a weight vanishes off the exceptional set.
    """
    if len(data) != space.M:
        raise InputError(f"need {space.M} boundary data sets, got {len(data)}")
    space.check_weights()
    ops, rho = space.factor_operators, space.weights
    inner = solve_dirichlet(ops[-1], np.zeros(ops[-1].n_interior), data[-1])
    for j in range(space.M - 2, -1, -1):
        inner = solve_dirichlet(ops[j], rho[j + 1] * inner, data[j])
    u = rho[0] * inner
    Pu = space.apply_product(u)
    mask = residual_region(space, away, margin) & np.isfinite(Pu)
    if not mask.any():
        raise InputError("residual region is empty")
    return DirectSolution(u, float(np.abs(Pu[mask]).max()), mask)


def ball_example(
    m: int,
    r0: float = 0.35,
    centre: tuple[float, float] = (0.5, 0.5),
    harmonic_data=lambda x, y: x * x - y * y + x,
) -> tuple[FirstKindSpace, list[BoundaryData]]:
    """Disk-weight example on the unit square.

    ``Q_1 = Q_2 = Laplacian``, ``rho_1 = 1`` and ``rho_2 = 1 - |x - c|/r0``,
    which vanishes on the circle of radius ``r0`` and has a kink at the
    centre. The inner solve is harmonic with data ``harmonic_data``; the
    outer one has zero data, so ``u`` solves ``Laplacian u = rho_2 w``.
    """
    grid = RectGrid(m)
    X, Y = grid.mesh()
    R = np.hypot(X - centre[0], Y - centre[1])
    rho2 = 1 - R / r0
    dist = np.minimum(np.abs(R - r0), R)
    lap = laplacian_power(1, grid)
    space = FirstKindSpace(
        (lap, lap),
        (np.ones(grid.size), rho2),
        (R < r0, R >= r0),
        dist,
    )
    data = [BoundaryData.zeros(grid, 1), BoundaryData.from_function(grid, harmonic_data, 1)]
    return space, data


def isotropic_example(
    m: int, harmonic_data=lambda x, y: x * x - y * y
) -> tuple[FirstKindSpace, list[BoundaryData]]:
    """``M = 2`` with unit weights: ``Laplacian u = w``, ``w`` harmonic."""
    grid = RectGrid(m)
    lap = laplacian_power(1, grid)
    ones = np.ones(grid.size)
    space = FirstKindSpace((lap, lap), (ones, ones), (np.ones(grid.size, dtype=bool),))
    data = [BoundaryData.zeros(grid, 1), BoundaryData.from_function(grid, harmonic_data, 1)]
    return space, data
