from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg as sla

from harmonic_widths.elliptic2d import (
    BoundaryData,
    RectGrid,
    apply_symbol_fourth_order,
    assemble,
    clamped_spectrum,
    complete_spectrum,
    gram_positive_spectrum,
    green_orthogonality_check,
    laplacian_power,
    lift_eigenfunctions,
    max_on,
    observed_orders,
    solve_dirichlet,
)
from harmonic_widths.errors import (
    GridTooCoarse,
    InputError,
    NotElliptic,
    NotHomogeneous,
    OddSymbol,
)
from harmonic_widths.symbols import Polynomial2

# Aitken extrapolation of mu_1 (p = 1) over m = 33, 65, 129
MU1_ORACLE = 1299.317


def field_stencil(op, node):
    """Nonzero stencil of the row at ``node`` as {(dx, dy): coefficient * h^2p}."""
    m = op.grid.m
    row = int(np.flatnonzero(op.interior == node)[0])
    r = op.matrix.getrow(row)
    ix, iy = divmod(node, m)
    return {
        (j // m - ix, j % m - iy): round(v / op.h_scale, 10) for j, v in zip(r.indices, r.data)
    }


class TestGrid:
    def test_min_size(self):
        with pytest.raises(GridTooCoarse):
            RectGrid(4)
        with pytest.raises(GridTooCoarse):
            RectGrid(6).check_order(2)

    def test_interior_count(self):
        g = RectGrid(17)
        assert g.interior(1).size == 15 * 15
        assert g.interior(2).size == 13 * 13
        assert g.band(2).size == 17 * 17 - 13 * 13

    def test_boundary_layers(self):
        g = RectGrid(9)
        u = g.sample(lambda x, y: x + 2 * y)
        bd = BoundaryData.from_field(g, u, 2)
        back = bd.to_field()
        mask = ~g.interior_mask(2)
        np.testing.assert_array_equal(back[mask], u[mask])
        with pytest.raises(InputError):
            BoundaryData(g, (np.zeros(3),))


class TestAssemble:
    def test_five_point(self):
        op = laplacian_power(1, RectGrid(9))
        node = 4 * 9 + 4
        assert field_stencil(op, node) == {(0, 0): -4, (1, 0): 1, (-1, 0): 1, (0, 1): 1, (0, -1): 1}

    def test_biharmonic_is_composition(self):
        g = RectGrid(13)
        L2 = laplacian_power(2, g).matrix.toarray()
        L1 = laplacian_power(1, g).matrix.toarray()
        # rows of interior(1) that are also in interior(2), composed with L1
        idx1 = g.interior(1)
        sel = np.searchsorted(idx1, g.interior(2))
        comp = L1[sel][:, idx1] @ L1
        np.testing.assert_allclose(L2, comp, rtol=1e-13, atol=1e-13 * np.abs(L2).max())
        st = field_stencil(laplacian_power(2, g), 6 * 13 + 6)
        assert len(st) == 13 and st[(0, 0)] == 20 and st[(1, 1)] == 2 and st[(2, 0)] == 1

    def test_anisotropic(self):
        g = RectGrid(9)
        op = assemble(Polynomial2.parse("2,0:1 0,2:2"), 1, g)
        st = field_stencil(op, 4 * 9 + 4)
        assert st == {(0, 0): -6, (1, 0): 1, (-1, 0): 1, (0, 1): 2, (0, -1): 2}
        u = g.sample(lambda x, y: x**2 + y**2)
        np.testing.assert_allclose(op.apply(u), 6.0, rtol=1e-10)

    def test_rank(self):
        op = laplacian_power(2, RectGrid(11))
        assert np.linalg.matrix_rank(op.matrix.toarray()) == op.n_interior

    def test_rejections(self):
        g = RectGrid(9)
        with pytest.raises(NotHomogeneous):
            assemble(Polynomial2.parse("2,0:1 0,0:1"), 1, g)
        with pytest.raises(OddSymbol):
            assemble(Polynomial2.parse("2,0:1 1,1:1 0,2:1"), 1, g)
        with pytest.raises(NotElliptic):
            assemble(Polynomial2.parse("2,0:1 0,2:-1"), 1, g)
        with pytest.raises(InputError):
            assemble(Polynomial2.laplacian(1), 2, g)


class TestDirichlet:
    @pytest.mark.parametrize("f", [lambda x, y: x, lambda x, y: x**2 - y**2])
    def test_harmonic_exact(self, f):
        g = RectGrid(17)
        op = laplacian_power(1, g)
        u = solve_dirichlet(op, np.zeros(op.n_interior), BoundaryData.from_function(g, f, 1))
        np.testing.assert_allclose(u, g.sample(f), atol=1e-12)

    def test_biharmonic_pinned(self):
        g = RectGrid(15)
        op = laplacian_power(2, g)
        f = lambda x, y: x**3 - 3 * x * y**2 + x * y
        u = solve_dirichlet(op, np.zeros(op.n_interior), BoundaryData.from_function(g, f, 2))
        np.testing.assert_allclose(u, g.sample(f), atol=1e-10)

    def test_manufactured_order(self):
        errs = []
        for m in (17, 33, 65):
            g = RectGrid(m)
            op = laplacian_power(1, g)
            rhs = g.sample(lambda x, y: -2 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y))
            u = solve_dirichlet(op, rhs, BoundaryData.zeros(g, 1))
            errs.append(np.abs(u - g.sample(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))).max())
        assert min(observed_orders(errs)) >= 1.9

    def test_mismatched_boundary(self):
        g = RectGrid(9)
        with pytest.raises(InputError):
            solve_dirichlet(laplacian_power(2, g), np.zeros(25), BoundaryData.zeros(g, 1))


class TestClamped:
    @pytest.mark.parametrize("p", [1, 2])
    def test_singular_value_identity(self, p):
        op = laplacian_power(p, RectGrid(13))
        cl = clamped_spectrum(op, op.n_interior)
        mu = np.array([c.mu for c in cl])
        s = sla.svdvals(op.matrix.toarray())
        np.testing.assert_allclose(mu, np.sort(s**2), rtol=1e-9)
        assert mu[0] > 0

    def test_phi_normalised(self):
        op = laplacian_power(1, RectGrid(17))
        cl = clamped_spectrum(op, 6)
        Phi = np.column_stack([c.phi for c in cl])
        np.testing.assert_allclose(op.grid.h**2 * Phi.T @ Phi, np.eye(6), atol=1e-10)

    def test_count_bounds(self):
        op = laplacian_power(1, RectGrid(9))
        with pytest.raises(InputError):
            clamped_spectrum(op, 0)

    def test_iterative_branch_agrees(self):
        g = RectGrid(35)
        op = laplacian_power(1, g)
        mu = [c.mu for c in clamped_spectrum(op, 3)]
        ref = gram_positive_spectrum(op, 3)
        np.testing.assert_allclose(mu, ref, rtol=1e-8)

    @pytest.mark.slow
    def test_mu1_refinement(self):
        mus = [clamped_spectrum(laplacian_power(1, RectGrid(m)), 1)[0].mu for m in (17, 33, 65)]
        errs = [abs(v - MU1_ORACLE) for v in mus]
        assert mus[0] < mus[1] < mus[2] < MU1_ORACLE
        assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("m", [17, 25])
class TestLift:
    def test_properties(self, p, m):
        op = laplacian_power(p, RectGrid(m))
        spec = complete_spectrum(op)
        K = spec.kernel_basis
        assert K.shape[1] == m * m - op.n_interior
        assert spec.is_complete
        assert np.abs(spec.inner(K, spec.psi)).max() <= 1e-10
        ref = gram_positive_spectrum(op, op.n_interior)
        np.testing.assert_allclose(spec.eigenvalues, ref, rtol=1e-8)
        Z = spec.lifted / np.sqrt(spec.eigenvalues)
        np.testing.assert_allclose(spec.inner(Z, Z), np.eye(spec.count), atol=1e-8)
        B = np.column_stack([K, spec.psi])
        np.testing.assert_allclose(spec.inner(B, B), np.eye(m * m), atol=1e-10)


class TestSpectrumStructure:
    def test_dihedral(self, complete_2d):
        for spec in complete_2d.values():
            m = spec.grid.m
            L = spec.operator.matrix
            for k in range(12):
                psi = spec.psi[:, k]
                sw = psi.reshape(m, m).T.ravel()
                lam = spec.eigenvalues[k]
                Lsw = L @ sw
                assert (Lsw @ Lsw) / (sw @ sw) == pytest.approx(lam, rel=1e-8)
                # swapped mode stays in the span of its eigenvalue cluster
                near = np.abs(spec.eigenvalues / lam - 1) < 1e-6
                P = spec.psi[:, near]
                tail = sw - P @ spec.inner(P, sw)
                assert spec.grid.h * np.linalg.norm(tail) < 1e-6

    def test_degenerate_pair(self, complete_2d):
        lam = complete_2d[1].eigenvalues
        assert lam[2] == pytest.approx(lam[1], rel=1e-8)

    def test_kernel_contains_harmonics(self, complete_2d):
        spec = complete_2d[1]
        K = spec.kernel_basis
        for f in (lambda x, y: 1 + 0 * x, lambda x, y: x * y, lambda x, y: x**2 - y**2):
            v = spec.grid.sample(f)
            tail = v - K @ spec.inner(K, v)
            assert np.abs(tail).max() < 1e-10

    def test_lift_without_kernel(self):
        op = laplacian_power(1, RectGrid(11))
        spec = lift_eigenfunctions(op, clamped_spectrum(op, 4), with_kernel=False)
        assert spec.kernel_basis.shape[1] == 0 and not spec.is_complete


class TestGreen:
    def test_valid_spectrum(self, complete_2d):
        rng = np.random.Generator(np.random.Philox(3))
        for spec in complete_2d.values():
            assert green_orthogonality_check(spec.operator, spec, 50, rng) <= 1e-9

    def test_constant_field(self, complete_2d):
        spec = complete_2d[1]
        v = np.ones(spec.grid.size)
        assert np.abs(spec.inner(spec.psi, v)).max() <= 1e-10

    def test_fault_injection(self, complete_2d):
        spec = complete_2d[1]
        op = spec.operator
        row = op.n_interior // 2
        col = int(op.interior[row])
        bad = op.perturbed(row, col, 1e-3)
        rng = np.random.Generator(np.random.Philox(3))
        assert green_orthogonality_check(bad, spec, 50, rng) > 1e-6

    def test_needs_kernel(self):
        op = laplacian_power(1, RectGrid(9))
        spec = lift_eigenfunctions(op, clamped_spectrum(op, 2), with_kernel=False)
        with pytest.raises(InputError):
            green_orthogonality_check(op, spec, 1, np.random.Generator(np.random.Philox(0)))


class TestFourthOrder:
    def test_polynomial_exact(self):
        g = RectGrid(11)
        u = g.sample(lambda x, y: x**4 + y**3 * x)
        val, mask = apply_symbol_fourth_order(Polynomial2.laplacian(1), g, u)
        X, Y = g.mesh()
        np.testing.assert_allclose(val[mask], (12 * X**2 + 6 * Y * X)[mask], atol=1e-9)
        assert np.all(np.isnan(val[~mask]))

    def test_order(self):
        errs = []
        for m in (17, 33, 65):
            g = RectGrid(m)
            val, mask = apply_symbol_fourth_order(Polynomial2.laplacian(1), g, g.sample(lambda x, y: np.sin(x + 2 * y)))
            errs.append(max_on(val + 5 * g.sample(lambda x, y: np.sin(x + 2 * y)), mask))
        assert min(observed_orders(errs)) > 3.8

    def test_rejects_mixed(self):
        g = RectGrid(9)
        with pytest.raises(InputError):
            apply_symbol_fourth_order(Polynomial2.laplacian(2), g, np.zeros(81))
