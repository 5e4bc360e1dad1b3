import numpy as np
import pytest

from grushinlab.errors import ParameterError
from grushinlab.operators import (
    assemble_grushin, build_grid, hardy_check, hardy_ratio_of,
    smallest_eigenvalues,
)

PI2 = np.pi ** 2


class TestGrid:
    def test_spacings(self):
        g = build_grid(3, 3)
        assert g.hx == g.hy == 0.25
        assert g.n == 9

    def test_rectangular(self):
        g = build_grid(2, 4)
        assert g.hx == pytest.approx(1 / 3)
        assert g.hy == pytest.approx(1 / 5)
        assert g.n == 8

    def test_too_small(self):
        with pytest.raises(ParameterError):
            build_grid(1, 3)

    def test_index_bijection(self):
        g = build_grid(3, 5)
        seen = {g.index(i, j) for i in range(3) for j in range(5)}
        assert seen == set(range(g.n))

    def test_nodes_interior(self):
        g = build_grid(4, 4)
        assert g.x[0] > 0 and g.x[-1] < 1
        assert g.y[0] > 0 and g.y[-1] < 1


class TestAssembly:
    def test_symmetry_exact(self):
        op = assemble_grushin(build_grid(12, 9), gamma=1.0, sigma=0.2,
                              epsilon=0.05)
        d = op.matrix - op.matrix.T
        assert d.nnz == 0 or np.all(d.data == 0.0)

    def test_five_point_pattern(self):
        op = assemble_grushin(build_grid(5, 5), 1.0, 0.1, 0.1)
        row = op.matrix.getrow(op.grid.index(2, 2))
        assert row.nnz == 5

    def test_yy_coefficient(self):
        g = build_grid(3, 3)  # x = 1/4, 1/2, 3/4
        op = assemble_grushin(g, gamma=1.0, sigma=0.0, epsilon=0.0)
        i = g.index(1, 1)  # x = 1/2
        j = g.index(1, 2)  # y-neighbour
        assert op.matrix[i, j] == pytest.approx(0.25 / g.hy ** 2)

    def test_singular_diagonal(self):
        g = build_grid(9, 9)
        op = assemble_grushin(g, gamma=0.0, sigma=0.24, epsilon=0.01)
        i = g.index(0, 4)
        x1 = g.hx
        expected = -2.0 / g.hx ** 2 - 2.0 / g.hy ** 2 + 0.24 / (x1 + 0.01) ** 2
        assert op.matrix[i, i] == pytest.approx(expected, rel=1e-14)

    def test_sigma_bound(self):
        with pytest.raises(ParameterError):
            assemble_grushin(build_grid(4, 4), 1.0, 0.25, 0.01)

    def test_dump_format(self):
        op = assemble_grushin(build_grid(2, 2), 1.0, 0.0, 0.0)
        lines = op.dump_coo().strip().splitlines()
        assert len(lines) == op.matrix.nnz
        r, c, v = lines[0].split()
        int(r), int(c), float(v)


class TestSpectrum:
    def test_laplacian_smallest(self):
        op = assemble_grushin(build_grid(64, 64), 0.0, 0.0, 0.0)
        lam1 = smallest_eigenvalues(op, 1)[0]
        assert lam1 == pytest.approx(2 * PI2, rel=0.01)

    def test_laplacian_second_is_double(self):
        op = assemble_grushin(build_grid(32, 32), 0.0, 0.0, 0.0)
        vals = smallest_eigenvalues(op, 3)
        assert vals[1] == pytest.approx(5 * PI2, rel=0.02)
        assert vals[1] == pytest.approx(vals[2], rel=1e-8)

    def test_positive_definite_without_potential(self):
        op = assemble_grushin(build_grid(10, 10), 1.5, 0.0, 0.02)
        assert smallest_eigenvalues(op, 1)[0] > 0.0

    def test_singular_term_lowers_spectrum(self):
        g = build_grid(16, 16)
        base = smallest_eigenvalues(assemble_grushin(g, 1.0, 0.0, 0.05), 1)[0]
        pert = smallest_eigenvalues(assemble_grushin(g, 1.0, 0.2, 0.05), 1)[0]
        assert pert < base

    def test_eigenvalue_cap(self):
        op = assemble_grushin(build_grid(4, 4), 0.0, 0.0, 0.0)
        with pytest.raises(ParameterError):
            smallest_eigenvalues(op, 7)

    def test_grid_convergence_second_order(self):
        errs = []
        for n in (8, 16, 32):
            op = assemble_grushin(build_grid(n, n), 0.0, 0.0, 0.0)
            errs.append(abs(smallest_eigenvalues(op, 1)[0] - 2 * PI2))
        r1 = np.log2(errs[0] / errs[1])
        r2 = np.log2(errs[1] / errs[2])
        assert r1 > 1.8 and r2 > 1.8


class TestHardy:
    def test_parabola_closed_form(self):
        # z = x(1-x): int z^2/x^2 = 1/3, int z_x^2 = 1/3, ratio = 1/4
        r = hardy_ratio_of(lambda x: x * (1 - x), lambda x: 1 - 2 * x)
        assert r == pytest.approx(0.25, abs=1e-6)

    def test_sine_mode(self):
        r = hardy_ratio_of(lambda x: np.sin(np.pi * x),
                           lambda x: np.pi * np.cos(np.pi * x))
        # int sin^2(pi x)/x^2 = pi * Si(2 pi) ~ 4.45524 (by parts),
        # 4 * int z_x^2 = 2 pi^2 ~ 19.7392
        from scipy.special import sici
        exact = np.pi * sici(2 * np.pi)[0] / (2 * np.pi ** 2)
        assert 0.0 < r < 1.0
        assert r == pytest.approx(exact, rel=1e-6)

    def test_zero_function_convention(self):
        r = hardy_ratio_of(lambda x: 0.0 * x, lambda x: 0.0 * x)
        assert r == 0.0

    def test_random_ensemble_bound(self):
        rep = hardy_check(samples=200, seed=3)
        assert rep["max_quotient"] <= 4.0 * (1 + 1e-3)
        assert rep["max_ratio"] <= 1.0 * (1 + 1e-3)
        assert rep["max_ratio"] > 0.0

    def test_sample_validation(self):
        with pytest.raises(ParameterError):
            hardy_check(samples=0)
