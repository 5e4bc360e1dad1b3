import numpy as np
import pytest

from grushinlab.operators import assemble_grushin, build_grid, eigenmode
from grushinlab.paths import AdaptedField, build_tree
from grushinlab.spde import (
    ControlRegions, SpdeProblem, energy_report, grid_inner,
    mean_square_norm, solve_backward, solve_forward, tree_inner,
)


def laplacian_setup(n=4, nt=4, T=1.0, gamma=0.0, sigma=0.0, eps=0.0):
    grid = build_grid(n, n)
    op = assemble_grushin(grid, gamma, sigma, eps)
    tree = build_tree(nt, T)
    return grid, op, tree


def dense_step_matrix(op, dt):
    import numpy.linalg as la
    n = op.n
    m = np.eye(n) - dt * op.matrix.toarray()
    return la.inv(m)


class TestForwardOracles:
    def test_zero_data_zero_solution(self):
        grid, op, tree = laplacian_setup()
        pr = SpdeProblem(op=op, tree=tree, u0=np.zeros(op.n))
        traj = solve_forward(pr)
        for k in range(tree.nt + 1):
            assert np.all(traj.state(k) == 0.0)

    def test_eigenmode_decay_exact(self):
        grid, op, tree = laplacian_setup(n=6, nt=5)
        lam1, e1 = eigenmode(op)
        pr = SpdeProblem(op=op, tree=tree, u0=e1)
        traj = solve_forward(pr)
        expected = (1.0 + tree.dt * lam1) ** (-tree.nt) * e1
        got = traj.state(tree.nt)
        assert np.all(np.abs(got - expected)
                      <= 1e-10 * np.abs(expected).max())

    def test_ito_isometry_closed_form_and_enumeration(self):
        grid, op, tree = laplacian_setup(n=4, nt=6)
        lam1, e1 = eigenmode(op)
        c = 0.7
        pr = SpdeProblem(op=op, tree=tree, u0=np.zeros(op.n),
                         diffusion=c * e1)
        traj = solve_forward(pr)
        ms = mean_square_norm(grid, traj.state(tree.nt)) / (grid.hx * grid.hy)

        # closed form: noise at step k passes through S^(nt-k)
        rho = 1.0 / (1.0 + tree.dt * lam1)
        closed = c ** 2 * sum(tree.dt * rho ** (2 * (tree.nt - k))
                              for k in range(tree.nt))
        assert ms == pytest.approx(closed, rel=1e-12)

        # brute-force enumeration with dense algebra, path by path
        s = dense_step_matrix(op, tree.dt)
        total = 0.0
        for leaf in range(2 ** tree.nt):
            u = np.zeros(op.n)
            for step in range(tree.nt):
                bit = (leaf >> (tree.nt - 1 - step)) & 1
                db = tree.sqdt if bit == 0 else -tree.sqdt
                u = s @ (u + c * e1 * db)
            total += u @ u
        brute = total / 2 ** tree.nt
        assert ms == pytest.approx(brute, rel=1e-12)

    def test_forward_is_adapted_to_parent(self):
        # identical sub-path prefixes get identical values
        grid, op, tree = laplacian_setup(n=3, nt=3)
        rng = np.random.default_rng(0)
        pr = SpdeProblem(op=op, tree=tree, u0=rng.standard_normal(op.n),
                         diffusion=rng.standard_normal(op.n))
        traj = solve_forward(pr)
        lvl = traj.state(2)
        assert lvl.shape == (4, op.n)
        assert not np.allclose(lvl[0], lvl[3])


class TestBackwardOracles:
    def test_zero_terminal(self):
        grid, op, tree = laplacian_setup()
        pr = SpdeProblem(op=op, tree=tree, vT=np.zeros(op.n))
        traj = solve_backward(pr)
        for k in range(tree.nt + 1):
            assert np.all(traj.state(k) == 0.0)
        for k in range(tree.nt):
            assert np.all(traj.mart(k) == 0.0)

    def test_deterministic_terminal_no_mart(self):
        grid, op, tree = laplacian_setup(n=5, nt=4)
        rng = np.random.default_rng(1)
        g = rng.standard_normal(op.n)
        pr = SpdeProblem(op=op, tree=tree, vT=g)
        traj = solve_backward(pr)
        for k in range(tree.nt):
            assert np.all(traj.mart(k) == 0.0)
            # deterministic backward parabolic: all nodes equal
            lvl = traj.state(k)
            assert np.all(lvl == lvl[0])

    def test_linear_terminal_closed_form(self):
        grid, op, tree = laplacian_setup(n=4, nt=5, gamma=1.0, sigma=0.1,
                                         eps=0.05)
        rng = np.random.default_rng(2)
        g = rng.standard_normal(op.n)
        vT = AdaptedField.from_terminal(
            tree, tree.brownian(tree.nt)[:, None] * g[None, :])
        pr = SpdeProblem(op=op, tree=tree, vT=vT)
        traj = solve_backward(pr)
        s = dense_step_matrix(op, tree.dt)
        power = np.eye(op.n)
        scale = float(np.abs(g).max())
        for k in range(tree.nt - 1, -1, -1):
            power = s @ power
            expect_v = tree.brownian(k)[:, None] * (power @ g)[None, :]
            expect_big_v = np.broadcast_to(power @ g, (2 ** k, op.n))
            assert np.abs(traj.state(k) - expect_v).max() <= 1e-10 * scale
            assert np.abs(traj.mart(k) - expect_big_v).max() <= 1e-10 * scale

    def test_martingale_representation_reconstructs_children(self):
        grid, op, tree = laplacian_setup(n=4, nt=4, gamma=1.0, sigma=0.2,
                                         eps=0.1)
        rng = np.random.default_rng(3)
        vT = AdaptedField.from_terminal(
            tree, rng.standard_normal((2 ** tree.nt, op.n)))
        pr = SpdeProblem(op=op, tree=tree, vT=vT)
        traj = solve_backward(pr)
        dt = tree.dt
        m = np.eye(op.n) - dt * op.matrix.toarray()
        for k in range(tree.nt):
            drift_part = (m @ traj.state(k).T).T
            mart_part = (m @ traj.mart(k).T).T
            up = drift_part + mart_part * tree.sqdt
            down = drift_part - mart_part * tree.sqdt
            children = traj.state(k + 1)
            scale = np.abs(children).max()
            assert np.abs(children[0::2] - up).max() <= 1e-12 * scale
            assert np.abs(children[1::2] - down).max() <= 1e-12 * scale


class TestDuality:
    def test_forward_backward_duality_exact(self):
        grid, op, tree = laplacian_setup(n=5, nt=5, gamma=1.0, sigma=0.1,
                                         eps=0.06)
        rng = np.random.default_rng(4)
        u0 = rng.standard_normal(op.n)
        vT_dat = rng.standard_normal((2 ** tree.nt, op.n))
        upr = SpdeProblem(op=op, tree=tree, u0=u0)
        vpr = SpdeProblem(op=op, tree=tree,
                          vT=AdaptedField.from_terminal(tree, vT_dat))
        u = solve_forward(upr)
        v = solve_backward(vpr)
        lhs = tree_inner(grid, u.state(tree.nt), v.state(tree.nt))
        rhs = grid_inner(grid, u.state(0)[0], v.state(0)[0])
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_duality_with_forward_data(self):
        # E<u(T), vT> - <u0, v(0)> = sum_k dt (E<f, v_k> + E<F, V_k>)
        grid, op, tree = laplacian_setup(n=4, nt=4)
        rng = np.random.default_rng(5)
        u0 = rng.standard_normal(op.n)
        f = rng.standard_normal((tree.nt, op.n))
        big_f = rng.standard_normal((tree.nt, op.n))
        upr = SpdeProblem(op=op, tree=tree, u0=u0, drift=f,
                          diffusion=big_f)
        vT_dat = rng.standard_normal((2 ** tree.nt, op.n))
        vpr = SpdeProblem(op=op, tree=tree,
                          vT=AdaptedField.from_terminal(tree, vT_dat))
        u = solve_forward(upr)
        v = solve_backward(vpr)
        lhs = tree_inner(grid, u.state(tree.nt), v.state(tree.nt)) \
            - grid_inner(grid, u0, v.state(0)[0])
        rhs = sum(tree.dt * (tree_inner(grid, f[k], v.state(k))
                             + tree_inner(grid, big_f[k], v.mart(k)))
                  for k in range(tree.nt))
        assert lhs == pytest.approx(rhs, rel=1e-11)


class TestEnergy:
    def test_zero_data(self):
        grid, op, tree = laplacian_setup()
        pr = SpdeProblem(op=op, tree=tree, u0=np.zeros(op.n))
        rep = energy_report(solve_forward(pr))
        assert rep.lhs == rep.rhs == 0.0 and rep.c_emp == 0.0

    def test_eigenmode_constant_at_most_one(self):
        grid, op, tree = laplacian_setup(n=6, nt=6)
        _, e1 = eigenmode(op)
        pr = SpdeProblem(op=op, tree=tree, u0=e1)
        rep = energy_report(solve_forward(pr))
        assert rep.c_emp <= 1.0 + 2 * tree.dt
        assert rep.c_emp > 0.5

    def test_stability_across_depths(self):
        grid = build_grid(4, 4)
        op = assemble_grushin(grid, 1.0, 0.1, 0.05)
        rng = np.random.default_rng(6)
        f_fn = rng.standard_normal(op.n)
        big_f_fn = rng.standard_normal(op.n)
        cs = []
        for nt in (6, 8, 10):
            tree = build_tree(nt, 1.0)
            pr = SpdeProblem(op=op, tree=tree, u0=np.zeros(op.n),
                             drift=f_fn, diffusion=big_f_fn)
            cs.append(energy_report(solve_forward(pr)).c_emp)
        mid = np.mean(cs)
        assert all(abs(c - mid) / mid < 0.2 for c in cs)

    def test_mean_square_continuity_rate(self):
        grid = build_grid(4, 4)
        op = assemble_grushin(grid, 1.0, 0.0, 0.05)
        _, e1 = eigenmode(op)

        def worst_jump(nt, u0_scale, noise_scale, T=0.25):
            tree = build_tree(nt, T)
            pr = SpdeProblem(op=op, tree=tree, u0=u0_scale * e1,
                             diffusion=noise_scale * e1
                             if noise_scale else None)
            traj = solve_forward(pr)
            return max(
                tree_inner(grid,
                           traj.state(k + 1)
                           - np.repeat(traj.state(k), 2, axis=0),
                           traj.state(k + 1)
                           - np.repeat(traj.state(k), 2, axis=0))
                for k in range(tree.nt))

        # pure decay of smooth data: jump ~ (dt*lam)^2 once dt*lam < 1
        decay = [worst_jump(nt, 1.0, 0.0) for nt in (4, 8, 16)]
        assert decay[0] > decay[1] > decay[2]
        assert decay[0] / decay[1] > 2.0 and decay[1] / decay[2] > 2.0

        # noisy smooth data: jump dominated by dt * ||F||^2, rate O(dt)
        noisy = [worst_jump(nt, 0.0, 1.0) for nt in (4, 8, 16)]
        assert noisy[0] > noisy[1] > noisy[2]
        assert noisy[1] / noisy[2] > 1.3


class TestRegions:
    def test_nesting_validation(self):
        with pytest.raises(Exception):
            ControlRegions(a=0.5, a1=0.4, a2=0.3)

    def test_masks(self):
        grid = build_grid(7, 7)
        reg = ControlRegions(a=0.5, a1=0.2, a2=0.35)
        m = reg.omega(grid)
        m1, m2 = reg.omega1(grid), reg.omega2(grid)
        assert m.sum() > m2.sum() > m1.sum() > 0
        assert np.all(m2 <= m) and np.all(m1 <= m2)
