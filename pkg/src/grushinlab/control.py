"""Null-control synthesis by penalized quadratic minimization.

The control pair is read off the adjoint pair: backward-solve from terminal
adjoint data, then forward-solve with drift control v * 1_omega and
diffusion control V. The map terminal-data -> u(T) (zero initial state) is
linear and, by the exact discrete duality of the solvers, symmetric
positive semidefinite in the tree inner product; penalized inversion

    (Gram + penalty * I) vT* = -u_free(T)

by conjugate gradient gives controls with E||u(T)||^2 of order penalty.

Two decision-variable modes: "two_block" restricts terminal data to
deterministic + B(T)-linear fields (dimension 2 * grid size; the Gram is
projected orthogonally, so symmetry survives but the complement of the
subspace is uncontrolled), "leaf" uses fully path-indexed terminal data
(exact penalized inversion at small tree depth).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConvergenceError, ParameterError
from .paths import AdaptedField
from .spde import SpdeProblem, solve_backward, solve_forward, tree_inner


@dataclass
class ControlPair:
    drift: AdaptedField        # supported on omega at every node
    diffusion: AdaptedField

    def energies(self, grid, tree):
        g = sum(tree.dt * tree_inner(grid, self.drift.at(k),
                                     self.drift.at(k))
                for k in range(tree.nt))
        big_g = sum(tree.dt * tree_inner(grid, self.diffusion.at(k),
                                         self.diffusion.at(k))
                    for k in range(tree.nt))
        return g, big_g


@dataclass
class HumReport:
    iterations: int
    residual: float
    converged: bool
    final_relative_norm: float
    drift_energy: float
    diffusion_energy: float
    penalty: float
    mode: str
    history: list = dc_field(default_factory=list)


class _Space:
    """Decision space for terminal adjoint data with its inner product."""

    def __init__(self, problem, mode):
        self.problem = problem
        self.mode = mode
        self.grid = problem.op.grid
        self.tree = problem.tree
        n = problem.n
        if mode == "two_block":
            self.dim = 2 * n
        elif mode == "leaf":
            self.dim = (1 << self.tree.nt) * n
        else:
            raise ParameterError(f"unknown decision mode {mode!r}")

    def to_field(self, x):
        n = self.problem.n
        tree = self.tree
        if self.mode == "two_block":
            b0, b1 = x[:n], x[n:]
            vals = (b0[None, :]
                    + tree.brownian(tree.nt)[:, None] * b1[None, :])
            return AdaptedField.from_terminal(tree, vals)
        return AdaptedField.from_terminal(
            tree, x.reshape(1 << tree.nt, n))

    def project(self, nodes):
        """Orthogonal projection of a leaf field onto the decision space."""
        tree = self.tree
        if self.mode == "two_block":
            b = tree.brownian(tree.nt)
            det = np.mean(nodes, axis=0)
            lin = (b @ nodes) / len(b) / tree.horizon
            return np.concatenate([det, lin])
        return np.asarray(nodes, dtype=float).reshape(-1)

    def inner(self, x, y):
        area = self.grid.hx * self.grid.hy
        if self.mode == "two_block":
            n = self.problem.n
            return area * (float(x[:n] @ y[:n])
                           + self.tree.horizon * float(x[n:] @ y[n:]))
        leaves = 1 << self.tree.nt
        return area * float(x @ y) / leaves


def adjoint_controls(vT_field, problem):
    """Backward pair from terminal data; controls (v 1_omega, V)."""
    adj = SpdeProblem(op=problem.op, tree=problem.tree,
                      alpha=problem.alpha, beta=problem.beta,
                      vT=vT_field, regions=problem.regions)
    traj = solve_backward(adj)
    mask = problem.regions.omega(problem.op.grid).astype(float)
    tree = problem.tree
    g_levels = [traj.state(k) * mask[None, :] for k in range(tree.nt)]
    big_g_levels = [traj.mart(k) for k in range(tree.nt)]
    pair = ControlPair(
        drift=AdaptedField(tree=tree, levels=g_levels),
        diffusion=AdaptedField(tree=tree, levels=big_g_levels))
    return pair, traj


def controlled_forward(problem, pair, u0):
    ctl = SpdeProblem(op=problem.op, tree=problem.tree,
                      alpha=problem.alpha, beta=problem.beta,
                      drift=pair.drift, diffusion=pair.diffusion,
                      u0=u0, regions=problem.regions)
    return solve_forward(ctl)


def hum_apply(vT_field, problem):
    """Gram action: terminal data -> (u(T) leaf field, v(0))."""
    pair, adj = adjoint_controls(vT_field, problem)
    traj = controlled_forward(problem, pair, np.zeros(problem.n))
    return traj.state(problem.tree.nt), adj.state(0)[0]


def solve_null_control(u0, problem, penalty=1e-8, tol=1e-10, max_iter=500,
                       mode="two_block"):
    """Penalized null control from initial state u0.

    Conjugate gradient on (Gram + penalty I) in the decision space; returns
    (ControlPair, HumReport). Raises ConvergenceError at the iteration cap
    with the residual in the message.
    """
    if penalty <= 0:
        raise ParameterError("penalty must be positive")
    u0 = np.asarray(u0, dtype=float)
    space = _Space(problem, mode)
    grid, tree = problem.op.grid, problem.tree

    free = solve_forward(SpdeProblem(
        op=problem.op, tree=tree, alpha=problem.alpha, beta=problem.beta,
        u0=u0, regions=problem.regions))
    u_free_t = free.state(tree.nt)

    def apply_op(x):
        gram_x, _ = hum_apply(space.to_field(x), problem)
        return space.project(gram_x) + penalty * x

    rhs = -space.project(u_free_t)
    x = np.zeros(space.dim)
    r = rhs.copy()
    p = r.copy()
    rr = space.inner(r, r)
    rhs_norm = np.sqrt(space.inner(rhs, rhs))
    history = []
    converged = rhs_norm == 0.0
    it = 0
    while not converged and it < max_iter:
        ap = apply_op(p)
        alpha = rr / space.inner(p, ap)
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = space.inner(r, r)
        res = np.sqrt(rr_new) / rhs_norm
        history.append(res)
        it += 1
        if res <= tol:
            converged = True
            break
        p = r + (rr_new / rr) * p
        rr = rr_new

    pair, _ = adjoint_controls(space.to_field(x), problem)
    final = controlled_forward(problem, pair, u0)
    uT = final.state(tree.nt)
    rel = np.sqrt(tree_inner(grid, uT, uT)
                  / tree_inner(grid, u0, u0))
    g_energy, big_g_energy = pair.energies(grid, tree)
    report = HumReport(iterations=it,
                       residual=history[-1] if history else 0.0,
                       converged=converged, final_relative_norm=rel,
                       drift_energy=g_energy,
                       diffusion_energy=big_g_energy,
                       penalty=penalty, mode=mode, history=history)
    if not converged:
        raise ConvergenceError(
            f"conjugate gradient hit the {max_iter}-iteration cap with "
            f"relative residual {report.residual:.3e} > {tol:.1e} "
            f"(final state norm {rel:.3e})")
    return pair, report


def gram_symmetry_defect(problem, seed=0, trials=5, mode="two_block"):
    """max |<Ga,b> - <a,Gb>| / scale over random pairs; psd check included."""
    space = _Space(problem, mode)
    rng = np.random.default_rng(seed)
    worst = 0.0
    min_quad = np.inf
    for _ in range(trials):
        a = rng.standard_normal(space.dim)
        b = rng.standard_normal(space.dim)
        ga = space.project(hum_apply(space.to_field(a), problem)[0])
        gb = space.project(hum_apply(space.to_field(b), problem)[0])
        gab = space.inner(ga, b)
        agb = space.inner(a, gb)
        scale = max(abs(gab), abs(agb), 1e-300)
        worst = max(worst, abs(gab - agb) / scale)
        min_quad = min(min_quad, space.inner(ga, a)
                       / max(space.inner(a, a), 1e-300))
    return worst, min_quad
