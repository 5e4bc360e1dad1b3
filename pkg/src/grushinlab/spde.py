"""Forward and backward solvers on the discrete operator and binomial tree.

Forward scheme (drift implicit, noise explicit), one linear solve per node:

    (I - dt*(A + alpha_k)) u_{k+1}(child) =
        u_k(parent) + dt * f_k(parent) + (beta_k u_k + F_k)(parent) * dB

Backward scheme, solve-then-split: with T_k = (I - dt*(A + alpha_k))^-1,
first martingale density then drift,

    m, r = conditional mean / mart of v_{k+1};
    V_k = T_k r;   v_k = T_k (m + dt*beta_k*V_k - dt*f1_k).

Both use the same one-step factor, which makes the discrete
integration-by-parts identity

    E<u(T), vT> = <u0, v(0)> + sum_k dt * (E<f_k, v_k> + E<F_k, V_k>)

exact on the tree (up to float rounding) for alpha = beta = 0. V_k is the
duality-correct martingale coordinate: E_k[dB * T_k v_{k+1}] = dt * V_k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError, ParameterError
from .operators import DiscreteOperator
from .paths import AdaptedField, BrownianTree, conditional_step


@dataclass
class ControlRegions:
    """Control strip omega = (0, a) x I_y and nested inner strips."""
    a: float
    a1: float
    a2: float

    def __post_init__(self):
        if not 0.0 < self.a1 < self.a2 < self.a < 1.0:
            raise ParameterError(
                f"need 0 < a1 < a2 < a < 1, got "
                f"({self.a1}, {self.a2}, {self.a})")

    def mask(self, grid, bound):
        X, _ = grid.meshgrid()
        return grid.flatten(X < bound)

    def omega(self, grid):
        return self.mask(grid, self.a)

    def omega1(self, grid):
        return self.mask(grid, self.a1)

    def omega2(self, grid):
        return self.mask(grid, self.a2)


@dataclass
class SpdeProblem:
    op: DiscreteOperator
    tree: BrownianTree
    alpha: object = None        # None | scalar | (N,) | (nt, N)
    beta: object = None
    drift: object = None        # f   (adds g*1_omega when controlled)
    diffusion: object = None    # F   (adds G)
    u0: Optional[np.ndarray] = None
    vT: object = None           # (N,) | AdaptedField at level nt
    regions: Optional[ControlRegions] = None

    @property
    def n(self):
        return self.op.n

    def coeff_at(self, which, level):
        """Deterministic coefficient value at a time level: (N,) array."""
        data = getattr(self, which)
        if data is None:
            return None
        if isinstance(data, AdaptedField):
            raise ParameterError(f"{which} must be deterministic")
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 0:
            return np.full(self.n, float(arr))
        if arr.ndim == 1:
            return arr
        return arr[level]

    def data_at(self, which, level):
        """Drift/diffusion data at a level: (N,) or per-node (2^k, N)."""
        data = getattr(self, which)
        if data is None:
            return None
        if isinstance(data, AdaptedField):
            return data.at(level)
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 0:
            return np.full(self.n, float(arr))
        if arr.ndim == 1:
            return arr
        return arr[level]


@dataclass
class Trajectory:
    problem: SpdeProblem
    states: AdaptedField
    marts: Optional[list] = None   # V_k arrays, level k = 0 .. nt-1
    kind: str = "forward"

    def state(self, level):
        return self.states.at(level)

    def mart(self, level):
        if self.marts is None:
            raise ParameterError("trajectory has no martingale component")
        return self.marts[level]


class _StepFactor:
    """Cached factorizations of I - dt*(A + alpha_k)."""

    def __init__(self, problem):
        self.problem = problem
        self.cache = {}
        alpha = problem.alpha
        self.per_level = (alpha is not None
                          and np.asarray(alpha).ndim == 2)

    def __call__(self, level):
        key = level if self.per_level else "const"
        if key not in self.cache:
            pr = self.problem
            n = pr.n
            mat = sp.identity(n, format="csc") - pr.tree.dt * pr.op.matrix
            a = pr.coeff_at("alpha", level)
            if a is not None:
                mat = mat - pr.tree.dt * sp.diags(a)
            try:
                self.cache[key] = spla.splu(mat.tocsc())
            except RuntimeError as exc:
                raise NumericalError(
                    f"implicit step matrix singular at level {level}: "
                    f"{exc}") from exc
        return self.cache[key]


def solve_forward(problem) -> Trajectory:
    """March the forward equation up the tree from deterministic u0."""
    pr = problem
    if pr.u0 is None:
        raise ParameterError("forward solve needs u0")
    tree = pr.tree
    dt = tree.dt
    factor = _StepFactor(pr)
    levels = [np.asarray(pr.u0, dtype=float).reshape(1, pr.n).copy()]
    for k in range(tree.nt):
        u = levels[k]
        rhs = u.copy()
        f = pr.data_at("drift", k)
        if f is not None:
            rhs = rhs + dt * np.atleast_2d(f)
        noise = np.zeros_like(u)
        b = pr.coeff_at("beta", k)
        if b is not None:
            noise = noise + b * u
        big_f = pr.data_at("diffusion", k)
        if big_f is not None:
            noise = noise + np.atleast_2d(big_f)
        children = np.repeat(rhs, 2, axis=0)
        inc = tree.increments(k + 1)[:, None]
        children = children + np.repeat(noise, 2, axis=0) * inc
        levels.append(factor(k).solve(children.T).T)
    states = AdaptedField(tree=tree, levels=levels)
    return Trajectory(problem=pr, states=states, kind="forward")


def solve_backward(problem) -> Trajectory:
    """March the backward pair (v, V) down the tree from terminal vT."""
    pr = problem
    if pr.vT is None:
        raise ParameterError("backward solve needs vT")
    tree = pr.tree
    dt = tree.dt
    factor = _StepFactor(pr)
    if isinstance(pr.vT, AdaptedField):
        terminal = pr.vT.at(tree.nt)
    else:
        terminal = np.broadcast_to(np.asarray(pr.vT, dtype=float),
                                   (1 << tree.nt, pr.n)).copy()
    levels = [None] * (tree.nt + 1)
    marts = [None] * tree.nt
    levels[tree.nt] = terminal
    for k in range(tree.nt - 1, -1, -1):
        m, r = conditional_step(levels[k + 1], tree)
        vk_mart = factor(k).solve(r.T).T
        rhs = m
        b = pr.coeff_at("beta", k)
        if b is not None:
            rhs = rhs + dt * b * vk_mart
        f1 = pr.data_at("drift", k)
        if f1 is not None:
            rhs = rhs - dt * np.atleast_2d(f1)
        levels[k] = factor(k).solve(rhs.T).T
        marts[k] = vk_mart
    states = AdaptedField(tree=tree, levels=levels)
    return Trajectory(problem=pr, states=states, marts=marts,
                      kind="backward")


def grid_inner(grid, u, v):
    """Cell-area-weighted inner product of flattened grid functions."""
    return float(np.dot(u, v)) * grid.hx * grid.hy


def tree_inner(grid, a_nodes, b_nodes):
    """E<a, b> over tree nodes at one level."""
    a2 = np.atleast_2d(a_nodes)
    b2 = np.atleast_2d(b_nodes)
    if a2.shape[0] != b2.shape[0]:
        n = max(a2.shape[0], b2.shape[0])
        a2 = np.broadcast_to(a2, (n, a2.shape[1]))
        b2 = np.broadcast_to(b2, (n, b2.shape[1]))
    return float(np.mean(np.sum(a2 * b2, axis=1))) * grid.hx * grid.hy


def mean_square_norm(grid, nodes):
    """E ||u||^2_(L2) at one level."""
    return tree_inner(grid, nodes, nodes)


@dataclass
class EnergyReport:
    sup_mean_square: float
    seminorm_integral: float
    data_norm: float
    lhs: float
    rhs: float
    c_emp: float


def energy_report(traj, data_drift=None, data_diffusion=None):
    """Discrete two-sided energy estimate for a forward trajectory.

    lhs = max(sup_k E||u_k||^2, sum_k dt * E q(u_k)) with q the weighted
    gradient form <-A u, u>; rhs = E||u(0)||^2 + sum_k dt E(|f|^2 + |F|^2).
    The empirical constant is lhs / rhs (0 when both vanish).
    """
    pr = traj.problem
    grid = pr.op.grid
    tree = pr.tree
    dt = tree.dt
    sup_ms = 0.0
    semi = 0.0
    for k in range(tree.nt + 1):
        nodes = traj.state(k)
        sup_ms = max(sup_ms, mean_square_norm(grid, nodes))
        if k >= 1:
            q = float(np.mean([pr.op.quadratic_form(v) for v in nodes]))
            semi += dt * q
    data = 0.0
    for k in range(tree.nt):
        f = pr.data_at("drift", k) if data_drift is None \
            else np.atleast_2d(data_drift[k])
        big_f = pr.data_at("diffusion", k) if data_diffusion is None \
            else np.atleast_2d(data_diffusion[k])
        for d in (f, big_f):
            if d is not None:
                data += dt * mean_square_norm(grid, d)
    u0 = traj.state(0)
    rhs = mean_square_norm(grid, u0) if traj.kind == "forward" else \
        mean_square_norm(grid, traj.state(tree.nt))
    rhs = rhs + data
    lhs = max(sup_ms, semi)
    c_emp = 0.0 if rhs == 0.0 else lhs / rhs
    return EnergyReport(sup_mean_square=sup_ms, seminorm_integral=semi,
                        data_norm=data, lhs=lhs, rhs=rhs, c_emp=c_emp)


def trajectory_to_csv(traj, level):
    """Rows 'path,node,grid_index,value' for one level."""
    import io
    tree = traj.problem.tree
    vals = traj.state(level)
    buf = io.StringIO()
    buf.write("path,node,grid_index,value\n")
    paths = tree.leaf_paths(level)
    for node in range(vals.shape[0]):
        for gi in range(vals.shape[1]):
            buf.write("%s,%d,%d,%.17g\n"
                      % (paths[node], node, gi, vals[node, gi]))
    return buf.getvalue()
