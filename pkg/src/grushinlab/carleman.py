"""Inequality-side evaluation on solver trajectories, plus cut-off fields.

Every weighted term is a discrete space-time-expectation integral

    sum_k dt * E_nodes sum_xy (weight factor)(x, y, t_k+1/2)
                              * |field|^2 * hx * hy

with the time mesh at cell midpoints (the singular time factor blows up at
the endpoints; the state is taken at the left level of each cell). The
common factor exp(2 * max log-weight) is divided out of every term; each
inequality carries the squared weight uniformly, so ratios are unchanged
and the evaluation stays in float range for any parameter magnitudes. The
removed exponent is recorded in the report.

For the forward (regular-family) inequality all terms have equal s- and
Phi-degree, so evaluation in the phase-normalized family equals evaluation
at a rescaled raw s; the effective parameterization is recorded.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ParameterError
from .paths import AdaptedField
from .weights import RegularWeights, SingularWeights, phase_jet

# ---------------------------------------------------------------------------
# cut-off fields


def _smoothstep(u):
    return 6.0 * u ** 5 - 15.0 * u ** 4 + 10.0 * u ** 3


def _smoothstep_d1(u):
    return 30.0 * u ** 2 * (u - 1.0) ** 2


def _smoothstep_d2(u):
    return 60.0 * u * (2.0 * u - 1.0) * (u - 1.0)


@dataclass
class CutoffField:
    """C^2 cut-off in x, constant in y: quintic transition on [lo, hi].

    orientation "rise": 0 for x <= lo, 1 for x >= hi (the inner-region-zero
    convention); "fall": 1 for x <= lo, 0 for x >= hi (the localizer that
    is 1 on the inner strip and 0 outside the outer one).
    """
    lo: float
    hi: float
    orientation: str = "rise"

    def __post_init__(self):
        if not 0.0 < self.lo < self.hi < 1.0:
            raise ParameterError(
                f"need 0 < lo < hi < 1, got ({self.lo}, {self.hi})")
        if self.orientation not in ("rise", "fall"):
            raise ParameterError(f"unknown orientation {self.orientation}")

    def _u(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo)
                       / (self.hi - self.lo), 0.0, 1.0)

    def value(self, x):
        s = _smoothstep(self._u(x))
        return 1.0 - s if self.orientation == "fall" else s

    def d1(self, x):
        u = self._u(x)
        inside = (u > 0.0) & (u < 1.0)
        d = np.where(inside, _smoothstep_d1(u) / (self.hi - self.lo), 0.0)
        return -d if self.orientation == "fall" else d

    def d2(self, x):
        u = self._u(x)
        inside = (u > 0.0) & (u < 1.0)
        d = np.where(inside,
                     _smoothstep_d2(u) / (self.hi - self.lo) ** 2, 0.0)
        return -d if self.orientation == "fall" else d

    def on_grid(self, grid):
        X, _ = grid.meshgrid()
        return grid.flatten(self.value(X))


def make_cutoff(a1, a2, orientation="rise"):
    return CutoffField(lo=a1, hi=a2, orientation=orientation)


# ---------------------------------------------------------------------------
# report container


@dataclass
class InequalityReport:
    name: str
    lhs_terms: dict
    rhs_terms: dict
    log_scale: float
    params_used: dict
    sample: str = ""
    extra: dict = dc_field(default_factory=dict)

    @property
    def lhs_total(self):
        return sum(self.lhs_terms.values())

    @property
    def rhs_total(self):
        return sum(self.rhs_terms.values())

    @property
    def ratio(self):
        l, r = self.lhs_total, self.rhs_total
        if l == 0.0 and r == 0.0:
            return 0.0
        return l / r if r != 0.0 else float("inf")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["term_name", "side", "value"])
        for k, v in self.lhs_terms.items():
            w.writerow([k, "lhs", "%.17g" % v])
        for k, v in self.rhs_terms.items():
            w.writerow([k, "rhs", "%.17g" % v])
        w.writerow(["ratio", "summary", "%.17g" % self.ratio])
        return buf.getvalue()

    def summary(self):
        return {
            "name": self.name,
            "lhs": {k: v for k, v in self.lhs_terms.items()},
            "rhs": {k: v for k, v in self.rhs_terms.items()},
            "lhs_total": self.lhs_total,
            "rhs_total": self.rhs_total,
            "ratio": self.ratio,
            "log_scale": self.log_scale,
            "params": self.params_used,
            "sample": self.sample,
            **self.extra,
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# mesh weights


def auto_s(family, grid, nt_cells, target=4.0):
    """Raw s making max |log weight| over the solver mesh equal target.

    The log weight is linear in s; with |l| <= target the squared weight
    spans exp(-2*target)..1 over the mesh, so every cell contributes to the
    weighted integrals instead of the weight collapsing to one cell. The
    scan covers the closed x-range (the weight peaks on the x=0 edge) and,
    for the regular family, the final time.
    """
    pr = family.params
    dt = pr.horizon / nt_cells
    xs = np.concatenate(([0.0], grid.x, [1.0]))
    X, Y = np.meshgrid(xs, grid.y, indexing="ij")
    ts = list((np.arange(nt_cells) + 0.5) * dt)
    if family.kind == "regular":
        ts.append(pr.horizon)
    lmax = 0.0
    for t in ts:
        lw = family.log_weight_jet(X, Y, t)[(0, 0, 0)]
        lmax = max(lmax, float(np.abs(lw).max()))
    return pr.s * target / lmax


def _gradients(grid, nodes):
    """Centered differences with homogeneous Dirichlet ghosts, per node."""
    arr = np.atleast_2d(nodes)
    m = arr.shape[0]
    v = arr.reshape(m, grid.nx, grid.ny)
    pad = np.zeros((m, grid.nx + 2, grid.ny + 2))
    pad[:, 1:-1, 1:-1] = v
    vx = (pad[:, 2:, 1:-1] - pad[:, :-2, 1:-1]) / (2.0 * grid.hx)
    vy = (pad[:, 1:-1, 2:] - pad[:, 1:-1, :-2]) / (2.0 * grid.hy)
    return (vx.reshape(m, grid.n), vy.reshape(m, grid.n))


def _mean_sq(nodes):
    arr = np.atleast_2d(nodes)
    return np.mean(arr ** 2, axis=0)


def _edge_x0_trace(grid, nodes):
    """One-sided second-order normal derivative on the x=0 edge."""
    arr = np.atleast_2d(nodes)
    v = arr.reshape(arr.shape[0], grid.nx, grid.ny)
    return (4.0 * v[:, 0, :] - v[:, 1, :]) / (2.0 * grid.hx)


class _SingularMesh:
    """Log-weight values and factors on the solver mesh, singular family."""

    def __init__(self, family, grid, tree):
        self.family = family
        self.grid = grid
        self.tree = tree
        pr = family.params
        X, Y = grid.meshgrid()
        self.tmids = (np.arange(tree.nt) + 0.5) * tree.dt
        self.l = np.empty((tree.nt, grid.n))
        self.xi = np.empty(tree.nt)
        for k, t in enumerate(self.tmids):
            jet = family.log_weight_jet(X, Y, t)
            self.l[k] = grid.flatten(jet[(0, 0, 0)])
            self.xi[k] = 1.0 / (t ** 4 * (pr.horizon - t) ** 4)
        self.lmax = float(self.l.max())
        self.th2 = np.exp(2.0 * (self.l - self.lmax))
        self.xe2g = grid.flatten(
            (X + pr.epsilon) ** (2.0 * pr.gamma))

    def integral(self, fields_sq, s_pow, xi_pow, degeneracy=False,
                 mask=None):
        """sum_k dt sum_xy s^p xi^p th2 * E|field|^2 * hx hy."""
        pr = self.family.params
        dt = self.tree.dt
        area = self.grid.hx * self.grid.hy
        total = 0.0
        for k in range(self.tree.nt):
            w = (pr.s ** s_pow) * (self.xi[k] ** xi_pow) * self.th2[k]
            if degeneracy:
                w = w * self.xe2g
            if mask is not None:
                w = w * mask
            total += dt * float(np.sum(w * fields_sq[k])) * area
        return total


def carleman_sides_backward(traj, family, f1=None, explicit_f1=None):
    """Both sides of the singular-weight inequality on a backward pair.

    The diffusion datum defaults to the realized martingale density of the
    trajectory; `explicit_f1`/`f1` allow evaluating with supplied data
    instead. Requires the singular weight family.
    """
    if not isinstance(family, SingularWeights):
        raise ParameterError("backward inequality needs the singular family")
    pr = family.params
    problem = traj.problem
    grid = problem.op.grid
    tree = problem.tree
    mesh = _SingularMesh(family, grid, tree)

    vx_sq, vy_sq, v_sq, big_f_sq, f1_sq = [], [], [], [], []
    for k in range(tree.nt):
        nodes = traj.state(k)
        gx, gy = _gradients(grid, nodes)
        vx_sq.append(np.mean(gx ** 2, axis=0))
        vy_sq.append(np.mean(gy ** 2, axis=0))
        v_sq.append(_mean_sq(nodes))
        mart = traj.mart(k) if explicit_f1 is None else explicit_f1[k]
        big_f_sq.append(_mean_sq(mart))
        f1_sq.append(_mean_sq(f1[k]) if f1 is not None
                     else np.zeros(grid.n))

    omega = problem.regions.omega(grid).astype(float)
    lhs = {
        "gradient_x": mesh.integral(vx_sq, 1, 1),
        "gradient_y_degenerate": mesh.integral(vy_sq, 1, 1,
                                               degeneracy=True),
        "state_cubic": mesh.integral(v_sq, 3, 3),
    }
    rhs = {
        "drift_data": mesh.integral(f1_sq, 0, 0),
        "diffusion_data": mesh.integral(big_f_sq, 2, 2),
        "state_on_omega": mesh.integral(v_sq, 3, 3, mask=omega),
    }
    return InequalityReport(
        name="carleman_backward", lhs_terms=lhs, rhs_terms=rhs,
        log_scale=2.0 * mesh.lmax,
        params_used={"s": pr.s, "lam": pr.lam, "tau": pr.tau,
                     "gamma": pr.gamma, "sigma": pr.sigma,
                     "epsilon": pr.epsilon, "horizon": pr.horizon})


def cacciopoli_sides(traj, family, f1=None):
    """Local energy inequality: inner-strip gradients vs outer-strip state."""
    if not isinstance(family, SingularWeights):
        raise ParameterError("local energy bound needs the singular family")
    pr = family.params
    problem = traj.problem
    grid = problem.op.grid
    tree = problem.tree
    mesh = _SingularMesh(family, grid, tree)

    vx_sq, vy_sq, v_sq, f1_sq = [], [], [], []
    for k in range(tree.nt):
        nodes = traj.state(k)
        gx, gy = _gradients(grid, nodes)
        vx_sq.append(np.mean(gx ** 2, axis=0))
        vy_sq.append(np.mean(gy ** 2, axis=0))
        v_sq.append(_mean_sq(nodes))
        f1_sq.append(_mean_sq(f1[k]) if f1 is not None
                     else np.zeros(grid.n))

    omega = problem.regions.omega(grid).astype(float)
    omega2 = problem.regions.omega2(grid).astype(float)
    lhs = {
        "inner_gradient_x": mesh.integral(vx_sq, 1, 1, mask=omega2),
        "inner_gradient_y_degenerate": mesh.integral(
            vy_sq, 1, 1, degeneracy=True, mask=omega2),
    }
    rhs = {
        "outer_state_cubic": mesh.integral(v_sq, 3, 3, mask=omega),
        "drift_data": mesh.integral(f1_sq, 0, 0),
    }
    return InequalityReport(
        name="cacciopoli", lhs_terms=lhs, rhs_terms=rhs,
        log_scale=2.0 * mesh.lmax,
        params_used={"s": pr.s, "lam": pr.lam, "gamma": pr.gamma,
                     "sigma": pr.sigma, "epsilon": pr.epsilon})


def observability_sides(traj):
    """Initial mean-square energy vs control-region and diffusion energy."""
    problem = traj.problem
    grid = problem.op.grid
    tree = problem.tree
    area = grid.hx * grid.hy
    omega = problem.regions.omega(grid).astype(float)
    lhs = {"initial_energy":
           float(np.sum(_mean_sq(traj.state(0)))) * area}
    v_omega = 0.0
    mart = 0.0
    for k in range(tree.nt):
        v_omega += tree.dt * float(
            np.sum(omega * _mean_sq(traj.state(k)))) * area
        mart += tree.dt * float(np.sum(_mean_sq(traj.mart(k)))) * area
    rhs = {"state_on_omega": v_omega, "diffusion_energy": mart}
    return InequalityReport(
        name="observability", lhs_terms=lhs, rhs_terms=rhs, log_scale=0.0,
        params_used={"a": problem.regions.a})


class _RegularMesh:
    """Phase-normalized regular-family factors on the solver mesh."""

    def __init__(self, family, grid, tree):
        if not isinstance(family, RegularWeights):
            raise ParameterError("forward inequality needs the regular "
                                 "family")
        self.family = family
        self.grid = grid
        self.tree = tree
        pr = family.params
        X, Y = grid.meshgrid()
        self.tmids = (np.arange(tree.nt) + 0.5) * tree.dt
        # L = s * Phi_normalized; Phi factor recovered as L / s
        self.l = np.empty((tree.nt, grid.n))
        for k, t in enumerate(self.tmids):
            jet = family.log_weight_jet(X, Y, t)
            self.l[k] = grid.flatten(jet[(0, 0, 0)])
        self.l_final = grid.flatten(
            family.log_weight_jet(X, Y, pr.horizon)[(0, 0, 0)])
        ys = grid.y
        self.l_edge = np.array([
            [family.log_weight_jet(0.0, yv, t)[(0, 0, 0)] for yv in ys]
            for t in self.tmids])
        self.lmax = float(max(self.l.max(), self.l_final.max(),
                              self.l_edge.max()))
        self.xe2g = grid.flatten((X + pr.epsilon) ** (2.0 * pr.gamma))

    def th2(self, l):
        return np.exp(2.0 * (l - self.lmax))

    def integral(self, fields_sq, sphi_pow, lam_factor, degeneracy=False):
        """Terms carry equal s- and Phi-degree, so s^p Phi^p = L^p with L
        the log weight itself; lam powers enter as a plain factor."""
        dt = self.tree.dt
        area = self.grid.hx * self.grid.hy
        total = 0.0
        for k in range(self.tree.nt):
            w = lam_factor * self.l[k] ** sphi_pow * self.th2(self.l[k])
            if degeneracy:
                w = w * self.xe2g
            total += dt * float(np.sum(w * fields_sq[k])) * area
        return total


def carleman_sides_forward(traj, family, f2=None, big_f2=None,
                           lam_prefactor=None):
    """Both sides of the regular-weight inequality on a forward solution.

    The distinctive left term carries the diffusion datum itself; its
    spatial gradient stays on the right. `big_f2` is the diffusion datum as
    per-level deterministic arrays (defaults to the problem's); boundary
    flux on the x=0 edge via one-sided second-order differences.
    """
    pr = family.params
    problem = traj.problem
    grid = problem.op.grid
    tree = problem.tree
    mesh = _RegularMesh(family, grid, tree)
    lam = pr.lam if lam_prefactor is None else lam_prefactor
    s = pr.s

    wx_sq, wy_sq, w_sq, f2_sq, df2_sq, bf2_sq, edge_sq = \
        [], [], [], [], [], [], []
    for k in range(tree.nt):
        nodes = traj.state(k)
        gx, gy = _gradients(grid, nodes)
        wx_sq.append(np.mean(gx ** 2, axis=0))
        wy_sq.append(np.mean(gy ** 2, axis=0))
        w_sq.append(_mean_sq(nodes))
        fk = f2[k] if f2 is not None else problem.data_at("drift", k)
        f2_sq.append(_mean_sq(fk) if fk is not None
                     else np.zeros(grid.n))
        bk = big_f2[k] if big_f2 is not None \
            else problem.data_at("diffusion", k)
        if bk is None:
            bk = np.zeros(grid.n)
        bf2_sq.append(_mean_sq(bk))
        bgx, bgy = _gradients(grid, bk)
        df2_sq.append(np.mean(bgx ** 2 + bgy ** 2, axis=0))
        edge_sq.append(np.mean(_edge_x0_trace(grid, nodes) ** 2, axis=0))

    lhs = {
        "gradient_x": mesh.integral(wx_sq, 1, lam ** 2),
        "gradient_y_degenerate": mesh.integral(wy_sq, 1, lam ** 2,
                                               degeneracy=True),
        "state_cubic": mesh.integral(w_sq, 3, lam ** 4),
        "diffusion_on_left": mesh.integral(bf2_sq, 1, lam),
    }
    area = grid.hx * grid.hy
    final = (lam ** 2) * float(np.sum(
        mesh.l_final ** 2 * mesh.th2(mesh.l_final)
        * _mean_sq(traj.state(tree.nt)))) * area
    edge_total = 0.0
    for k in range(tree.nt):
        edge_total += tree.dt * float(np.sum(
            lam * mesh.l_edge[k] * mesh.th2(mesh.l_edge[k])
            * edge_sq[k])) * grid.hy
    rhs = {
        "drift_data": mesh.integral(f2_sq, 0, 1.0),
        "diffusion_gradient": mesh.integral(df2_sq, 1, 1.0),
        "final_state": final,
        "boundary_flux": edge_total,
    }
    return InequalityReport(
        name="carleman_forward", lhs_terms=lhs, rhs_terms=rhs,
        log_scale=2.0 * mesh.lmax,
        params_used={"s": s, "lam": pr.lam, "gamma": pr.gamma,
                     "sigma": pr.sigma, "epsilon": pr.epsilon,
                     "phase_ref": family.phase_ref},
        extra={"lam_prefactor": lam})
