"""Inverse source bench: observation map, uniqueness gap, reconstruction.

Sources are a deterministic pair (h(x, t), H(t)); h multiplies the drift
shape R1 and is structurally independent of y, H multiplies the diffusion
shape R2 and is spatially constant. Observations are the boundary traces of
u_y on all four edges, the normal trace u_x on the x=0 edge, and the final
field. With zero coefficients the dynamics are linear, so h feeds only the
expectation part of the observations and H only the martingale part; the
discrete observation coordinates are

    deterministic block:  E[trace] per level,
    martingale block:     E[trace_(k+1) * dB_k] / dt per step
                          (exact on the tree),

and the two blocks decouple exactly. Uniqueness of the continuum problem
translates into a positive smallest singular value of the stacked
observation matrix; reconstruction is ridge-regularized least squares.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg as sla

from .errors import CapacityError, ParameterError
from .fields import SmoothField
from .spde import SpdeProblem, solve_forward

EDGES = ("uy_y0", "uy_y1", "uy_x0", "uy_x1", "ux_x0")


@dataclass
class SourcePair:
    h: np.ndarray          # (nx, nt)
    big_h: np.ndarray      # (nt,)

    def stack(self):
        return np.concatenate([self.h.reshape(-1), self.big_h])

    @classmethod
    def unstack(cls, x, nx, nt):
        return cls(h=x[:nx * nt].reshape(nx, nt).copy(),
                   big_h=x[nx * nt:].copy())


@dataclass
class ShapeFunctions:
    """Smooth nonvanishing shape fields with dual-number derivatives."""
    r1: SmoothField
    r2: SmoothField

    @classmethod
    def from_callables(cls, r1, r2):
        return cls(r1=SmoothField(r1, "R1"), r2=SmoothField(r2, "R2"))

    @classmethod
    def constant(cls):
        return cls.from_callables(lambda x, y, t: 1.0 + 0.0 * x,
                                  lambda x, y, t: 1.0 + 0.0 * x)

    def validate_nonvanishing(self, grid, times, tol=1e-12):
        X, Y = grid.meshgrid()
        for t in times:
            for f in (self.r1, self.r2):
                vals = np.broadcast_to(f(X, Y, t), X.shape)
                if np.min(np.abs(vals)) < tol:
                    raise ParameterError(
                        f"shape {f.name} vanishes on the grid at t={t}")

    def ratio_y_field(self, grid, t):
        """(R2/R1)_y on the grid at one time."""
        X, Y = grid.meshgrid()
        q_y = _broadcast(self._q_dy(X, Y, t), X.shape)
        return grid.flatten(q_y)

    def _q(self, x, y, t):
        return self.r2(x, y, t) / self.r1(x, y, t)

    def _q_dy(self, x, y, t):
        from . import ad
        return ad.derive(self._q, 1)(x, y, t)

    def ratio_condition_constant(self, grid, times, tol=1e-12):
        """Smallest C with |grad (R2/R1)_y| <= C |(R2/R1)_y| on the mesh.

        Returns 0 when the y-derivative vanishes identically (the ratio
        does not depend on y) and inf when it vanishes somewhere while its
        gradient does not.
        """
        from . import ad
        X, Y = grid.meshgrid()
        q_yx = ad.derive(self._q_dy, 0)
        q_yy = ad.derive(self._q_dy, 1)
        worst = 0.0
        for t in times:
            qy = np.abs(_broadcast(self._q_dy(X, Y, t), X.shape))
            gx = _broadcast(q_yx(X, Y, t), X.shape)
            gy = _broadcast(q_yy(X, Y, t), X.shape)
            grad = np.hypot(gx, gy)
            zero = qy < tol
            if np.all(zero & (grad < tol)):
                continue
            if np.any(zero & (grad >= tol)):
                return float("inf")
            worst = max(worst, float(np.max(grad[~zero] / qy[~zero])))
        return worst


def _broadcast(v, shape):
    return np.broadcast_to(np.asarray(v, dtype=float), shape)


@dataclass
class Observations:
    """Boundary and final-time observation data of one forward run."""
    edges: dict              # name -> list over levels 1..nt of (2^k, m)
    final: np.ndarray        # (2^nt, N)
    tree: object
    grid: object

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["block", "edge", "level", "index", "value"])
        for name, levels in self.edges.items():
            for lvl, vals in enumerate(levels, start=1):
                mean = np.mean(vals, axis=0)
                for i, v in enumerate(mean):
                    w.writerow(["deterministic", name, lvl, i, "%.17g" % v])
        return buf.getvalue()


def _traces(grid, nodes):
    arr = np.atleast_2d(nodes)
    m = arr.shape[0]
    v = arr.reshape(m, grid.nx, grid.ny)
    hx, hy = grid.hx, grid.hy
    return {
        # normal y-derivative on the y-edges (second-order one-sided with
        # the Dirichlet zero)
        "uy_y0": (4.0 * v[:, :, 0] - v[:, :, 1]) / (2.0 * hy),
        "uy_y1": -(4.0 * v[:, :, -1] - v[:, :, -2]) / (2.0 * hy),
        # tangential y-derivative on the x-edges: identically zero traces
        "uy_x0": np.zeros((m, grid.ny)),
        "uy_x1": np.zeros((m, grid.ny)),
        # normal x-derivative on the observation edge x = 0
        "ux_x0": (4.0 * v[:, 0, :] - v[:, 1, :]) / (2.0 * hx),
    }


def forward_map(sources, shapes, problem, validate=True):
    """Observations of the forward run driven by (h R1, H R2), u0 = 0.

    `validate=False` skips the nonvanishing-shape check, which the
    uniqueness-collapse experiments disable deliberately.
    """
    grid = problem.op.grid
    tree = problem.tree
    nt = tree.nt
    if sources.h.shape != (grid.nx, nt) or sources.big_h.shape != (nt,):
        raise ParameterError(
            f"source shapes must be ({grid.nx}, {nt}) and ({nt},)")
    if validate:
        shapes.validate_nonvanishing(
            grid, [k * tree.dt for k in range(nt + 1)])
    X, Y = grid.meshgrid()
    drift = np.empty((nt, grid.n))
    diff = np.empty((nt, grid.n))
    for k in range(nt):
        t = k * tree.dt
        r1 = _broadcast(shapes.r1(X, Y, t), X.shape)
        r2 = _broadcast(shapes.r2(X, Y, t), X.shape)
        drift[k] = grid.flatten(sources.h[:, k][:, None] * r1)
        diff[k] = grid.flatten(sources.big_h[k] * r2)
    run = SpdeProblem(op=problem.op, tree=tree, drift=drift,
                      diffusion=diff, u0=np.zeros(grid.n),
                      regions=problem.regions)
    traj = solve_forward(run)
    edges = {name: [] for name in EDGES}
    for k in range(1, nt + 1):
        tr = _traces(grid, traj.state(k))
        for name in EDGES:
            edges[name].append(tr[name])
    return Observations(edges=edges, final=traj.state(nt), tree=tree,
                        grid=grid)


def observation_vector(obs):
    """Stack observation coordinates: deterministic block then martingale."""
    tree, grid = obs.tree, obs.grid
    nt = tree.nt
    det = []
    for k in range(nt):
        for name in EDGES:
            det.append(np.mean(obs.edges[name][k], axis=0))
    det.append(np.mean(obs.final, axis=0))
    mart = []
    for k in range(nt):
        inc = tree.increments(k + 1)
        for name in EDGES:
            vals = obs.edges[name][k]
            mart.append(inc @ vals / len(inc) / tree.dt)
    inc_last = {}
    for k in range(nt):
        # E[u(T) dB_k] / dt: fold the step-k increment up to the leaves
        reps = 1 << (nt - k - 1)
        inc_last[k] = np.repeat(tree.increments(k + 1), reps)
    for k in range(nt):
        mart.append(inc_last[k] @ obs.final / (1 << nt) / tree.dt)
    return np.concatenate([np.concatenate(det), np.concatenate(mart)])


def deterministic_block_size(grid, nt):
    per_level = 2 * grid.nx + 3 * grid.ny
    return nt * per_level + grid.n


def assemble_observation_matrix(shapes, problem, max_unknowns=512,
                                validate=True):
    """Columns are forward maps of unit basis sources, stacked coordinates."""
    grid = problem.op.grid
    nt = problem.tree.nt
    n_unknowns = grid.nx * nt + nt
    if n_unknowns > max_unknowns:
        raise CapacityError(
            f"{n_unknowns} source unknowns exceed the cap {max_unknowns}")
    if validate:
        times = [k * problem.tree.dt for k in range(nt + 1)]
        shapes.validate_nonvanishing(grid, times)
    cols = []
    for j in range(n_unknowns):
        x = np.zeros(n_unknowns)
        x[j] = 1.0
        src = SourcePair.unstack(x, grid.nx, nt)
        cols.append(observation_vector(
            forward_map(src, shapes, problem, validate=False)))
    return np.stack(cols, axis=1)


def nullspace_gap(matrix):
    """Smallest singular value, plus spread diagnostics."""
    svals = sla.svdvals(matrix)
    smin, smax = float(svals[-1]), float(svals[0])
    return {"sigma_min": smin, "sigma_max": smax,
            "condition": smax / smin if smin > 0 else float("inf")}


def reconstruct_sources(obs_vector, shapes, problem, rho=1e-12,
                        matrix=None, truth=None):
    """Ridge least squares (M^T M + rho I) x = M^T b via augmented lstsq."""
    grid = problem.op.grid
    nt = problem.tree.nt
    m = assemble_observation_matrix(shapes, problem) if matrix is None \
        else matrix
    aug = np.vstack([m, np.sqrt(rho) * np.eye(m.shape[1])])
    rhs = np.concatenate([obs_vector, np.zeros(m.shape[1])])
    x, *_ = sla.lstsq(aug, rhs)
    est = SourcePair.unstack(x, grid.nx, nt)
    report = {"rho": rho,
              "residual": float(np.linalg.norm(m @ x - obs_vector))}
    if truth is not None:
        def rel(a, b):
            nb = np.linalg.norm(b)
            return float(np.linalg.norm(a - b) / nb) if nb > 0 else \
                float(np.linalg.norm(a))
        report["h_rel_error"] = rel(est.h, truth.h)
        report["big_h_rel_error"] = rel(est.big_h, truth.big_h)
    return est, report


# ---------------------------------------------------------------------------
# reduction transform


@dataclass
class ReductionFields:
    p: np.ndarray               # (levels, N) state divided by R1
    w: np.ndarray               # (levels, N) y-derivative of p
    residual_norms: list
    max_residual: float
    ratio_y: np.ndarray         # (R2/R1)_y on the grid at t = 0
    condition_constant: float


def _coeff_fields(shapes, grid, t, epsilon, gamma):
    from . import ad
    X, Y = grid.meshgrid()
    xe2g = (X + epsilon) ** (2.0 * gamma)
    r1 = shapes.r1

    def c_of(x, y, tt):
        v = r1(x, y, tt)
        return (-r1.d(0, 0, 1, x, y, tt) + r1.d(2, 0, 0, x, y, tt)
                + (x + epsilon) ** (2.0 * gamma)
                * r1.d(0, 2, 0, x, y, tt)) / v

    def ax_of(x, y, tt):
        return 2.0 * r1.d(1, 0, 0, x, y, tt) / r1(x, y, tt)

    def ay_of(x, y, tt):
        return (2.0 * (x + epsilon) ** (2.0 * gamma)
                * r1.d(0, 1, 0, x, y, tt) / r1(x, y, tt))

    out = {}
    out["ax"] = _broadcast(ax_of(X, Y, t), X.shape)
    out["ay"] = _broadcast(ay_of(X, Y, t), X.shape)
    out["c"] = _broadcast(c_of(X, Y, t), X.shape)
    out["ax_y"] = _broadcast(ad.derive(ax_of, 1)(X, Y, t), X.shape)
    out["ay_y"] = _broadcast(ad.derive(ay_of, 1)(X, Y, t), X.shape)
    out["c_y"] = _broadcast(ad.derive(c_of, 1)(X, Y, t), X.shape)
    out["xe2g"] = xe2g
    return {k: grid.flatten(v) for k, v in out.items()}


def _grad_components(grid, flat):
    v = flat.reshape(grid.nx, grid.ny)
    pad = np.zeros((grid.nx + 2, grid.ny + 2))
    pad[1:-1, 1:-1] = v
    gx = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / (2.0 * grid.hx)
    gy = (pad[1:-1, 2:] - pad[1:-1, :-2]) / (2.0 * grid.hy)
    lx = (pad[2:, 1:-1] - 2.0 * v + pad[:-2, 1:-1]) / grid.hx ** 2
    ly = (pad[1:-1, 2:] - 2.0 * v + pad[1:-1, :-2]) / grid.hy ** 2
    return (gx.reshape(-1), gy.reshape(-1), lx.reshape(-1),
            ly.reshape(-1))


def reduction_transform(levels, shapes, op, dt, guard=1e-12,
                        source_y=None):
    """Divide out R1, differentiate in y, and check the reduced equation.

    `levels` is a deterministic state stack (nt+1, N) (for adapted
    trajectories pass per-level expectations). The residual of the reduced
    equation's drift part is evaluated at interior levels with centered
    time differences; its grid norm decays at the discretization order for
    smooth data. For the admissible source class (drift h(x,t) R1 with h
    independent of y) the reduced equation has no drift-source term; for
    manufactured data with a general drift f, pass `source_y(x, y, t)` =
    d/dy (f / R1). Only nodes two cells from the boundary enter the norm
    (boundary stencils are lower order).
    """
    grid = op.grid
    eps = op.epsilon
    gamma = op.gamma
    sigma = op.sigma
    X, Y = grid.meshgrid()
    levels = np.asarray(levels, dtype=float)
    nt = levels.shape[0] - 1

    p = np.empty_like(levels)
    w = np.empty_like(levels)
    for k in range(nt + 1):
        t = k * dt
        r1 = grid.flatten(_broadcast(shapes.r1(X, Y, t), X.shape))
        if np.min(np.abs(r1)) < guard:
            raise ParameterError("R1 within guard of zero on the grid")
        p[k] = levels[k] / r1
        w[k] = _grad_components(grid, p[k])[1]

    xe = grid.flatten(X) + eps
    inner = np.ones(grid.n, dtype=bool).reshape(grid.nx, grid.ny)
    inner[:2, :] = inner[-2:, :] = False
    inner[:, :2] = inner[:, -2:] = False
    inner = inner.reshape(-1)

    norms = []
    for k in range(1, nt):
        t = k * dt
        co = _coeff_fields(shapes, grid, t, eps, gamma)
        wx, wy, wxx, wyy = _grad_components(grid, w[k])
        px, py, _, _ = _grad_components(grid, p[k])
        dw = (w[k + 1] - w[k - 1]) / (2.0 * dt)
        resid = (dw - wxx - co["xe2g"] * wyy - sigma / xe ** 2 * w[k]
                 - co["ax"] * wx - co["ay"] * wy - co["c"] * w[k]
                 - co["ax_y"] * px - co["ay_y"] * py - co["c_y"] * p[k])
        if source_y is not None:
            resid = resid - grid.flatten(
                _broadcast(source_y(X, Y, t), X.shape))
        norms.append(float(np.sqrt(np.mean(resid[inner] ** 2))))
    ratio_y = shapes.ratio_y_field(grid, 0.0)
    cc = shapes.ratio_condition_constant(
        grid, [k * dt for k in range(nt + 1)])
    return ReductionFields(p=p, w=w, residual_norms=norms,
                           max_residual=max(norms) if norms else 0.0,
                           ratio_y=ratio_y, condition_constant=cc)
