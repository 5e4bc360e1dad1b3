"""Tensor-grid discretization of the shifted degenerate/singular operator.

The operator acts on interior nodes of the unit square with homogeneous
Dirichlet conditions imposed by elimination:

    (A v)_ij = D2x v + (x_i + eps)^(2*gamma) * D2y v
               + sigma / (x_i + eps)^2 * v

with D2x, D2y the standard second differences (out-of-range neighbours are
zero). Unknowns are ordered x-major: index = i * ny + j.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .errors import NumericalError, ParameterError


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ParameterError(
                f"need nx, ny >= 2, got ({self.nx}, {self.ny})")

    @property
    def hx(self):
        return 1.0 / (self.nx + 1)

    @property
    def hy(self):
        return 1.0 / (self.ny + 1)

    @property
    def n(self):
        return self.nx * self.ny

    @property
    def x(self):
        return (np.arange(1, self.nx + 1)) * self.hx

    @property
    def y(self):
        return (np.arange(1, self.ny + 1)) * self.hy

    def meshgrid(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def index(self, i, j):
        return i * self.ny + j

    def flatten(self, field2d):
        return np.asarray(field2d).reshape(self.n)

    def unflatten(self, vec):
        return np.asarray(vec).reshape(self.nx, self.ny)

    def sample(self, fn, t=None):
        """Sample a callable (x, y[, t]) on the interior nodes, flattened."""
        X, Y = self.meshgrid()
        vals = fn(X, Y) if t is None else fn(X, Y, t)
        return self.flatten(np.broadcast_to(vals, (self.nx, self.ny)))


def build_grid(nx, ny):
    return Grid2D(nx, ny)


@dataclass
class DiscreteOperator:
    grid: Grid2D
    gamma: float
    sigma: float
    epsilon: float
    matrix: sp.csr_matrix

    @property
    def n(self):
        return self.grid.n

    def __matmul__(self, v):
        return self.matrix @ v

    def quadratic_form(self, v):
        """<-A v, v> scaled by the cell area (H^1-type seminorm square)."""
        return float(-(v @ (self.matrix @ v)) * self.grid.hx * self.grid.hy)

    def dump_coo(self):
        """Coordinate-format text dump: 'row col value' per line."""
        coo = self.matrix.tocoo()
        buf = io.StringIO()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            buf.write("%d %d %.17g\n" % (coo.row[k], coo.col[k],
                                         coo.data[k]))
        return buf.getvalue()


def assemble_grushin(grid, gamma, sigma, epsilon):
    """Assemble the shifted operator as a sparse 5-point-stencil matrix."""
    if not 0.0 <= sigma < 0.25:
        raise ParameterError(
            f"sigma must lie in [0, 1/4) (sharp constant in the inverse-"
            f"square bound), got {sigma}")
    if epsilon < 0.0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    # epsilon = 0 is permitted: nodes are strictly interior (x_i > 0); the
    # shift only keeps the singular diagonal at the stencil's own scale
    nx, ny = grid.nx, grid.ny
    hx2, hy2 = grid.hx ** 2, grid.hy ** 2
    xe = grid.x + epsilon

    ex = np.ones(nx)
    d2x = sp.diags([ex[:-1], -2.0 * ex, ex[:-1]], [-1, 0, 1],
                   shape=(nx, nx)) / hx2
    ey = np.ones(ny)
    d2y = sp.diags([ey[:-1], -2.0 * ey, ey[:-1]], [-1, 0, 1],
                   shape=(ny, ny)) / hy2
    iy = sp.eye(ny)
    coeff = sp.diags(xe ** (2.0 * gamma))
    sing = sp.diags(sigma / xe ** 2)
    a = (sp.kron(d2x, iy) + sp.kron(coeff, d2y)
         + sp.kron(sing, iy))
    return DiscreteOperator(grid=grid, gamma=gamma, sigma=sigma,
                            epsilon=epsilon, matrix=a.tocsr())


def smallest_eigenvalues(op, k):
    """k smallest eigenvalues of -A, ascending, shift-invert Lanczos."""
    if k > min(6, op.n):
        raise ParameterError(f"k={k} exceeds the cap min(6, {op.n})")
    neg_a = (-op.matrix).tocsc()
    vals = spla.eigsh(neg_a, k=k, sigma=0.0, which="LM",
                      return_eigenvectors=False, tol=0)
    vals = np.sort(vals)
    # verify the advertised residual bound
    vecs = spla.eigsh(neg_a, k=k, sigma=0.0, which="LM", tol=0)[1]
    for i in range(k):
        v = vecs[:, i]
        lam = float(v @ (neg_a @ v))
        res = np.linalg.norm(neg_a @ v - lam * v) / max(abs(lam), 1e-300)
        if res > 1e-8:
            raise NumericalError(
                f"eigenvalue residual {res:.2e} above 1e-8")
    return vals


def eigenmode(op, which=0):
    """(eigenvalue, eigenvector) of -A for the which-th smallest mode."""
    neg_a = (-op.matrix).tocsc()
    vals, vecs = spla.eigsh(neg_a, k=which + 1, sigma=0.0, which="LM",
                            tol=0)
    order = np.argsort(vals)
    v = vecs[:, order[which]]
    return float(vals[order[which]]), v / np.linalg.norm(v)


def _hardy_ratio(z_vals, dz_vals, xs):
    # composite midpoint on the cells behind xs (equispaced midpoints)
    h = xs[1] - xs[0]
    num = float(np.sum(z_vals ** 2 / xs ** 2) * h)
    den = float(np.sum(dz_vals ** 2) * h)
    if num == 0.0 and den == 0.0:
        return 0.0, 0.0
    return num / den, num / (4.0 * den)


def hardy_check(samples, seed=0, n_quad=4096, n_knots=8):
    """Monte-Carlo check of the inverse-square (Hardy-type) inequality.

    Draws random cubic splines vanishing at x in {0, 1}, computes by
    composite midpoint quadrature the quotient

        q = int z^2 / x^2 dx / int z_x^2 dx  (bounded by 4)

    and reports both q and the normalized ratio q / 4 (bounded by 1;
    z = x(1-x) gives exactly 1/4). Returns a dict with the worst cases.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    h = 1.0 / n_quad
    xs = (np.arange(n_quad) + 0.5) * h
    knots = np.linspace(0.0, 1.0, n_knots)
    worst_q = 0.0
    worst_ratio = 0.0
    for _ in range(samples):
        vals = rng.standard_normal(n_knots)
        vals[0] = vals[-1] = 0.0
        spline = CubicSpline(knots, vals)
        q, ratio = _hardy_ratio(spline(xs), spline(xs, 1), xs)
        worst_q = max(worst_q, q)
        worst_ratio = max(worst_ratio, ratio)
    return {"samples": samples, "max_quotient": worst_q,
            "max_ratio": worst_ratio, "bound_quotient": 4.0,
            "bound_ratio": 1.0}


def hardy_ratio_of(fn, dfn=None, n_quad=4096):
    """Normalized Hardy ratio q/4 of an explicit test function."""
    h = 1.0 / n_quad
    xs = (np.arange(n_quad) + 0.5) * h
    z = fn(xs)
    dz = dfn(xs) if dfn is not None else np.gradient(z, xs)
    q, ratio = _hardy_ratio(z, dz, xs)
    return ratio
