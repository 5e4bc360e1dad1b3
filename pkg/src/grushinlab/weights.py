"""Carleman weight families for the degenerate/singular operator on (0,1)^2.

Two families are implemented, both built on the spatial phase

    phase(x, y) = (x+eps)^(2+2g) * y*(1-y) - mu*(x+eps) + offset

with g the degeneracy exponent. The *singular* family multiplies the
exponentiated, negatively tilted phase by the time factor
xi(t) = 1/(t^4 (T-t)^4), which blows up at t in {0, T}; the *regular* family
replaces the constant offset by the time parabola -(lam-t)^2 + 2*lam^2 and
stays positive on the closed time interval. The full weight is in both cases
exp(s * tilted phase), so its logarithm ("log weight") is the quantity the
weighted identities are written in.

All derivatives are closed form. Jets are dicts keyed by derivative
multi-order: (i, j) for spatial jets (i = x-order <= 4, j = y-order <= 2) and
(i, j, k) with k the t-order for space-time jets. Every evaluator is generic
arithmetic, so coordinates may be floats, numpy arrays, or `ad.Dual`s; the
dual-number oracle in the tests exercises exactly this path.

Magnitudes: the exponentiated phase reaches exp(lam*offset) and the tilt
constant exp(2*lam*offset), so raw weight values underflow/overflow for large
lam or s. Consumers that only need ratios (identity residuals, inequality
sides) should evaluate the log-weight jet and apply a constant shift; the
`weight_jet(..., shift=...)` argument exists for that. Shifting the log
weight by a constant rescales the weight by a constant, which every weighted
identity and inequality is invariant under.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ad
from .errors import DomainError, ParameterError

SPATIAL_ORDERS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
                  (3, 0), (2, 1), (1, 2), (4, 0), (2, 2)]


def select_mu(gamma, delta0):
    """Slope mu clearing the admissibility bound with margin delta0 + 1.

    The bound is sup over [0,1]^2 of (2+2g)(x+1)^(1+2g) y(1-y), attained at
    x=1, y=1/2, so the sup is (2+2g) * 2^(1+2g) / 4. The degenerate edge
    gamma=0 is accepted here for closed-form checks even though the solvers
    require gamma > 0.
    """
    if gamma < 0 or delta0 <= 0:
        raise ParameterError(f"need gamma >= 0 and delta0 > 0, got "
                             f"gamma={gamma}, delta0={delta0}")
    sup = (2 + 2 * gamma) * 2.0 ** (1 + 2 * gamma) / 4.0
    return sup + delta0 + 1.0


def mu_bound_field(gamma, x, y):
    """The field whose sup mu must clear: (2+2g)(x+1)^(1+2g) y(1-y)."""
    return (2 + 2 * gamma) * (x + 1.0) ** (1 + 2 * gamma) * y * (1.0 - y)


def select_big_m(gamma, mu):
    """Offset M = mu + 1, making min phase = 1 (at x=1, y in {0,1})."""
    return mu + 1.0


def default_lambda(delta0):
    """Default first large parameter: 2 + ln(1 + 1/delta0)."""
    return 2.0 + np.log(1.0 + 1.0 / delta0)


def select_lambda_regular(mu, epsilon=0.0, horizon=1.0, delta0=1.0,
                          margin=1.0):
    """Smallest convenient lam keeping the regular phase positive.

    The phase 2*lam^2 - (lam-t)^2 - mu*(x+eps) is worst at x=1, y in {0,1}
    and t in {0, T}; lam >= max(T, sqrt(mu*(1+eps) + margin)) clears it.
    """
    return max(horizon, float(np.sqrt(mu * (1.0 + epsilon) + margin)),
               default_lambda(delta0))


@dataclass
class WeightParams:
    """All weight-family parameters.

    gamma: degeneracy exponent (> 0); sigma: singular strength in [0, 1/4);
    lam, s: the two large parameters; mu, big_m: phase slope and offset;
    delta0: slope margin; tau: identity parameter in (2, 3); epsilon: shift
    of the x coordinate in [0, 1); horizon: final time T > 0.
    """
    gamma: float
    sigma: float
    lam: float
    s: float
    mu: float
    big_m: float
    delta0: float = 1.0
    tau: float = 2.5
    epsilon: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if not 0.0 <= self.sigma < 0.25:
            raise ParameterError(
                f"sigma must lie in [0, 1/4), got {self.sigma}")
        if not 2.0 < self.tau < 3.0:
            raise ParameterError(f"tau must lie in (2, 3), got {self.tau}")
        if self.lam <= 0 or self.s <= 0 or self.delta0 <= 0:
            raise ParameterError("lam, s, delta0 must be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise ParameterError(
                f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.horizon <= 0:
            raise ParameterError(f"horizon must be > 0, got {self.horizon}")

    @classmethod
    def default(cls, gamma, sigma=0.0, horizon=1.0, epsilon=0.0,
                delta0=1.0, tau=2.5, s=1.0, lam=None, mu=None, big_m=None):
        mu = select_mu(gamma, delta0) if mu is None else mu
        big_m = select_big_m(gamma, mu) if big_m is None else big_m
        lam = default_lambda(delta0) if lam is None else lam
        return cls(gamma=gamma, sigma=sigma, lam=lam, s=s, mu=mu,
                   big_m=big_m, delta0=delta0, tau=tau, epsilon=epsilon,
                   horizon=horizon)

    def check_slope(self):
        """Raise unless mu clears its admissibility bound by delta0."""
        sup = (2 + 2 * self.gamma) * 2.0 ** (1 + 2 * self.gamma) / 4.0
        if not self.mu > sup + self.delta0:
            raise ParameterError(
                f"mu={self.mu} violates mu > {sup} + delta0={self.delta0}")
        if self.big_m + min(0.0, -self.mu) <= 0.0:
            raise ParameterError(
                f"big_m={self.big_m} too small: phase not positive")


def _power_coeffs(gamma):
    # falling-factorial coefficients of d^k/dx^k (x)^(2+2g), k = 0..4
    p = 2.0 + 2.0 * gamma
    c = [1.0]
    for k in range(4):
        c.append(c[-1] * (p - k))
    return p, c


def phase_jet(params, x, y, offset=None):
    """Jet of the shifted phase: keys (i, j), i <= 4, j <= 2.

    `offset` replaces the additive constant big_m (used by the regular
    family, where the constant carries the time dependence).
    """
    g = params.gamma
    mu = params.mu
    off = params.big_m if offset is None else offset
    xe = x + params.epsilon
    p, c = _power_coeffs(g)
    a = [c[k] * xe ** (p - k) for k in range(5)]
    b0 = y * (1.0 - y)
    b1 = 1.0 - 2.0 * y
    return {
        (0, 0): a[0] * b0 - mu * xe + off,
        (1, 0): a[1] * b0 - mu,
        (0, 1): a[0] * b1,
        (2, 0): a[2] * b0,
        (1, 1): a[1] * b1,
        (0, 2): -2.0 * a[0],
        (3, 0): a[3] * b0,
        (2, 1): a[2] * b1,
        (1, 2): -2.0 * a[1],
        (4, 0): a[4] * b0,
        (2, 2): -2.0 * a[2],
    }


def exp_jet(p, lam):
    """Jet of exp(lam * p) from the jet p, same key set (Bell polynomials)."""
    e = ad.exp(lam * p[(0, 0)])
    lp = {k: lam * v for k, v in p.items()}
    out = {(0, 0): e}
    out[(1, 0)] = lp[(1, 0)] * e
    out[(0, 1)] = lp[(0, 1)] * e
    out[(2, 0)] = (lp[(2, 0)] + lp[(1, 0)] ** 2) * e
    out[(1, 1)] = (lp[(1, 1)] + lp[(1, 0)] * lp[(0, 1)]) * e
    out[(0, 2)] = (lp[(0, 2)] + lp[(0, 1)] ** 2) * e
    out[(3, 0)] = (lp[(3, 0)] + 3.0 * lp[(1, 0)] * lp[(2, 0)]
                   + lp[(1, 0)] ** 3) * e
    out[(2, 1)] = (lp[(2, 1)] + 2.0 * lp[(1, 0)] * lp[(1, 1)]
                   + lp[(2, 0)] * lp[(0, 1)]
                   + lp[(1, 0)] ** 2 * lp[(0, 1)]) * e
    out[(1, 2)] = (lp[(1, 2)] + 2.0 * lp[(0, 1)] * lp[(1, 1)]
                   + lp[(0, 2)] * lp[(1, 0)]
                   + lp[(0, 1)] ** 2 * lp[(1, 0)]) * e
    out[(4, 0)] = (lp[(4, 0)] + 4.0 * lp[(1, 0)] * lp[(3, 0)]
                   + 3.0 * lp[(2, 0)] ** 2
                   + 6.0 * lp[(1, 0)] ** 2 * lp[(2, 0)]
                   + lp[(1, 0)] ** 4) * e
    out[(2, 2)] = (lp[(2, 2)]
                   + 2.0 * lp[(1, 0)] * lp[(1, 2)]
                   + 2.0 * lp[(0, 1)] * lp[(2, 1)]
                   + 2.0 * lp[(1, 1)] ** 2 + lp[(2, 0)] * lp[(0, 2)]
                   + lp[(1, 0)] ** 2 * lp[(0, 2)]
                   + lp[(0, 1)] ** 2 * lp[(2, 0)]
                   + 4.0 * lp[(1, 0)] * lp[(0, 1)] * lp[(1, 1)]
                   + lp[(1, 0)] ** 2 * lp[(0, 1)] ** 2) * e
    return out


def time_factor_jet(T, t):
    """xi = 1/(t^4 (T-t)^4) and its first two t-derivatives."""
    u = t * (T - t)
    xi = u ** -4.0
    w = 2.0 * t - T
    xi_t = 4.0 * xi * w / u
    xi_tt = xi * (20.0 * w ** 2 + 8.0 * u) / u ** 2
    return {0: xi, 1: xi_t, 2: xi_tt}


@dataclass
class WeightPoint:
    """Weights and derivatives at one space-time point.

    `phase` is the spatial (or space-time, regular kind) phase jet;
    `exp_phase` the jet of its exponential; `time_factor` the singular time
    factor jet (None for the regular kind); `log_weight` the jet of
    log(weight) = s * tilted phase; `weight` the weight jet itself.
    """
    kind: str
    x: float
    y: float
    t: float
    phase: dict
    exp_phase: dict
    time_factor: Optional[dict]
    log_weight: dict
    weight: dict


def weight_jet_from_log(lw, shift=0.0):
    """Second-order jet of exp(lw - shift) from the log-weight jet."""
    th = ad.exp(lw[(0, 0, 0)] - shift)
    g = {k: lw[k] for k in lw}
    out = {(0, 0, 0): th}
    out[(1, 0, 0)] = g[(1, 0, 0)] * th
    out[(0, 1, 0)] = g[(0, 1, 0)] * th
    out[(0, 0, 1)] = g[(0, 0, 1)] * th
    out[(2, 0, 0)] = (g[(2, 0, 0)] + g[(1, 0, 0)] ** 2) * th
    out[(0, 2, 0)] = (g[(0, 2, 0)] + g[(0, 1, 0)] ** 2) * th
    out[(1, 1, 0)] = (g[(1, 1, 0)] + g[(1, 0, 0)] * g[(0, 1, 0)]) * th
    out[(1, 0, 1)] = (g[(1, 0, 1)] + g[(1, 0, 0)] * g[(0, 0, 1)]) * th
    out[(0, 1, 1)] = (g[(0, 1, 1)] + g[(0, 1, 0)] * g[(0, 0, 1)]) * th
    return out


class SingularWeights:
    """Weight family with the endpoint-blowup time factor.

    With `normalized_tilt` the exponentiated phase is divided by the tilt
    constant exp(2*lam*sup phase), i.e. the family is evaluated with the
    effective large parameter s * tilt. The weighted identities and
    inequality ratios are invariant under this reparameterization, and it
    keeps every jet entry float-representable for arbitrarily large lam.
    """

    kind = "singular"

    def __init__(self, params: WeightParams, normalized_tilt=False):
        self.params = params
        self.normalized_tilt = normalized_tilt
        # sup norm of the unshifted phase over the closed square is the
        # offset itself (phase is positive, maximal on the x=0 edge)
        self.sup_phase = params.big_m
        self.log_tilt = 2.0 * params.lam * self.sup_phase
        self.tilt = np.exp(min(self.log_tilt, 709.0))

    def _check_t(self, t):
        T = self.params.horizon
        tv = np.asarray(ad.value(t))
        if np.any(tv <= 0.0) or np.any(tv >= T):
            raise DomainError(
                f"time factor requires t in (0, {T}); got t={tv}")

    def log_weight_jet(self, x, y, t):
        """Jet of l = s * (exp(lam*phase) - tilt) * xi(t); keys (i,j,k)."""
        self._check_t(t)
        pr = self.params
        if self.normalized_tilt:
            # exp(lam*(phase - 2*sup)) - 1: same family at s * tilt
            ph = exp_jet(phase_jet(pr, x, y, offset=-pr.big_m), pr.lam)
            const = 1.0
        else:
            ph = exp_jet(phase_jet(pr, x, y), pr.lam)
            const = self.tilt
        xi = time_factor_jet(pr.horizon, t)
        lw = {}
        for (i, j) in SPATIAL_ORDERS:
            base = ph[(i, j)] - const if (i, j) == (0, 0) else ph[(i, j)]
            for k in (0, 1):
                lw[(i, j, k)] = pr.s * base * xi[k]
        return lw

    def weight_jet(self, x, y, t, shift=0.0):
        return weight_jet_from_log(self.log_weight_jet(x, y, t), shift)

    def point(self, x, y, t):
        pr = self.params
        pj = phase_jet(pr, x, y)
        return WeightPoint(
            kind=self.kind, x=x, y=y, t=t,
            phase=pj, exp_phase=exp_jet(pj, pr.lam),
            time_factor=time_factor_jet(pr.horizon, t),
            log_weight=self.log_weight_jet(x, y, t),
            weight=self.weight_jet(x, y, t))


class RegularWeights:
    """Weight family with the time parabola offset (no endpoint blowup).

    `phase_ref` subtracts a constant from the phase inside the exponential,
    i.e. evaluates the family at the effective parameter
    s * exp(-lam * phase_ref). "auto" uses 2*lam^2 (the peak of the time
    parabola), keeping exponents moderate for any lam; identities and
    inequality ratios are invariant under the reparameterization.
    """

    kind = "regular"

    def __init__(self, params: WeightParams, phase_ref=0.0):
        self.params = params
        if phase_ref == "auto":
            phase_ref = 2.0 * params.lam ** 2
        self.phase_ref = float(phase_ref)

    def _offset(self, t):
        lam = self.params.lam
        return 2.0 * lam * lam - (lam - t) ** 2

    def phase_jet3(self, x, y, t):
        """Space-time jet of the regular phase; keys (i,j,k), k <= 2."""
        pr = self.params
        sp = phase_jet(pr, x, y, offset=self._offset(t))
        jet = {(i, j, 0): v for (i, j), v in sp.items()}
        zero = 0.0 * (sp[(0, 0)] + t)
        for (i, j) in SPATIAL_ORDERS:
            jet[(i, j, 1)] = zero
            jet[(i, j, 2)] = zero
        jet[(0, 0, 1)] = 2.0 * (pr.lam - t) + zero
        jet[(0, 0, 2)] = -2.0 + zero
        return jet

    def log_weight_jet(self, x, y, t):
        """Jet of L = s * exp(lam * phase); separable space/time split."""
        pr = self.params
        spatial = exp_jet(phase_jet(pr, x, y, offset=0.0), pr.lam)
        lam = pr.lam
        m1 = 2.0 * (lam - t)
        gval = ad.exp(lam * (self._offset(t) - self.phase_ref))
        gt = {0: gval, 1: lam * m1 * gval,
              2: (-2.0 * lam + (lam * m1) ** 2) * gval}
        lw = {}
        for (i, j) in SPATIAL_ORDERS:
            for k in (0, 1, 2):
                lw[(i, j, k)] = pr.s * spatial[(i, j)] * gt[k]
        return lw

    def weight_jet(self, x, y, t, shift=0.0):
        return weight_jet_from_log(self.log_weight_jet(x, y, t), shift)

    def point(self, x, y, t):
        pr = self.params
        pj3 = self.phase_jet3(x, y, t)
        sp = {(i, j): pj3[(i, j, 0)] for (i, j) in SPATIAL_ORDERS}
        return WeightPoint(
            kind=self.kind, x=x, y=y, t=t,
            phase=pj3, exp_phase=exp_jet(sp, pr.lam),
            time_factor=None,
            log_weight=self.log_weight_jet(x, y, t),
            weight=self.weight_jet(x, y, t))

    def check_positive(self, n=65):
        """Raise unless the phase is positive on the closed cylinder."""
        pr = self.params
        xs = np.linspace(0.0, 1.0, n)
        ys = np.linspace(0.0, 1.0, n)
        ts = np.linspace(0.0, pr.horizon, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        worst = None
        for t in ts:
            v = phase_jet(pr, X, Y, offset=self._offset(t))[(0, 0)]
            i = np.unravel_index(np.argmin(v), v.shape)
            if worst is None or v[i] < worst[0]:
                worst = (v[i], X[i], Y[i], t)
        if worst[0] <= 0.0:
            raise ParameterError(
                "regular phase not positive: value %.3g at "
                "(x,y,t)=(%.3g,%.3g,%.3g); increase lam" % worst)
        return worst[0]


def eval_singular(params, x, y, t):
    return SingularWeights(params).point(x, y, t)


def eval_regular(params, x, y, t):
    fam = RegularWeights(params)
    fam.check_positive()
    return fam.point(x, y, t)


# ---------------------------------------------------------------------------
# property verification


@dataclass
class PropertyRow:
    property_id: str
    passed: bool
    worst_x: float
    worst_y: float
    worst_t: float
    margin: float
    constant: float


@dataclass
class PropertyReport:
    kind: str
    rows: list = field(default_factory=list)

    @property
    def admissible(self):
        return all(r.passed for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r.passed]

    def row(self, property_id):
        for r in self.rows:
            if r.property_id == property_id:
                return r
        raise KeyError(property_id)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["property_id", "pass", "worst_x", "worst_y", "worst_t",
                    "margin", "constant_C"])
        for r in self.rows:
            w.writerow([r.property_id, int(r.passed),
                        "%.17g" % r.worst_x, "%.17g" % r.worst_y,
                        "%.17g" % r.worst_t,
                        "%.17g" % r.margin, "%.17g" % r.constant])
        return buf.getvalue()


def _bound_row(pid, ratio, X, Y, t):
    i = np.unravel_index(np.argmax(ratio), ratio.shape)
    c = float(ratio[i])
    return PropertyRow(pid, bool(np.isfinite(c)),
                       float(X[i]), float(Y[i]), t, float("nan"), c)


def verify_weight_properties(params, nx=128, ny=128, nt=64, kind="singular"):
    """Check every pointwise weight property on an evaluation mesh.

    Spatial mesh covers the closed square; the time mesh uses the nt cell
    midpoints of (0, T) for the singular kind (the time factor blows up at
    the endpoints) and the closed interval for the regular kind. Sign
    properties report the worst margin; bound properties report the smallest
    admissible constant on the mesh.
    """
    pr = params
    xs = np.linspace(0.0, 1.0, nx)
    ys = np.linspace(0.0, 1.0, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    T = pr.horizon
    rows = []

    def spatial_rows(tag, jet):
        xe = X + pr.epsilon
        r = []
        vx = jet[(1, 0)] + pr.delta0
        i = np.unravel_index(np.argmax(vx), vx.shape)
        r.append(PropertyRow(f"{tag}_x_below_minus_delta0",
                             bool(vx[i] < 0.0), float(X[i]), float(Y[i]),
                             float("nan"), float(-vx[i]), float("nan")))
        prod = jet[(1, 0)] * jet[(3, 0)]
        i = np.unravel_index(np.argmax(prod), prod.shape)
        r.append(PropertyRow(f"{tag}_x_times_xxx_nonpositive",
                             bool(prod[i] <= 0.0), float(X[i]), float(Y[i]),
                             float("nan"), float(-prod[i]), float("nan")))
        r.append(_bound_row(f"{tag}_xxxx_inverse_square_bound",
                            np.abs(jet[(4, 0)]) * xe ** 2, X, Y,
                            float("nan")))
        # exclude the xe = 0 line: the quotients have finite limits there
        pos = xe > 0.0
        r.append(_bound_row(
            f"{tag}_y_yy_degenerate_bound",
            np.where(pos, (np.abs(jet[(0, 1)]) + np.abs(jet[(0, 2)]))
                     / np.where(pos, xe, 1.0) ** (2 + 2 * pr.gamma), 0.0),
            X, Y, float("nan")))
        mixed = (np.abs(jet[(1, 1)]) + np.abs(jet[(2, 0)])
                 + np.abs(jet[(2, 1)]) + np.abs(jet[(1, 2)])
                 + np.abs(jet[(2, 2)]))
        r.append(_bound_row(
            f"{tag}_mixed_degenerate_bound",
            np.where(pos, mixed / np.where(pos, xe, 1.0) ** (2 * pr.gamma),
                     0.0), X, Y, float("nan")))
        return r

    bound = mu_bound_field(pr.gamma, X, Y)
    i = np.unravel_index(np.argmax(bound), bound.shape)
    rows.append(PropertyRow("mu_condition",
                            bool(pr.mu > bound[i] + pr.delta0),
                            float(X[i]), float(Y[i]), float("nan"),
                            float(pr.mu - pr.delta0 - bound[i]),
                            float("nan")))

    if kind == "singular":
        jet = phase_jet(pr, X, Y)
        rows.extend(spatial_rows("phase", jet))
        v = jet[(0, 0)]
        i = np.unravel_index(np.argmin(v), v.shape)
        rows.append(PropertyRow("phase_positive", bool(v[i] > 0.0),
                                float(X[i]), float(Y[i]), float("nan"),
                                float(v[i]), float("nan")))

        dt = T / nt
        ts = (np.arange(nt) + 0.5) * dt
        xij = time_factor_jet(T, ts)
        xi, xit = xij[0], xij[1]
        rows.append(PropertyRow("time_factor_positive",
                                bool(np.min(xi) > 0.0), float("nan"),
                                float("nan"), float(ts[np.argmin(xi)]),
                                float(np.min(xi)), float("nan")))
        ratio = np.abs(xit) / xi ** 1.25
        k = int(np.argmax(ratio))
        rows.append(PropertyRow("time_factor_derivative_bound",
                                bool(np.isfinite(ratio[k])), float("nan"),
                                float("nan"), float(ts[k]), float("nan"),
                                float(ratio[k])))
        half = nt // 2
        dec = np.diff(xi[:half])   # toward t=0 the factor grows
        inc = np.diff(xi[-half:])
        blow = bool(np.all(dec <= 0.0) and np.all(inc >= 0.0))
        rows.append(PropertyRow("time_factor_endpoint_blowup", blow,
                                float("nan"), float("nan"), float(ts[0]),
                                float(xi[0] - xi[half]), float("nan")))

        # boundary signs of the tilted-phase gradient; xi > 0, so the sign
        # comes from the spatial factor lam * phase_x,y * exp(lam*phase)
        ye = np.linspace(0.0, 1.0, ny)
        for xedge, pid in ((0.0, "tilted_phase_x_nonpositive_x0"),
                           (1.0, "tilted_phase_x_nonpositive_x1")):
            j = phase_jet(pr, np.full_like(ye, xedge), ye)
            g = pr.lam * j[(1, 0)] * np.exp(
                pr.lam * (j[(0, 0)] - pr.big_m))
            i = int(np.argmax(g))
            rows.append(PropertyRow(pid, bool(g[i] <= 0.0), xedge,
                                    float(ye[i]), float("nan"),
                                    float(-g[i]), float("nan")))
        xexs = np.linspace(0.0, 1.0, nx)
        j0 = phase_jet(pr, xexs, np.zeros_like(xexs))
        g0 = pr.lam * j0[(0, 1)] * np.exp(pr.lam * (j0[(0, 0)] - pr.big_m))
        i = int(np.argmin(g0))
        rows.append(PropertyRow("tilted_phase_y_nonnegative_y0",
                                bool(g0[i] >= 0.0), float(xexs[i]), 0.0,
                                float("nan"), float(g0[i]), float("nan")))
        j1 = phase_jet(pr, xexs, np.ones_like(xexs))
        g1 = pr.lam * j1[(0, 1)] * np.exp(pr.lam * (j1[(0, 0)] - pr.big_m))
        i = int(np.argmax(g1))
        rows.append(PropertyRow("tilted_phase_y_nonpositive_y1",
                                bool(g1[i] <= 0.0), float(xexs[i]), 1.0,
                                float("nan"), float(-g1[i]), float("nan")))

    elif kind == "regular":
        fam = RegularWeights(pr)
        jet = phase_jet(pr, X, Y, offset=0.0)
        rows.extend(spatial_rows("phase", jet))

        # exact time-derivative structure
        ts = np.linspace(0.0, T, nt)
        j3 = fam.phase_jet3(0.25, 0.5, ts)
        err = float(np.max(np.abs(j3[(0, 0, 1)] - 2.0 * (pr.lam - ts))))
        err = max(err, float(np.max(np.abs(j3[(0, 0, 2)] + 2.0))))
        err = max(err, float(np.max(np.abs(j3[(1, 0, 1)]))),
                  float(np.max(np.abs(j3[(0, 1, 1)]))))
        rows.append(PropertyRow("phase_time_derivative_structure",
                                err == 0.0, 0.25, 0.5, float(ts[0]),
                                -err, float("nan")))

        worst = (np.inf, 0.0, 0.0, 0.0)
        spatial = jet[(0, 0)]
        for t in ts:
            v = spatial + (2.0 * pr.lam ** 2 - (pr.lam - t) ** 2)
            i = np.unravel_index(np.argmin(v), v.shape)
            if v[i] < worst[0]:
                worst = (float(v[i]), float(X[i]), float(Y[i]), float(t))
        rows.append(PropertyRow("phase_positive_spacetime",
                                worst[0] > 0.0, worst[1], worst[2],
                                worst[3], worst[0], float("nan")))
    else:
        raise ParameterError(f"unknown weight kind {kind!r}")

    return PropertyReport(kind=kind, rows=rows)
