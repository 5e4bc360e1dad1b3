"""Pointwise verification of the two weighted identities.

For a deterministic C^4 test field the stochastic differentials reduce to
drift algebra: d(anything) -> (d/dt)(anything) dt, the quadratic-variation
terms vanish, and both identities become exact pointwise equalities between
closed-form expressions. This module evaluates the left side (transformed
operator times weighted equation) and the right side (perfect square, cross
term, the five volume groups, the time derivative of the Y-group, and the
two divergence fluxes) and reports the residual relative to the largest
single term at the point.

Divergences and the Y time derivative are computed by promoting the
corresponding coordinate to a dual number and re-evaluating the flux
expression, so they are exact rather than finite-differenced. The weight is
normalized per point by the constant shift log-weight(point); the identity
is invariant under constant rescaling of the weight and the normalization
keeps every term representable for any parameter magnitudes.

The quadratic-variation bookkeeping (the only other ingredient of the full
stochastic identity) is checked separately as exact algebra.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field as dc_field

from . import ad
from .errors import ParameterError
from .weights import RegularWeights, SingularWeights, weight_jet_from_log

V_ORDERS = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
            (2, 0, 0), (0, 2, 0)]


def _ctx(params, x):
    xe = x + params.epsilon
    g = params.gamma
    w2 = xe ** (2.0 * g)
    return {
        "xe": xe,
        "w2": w2,
        "w4": w2 * w2,
        "w2p": 2.0 * g * xe ** (2.0 * g - 1.0),   # d/dx of w2
        "s2": params.sigma / (xe * xe),
        "s3": params.sigma / (xe * xe * xe),
        "s2g": params.sigma * w2 / (xe * xe),
    }


def _z_entries(th, vj):
    z = {}
    z[(0, 0, 0)] = th[(0, 0, 0)] * vj[(0, 0, 0)]
    for o in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
        z[o] = th[o] * vj[(0, 0, 0)] + th[(0, 0, 0)] * vj[o]
    z[(2, 0, 0)] = (th[(2, 0, 0)] * vj[(0, 0, 0)]
                    + 2.0 * th[(1, 0, 0)] * vj[(1, 0, 0)]
                    + th[(0, 0, 0)] * vj[(2, 0, 0)])
    z[(0, 2, 0)] = (th[(0, 2, 0)] * vj[(0, 0, 0)]
                    + 2.0 * th[(0, 1, 0)] * vj[(0, 1, 0)]
                    + th[(0, 0, 0)] * vj[(0, 2, 0)])
    return z


def _pieces(fam, field, params, x, y, t, shift):
    lw = fam.log_weight_jet(x, y, t)
    th = weight_jet_from_log(lw, shift)
    vj = field.jet(x, y, t, V_ORDERS)
    z = _z_entries(th, vj)
    return lw, th, vj, z, _ctx(params, x)


def _p2(lw, z, c):
    return (z[(2, 0, 0)] + c["w2"] * z[(0, 2, 0)]
            + (lw[(1, 0, 0)] ** 2 + c["w2"] * lw[(0, 1, 0)] ** 2
               + c["s2"]) * z[(0, 0, 0)])


def _volume_common(lw, z, c, tau):
    """X1..X4, shared verbatim by the backward and forward identities."""
    lx, ly = lw[(1, 0, 0)], lw[(0, 1, 0)]
    lxx, lxy, lyy = lw[(2, 0, 0)], lw[(1, 1, 0)], lw[(0, 2, 0)]
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    w2, w4, w2p = c["w2"], c["w4"], c["w2p"]
    x1 = ((tau + 1.0) * lxx - w2 * lyy) * zx ** 2
    x2 = (-w2p * lx + (tau - 1.0) * w2 * lxx + w4 * lyy) * zy ** 2
    x3 = 4.0 * (0.5 * w2p * ly + w2 * lxy) * zx * zy
    x4 = (((3.0 - tau) * lx ** 2 * lxx + w2p * lx * ly ** 2
           + 3.0 * w4 * ly ** 2 * lyy) * z0 ** 2
          + w2 * (4.0 * lx * ly * lxy + lx ** 2 * lyy
                  + (1.0 - tau) * lxx * ly ** 2) * z0 ** 2
          + ((1.0 - tau) * c["s2"] * lxx - 2.0 * c["s3"] * lx
             + c["s2g"] * lyy) * z0 ** 2)
    return x1, x2, x3, x4


def _flux_bracket_x(lw, z, c, tau):
    lx, ly, lxx, lxxx = (lw[(1, 0, 0)], lw[(0, 1, 0)], lw[(2, 0, 0)],
                         lw[(3, 0, 0)])
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    w2 = c["w2"]
    return (-lx * zx ** 2 + w2 * lx * zy ** 2 - lx ** 3 * z0 ** 2
            - w2 * lx * ly ** 2 * z0 ** 2 - c["s2"] * lx * z0 ** 2
            - 2.0 * w2 * ly * zx * zy - tau * lxx * z0 * zx
            + 0.5 * tau * lxxx * z0 ** 2)


def _flux_bracket_y(lw, z, c, tau):
    lx, ly, lxx, lxxy = (lw[(1, 0, 0)], lw[(0, 1, 0)], lw[(2, 0, 0)],
                         lw[(2, 1, 0)])
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    w2, w4 = c["w2"], c["w4"]
    return (-2.0 * w2 * lx * zx * zy + w2 * ly * zx ** 2
            - w4 * ly * zy ** 2 - w2 * lx ** 2 * ly * z0 ** 2
            - w4 * ly ** 3 * z0 ** 2 - c["s2g"] * ly * z0 ** 2
            - tau * w2 * lxx * z0 * zy
            + 0.5 * tau * w2 * lxxy * z0 ** 2)


# ---------------------------------------------------------------------------
# backward identity


def _backward_terms(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    tau = params.tau
    lx, ly, lt = lw[(1, 0, 0)], lw[(0, 1, 0)], lw[(0, 0, 1)]
    lxx, lyy = lw[(2, 0, 0)], lw[(0, 2, 0)]
    z0 = z[(0, 0, 0)]
    p2 = _p2(lw, z, c)
    p = (tau - 1.0) * lxx * z0 - lt * z0 - c["w2"] * lyy * z0
    x1, x2, x3, x4 = _volume_common(lw, z, c, tau)
    x5 = (-lx * lw[(1, 0, 1)] - c["w2"] * ly * lw[(0, 1, 1)]
          - 0.5 * tau * lw[(4, 0, 0)]
          - 0.5 * tau * c["w2"] * lw[(2, 2, 0)]) * z0 ** 2
    eq = (vj[(0, 0, 1)] + vj[(2, 0, 0)] + c["w2"] * vj[(0, 2, 0)]
          + c["s2"] * vj[(0, 0, 0)])
    lhs = p2 * th[(0, 0, 0)] * eq
    return {"lhs": lhs, "p2_sq": p2 * p2, "p2_p": p2 * p,
            "x1": x1, "x2": x2, "x3": x3, "x4": x4, "x5": x5}


def _backward_y(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    return (-0.5 * zx ** 2 - 0.5 * c["w2"] * zy ** 2
            + 0.5 * (lw[(1, 0, 0)] ** 2 + c["w2"] * lw[(0, 1, 0)] ** 2
                     + c["s2"]) * z0 ** 2)


def _backward_flux_x(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    return z[(1, 0, 0)] * z[(0, 0, 1)] + _flux_bracket_x(lw, z, c,
                                                         params.tau)


def _backward_flux_y(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    return (c["w2"] * z[(0, 1, 0)] * z[(0, 0, 1)]
            + _flux_bracket_y(lw, z, c, params.tau))


# ---------------------------------------------------------------------------
# forward identity


def _forward_terms(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    tau = params.tau
    lx, ly, lt = lw[(1, 0, 0)], lw[(0, 1, 0)], lw[(0, 0, 1)]
    lxx, lyy = lw[(2, 0, 0)], lw[(0, 2, 0)]
    z0 = z[(0, 0, 0)]
    q2 = -lt * z0 - _p2(lw, z, c)
    q = -(tau - 1.0) * lxx * z0 + c["w2"] * lyy * z0
    x1, x2, x3, x4 = _volume_common(lw, z, c, tau)
    x5 = (0.5 * lw[(0, 0, 2)] + (1.0 - tau) * lxx * lt
          + 2.0 * lx * lw[(1, 0, 1)]
          + 2.0 * c["w2"] * ly * lw[(0, 1, 1)] + c["w2"] * lyy * lt
          - 0.5 * tau * lw[(4, 0, 0)]
          - 0.5 * tau * c["w2"] * lw[(2, 2, 0)]) * z0 ** 2
    eq = (vj[(0, 0, 1)] - vj[(2, 0, 0)] - c["w2"] * vj[(0, 2, 0)]
          - c["s2"] * vj[(0, 0, 0)])
    lhs = q2 * th[(0, 0, 0)] * eq
    return {"lhs": lhs, "p2_sq": q2 * q2, "p2_p": q2 * q,
            "x1": x1, "x2": x2, "x3": x3, "x4": x4, "x5": x5}


def _forward_y(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    return (0.5 * zx ** 2 + 0.5 * c["w2"] * zy ** 2
            - 0.5 * (lw[(0, 0, 1)] + lw[(1, 0, 0)] ** 2
                     + c["w2"] * lw[(0, 1, 0)] ** 2
                     + c["s2"]) * z0 ** 2)


def _forward_flux_x(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    extra = -lw[(1, 0, 0)] * lw[(0, 0, 1)] * z[(0, 0, 0)] ** 2
    return (-z[(1, 0, 0)] * z[(0, 0, 1)] + extra
            + _flux_bracket_x(lw, z, c, params.tau))


def _forward_flux_y(fam, field, params, x, y, t, shift):
    lw, th, vj, z, c = _pieces(fam, field, params, x, y, t, shift)
    extra = (-c["w2"] * lw[(0, 1, 0)] * lw[(0, 0, 1)]
             * z[(0, 0, 0)] ** 2)
    return (-c["w2"] * z[(0, 1, 0)] * z[(0, 0, 1)] + extra
            + _flux_bracket_y(lw, z, c, params.tau))


# ---------------------------------------------------------------------------
# drivers


@dataclass
class IdentityResult:
    max_rel_residual: float
    rows: list = dc_field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["point", "term_name", "value", "group"])
        for r in self.rows:
            w.writerow([r[0], r[1], "%.17g" % r[2], r[3]])
        return buf.getvalue()


_GROUPS = {"lhs": "lhs", "p2_sq": "square", "p2_p": "cross",
           "x1": "volume", "x2": "volume", "x3": "volume", "x4": "volume",
           "x5": "volume", "dy_dt": "time", "div_x": "flux",
           "div_y": "flux"}


def _drift_residual(kind, test_field, params, points, family):
    if kind == "backward":
        fam = family or SingularWeights(params)
        terms_fn, y_fn = _backward_terms, _backward_y
        fx_fn, fy_fn = _backward_flux_x, _backward_flux_y
    else:
        fam = family or RegularWeights(params)
        terms_fn, y_fn = _forward_terms, _forward_y
        fx_fn, fy_fn = _forward_flux_x, _forward_flux_y
    worst = 0.0
    rows = []
    for idx, (x, y, t) in enumerate(points):
        shift = fam.log_weight_jet(x, y, t)[(0, 0, 0)]
        terms = terms_fn(fam, test_field, params, x, y, t, shift)
        terms["dy_dt"] = ad.derive(
            lambda u, v, w: y_fn(fam, test_field, params, u, v, w, shift),
            2)(x, y, t)
        terms["div_x"] = ad.derive(
            lambda u, v, w: fx_fn(fam, test_field, params, u, v, w, shift),
            0)(x, y, t)
        terms["div_y"] = ad.derive(
            lambda u, v, w: fy_fn(fam, test_field, params, u, v, w, shift),
            1)(x, y, t)
        rhs = sum(v for k, v in terms.items() if k != "lhs")
        scale = max(abs(v) for v in terms.values())
        resid = abs(terms["lhs"] - rhs)
        rel = 0.0 if scale == 0.0 else resid / scale
        worst = max(worst, rel)
        for name, v in terms.items():
            rows.append((idx, name, float(v), _GROUPS[name]))
        rows.append((idx, "residual", float(resid), "residual"))
    return IdentityResult(max_rel_residual=worst, rows=rows)


def drift_residual_backward(test_field, params, points, family=None):
    """Max relative drift residual of the backward identity on the points."""
    return _drift_residual("backward", test_field, params, points, family)


def drift_residual_forward(test_field, params, points, family=None):
    """Max relative drift residual of the forward identity on the points."""
    return _drift_residual("forward", test_field, params, points, family)


# ---------------------------------------------------------------------------
# cross-term ledger: the four sub-identities whose sum is the main identity


def _group_lhs(name, lw, z, c, tau):
    p2 = _p2(lw, z, c)
    lx, ly, lxx = lw[(1, 0, 0)], lw[(0, 1, 0)], lw[(2, 0, 0)]
    if name == "transport_x":
        return -2.0 * lx * z[(1, 0, 0)] * p2
    if name == "transport_y":
        return -2.0 * c["w2"] * ly * z[(0, 1, 0)] * p2
    if name == "zero_order":
        return -tau * lxx * z[(0, 0, 0)] * p2
    if name == "time":
        return p2 * z[(0, 0, 1)]
    raise ParameterError(name)


def _group_volume(name, lw, z, c, tau):
    lx, ly = lw[(1, 0, 0)], lw[(0, 1, 0)]
    lxx, lxy, lyy = lw[(2, 0, 0)], lw[(1, 1, 0)], lw[(0, 2, 0)]
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    w2, w4, w2p = c["w2"], c["w4"], c["w2p"]
    if name == "transport_x":
        return (lxx * zx ** 2 + 2.0 * w2 * lxy * zx * zy
                - (w2p * lx + w2 * lxx) * zy ** 2
                + 3.0 * lx ** 2 * lxx * z0 ** 2
                + 2.0 * w2 * lx * ly * lxy * z0 ** 2
                + (w2p * lx * ly ** 2 + w2 * lxx * ly ** 2) * z0 ** 2
                + (c["s2"] * lxx - 2.0 * c["s3"] * lx) * z0 ** 2)
    if name == "transport_y":
        return ((2.0 * w2p * ly + 2.0 * w2 * lxy) * zx * zy
                - w2 * lyy * zx ** 2 + w4 * lyy * zy ** 2
                + w2 * (2.0 * lx * lxy * ly + lx ** 2 * lyy) * z0 ** 2
                + 3.0 * w4 * ly ** 2 * lyy * z0 ** 2
                + c["s2g"] * lyy * z0 ** 2)
    if name == "zero_order":
        return (-0.5 * tau * lw[(4, 0, 0)] * z0 ** 2 + tau * lxx * zx ** 2
                - 0.5 * tau * w2 * lw[(2, 2, 0)] * z0 ** 2
                + tau * w2 * lxx * zy ** 2
                - tau * lx ** 2 * lxx * z0 ** 2
                - tau * w2 * lxx * ly ** 2 * z0 ** 2
                - tau * c["s2"] * lxx * z0 ** 2)
    if name == "time":
        return (-lx * lw[(1, 0, 1)] - w2 * ly * lw[(0, 1, 1)]) * z0 ** 2
    raise ParameterError(name)


def _group_flux_x(name, lw, z, c, tau):
    lx, ly, lxx = lw[(1, 0, 0)], lw[(0, 1, 0)], lw[(2, 0, 0)]
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    if name == "transport_x":
        return (-lx * zx ** 2 + c["w2"] * lx * zy ** 2 - lx ** 3 * z0 ** 2
                - c["w2"] * lx * ly ** 2 * z0 ** 2
                - c["s2"] * lx * z0 ** 2)
    if name == "transport_y":
        return -2.0 * c["w2"] * ly * zx * zy
    if name == "zero_order":
        return (-tau * lxx * z0 * zx
                + 0.5 * tau * lw[(3, 0, 0)] * z0 ** 2)
    if name == "time":
        return zx * z[(0, 0, 1)]
    raise ParameterError(name)


def _group_flux_y(name, lw, z, c, tau):
    lx, ly, lxx = lw[(1, 0, 0)], lw[(0, 1, 0)], lw[(2, 0, 0)]
    z0, zx, zy = z[(0, 0, 0)], z[(1, 0, 0)], z[(0, 1, 0)]
    w2, w4 = c["w2"], c["w4"]
    if name == "transport_x":
        return -2.0 * w2 * lx * zx * zy
    if name == "transport_y":
        return (w2 * ly * zx ** 2 - w4 * ly * zy ** 2
                - w2 * lx ** 2 * ly * z0 ** 2 - w4 * ly ** 3 * z0 ** 2
                - c["s2g"] * ly * z0 ** 2)
    if name == "zero_order":
        return (-tau * w2 * lxx * z0 * zy
                + 0.5 * tau * w2 * lw[(2, 1, 0)] * z0 ** 2)
    if name == "time":
        return w2 * zy * z[(0, 0, 1)]
    raise ParameterError(name)


def cross_term_ledger(test_field, params, point, family=None):
    """Verify each cross-product expansion of the backward identity.

    The four sub-identities (the time group and the three transports of the
    perfect-square factor) must each balance individually; their sum is the
    main identity. Returns {group: relative residual}.
    """
    fam = family or SingularWeights(params)
    x, y, t = point
    shift = fam.log_weight_jet(x, y, t)[(0, 0, 0)]

    def pieces_at(u, v, w):
        lw = fam.log_weight_jet(u, v, w)
        th = weight_jet_from_log(lw, shift)
        vj = test_field.jet(u, v, w, V_ORDERS)
        return lw, _z_entries(th, vj), _ctx(params, u)

    out = {}
    for name in ("transport_x", "transport_y", "zero_order", "time"):
        lw, z, c = pieces_at(x, y, t)
        lhs = _group_lhs(name, lw, z, c, params.tau)
        vol = _group_volume(name, lw, z, c, params.tau)
        div_x = ad.derive(lambda u, v, w: _group_flux_x(
            name, *pieces_at(u, v, w), params.tau), 0)(x, y, t)
        div_y = ad.derive(lambda u, v, w: _group_flux_y(
            name, *pieces_at(u, v, w), params.tau), 1)(x, y, t)
        rhs = vol + div_x + div_y
        if name == "time":
            rhs = rhs + ad.derive(
                lambda u, v, w: _backward_y(fam, test_field, params,
                                            u, v, w, shift), 2)(x, y, t)
        scale = max(abs(lhs), abs(vol), abs(div_x), abs(div_y), 1e-300)
        out[name] = abs(lhs - rhs) / scale
    return out


# ---------------------------------------------------------------------------
# quadratic-variation bookkeeping


def quadratic_variation_check(params, x, theta, big_f, big_f_x=0.0,
                              big_f_y=0.0, l_x=0.0, l_y=0.0):
    """Exact-algebra ledger for the diffusion quadratic variations.

    Compares factored and expanded forms of (dz)^2, (dz_x)^2, (dz_y)^2 and
    of the J-group built from them; residuals must vanish to rounding.
    """
    c = _ctx(params, x)
    dz2 = (theta * big_f) ** 2
    dzx_fact = (l_x * theta * big_f + theta * big_f_x) ** 2
    dzx_exp = (l_x ** 2 * theta ** 2 * big_f ** 2
               + 2.0 * l_x * theta ** 2 * big_f * big_f_x
               + theta ** 2 * big_f_x ** 2)
    dzy_fact = (l_y * theta * big_f + theta * big_f_y) ** 2
    dzy_exp = (l_y ** 2 * theta ** 2 * big_f ** 2
               + 2.0 * l_y * theta ** 2 * big_f * big_f_y
               + theta ** 2 * big_f_y ** 2)
    j_fact = (0.5 * dzx_fact + 0.5 * c["w2"] * dzy_fact
              - 0.5 * (l_x ** 2 + c["w2"] * l_y ** 2 + c["s2"]) * dz2)
    j_exp = (0.5 * theta ** 2 * (2.0 * l_x * big_f * big_f_x
                                 + big_f_x ** 2)
             + 0.5 * c["w2"] * theta ** 2
             * (2.0 * l_y * big_f * big_f_y + big_f_y ** 2)
             - 0.5 * c["s2"] * theta ** 2 * big_f ** 2)
    scale = max(abs(dz2), abs(dzx_fact), abs(dzy_fact), abs(j_fact), 1.0)
    return {
        "dz_sq": dz2,
        "dzx_sq": dzx_fact,
        "dzy_sq": dzy_fact,
        "j": j_fact,
        "resid_dzx": abs(dzx_fact - dzx_exp) / scale,
        "resid_dzy": abs(dzy_fact - dzy_exp) / scale,
        "resid_j": abs(j_fact - j_exp) / scale,
    }
