"""Smooth closed-form test fields with exact derivative jets.

A `SmoothField` wraps a generic-arithmetic callable (x, y, t) -> value built
from `ad`-aware primitives; partial derivatives of any order come from
nested dual numbers, so they are exact to rounding and remain available when
the coordinates themselves are duals (needed when an enclosing expression is
being differentiated).
"""

from __future__ import annotations

import numpy as np

from . import ad


class SmoothField:
    def __init__(self, fn, name="field"):
        self.fn = fn
        self.name = name
        self._cache = {(0, 0, 0): fn}

    def _callable(self, i, j, k):
        key = (i, j, k)
        if key not in self._cache:
            if i > 0:
                self._cache[key] = ad.derive(self._callable(i - 1, j, k), 0)
            elif j > 0:
                self._cache[key] = ad.derive(self._callable(i, j - 1, k), 1)
            else:
                self._cache[key] = ad.derive(self._callable(i, j, k - 1), 2)
        return self._cache[key]

    def d(self, i, j, k, x, y, t):
        return self._callable(i, j, k)(x, y, t)

    def jet(self, x, y, t, orders):
        return {o: self.d(*o, x, y, t) for o in orders}

    def __call__(self, x, y, t):
        return self.fn(x, y, t)


def zero_field():
    return SmoothField(lambda x, y, t: 0.0 * x * y * t, name="zero")


def exp_cos_field():
    return SmoothField(lambda x, y, t: ad.exp(x * t) * ad.cos(y),
                       name="exp(xt)cos(y)")


def sep_sine_field():
    return SmoothField(
        lambda x, y, t: ad.sin(np.pi * x) * ad.sin(np.pi * y) * (1.0 + t),
        name="sin(pi x)sin(pi y)(1+t)")


def dirichlet_poly_field(T):
    return SmoothField(
        lambda x, y, t: x * x * y * (1.0 - y) * t * (T - t),
        name="x^2 y(1-y) t(T-t)")


def random_field(rng, name=None):
    """Random C^infinity combination of trig/exp/polynomial separable modes.

    Coefficients stay moderate so fourth derivatives neither vanish nor
    dominate; every draw is smooth on the closed cylinder.
    """
    a = rng.uniform(0.5, 3.0, size=3)
    b = rng.uniform(0.0, 2 * np.pi, size=3)
    p = rng.uniform(0.5, 3.0, size=3)
    q = rng.uniform(0.0, 2 * np.pi, size=3)
    r = rng.uniform(-1.0, 1.0, size=3)
    c = rng.uniform(-1.5, 1.5, size=3)
    d = rng.uniform(-1.0, 1.0)

    def fn(x, y, t):
        out = d * x * x * y * (1.0 - y) * (1.0 + t)
        out = out + c[0] * ad.sin(a[0] * x + b[0]) \
            * ad.sin(p[0] * y + q[0]) * ad.exp(r[0] * t)
        out = out + c[1] * ad.cos(a[1] * x + b[1]) \
            * ad.sin(p[1] * y + q[1]) * ad.exp(r[1] * t)
        out = out + c[2] * ad.sin(a[2] * x + b[2]) \
            * ad.cos(p[2] * y + q[2]) * ad.exp(r[2] * t)
        return out

    return SmoothField(fn, name=name or "random")
