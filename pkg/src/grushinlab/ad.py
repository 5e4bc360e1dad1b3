"""Forward-mode dual numbers with tagged nesting levels.

A `Dual` carries a value, one directional derivative, and a level tag.
Payloads may be floats, numpy arrays, or other `Dual`s, so nesting gives
higher and mixed derivatives without truncation error. Tags prevent
perturbation confusion: every `derive` call seeds a fresh level, and
arithmetic between duals of different levels treats the older level as part
of the scalar payload. Newer tags always stay outermost, so extraction is a
single tag comparison at the top.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

_TAGS = itertools.count(1)


class Dual:
    __slots__ = ("val", "dot", "tag")

    # make numpy defer mixed ndarray-Dual arithmetic to our reflected ops
    # instead of broadcasting the Dual into an object array
    __array_ufunc__ = None

    def __init__(self, val, dot, tag=0):
        self.val = val
        self.dot = dot
        self.tag = tag

    def __repr__(self):
        return f"Dual({self.val!r}, {self.dot!r}, tag={self.tag})"

    # -- binary ops: same tag -> dual rule; older other -> constant on our
    #    level; newer other -> we are the constant on its level ------------

    def __add__(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return Dual(self.val + other.val, self.dot + other.dot,
                            self.tag)
            if other.tag > self.tag:
                return Dual(self + other.val, other.dot, other.tag)
        return Dual(self.val + other, self.dot, self.tag)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.dot, self.tag)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Dual) else -1.0 * other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return Dual(self.val * other.val,
                            self.val * other.dot + self.dot * other.val,
                            self.tag)
            if other.tag > self.tag:
                return Dual(self * other.val, self * other.dot, other.tag)
        return Dual(self.val * other, self.dot * other, self.tag)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                q = self.val / other.val
                return Dual(q, (self.dot - q * other.dot) / other.val,
                            self.tag)
            if other.tag > self.tag:
                q = self / other.val
                return Dual(q, -q / other.val * other.dot, other.tag)
        return Dual(self.val / other, self.dot / other, self.tag)

    def __rtruediv__(self, other):
        q = other / self.val
        return Dual(q, -q / self.val * self.dot, self.tag)

    def __pow__(self, p):
        # real exponent, positive base assumed on our domains
        return Dual(self.val ** p, p * self.val ** (p - 1) * self.dot,
                    self.tag)

    # comparisons act on values; used only for domain guards
    def __lt__(self, other):
        return value(self) < value(other)

    def __gt__(self, other):
        return value(self) > value(other)

    def __le__(self, other):
        return value(self) <= value(other)

    def __ge__(self, other):
        return value(self) >= value(other)


def value(u):
    """Strip all dual levels, returning the underlying float/array."""
    while isinstance(u, Dual):
        u = u.val
    return u


def exp(u):
    if isinstance(u, Dual):
        e = exp(u.val)
        return Dual(e, e * u.dot, u.tag)
    if isinstance(u, np.ndarray):
        return np.exp(u)
    try:
        return math.exp(u)
    except OverflowError:
        # saturate like IEEE/numpy; raw weights legitimately overflow for
        # large parameters, consumers needing ratios use log-shifted jets
        return math.inf


def log(u):
    if isinstance(u, Dual):
        return Dual(log(u.val), u.dot / u.val, u.tag)
    if isinstance(u, np.ndarray):
        return np.log(u)
    return math.log(u)


def sin(u):
    if isinstance(u, Dual):
        return Dual(sin(u.val), cos(u.val) * u.dot, u.tag)
    if isinstance(u, np.ndarray):
        return np.sin(u)
    return math.sin(u)


def cos(u):
    if isinstance(u, Dual):
        return Dual(cos(u.val), -1.0 * sin(u.val) * u.dot, u.tag)
    if isinstance(u, np.ndarray):
        return np.cos(u)
    return math.cos(u)


def sqrt(u):
    if isinstance(u, Dual):
        r = sqrt(u.val)
        return Dual(r, 0.5 * u.dot / r, u.tag)
    if isinstance(u, np.ndarray):
        return np.sqrt(u)
    return math.sqrt(u)


def derive(f, i=0):
    """Partial derivative of callable f in its i-th positional argument."""

    def df(*args):
        tag = next(_TAGS)
        promoted = list(args)
        promoted[i] = Dual(args[i], 1.0, tag)
        out = f(*promoted)
        if isinstance(out, Dual) and out.tag == tag:
            return out.dot
        # constant in this direction: structural zero, preserving any
        # remaining outer-level duals
        return 0.0 * out

    return df
