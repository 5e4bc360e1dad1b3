"""Binomial-tree discretization of one Brownian motion.

The tree is the full two-point measure, not a Monte Carlo sample: level k
has 2^k nodes, each path has probability 2^-k, and increments are +-sqrt(dt)
with equal weight. Conditional expectations are exact finite sums, and the
two-point martingale representation

    child = mean + mart * dB(child)

is exact in exact arithmetic (float roundtrip division/multiplication can
differ by a few ulps).

Node convention: the children of node n at level k are 2n (up, dB = +sqrt
(dt)) and 2n+1 (down). Reading the bits of a level-k node index from most to
least significant gives the increment signs in chronological order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ParameterError

MAX_LEVELS = 24


@dataclass(frozen=True)
class BrownianTree:
    nt: int
    horizon: float

    def __post_init__(self):
        if self.nt < 1:
            raise ParameterError(f"need nt >= 1, got {self.nt}")
        if self.nt > MAX_LEVELS:
            raise CapacityError(
                f"nt={self.nt} exceeds the {MAX_LEVELS}-level cap "
                f"(2^nt leaves)")
        if self.horizon <= 0:
            raise ParameterError(f"need horizon > 0, got {self.horizon}")

    @property
    def dt(self):
        return self.horizon / self.nt

    @property
    def sqdt(self):
        return float(np.sqrt(self.dt))

    def times(self):
        return np.arange(self.nt + 1) * self.dt

    def n_nodes(self, level):
        return 1 << level

    def increments(self, level):
        """Signed dB of the step INTO each node of the given level >= 1."""
        n = np.arange(1 << level)
        return np.where(n & 1 == 0, self.sqdt, -self.sqdt)

    def brownian(self, level):
        """B(t_level) at every node of the level."""
        b = np.zeros(1)
        for k in range(1, level + 1):
            b = np.repeat(b, 2) + self.increments(k)
        return b

    def leaf_paths(self, level=None):
        """Bitstrings of the paths at a level (0 = up, 1 = down)."""
        level = self.nt if level is None else level
        return [format(n, f"0{level}b") if level else ""
                for n in range(1 << level)]


def build_tree(nt, horizon):
    return BrownianTree(nt, horizon)


@dataclass
class AdaptedField:
    """Per-node values up to some level; value shape is scalar or (m,).

    Storage is one array per level of shape (2^k,) + value_shape. Values at
    a node depend only on that node's path prefix by construction; there is
    no accessor taking future increments.
    """
    tree: BrownianTree
    levels: list = field(default_factory=list)

    @classmethod
    def from_terminal(cls, tree, values, level=None):
        """Field defined only at one level (e.g. terminal data)."""
        level = tree.nt if level is None else level
        values = np.asarray(values, dtype=float)
        if values.ndim == 0 or values.shape[0] != (1 << level):
            values = np.broadcast_to(
                values, (1 << level,) + values.shape).copy()
        f = cls(tree=tree, levels=[None] * (level + 1))
        f.levels[level] = values
        return f

    @classmethod
    def deterministic(cls, tree, per_level):
        """Adapted field constant across nodes: per_level[k] at level k."""
        f = cls(tree=tree, levels=[])
        for k, v in enumerate(per_level):
            v = np.asarray(v, dtype=float)
            f.levels.append(np.broadcast_to(
                v, (1 << k,) + v.shape).copy())
        return f

    def at(self, level):
        v = self.levels[level]
        if v is None:
            raise ParameterError(f"field not defined at level {level}")
        return v

    @property
    def top_level(self):
        return len(self.levels) - 1


def expectation(field, level):
    """Equal-weight mean over the 2^level nodes (exact tree measure)."""
    return np.mean(field.at(level), axis=0)


def conditional_step(field_next, tree):
    """(mean, mart) arrays at the parent level from level-(k+1) values.

    mean = (up + down)/2, mart = (up - down)/(2 sqrt(dt)); children satisfy
    child = mean + mart * dB(child) exactly up to float rounding.
    """
    up = field_next[0::2]
    down = field_next[1::2]
    mean = 0.5 * (up + down)
    mart = (up - down) / (2.0 * tree.sqdt)
    return mean, mart


def expectation_of_product_with_increment(field, tree, level):
    """E[field_level * dB_(level-1 -> level)] / dt, exact on the tree.

    Extracts the martingale-density coordinate of the last step; equals
    E_(k-1)[mart] averaged over the parent level.
    """
    vals = field.at(level)
    inc = tree.increments(level)
    shape = (vals.shape[0],) + (1,) * (vals.ndim - 1)
    return np.mean(vals * inc.reshape(shape), axis=0) / tree.dt
