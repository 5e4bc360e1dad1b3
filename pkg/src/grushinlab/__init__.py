"""Numerical laboratory for a stochastic Grushin equation with boundary
degeneracy x^(2*gamma) and singular potential sigma/x^2: Carleman weight
families, pointwise weighted-identity verification, binomial-tree SPDE
solvers, inequality-side evaluation, HUM null control, and inverse source
recovery."""

__version__ = "0.1.0"
