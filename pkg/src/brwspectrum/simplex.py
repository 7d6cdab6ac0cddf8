"""Closed-form spectrum for sources at regular-simplex vertices.

When the kernel is invariant under coordinate permutations and the sources
sit at e_1 .. e_N (N <= d), every off-diagonal Green value equals
G_lambda(z*) with z* = e_1 - e_2, and the determinant condition factors
into two scalar monotone equations:

    leading:   G_lambda(0) + (N-1) G_lambda(z*) = 1/beta      (simple root)
    repeated:  G_lambda(0) -       G_lambda(z*) = 1/beta      (mult. N-1)

This gives exact critical intensities to cross-check the general solver:
beta_c = 1/(G_0 + (N-1) G_0(z*)) and beta_c1 = 1/(G_0 - G_0(z*)).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameterError, SolverOverflowError
from .gamma import SourceConfiguration, simplex_sources
from .green import green_batch, green_zero, green_zero_is_divergent
from .kernels import JumpKernel

__all__ = [
    "SimplexConfiguration",
    "is_permutation_symmetric",
    "simplex_betas",
    "simplex_lambdas",
]

_POSITIVE_ROOT_FLOOR = 1e-12  # roots at or below this count as absent
_LAMBDA_OVERFLOW = 1e12


@dataclass(frozen=True)
class SimplexConfiguration:
    dimension: int
    n: int

    def __post_init__(self):
        if not 2 <= self.n <= self.dimension:
            raise InvalidParameterError("simplex needs 2 <= N <= d")

    @property
    def sources(self) -> SourceConfiguration:
        return simplex_sources(self.dimension, self.n)

    @property
    def z_star(self) -> tuple[int, ...]:
        z = [0] * self.dimension
        z[0], z[1] = 1, -1
        return tuple(z)


def is_permutation_symmetric(kernel: JumpKernel) -> bool:
    """True iff a(Rz) = a(z) for every coordinate permutation R.

    Checked on the group generators (adjacent transposition and full
    cycle), which suffices; rates are compared exactly.
    """
    d = kernel.dim
    if d == 1:
        return True
    lookup = {tuple(z): r for z, r in zip(kernel.offsets.tolist(), kernel.rates.tolist())}

    def invariant_under(perm) -> bool:
        for z, r in lookup.items():
            if lookup.get(tuple(z[p] for p in perm)) != r:
                return False
        return True

    transposition = (1, 0) + tuple(range(2, d))
    cycle = tuple(range(1, d)) + (0,)
    return invariant_under(transposition) and invariant_under(cycle)


def _require_simplex(kernel: JumpKernel, n: int) -> SimplexConfiguration:
    if not is_permutation_symmetric(kernel):
        raise InvalidParameterError("kernel is not permutation symmetric")
    return SimplexConfiguration(kernel.dim, n)


def _g_pair(kernel: JumpKernel, lam: float, z_star) -> tuple[float, float]:
    vals, _ = green_batch(kernel, [lam], [(0,) * kernel.dim, z_star])
    return float(vals[0, 0]), float(vals[0, 1])


def simplex_betas(kernel: JumpKernel, n: int) -> tuple[float, float]:
    """(beta_c, beta_c1) from the closed forms; divergent G_0 gives
    beta_c = 0 with beta_c1 from the extrapolated limit of
    G_lambda(0) - G_lambda(z*)."""
    cfg = _require_simplex(kernel, n)
    z = cfg.z_star
    if not green_zero_is_divergent(kernel):
        g0 = green_zero(kernel, (0,) * kernel.dim).value
        gz = green_zero(kernel, z).value
        return 1.0 / (g0 + (n - 1) * gz), 1.0 / (g0 - gz)
    # divergent regime: the difference has a finite limit
    diffs = []
    for lam in (1e-6, 1e-7, 1e-8):
        g0, gz = _g_pair(kernel, lam, z)
        diffs.append(g0 - gz)
    d1, d2 = diffs[1] - diffs[0], diffs[2] - diffs[1]
    limit = diffs[2]
    if d2 > 1e-13 and d1 > d2 and d1 / d2 > 1.1:
        limit = diffs[2] + d2 / (d1 / d2 - 1.0)
    return 0.0, 1.0 / limit


def simplex_lambdas(
    kernel: JumpKernel, n: int, beta: float
) -> tuple[float | None, tuple[float | None, int]]:
    """Roots of the two scalar equations: (lambda_0, (lambda_rep, N-1)).

    Either entry is None when its equation has no strictly positive root
    (roots at lambda <= 1e-12 are treated as absent).
    """
    if not beta > 0.0:
        raise InvalidParameterError("beta must be positive")
    cfg = _require_simplex(kernel, n)
    z = cfg.z_star
    inv_beta = 1.0 / beta

    def leading(lam: float) -> float:
        g0, gz = _g_pair(kernel, lam, z)
        return g0 + (n - 1) * gz - inv_beta

    def repeated(lam: float) -> float:
        g0, gz = _g_pair(kernel, lam, z)
        return g0 - gz - inv_beta

    return _positive_root(leading), (_positive_root(repeated), n - 1)


def _positive_root(f) -> float | None:
    lo = 1e-13
    if f(lo) <= 0.0:
        return None
    hi = 1.0
    while f(hi) >= 0.0:
        hi *= 2.0
        if hi > _LAMBDA_OVERFLOW:
            raise SolverOverflowError("no upper bracket for simplex equation")
    root = float(brentq(f, lo, hi, xtol=1e-12, rtol=1e-15, maxiter=200))
    return root if root > _POSITIVE_ROOT_FLOOR else None
