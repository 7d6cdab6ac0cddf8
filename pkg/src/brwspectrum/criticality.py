"""Discrete spectrum of the perturbed walk generator via gamma_i(lambda) beta = 1.

Each eigenvalue-branch equation has at most one root because gamma_i is
strictly decreasing; the solver brackets from lambda = 1e-8 (the numerical
stand-in for 0+), doubles an upper bound until the sign flips, and closes
in with Brent's bracketed method to |dlambda| < 1e-10 (1 + lambda).

Critical intensities: beta_c = 1/gamma_0(0) (0 in divergent-G0 regimes) and
beta_c1 = 1/gamma_1(0), where gamma_1(0) is obtained by Richardson
extrapolation over lambda in {1e-6, 1e-7, 1e-8} with the decay exponent
estimated from the data (the limit exists but the approach rate depends on
the kernel class).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_legendre

from .errors import (
    DegenerateInputError,
    InternalConsistencyFailure,
    InvalidParameterError,
    SolverOverflowError,
)
from .gamma import GammaMatrix, SourceConfiguration, build_gamma, eigs
from .green import green_zero_is_divergent
from .kernels import JumpKernel
from .symbol import symbol_alpha_bounds

__all__ = [
    "SpectrumResult",
    "CriticalIntensities",
    "solve_lambda_i",
    "spectrum",
    "beta_c",
    "beta_c1",
    "gap_bound_hopf",
    "gap_bound_cstar",
    "gamma_values",
    "extrapolate_gamma_at_zero",
    "theta_power_integral",
]

LAMBDA_EPS = 1e-8           # numerical stand-in for lambda = 0+
LAMBDA_OVERFLOW = 1e12      # bracket-doubling guard
ROOT_GROUP_RTOL = 1e-7      # relative multiplicity-grouping tolerance
RESIDUAL_TOL = 1e-7         # |gamma_i(lambda_i) beta - 1| acceptance
_EXTRAP_LAMBDAS = (1e-6, 1e-7, 1e-8)


@dataclass(frozen=True)
class SpectrumResult:
    """Distinct positive eigenvalues (descending) with multiplicities."""

    eigenvalues: tuple[tuple[float, int], ...]
    beta: float

    @property
    def total_count(self) -> int:
        return sum(m for _, m in self.eigenvalues)

    @property
    def perron_simple(self) -> bool:
        return not self.eigenvalues or self.eigenvalues[0][1] == 1

    def to_json_dict(self) -> dict:
        return {
            "beta": self.beta,
            "eigenvalues": [
                {"value": v, "multiplicity": m} for v, m in self.eigenvalues
            ],
            "total_count": self.total_count,
            "perron_simple": self.perron_simple,
        }


@dataclass(frozen=True)
class CriticalIntensities:
    beta_c: float
    beta_c1: float | None = None  # None: not computed (N = 1); inf: unbounded
    gap_bound_hopf: float | None = None
    gap_bound_cstar: float | None = None

    def to_json_dict(self) -> dict:
        b1 = self.beta_c1
        return {
            "beta_c": self.beta_c,
            "beta_c1": ("unbounded" if b1 == math.inf else b1),
            "bounds": {"hopf": self.gap_bound_hopf, "cstar": self.gap_bound_cstar},
        }


# ---------------------------------------------------------------------------
# cached branch evaluation

_GAMMA_LRU: dict[tuple, tuple[np.ndarray, float]] = {}


def gamma_values(kernel: JumpKernel, sources: SourceConfiguration, lam: float):
    """(gamma_0 >= ... >= gamma_{N-1}, entry error) at one lambda, cached."""
    key = (kernel.cache_key, sources.points, float(lam))
    hit = _GAMMA_LRU.get(key)
    if hit is None:
        gm = build_gamma(kernel, sources, float(lam))
        hit = (eigs(gm).gammas, gm.entry_error)
        if len(_GAMMA_LRU) > 8192:
            _GAMMA_LRU.clear()
        _GAMMA_LRU[key] = hit
    return hit


def solve_lambda_i(
    kernel: JumpKernel,
    sources: SourceConfiguration,
    beta: float,
    i: int,
) -> float | None:
    """Unique root of gamma_i(lambda) = 1/beta, or None when no root exists.

    Existence test: gamma_i(0+) beta > 1, probed at lambda = 1e-8 (strict
    monotonicity makes the root unique and > 1e-8 in that case).
    """
    if not beta > 0.0:
        raise InvalidParameterError("beta must be positive")
    if not 0 <= i <= sources.n - 1:
        raise InvalidParameterError(f"branch index must lie in [0, {sources.n - 1}]")

    def f(lam: float) -> float:
        return gamma_values(kernel, sources, lam)[0][i] * beta - 1.0

    if f(LAMBDA_EPS) <= 0.0:
        return None
    hi = 1.0
    while f(hi) >= 0.0:
        hi *= 2.0
        if hi > LAMBDA_OVERFLOW:
            raise SolverOverflowError(f"no upper bracket below {LAMBDA_OVERFLOW:g}")
    root = float(brentq(f, LAMBDA_EPS, hi, xtol=1e-10, rtol=1e-15, maxiter=200))
    residual = abs(f(root))
    if residual >= RESIDUAL_TOL:
        raise InternalConsistencyFailure(
            f"branch {i} root residual {residual:.2e} exceeds {RESIDUAL_TOL:g}"
        )
    return root


def spectrum(kernel: JumpKernel, sources: SourceConfiguration, beta: float) -> SpectrumResult:
    """All positive eigenvalues with multiplicities (roots grouped at
    relative distance < 1e-7); asserts the structural guarantees: at most
    N eigenvalues and a simple maximum whenever the spectrum is nonempty."""
    roots = []
    for i in range(sources.n):
        r = solve_lambda_i(kernel, sources, beta, i)
        if r is not None:
            roots.append(r)
    roots.sort(reverse=True)
    grouped: list[list[float]] = []
    for r in roots:
        if grouped and abs(grouped[-1][0] - r) <= ROOT_GROUP_RTOL * max(grouped[-1][0], 1.0):
            grouped[-1].append(r)
        else:
            grouped.append([r])
    eigenvalues = tuple((float(np.mean(g)), len(g)) for g in grouped)
    total = sum(m for _, m in eigenvalues)
    if total > sources.n:
        raise InternalConsistencyFailure("more roots than sources")
    if eigenvalues and eigenvalues[0][1] != 1:
        raise InternalConsistencyFailure(
            "maximal eigenvalue grouped with lower branch (grouping tolerance misconfigured?)"
        )
    return SpectrumResult(eigenvalues, beta)


def extrapolate_gamma_at_zero(kernel: JumpKernel, sources: SourceConfiguration, i: int) -> float:
    """lim_{lambda->0} gamma_i(lambda) by geometric Richardson extrapolation.

    gamma_i(0) - gamma_i(lambda) ~ c lambda^p with p estimated from the
    three probes; falls back to the smallest-lambda value when the
    increments are noise-dominated or non-geometric.
    """
    g = []
    err = 0.0
    for lam in _EXTRAP_LAMBDAS:
        vals, e = gamma_values(kernel, sources, lam)
        g.append(float(vals[i]))
        err = max(err, e)
    d1 = g[1] - g[0]  # gamma(1e-7) - gamma(1e-6) > 0 (decreasing in lambda)
    d2 = g[2] - g[1]
    noise = 10.0 * err + 1e-13
    if d2 <= noise or d1 <= d2:
        return g[2]
    ratio = d1 / d2
    if ratio <= 1.1:
        return g[2]
    return g[2] + d2 / (ratio - 1.0)


def beta_c(kernel: JumpKernel, sources: SourceConfiguration) -> float:
    """0 in divergent-G0 regimes, else 1/gamma_0(0) from the lambda = 0 matrix."""
    if green_zero_is_divergent(kernel):
        return 0.0
    gammas, _ = gamma_values(kernel, sources, 0.0)
    return 1.0 / float(gammas[0])


def beta_c1(kernel: JumpKernel, sources: SourceConfiguration) -> float:
    """1/gamma_1(0) (second critical intensity); math.inf means unbounded."""
    if sources.n < 2:
        raise InvalidParameterError("beta_c1 needs N >= 2")
    g1 = extrapolate_gamma_at_zero(kernel, sources, 1)
    if g1 <= 1e-14:
        return math.inf
    return 1.0 / g1


def gap_bound_hopf(gamma_at_zero: GammaMatrix) -> float:
    """Hopf bound (M - m)/(M + m) gamma_0(0) on the sub-leading eigenvalue;
    requires all entries finite (the finite-G0 regime) and N >= 2."""
    if gamma_at_zero.n < 2:
        raise DegenerateInputError("Hopf bound needs N >= 2")
    entries = gamma_at_zero.entries
    big = float(entries.max())
    small = float(entries.min())
    if not np.all(np.isfinite(entries)):
        raise InvalidParameterError("Hopf bound needs finite Gamma(0) entries")
    if big - small <= 1e-15 * big:
        raise DegenerateInputError("max entry equals min entry")
    dec = eigs(gamma_at_zero)
    bound = (big - small) / (big + small) * float(dec.gammas[0])
    slack = 1e-3 * bound + 10.0 * gamma_at_zero.entry_error
    if float(dec.gammas[1]) > bound + slack:
        raise InternalConsistencyFailure(
            f"gamma_1(0) = {dec.gammas[1]:.6g} exceeds Hopf bound {bound:.6g}"
        )
    return bound


def theta_power_integral(d: int, alpha: float) -> float:
    """int over [-pi, pi]^d of |theta|^(2 - alpha) d theta."""
    if alpha == 2.0:
        return (2.0 * math.pi) ** d
    if d == 1:
        return 2.0 * math.pi ** (3.0 - alpha) / (3.0 - alpha)
    xg, wg = roots_legendre(64)
    if d == 2:
        # 8 x wedge {0 <= psi <= pi/4}, boundary radius pi / cos psi
        a, b = 0.0, math.pi / 4.0
        psi = 0.5 * (a + b) + 0.5 * (b - a) * xg
        vals = (math.pi / np.cos(psi)) ** (4.0 - alpha) / (4.0 - alpha)
        return float(8.0 * 0.5 * (b - a) * np.dot(wg, vals))
    # d = 3: six faces; solid-angle element pi/|p|^3 on the face plane
    x = math.pi * xg
    wx = math.pi * wg
    xx, yy = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(wx, wx)
    integrand = (xx**2 + yy**2 + math.pi**2) ** ((2.0 - alpha) / 2.0)
    return float(6.0 * math.pi / (5.0 - alpha) * np.sum(ww * integrand))


def gap_bound_cstar(kernel: JumpKernel, sources: SourceConfiguration) -> float:
    """(N - 1) C* bound on gamma_1(0) from the symbol lower bound c1 and the
    source geometry; valid in both variance classes (alpha := 2 if finite)."""
    if sources.n < 2:
        raise DegenerateInputError("C* bound needs N >= 2")
    vc = kernel.variance_class
    alpha = vc.alpha if vc.is_heavy else 2.0
    c1, _ = symbol_alpha_bounds(kernel)
    d = kernel.dim
    pts = [np.asarray(p, dtype=float) for p in sources.points]
    max_sq = max(
        float(np.sum((a - b) ** 2)) for k, a in enumerate(pts) for b in pts[k + 1:]
    )
    cstar = max_sq / (2.0 * c1 * (2.0 * math.pi) ** d) * theta_power_integral(d, alpha)
    bound = (sources.n - 1) * cstar
    g1 = extrapolate_gamma_at_zero(kernel, sources, 1)
    if g1 > bound * (1.0 + 1e-3) + 1e-12:
        raise InternalConsistencyFailure(
            f"extrapolated gamma_1(0) = {g1:.6g} exceeds (N-1)C* = {bound:.6g}"
        )
    return bound


def critical_intensities(
    kernel: JumpKernel,
    sources: SourceConfiguration,
    with_bounds: bool = True,
) -> CriticalIntensities:
    """Convenience bundle used by the CLI."""
    bc = beta_c(kernel, sources)
    if sources.n < 2:
        return CriticalIntensities(bc)
    bc1 = beta_c1(kernel, sources)
    hopf = cstar = None
    if with_bounds:
        if not green_zero_is_divergent(kernel):
            hopf = gap_bound_hopf(build_gamma(kernel, sources, 0.0))
        cstar = gap_bound_cstar(kernel, sources)
    return CriticalIntensities(bc, bc1, hopf, cstar)
