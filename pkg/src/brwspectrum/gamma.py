"""The N x N matrix Gamma(lambda) of pairwise source Green values.

Gamma_ij(lambda) = G_lambda(x_j - x_i) is symmetric, strictly positive for
lambda > 0, positive-definite, with constant diagonal G_lambda(0). Its
eigenvalue curves gamma_i(lambda) are strictly decreasing and carry the
whole discrete-spectrum problem: lambda is an eigenvalue of the perturbed
walk generator iff gamma_i(lambda) * beta = 1 for some branch i.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DivergentGreenError,
    InvalidParameterError,
    NumericalDegeneracyError,
    QuadratureFailureError,
)
from .green import DEFAULT_ATOL, DEFAULT_RTOL, green_batch, green_zero_is_divergent
from .kernels import JumpKernel

__all__ = [
    "SourceConfiguration",
    "GammaMatrix",
    "EigenDecomposition",
    "build_gamma",
    "eigs",
    "jacobi_eigh",
    "gamma_curve",
    "GammaCurve",
]

_MAX_SOURCES = 256


@dataclass(frozen=True)
class SourceConfiguration:
    """N distinct lattice points with one common branching intensity beta."""

    points: tuple[tuple[int, ...], ...]
    beta: float = 0.0

    def __post_init__(self):
        pts = tuple(tuple(int(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) == 0:
            raise InvalidParameterError("need at least one source")
        dims = {len(p) for p in pts}
        if len(dims) != 1:
            raise InvalidParameterError("sources must share one dimension")
        if len(set(pts)) != len(pts):
            raise InvalidParameterError("source points must be pairwise distinct")
        if self.beta < 0.0:
            raise InvalidParameterError("beta must be >= 0")

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def with_beta(self, beta: float) -> "SourceConfiguration":
        return SourceConfiguration(self.points, beta)


def simplex_sources(d: int, n: int, beta: float = 0.0) -> SourceConfiguration:
    """Standard basis vectors e_1 .. e_n in Z^d (regular simplex vertices)."""
    if not 1 <= n <= d:
        raise InvalidParameterError("simplex needs 1 <= N <= d")
    pts = []
    for i in range(n):
        e = [0] * d
        e[i] = 1
        pts.append(tuple(e))
    return SourceConfiguration(tuple(pts), beta)


@dataclass(frozen=True)
class GammaMatrix:
    lam: float
    entries: np.ndarray
    entry_error: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending; Perron vector is strictly positive."""

    gammas: np.ndarray
    perron_vector: np.ndarray


def build_gamma(
    kernel: JumpKernel,
    sources: SourceConfiguration,
    lam: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GammaMatrix:
    """Gamma_ij = G_lambda(x_j - x_i), integrating each displacement class once."""
    if sources.dim != kernel.dim:
        raise InvalidParameterError("source dimension does not match kernel")
    if lam < 0.0:
        raise InvalidParameterError("lambda must be >= 0")
    if lam == 0.0 and green_zero_is_divergent(kernel):
        raise DivergentGreenError("Gamma(0) undefined: G_0 diverges for this kernel")
    pts = sources.points
    n = len(pts)
    classes: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for i in range(n):
        for j in range(i, n):
            disp = tuple(b - a for a, b in zip(pts[i], pts[j]))
            canon = min(disp, tuple(-c for c in disp))
            classes.setdefault(canon, []).append((i, j))
    xs = list(classes.keys())
    vals, errs = green_batch(kernel, [lam], xs, rtol, atol)
    mat = np.empty((n, n))
    for x, val in zip(xs, vals[0]):
        for i, j in classes[x]:
            mat[i, j] = mat[j, i] = val
    return GammaMatrix(lam, mat, float(errs.max()))


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps row-cyclically until the off-diagonal Frobenius norm drops below
    tol * ||a||_F. Returns (eigenvalues descending, eigenvectors as columns).
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise InvalidParameterError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise InvalidParameterError("matrix must be symmetric")
    v = np.eye(n)
    if n == 1:
        return a[0, :1].copy(), v
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    for _ in range(60):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NumericalDegeneracyError("Jacobi sweeps did not converge")
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


def eigs(gamma: GammaMatrix) -> EigenDecomposition:
    """Eigenvalues (descending) and the sign-fixed Perron vector of Gamma."""
    if gamma.n > _MAX_SOURCES:
        raise InvalidParameterError(f"N is capped at {_MAX_SOURCES}")
    vals, vecs = jacobi_eigh(gamma.entries)
    perron = vecs[:, 0].copy()
    if perron.sum() < 0:
        perron = -perron
    if np.any(perron <= 0.0):
        raise NumericalDegeneracyError(
            "Perron vector lost strict positivity (lambda too close to a divergent 0?)"
        )
    return EigenDecomposition(vals, perron)


@dataclass(frozen=True)
class GammaCurve:
    lambdas: np.ndarray
    gammas: np.ndarray  # (len(lambdas), N)
    warnings: tuple[str, ...] = ()

    def to_csv(self) -> str:
        out = io.StringIO()
        n = self.gammas.shape[1]
        out.write("lambda," + ",".join(f"gamma_{i}" for i in range(n)) + "\n")
        for lam, row in zip(self.lambdas, self.gammas):
            cells = [f"{lam:.17g}"] + [f"{g:.17g}" for g in row]
            out.write(",".join(cells) + "\n")
        return out.getvalue()


def gamma_curve(
    kernel: JumpKernel,
    sources: SourceConfiguration,
    lambda_grid: Sequence[float],
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GammaCurve:
    """Per-lambda eigenvalues on a strictly increasing positive grid.

    Quadrature failures are recorded per row (NaN columns plus a warning)
    rather than aborting the sweep.
    """
    grid = np.asarray(list(lambda_grid), dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0) or np.any(np.diff(grid) <= 0.0):
        raise InvalidParameterError("lambda grid must be strictly increasing and positive")
    n = sources.n
    rows = np.empty((grid.size, n))
    warns = []
    for k, lam in enumerate(grid):
        try:
            rows[k] = eigs(build_gamma(kernel, sources, float(lam), rtol, atol)).gammas
        except QuadratureFailureError as exc:
            rows[k] = np.nan
            warns.append(f"lambda={lam:g}: {exc}")
    return GammaCurve(grid, rows, tuple(warns))
