"""Independent ground-truth generators for cross-validating the Gamma route.

Nothing here shares numerics with the Fourier-quadrature modules: the
truncated lattice operator diagonalizes the perturbed generator directly,
uniformization rebuilds transition probabilities as Poisson mixtures of a
substochastic matrix on an absorbing box, the time-domain Green value
integrates e^(-lambda t) p(t, 0, x) in t, and the Monte Carlo simulator
(oracles_mc) realizes the particle system event by event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.sparse.linalg import eigsh
from scipy.special import gammaln, ive, roots_legendre

from .errors import (
    BoxTooLargeError,
    InvalidParameterError,
    SeriesTooLongError,
)
from .gamma import SourceConfiguration
from .kernels import JumpKernel

__all__ = [
    "BranchingLaw",
    "binary_law",
    "critical_binary_law",
    "TruncatedOperator",
    "truncated_top_eigs",
    "transition_prob",
    "green_time_domain",
    "green_bessel_simple",
    "evolve_m1",
    "M1Evolution",
]

_MAX_BOX_SITES = 4_000_000
_SERIES_GUARD = 1e4  # largest admissible t * Lambda in uniformization
_POISSON_TAIL = 1e-12


@dataclass(frozen=True)
class BranchingLaw:
    """Offspring intensities b_n (n != 1, b_n >= 0); b_1 = -sum makes the
    law conservative and beta = f'(1) = sum_n n b_n."""

    intensities: tuple[tuple[int, float], ...]  # sorted (n, b_n), n != 1

    def __post_init__(self):
        seen = {}
        for n, b in self.intensities:
            n = int(n)
            if n == 1:
                raise InvalidParameterError("b_1 is derived, not given")
            if n < 0:
                raise InvalidParameterError("offspring counts must be >= 0")
            if b < 0.0:
                raise InvalidParameterError("b_n must be >= 0 for n != 1")
            if b > 0.0:
                seen[n] = seen.get(n, 0.0) + float(b)
        object.__setattr__(self, "intensities", tuple(sorted(seen.items())))

    @property
    def b1(self) -> float:
        return -math.fsum(b for _, b in self.intensities)

    @property
    def beta(self) -> float:
        # f'(1) = sum n b_n including b_1
        return math.fsum(n * b for n, b in self.intensities) + self.b1

    @property
    def total_branch_rate(self) -> float:
        return -self.b1


def binary_law(beta: float) -> BranchingLaw:
    """b_2 = beta, b_1 = -beta: f'(1) = beta matches the spectral parameter."""
    if beta <= 0.0:
        raise InvalidParameterError("binary law needs beta > 0")
    return BranchingLaw(((2, beta),))


def critical_binary_law(rate: float) -> BranchingLaw:
    """b_0 = b_2 = rate, b_1 = -2 rate: f'(1) = 0 (critical branching)."""
    if rate <= 0.0:
        raise InvalidParameterError("rate must be positive")
    return BranchingLaw(((0, rate), (2, rate)))


# ---------------------------------------------------------------------------
# truncated operator on the absorbing box {-L..L}^d


class TruncatedOperator:
    """H_beta = A + beta sum_i delta_{x_i} delta_{x_i}^T restricted to the box
    {-L..L}^d with absorbing (zero) exterior. Symmetric; eigenvalues increase
    toward the infinite-lattice values as L grows (domain monotonicity)."""

    def __init__(self, kernel: JumpKernel, sources: SourceConfiguration, beta: float, L: int):
        if L < 1:
            raise InvalidParameterError("box radius must be >= 1")
        d = kernel.dim
        if sources.dim != d:
            raise InvalidParameterError("source dimension mismatch")
        side = 2 * L + 1
        n_sites = side**d
        if n_sites > _MAX_BOX_SITES:
            raise BoxTooLargeError(f"box has {n_sites} sites (> {_MAX_BOX_SITES})")
        for p in sources.points:
            if any(abs(c) > L for c in p):
                raise InvalidParameterError(f"source {p} outside box of radius {L}")
        self.kernel = kernel
        self.sources = sources
        self.beta = float(beta)
        self.L = L
        self.side = side
        self.n_sites = n_sites

        coords = np.stack(
            np.meshgrid(*([np.arange(-L, L + 1)] * d), indexing="ij"), axis=-1
        ).reshape(n_sites, d)
        self._coords = coords
        rows_all = []
        cols_all = []
        vals_all = []
        idx_grid = np.arange(n_sites).reshape((side,) * d)
        for z, rate in zip(kernel.offsets, kernel.rates):
            shifted = coords + z
            ok = np.all(np.abs(shifted) <= L, axis=1)
            src_idx = np.nonzero(ok)[0]
            dst = shifted[ok] + L
            dst_idx = idx_grid[tuple(dst[:, j] for j in range(d))]
            rows_all.append(src_idx)
            cols_all.append(dst_idx)
            vals_all.append(np.full(src_idx.size, rate))
        diag = np.full(n_sites, kernel.diag_rate)
        for p in sources.points:
            flat = idx_grid[tuple(c + L for c in p)]
            diag[flat] += self.beta
        rows_all.append(np.arange(n_sites))
        cols_all.append(np.arange(n_sites))
        vals_all.append(diag)
        self.matrix = sp.csr_matrix(
            (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(n_sites, n_sites),
        )

    def site_index(self, x) -> int:
        x = tuple(int(c) for c in x)
        if any(abs(c) > self.L for c in x):
            raise InvalidParameterError(f"{x} outside box")
        flat = 0
        for c in x:
            flat = flat * self.side + (c + self.L)
        return flat

    def top_eigs(self, k: int, tol: float = 1e-9) -> np.ndarray:
        """Largest k eigenvalues (descending) by Lanczos iteration."""
        if k < 1:
            raise InvalidParameterError("k must be >= 1")
        if k >= self.n_sites - 1:
            vals = np.linalg.eigvalsh(self.matrix.toarray())
            return vals[::-1][:k]
        vals = eigsh(self.matrix, k=k, which="LA", tol=tol, return_eigenvectors=False)
        return np.sort(vals)[::-1]


def truncated_top_eigs(
    kernel: JumpKernel,
    sources: SourceConfiguration,
    beta: float,
    L: int,
    k: int,
) -> np.ndarray:
    """Largest k eigenvalues of the truncated operator; approximations from
    below to the lambda_i(beta), improving as L grows."""
    if k > sources.n + 3:
        raise InvalidParameterError("k is capped at N + 3")
    return TruncatedOperator(kernel, sources, beta, L).top_eigs(k)


# ---------------------------------------------------------------------------
# uniformization


def _poisson_window(mu: float, tail: float = _POISSON_TAIL):
    """(k_lo, pmf weights) covering all Poisson(mu) mass except < tail."""
    if mu <= 0.0:
        return 0, np.array([1.0])
    mode = int(mu)
    span = int(12.0 * math.sqrt(mu) + 40.0)
    k_lo = max(0, mode - span)
    k_hi = mode + span
    ks = np.arange(k_lo, k_hi + 1)
    logw = ks * math.log(mu) - mu - gammaln(ks + 1)
    w = np.exp(logw)
    # trim negligible wings for speed
    keep = w > tail * 1e-4
    if not np.any(keep):
        return mode, np.array([1.0])
    first, last = np.nonzero(keep)[0][[0, -1]]
    return k_lo + int(first), w[first : last + 1]


class _UniformizedWalk:
    """Scalar series g_k = (P^k delta_x)[y] of the substochastic jump chain
    P = I + Q/Lambda on an absorbing box; shared by transition_prob and the
    time-domain Green integrand."""

    def __init__(self, kernel: JumpKernel, L: int, x, ys: Sequence):
        op = TruncatedOperator(kernel, SourceConfiguration((tuple(x),)), 0.0, L)
        self.lam_unif = -kernel.diag_rate
        n = op.n_sites
        self.P = sp.identity(n, format="csr") + op.matrix.multiply(1.0 / self.lam_unif)
        self.x_idx = op.site_index(x)
        self.y_idx = [op.site_index(y) for y in ys]
        self._series = np.empty((0, len(self.y_idx)))
        self._mass = np.empty(0)
        self._v = None

    def extend(self, k_max: int):
        have = self._series.shape[0]
        if k_max < have:
            return
        rows = np.empty((k_max + 1 - have, len(self.y_idx)))
        mass = np.empty(k_max + 1 - have)
        v = self._v
        if v is None:
            v = np.zeros(self.P.shape[0])
            v[self.x_idx] = 1.0
        for k in range(have, k_max + 1):
            rows[k - have] = v[self.y_idx]
            mass[k - have] = v.sum()
            v = self.P @ v
        self._v = v
        self._series = np.vstack([self._series, rows])
        self._mass = np.concatenate([self._mass, mass])

    def prob(self, t: float):
        """(p(t, x, y) for each y, total surviving mass) via Poisson mixing."""
        mu = self.lam_unif * t
        if mu > _SERIES_GUARD:
            raise SeriesTooLongError(
                f"t * Lambda = {mu:.3g} exceeds {_SERIES_GUARD:g}; use a larger-step method"
            )
        k_lo, w = _poisson_window(mu)
        self.extend(k_lo + len(w) - 1)
        sl = self._series[k_lo : k_lo + len(w)]
        mass = float(w @ self._mass[k_lo : k_lo + len(w)])
        return w @ sl, mass


_WALK_CACHE: dict[tuple, _UniformizedWalk] = {}


def _walk(kernel: JumpKernel, L: int, x, ys) -> _UniformizedWalk:
    key = (kernel.cache_key, L, tuple(x), tuple(tuple(y) for y in ys))
    w = _WALK_CACHE.get(key)
    if w is None:
        if len(_WALK_CACHE) > 16:
            _WALK_CACHE.clear()
        w = _UniformizedWalk(kernel, L, x, ys)
        _WALK_CACHE[key] = w
    return w


def transition_prob(kernel: JumpKernel, t: float, x, y, L: int) -> float:
    """p(t, x, y) on the absorbing box: e^(-Lambda t) sum_k (Lambda t)^k/k! (P^k)_{xy},
    truncated when the Poisson tail drops below 1e-12."""
    if t < 0.0:
        raise InvalidParameterError("t must be >= 0")
    if t == 0.0:
        return 1.0 if tuple(x) == tuple(y) else 0.0
    vals, _ = _walk(kernel, L, x, [y]).prob(t)
    return float(vals[0])


def surviving_mass(kernel: JumpKernel, t: float, x, L: int) -> float:
    """sum_y p(t, x, y) over the box (1 minus the absorbed leakage)."""
    _, mass = _walk(kernel, L, x, [x]).prob(t)
    return mass


def green_time_domain(
    kernel: JumpKernel,
    lam: float,
    x,
    L: int,
    T: float | None = None,
) -> tuple[float, float]:
    """(value, error estimate) of int_0^T e^(-lambda t) p(t, 0, x) dt by
    composite Gauss-Legendre panels; T defaults to -ln(1e-12)/lambda and must
    satisfy the uniformization series guard."""
    if lam <= 0.0:
        raise InvalidParameterError("time-domain Green needs lambda > 0")
    if T is None:
        T = -math.log(1e-12) / lam
    mu_max = -kernel.diag_rate * T
    if mu_max > _SERIES_GUARD:
        raise SeriesTooLongError(
            f"T * Lambda = {mu_max:.3g} exceeds {_SERIES_GUARD:g} (lambda too small)"
        )
    origin = (0,) * kernel.dim
    walk = _walk(kernel, L, origin, [x])

    edges = [0.0, min(1.0, T)]
    while edges[-1] < T:
        edges.append(min(T, edges[-1] * 2.0))
    x16, w16 = roots_legendre(16)
    x32, w32 = roots_legendre(32)
    total32 = total16 = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for xg, wg, acc in ((x16, w16, "c"), (x32, w32, "f")):
            s = 0.0
            for xi, wi in zip(xg, wg):
                t = mid + half * xi
                p, _ = walk.prob(t)
                s += wi * math.exp(-lam * t) * float(p[0])
            if acc == "c":
                total16 += half * s
            else:
                total32 += half * s
    tail_bound = math.exp(-lam * T) / lam  # p <= 1 beyond the horizon
    return total32, abs(total32 - total16) + tail_bound


def green_bessel_simple(kernel: JumpKernel, lam: float, x) -> float:
    """Time-domain Green value for the nearest-neighbour kernel via the exact
    coordinate factorization p(t, x) = prod_j e^(-kappa t/d) I_{x_j}(kappa t/d);
    reaches arbitrarily small lambda (and lambda = 0 for d >= 3) where the
    uniformization route is barred by the series guard."""
    d = kernel.dim
    if kernel.tail is not None or len(kernel.rates) != 2 * d or np.abs(kernel.offsets).max() != 1:
        raise InvalidParameterError("Bessel oracle only applies to simple kernels")
    if not np.allclose(kernel.rates, kernel.rates[0], rtol=0, atol=0):
        raise InvalidParameterError("Bessel oracle needs isotropic rates")
    kappa = kernel.total_rate
    if lam < 0.0 or (lam == 0.0 and d < 3):
        raise InvalidParameterError("lambda = 0 needs d >= 3 (transient walk)")
    orders = [abs(int(c)) for c in np.atleast_1d(x)]
    rate = kappa / d

    def f(t):
        out = math.exp(-lam * t)
        for n in orders:
            out *= ive(n, rate * t)
        return out

    v1, _ = quad(f, 0.0, 64.0, limit=400)
    v2, _ = quad(f, 64.0, np.inf, limit=400)
    return v1 + v2


# ---------------------------------------------------------------------------
# mean-field evolution dm/dt = (A + beta sum delta) m


@dataclass(frozen=True)
class M1Evolution:
    times: np.ndarray
    total_mass: np.ndarray          # (T,)
    field: np.ndarray               # (T, n_sites) restricted to the box
    site_coords: np.ndarray         # (n_sites, d)

    def mass_at(self, x) -> np.ndarray:
        hits = np.nonzero(np.all(self.site_coords == np.asarray(x), axis=1))[0]
        if hits.size == 0:
            raise InvalidParameterError(f"{x} outside evolution box")
        return self.field[:, hits[0]]

    def log_slope(self, t_lo: float, t_hi: float) -> float:
        sel = (self.times >= t_lo) & (self.times <= t_hi)
        if sel.sum() < 2:
            raise InvalidParameterError("slope window too narrow")
        return float(np.polyfit(self.times[sel], np.log(self.total_mass[sel]), 1)[0])


def evolve_m1(
    kernel: JumpKernel,
    sources: SourceConfiguration,
    beta: float,
    y,
    t_grid: Sequence[float],
    L: int,
) -> M1Evolution:
    """Action of e^(t H_beta) on delta_y by shifted uniformization: with
    c = beta the matrix H - cI is a substochastic generator, so
    e^(t H) = e^(c t) e^(-Lambda' t) sum_k (Lambda' t)^k / k! P'^k."""
    times = np.asarray(list(t_grid), dtype=float)
    if times.size == 0 or np.any(times < 0.0) or np.any(np.diff(times) <= 0.0):
        raise InvalidParameterError("t grid must be nonnegative and increasing")
    op = TruncatedOperator(kernel, sources, beta, L)
    c = max(beta, 0.0)
    lam_unif = -kernel.diag_rate + c
    mu_max = lam_unif * times[-1]
    if mu_max > _SERIES_GUARD:
        raise SeriesTooLongError(f"t Lambda' = {mu_max:.3g} exceeds {_SERIES_GUARD:g}")
    n = op.n_sites
    shifted = op.matrix - sp.identity(n, format="csr") * c
    P = sp.identity(n, format="csr") + shifted.multiply(1.0 / lam_unif)

    windows = []
    k_max = 0
    for t in times:
        k_lo, w = _poisson_window(lam_unif * t)
        windows.append((k_lo, w))
        k_max = max(k_max, k_lo + len(w) - 1)

    field = np.zeros((times.size, n))
    v = np.zeros(n)
    v[op.site_index(y)] = 1.0
    for k in range(k_max + 1):
        for j, (k_lo, w) in enumerate(windows):
            if k_lo <= k < k_lo + len(w):
                field[j] += w[k - k_lo] * v
        if k < k_max:
            v = P @ v
    field *= np.exp(c * times)[:, None]
    return M1Evolution(times, field.sum(axis=1), field, op._coords)
