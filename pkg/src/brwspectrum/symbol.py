"""Fourier symbol phi(theta) = sum_z a(z) e^{i(theta,z)} of a jump kernel.

phi is real (symmetry), nonpositive, vanishes only at theta = 0
(irreducibility), and phi(theta) = -sum_z a(z) (1 - cos(theta.z)), which is
the cancellation-free form used for evaluation. For heavy-tailed kernels in
d <= 2 the omitted tail beyond the stored radius is added back through the
integral model in _tailmodel, so the symbol keeps the |theta|^alpha
behaviour of the ideal kernel near the origin.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ._tailmodel import JProfile, j1_limit, mean_abs_cos_pow
from .errors import InvalidParameterError, SymbolDegeneracyError
from .kernels import JumpKernel

__all__ = ["SymbolEvaluator", "get_evaluator", "symbol_phi", "symbol_max_s", "symbol_alpha_bounds"]

_EVALUATOR_REGISTRY: dict[str, "SymbolEvaluator"] = {}
_MAX_GRID_CACHE = 3  # per evaluator: keep only the largest few uniform grids


def get_evaluator(kernel: JumpKernel) -> "SymbolEvaluator":
    ev = _EVALUATOR_REGISTRY.get(kernel.cache_key)
    if ev is None:
        ev = SymbolEvaluator(kernel)
        if len(_EVALUATOR_REGISTRY) > 64:
            _EVALUATOR_REGISTRY.clear()
        _EVALUATOR_REGISTRY[kernel.cache_key] = ev
    return ev


class SymbolEvaluator:
    """Cached symbol evaluation for one (immutable) kernel."""

    def __init__(self, kernel: JumpKernel):
        self.kernel = kernel
        self.d = kernel.dim
        self._offsets_f = kernel.offsets.astype(float)
        self._rates = kernel.rates
        self._grid_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._s_max: float | None = None
        # per-axis trig-polynomial degree of the stored symbol; uniform grids
        # with n < 2*band sit on an aliased plateau and must be avoided
        self.band = int(np.abs(kernel.offsets).max())

        tail = kernel.tail
        self._has_tail_model = tail is not None and self.d <= 2
        if self._has_tail_model:
            self.alpha_model = tail.alpha
            self._r_eff = tail.truncation_radius + 0.5
            if self.d == 1:
                self._jprof = JProfile(tail.alpha, 1)
                # T(|t|) = 2 h |t|^a J1(|t| R); limit coefficient 2 h A1
                self._c_tail0 = 2.0 * tail.h_const * j1_limit(tail.alpha)
            elif tail.h_samples is None:
                self._jprof = JProfile(tail.alpha, 2)
                self._c_tail0 = 2.0 * math.pi * tail.h_const * self._jprof.j_zero
            else:
                self._jprof = JProfile(tail.alpha, 1)
                self._h_samples = np.asarray(tail.h_samples, dtype=float)
                self._h_angles = 2 * math.pi * np.arange(self._h_samples.size) / self._h_samples.size
        else:
            self.alpha_model = 2.0 if tail is None else tail.alpha

    # ------------------------------------------------------------------
    # pointwise evaluation

    def tail_correction(self, radii: np.ndarray, dirs: np.ndarray | None = None) -> np.ndarray:
        """T(theta) >= 0 at |theta| = radii (dirs needed for sampled H)."""
        if not self._has_tail_model:
            return np.zeros_like(radii)
        tail = self.kernel.tail
        a = tail.alpha
        if self.d == 2 and tail.h_samples is not None:
            if dirs is None:
                raise InvalidParameterError("sampled-H tail needs directions")
            ang = np.arctan2(dirs[..., 1], dirs[..., 0])
            psi = self._h_angles[:, None] - ang[None, ...]
            cosp = np.abs(np.cos(psi))
            w = radii[None, ...] * self._r_eff * cosp
            vals = self._h_samples[:, None] * cosp**a * self._jprof(w.ravel()).reshape(w.shape)
            dpsi = 2 * math.pi / self._h_samples.size
            return radii**a * vals.sum(axis=0) * dpsi
        w = radii * self._r_eff
        coef = 2.0 * tail.h_const if self.d == 1 else 2.0 * math.pi * tail.h_const
        return coef * radii**a * self._jprof(np.abs(w))

    def phi(self, theta) -> np.ndarray | float:
        """phi at arbitrary points; theta shape (..., d) or (d,)."""
        th = np.asarray(theta, dtype=float)
        scalar = th.ndim == 1
        pts = np.atleast_2d(th)
        if pts.shape[-1] != self.d:
            raise InvalidParameterError(f"theta must have length d = {self.d}")
        flat = pts.reshape(-1, self.d)
        out = np.zeros(flat.shape[0])
        # chunk so the (points x support) temp stays modest
        m = len(self._rates)
        chunk = max(1, int(32_000_000 // max(m, 1)))
        for lo in range(0, flat.shape[0], chunk):
            piece = flat[lo : lo + chunk]
            args = piece @ self._offsets_f.T  # (chunk, M)
            np.multiply(args, 0.5, out=args)
            np.sin(args, out=args)
            np.square(args, out=args)
            out[lo : lo + chunk] = args @ (2.0 * self._rates)
        if self._has_tail_model:
            radii = np.linalg.norm(flat, axis=1)
            dirs = np.divide(flat, radii[:, None], out=np.zeros_like(flat), where=radii[:, None] > 0)
            out += self.tail_correction(radii, dirs)
        out = -out
        if scalar:
            return float(out[0])
        return out.reshape(pts.shape[:-1])

    # ------------------------------------------------------------------
    # uniform tensor grids (periodic trapezoid nodes)

    @staticmethod
    def axis(n: int) -> np.ndarray:
        return -math.pi + 2 * math.pi * np.arange(n) / n

    def phi_grid(self, n: int) -> np.ndarray:
        """phi on the tensor grid axis(n)^d, cached."""
        hit = self._grid_cache.get(n)
        if hit is not None:
            return hit[0]
        ax = self.axis(n)
        d = self.d
        m = len(self._rates)
        if m <= 64:
            grid = np.zeros((n,) * d)
            buf = np.empty((n,) * d)
            for z, rate in zip(self.kernel.offsets, self._rates):
                acc = ax * z[0]
                if d == 1:
                    np.copyto(buf, acc)
                elif d == 2:
                    np.add(acc[:, None], (ax * z[1])[None, :], out=buf)
                else:
                    np.add(acc[:, None, None], (ax * z[1])[None, :, None], out=buf)
                    buf += (ax * z[2])[None, None, :]
                np.multiply(buf, 0.5, out=buf)
                np.sin(buf, out=buf)
                np.square(buf, out=buf)
                grid += (2.0 * rate) * buf
            grid = -grid
        else:
            # exact DFT evaluation: e^{i theta_k z} = (-1)^{sum z} e^{2pi i k z / n}
            emb = np.zeros((n,) * d, dtype=float)
            signs = (-1.0) ** (self.kernel.offsets.sum(axis=1) & 1)
            idx = tuple(np.mod(self.kernel.offsets[:, j], n) for j in range(d))
            np.add.at(emb, idx, signs * self._rates)
            grid = np.fft.ifftn(emb).real * (n**d)
            grid += self.kernel.diag_rate
            np.minimum(grid, 0.0, out=grid)
        if self._has_tail_model:
            radii = self._grid_radii(ax)
            grid -= self.tail_correction(radii, self._grid_dirs(ax, radii))
        if len(self._grid_cache) >= _MAX_GRID_CACHE:
            smallest = min(self._grid_cache)
            if smallest < n:
                del self._grid_cache[smallest]
            else:
                return grid  # do not evict larger grids for a smaller one
        self._grid_cache[n] = (grid, ax)
        return grid

    def _grid_radii(self, ax: np.ndarray) -> np.ndarray:
        if self.d == 1:
            return np.abs(ax)
        if self.d == 2:
            return np.sqrt(ax[:, None] ** 2 + ax[None, :] ** 2)
        return np.sqrt(ax[:, None, None] ** 2 + ax[None, :, None] ** 2 + ax[None, None, :] ** 2)

    def _grid_dirs(self, ax: np.ndarray, radii: np.ndarray) -> np.ndarray | None:
        if not (self.d == 2 and self.kernel.tail and self.kernel.tail.h_samples is not None):
            return None
        pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            dirs = pts / radii[..., None]
        dirs[radii == 0] = 0.0
        return dirs

    # ------------------------------------------------------------------
    # derived quantities

    def small_theta_coefficient(self, dirs: np.ndarray) -> np.ndarray:
        """c(omega) with |phi(r omega)| ~ c(omega) r^alpha_model as r -> 0.

        Heavy kernels (d <= 2): the tail model dominates; finite-variance
        and heavy d = 3 kernels: exact quadratic form of the stored rates.
        """
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        if self._has_tail_model:
            tail = self.kernel.tail
            if self.d == 2 and tail.h_samples is not None:
                ang = np.arctan2(dirs[:, 1], dirs[:, 0])
                psi = self._h_angles[:, None] - ang[None, :]
                dpsi = 2 * math.pi / self._h_samples.size
                vals = self._h_samples[:, None] * np.abs(np.cos(psi)) ** tail.alpha
                return j1_limit(tail.alpha) * vals.sum(axis=0) * dpsi
            return np.full(dirs.shape[0], self._c_tail0)
        mom = (self._offsets_f * self._rates[:, None]).T @ self._offsets_f  # sum a z z^T
        return 0.5 * np.einsum("ij,jk,ik->i", dirs, mom, dirs)

    @property
    def s_max(self) -> float:
        """s = max over the cube of -phi(theta) > 0."""
        if self._s_max is None:
            self._s_max = self._compute_s_max()
        return self._s_max

    def _compute_s_max(self) -> float:
        d = self.d
        n = {1: 1 << 14, 2: 768, 3: 128}[d]
        grid = self.phi_grid(n)
        ax = self.axis(n)
        idx = np.unravel_index(int(np.argmin(grid)), grid.shape)
        grid_best = float(grid[idx])
        theta0 = np.array([ax[i] for i in idx])
        h = 2 * math.pi / n
        if d == 1:
            res = minimize_scalar(
                lambda t: self.phi(np.array([t])),
                bounds=(max(-math.pi, theta0[0] - h), min(math.pi, theta0[0] + h)),
                method="bounded",
                options={"xatol": 1e-14},
            )
            best = min(float(res.fun), grid_best)
        else:
            res = minimize(
                lambda t: self.phi(t),
                theta0,
                method="Nelder-Mead",
                options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 4000},
            )
            cand = np.clip(res.x, -math.pi, math.pi)
            best = min(float(self.phi(cand)), grid_best)
        return -best

    def alpha_bounds(self) -> tuple[float, float]:
        """Empirical (c1, c2) with c1 |t|^a <= |phi(t)| <= c2 |t|^a on the cube.

        Scans log-spaced radii down to 1e-6 along many directions plus a
        uniform grid, excluding theta = 0.
        """
        a = self.alpha_model
        d = self.d
        ratios = []
        dirs = _direction_set(d)
        rad_caps = math.pi / np.max(np.abs(dirs), axis=1)  # exit radius of the cube
        radii = np.geomspace(1e-6, 1.0, 160)
        pts = dirs[:, None, :] * (rad_caps[:, None] * radii[None, :])[:, :, None]
        vals = np.abs(self.phi(pts))
        rr = np.linalg.norm(pts, axis=-1)
        ratios.append((vals / rr**a).ravel())
        n = {1: 4096, 2: 256, 3: 64}[d]
        grid = np.abs(self.phi_grid(n))
        rg = self._grid_radii(self.axis(n))
        mask = rg > 0
        ratios.append((grid[mask] / rg[mask] ** a).ravel())
        allr = np.concatenate(ratios)
        c1, c2 = float(allr.min()), float(allr.max())
        if c1 <= 0.0:
            raise SymbolDegeneracyError("symbol lower bound c1 <= 0 (kernel degenerate?)")
        return c1, c2


def _direction_set(d: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2 * math.pi * np.arange(128) / 128
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    us = np.linspace(-1, 1, 17)[1:-1]
    ang = 2 * math.pi * np.arange(24) / 24
    dirs = [np.array([math.sqrt(1 - u * u) * math.cos(p), math.sqrt(1 - u * u) * math.sin(p), u])
            for u in us for p in ang]
    dirs += [np.array(v) for v in ([0.0, 0.0, 1.0], [0.0, 0.0, -1.0])]
    return np.array(dirs)


# ---------------------------------------------------------------------------
# module-level operations mirroring the public contract


def symbol_phi(kernel: JumpKernel, theta: Sequence[float]) -> float:
    """phi(theta) = sum_z a(z) cos(theta.z) + a(0), real and in [-2|a(0)|', 0].

    The upper rate bound carries a relative tail-model allowance for heavy
    kernels (the modeled mass slightly exceeds the stored row sum).
    """
    th = np.asarray(theta, dtype=float)
    if th.ndim != 1 or th.size != kernel.dim:
        raise InvalidParameterError(f"theta must be a vector of length {kernel.dim}")
    return float(get_evaluator(kernel).phi(th))


def symbol_max_s(kernel: JumpKernel) -> float:
    return get_evaluator(kernel).s_max


def symbol_alpha_bounds(kernel: JumpKernel) -> tuple[float, float]:
    return get_evaluator(kernel).alpha_bounds()
