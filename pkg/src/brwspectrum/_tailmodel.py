"""Integral model of the omitted heavy tail of a truncated jump kernel.

A stored heavy-tail kernel keeps a(z) only for |z| <= R. The symbol of the
idealized kernel needs the omitted part

    T(theta) = sum_{|z| > R} a(z) (1 - cos(theta . z)),

which this module approximates by the continuum integral over |u| > R+1/2.
Everything reduces to the two scalar profiles

    J1(w) = int_w^inf (1 - cos u)   u^(-1-alpha) du        (d = 1 slices)
    J2(w) = int_w^inf (1 - J0(s))   s^(-1-alpha) ds        (d = 2 isotropic)

evaluated through a log-log spline with series/asymptotic wings. The model
is what keeps the small-theta behaviour |phi| ~ c |theta|^alpha of the
ideal kernel: without it any finite truncation reverts to quadratic
behaviour below |theta| ~ 1/R and the lambda -> 0 classification breaks.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import j0, roots_legendre

__all__ = ["JProfile", "j1_limit", "mean_abs_cos_pow"]


def j1_limit(alpha: float) -> float:
    """A1 = int_0^inf (1 - cos u) u^(-1-alpha) du = pi / (2 Gamma(1+a) sin(pi a/2))."""
    return math.pi / (2.0 * math.gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2.0))


def mean_abs_cos_pow(alpha: float) -> float:
    """(1/2pi) int_0^2pi |cos psi|^alpha dpsi = Gamma((a+1)/2) / (sqrt(pi) Gamma(a/2+1))."""
    return math.gamma((alpha + 1.0) / 2.0) / (math.sqrt(math.pi) * math.gamma(alpha / 2.0 + 1.0))


def _cos_tail(w: np.ndarray, p: float, phase: float = 0.0) -> np.ndarray:
    """int_w^inf cos(s - phase) s^-p ds by six integrations by parts (w >> 1)."""
    s, c = np.sin(w - phase), np.cos(w - phase)
    iw = 1.0 / w
    p1, p2, p3, p4, p5 = (p + k for k in range(1, 6))
    out = -s * iw**p
    out += p * c * iw**p1
    out += p * p1 * s * iw**p2
    out -= p * p1 * p2 * c * iw**p3
    out -= p * p1 * p2 * p3 * s * iw**p4
    out += p * p1 * p2 * p3 * p4 * c * iw**p5
    return out


def _sin_tail(w: np.ndarray, p: float, phase: float = 0.0) -> np.ndarray:
    """int_w^inf sin(s - phase) s^-p ds by six integrations by parts (w >> 1)."""
    s, c = np.sin(w - phase), np.cos(w - phase)
    iw = 1.0 / w
    p1, p2, p3, p4, p5 = (p + k for k in range(1, 6))
    out = c * iw**p
    out += p * s * iw**p1
    out -= p * p1 * c * iw**p2
    out -= p * p1 * p2 * s * iw**p3
    out += p * p1 * p2 * p3 * c * iw**p4
    out += p * p1 * p2 * p3 * p4 * s * iw**p5
    return out


class JProfile:
    """Evaluator for J1 or J2 at a fixed alpha.

    kind = 1: integrand 1 - cos(u); kind = 2: integrand 1 - J0(u).
    Positive, strictly decreasing, J(0) finite, J(w) ~ w^-alpha / alpha.
    """

    _W_LO = 1e-4

    def __init__(self, alpha: float, kind: int):
        if kind not in (1, 2):
            raise ValueError("kind must be 1 or 2")
        self.alpha = float(alpha)
        self.kind = kind
        self._w_hi = 30.0 if kind == 1 else 60.0
        self._build()

    # series of the integrand about 0: sum c_k u^(2k), k >= 1
    def _series_coeffs(self):
        if self.kind == 1:  # 1 - cos u = u^2/2 - u^4/24 + u^6/720
            return (0.5, -1.0 / 24.0, 1.0 / 720.0)
        # 1 - J0(u) = u^2/4 - u^4/64 + u^6/2304
        return (0.25, -1.0 / 64.0, 1.0 / 2304.0)

    def _integrand(self, u: np.ndarray) -> np.ndarray:
        small = u < 1e-6
        if self.kind == 1:
            out = 1.0 - np.cos(u)
        else:
            out = 1.0 - j0(u)
        if np.any(small):  # guard relative accuracy of the samples near 0
            c = self._series_coeffs()
            us = u[small]
            out[small] = us**2 * (c[0] + us**2 * (c[1] + us**2 * c[2]))
        return out

    def _tail_beyond(self, w: np.ndarray) -> np.ndarray:
        """J(w) for w >= w_hi via oscillatory asymptotics."""
        w = np.asarray(w, dtype=float)
        a = self.alpha
        main = w ** (-a) / a
        if self.kind == 1:
            return main - _cos_tail(w, 1.0 + a)
        # J0(s) ~ sqrt(2/(pi s)) [cos(s-pi/4)(1 - 9/(128 s^2)) + sin(s-pi/4)/(8 s)]
        corr = _cos_tail(w, 1.5 + a, math.pi / 4.0)
        corr += 0.125 * _sin_tail(w, 2.5 + a, math.pi / 4.0)
        corr -= (9.0 / 128.0) * _cos_tail(w, 3.5 + a, math.pi / 4.0)
        return main - math.sqrt(2.0 / math.pi) * corr

    def _series_head(self, w: np.ndarray) -> np.ndarray:
        """int_0^w integrand * u^(-1-alpha) du for tiny w."""
        a = self.alpha
        c = self._series_coeffs()
        return (
            c[0] * w ** (2.0 - a) / (2.0 - a)
            + c[1] * w ** (4.0 - a) / (4.0 - a)
            + c[2] * w ** (6.0 - a) / (6.0 - a)
        )

    def _build(self):
        a = self.alpha
        xg, wg = roots_legendre(24)
        edges = np.geomspace(self._W_LO, self._w_hi, 2000)
        mids = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        nodes = mids[:, None] + half[:, None] * xg[None, :]
        vals = self._integrand(nodes.ravel()).reshape(nodes.shape)
        panel = (vals * nodes ** (-1.0 - a) * wg[None, :]).sum(axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(panel)])
        head = self._series_head(edges[0])
        # exact J(0): A1 closed form; A2 = A1 * mean |cos|^alpha (radial slicing)
        self.j_zero = j1_limit(a) if self.kind == 1 else j1_limit(a) * mean_abs_cos_pow(a)
        numeric_total = head + cum[-1] + float(self._tail_beyond(np.array([self._w_hi]))[0])
        if abs(numeric_total - self.j_zero) > 1e-6 * self.j_zero:
            raise RuntimeError("tail profile quadrature inconsistent with closed form")
        j_vals = self.j_zero - (head + cum)
        if np.any(j_vals <= 0):
            raise RuntimeError("tail profile lost positivity (alpha too extreme?)")
        self._spline = CubicSpline(np.log(edges), np.log(j_vals))

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        scalar = w.ndim == 0
        w = np.atleast_1d(w)
        out = np.empty_like(w)
        lo = w < self._W_LO
        hi = w >= self._w_hi
        mid = ~lo & ~hi
        if np.any(lo):
            out[lo] = self.j_zero - self._series_head(w[lo])
        if np.any(mid):
            out[mid] = np.exp(self._spline(np.log(w[mid])))
        if np.any(hi):
            out[hi] = self._tail_beyond(w[hi])
        return out[0] if scalar else out
