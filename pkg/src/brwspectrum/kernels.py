"""Symmetric, conservative, irreducible jump kernels a(z) on Z^d.

A kernel stores a finite off-diagonal support {z: a(z) > 0}, the diagonal
rate a(0) < 0, and (for heavy-tailed kernels) tail metadata describing the
power-law decay a(z) ~ H(z/|z|) / |z|^(d+alpha) beyond the stored radius.
Kernels are immutable after construction and safe to share across workers.

Convention: constructed heavy-tail kernels have total off-diagonal rate 1
(unit jump rate), which fixes the time scale all source intensities beta
are reported against. This normalization is a choice and is recorded in
the serialized form.
"""
from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DegenerateKernelError, InvalidParameterError

__all__ = [
    "JumpKernel",
    "TailSpec",
    "VarianceClass",
    "ValidationReport",
    "make_simple_kernel",
    "make_heavy_tail_kernel",
    "kernel_from_entries",
    "validate",
    "variance_class",
    "kernel_to_text",
    "kernel_from_text",
    "default_truncation_radius",
]

# storable-support caps for the default truncation radius; beyond the cap
# the analytic tail model in the symbol evaluator carries the omitted mass
_DEFAULT_R_CAP = {1: 4096, 2: 32, 3: 8}
_TAIL_MASS_TARGET = 1e-6


@dataclass(frozen=True)
class TailSpec:
    """Heavy-tail metadata: a(z) ~ H(z/|z|) / |z|^(d+alpha) for large |z|.

    ``h_const`` is the (normalized) constant value of H. ``h_samples``,
    when set (d = 2 only), holds normalized samples of H at equally spaced
    angles 2*pi*k/len; it must be even under the antipode map.
    """

    alpha: float
    truncation_radius: int
    h_const: float = 1.0
    h_samples: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise InvalidParameterError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.truncation_radius < 1:
            raise InvalidParameterError("truncation radius must be >= 1")
        if self.h_samples is not None:
            hs = np.asarray(self.h_samples, dtype=float)
            n = hs.size
            if hs.min() <= 0.0:
                raise InvalidParameterError("angular samples of H must be positive")
            if n % 2 != 0 or not np.allclose(hs, np.roll(hs, n // 2), rtol=1e-12):
                raise InvalidParameterError("H must be even: H(u) = H(-u)")
        elif self.h_const <= 0.0:
            raise InvalidParameterError("H must be positive")


class VarianceClass:
    """Jump-variance classification: Finite, or Heavy(alpha)."""

    __slots__ = ("alpha",)

    def __init__(self, alpha: float | None = None):
        self.alpha = alpha

    @property
    def is_heavy(self) -> bool:
        return self.alpha is not None

    def __repr__(self):
        return f"Heavy({self.alpha})" if self.is_heavy else "Finite"

    def __eq__(self, other):
        return isinstance(other, VarianceClass) and self.alpha == other.alpha

    def __hash__(self):
        return hash(("VarianceClass", self.alpha))


def _canonical_entries(entries: Mapping[tuple, float], dim: int):
    items = []
    for z, rate in entries.items():
        z = tuple(int(c) for c in z)
        if len(z) != dim:
            raise InvalidParameterError(f"offset {z} has wrong dimension (want {dim})")
        if all(c == 0 for c in z):
            raise InvalidParameterError("a(0) is the diagonal rate, not an entry")
        items.append((z, float(rate)))
    items.sort(key=lambda kv: kv[0])
    offsets = np.array([z for z, _ in items], dtype=np.int64).reshape(len(items), dim)
    rates = np.array([r for _, r in items], dtype=float)
    return offsets, rates


def _hnf_generates_unit_lattice(offsets: np.ndarray) -> bool:
    """True iff the integer lattice spanned by the rows is all of Z^d.

    Incremental Hermite-style reduction over exact Python ints: keep one
    basis row per pivot column, fold each vector in by Euclidean steps,
    then check full rank with diagonal product +-1 (unit index).
    """
    d = offsets.shape[1]
    pivots: dict[int, list[int]] = {}

    def pivot_col(v):
        for j, x in enumerate(v):
            if x != 0:
                return j
        return None

    for z in offsets.tolist():
        v = [int(c) for c in z]
        col = pivot_col(v)
        while col is not None:
            row = pivots.get(col)
            if row is None:
                pivots[col] = v
                break
            while v[col] != 0:
                q = row[col] // v[col]
                reduced = [a - q * b for a, b in zip(row, v)]
                row[:] = v
                v = reduced
            col = pivot_col(v)
        if len(pivots) == d and all(abs(pivots[j][j]) == 1 for j in range(d)):
            return True

    if len(pivots) != d:
        return False
    det = 1
    for j in range(d):
        det *= pivots[j][j]
    return abs(det) == 1


@dataclass(frozen=True, eq=False)
class JumpKernel:
    """Immutable jump kernel on Z^d.

    dim : ambient dimension d >= 1
    offsets : (M, d) int64 support points z != 0, lexicographically sorted
    rates : (M,) strictly positive rates, symmetric under z -> -z
    diag_rate : a(0) < 0 with a(0) + sum(rates) = 0 to 1e-12
    tail : TailSpec or None; presence decides the variance class
    """

    dim: int
    offsets: np.ndarray
    rates: np.ndarray
    diag_rate: float
    tail: TailSpec | None = None
    cache_key: str = field(default="")

    def __post_init__(self):
        self.offsets.setflags(write=False)
        self.rates.setflags(write=False)
        if not self.cache_key:
            h = hashlib.sha256(kernel_to_text(self).encode()).hexdigest()[:16]
            object.__setattr__(self, "cache_key", h)

    @property
    def variance_class(self) -> VarianceClass:
        return VarianceClass(self.tail.alpha) if self.tail is not None else VarianceClass()

    @property
    def total_rate(self) -> float:
        return -self.diag_rate

    def rate_of(self, z: Sequence[int]) -> float:
        z = np.asarray(z, dtype=np.int64)
        mask = np.all(self.offsets == z, axis=1)
        idx = np.nonzero(mask)[0]
        return float(self.rates[idx[0]]) if idx.size else 0.0

    def __repr__(self):
        return f"JumpKernel(d={self.dim}, support={len(self.rates)}, {self.variance_class})"


def kernel_from_entries(
    dim: int,
    entries: Mapping[tuple, float],
    diag_rate: float | None = None,
    tail: TailSpec | None = None,
) -> JumpKernel:
    """Build a kernel from an explicit entry map, enforcing hard invariants.

    Symmetry violations, nonpositive rates and a broken row sum are rejected
    here; irreducibility is only *reported*, by validate().
    """
    if dim < 1:
        raise InvalidParameterError("dimension must be >= 1")
    offsets, rates = _canonical_entries(entries, dim)
    if offsets.shape[0] == 0:
        raise DegenerateKernelError("kernel has empty support")
    if rates.min() <= 0.0:
        raise InvalidParameterError("off-diagonal rates must be strictly positive")
    lookup = {tuple(z): r for z, r in zip(offsets.tolist(), rates.tolist())}
    for z, r in lookup.items():
        mz = tuple(-c for c in z)
        if lookup.get(mz) != r:
            raise InvalidParameterError(
                f"symmetry violation: a({z}) = {r} but a({mz}) = {lookup.get(mz)}"
            )
    total = math.fsum(rates.tolist())
    if diag_rate is None:
        diag_rate = -total
    if diag_rate >= 0.0:
        raise InvalidParameterError("a(0) must be strictly negative")
    if abs(diag_rate + total) > 1e-12 * max(1.0, total):
        raise InvalidParameterError(
            f"conservativity violation: a(0) + sum a(z) = {diag_rate + total:.3e}"
        )
    return JumpKernel(dim, offsets, rates, float(diag_rate), tail)


def make_simple_kernel(d: int, kappa: float) -> JumpKernel:
    """Nearest-neighbour kernel kappa*Delta: a(+-e_i) = kappa/(2d), a(0) = -kappa."""
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")
    if not kappa > 0.0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    rate = kappa / (2 * d)
    entries = {}
    for i in range(d):
        e = [0] * d
        e[i] = 1
        entries[tuple(e)] = rate
        entries[tuple(-c for c in e)] = rate
    return kernel_from_entries(d, entries, diag_rate=-kappa)


def default_truncation_radius(d: int, alpha: float) -> int:
    """Smallest power-of-two R with omitted tail mass below 1e-6, capped.

    The omitted-mass rule alone demands astronomically large R for small
    alpha (the tail sum decays like R^-alpha); past the cap the analytic
    tail model in the symbol evaluator carries the omitted mass instead.
    """
    surf = {1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}[d]
    kept = surf / alpha  # continuum scale of the full sum from |z| = 1
    r = 4
    while r < _DEFAULT_R_CAP[d]:
        if surf * r ** (-alpha) / alpha < _TAIL_MASS_TARGET * kept:
            return r
        r *= 2
    return _DEFAULT_R_CAP[d]


def make_heavy_tail_kernel(
    d: int,
    alpha: float,
    H: float | Callable[[np.ndarray], float] = 1.0,
    R: int | None = None,
) -> JumpKernel:
    """Heavy-tailed kernel a(z) = H(z/|z|)/|z|^(d+alpha) on 0 < |z| <= R.

    Stored rates are rescaled so the total off-diagonal rate is 1 and
    a(0) = -1. Tail metadata keeps alpha, R and the normalized H for the
    symbol-side tail model and for divergence classification.
    """
    if not (0.0 < alpha < 2.0):
        raise InvalidParameterError(f"alpha must lie in (0, 2), got {alpha}")
    if d not in (1, 2, 3):
        raise InvalidParameterError("heavy-tail construction supports d in {1, 2, 3}")
    if R is None:
        R = default_truncation_radius(d, alpha)
    if R < 1:
        raise InvalidParameterError("R must be >= 1")

    if callable(H):
        h_fun = H
        h_const = None
    else:
        h_const = float(H)
        if h_const <= 0.0:
            raise InvalidParameterError("H must be positive")
        h_fun = None

    ranges = [np.arange(-R, R + 1)] * d
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
    norms = np.sqrt((grid.astype(float) ** 2).sum(axis=1))
    keep = (norms > 0) & (norms <= R)
    grid, norms = grid[keep], norms[keep]
    if grid.shape[0] == 0:
        raise DegenerateKernelError("heavy-tail support is empty (R too small)")

    raw: dict[tuple, float] = {}
    if h_fun is None:
        vals = h_const / norms ** (d + alpha)
        for z, v in zip(grid.tolist(), vals.tolist()):
            raw[tuple(z)] = v
    else:
        for z, r in zip(grid, norms):
            hval = float(h_fun(z / r))
            if hval <= 0.0:
                raise InvalidParameterError("H must be positive on the sphere")
            raw[tuple(int(c) for c in z)] = hval / r ** (d + alpha)
        # enforce exact evenness (callable H may round asymmetrically)
        for z in list(raw):
            mz = tuple(-c for c in z)
            if not math.isclose(raw[mz], raw[z], rel_tol=1e-9):
                raise InvalidParameterError("H must be even: H(u) = H(-u)")
            raw[z] = raw[mz] = 0.5 * (raw[z] + raw[mz])

    total = math.fsum(raw.values())
    entries = {z: v / total for z, v in raw.items()}

    h_samples = None
    if h_fun is not None and d == 2:
        n_ang = 256
        angles = 2 * math.pi * np.arange(n_ang) / n_ang
        samples = np.array([h_fun(np.array([math.cos(a), math.sin(a)])) for a in angles])
        samples = 0.5 * (samples + np.roll(samples, n_ang // 2))  # exact evenness
        h_samples = tuple((samples / total).tolist())
    if h_const is None:
        probes = _sphere_probe(d)
        h_const = float(np.mean([h_fun(u) for u in probes]))
    tail = TailSpec(alpha=alpha, truncation_radius=R, h_const=h_const / total,
                    h_samples=h_samples)
    return kernel_from_entries(d, entries, diag_rate=-1.0, tail=tail)


def _sphere_probe(d: int):
    if d == 1:
        return [np.array([1.0]), np.array([-1.0])]
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(64, d))
    return list(pts / np.linalg.norm(pts, axis=1, keepdims=True))


@dataclass(frozen=True)
class ValidationReport:
    symmetric: bool
    conservative: bool
    positive: bool
    irreducible: bool
    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.symmetric and self.conservative and self.positive and self.irreducible


def validate(kernel: JumpKernel) -> ValidationReport:
    """Re-check all structural invariants; failures are reported, not raised."""
    msgs = []
    lookup = {tuple(z): r for z, r in zip(kernel.offsets.tolist(), kernel.rates.tolist())}
    symmetric = all(lookup.get(tuple(-c for c in z)) == r for z, r in lookup.items())
    if not symmetric:
        msgs.append("symmetry violation: a(z) != a(-z) for some z")
    total = math.fsum(kernel.rates.tolist())
    conservative = abs(kernel.diag_rate + total) <= 1e-12 * max(1.0, total)
    if not conservative:
        msgs.append(f"row sum a(0) + sum a(z) = {kernel.diag_rate + total:.3e}")
    positive = bool(kernel.rates.min() > 0.0) and kernel.diag_rate < 0.0
    if not positive:
        msgs.append("sign pattern violated (need a(z) > 0, a(0) < 0)")
    irreducible = _hnf_generates_unit_lattice(kernel.offsets)
    if not irreducible:
        msgs.append("support does not generate Z^d (sublattice of index > 1)")
    return ValidationReport(symmetric, conservative, positive, irreducible, tuple(msgs))


def variance_class(kernel: JumpKernel) -> VarianceClass:
    return kernel.variance_class


# ---------------------------------------------------------------------------
# serialization: key-value text with one "entry z_1 ... z_d rate" line per
# offset; floats carry 17 significant digits so round-trips are exact


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def kernel_to_text(kernel: JumpKernel) -> str:
    out = io.StringIO()
    out.write("brwspectrum-kernel v1\n")
    out.write("# unit-rate convention: sum of off-diagonal rates fixed at construction\n")
    out.write(f"dim {kernel.dim}\n")
    out.write(f"diag {_fmt(kernel.diag_rate)}\n")
    for z, r in zip(kernel.offsets.tolist(), kernel.rates.tolist()):
        out.write("entry " + " ".join(str(c) for c in z) + " " + _fmt(r) + "\n")
    if kernel.tail is not None:
        t = kernel.tail
        out.write(f"tail alpha {_fmt(t.alpha)} radius {t.truncation_radius} h {_fmt(t.h_const)}\n")
        if t.h_samples is not None:
            out.write("tail-samples " + " ".join(_fmt(v) for v in t.h_samples) + "\n")
    return out.getvalue()


def kernel_from_text(text: str) -> JumpKernel:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("brwspectrum-kernel"):
        raise InvalidParameterError("not a kernel file (missing header)")
    dim = None
    diag = None
    entries: dict[tuple, float] = {}
    tail_kv = None
    tail_samples = None
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "dim":
            dim = int(parts[1])
        elif parts[0] == "diag":
            diag = float(parts[1])
        elif parts[0] == "entry":
            z = tuple(int(c) for c in parts[1:-1])
            entries[z] = float(parts[-1])
        elif parts[0] == "tail":
            tail_kv = dict(zip(parts[1::2], parts[2::2]))
        elif parts[0] == "tail-samples":
            tail_samples = tuple(float(v) for v in parts[1:])
        else:
            raise InvalidParameterError(f"unknown kernel line: {ln!r}")
    if dim is None or diag is None:
        raise InvalidParameterError("kernel file missing dim/diag")
    tail = None
    if tail_kv is not None:
        tail = TailSpec(
            alpha=float(tail_kv["alpha"]),
            truncation_radius=int(tail_kv["radius"]),
            h_const=float(tail_kv["h"]),
            h_samples=tail_samples,
        )
    return kernel_from_entries(dim, entries, diag_rate=diag, tail=tail)
