"""Monte Carlo branching random walk driver and growth-rate estimation.

Trials are independent with per-trial derived seeds (seed, trial index), so
the outcome is reproducible bit-for-bit for a fixed seed no matter which
backend runs the event loop.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .backend import get_backend
from .errors import EstimationImpossibleError, InvalidParameterError
from .gamma import SourceConfiguration
from .kernels import JumpKernel
from .oracles import BranchingLaw

__all__ = ["SimulationOutcome", "simulate_brw", "estimate_lambda0", "estimate_growth_rate"]


@dataclass(frozen=True)
class SimulationOutcome:
    """Per-trial total populations on a uniform time grid plus aggregates."""

    times: np.ndarray                 # (T,)
    totals: np.ndarray                # (trials, T) int64
    truncated: np.ndarray             # (trials,) bool
    seed: int
    law_intensities: tuple[tuple[int, float], ...]
    kernel_key: str
    pop_cap: int
    backend: str
    events: int
    site_box_radius: int | None = None
    site_sums: np.ndarray | None = None   # (T, sites) summed over trials
    growth_rate: float | None = field(default=None, compare=False)
    growth_se: float | None = field(default=None, compare=False)

    @property
    def trials(self) -> int:
        return self.totals.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.totals.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        if self.trials < 2:
            return np.zeros(self.totals.shape[1])
        return self.totals.var(axis=0, ddof=1)

    @property
    def trials_alive(self) -> np.ndarray:
        return (self.totals > 0).sum(axis=0)

    @property
    def unreliable(self) -> bool:
        return bool(self.truncated.mean() > 0.5)

    def site_mean(self, x) -> np.ndarray:
        if self.site_sums is None:
            raise InvalidParameterError("site tracking was not enabled")
        b = self.site_box_radius
        x = tuple(int(c) for c in x)
        if any(abs(c) > b for c in x):
            raise InvalidParameterError(f"{x} outside tracking box")
        idx = 0
        for c in x:
            idx = idx * (2 * b + 1) + (c + b)
        return self.site_sums[:, idx] / self.trials

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("t,mean,variance,trials_alive\n")
        mean, var, alive = self.mean, self.variance, self.trials_alive
        for j, t in enumerate(self.times):
            out.write(f"{t:.17g},{mean[j]:.17g},{var[j]:.17g},{int(alive[j])}\n")
        return out.getvalue()

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "pop_cap": self.pop_cap,
            "law": {str(n): b for n, b in self.law_intensities},
            "kernel_hash": self.kernel_key,
            "backend": self.backend,
            "events": self.events,
            "truncated_trials": int(self.truncated.sum()),
            "unreliable": self.unreliable,
            "growth_rate": self.growth_rate,
            "growth_se": self.growth_se,
        }

    def to_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True, indent=2)


def simulate_brw(
    kernel: JumpKernel,
    sources: SourceConfiguration,
    law: BranchingLaw,
    t_max: float,
    trials: int,
    seed: int,
    pop_cap: int = 1_000_000,
    grid_dt: float = 0.5,
    start=None,
    track_box_radius: int | None = None,
    backend: str | None = None,
    fit_window: tuple[float, float] | None = None,
) -> SimulationOutcome:
    """Exact-event simulation of the branching random walk.

    Each particle walks with the kernel's jump rates; at a source, jump and
    branching clocks compete (branch rates b_n for n != 1). Trials whose
    population exceeds pop_cap are cut short and flagged; the outcome is
    flagged unreliable when more than half the trials truncate.
    """
    if trials < 1:
        raise InvalidParameterError("need at least one trial")
    if t_max <= 0.0 or grid_dt <= 0.0:
        raise InvalidParameterError("t_max and grid_dt must be positive")
    if sources.dim != kernel.dim:
        raise InvalidParameterError("source dimension mismatch")
    mod = get_backend(backend)
    d = kernel.dim
    n_grid = int(math.floor(t_max / grid_dt + 1e-9)) + 1
    dtg = t_max / (n_grid - 1) if n_grid > 1 else t_max
    times = np.arange(n_grid) * dtg

    x0 = np.asarray(start if start is not None else sources.points[0], dtype=np.int64)
    if x0.shape != (d,):
        raise InvalidParameterError("start point has wrong dimension")
    src = np.asarray(sources.points, dtype=np.int64).reshape(sources.n, d)
    offsets = np.ascontiguousarray(kernel.offsets, dtype=np.int64)
    jump_cdf = np.cumsum(kernel.rates)
    r_jump = float(jump_cdf[-1])
    if law.intensities:
        bcounts = np.asarray([n for n, _ in law.intensities], dtype=np.int64)
        bcdf = np.cumsum([b for _, b in law.intensities])
        r_branch = float(bcdf[-1])
    else:
        bcounts = np.zeros(0, dtype=np.int64)
        bcdf = np.zeros(0)
        r_branch = 0.0

    box = -1 if track_box_radius is None else int(track_box_radius)
    n_sites = (2 * box + 1) ** d if box >= 0 else 0
    site_sums = np.zeros((n_grid, n_sites), dtype=np.int64) if box >= 0 else None
    out_site_dummy = np.zeros((0, 0), dtype=np.int64)

    totals = np.zeros((trials, n_grid), dtype=np.int64)
    truncated = np.zeros(trials, dtype=bool)
    events = 0
    for trial in range(trials):
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, trial))))
        rng = mod.BlockRng(gen)
        out_site = np.zeros((n_grid, n_sites), dtype=np.int64) if box >= 0 else out_site_dummy
        trunc, ev = mod.run_trial(
            rng, float(t_max), float(dtg), n_grid, x0, src, offsets, jump_cdf,
            r_jump, bcounts, bcdf, r_branch, int(pop_cap), box,
            totals[trial], out_site,
        )
        truncated[trial] = trunc
        events += int(ev)
        if box >= 0:
            site_sums += out_site

    outcome = SimulationOutcome(
        times=times,
        totals=totals,
        truncated=truncated,
        seed=int(seed),
        law_intensities=law.intensities,
        kernel_key=kernel.cache_key,
        pop_cap=int(pop_cap),
        backend=mod.BACKEND_NAME,
        events=events,
        site_box_radius=(box if box >= 0 else None),
        site_sums=site_sums,
    )
    try:
        rate, se = estimate_lambda0(outcome, fit_window)
        object.__setattr__(outcome, "growth_rate", rate)
        object.__setattr__(outcome, "growth_se", se)
    except EstimationImpossibleError:
        pass
    return outcome


def estimate_growth_rate(
    times: np.ndarray,
    totals: np.ndarray,
    fit_window: tuple[float, float],
    seed: int = 0,
    n_boot: int = 200,
) -> tuple[float, float]:
    """Least-squares slope of log mean population over the window, with a
    bootstrap-over-trials standard error."""
    times = np.asarray(times, dtype=float)
    totals = np.atleast_2d(np.asarray(totals, dtype=float))
    lo, hi = fit_window
    sel = (times >= lo) & (times <= hi)
    if sel.sum() < 2:
        raise EstimationImpossibleError("fit window covers fewer than two grid points")
    mean = totals.mean(axis=0)[sel]
    if np.any(mean <= 0.0):
        raise EstimationImpossibleError("mean population vanishes inside the window")
    ts = times[sel]
    slope = float(np.polyfit(ts, np.log(mean), 1)[0])
    n_trials = totals.shape[0]
    if n_trials < 2:
        return slope, 0.0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0xB007))))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n_trials, size=n_trials)
        m = totals[idx].mean(axis=0)[sel]
        if np.any(m <= 0.0):
            boots[b] = np.nan
            continue
        boots[b] = np.polyfit(ts, np.log(m), 1)[0]
    good = boots[~np.isnan(boots)]
    se = float(good.std(ddof=1)) if good.size > 1 else 0.0
    return slope, se


def estimate_lambda0(
    outcome: SimulationOutcome, fit_window: tuple[float, float] | None = None
) -> tuple[float, float]:
    """Growth-rate estimate from a simulation outcome (default window: the
    second half of the simulated range)."""
    if fit_window is None:
        t_hi = float(outcome.times[-1])
        fit_window = (0.5 * t_hi, t_hi)
    lo, hi = fit_window
    if lo < outcome.times[0] - 1e-12 or hi > outcome.times[-1] + 1e-12:
        raise InvalidParameterError("fit window outside the simulated range")
    return estimate_growth_rate(outcome.times, outcome.totals, fit_window, outcome.seed)
