"""Pure-Python branching-random-walk event loop.

Reference implementation of the trial kernel; the compiled twin in
_mc_core.pyx follows the exact same arithmetic and random-number
consumption order, so both backends produce bit-identical trajectories
from the same seed. Keep the two in lockstep when editing either.

Event model per particle (depth-first over the offspring tree):
  * off-source: wait Exp(total jump rate), jump to z ~ a(z)/|a(0)|
  * at a source: competing clocks, total rate |a(0)| + sum_{n != 1} b_n;
    a branch event replaces the particle by n offspring at its site
Two uniforms per event: one for the waiting time, one for the outcome.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"
RNG_BLOCK = 4096


class BlockRng:
    """Sequential doubles drawn from a numpy Generator in fixed-size blocks."""

    __slots__ = ("gen", "buf", "idx", "size")

    def __init__(self, gen, block: int = RNG_BLOCK):
        self.gen = gen
        self.size = block
        self.buf = gen.random(block)
        self.idx = 0

    def next(self) -> float:
        if self.idx >= self.size:
            self.buf = self.gen.random(self.size)
            self.idx = 0
        v = self.buf[self.idx]
        self.idx += 1
        return float(v)


def _select(cdf, key: float) -> int:
    """Smallest i with key < cdf[i] (cdf = cumulative rates)."""
    lo, hi = 0, len(cdf)
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= key:
            lo = mid + 1
        else:
            hi = mid
    return min(lo, len(cdf) - 1)


def run_trial(
    rng: BlockRng,
    t_max: float,
    dtg: float,
    n_grid: int,
    x0: np.ndarray,
    sources: np.ndarray,
    offsets: np.ndarray,
    jump_cdf: np.ndarray,
    r_jump: float,
    branch_counts: np.ndarray,
    branch_cdf: np.ndarray,
    r_branch: float,
    pop_cap: int,
    box_radius: int,
    out_total: np.ndarray,
    out_site: np.ndarray,
):
    """One trial; increments out_total (and out_site inside the tracking box)
    at every grid time each particle is alive. Returns (truncated, events)."""
    src_set = {tuple(s) for s in sources.tolist()}
    offs = offsets.tolist()
    cdf = jump_cdf.tolist()
    bcdf = branch_cdf.tolist()
    bcounts = branch_counts.tolist()
    side = 2 * box_radius + 1 if box_radius >= 0 else 0
    events = 0

    stack_t = [0.0]
    stack_x = [tuple(int(c) for c in x0.tolist())]
    while stack_t:
        t = stack_t.pop()
        x = stack_x.pop()
        while True:
            at_src = x in src_set
            r_tot = r_jump + r_branch if at_src else r_jump
            u1 = rng.next()
            dt = -math.log1p(-u1) / r_tot
            t_next = t + dt
            events += 1
            horizon = t_next >= t_max
            j_lo = math.ceil(t / dtg)
            if horizon:
                j_hi = n_grid - 1
            else:
                j_hi = math.ceil(t_next / dtg) - 1
                if j_hi >= n_grid:
                    j_hi = n_grid - 1
            if j_lo <= j_hi:
                in_box = box_radius >= 0 and all(abs(c) <= box_radius for c in x)
                if in_box:
                    sidx = 0
                    for c in x:
                        sidx = sidx * side + (c + box_radius)
                for j in range(j_lo, j_hi + 1):
                    out_total[j] += 1
                    if out_total[j] > pop_cap:
                        return True, events
                    if in_box:
                        out_site[j, sidx] += 1
            if horizon:
                break
            u2 = rng.next()
            if at_src:
                v = u2 * r_tot
                if v < r_jump:
                    z = offs[_select(cdf, v)]
                    x = tuple(c + o for c, o in zip(x, z))
                else:
                    n_off = bcounts[_select(bcdf, v - r_jump)]
                    if n_off == 0:
                        break
                    for _ in range(n_off - 1):
                        stack_t.append(t_next)
                        stack_x.append(x)
            else:
                z = offs[_select(cdf, u2 * r_tot)]
                x = tuple(c + o for c, o in zip(x, z))
            t = t_next
    return False, events
