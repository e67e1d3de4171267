"""Exact stochastic simulation of the scaled cascade.

Gillespie's direct method drives two kernels: a full event logger used for
small systems and diagnostics, and a memory-bounded kernel that records the
state only on a fixed time grid, used for large batches.  Both consume the
random stream in the same order (one exponential, one uniform per event),
so a shared seed yields the same event sequence in either mode.

Reaction order inside the kernels matches ``CascadeParams.reaction_ids``:
binding, unbinding, then the internal hops in stage order, then release.
Propensities follow the scaling regime: binding is O(1) per molecule pair
while every other channel carries a factor n.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .model import CascadeParams, FullState, ScalingRegime, check_state
from .util import mix_seed, parallel_map


def default_initial(params: CascadeParams, regime: ScalingRegime) -> FullState:
    """All substrate unconverted, no complexes: x_S = n, x_P = 0."""
    return FullState(x_c=(0,) * params.r, x_s=regime.n, x_p=0)


@dataclass(frozen=True)
class Trajectory:
    """Full event log; row 0 is the initial state, later rows are post-jump."""

    params: CascadeParams
    regime: ScalingRegime
    x0: FullState
    T: float
    times: np.ndarray
    x_c: np.ndarray
    x_s: np.ndarray
    x_p: np.ndarray
    absorbed: bool

    @property
    def n_events(self) -> int:
        return len(self.times) - 1

    @property
    def absorption_time(self) -> float | None:
        return float(self.times[-1]) if self.absorbed else None

    def state_at(self, t: float) -> FullState:
        if not 0.0 <= t <= self.T:
            raise ValueError(f"t={t} outside [0, {self.T}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return FullState(
            x_c=tuple(int(v) for v in self.x_c[i]),
            x_s=int(self.x_s[i]),
            x_p=int(self.x_p[i]),
        )

    def scaled(self) -> "ScaledTrajectory":
        n = float(self.regime.n)
        return ScaledTrajectory(
            params=self.params,
            regime=self.regime,
            T=self.T,
            times=self.times,
            z_c=self.x_c.astype(float),
            z_s=self.x_s / n,
            z_p=self.x_p / n,
            absorbed=self.absorbed,
        )


@dataclass(frozen=True)
class ScaledTrajectory:
    """Event log in scaled coordinates: z_S = x_S/n, z_P = x_P/n, z_C = x_C."""

    params: CascadeParams
    regime: ScalingRegime
    T: float
    times: np.ndarray
    z_c: np.ndarray
    z_s: np.ndarray
    z_p: np.ndarray
    absorbed: bool

    def sample_on_grid(self, grid: np.ndarray) -> np.ndarray:
        """Right-continuous sample; columns are z_C(1..r), z_S, z_P."""
        grid = np.asarray(grid, dtype=float)
        if grid.size and (grid[0] < 0.0 or grid[-1] > self.T + 1e-12):
            raise ValueError("grid must lie within [0, T]")
        idx = np.searchsorted(self.times, grid, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 1)
        return np.column_stack([self.z_c[idx], self.z_s[idx], self.z_p[idx]])

    def occupation_measure(self, t_end: float | None = None) -> dict[tuple[int, ...], float]:
        """Fraction of [0, t_end] spent in each complex-occupancy cell."""
        if t_end is None:
            t_end = self.T
        if not 0.0 < t_end <= self.T + 1e-12:
            raise ValueError(f"t_end={t_end} outside (0, {self.T}]")
        weights: dict[tuple[int, ...], float] = {}
        times = self.times
        hi = int(np.searchsorted(times, t_end, side="right"))
        for i in range(hi):
            upper = times[i + 1] if i + 1 < hi else t_end
            dur = float(upper - times[i])
            if dur <= 0.0:
                continue
            cell = tuple(int(v) for v in self.z_c[i])
            weights[cell] = weights.get(cell, 0.0) + dur / t_end
        return weights


@dataclass(frozen=True)
class GridBatch:
    """Replicated grid samples in scaled coordinates; z_c keeps raw counts."""

    params: CascadeParams
    regime: ScalingRegime
    x0: FullState
    grid: np.ndarray
    z_c: np.ndarray
    z_s: np.ndarray
    z_p: np.ndarray
    absorbed: np.ndarray
    base_seed: int

    @property
    def reps(self) -> int:
        return self.z_s.shape[0]


def _unpack(params: CascadeParams, regime: ScalingRegime, x0: FullState):
    check_state(params, x0)
    n = regime.n
    kf = [float(k) for k in params.kappa_fwd]
    kb = [float(n * k) for k in params.kappa_bwd]
    kfn = [float(n * k) for k in params.kappa_fwd]
    kpn = float(n * params.kappa_p)
    return n, kf[0], kb, kfn, kpn


def simulate_full(
    params: CascadeParams,
    regime: ScalingRegime,
    T: float,
    seed: int,
    x0: FullState | None = None,
    max_events: int | None = None,
) -> Trajectory:
    """Direct-method run logging every event up to T (or max_events)."""
    if x0 is None:
        x0 = default_initial(params, regime)
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    n, kf1, kb, kfn, kpn = _unpack(params, regime, x0)
    r = params.r
    J = params.J
    rng = random.Random(seed)
    rnd = rng.random
    log = math.log

    c = list(x0.x_c)
    x_s = x0.x_s
    x_p = x0.x_p
    t = 0.0
    times = [0.0]
    rows = [tuple(c) + (x_s, x_p)]
    absorbed = False
    rates = [0.0] * (2 * r + 1)
    while max_events is None or len(times) - 1 < max_events:
        free = J
        for v in c:
            free -= v
        rates[0] = kf1 * x_s * free
        rates[1] = kb[0] * c[0]
        total = rates[0] + rates[1]
        for i in range(1, r):
            a = kfn[i] * c[i - 1]
            b = kb[i] * c[i]
            rates[2 * i] = a
            rates[2 * i + 1] = b
            total += a + b
        rel = kpn * c[r - 1]
        rates[2 * r] = rel
        total += rel
        if total == 0.0:
            absorbed = True
            break
        t_next = t - log(1.0 - rnd()) / total
        if t_next > T:
            break
        v = rnd() * total
        acc = rates[0]
        if v < acc:
            x_s -= 1
            c[0] += 1
        else:
            acc += rates[1]
            if v < acc:
                x_s += 1
                c[0] -= 1
            else:
                k = 0
                for i in range(1, r):
                    acc += rates[2 * i]
                    if v < acc:
                        c[i - 1] -= 1
                        c[i] += 1
                        k = i
                        break
                    acc += rates[2 * i + 1]
                    if v < acc:
                        c[i - 1] += 1
                        c[i] -= 1
                        k = i
                        break
                if k == 0:
                    c[r - 1] -= 1
                    x_p += 1
        t = t_next
        times.append(t)
        rows.append(tuple(c) + (x_s, x_p))

    arr = np.array(rows, dtype=np.int64)
    return Trajectory(
        params=params,
        regime=regime,
        x0=x0,
        T=float(T),
        times=np.array(times),
        x_c=arr[:, :r],
        x_s=arr[:, r],
        x_p=arr[:, r + 1],
        absorbed=absorbed,
    )


def _run_grid_r1(kf1, kb1, kpn, J, T, grid, rng, c1, x_s, x_p, out):
    """Grid-accumulating kernel specialised to a single stage."""
    rnd = rng.random
    log = math.log
    m = len(grid)
    g = 0
    t = 0.0
    absorbed = False
    while True:
        a = kf1 * x_s * (J - c1)
        b = kb1 * c1
        p = kpn * c1
        total = a + b + p
        if total == 0.0:
            absorbed = True
            break
        t_next = t - log(1.0 - rnd()) / total
        if t_next > T:
            break
        while g < m and grid[g] < t_next:
            out[g, 0] = c1
            out[g, 1] = x_s
            out[g, 2] = x_p
            g += 1
        v = rnd() * total
        if v < a:
            x_s -= 1
            c1 += 1
        elif v < a + b:
            x_s += 1
            c1 -= 1
        else:
            c1 -= 1
            x_p += 1
        t = t_next
    while g < m:
        out[g, 0] = c1
        out[g, 1] = x_s
        out[g, 2] = x_p
        g += 1
    return absorbed


def _run_grid_generic(kf1, kb, kfn, kpn, J, T, grid, rng, c, x_s, x_p, out):
    r = len(c)
    rnd = rng.random
    log = math.log
    m = len(grid)
    g = 0
    t = 0.0
    absorbed = False
    rates = [0.0] * (2 * r + 1)
    while True:
        free = J
        for v in c:
            free -= v
        rates[0] = kf1 * x_s * free
        rates[1] = kb[0] * c[0]
        total = rates[0] + rates[1]
        for i in range(1, r):
            a = kfn[i] * c[i - 1]
            b = kb[i] * c[i]
            rates[2 * i] = a
            rates[2 * i + 1] = b
            total += a + b
        rel = kpn * c[r - 1]
        rates[2 * r] = rel
        total += rel
        if total == 0.0:
            absorbed = True
            break
        t_next = t - log(1.0 - rnd()) / total
        if t_next > T:
            break
        while g < m and grid[g] < t_next:
            for j in range(r):
                out[g, j] = c[j]
            out[g, r] = x_s
            out[g, r + 1] = x_p
            g += 1
        v = rnd() * total
        acc = rates[0]
        if v < acc:
            x_s -= 1
            c[0] += 1
        else:
            acc += rates[1]
            if v < acc:
                x_s += 1
                c[0] -= 1
            else:
                hit = False
                for i in range(1, r):
                    acc += rates[2 * i]
                    if v < acc:
                        c[i - 1] -= 1
                        c[i] += 1
                        hit = True
                        break
                    acc += rates[2 * i + 1]
                    if v < acc:
                        c[i - 1] += 1
                        c[i] -= 1
                        hit = True
                        break
                if not hit:
                    c[r - 1] -= 1
                    x_p += 1
        t = t_next
    while g < m:
        for j in range(r):
            out[g, j] = c[j]
        out[g, r] = x_s
        out[g, r + 1] = x_p
        g += 1
    return absorbed


def simulate_grid(
    params: CascadeParams,
    regime: ScalingRegime,
    T: float,
    grid: np.ndarray,
    seed: int,
    x0: FullState | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """One run sampled on a grid; returns (z_c row-block, z_s, z_p, absorbed)."""
    if x0 is None:
        x0 = default_initial(params, regime)
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d array")
    if np.any(np.diff(grid) < 0) or grid[0] < 0.0 or grid[-1] > T + 1e-12:
        raise ValueError("grid must be sorted and lie within [0, T]")
    n, kf1, kb, kfn, kpn = _unpack(params, regime, x0)
    r = params.r
    out = np.empty((grid.size, r + 2), dtype=np.int64)
    rng = random.Random(seed)
    glist = grid.tolist()
    if r == 1:
        absorbed = _run_grid_r1(
            kf1, kb[0], kpn, params.J, T, glist, rng, x0.x_c[0], x0.x_s, x0.x_p, out
        )
    else:
        absorbed = _run_grid_generic(
            kf1, kb, kfn, kpn, params.J, T, glist, rng, list(x0.x_c), x0.x_s, x0.x_p, out
        )
    z_c = out[:, :r].astype(float)
    return z_c, out[:, r] / n, out[:, r + 1] / n, absorbed


def _grid_job(args):
    params, n, T, grid, x0_tuple, seeds = args
    regime = ScalingRegime(n=n)
    x0 = FullState(x_c=x0_tuple[0], x_s=x0_tuple[1], x_p=x0_tuple[2])
    r = params.r
    m = len(grid)
    z_c = np.empty((len(seeds), m, r))
    z_s = np.empty((len(seeds), m))
    z_p = np.empty((len(seeds), m))
    absorbed = np.zeros(len(seeds), dtype=bool)
    for j, s in enumerate(seeds):
        z_c[j], z_s[j], z_p[j], absorbed[j] = simulate_grid(
            params, regime, T, grid, s, x0=x0
        )
    return z_c, z_s, z_p, absorbed


def simulate_batch(
    params: CascadeParams,
    regime: ScalingRegime,
    T: float,
    grid: np.ndarray,
    reps: int,
    base_seed: int,
    x0: FullState | None = None,
    threads: int = 1,
) -> GridBatch:
    """Independent replicates on a shared grid; replicate k uses mix_seed(base, k).

    Results are identical for any thread count because seeding is per
    replicate, not per worker.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    if x0 is None:
        x0 = default_initial(params, regime)
    grid = np.asarray(grid, dtype=float)
    seeds = [mix_seed(base_seed, k) for k in range(reps)]
    n_chunks = max(1, min(threads, reps))
    bounds = np.linspace(0, reps, n_chunks + 1).astype(int)
    jobs = [
        (params, regime.n, T, grid, (x0.x_c, x0.x_s, x0.x_p), seeds[lo:hi])
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    if len(jobs) == 1:
        results = [_grid_job(jobs[0])]
    else:
        results = parallel_map(_grid_job, jobs, threads=len(jobs))
    return GridBatch(
        params=params,
        regime=regime,
        x0=x0,
        grid=grid,
        z_c=np.concatenate([r[0] for r in results]),
        z_s=np.concatenate([r[1] for r in results]),
        z_p=np.concatenate([r[2] for r in results]),
        absorbed=np.concatenate([r[3] for r in results]),
        base_seed=base_seed,
    )
