"""Interacting-particle view of substrate conversion.

n exchangeable substrate particles start unconverted; while m of them
remain, each converts at rate g(m/n) = h(m/n)/(m/n), so the total rate is
n*h(m/n) and the count process is a pure-death chain.  Only conversion
times are stored; particle identities are exchangeable and carry no
information.  A per-particle clock simulator with its own random stream is
kept as an independent oracle for small n, and a tagged-particle sampler
draws conversion times directly from the limiting law by inverting the
survival ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import CascadeParams
from .qssa import ReducedPath, conversion_rate_constants, g_theta
from .util import mix_seed

DEFAULT_SURVIVAL_GRID = 256


@dataclass(frozen=True)
class ParticleRun:
    """Sorted conversion times of one n-particle system over [0, T]."""

    n: int
    T: float
    times: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if times.size > self.n:
            raise ValueError(f"{times.size} conversions exceed n={self.n}")
        if times.size and (
            np.any(np.diff(times) < 0) or times[0] <= 0.0 or times[-1] > self.T
        ):
            raise ValueError("conversion times must be sorted and lie in (0, T]")

    @property
    def n_converted(self) -> int:
        return int(self.times.size)

    def survival(self, grid: np.ndarray) -> np.ndarray:
        """Fraction of particles unconverted at each grid time (right-continuous)."""
        grid = np.asarray(grid, dtype=float)
        converted = np.searchsorted(self.times, grid, side="right")
        return (self.n - converted) / self.n


@dataclass(frozen=True)
class TauSample:
    """K observed conversion times within a horizon T."""

    times: tuple[float, ...]
    T: float

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("times must be sorted")
        if times and (times[0] <= 0.0 or times[-1] > self.T):
            raise ValueError(f"times must lie in (0, {self.T}]")

    @property
    def K(self) -> int:
        return len(self.times)


def simulate_ips(params: CascadeParams, n: int, T: float, seed: int) -> ParticleRun:
    """Exact death-chain sample of the n-particle conversion process.

    At m unconverted particles the wait to the next conversion is
    exponential with rate n*h(m/n); all n waits are drawn at once and
    cumulatively summed, then truncated at T.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    num, slope, offset = conversion_rate_constants(params)
    m = np.arange(n, 0, -1, dtype=float)
    y = m / n
    rates = n * num * y / (slope * y + offset)
    rng = np.random.default_rng(seed)
    times = np.cumsum(rng.standard_exponential(n) / rates)
    return ParticleRun(n=n, T=float(T), times=times[times <= T])


def simulate_ips_direct(params: CascadeParams, n: int, T: float, seed: int) -> ParticleRun:
    """Per-particle clock oracle: one exponential clock per unconverted particle.

    O(n^2) draws; intended for small n as an independent check of the
    aggregated chain.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    rng = np.random.default_rng(seed)
    alive = n
    t = 0.0
    times = []
    while alive > 0:
        g = g_theta(params, alive / n)
        if g <= 0.0:
            break
        waits = rng.exponential(1.0 / g, size=alive)
        t += float(waits.min())
        if t > T:
            break
        times.append(t)
        alive -= 1
    return ParticleRun(n=n, T=float(T), times=np.array(times))


def sample_taus(run: ParticleRun, K: int, seed: int, mode: str = "uniform") -> TauSample:
    """Select K observed conversion times from a run.

    ``uniform`` draws without replacement; ``first`` takes the K earliest.
    """
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    if K > run.n_converted:
        raise ValueError(
            f"requested K={K} but only {run.n_converted} conversions occurred"
        )
    if mode == "first":
        chosen = run.times[:K]
    elif mode == "uniform":
        rng = np.random.default_rng(seed)
        idx = rng.choice(run.n_converted, size=K, replace=False)
        chosen = np.sort(run.times[idx])
    else:
        raise ValueError(f"unknown sample mode {mode!r}")
    return TauSample(times=tuple(float(t) for t in chosen), T=run.T)


def simulate_tagged(path: ReducedPath, count: int, seed: int) -> np.ndarray:
    """Conversion times of independent tagged particles under the limit law.

    Inverts P(tau <= t) = 1 - Z_S(t) by bisection on the dense ODE output;
    draws censored beyond the path horizon are returned as inf.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if path.z_s0 != 1.0:
        raise ValueError("tagged-particle law requires Z_S(0) = 1")
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    T = path.T
    z_end = path.z_s(T)
    out = np.full(count, np.inf)
    for i, ui in enumerate(u):
        target = 1.0 - ui
        if target < z_end:
            continue
        if target >= 1.0:
            out[i] = 0.0
            continue
        out[i] = brentq(lambda t: path.z_s(t) - target, 0.0, T, xtol=1e-12)
    return out


@dataclass(frozen=True)
class ChaosReport:
    """Tagged-particle diagnostics against the mean-field limit.

    ``sup_distance`` is the sup over the grid of |mean survival - Z_S|;
    ``sup_se`` the Monte-Carlo standard error at the maximizing grid point.
    ``pair_corr`` is corr(tau_1 ^ T, tau_2 ^ T) for a uniformly chosen pair
    of distinct particles, with a jackknife standard error.
    """

    n: int
    reps: int
    T: float
    grid: np.ndarray
    mean_survival: np.ndarray
    limit_survival: np.ndarray
    sup_distance: float
    sup_se: float
    pair_corr: float
    pair_corr_se: float


def chaos_diagnostics(
    params: CascadeParams,
    n: int,
    reps: int,
    T: float,
    base_seed: int,
    grid_size: int = DEFAULT_SURVIVAL_GRID,
    path: ReducedPath | None = None,
) -> ChaosReport:
    """Survival-curve and pair-correlation diagnostics over replicate runs.

    Exchangeability is used to average exactly over particle labels within
    each run: P(tau_1 > t | run) is the unconverted fraction, and the pair
    moments over distinct labels reduce to per-run sums, so no sampling
    noise is added beyond the replicate level.
    """
    if reps < 2:
        raise ValueError(f"need at least 2 replicates, got {reps}")
    if n < 2:
        raise ValueError(f"pair statistics need n >= 2, got {n}")
    if path is None:
        from .qssa import solve_reduced_ode

        path = solve_reduced_ode(params, (1.0, 0.0), T)
    grid = np.linspace(0.0, T, grid_size + 1)
    limit = np.array([path.z_s(t) for t in grid])

    surv = np.empty((reps, grid.size))
    ef = np.empty(reps)
    ef2 = np.empty(reps)
    efg = np.empty(reps)
    for k in range(reps):
        run = simulate_ips(params, n, T, mix_seed(base_seed, k))
        surv[k] = run.survival(grid)
        censored = n - run.n_converted
        s1 = float(run.times.sum()) + censored * T
        s2 = float((run.times**2).sum()) + censored * T * T
        ef[k] = s1 / n
        ef2[k] = s2 / n
        efg[k] = (s1 * s1 - s2) / (n * (n - 1))

    mean_surv = surv.mean(axis=0)
    dist = np.abs(mean_surv - limit)
    i_max = int(np.argmax(dist))
    sup_se = float(surv[:, i_max].std(ddof=1) / math.sqrt(reps))

    def corr_from(mf: float, mf2: float, mfg: float) -> float:
        var = mf2 - mf * mf
        if var <= 0.0:
            raise RuntimeError("degenerate pair variance in chaos diagnostics")
        return (mfg - mf * mf) / var

    pair_corr = corr_from(ef.mean(), ef2.mean(), efg.mean())
    # leave-one-out jackknife over replicates
    sf, sf2, sfg = ef.sum(), ef2.sum(), efg.sum()
    loo = np.array(
        [
            corr_from(
                (sf - ef[k]) / (reps - 1),
                (sf2 - ef2[k]) / (reps - 1),
                (sfg - efg[k]) / (reps - 1),
            )
            for k in range(reps)
        ]
    )
    pair_corr_se = float(
        math.sqrt((reps - 1) / reps * ((loo - loo.mean()) ** 2).sum())
    )
    return ChaosReport(
        n=n,
        reps=reps,
        T=float(T),
        grid=grid,
        mean_survival=mean_surv,
        limit_survival=limit,
        sup_distance=float(dist[i_max]),
        sup_se=sup_se,
        pair_corr=float(pair_corr),
        pair_corr_se=pair_corr_se,
    )
