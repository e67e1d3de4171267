"""Likelihood-based inference from observed conversion times.

Conversion times observed up to a horizon T determine rate parameters only
through the aggregate conversion-speed function h and its survival ODE, so
the log-likelihood of K times conditioned on conversion by T is

    l(theta) = sum_i log h_theta(Z_S(t_i)) - K log(1 - Z_S(T)).

Two parameter coordinate systems are supported: the raw rate vector
(kappa_1, kappa_-1, ..., kappa_p) and, for a single stage, the reduced pair
(kappa_m, kappa_p) with h(y) = J kappa_p y / (y + kappa_m).  Any subset of
coordinates may be held fixed; for deeper cascades the raw vector is not
identifiable from conversion times alone, so callers must fix all but an
identifiable subset.

Point estimation is multi-start Nelder-Mead over log-parameters; posterior
sampling is random-walk Metropolis over log-parameters with the Jacobian
correction.  A hand-rolled Gaussian KDE summarizes replicated estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .model import CascadeParams
from .qssa import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    conversion_rate_constants,
    survival_from_constants,
)
from .rk45 import SolverError
from .ips import TauSample
from .util import mix_seed

# Survival level at which the likelihood solve freezes the decayed state.
# It sits above the solver's absolute noise level so the crossing is
# detected reliably; an observation below it is treated as unexplainable
# (-inf) rather than priced at the frozen value, which would otherwise
# fabricate an unbounded likelihood as kappa_p grows.
_SURVIVAL_FLOOR = 1e-9


@dataclass(frozen=True)
class ReducedParameterization:
    """theta = (kappa_m, kappa_p); single-stage aggregate form."""

    J: int

    @property
    def names(self) -> tuple[str, ...]:
        return ("kappa_m", "kappa_p")

    def h_constants(self, full: np.ndarray) -> tuple[float, float, float]:
        km, kp = float(full[0]), float(full[1])
        if km <= 0 or kp <= 0:
            raise ValueError("parameters must be positive")
        return (self.J * kp, 1.0, km)


@dataclass(frozen=True)
class RawParameterization:
    """theta = (kappa_1, kappa_-1, ..., kappa_r, kappa_-r, kappa_p)."""

    r: int
    J: int

    @property
    def names(self) -> tuple[str, ...]:
        out: list[str] = []
        for i in range(1, self.r + 1):
            out.extend((f"kappa_{i}", f"kappa_-{i}"))
        out.append("kappa_p")
        return tuple(out)

    def h_constants(self, full: np.ndarray) -> tuple[float, float, float]:
        params = CascadeParams(
            r=self.r,
            J=self.J,
            kappa_fwd=tuple(float(full[2 * i]) for i in range(self.r)),
            kappa_bwd=tuple(float(full[2 * i + 1]) for i in range(self.r)),
            kappa_p=float(full[2 * self.r]),
        )
        return conversion_rate_constants(params)


Parameterization = ReducedParameterization | RawParameterization


@dataclass(frozen=True)
class InferenceProblem:
    """Observed conversion times plus the coordinates being estimated.

    ``bounds`` constrain the free coordinates (those not in ``fixed``);
    evaluations outside the box return -inf rather than raising so that
    optimizers and samplers can recover.
    """

    data: TauSample
    parameterization: Parameterization
    bounds: tuple[tuple[float, float], ...]
    fixed: dict[str, float] = field(default_factory=dict)
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self) -> None:
        if self.data.K < 1:
            raise ValueError("need at least one observed conversion time")
        names = self.parameterization.names
        for key, value in self.fixed.items():
            if key not in names:
                raise ValueError(f"unknown fixed coordinate {key!r}")
            if not value > 0:
                raise ValueError(f"fixed {key} must be positive, got {value}")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) != self.dim:
            raise ValueError(
                f"{len(bounds)} bounds for {self.dim} free coordinates"
            )
        for lo, hi in bounds:
            if not (0 < lo < hi):
                raise ValueError(f"bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(n for n in self.parameterization.names if n not in self.fixed)

    @property
    def dim(self) -> int:
        return len(self.free_names)

    def full_vector(self, theta: np.ndarray) -> np.ndarray:
        """Merge free coordinates with fixed values into the full vector."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must have shape ({self.dim},), got {theta.shape}")
        full = np.empty(len(self.parameterization.names))
        j = 0
        for i, name in enumerate(self.parameterization.names):
            if name in self.fixed:
                full[i] = self.fixed[name]
            else:
                full[i] = theta[j]
                j += 1
        return full

    def in_bounds(self, theta: np.ndarray) -> bool:
        return all(
            lo <= v <= hi for v, (lo, hi) in zip(np.asarray(theta), self.bounds)
        )


def log_likelihood(problem: InferenceProblem, theta: Sequence[float]) -> float:
    """Conditional log-likelihood of the observed times; -inf off support."""
    theta = np.asarray(theta, dtype=float)
    if not problem.in_bounds(theta):
        return -math.inf
    return _log_likelihood_any(problem, theta, strict=True)


def _log_likelihood_any(
    problem: InferenceProblem, theta: np.ndarray, strict: bool = False
) -> float:
    """Likelihood at any positive theta; the search box is not enforced.

    The likelihood is smooth on the whole positive orthant, so optimizers
    work on this surface and the box only places the starts.  With
    ``strict`` a solver breakdown raises; otherwise it returns -inf, since
    optimizers reach such points only at astronomical rate values.
    """
    if problem.data.K == 0:
        raise ValueError("empty data")
    try:
        num, slope, offset = problem.parameterization.h_constants(
            problem.full_vector(theta)
        )
    except ValueError:
        return -math.inf
    if num <= 0 or offset <= 0:
        return -math.inf

    T = problem.data.T
    # freeze fully-decayed survival: below the floor the likelihood is
    # already astronomically small and further integration is pure stiffness
    try:
        sol = survival_from_constants(
            num,
            slope,
            offset,
            T,
            rtol=problem.rtol,
            atol=problem.atol,
            floor=_SURVIVAL_FLOOR,
        )
    except SolverError:
        if strict:
            raise
        return -math.inf
    z = np.asarray(sol(np.asarray(problem.data.times)))
    if not np.all(z > _SURVIVAL_FLOOR):
        return -math.inf
    hz = num * z / (slope * z + offset)
    if not np.all(hz > 0):
        return -math.inf
    tail = 1.0 - float(sol.eval1(T))
    if tail <= 0:
        return -math.inf
    return float(np.log(hz).sum() - problem.data.K * math.log(tail))


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 8
    xatol: float = 1e-10
    fatol: float = 1e-10
    maxiter: int = 2000


@dataclass(frozen=True)
class StartResult:
    x0: tuple[float, ...]
    theta: tuple[float, ...]
    loglik: float
    success: bool
    iterations: int


@dataclass(frozen=True)
class MLEResult:
    theta: np.ndarray
    loglik: float
    starts: tuple[StartResult, ...]

    @property
    def converged(self) -> bool:
        return any(s.success for s in self.starts)


def _latin_hypercube(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n stratified points in [0,1]^d, one per stratum per coordinate."""
    u = np.empty((n, d))
    for j in range(d):
        u[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return u


def fit_mle(
    problem: InferenceProblem,
    config: OptimizerConfig | None = None,
    seed: int = 0,
) -> MLEResult:
    """Multi-start Nelder-Mead maximum likelihood over log-parameters."""
    if config is None:
        config = OptimizerConfig()
    log_lo = np.array([math.log(lo) for lo, _ in problem.bounds])
    log_hi = np.array([math.log(hi) for _, hi in problem.bounds])

    def objective(phi: np.ndarray) -> float:
        return -_log_likelihood_any(problem, np.exp(phi))

    rng = np.random.default_rng(mix_seed(seed, 0))
    x0s = log_lo + _latin_hypercube(rng, config.starts, problem.dim) * (log_hi - log_lo)
    starts: list[StartResult] = []
    for x0 in x0s:
        # a start whose whole neighborhood is already unexplainable (survival
        # crushed below every observation) gives Nelder-Mead an all-infinite
        # simplex to grind on; record it as failed after one evaluation
        if not math.isfinite(objective(x0)):
            starts.append(
                StartResult(
                    x0=tuple(float(v) for v in np.exp(x0)),
                    theta=tuple(float(v) for v in np.exp(x0)),
                    loglik=-math.inf,
                    success=False,
                    iterations=0,
                )
            )
            continue
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": config.xatol,
                "fatol": config.fatol,
                "maxiter": config.maxiter,
                "maxfev": 2 * config.maxiter,
            },
        )
        starts.append(
            StartResult(
                x0=tuple(float(v) for v in np.exp(x0)),
                theta=tuple(float(v) for v in np.exp(res.x)),
                loglik=-float(res.fun),
                success=bool(res.success),
                iterations=int(res.nit),
            )
        )
    if not any(s.success for s in starts):
        detail = "; ".join(
            f"start {i}: x0={s.x0}, loglik={s.loglik}, iters={s.iterations}"
            for i, s in enumerate(starts)
        )
        raise RuntimeError(f"no optimizer start converged: {detail}")
    best = max(starts, key=lambda s: s.loglik)
    if not math.isfinite(best.loglik):
        raise RuntimeError("optimizer never found a finite-likelihood point")
    return MLEResult(theta=np.array(best.theta), loglik=best.loglik, starts=tuple(starts))


@dataclass(frozen=True)
class UniformBoxPrior:
    """Independent uniform prior over a positive box."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        for lo, hi in bounds:
            if not (0 < lo < hi):
                raise ValueError(f"prior bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def log_density(self, theta: np.ndarray) -> float:
        inside = all(
            lo <= v <= hi for v, (lo, hi) in zip(np.asarray(theta), self.bounds)
        )
        return 0.0 if inside else -math.inf

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.uniform(lo, hi) for lo, hi in self.bounds])


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 1000
    samples: int = 5000
    target_accept: float = 0.3
    adapt_interval: int = 50
    initial_step: float = 0.25


@dataclass(frozen=True)
class Posterior:
    """Kept Metropolis samples in parameter space."""

    samples: np.ndarray
    log_posts: np.ndarray
    acceptance_rate: float
    prior: UniformBoxPrior
    step: float
    names: tuple[str, ...]


def fit_bayes(
    problem: InferenceProblem,
    prior: UniformBoxPrior,
    config: ChainConfig | None = None,
    seed: int = 0,
    log_likelihood_fn: Callable[[np.ndarray], float] | None = None,
) -> Posterior:
    """Adaptive random-walk Metropolis over log-parameters.

    The walk lives in phi = log(theta), so the target picks up the Jacobian
    term sum(phi).  The scalar proposal scale adapts toward the target
    acceptance rate during burn-in only; kept samples use a frozen kernel.
    ``log_likelihood_fn`` replaces the model likelihood (testing hook).
    """
    if config is None:
        config = ChainConfig()
    if prior.dim != problem.dim:
        raise ValueError(
            f"prior dimension {prior.dim} != problem dimension {problem.dim}"
        )
    for (plo, phi_), (blo, bhi) in zip(prior.bounds, problem.bounds):
        if plo < blo or phi_ > bhi:
            raise ValueError("prior support must lie within problem bounds")
    loglik = (
        (lambda th: log_likelihood(problem, th))
        if log_likelihood_fn is None
        else log_likelihood_fn
    )

    def log_post(phi: np.ndarray) -> float:
        theta = np.exp(phi)
        lp = prior.log_density(theta)
        if not math.isfinite(lp):
            return -math.inf
        ll = loglik(theta)
        if not math.isfinite(ll):
            return -math.inf
        return ll + lp + float(phi.sum())

    rng = np.random.default_rng(mix_seed(seed, 0))
    widths = np.array([math.log(hi) - math.log(lo) for lo, hi in prior.bounds])
    phi = np.log(
        np.array([math.sqrt(lo * hi) for lo, hi in prior.bounds])
    )
    lp = log_post(phi)
    tries = 0
    while not math.isfinite(lp):
        if tries >= 200:
            raise RuntimeError("no finite-posterior initial point found in prior")
        phi = np.log(prior.sample(rng))
        lp = log_post(phi)
        tries += 1

    step = config.initial_step
    kept = np.empty((config.samples, problem.dim))
    kept_lp = np.empty(config.samples)
    accepted_total = 0
    accepted_kept = 0
    block_accepts = 0
    block_index = 0
    total = config.burn_in + config.samples
    for it in range(total):
        prop = phi + step * widths * rng.standard_normal(problem.dim)
        lp_prop = log_post(prop)
        if math.log(rng.random()) < lp_prop - lp:
            phi, lp = prop, lp_prop
            accepted_total += 1
            block_accepts += 1
            if it >= config.burn_in:
                accepted_kept += 1
        if it < config.burn_in and (it + 1) % config.adapt_interval == 0:
            block_index += 1
            rate = block_accepts / config.adapt_interval
            # undamped while burning in: the posterior can be orders of
            # magnitude tighter than the prior-derived initial scale
            step *= math.exp(rate - config.target_accept)
            step = min(max(step, 1e-5), 5.0)
            block_accepts = 0
        if it >= config.burn_in:
            k = it - config.burn_in
            kept[k] = np.exp(phi)
            kept_lp[k] = lp
    if accepted_total == 0:
        raise RuntimeError(
            "Metropolis chain accepted no proposals; adjust the proposal scale"
        )
    return Posterior(
        samples=kept,
        log_posts=kept_lp,
        acceptance_rate=accepted_kept / config.samples,
        prior=prior,
        step=step,
        names=problem.free_names,
    )


def kde(values: Sequence[float], grid: np.ndarray) -> np.ndarray:
    """Gaussian kernel density with bandwidth 1.06 * sd * m**(-1/5)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError(f"need at least 2 values, got {v.size}")
    sd = float(v.std(ddof=1))
    if sd == 0.0:
        raise ValueError("degenerate sample: zero variance")
    grid = np.asarray(grid, dtype=float)
    bw = 1.06 * sd * v.size ** (-0.2)
    u = (grid[None, :] - v[:, None]) / bw
    return np.exp(-0.5 * u * u).sum(axis=0) / (v.size * bw * math.sqrt(2.0 * math.pi))


def count_modes(density: np.ndarray) -> int:
    """Number of local maxima of a sampled density, merging flat plateaus.

    Values below 1e-12 of the peak are treated as exactly zero: summation
    roundoff in a far tail would otherwise register as extra modes.
    """
    density = np.asarray(density, dtype=float).copy()
    if density.size:
        density[density < 1e-12 * density.max()] = 0.0
    d = np.diff(density)
    signs = np.sign(d)
    signs = signs[signs != 0]
    if signs.size == 0:
        return 0
    modes = int(np.sum((signs[:-1] > 0) & (signs[1:] < 0)))
    if signs[0] < 0:
        modes += 1  # falling from the left edge
    if signs[-1] > 0:
        modes += 1  # rising into the right edge
    return modes
