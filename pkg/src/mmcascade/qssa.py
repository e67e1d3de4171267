"""Reduced-order model of the cascade under the quasi-steady-state scaling.

With the substrate level frozen at z_S, the complex block is an ergodic
finite-state chain whose stationary law is multinomial on the occupancy
vectors: J independent enzyme slots, each empty with probability
1 - sum(p_i) or holding complex i with probability p_i(z_S).  The cell
probabilities come from a backward recursion in the auxiliaries a_i; only
a_1 depends on z_S, which yields the rational form

    p_1(z_S) = z_S / ((1 + c0) z_S + A1),      p_i = w_i p_1,

with z_S-independent constants w_i = prod_{j=2..i} a_j^{-1}, c0 = sum_{i>=2} w_i,
A1 = (kappa_bwd[0] + kappa_p w_r) / kappa_fwd[0].  The rational form extends
continuously to z_S = 0 (all p_i = 0) and differentiates in closed form.

Averaging the jump propensities under this law gives the effective
substrate-to-product conversion rate h(y) = kappa_p J p_r(y) and the reduced
two-species ODE dZ_S/dt = -h(Z_S), dZ_P/dt = +h(Z_S), whose solution is the
large-system limit of the scaled substrate/product trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rk45
from .model import CascadeParams, complex_states

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10


@dataclass(frozen=True)
class ReductionConstants:
    """z_S-independent pieces of the stationary-cell recursion.

    a_tail[i] = a_{i+2} for i = 0..r-2 (the auxiliaries that do not depend
    on z_S); w[i-1] = prod_{j=2..i} a_j^{-1} with w[0] = 1; c0 = sum_{i>=2} w_{i-1};
    A1 as in the module docstring.
    """

    a_tail: tuple[float, ...]
    w: tuple[float, ...]
    c0: float
    A1: float


def reduction_constants(params: CascadeParams) -> ReductionConstants:
    """Run the backward a_i recursion and collect the z_S-free constants."""
    r = params.r
    kf, kb, kp = params.kappa_fwd, params.kappa_bwd, params.kappa_p
    a = [0.0] * (r + 1)  # a[i] holds a_i; a[0], a[1] unused here
    if r >= 2:
        a[r] = (kb[r - 1] + kp) / kf[r - 1]
        if a[r] <= 0.0:
            raise ValueError(f"stationary recursion failed: a_{r} = {a[r]} <= 0")
        for i in range(r - 1, 1, -1):
            a[i] = (kb[i - 1] + kf[i]) / kf[i - 1] - kb[i] / (a[i + 1] * kf[i - 1])
            if a[i] <= 0.0:
                raise ValueError(f"stationary recursion failed: a_{i} = {a[i]} <= 0")
    w = [1.0]
    for i in range(2, r + 1):
        w.append(w[-1] / a[i])
    c0 = sum(w[1:])
    A1 = (kb[0] + kp * w[r - 1]) / kf[0]
    return ReductionConstants(a_tail=tuple(a[2:]), w=tuple(w), c0=c0, A1=A1)


@dataclass(frozen=True)
class StationaryWeights:
    """Auxiliaries a_i and multinomial cell probabilities p_i at a frozen z_S."""

    a: tuple[float, ...]
    p: tuple[float, ...]
    z_s: float


def stationary_weights(params: CascadeParams, z_s: float) -> StationaryWeights:
    """Cell probabilities p_i(z_S) of the frozen-substrate stationary law.

    Computed through the rational form so that z_S = 0 maps to p = 0 without
    dividing by zero; a_1 is reported as +inf there.
    """
    if z_s < 0:
        raise ValueError(f"z_s must be nonnegative, got {z_s}")
    consts = reduction_constants(params)
    kf, kb, kp = params.kappa_fwd, params.kappa_bwd, params.kappa_p
    w_r = consts.w[-1]
    if z_s > 0:
        a1 = kb[0] / (kf[0] * z_s) + kp * w_r / (kf[0] * z_s)
    else:
        a1 = math.inf
    p1 = z_s / ((1.0 + consts.c0) * z_s + consts.A1)
    p = tuple(p1 * wi for wi in consts.w)
    return StationaryWeights(a=(a1,) + consts.a_tail, p=p, z_s=float(z_s))


def cell_derivatives(params: CascadeParams, z_s: float) -> np.ndarray:
    """Analytic derivatives dp_i/dz_S from the rational form."""
    if z_s < 0:
        raise ValueError(f"z_s must be nonnegative, got {z_s}")
    consts = reduction_constants(params)
    denom = (1.0 + consts.c0) * z_s + consts.A1
    dp1 = consts.A1 / (denom * denom)
    return dp1 * np.asarray(consts.w)


def stationary_pmf(params: CascadeParams, z_s: float) -> dict[tuple[int, ...], float]:
    """Multinomial stationary law of the complex block on {sum(z) <= J}."""
    weights = stationary_weights(params, z_s)
    J = params.J
    p = weights.p
    p0 = 1.0 - sum(p)
    pmf: dict[tuple[int, ...], float] = {}
    fact = math.factorial
    for z in complex_states(params.r, J):
        s = sum(z)
        coef = fact(J) // (fact(J - s) * math.prod(fact(c) for c in z))
        val = coef * p0 ** (J - s)
        for pi, zi in zip(p, z):
            val *= pi**zi
        pmf[z] = val
    return pmf


@dataclass(frozen=True)
class AveragedPropensities:
    """Stationary averages of the scaled propensities at a frozen z_S.

    forward[i] and backward[i] are the averages for reactions +(i+2) and
    -(i+2); they vanish only when r = 1.
    """

    binding: float
    unbinding: float
    release: float
    forward: tuple[float, ...]
    backward: tuple[float, ...]

    def as_list(self, params: CascadeParams) -> list[tuple[object, float]]:
        """(reaction id, average) pairs in the model's fixed reaction order."""
        pairs: list[tuple[object, float]] = [(1, self.binding), (-1, self.unbinding)]
        for i, (fw, bw) in enumerate(zip(self.forward, self.backward)):
            pairs.extend(((i + 2, fw), (-(i + 2), bw)))
        pairs.append(("P", self.release))
        return pairs


def averaged_propensities(params: CascadeParams, z_s: float) -> AveragedPropensities:
    """Closed-form stationary averages; binding - unbinding = release exactly."""
    weights = stationary_weights(params, z_s)
    p = weights.p
    J = params.J
    kf, kb, kp = params.kappa_fwd, params.kappa_bwd, params.kappa_p
    binding = kf[0] * J * z_s * (1.0 - sum(p))
    unbinding = kb[0] * J * p[0]
    release = kp * J * p[-1]
    forward = tuple(kf[i - 1] * J * p[i - 2] for i in range(2, params.r + 1))
    backward = tuple(kb[i - 1] * J * p[i - 1] for i in range(2, params.r + 1))
    return AveragedPropensities(
        binding=binding,
        unbinding=unbinding,
        release=release,
        forward=forward,
        backward=backward,
    )


def conversion_rate_constants(params: CascadeParams) -> tuple[float, float, float]:
    """(num, slope, offset) with h(y) = num*y / (slope*y + offset).

    Single rational form of the effective conversion rate, valid for every
    cascade depth: num = kappa_p J w_r, slope = 1 + c0, offset = A1.
    """
    consts = reduction_constants(params)
    return (params.kappa_p * params.J * consts.w[-1], 1.0 + consts.c0, consts.A1)


def h_theta(params: CascadeParams, y: float) -> float:
    """Effective conversion rate h(y) = binding avg - unbinding avg at z_S=y.

    The flux identity h(y) = kappa_p J p_r(y) is asserted as a consistency
    check of the stationary recursion.
    """
    avg = averaged_propensities(params, y)
    h = avg.binding - avg.unbinding
    assert abs(h - avg.release) <= 1e-9 * (1.0 + abs(avg.release)), (
        f"flux identity violated: {h} vs {avg.release}"
    )
    return h


def g_theta(params: CascadeParams, y: float) -> float:
    """Per-unit-substrate conversion hazard: h(y)/y for y > 0, zero at y = 0."""
    if y == 0:
        return 0.0
    return h_theta(params, y) / y


@dataclass(frozen=True)
class ReducedPath:
    """Dense-output solution of the reduced (Z_S, Z_P) system on [0, T].

    Only the substrate component is integrated; the product component is
    recovered from exact flux conservation Z_S + Z_P = const, which the
    two-species system satisfies identically.
    """

    sol: rk45.DenseSolution
    z_s0: float
    z_p0: float
    T: float
    params: CascadeParams | None = None

    def z_s(self, t):
        vals = self.sol(t)
        return vals[..., 0] if np.asarray(t).ndim else float(vals[0])

    def z_p(self, t):
        total = self.z_s0 + self.z_p0
        z = self.z_s(t)
        return total - z

    def z_v(self, t):
        """Stacked (z_S, z_P) values; shape (..., 2)."""
        z = np.atleast_1d(np.asarray(self.z_s(t), dtype=float))
        out = np.stack([z, (self.z_s0 + self.z_p0) - z], axis=-1)
        return out[0] if np.asarray(t).ndim == 0 else out


def solve_survival(
    h,
    z_s0: float,
    T: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    floor: float | None = None,
) -> rk45.DenseSolution:
    """Integrate dZ_S/dt = -h(Z_S) with a scalar-specialized solver.

    ``floor`` optionally freezes the decay once Z_S falls to that value;
    see ``rk45.solve_scalar``.
    """

    def rhs(t: float, y: float) -> float:
        return -h(y)

    return rk45.solve_scalar(rhs, 0.0, z_s0, T, rtol=rtol, atol=atol, floor=floor)


def survival_from_constants(
    num: float,
    slope: float,
    offset: float,
    T: float,
    z_s0: float = 1.0,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    floor: float | None = None,
) -> rk45.DenseSolution:
    """Survival solve for h(y) = num*y/(slope*y + offset), single flat closure.

    Equivalent to solve_survival with the rational h; kept separate because
    likelihood optimization calls this in a tight loop.
    """

    def rhs(t: float, y: float) -> float:
        return -num * y / (slope * y + offset)

    return rk45.solve_scalar(rhs, 0.0, z_s0, T, rtol=rtol, atol=atol, floor=floor)


def solve_reduced_ode(
    params: CascadeParams,
    z0: tuple[float, float],
    T: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> ReducedPath:
    """Solve the reduced system from z0 = (z_S(0), z_P(0)) up to time T."""
    z_s0, z_p0 = float(z0[0]), float(z0[1])
    if z_s0 < 0 or z_p0 < 0:
        raise ValueError(f"initial condition must be nonnegative, got {z0}")
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    num, slope, offset = conversion_rate_constants(params)
    sol = survival_from_constants(num, slope, offset, T, z_s0=z_s0, rtol=rtol, atol=atol)
    return ReducedPath(sol=sol, z_s0=z_s0, z_p0=z_p0, T=float(T), params=params)


def tau_distribution(path: ReducedPath, t: float) -> float:
    """Mass of the limiting product-formation-time law on [0, t]: 1 - Z_S(t)."""
    if path.z_s0 != 1.0:
        raise ValueError(
            f"survival interpretation requires Z_S(0) = 1, got {path.z_s0}"
        )
    return 1.0 - path.z_s(float(t))
