"""Linear corrector for the frozen-substrate complex block.

With the substrate frozen at z_S the complex block evolves by five kinds of
jumps (binding, unbinding, forward/backward chain steps, release).  The
centered slow propensities (unbinding - binding, release) have zero mean
under the block's stationary law, so the equations

    B F1 = -(centered unbinding - centered binding)
    B F2 = -(centered release)

admit solutions; because the right-hand sides are affine in the occupancy
vector, each F admits a linear representation F(z) = sum_i b_i z_i.  The
coefficients solve an r x r linear system obtained by matching the z_i
coefficients of B applied to the linear ansatz.  Every solve is certified
by evaluating B F + h exhaustively over the whole state space; the
certificate is the ground truth for the coefficient map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .model import CascadeParams, complex_states
from .qssa import averaged_propensities, stationary_weights

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class FastGenerator:
    """Jump structure of the complex block at a frozen substrate level."""

    params: CascadeParams
    z_s: float

    def __post_init__(self) -> None:
        if self.z_s < 0:
            raise ValueError(f"z_s must be nonnegative, got {self.z_s}")


def transitions(
    gen: FastGenerator, z: tuple[int, ...]
) -> list[tuple[float, tuple[int, ...]]]:
    """(rate, target-state) pairs out of z; zero-rate moves are omitted."""
    params = gen.params
    r = params.r
    if len(z) != r or any(c < 0 for c in z) or sum(z) > params.J:
        raise ValueError(f"state {z} outside the complex block for J={params.J}")
    kf, kb, kp = params.kappa_fwd, params.kappa_bwd, params.kappa_p
    free = params.J - sum(z)
    out: list[tuple[float, tuple[int, ...]]] = []

    def bump(rate: float, i_dn: int | None, i_up: int | None) -> None:
        if rate <= 0.0:
            return
        t = list(z)
        if i_dn is not None:
            t[i_dn] -= 1
        if i_up is not None:
            t[i_up] += 1
        out.append((rate, tuple(t)))

    bump(kf[0] * gen.z_s * free, None, 0)  # binding
    bump(kb[0] * z[0], 0, None)  # unbinding
    for i in range(2, r + 1):
        bump(kf[i - 1] * z[i - 2], i - 2, i - 1)  # forward chain step
        bump(kb[i - 1] * z[i - 1], i - 1, i - 2)  # backward chain step
    bump(kp * z[r - 1], r - 1, None)  # release
    return out


def apply_generator(
    gen: FastGenerator,
    f: Mapping[tuple[int, ...], float] | Callable[[tuple[int, ...]], float],
    z: tuple[int, ...],
) -> float:
    """(B f)(z): rate-weighted sum of f(neighbor) - f(z)."""
    if callable(f):
        get = f
    else:
        def get(state: tuple[int, ...]) -> float:
            try:
                return f[state]
            except KeyError:
                raise ValueError(f"f undefined on reachable state {state}") from None

    fz = get(tuple(z))
    return sum(rate * (get(target) - fz) for rate, target in transitions(gen, z))


def rate_matrix(gen: FastGenerator) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Dense rate matrix Q of the block chain (rows sum to zero)."""
    states = complex_states(gen.params.r, gen.params.J)
    index = {z: i for i, z in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for z, i in index.items():
        for rate, target in transitions(gen, z):
            j = index[target]
            Q[i, j] += rate
            Q[i, i] -= rate
    return states, Q


@dataclass(frozen=True)
class PoissonSolution:
    """Linear coefficients of (F1, F2) at a frozen z_S with residual certificate."""

    b1: tuple[float, ...]
    b2: tuple[float, ...]
    z_s: float
    residual_max: float
    residual_bound: float


def _coefficient_matrix(params: CascadeParams, z_s: float) -> np.ndarray:
    """Matrix M with (B sum_j b_j z_j) = const + sum_i (M b)_i z_i."""
    r = params.r
    kf, kb, kp = params.kappa_fwd, params.kappa_bwd, params.kappa_p
    bind = kf[0] * z_s
    M = np.zeros((r, r))
    if r == 1:
        M[0, 0] = -(bind + kb[0] + kp)
        return M
    M[0, 0] = -(bind + kb[0] + kf[1])
    M[0, 1] = kf[1]
    for j in range(2, r):
        row = j - 1
        M[row, 0] += -bind
        M[row, j - 2] += kb[j - 1]
        M[row, j - 1] += -(kb[j - 1] + kf[j])
        M[row, j] += kf[j]
    M[r - 1, 0] += -bind
    M[r - 1, r - 2] += kb[r - 1]
    M[r - 1, r - 1] += -(kb[r - 1] + kp)
    return M


def centered_rhs(
    params: CascadeParams, z_s: float
) -> tuple[Callable[[tuple[int, ...]], float], Callable[[tuple[int, ...]], float]]:
    """The two centered right-hand sides as functions of the block state."""
    avg = averaged_propensities(params, z_s)
    kf, kb, kp = params.kappa_fwd, params.kappa_bwd, params.kappa_p
    J = params.J
    bind = kf[0] * z_s
    mean1 = avg.unbinding - avg.binding
    mean2 = avg.release

    def h1(z: tuple[int, ...]) -> float:
        return (kb[0] * z[0] - bind * (J - sum(z))) - mean1

    def h2(z: tuple[int, ...]) -> float:
        return kp * z[params.r - 1] - mean2

    return h1, h2


def solve_poisson(
    params: CascadeParams, z_s: float, tol: float = RESIDUAL_TOL
) -> PoissonSolution:
    """Solve both corrector equations and certify the result exhaustively.

    The z_i coefficients of the right-hand sides are, for F1,
    (kappa_bwd[0] + kappa_fwd[0] z_S, kappa_fwd[0] z_S, ...) and for F2 a
    lone kappa_p in slot r.  The certificate evaluates B F + h on every
    state of the block; failure indicates a coefficient-map bug and is a
    hard error, not a warning.
    """
    if not z_s > 0:
        raise ValueError(f"corrector requires z_s > 0, got {z_s}")
    r = params.r
    kf, kb, kp = params.kappa_fwd, params.kappa_bwd, params.kappa_p
    M = _coefficient_matrix(params, z_s)

    c1 = np.full(r, kf[0] * z_s)
    c1[0] += kb[0]
    c2 = np.zeros(r)
    c2[r - 1] = kp
    try:
        b1 = np.linalg.solve(M, -c1)
        b2 = np.linalg.solve(M, -c2)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"corrector system singular at z_s={z_s}: {exc}") from exc

    gen = FastGenerator(params=params, z_s=z_s)
    h1, h2 = centered_rhs(params, z_s)
    states = complex_states(r, params.J)

    def lin(b: np.ndarray) -> Callable[[tuple[int, ...]], float]:
        return lambda z: float(sum(bi * zi for bi, zi in zip(b, z)))

    f1, f2 = lin(b1), lin(b2)
    res1 = max(abs(apply_generator(gen, f1, z) + h1(z)) for z in states)
    res2 = max(abs(apply_generator(gen, f2, z) + h2(z)) for z in states)
    hmax1 = max(abs(h1(z)) for z in states)
    hmax2 = max(abs(h2(z)) for z in states)
    bound = tol * max(1.0, hmax1, hmax2)
    residual_max = max(res1, res2)
    if res1 > tol * max(1.0, hmax1) or res2 > tol * max(1.0, hmax2):
        raise RuntimeError(
            f"corrector residual {residual_max:.3e} exceeds {bound:.3e} "
            f"at z_s={z_s} (coefficient-map inconsistency)"
        )
    return PoissonSolution(
        b1=tuple(float(v) for v in b1),
        b2=tuple(float(v) for v in b2),
        z_s=float(z_s),
        residual_max=float(residual_max),
        residual_bound=float(bound),
    )
