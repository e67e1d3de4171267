"""Gaussian fluctuation layer around the reduced limit.

The sqrt(n)-scaled deviation U = (U_S, U_P) of the scaled trajectories from
the reduced ODE converges to a linear SDE

    dU = A(Z_S(t)) U dt + D(Z_S(t))^{1/2} dW,

where the drift is the Jacobian of the reduced vector field and the
diffusion rate D collects the jump statistics of the corrector-adjusted
slow variables: each reaction contributes the outer product of its
effective jump vector (slow stoichiometry plus corrector increment),
weighted by its stationary average.  Because the corrector is linear in the
complex occupancies, the jump vectors are state-independent and D has a
closed form; a brute-force state-space sum is kept alongside as a test
oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rk45
from .model import CascadeParams, complex_states
from .poisson import PoissonSolution, solve_poisson
from .qssa import (
    ReducedPath,
    averaged_propensities,
    cell_derivatives,
    stationary_pmf,
    stationary_weights,
)
from .util import mix_seed

DEFAULT_EM_STEPS = 4096
_PSD_SLACK = -1e-12


def drift_matrix(params: CascadeParams, z_s: float) -> np.ndarray:
    """Jacobian of the reduced vector field; only the U_S column is active."""
    w = stationary_weights(params, z_s)
    dp = cell_derivatives(params, z_s)
    kf1, kb1, kp, J = params.kappa_fwd[0], params.kappa_bwd[0], params.kappa_p, params.J
    a11 = kb1 * J * dp[0] - kf1 * J * (1.0 - sum(w.p)) + kf1 * J * z_s * dp.sum()
    a21 = kp * J * dp[-1]
    return np.array([[a11, 0.0], [a21, 0.0]])


def jump_vectors(params: CascadeParams, corrector: PoissonSolution) -> list[np.ndarray]:
    """Effective (U_S, U_P) jump vectors, one per reaction in model order."""
    b1 = corrector.b1
    b2 = corrector.b2
    r = params.r
    vecs = [np.array([b1[0] - 1.0, b2[0]])]  # binding
    vecs.append(-vecs[0])  # unbinding
    for i in range(2, r + 1):
        v = np.array([b1[i - 1] - b1[i - 2], b2[i - 1] - b2[i - 2]])
        vecs.extend((v, -v))
    vecs.append(np.array([-b1[r - 1], 1.0 - b2[r - 1]]))  # release
    return vecs


def _check_corrector(params: CascadeParams, z_s: float, corrector: PoissonSolution) -> None:
    if corrector.z_s != z_s:
        raise ValueError(
            f"corrector solved at z_s={corrector.z_s}, requested {z_s}"
        )
    if not corrector.residual_max <= corrector.residual_bound:
        raise ValueError("corrector is not residual-certified")


def diffusion_rate(
    params: CascadeParams, z_s: float, corrector: PoissonSolution
) -> np.ndarray:
    """Closed-form diffusion rate sum_k v_k v_k^T lambda_k^avg(z_S)."""
    _check_corrector(params, z_s, corrector)
    avg = averaged_propensities(params, z_s)
    rates = [avg.binding, avg.unbinding]
    for fw, bw in zip(avg.forward, avg.backward):
        rates.extend((fw, bw))
    rates.append(avg.release)
    D = np.zeros((2, 2))
    for v, lam in zip(jump_vectors(params, corrector), rates):
        D += lam * np.outer(v, v)
    return D


def diffusion_rate_bruteforce(
    params: CascadeParams, z_s: float, corrector: PoissonSolution
) -> np.ndarray:
    """Oracle path: explicit state-space sum of the jump-statistics integrand."""
    _check_corrector(params, z_s, corrector)
    pmf = stationary_pmf(params, z_s)
    b1, b2 = corrector.b1, corrector.b2
    r = params.r
    kf, kb, kp, J = params.kappa_fwd, params.kappa_bwd, params.kappa_p, params.J

    def corr(z: tuple[int, ...]) -> np.ndarray:
        return np.array(
            [sum(c * zi for c, zi in zip(b1, z)), sum(c * zi for c, zi in zip(b2, z))]
        )

    D = np.zeros((2, 2))
    for z, pi in pmf.items():
        if pi == 0.0:
            continue
        moves: list[tuple[float, tuple[int, ...], np.ndarray]] = []
        free = J - sum(z)
        up = list(z)
        up[0] += 1
        moves.append((kf[0] * z_s * free, tuple(up), np.array([-1.0, 0.0])))
        dn = list(z)
        dn[0] -= 1
        moves.append((kb[0] * z[0], tuple(dn), np.array([1.0, 0.0])))
        for i in range(2, r + 1):
            f = list(z)
            f[i - 2] -= 1
            f[i - 1] += 1
            moves.append((kf[i - 1] * z[i - 2], tuple(f), np.zeros(2)))
            g = list(z)
            g[i - 2] += 1
            g[i - 1] -= 1
            moves.append((kb[i - 1] * z[i - 1], tuple(g), np.zeros(2)))
        rel = list(z)
        rel[r - 1] -= 1
        moves.append((kp * z[r - 1], tuple(rel), np.array([0.0, 1.0])))
        fz = corr(z)
        for rate, target, slow in moves:
            if rate <= 0.0:
                continue
            v = slow + corr(target) - fz
            D += pi * rate * np.outer(v, v)
    return D


@dataclass(frozen=True)
class FluctuationModel:
    """Drift/diffusion functions of the limit SDE along a reduced path."""

    path: ReducedPath

    def __post_init__(self) -> None:
        if self.path.params is None:
            raise ValueError("reduced path must carry cascade parameters")

    @property
    def params(self) -> CascadeParams:
        assert self.path.params is not None
        return self.path.params

    def drift(self, t: float) -> np.ndarray:
        return drift_matrix(self.params, self.path.z_s(float(t)))

    def diffusion(self, t: float) -> np.ndarray:
        z_s = self.path.z_s(float(t))
        return diffusion_rate(self.params, z_s, solve_poisson(self.params, z_s))


def sqrt_psd_2x2(M: np.ndarray) -> np.ndarray:
    """Closed-form square root of a symmetric 2x2 PSD matrix.

    Eigenvalues within -1e-12 of zero are treated as roundoff and clamped;
    anything more negative is rejected.
    """
    a, b, c = float(M[0, 0]), float(0.5 * (M[0, 1] + M[1, 0])), float(M[1, 1])
    tr = a + c
    det = a * c - b * b
    disc = math.sqrt(max(tr * tr - 4.0 * det, 0.0))
    lam_min = 0.5 * (tr - disc)
    if lam_min < _PSD_SLACK * max(1.0, abs(tr)):
        raise ValueError(f"matrix is not PSD: min eigenvalue {lam_min}")
    s = math.sqrt(max(det, 0.0))
    t = math.sqrt(max(tr + 2.0 * s, 0.0))
    if t == 0.0:
        return np.zeros((2, 2))
    return (np.array([[a, b], [b, c]]) + s * np.eye(2)) / t


@dataclass(frozen=True)
class CovariancePath:
    """Dense-output covariance Sigma(t) of the limit SDE."""

    sol: rk45.DenseSolution

    def __call__(self, t: float) -> np.ndarray:
        s11, s12, s22 = np.asarray(self.sol(float(t)), dtype=float)
        return np.array([[s11, s12], [s12, s22]])


def solve_covariance(
    model: FluctuationModel,
    sigma0: np.ndarray,
    T: float,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> CovariancePath:
    """Integrate dSigma/dt = A Sigma + Sigma A^T + D along the reduced path."""
    sigma0 = np.asarray(sigma0, dtype=float)
    sqrt_psd_2x2(sigma0)  # PSD validation
    y0 = np.array([sigma0[0, 0], sigma0[0, 1], sigma0[1, 1]])

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        A = model.drift(t)
        D = model.diffusion(t)
        a, c = A[0, 0], A[1, 0]
        s11, s12, _ = y
        return np.array(
            [
                2.0 * a * s11 + D[0, 0],
                c * s11 + a * s12 + D[0, 1],
                2.0 * c * s12 + D[1, 1],
            ]
        )

    return CovariancePath(sol=rk45.solve(rhs, 0.0, y0, T, rtol=rtol, atol=atol))


def _em_coefficients(model: FluctuationModel, T: float, steps: int):
    """Drift and root-diffusion tabulated on the Euler grid."""
    ts = np.linspace(0.0, T, steps + 1)[:-1]
    As = [model.drift(t) for t in ts]
    Bs = [sqrt_psd_2x2(model.diffusion(t)) for t in ts]
    return ts, As, Bs


def simulate_fluctuation(
    model: FluctuationModel,
    u0: np.ndarray,
    T: float,
    dt: float | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """One Euler-Maruyama path of the limit SDE; returns (times, values)."""
    if dt is None:
        dt = T / DEFAULT_EM_STEPS
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    _, As, Bs = _em_coefficients(model, T, steps)
    rng = np.random.default_rng(seed)
    u = np.asarray(u0, dtype=float).copy()
    out = np.empty((steps + 1, 2))
    out[0] = u
    sq = math.sqrt(dt)
    for k in range(steps):
        xi = rng.standard_normal(2)
        u = u + As[k] @ u * dt + sq * (Bs[k] @ xi)
        out[k + 1] = u
    return np.linspace(0.0, T, steps + 1), out


def simulate_fluctuation_batch(
    model: FluctuationModel,
    u0: np.ndarray,
    T: float,
    reps: int,
    dt: float | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Terminal values U(T) of many Euler-Maruyama replicates; shape (reps, 2)."""
    if dt is None:
        dt = T / DEFAULT_EM_STEPS
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    _, As, Bs = _em_coefficients(model, T, steps)
    rng = np.random.default_rng(mix_seed(seed, 0))
    u = np.tile(np.asarray(u0, dtype=float), (reps, 1))
    sq = math.sqrt(dt)
    for k in range(steps):
        xi = rng.standard_normal((reps, 2))
        u = u + (u @ As[k].T) * dt + sq * (xi @ Bs[k].T)
    return u


def empirical_fluctuation(batch, path: ReducedPath) -> np.ndarray:
    """Per-replicate U^(n)(T) = sqrt(n) (Z_V^(n)(T) - Z_V(T)) from an SSA batch."""
    if path.params is not None and batch.params != path.params:
        raise ValueError("batch and reduced path were built with different params")
    n = batch.regime.n
    z_s0 = batch.x0.x_s / n
    z_p0 = batch.x0.x_p / n
    if not (
        math.isclose(z_s0, path.z_s0, rel_tol=0, abs_tol=1e-12)
        and math.isclose(z_p0, path.z_p0, rel_tol=0, abs_tol=1e-12)
    ):
        raise ValueError(
            f"batch initial ({z_s0}, {z_p0}) does not match path ({path.z_s0}, {path.z_p0})"
        )
    t_end = batch.grid[-1]
    if t_end > path.T + 1e-12:
        raise ValueError(f"batch horizon {t_end} exceeds path horizon {path.T}")
    z_v = np.stack([batch.z_s[:, -1], batch.z_p[:, -1]], axis=1)
    limit = np.array([path.z_s(t_end), path.z_p(t_end)])
    return math.sqrt(n) * (z_v - limit)
