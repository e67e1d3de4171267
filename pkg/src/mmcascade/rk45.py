"""Adaptive Dormand-Prince 5(4) integrator with quartic dense output.

The embedded pair advances with the fifth-order solution and controls the
step from the 5th/4th difference; each accepted step also stores the
coefficients of the standard quartic interpolant, so the solution can be
evaluated anywhere in [t0, T] at solver accuracy without re-integration.

Two front ends share the machinery: solve_scalar (plain-float arithmetic,
for the one-dimensional substrate equation that dominates likelihood work)
and solve (numpy vectors, for small systems such as covariance equations).
"""

from __future__ import annotations

import math
from fractions import Fraction as _F
from typing import Callable

import numpy as np

# Butcher tableau (Dormand & Prince), exact rationals evaluated to floats.
_C = [0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0]
_A = [
    [],
    [_F(1, 5)],
    [_F(3, 40), _F(9, 40)],
    [_F(44, 45), _F(-56, 15), _F(32, 9)],
    [_F(19372, 6561), _F(-25360, 2187), _F(64448, 6561), _F(-212, 729)],
    [_F(9017, 3168), _F(-355, 33), _F(46732, 5247), _F(49, 176), _F(-5103, 18656)],
    [_F(35, 384), 0, _F(500, 1113), _F(125, 192), _F(-2187, 6784), _F(11, 84)],
]
_B = [_F(35, 384), 0, _F(500, 1113), _F(125, 192), _F(-2187, 6784), _F(11, 84), 0]
# Error weights: 5th-order minus embedded 4th-order solution.
_E = [
    _F(-71, 57600),
    0,
    _F(71, 16695),
    _F(-71, 1920),
    _F(17253, 339200),
    _F(-22, 525),
    _F(1, 40),
]
# Quartic dense-output map: interpolant = y0 + h * (K^T P) . (theta..theta^4).
_P = [
    [1, _F(-8048581381, 2820520608), _F(8663915743, 2820520608), _F(-12715105075, 11282082432)],
    [0, 0, 0, 0],
    [0, _F(131558114200, 32700410799), _F(-68118460800, 10900136933), _F(87487479700, 32700410799)],
    [0, _F(-1754552775, 470086768), _F(14199869525, 1410260304), _F(-10690763975, 1880347072)],
    [0, _F(127303824393, 49829197408), _F(-318862633887, 49829197408), _F(701980252875, 199316789632)],
    [0, _F(-282668133, 205662961), _F(2019193451, 616988883), _F(-1453857185, 822651844)],
    [0, _F(40617522, 29380423), _F(-110615467, 29380423), _F(69997945, 29380423)],
]

A = [[float(v) for v in row] for row in _A]
B = [float(v) for v in _B]
E = [float(v) for v in _E]
C = list(_C)
P = [[float(v) for v in row] for row in _P]

_A_NP = np.zeros((7, 7))
for _i, _row in enumerate(A):
    _A_NP[_i, : len(_row)] = _row
_B_NP = np.array(B)
_E_NP = np.array(E)
_C_NP = np.array(C)
_P_NP = np.array(P)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ORDER_EXP = -1.0 / 5.0
_MAX_STEPS = 1_000_000


class SolverError(RuntimeError):
    """Raised when step-size control collapses or the step budget runs out."""


class DenseSolution:
    """Piecewise-quartic interpolant collected from accepted solver steps."""

    def __init__(self, edges: np.ndarray, y_left: np.ndarray, q: np.ndarray):
        # edges: (m+1,) breakpoints; y_left: (m, d); q: (m, d, 4)
        self.edges = edges
        self.y_left = y_left
        self.q = q
        self.t0 = float(edges[0])
        self.t1 = float(edges[-1])
        self._h = np.diff(edges)

    @property
    def dim(self) -> int:
        return self.y_left.shape[1]

    def _locate(self, t: np.ndarray) -> np.ndarray:
        slack = 1e-9 * max(self.t1 - self.t0, 1.0)
        if np.any(t < self.t0 - slack) or np.any(t > self.t1 + slack):
            raise ValueError(
                f"evaluation time outside solved interval [{self.t0}, {self.t1}]"
            )
        idx = np.searchsorted(self.edges, t, side="right") - 1
        return np.clip(idx, 0, len(self._h) - 1)

    def __call__(self, t) -> np.ndarray:
        """Evaluate at scalar or array t; returns (d,) or (len(t), d)."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        flat = np.atleast_1d(t_arr)
        idx = self._locate(flat)
        h = self._h[idx]
        theta = (flat - self.edges[idx]) / h
        qs = self.q[idx]  # (m, d, 4)
        acc = qs[:, :, 3]
        for j in (2, 1, 0):
            acc = acc * theta[:, None] + qs[:, :, j]
        vals = self.y_left[idx] + (h * theta)[:, None] * acc
        return vals[0] if scalar else vals

    def eval1(self, t: float) -> float:
        """Fast scalar evaluation for one-dimensional solutions."""
        edges = self.edges
        if t <= edges[0]:
            idx = 0
        else:
            idx = int(np.searchsorted(edges, t, side="right")) - 1
            if idx >= len(self._h):
                idx = len(self._h) - 1
        h = self._h[idx]
        theta = (t - edges[idx]) / h
        q0, q1, q2, q3 = self.q[idx, 0]
        return float(self.y_left[idx, 0]) + h * theta * (q0 + theta * (q1 + theta * (q2 + theta * q3)))


def _initial_step(f, t0, y0, f0, t_bound, rtol, atol):
    """Hairer-style starting step guess from local derivative magnitudes."""
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, abs(t_bound - t0))
    y1 = y0 + h0 * f0
    f1 = np.asarray(f(t0 + h0, y1), dtype=float)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, abs(t_bound - t0))


def solve(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_bound: float,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = math.inf,
) -> DenseSolution:
    """Integrate y' = f(t, y) over [t0, t_bound] and return the dense solution."""
    y = np.asarray(y0, dtype=float).copy()
    if y.ndim != 1:
        raise ValueError("y0 must be one-dimensional")
    if not t_bound > t0:
        raise ValueError("t_bound must exceed t0")
    t = float(t0)
    k = np.empty((7, y.size))
    k[0] = np.asarray(f(t, y), dtype=float)
    h = min(_initial_step(f, t, y, k[0], t_bound, rtol, atol), max_step)

    edges = [t]
    y_lefts = []
    qs = []
    for _ in range(_MAX_STEPS):
        h = min(h, t_bound - t)
        if h <= 1e-14 * max(abs(t), 1.0):
            raise SolverError(f"step size underflow at t={t}")
        for s in range(1, 7):
            ys = y + h * (k[:s].T @ _A_NP[s, :s])
            k[s] = np.asarray(f(t + _C_NP[s] * h, ys), dtype=float)
        y_new = y + h * (k.T @ _B_NP)
        err = h * (k.T @ _E_NP)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if err_norm <= 1.0:
            y_lefts.append(y.copy())
            qs.append(k.T @ _P_NP)
            y = y_new
            t = t + h
            edges.append(t)
            k[0] = k[6]  # FSAL
            if t >= t_bound - 1e-14 * max(abs(t_bound), 1.0):
                break
            factor = _MAX_FACTOR if err_norm == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err_norm**_ORDER_EXP
            )
            h = min(h * max(factor, _MIN_FACTOR), max_step)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm**_ORDER_EXP)
    else:
        raise SolverError(f"exceeded {_MAX_STEPS} steps at t={t}")

    return DenseSolution(
        np.asarray(edges), np.asarray(y_lefts), np.asarray(qs)
    )


def solve_scalar(
    f: Callable[[float, float], float],
    t0: float,
    y0: float,
    t_bound: float,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = math.inf,
    floor: float | None = None,
) -> DenseSolution:
    """Scalar specialization of solve(); identical control flow on plain floats.

    ``floor`` freezes the solution once it decays to that value: integration
    stops and the dense output continues as a constant.  Meant for equations
    whose solution decays toward an absorbing value, where resolving further
    decay is pure stiffness with no informational content.
    """
    if not t_bound > t0:
        raise ValueError("t_bound must exceed t0")
    t = float(t0)
    y = float(y0)
    k1 = f(t, y)

    # starting step, scalar form of _initial_step
    scale0 = atol + rtol * abs(y)
    d0 = abs(y) / scale0
    d1 = abs(k1) / scale0
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, t_bound - t0)
    d2 = abs(f(t + h, y + h * k1) - k1) / scale0 / h
    if d1 <= 1e-15 and d2 <= 1e-15:
        h = max(1e-6, h * 1e-3)
    else:
        h = min(100 * h, (0.01 / max(d1, d2)) ** 0.2)
    h = min(h, t_bound - t0, max_step)

    a21, = A[1]
    a31, a32 = A[2]
    a41, a42, a43 = A[3]
    a51, a52, a53, a54 = A[4]
    a61, a62, a63, a64, a65 = A[5]
    b1, _, b3, b4, b5, b6, _ = B
    e1, _, e3, e4, e5, e6, e7 = E
    c2, c3, c4, c5 = C[1], C[2], C[3], C[4]
    p = P

    edges = [t]
    y_lefts = []
    qs = []
    for _ in range(_MAX_STEPS):
        if h > t_bound - t:
            h = t_bound - t
        if h <= 1e-14 * max(abs(t), 1.0):
            raise SolverError(f"step size underflow at t={t}")
        k2 = f(t + c2 * h, y + h * (a21 * k1))
        k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2))
        k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3))
        k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4))
        k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5))
        y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6)
        k7 = f(t + h, y_new)
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)
        scale = atol + rtol * max(abs(y), abs(y_new))
        err_norm = abs(err) / scale
        if err_norm <= 1.0:
            y_lefts.append(y)
            qs.append(
                [
                    k1 * p[0][j]
                    + k3 * p[2][j]
                    + k4 * p[3][j]
                    + k5 * p[4][j]
                    + k6 * p[5][j]
                    + k7 * p[6][j]
                    for j in range(4)
                ]
            )
            y = y_new
            t = t + h
            edges.append(t)
            k1 = k7  # FSAL
            if t >= t_bound - 1e-14 * max(abs(t_bound), 1.0):
                break
            if floor is not None and y <= floor:
                edges.append(t_bound)
                y_lefts.append(y)
                qs.append([0.0, 0.0, 0.0, 0.0])
                break
            factor = _MAX_FACTOR if err_norm == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err_norm**_ORDER_EXP
            )
            h = min(h * max(factor, _MIN_FACTOR), max_step)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm**_ORDER_EXP)
    else:
        raise SolverError(f"exceeded {_MAX_STEPS} steps at t={t}")

    return DenseSolution(
        np.asarray(edges),
        np.asarray(y_lefts)[:, None],
        np.asarray(qs)[:, None, :],
    )
