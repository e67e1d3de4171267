"""Domain types and mass-action propensities for multistage Michaelis-Menten cascades.

The reaction network couples one substrate pool S, a free-enzyme pool E, a
chain of r intermediate complexes C_1..C_r, and a product pool P:

    S + E <-> C_1 <-> C_2 <-> ... <-> C_r -> P + E

Reaction ids are the signed integers +1..+r (binding, then chain steps
C_{i-1} -> C_i), -1..-r (the reverse steps), plus the distinguished id "P"
for the release step C_r -> P + E.  Two quantities are conserved along every
trajectory: the enzyme mass J = x_E + sum(x_C) and the substrate mass
x_S + x_P + sum(x_C).

System-size scaling: substrate and product are density-scaled (z_S = x_S/n,
z_P = x_P/n) while enzyme and complex counts stay order one (z_C = x_C).
Rate constants scale as kappa_k^(n) = n**beta_k * kappa_k with beta = 0 for
the binding reaction (+1) and beta = 1 for every other reaction; time is not
rescaled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

ReactionId = Union[int, str]

#: Release reaction id (C_r -> P + E).
RELEASE = "P"


@dataclass(frozen=True)
class CascadeParams:
    """Rate constants and conservation constant of an r-stage cascade.

    kappa_fwd[i-1] is the forward constant of reaction +i, kappa_bwd[i-1]
    the backward constant of reaction -i, kappa_p the release constant.
    All rates must be strictly positive: zero rates would break the
    divisions in the stationary-weight recursion.
    """

    r: int
    J: int
    kappa_fwd: tuple[float, ...]
    kappa_bwd: tuple[float, ...]
    kappa_p: float

    def __post_init__(self) -> None:
        if not isinstance(self.r, int) or self.r < 1:
            raise ValueError(f"r must be a positive integer, got {self.r!r}")
        if not isinstance(self.J, int) or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        object.__setattr__(self, "kappa_fwd", tuple(float(k) for k in self.kappa_fwd))
        object.__setattr__(self, "kappa_bwd", tuple(float(k) for k in self.kappa_bwd))
        object.__setattr__(self, "kappa_p", float(self.kappa_p))
        if len(self.kappa_fwd) != self.r:
            raise ValueError(f"kappa_fwd must have length r={self.r}")
        if len(self.kappa_bwd) != self.r:
            raise ValueError(f"kappa_bwd must have length r={self.r}")
        for name, rates in (("kappa_fwd", self.kappa_fwd), ("kappa_bwd", self.kappa_bwd)):
            for i, k in enumerate(rates):
                if not k > 0.0:
                    raise ValueError(f"{name}[{i}] must be strictly positive, got {k}")
        if not self.kappa_p > 0.0:
            raise ValueError(f"kappa_p must be strictly positive, got {self.kappa_p}")

    def reaction_ids(self) -> list[ReactionId]:
        """All reaction ids in a fixed order: +1, -1, ..., +r, -r, P."""
        ids: list[ReactionId] = []
        for i in range(1, self.r + 1):
            ids.extend((i, -i))
        ids.append(RELEASE)
        return ids


@dataclass(frozen=True)
class ScalingRegime:
    """System size n together with the fixed scaling exponents.

    Only n varies; the exponents are constants of the regime.
    """

    n: int

    alpha_s: float = field(default=1.0, init=False)
    alpha_p: float = field(default=1.0, init=False)
    alpha_e: float = field(default=0.0, init=False)
    alpha_c: float = field(default=0.0, init=False)
    gamma: float = field(default=0.0, init=False)

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")

    @staticmethod
    def beta(k: ReactionId) -> int:
        """Rate-scaling exponent of reaction k: 0 for binding, 1 otherwise."""
        return 0 if k == 1 else 1

    def rate_factor(self, k: ReactionId) -> float:
        """n**beta_k, the factor multiplying kappa_k at system size n."""
        return 1.0 if k == 1 else float(self.n)


@dataclass(frozen=True)
class FullState:
    """Raw copy numbers (x_C, x_S, x_P); free enzyme is derived."""

    x_c: tuple[int, ...]
    x_s: int
    x_p: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_c", tuple(int(c) for c in self.x_c))
        if any(c < 0 for c in self.x_c) or self.x_s < 0 or self.x_p < 0:
            raise ValueError(f"copy numbers must be nonnegative, got {self}")

    def x_e(self, params: CascadeParams) -> int:
        return params.J - sum(self.x_c)


@dataclass(frozen=True)
class ScaledState:
    """Scaled state: integer complex block, density-scaled substrate/product."""

    z_c: tuple[int, ...]
    z_s: float
    z_p: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "z_c", tuple(int(c) for c in self.z_c))
        if any(c < 0 for c in self.z_c) or self.z_s < 0 or self.z_p < 0:
            raise ValueError(f"scaled state must be nonnegative, got {self}")


def complex_states(r: int, J: int) -> list[tuple[int, ...]]:
    """Enumerate the complex-block state space {z in N_0^r : sum(z) <= J}.

    Lexicographic order; size binom(J + r, r).
    """
    states: list[tuple[int, ...]] = []
    state = [0] * r

    def rec(i: int, remaining: int) -> None:
        if i == r:
            states.append(tuple(state))
            return
        for v in range(remaining + 1):
            state[i] = v
            rec(i + 1, remaining - v)
        state[i] = 0

    rec(0, J)
    return states


def check_state(params: CascadeParams, x: FullState) -> None:
    """Validate the enzyme conservation bound sum(x_C) <= J."""
    if len(x.x_c) != params.r:
        raise ValueError(f"state has {len(x.x_c)} complex slots, expected r={params.r}")
    if sum(x.x_c) > params.J:
        raise ValueError(f"sum(x_c)={sum(x.x_c)} exceeds J={params.J}")


def _check_reaction(params: CascadeParams, k: ReactionId) -> None:
    if k == RELEASE:
        return
    if isinstance(k, bool) or not isinstance(k, int) or k == 0 or abs(k) > params.r:
        raise ValueError(f"unknown reaction id {k!r} for r={params.r}")


def stoichiometry(params: CascadeParams, k: ReactionId) -> tuple[tuple[int, ...], int, int]:
    """Integer update (delta x_C, delta x_S, delta x_P) applied by reaction k."""
    _check_reaction(params, k)
    d_c = [0] * params.r
    d_s = 0
    d_p = 0
    if k == RELEASE:
        d_c[params.r - 1] = -1
        d_p = 1
    elif k == 1:
        d_c[0] = 1
        d_s = -1
    elif k == -1:
        d_c[0] = -1
        d_s = 1
    elif k > 0:
        d_c[k - 2] = -1
        d_c[k - 1] = 1
    else:
        i = -k
        d_c[i - 2] = 1
        d_c[i - 1] = -1
    return tuple(d_c), d_s, d_p


def apply_reaction(params: CascadeParams, x: FullState, k: ReactionId) -> FullState:
    """State reached from x by firing reaction k once."""
    d_c, d_s, d_p = stoichiometry(params, k)
    new = FullState(
        x_c=tuple(c + d for c, d in zip(x.x_c, d_c)),
        x_s=x.x_s + d_s,
        x_p=x.x_p + d_p,
    )
    check_state(params, new)
    return new


def _mass_action_factor(params: CascadeParams, k: ReactionId, counts: tuple, free_enzyme, substrate):
    """Source-species product for reaction k; shared by both propensity forms."""
    if k == RELEASE:
        return counts[params.r - 1]
    if k == 1:
        return substrate * free_enzyme
    if k == -1:
        return counts[0]
    if k > 0:
        return counts[k - 2]
    return counts[-k - 1]


def propensity_full(
    params: CascadeParams, regime: ScalingRegime, k: ReactionId, x: FullState
) -> float:
    """Raw-count propensity n**beta_k * kappa_k * (mass-action factor of x)."""
    _check_reaction(params, k)
    check_state(params, x)
    if k == RELEASE:
        kappa = params.kappa_p
    elif k > 0:
        kappa = params.kappa_fwd[k - 1]
    else:
        kappa = params.kappa_bwd[-k - 1]
    factor = _mass_action_factor(params, k, x.x_c, x.x_e(params), x.x_s)
    return regime.rate_factor(k) * kappa * factor


def scaled_propensity(params: CascadeParams, k: ReactionId, z: ScaledState) -> float:
    """Density-scaled propensity lambda_k(z_C, z_S); independent of z_P.

    Satisfies the exact identity propensity_full(x) = n * scaled_propensity(z)
    under z_C = x_C, z_S = x_S/n, z_P = x_P/n.
    """
    _check_reaction(params, k)
    if len(z.z_c) != params.r:
        raise ValueError(f"state has {len(z.z_c)} complex slots, expected r={params.r}")
    total_c = sum(z.z_c)
    if total_c > params.J:
        raise ValueError(f"sum(z_c)={total_c} exceeds J={params.J}")
    if k == RELEASE:
        kappa = params.kappa_p
    elif k > 0:
        kappa = params.kappa_fwd[k - 1]
    else:
        kappa = params.kappa_bwd[-k - 1]
    factor = _mass_action_factor(params, k, z.z_c, params.J - total_c, z.z_s)
    return kappa * factor
