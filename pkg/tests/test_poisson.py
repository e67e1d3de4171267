import math

import numpy as np
import pytest

from mmcascade import (
    CascadeParams,
    FastGenerator,
    apply_generator,
    centered_rhs,
    complex_states,
    rate_matrix,
    solve_poisson,
    stationary_pmf,
)
from oracles import random_params

DOUBLE = CascadeParams(r=2, J=10, kappa_fwd=(1.0, 1.0), kappa_bwd=(1.0, 1.0), kappa_p=0.1)


class TestGenerator:
    def test_kills_constants(self, rng):
        for _ in range(10):
            p = random_params(rng, int(rng.integers(1, 4)), int(rng.integers(1, 6)))
            gen = FastGenerator(params=p, z_s=float(10.0 ** rng.uniform(-1, 1)))
            for z in complex_states(p.r, p.J):
                assert apply_generator(gen, lambda _: 4.2, z) == 0.0

    def test_two_state_birth_death(self):
        p = CascadeParams(r=1, J=1, kappa_fwd=(2.0,), kappa_bwd=(0.2,), kappa_p=0.1)
        gen = FastGenerator(params=p, z_s=1.0)
        f = lambda z: float(z[0])
        assert apply_generator(gen, f, (0,)) == pytest.approx(2.0)
        assert apply_generator(gen, f, (1,)) == pytest.approx(-(0.2 + 0.1))

    def test_stationary_law_annihilates_generator(self, rng):
        # sum_z pi(z) (B f)(z) = 0 for arbitrary f: the defining property
        for _ in range(10):
            r = int(rng.integers(1, 4))
            p = random_params(rng, r, int(rng.integers(1, 6)))
            z_s = float(10.0 ** rng.uniform(-1, 1))
            gen = FastGenerator(params=p, z_s=z_s)
            pmf = stationary_pmf(p, z_s)
            f_vals = {z: float(rng.normal()) for z in pmf}
            total = sum(w * apply_generator(gen, f_vals, z) for z, w in pmf.items())
            assert abs(total) < 1e-12

    def test_rate_matrix_rows_sum_to_zero(self, rng):
        p = random_params(rng, 2, 5)
        states, Q = rate_matrix(FastGenerator(params=p, z_s=0.7))
        assert len(states) == len(complex_states(2, 5))
        assert np.allclose(Q.sum(axis=1), 0.0, atol=1e-12)
        off_diag = Q - np.diag(np.diag(Q))
        assert np.all(off_diag >= 0)

    def test_undefined_neighbor_is_error(self):
        gen = FastGenerator(params=DOUBLE, z_s=1.0)
        with pytest.raises(ValueError):
            apply_generator(gen, {(0, 0): 1.0}, (0, 0))

    def test_state_outside_block_rejected(self):
        gen = FastGenerator(params=DOUBLE, z_s=1.0)
        with pytest.raises(ValueError):
            apply_generator(gen, lambda z: 0.0, (11, 0))

    def test_negative_substrate_rejected(self):
        with pytest.raises(ValueError):
            FastGenerator(params=DOUBLE, z_s=-1.0)


class TestSolvePoisson:
    def test_worked_second_component(self):
        sol = solve_poisson(DOUBLE, 1.0)
        assert sol.b2[0] == pytest.approx(1.0 / 33.0, abs=1e-12)
        assert sol.b2[1] == pytest.approx(3.0 / 33.0, abs=1e-12)

    def test_worked_first_component(self):
        sol = solve_poisson(DOUBLE, 1.0)
        assert sol.b1[0] == pytest.approx(0.969697, abs=1e-6)
        assert sol.b1[1] == pytest.approx(0.909091, abs=1e-6)
        assert sol.residual_max <= 1e-12
        # constant term of B F1 must equal the constant term of h1
        const = DOUBLE.kappa_fwd[0] * 1.0 * DOUBLE.J * sol.b1[0]
        assert const == pytest.approx(9.69697, abs=1e-5)

    def test_residual_certificate_random(self, rng):
        for _ in range(20):
            r = int(rng.integers(1, 4))
            p = random_params(rng, r, int(rng.integers(1, 11)))
            z_s = float(10.0 ** rng.uniform(-1, 1))
            sol = solve_poisson(p, z_s)
            assert sol.residual_max <= sol.residual_bound
            assert sol.residual_max <= 1e-8 * max(1.0, _h_sup(p, z_s))

    def test_rescaling_invariance(self, rng):
        # scaling all rates and z_S by c scales K and c alike; b is unchanged
        for _ in range(10):
            p = random_params(rng, 2, 7)
            c = float(10.0 ** rng.uniform(-1, 1))
            scaled = CascadeParams(
                r=p.r,
                J=p.J,
                kappa_fwd=tuple(c * k for k in p.kappa_fwd),
                kappa_bwd=tuple(c * k for k in p.kappa_bwd),
                kappa_p=c * p.kappa_p,
            )
            a = solve_poisson(p, 0.8)
            b = solve_poisson(scaled, 0.8)
            assert np.allclose(a.b1, b.b1, rtol=1e-9)
            assert np.allclose(a.b2, b.b2, rtol=1e-9)

    def test_component_coefficients_sum_to_one(self, rng):
        # the two correctors track complementary shares of each jump
        for _ in range(10):
            r = int(rng.integers(1, 5))
            p = random_params(rng, r, int(rng.integers(1, 8)))
            sol = solve_poisson(p, float(10.0 ** rng.uniform(-1, 1)))
            for v1, v2 in zip(sol.b1, sol.b2):
                assert v1 + v2 == pytest.approx(1.0, abs=1e-9)

    def test_centered_rhs_has_zero_mean(self, rng):
        for _ in range(10):
            r = int(rng.integers(1, 4))
            p = random_params(rng, r, int(rng.integers(1, 7)))
            z_s = float(10.0 ** rng.uniform(-1, 1))
            h1, h2 = centered_rhs(p, z_s)
            pmf = stationary_pmf(p, z_s)
            m1 = sum(w * h1(z) for z, w in pmf.items())
            m2 = sum(w * h2(z) for z, w in pmf.items())
            assert abs(m1) < 1e-10
            assert abs(m2) < 1e-10

    def test_linear_growth_in_substrate(self, rng):
        p = random_params(rng, 3, 5)
        grid = np.logspace(-2, 3, 11)
        norms = np.array([np.linalg.norm(solve_poisson(p, float(z)).b1) for z in grid])
        bound = norms[0] + 2.0 * np.linalg.norm(solve_poisson(p, 1.0).b1)
        assert np.all(norms <= bound * (1.0 + grid))

    def test_zero_substrate_rejected(self):
        with pytest.raises(ValueError):
            solve_poisson(DOUBLE, 0.0)

    def test_solution_solves_equation_pointwise(self, rng):
        # direct check of B F = -h on every block state, no linear algebra
        for _ in range(5):
            r = int(rng.integers(1, 4))
            p = random_params(rng, r, int(rng.integers(1, 6)))
            z_s = 1.3
            sol = solve_poisson(p, z_s)
            gen = FastGenerator(params=p, z_s=z_s)
            h1, h2 = centered_rhs(p, z_s)
            for z in complex_states(r, p.J):
                f1 = lambda s: sum(b * c for b, c in zip(sol.b1, s))
                f2 = lambda s: sum(b * c for b, c in zip(sol.b2, s))
                assert apply_generator(gen, f1, z) == pytest.approx(-h1(z), abs=1e-8)
                assert apply_generator(gen, f2, z) == pytest.approx(-h2(z), abs=1e-8)


def _h_sup(params, z_s):
    h1, h2 = centered_rhs(params, z_s)
    states = complex_states(params.r, params.J)
    return max(max(abs(h1(z)) for z in states), max(abs(h2(z)) for z in states))
