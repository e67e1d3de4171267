import math

import numpy as np
import pytest

from mmcascade import (
    CascadeParams,
    averaged_propensities,
    cell_derivatives,
    conversion_rate_constants,
    g_theta,
    h_theta,
    reduction_constants,
    solve_reduced_ode,
    solve_survival,
    stationary_pmf,
    stationary_weights,
    survival_from_constants,
    tau_distribution,
)
from oracles import (
    averaged_by_enumeration,
    implicit_survival,
    implicit_time,
    nullspace_stationary,
    random_params,
    reduced_constants_of,
    tv_distance,
)

SINGLE = CascadeParams(r=1, J=10, kappa_fwd=(2.0,), kappa_bwd=(0.2,), kappa_p=0.1)
DOUBLE = CascadeParams(r=2, J=10, kappa_fwd=(1.0, 1.0), kappa_bwd=(1.0, 1.0), kappa_p=0.1)


class TestStationaryWeights:
    def test_single_stage_worked_values(self):
        w = stationary_weights(SINGLE, 1.0)
        # p1 = z / (z + (kb + kp)/kf) = 1 / 1.15
        assert w.p[0] == pytest.approx(1.0 / 1.15, abs=1e-15)
        assert w.a[0] == pytest.approx(0.15, abs=1e-15)

    def test_double_stage_worked_values(self):
        w = stationary_weights(DOUBLE, 1.0)
        assert w.p[0] == pytest.approx(1.0 / 3.0, abs=1e-13)
        assert w.p[1] == pytest.approx(10.0 / 33.0, abs=1e-13)

    def test_double_stage_closed_form_random(self, rng):
        # independent closed form: a2 = (kb2+kp)/kf2, w2 = 1/a2,
        # p1 = z / ((1+w2) z + (kb1 + kp w2)/kf1), p2 = w2 p1
        for _ in range(100):
            p = random_params(rng, 2, int(rng.integers(1, 20)))
            z = float(10.0 ** rng.uniform(-1.0, 1.0))
            kf, kb, kp = p.kappa_fwd, p.kappa_bwd, p.kappa_p
            a2 = (kb[1] + kp) / kf[1]
            w2 = 1.0 / a2
            p1 = z / ((1.0 + w2) * z + (kb[0] + kp * w2) / kf[0])
            got = stationary_weights(p, z)
            assert got.p[0] == pytest.approx(p1, rel=1e-12)
            assert got.p[1] == pytest.approx(w2 * p1, rel=1e-12)

    def test_zero_substrate_empties_all_cells(self):
        w = stationary_weights(DOUBLE, 0.0)
        assert w.p == (0.0, 0.0)
        assert math.isinf(w.a[0])

    def test_negative_substrate_rejected(self):
        with pytest.raises(ValueError):
            stationary_weights(SINGLE, -0.5)

    def test_probabilities_valid_across_scales(self, rng):
        for _ in range(30):
            r = int(rng.integers(1, 5))
            p = random_params(rng, r, int(rng.integers(1, 8)))
            for z in (0.01, 1.0, 100.0):
                got = stationary_weights(p, z)
                assert all(v > 0 for v in got.p)
                assert sum(got.p) < 1.0

    def test_derivatives_match_finite_differences(self, rng):
        for _ in range(20):
            r = int(rng.integers(1, 4))
            p = random_params(rng, r, int(rng.integers(1, 8)))
            z = float(10.0 ** rng.uniform(-0.5, 0.5))
            eps = 1e-6 * z
            up = np.asarray(stationary_weights(p, z + eps).p)
            dn = np.asarray(stationary_weights(p, z - eps).p)
            fd = (up - dn) / (2 * eps)
            assert np.allclose(cell_derivatives(p, z), fd, rtol=1e-5, atol=1e-10)


class TestStationaryPmf:
    def test_matches_generator_nullspace(self, rng):
        # multinomial closed form against a direct linear-algebra solve
        for r in (1, 2, 3):
            for J in (1, 2, 4):
                p = random_params(rng, r, J)
                for z in (0.1, 1.0, 10.0):
                    pmf = stationary_pmf(p, z)
                    ref = nullspace_stationary(p, z)
                    assert tv_distance(pmf, ref) < 1e-10

    def test_sums_to_one(self, rng):
        for _ in range(10):
            p = random_params(rng, int(rng.integers(1, 4)), int(rng.integers(1, 7)))
            pmf = stationary_pmf(p, float(10.0 ** rng.uniform(-1, 1)))
            assert sum(pmf.values()) == pytest.approx(1.0, abs=1e-12)

    def test_zero_substrate_concentrates_on_empty_cell(self):
        pmf = stationary_pmf(DOUBLE, 0.0)
        assert pmf[(0, 0)] == pytest.approx(1.0, abs=1e-15)


class TestAveragedPropensities:
    def test_worked_values_double_stage(self):
        avg = averaged_propensities(DOUBLE, 1.0)
        assert avg.binding == pytest.approx(120.0 / 33.0, rel=1e-12)
        assert avg.unbinding == pytest.approx(10.0 / 3.0, rel=1e-12)
        assert avg.release == pytest.approx(10.0 / 33.0, rel=1e-12)

    def test_matches_pmf_enumeration(self, rng):
        # closed form against direct pi-weighted sums of raw propensities
        for _ in range(15):
            r = int(rng.integers(1, 4))
            p = random_params(rng, r, int(rng.integers(1, 6)))
            z = float(10.0 ** rng.uniform(-1, 1))
            avg = dict(averaged_propensities(p, z).as_list(p))
            ref = averaged_by_enumeration(p, z)
            for k in p.reaction_ids():
                assert avg[k] == pytest.approx(ref[k], rel=1e-9, abs=1e-12)

    def test_flux_balance_on_log_grid(self, rng):
        for _ in range(20):
            r = int(rng.integers(1, 5))
            p = random_params(rng, r, int(rng.integers(1, 10)))
            for z in np.logspace(-2, 2, 9):
                avg = averaged_propensities(p, float(z))
                mean_rate = (avg.binding + avg.unbinding + avg.release) / 3.0
                assert abs(avg.binding - avg.unbinding - avg.release) <= 1e-10 * (1.0 + mean_rate)

    def test_interior_stages_balance_too(self, rng):
        # each internal edge carries the same net flux as the release edge
        for _ in range(10):
            r = int(rng.integers(2, 5))
            p = random_params(rng, r, int(rng.integers(1, 8)))
            avg = averaged_propensities(p, 1.3)
            for fw, bw in zip(avg.forward, avg.backward):
                assert fw - bw == pytest.approx(avg.release, rel=1e-9)


class TestConversionRate:
    def test_single_stage_value(self):
        assert h_theta(SINGLE, 1.0) == pytest.approx(1.0 / 1.15, rel=1e-12)

    def test_double_stage_value(self):
        assert h_theta(DOUBLE, 1.0) == pytest.approx(10.0 / 33.0, rel=1e-12)

    def test_vanishes_at_zero(self):
        assert h_theta(SINGLE, 0.0) == 0.0
        assert g_theta(SINGLE, 0.0) == 0.0

    def test_hazard_is_h_over_y(self):
        y = 0.37
        assert g_theta(DOUBLE, y) == pytest.approx(h_theta(DOUBLE, y) / y, rel=1e-14)

    def test_single_stage_constants(self):
        num, slope, offset = conversion_rate_constants(SINGLE)
        assert num == pytest.approx(1.0)
        assert slope == pytest.approx(1.0)
        assert offset == pytest.approx(0.15)

    def test_rational_form_matches_direct_average(self, rng):
        # any depth collapses to num*y/(slope*y + offset)
        for _ in range(20):
            r = int(rng.integers(1, 5))
            p = random_params(rng, r, int(rng.integers(1, 8)))
            num, slope, offset = conversion_rate_constants(p)
            for y in (0.05, 0.7, 3.1, 40.0):
                assert h_theta(p, y) == pytest.approx(
                    num * y / (slope * y + offset), rel=1e-10
                )

    def test_constants_match_enumeration_fit(self, rng):
        for _ in range(10):
            r = int(rng.integers(1, 4))
            p = random_params(rng, r, int(rng.integers(1, 6)))
            num, slope, offset = conversion_rate_constants(p)
            _, slope_ref, offset_ref = reduced_constants_of(p)
            assert slope / num == pytest.approx(slope_ref, rel=1e-7)
            assert offset / num == pytest.approx(offset_ref, rel=1e-7)

    def test_recursion_constants_positive(self, rng):
        for _ in range(30):
            r = int(rng.integers(1, 6))
            p = random_params(rng, r, int(rng.integers(1, 5)))
            consts = reduction_constants(p)
            assert all(a > 0 for a in consts.a_tail)
            assert consts.A1 > 0
            assert len(consts.w) == r


class TestReducedDynamics:
    def test_survival_matches_implicit_solution(self):
        num, slope, offset = conversion_rate_constants(SINGLE)
        t_half = implicit_time(num, slope, offset, 1.0, 0.5)
        assert t_half == pytest.approx(0.603972, abs=1e-6)
        sol = solve_survival(lambda y: h_theta(SINGLE, y), 1.0, 1.0)
        assert sol.eval1(t_half) == pytest.approx(0.5, abs=1e-8)

    def test_survival_from_constants_agrees(self, rng):
        for _ in range(10):
            p = random_params(rng, int(rng.integers(1, 4)), int(rng.integers(1, 8)))
            num, slope, offset = conversion_rate_constants(p)
            T = 2.0
            direct = solve_survival(lambda y: h_theta(p, y), 1.0, T, rtol=1e-10, atol=1e-12)
            rational = survival_from_constants(num, slope, offset, T, rtol=1e-10, atol=1e-12)
            for t in np.linspace(0.1, T, 7):
                assert direct.eval1(t) == pytest.approx(rational.eval1(t), abs=1e-8)
                truth = implicit_survival(num, slope, offset, 1.0, float(t))
                assert rational.eval1(t) == pytest.approx(truth, abs=1e-8)

    def test_reduced_path_conserves_total(self):
        path = solve_reduced_ode(DOUBLE, (0.8, 0.2), 5.0)
        for t in np.linspace(0.0, 5.0, 11):
            assert path.z_s(t) + path.z_p(t) == pytest.approx(1.0, abs=1e-14)
        assert path.z_s(0.0) == pytest.approx(0.8, abs=1e-12)
        assert path.z_p(0.0) == pytest.approx(0.2, abs=1e-12)

    def test_reduced_path_monotone(self):
        path = solve_reduced_ode(SINGLE, (1.0, 0.0), 4.0)
        ts = np.linspace(0.0, 4.0, 41)
        zs = np.array([path.z_s(t) for t in ts])
        assert np.all(np.diff(zs) < 0)
        assert np.all(zs > 0)

    def test_z_v_shapes(self):
        path = solve_reduced_ode(SINGLE, (1.0, 0.0), 1.0)
        assert path.z_v(0.5).shape == (2,)
        assert path.z_v(np.array([0.1, 0.9])).shape == (2, 2)

    def test_zero_initial_substrate_is_constant(self):
        path = solve_reduced_ode(SINGLE, (0.0, 0.3), 2.0)
        for t in (0.0, 1.0, 2.0):
            assert path.z_s(t) == pytest.approx(0.0, abs=1e-12)
            assert path.z_p(t) == pytest.approx(0.3, abs=1e-12)

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            solve_reduced_ode(SINGLE, (-0.1, 0.0), 1.0)
        with pytest.raises(ValueError):
            solve_reduced_ode(SINGLE, (1.0, 0.0), 0.0)


class TestTauDistribution:
    def test_cdf_values(self):
        path = solve_reduced_ode(SINGLE, (1.0, 0.0), 3.0)
        assert tau_distribution(path, 0.0) == pytest.approx(0.0, abs=1e-12)
        t_half = implicit_time(*conversion_rate_constants(SINGLE), 1.0, 0.5)
        assert tau_distribution(path, t_half) == pytest.approx(0.5, abs=1e-8)

    def test_requires_unit_initial_mass(self):
        path = solve_reduced_ode(SINGLE, (0.5, 0.0), 1.0)
        with pytest.raises(ValueError):
            tau_distribution(path, 0.5)
