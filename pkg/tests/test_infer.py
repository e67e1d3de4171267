import math

import numpy as np
import pytest

from mmcascade import (
    ChainConfig,
    InferenceProblem,
    OptimizerConfig,
    RawParameterization,
    ReducedParameterization,
    TauSample,
    UniformBoxPrior,
    count_modes,
    fit_bayes,
    fit_mle,
    kde,
    log_likelihood,
    sample_taus,
    simulate_ips,
)
from mmcascade.infer import _latin_hypercube
from oracles import implicit_time, truncexp_loglik, truncexp_mle

T_HALF = implicit_time(1.0, 1.0, 0.15, 1.0, 0.5)  # 0.603972...


def reduced_problem(times, T, bounds=((1e-3, 10.0), (1e-3, 10.0)), **kw):
    return InferenceProblem(
        data=TauSample(times=tuple(times), T=T),
        parameterization=ReducedParameterization(J=10),
        bounds=bounds,
        **kw,
    )


def trunc_exp_times(rng, c, T, K):
    u = rng.random(K)
    return np.sort(-np.log1p(-u * (1.0 - math.exp(-c * T))) / c)


class TestLogLikelihood:
    def test_single_observation_worked_value(self):
        problem = reduced_problem([T_HALF], T_HALF)
        got = log_likelihood(problem, np.array([0.15, 0.1]))
        # density term log h(1/2) = log(10/13), tail term -log(1/2)
        assert got == pytest.approx(math.log(20.0 / 13.0), abs=1e-6)
        assert got == pytest.approx(0.430783, abs=1e-5)

    def test_duplicated_observation_doubles(self):
        theta = np.array([0.15, 0.1])
        one = log_likelihood(reduced_problem([T_HALF], T_HALF), theta)
        two = log_likelihood(reduced_problem([T_HALF, T_HALF], T_HALF), theta)
        assert two == pytest.approx(2.0 * one, rel=1e-9)

    def test_out_of_bounds_is_minus_inf(self):
        problem = reduced_problem([0.5], 1.0, bounds=((0.1, 1.0), (0.1, 1.0)))
        assert log_likelihood(problem, np.array([0.05, 0.5])) == -math.inf
        assert log_likelihood(problem, np.array([0.5, 2.0])) == -math.inf

    def test_raw_single_stage_equals_reduced_aggregate(self, rng):
        # (kf, kb, kp) enters only through ((kb+kp)/kf, kp)
        for _ in range(10):
            kf, kb, kp = 10.0 ** rng.uniform(-1, 1, size=3)
            times = tuple(sorted(rng.uniform(0.05, 0.9, size=4)))
            raw = InferenceProblem(
                data=TauSample(times=times, T=1.0),
                parameterization=RawParameterization(r=1, J=10),
                bounds=((1e-3, 100.0),) * 3,
            )
            red = reduced_problem(times, 1.0, bounds=((1e-3, 100.0),) * 2)
            a = log_likelihood(raw, np.array([kf, kb, kp]))
            b = log_likelihood(red, np.array([(kb + kp) / kf, kp]))
            assert a == pytest.approx(b, rel=1e-12)

    def test_matches_truncated_exponential_in_stiff_limit(self, rng):
        # offset >> slope * y: hazard is constant and the law is exp(c) on [0,T]
        km = 1e8
        T = 2.0
        for c in (0.3, 0.7, 1.4):
            kp = c * km / 10.0
            times = trunc_exp_times(rng, c, T, 20)
            problem = reduced_problem(times, T, bounds=((1.0, 1e9), (1.0, 1e9)))
            got = log_likelihood(problem, np.array([km, kp]))
            want = truncexp_loglik(times, T, c)
            assert got == pytest.approx(want, abs=1e-5)

    def test_unexplainable_observation_is_minus_inf(self):
        # survival is crushed below the observation for extreme rates
        problem = reduced_problem([1.0], 1.0, bounds=((1e-3, 1e12), (1e-3, 1e12)))
        assert log_likelihood(problem, np.array([1e-3, 1e9])) == -math.inf

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            reduced_problem([], 1.0)


class TestProblemPlumbing:
    def test_fixed_coordinates_merge_in_declaration_order(self):
        problem = InferenceProblem(
            data=TauSample(times=(0.5,), T=1.0),
            parameterization=RawParameterization(r=2, J=10),
            bounds=((0.01, 10.0), (0.01, 10.0)),
            fixed={"kappa_1": 2.0, "kappa_-1": 0.2, "kappa_p": 0.3},
        )
        assert problem.free_names == ("kappa_2", "kappa_-2")
        assert problem.dim == 2
        full = problem.full_vector(np.array([5.0, 7.0]))
        assert np.array_equal(full, [2.0, 0.2, 5.0, 7.0, 0.3])

    def test_bounds_validation(self):
        with pytest.raises(ValueError):
            reduced_problem([0.5], 1.0, bounds=((0.1, 1.0),))
        with pytest.raises(ValueError):
            reduced_problem([0.5], 1.0, bounds=((1.0, 0.1), (0.1, 1.0)))
        with pytest.raises(ValueError):
            reduced_problem([0.5], 1.0, bounds=((0.0, 1.0), (0.1, 1.0)))

    def test_fixed_validation(self):
        with pytest.raises(ValueError):
            InferenceProblem(
                data=TauSample(times=(0.5,), T=1.0),
                parameterization=ReducedParameterization(J=10),
                bounds=((0.1, 1.0),),
                fixed={"kappa_9": 1.0},
            )
        with pytest.raises(ValueError):
            InferenceProblem(
                data=TauSample(times=(0.5,), T=1.0),
                parameterization=ReducedParameterization(J=10),
                bounds=((0.1, 1.0),),
                fixed={"kappa_m": -1.0},
            )

    def test_in_bounds(self):
        problem = reduced_problem([0.5], 1.0, bounds=((0.1, 1.0), (0.2, 2.0)))
        assert problem.in_bounds(np.array([0.5, 0.2]))
        assert not problem.in_bounds(np.array([0.05, 0.5]))


class TestFitMLE:
    def test_latin_hypercube_stratified(self, rng):
        n, d = 16, 3
        u = _latin_hypercube(rng, n, d)
        for j in range(d):
            strata = np.floor(u[:, j] * n).astype(int)
            assert sorted(strata) == list(range(n))

    def test_recovers_constant_hazard_rate(self, rng):
        # one free coordinate in the stiff limit: the fit must land on the
        # truncated-exponential MLE mapped back through c = J kp / km
        km = 1e8
        T, K = 2.0, 50
        times = trunc_exp_times(rng, 0.8, T, K)
        problem = reduced_problem(
            times, T, bounds=((1e5, 1e10),), fixed={"kappa_m": km}
        )
        result = fit_mle(problem, seed=3)
        assert result.converged
        c_hat = 10.0 * float(result.theta[0]) / km
        c_oracle = truncexp_mle(times, T)
        assert c_hat == pytest.approx(c_oracle, rel=1e-5)
        assert result.loglik == pytest.approx(
            truncexp_loglik(times, T, c_oracle), abs=1e-3
        )

    def test_recovers_generating_parameters(self):
        run = simulate_ips(
            __import__("mmcascade").CascadeParams(
                r=1, J=10, kappa_fwd=(2.0,), kappa_bwd=(0.2,), kappa_p=0.1
            ),
            20_000,
            2.0,
            seed=77,
        )
        sample = sample_taus(run, 500, seed=1, mode="uniform")
        problem = InferenceProblem(
            data=sample,
            parameterization=ReducedParameterization(J=10),
            bounds=((1e-3, 10.0), (1e-3, 10.0)),
        )
        result = fit_mle(problem, seed=5)
        assert result.converged
        assert result.theta[0] == pytest.approx(0.15, rel=0.25)
        assert result.theta[1] == pytest.approx(0.10, rel=0.25)

    def test_start_bookkeeping(self, rng):
        times = trunc_exp_times(rng, 0.8, 2.0, 10)
        problem = reduced_problem(times, 2.0, bounds=((0.01, 10.0), (0.01, 10.0)))
        config = OptimizerConfig(starts=4)
        result = fit_mle(problem, config=config, seed=1)
        assert len(result.starts) == 4
        best = max(s.loglik for s in result.starts if s.success)
        assert result.loglik == best

    def test_all_starts_unexplainable_raises(self):
        # every theta in the box crushes survival below the observation
        problem = reduced_problem(
            [1.0], 1.0, bounds=((1e-4, 2e-4), (1e8, 1e9))
        )
        with pytest.raises(RuntimeError, match="no optimizer start converged"):
            fit_mle(problem, seed=0)


class TestFitBayes:
    def test_flat_likelihood_recovers_prior(self):
        # with a constant likelihood the chain must sample the prior itself
        problem = reduced_problem([0.5], 1.0, bounds=((0.01, 10.0), (0.01, 10.0)))
        prior = UniformBoxPrior(bounds=((0.2, 0.8), (1.0, 3.0)))
        config = ChainConfig(burn_in=500, samples=4000)
        post = fit_bayes(
            problem, prior, config=config, seed=9, log_likelihood_fn=lambda th: 0.0
        )
        assert post.samples.shape == (4000, 2)
        for j, (lo, hi) in enumerate(prior.bounds):
            vals = post.samples[:, j]
            assert np.all((vals >= lo) & (vals <= hi))
            mean, sd = 0.5 * (lo + hi), (hi - lo) / math.sqrt(12.0)
            # autocorrelation inflates the error of the chain mean
            ess_floor = 50.0
            assert abs(vals.mean() - mean) < 4.0 * sd / math.sqrt(ess_floor)

    def test_acceptance_rate_adapted_into_band(self):
        problem = reduced_problem([0.5], 1.0, bounds=((0.01, 10.0), (0.01, 10.0)))
        prior = UniformBoxPrior(bounds=((0.05, 1.0), (0.05, 1.0)))
        config = ChainConfig(burn_in=600, samples=2000)
        post = fit_bayes(problem, prior, config=config, seed=4)
        assert 0.1 < post.acceptance_rate < 0.6
        assert post.names == ("kappa_m", "kappa_p")
        assert np.all(np.isfinite(post.log_posts))

    def test_prior_dimension_mismatch_rejected(self):
        problem = reduced_problem([0.5], 1.0)
        with pytest.raises(ValueError):
            fit_bayes(problem, UniformBoxPrior(bounds=((0.1, 1.0),)))

    def test_prior_outside_problem_bounds_rejected(self):
        problem = reduced_problem([0.5], 1.0, bounds=((0.1, 1.0), (0.1, 1.0)))
        with pytest.raises(ValueError):
            fit_bayes(problem, UniformBoxPrior(bounds=((0.01, 1.0), (0.1, 1.0))))

    def test_frozen_chain_rejects_everything_error(self):
        problem = reduced_problem([0.5], 1.0, bounds=((0.01, 10.0), (0.01, 10.0)))
        prior = UniformBoxPrior(bounds=((0.2, 0.8), (1.0, 3.0)))
        mid = np.array([math.sqrt(0.2 * 0.8), math.sqrt(3.0)])

        def only_mid(theta):
            return 0.0 if np.allclose(theta, mid, rtol=1e-12) else -math.inf

        config = ChainConfig(burn_in=40, samples=40)
        with pytest.raises(RuntimeError, match="accepted no proposals"):
            fit_bayes(problem, prior, config=config, seed=2, log_likelihood_fn=only_mid)

    def test_prior_validation(self):
        with pytest.raises(ValueError):
            UniformBoxPrior(bounds=((1.0, 0.5),))
        with pytest.raises(ValueError):
            UniformBoxPrior(bounds=((0.0, 0.5),))


class TestKde:
    def test_standard_normal_density_at_origin(self, rng):
        v = rng.standard_normal(20_000)
        grid = np.array([0.0])
        val = float(kde(v, grid)[0])
        assert val == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=0.05)

    def test_integrates_to_one(self, rng):
        v = rng.normal(2.0, 0.5, size=5000)
        grid = np.linspace(-2.0, 6.0, 1001)
        dens = kde(v, grid)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)

    def test_symmetric_for_symmetric_sample(self):
        v = np.array([-1.0, -0.5, 0.5, 1.0])
        grid = np.linspace(-3.0, 3.0, 61)
        dens = kde(v, grid)
        assert np.allclose(dens, dens[::-1], atol=1e-12)

    def test_degenerate_samples_rejected(self):
        grid = np.linspace(0.0, 1.0, 5)
        with pytest.raises(ValueError):
            kde([0.5], grid)
        with pytest.raises(ValueError):
            kde([0.5, 0.5, 0.5], grid)


class TestCountModes:
    def test_unimodal(self):
        assert count_modes(np.array([0.1, 0.5, 1.0, 0.4, 0.2])) == 1

    def test_bimodal(self):
        assert count_modes(np.array([0.1, 1.0, 0.2, 0.8, 0.1])) == 2

    def test_plateau_merged(self):
        assert count_modes(np.array([0.0, 1.0, 1.0, 1.0, 0.0])) == 1

    def test_edge_modes(self):
        assert count_modes(np.array([3.0, 2.0, 1.0])) == 1
        assert count_modes(np.array([1.0, 2.0, 3.0])) == 1
        assert count_modes(np.array([2.0, 2.0, 2.0])) == 0

    def test_far_tail_roundoff_not_counted(self):
        # summation noise at 1e-100 of the peak must not register as modes
        v = np.linspace(0.149, 0.151, 50)
        grid = np.linspace(-1.0, 1.0, 2001)
        assert count_modes(kde(v, grid)) == 1

    def test_kde_of_separated_clusters_is_bimodal(self, rng):
        v = np.concatenate([rng.normal(0.0, 0.05, 300), rng.normal(1.0, 0.05, 300)])
        grid = np.linspace(-0.5, 1.5, 512)
        assert count_modes(kde(v, grid)) == 2
