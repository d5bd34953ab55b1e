"""Sampler blocks against dense independent references.

Every Gibbs block is checked two ways where possible: the draw itself is
matched against a dense-matrix reference consuming the same random stream,
and repeated draws are tested against the independently derived conditional
law (KS / chi-square).  The joint-correctness Geweke test lives in
test_acceptance.py.
"""

import math

import numpy as np
import pytest
from scipy import stats

from skewtproc.covariance import (
    MaternParams,
    SeparableGaussian,
    build_spatial_corr,
    precision_chol,
)
from skewtproc.errors import ParameterError
from skewtproc.model import ChainState, ObservationTensor, mean_surface, spline_basis
from skewtproc.sampler import (
    ChainConfig,
    PriorConfig,
    StepSizes,
    _a_log_weights,
    _sigma2_shape_rate,
    _sigma_b_df_scale,
    _sigma_i_df_scale,
    adapt_steps,
    gaussian_loglik,
    gibbs_a,
    gibbs_beta,
    gibbs_lambda,
    gibbs_mu_beta,
    gibbs_sigma2,
    gibbs_sigma_b,
    gibbs_sigma_i,
    gibbs_z,
    initialize_state,
    mh_gamma,
    mh_rho_nu,
    run_chain,
    truncnorm_positive,
)
from skewtproc.simulate import simulate_dataset

from conftest import rand_spd


def make_problem(seed=42, n=3, P=2, L=4, T=8, dof=6.0, skew=(1.0, -0.5)):
    """Small synthetic problem with a fully specified state."""
    rng = np.random.default_rng(seed)
    sites = rng.uniform(0, 3, (n, 2))
    times = np.arange(float(T))
    basis = spline_basis(times, L)
    matern = MaternParams(rho=1.4, nu=0.8, gamma=0.9)
    state = ChainState(
        beta=rng.standard_normal((n, P, L)),
        mu_beta=rng.standard_normal(P) * 0.5,
        skew=np.asarray(skew, dtype=float)[:P],
        z_abs=np.abs(rng.standard_normal(T)),
        sigma2=rng.uniform(0.5, 2.0, T),
        dof=dof,
        index_cov=rand_spd(rng, P),
        spline_cov=rand_spd(rng, L),
        matern=matern,
    )
    y = rng.standard_normal((T, n, P))
    data = ObservationTensor(y, sites, times, tuple(f"v{p}" for p in range(P)))
    priors = PriorConfig(rho_max=6.0)
    sep = SeparableGaussian(
        build_spatial_corr(sites, matern), state.index_cov, state.spline_cov
    )
    return state, data, basis, priors, sep


def dense_cov2(sep):
    return np.kron(sep.sigma_s, sep.sigma_i)


class TestTruncnormPositive:
    @pytest.mark.parametrize("mean,sd", [(0.0, 1.0), (2.0, 0.5), (-1.5, 1.0)])
    def test_distribution(self, mean, sd):
        rng = np.random.default_rng(11)
        draws = truncnorm_positive(rng, np.full(20000, mean), np.full(20000, sd))
        assert np.all(draws >= 0)
        ref = stats.truncnorm(-mean / sd, np.inf, loc=mean, scale=sd)
        stat = stats.kstest(draws, ref.cdf)
        assert stat.pvalue > 1e-3

    def test_far_negative_mean_stays_finite(self):
        # naive rejection or direct Phi-inversion fails out here
        rng = np.random.default_rng(1)
        draws = truncnorm_positive(rng, np.full(1000, -40.0), np.ones(1000))
        assert np.all(np.isfinite(draws))
        assert np.all(draws >= 0)
        # the conditional law concentrates just above zero
        assert float(draws.max()) < 0.5

    def test_matches_scipy_ppf_route(self):
        # same uniforms through scipy's ppf give the same numbers
        mean, sd = np.array([0.3, -2.0, 5.0]), np.array([1.0, 0.7, 2.0])
        u = np.random.default_rng(7).random(3)
        mine = truncnorm_positive(np.random.default_rng(7), mean, sd)
        ref = stats.truncnorm.ppf(1 - u, -mean / sd, np.inf, loc=mean, scale=sd)
        np.testing.assert_allclose(mine, ref, rtol=1e-9)

    def test_deterministic(self):
        a = truncnorm_positive(np.random.default_rng(3), np.zeros(5), np.ones(5))
        b = truncnorm_positive(np.random.default_rng(3), np.zeros(5), np.ones(5))
        np.testing.assert_array_equal(a, b)


class TestGaussianLoglik:
    def test_matches_dense(self):
        state, data, basis, priors, sep = make_problem()
        mu = mean_surface(state, basis)
        got = gaussian_loglik(data.y, mu, state.z_abs, state.skew, state.sigma2, sep)
        dense = dense_cov2(sep)
        ref = 0.0
        for t in range(data.y.shape[0]):
            m = (mu[t] + state.z_abs[t] * state.skew[None, :]).reshape(-1)
            ref += stats.multivariate_normal.logpdf(
                data.y[t].reshape(-1), mean=m, cov=state.sigma2[t] * dense
            )
        assert got == pytest.approx(ref, rel=1e-10)


class TestGibbsBeta:
    def test_matches_dense_conditional(self):
        state, data, basis, priors, sep = make_problem()
        n, P, L = state.beta.shape
        T = data.y.shape[0]
        seed = 1234

        draw = gibbs_beta(state, data, basis, priors, np.random.default_rng(seed), sep=sep)

        # dense reference: precision kron(Si_s, Si_i, G + Si_b) built from
        # the generic Gaussian-conditional formulas
        si_s = np.linalg.inv(sep.sigma_s)
        si_i = np.linalg.inv(sep.sigma_i)
        si_b = np.linalg.inv(sep.sigma_b)
        b = basis.b
        g = sum(np.outer(b[t], b[t]) / state.sigma2[t] for t in range(T))
        lam_full = np.kron(si_s, np.kron(si_i, g + si_b))
        resid = data.y - state.z_abs[:, None, None] * state.skew[None, None, :]
        si_si = np.kron(si_s, si_i)
        rhs = np.zeros(n * P * L)
        for t in range(T):
            r = si_si @ resid[t].reshape(-1) / state.sigma2[t]
            rhs += np.kron(r, b[t])
        prior_mean = np.kron(np.ones(n), np.kron(state.mu_beta, np.ones(L)))
        rhs += np.kron(si_s, np.kron(si_i, si_b)) @ prior_mean
        mean_ref = np.linalg.solve(lam_full, rhs)

        # same noise through the dense factor map
        xi = np.random.default_rng(seed).standard_normal((n, P, L)).reshape(-1)
        ch = np.linalg.cholesky(g + si_b)
        m_map = np.kron(
            np.linalg.cholesky(sep.sigma_s),
            np.kron(np.linalg.cholesky(sep.sigma_i), np.linalg.inv(ch.T)),
        )
        ref = mean_ref + m_map @ xi
        np.testing.assert_allclose(draw.reshape(-1), ref, rtol=1e-7, atol=1e-9)

    def test_draw_covariance_matches_dense(self):
        # second-moment check over repeated draws on a tiny problem
        state, data, basis, priors, sep = make_problem(n=2, P=1, L=4, T=6, skew=(0.5,))
        rng = np.random.default_rng(5)
        draws = np.array(
            [gibbs_beta(state, data, basis, priors, rng, sep=sep).reshape(-1) for _ in range(4000)]
        )
        si_b = np.linalg.inv(sep.sigma_b)
        g = sum(
            np.outer(basis.b[t], basis.b[t]) / state.sigma2[t]
            for t in range(data.y.shape[0])
        )
        cov_ref = np.kron(sep.sigma_s, np.kron(sep.sigma_i, np.linalg.inv(g + si_b)))
        emp = np.cov(draws, rowvar=False)
        scale = np.sqrt(np.outer(np.diag(cov_ref), np.diag(cov_ref)))
        np.testing.assert_allclose(emp / scale, cov_ref / scale, atol=0.08)


class TestGibbsMuBeta:
    def test_matches_dense_conditional(self):
        state, data, basis, priors, sep = make_problem()
        n, P, L = state.beta.shape
        seed = 77
        draw = gibbs_mu_beta(state, priors, np.random.default_rng(seed), sep=sep)

        lam_beta = np.kron(
            np.linalg.inv(sep.sigma_s),
            np.kron(np.linalg.inv(sep.sigma_i), np.linalg.inv(sep.sigma_b)),
        )
        a_map = np.kron(np.ones((n, 1)), np.kron(np.eye(P), np.ones((L, 1))))
        prec = a_map.T @ lam_beta @ a_map + np.eye(P) / priors.mu_beta_sd**2
        rhs = a_map.T @ lam_beta @ state.beta.reshape(-1)
        mean_ref = np.linalg.solve(prec, rhs)

        xi = np.random.default_rng(seed).standard_normal(P)
        ch = precision_chol(0.5 * (prec + prec.T), "ref")
        ref = mean_ref + np.linalg.solve(ch.T, xi)
        np.testing.assert_allclose(draw, ref, rtol=1e-8, atol=1e-10)


class TestGibbsLambda:
    def test_matches_dense_conditional(self):
        state, data, basis, priors, sep = make_problem()
        T, n, P = data.y.shape
        seed = 99
        mu = mean_surface(state, basis)
        draw = gibbs_lambda(
            state, data, basis, priors, np.random.default_rng(seed), sep=sep, mu=mu
        )

        dense = dense_cov2(sep)
        dinv = np.linalg.inv(dense)
        a_base = np.kron(np.ones((n, 1)), np.eye(P))
        prec = np.eye(P) / priors.lambda_sd**2
        rhs = np.zeros(P)
        for t in range(T):
            a_t = state.z_abs[t] * a_base
            prec += a_t.T @ dinv @ a_t / state.sigma2[t]
            r = (data.y[t] - mu[t]).reshape(-1)
            rhs += a_t.T @ dinv @ r / state.sigma2[t]
        mean_ref = np.linalg.solve(prec, rhs)

        xi = np.random.default_rng(seed).standard_normal(P)
        ch = precision_chol(0.5 * (prec + prec.T), "ref")
        ref = mean_ref + np.linalg.solve(ch.T, xi)
        np.testing.assert_allclose(draw, ref, rtol=1e-8, atol=1e-10)


class TestGibbsZ:
    def test_matches_dense_conditional(self):
        state, data, basis, priors, sep = make_problem()
        T, n, P = data.y.shape
        seed = 31
        mu = mean_surface(state, basis)
        draw = gibbs_z(state, data, basis, np.random.default_rng(seed), sep=sep, mu=mu)

        dinv = np.linalg.inv(dense_cov2(sep))
        v = np.kron(np.ones(n), state.skew)
        c = float(v @ dinv @ v)
        m = np.empty(T)
        for t in range(T):
            r = (data.y[t] - mu[t]).reshape(-1)
            m[t] = float(v @ dinv @ r) / (1.0 + c)
        sd = np.sqrt(state.sigma2 / (1.0 + c))
        ref = truncnorm_positive(np.random.default_rng(seed), m, sd)
        np.testing.assert_allclose(draw, ref, rtol=1e-8, atol=1e-12)

    def test_distribution_against_scipy(self):
        state, data, basis, priors, sep = make_problem(T=4)
        mu = mean_surface(state, basis)
        rng = np.random.default_rng(8)
        draws = np.array(
            [gibbs_z(state, data, basis, rng, sep=sep, mu=mu) for _ in range(6000)]
        )
        dinv = np.linalg.inv(dense_cov2(sep))
        n = data.y.shape[1]
        v = np.kron(np.ones(n), state.skew)
        c = float(v @ dinv @ v)
        t0 = 2
        r = (data.y[t0] - mu[t0]).reshape(-1)
        m = float(v @ dinv @ r) / (1.0 + c)
        s = math.sqrt(state.sigma2[t0] / (1.0 + c))
        ref = stats.truncnorm(-m / s, np.inf, loc=m, scale=s)
        assert stats.kstest(draws[:, t0], ref.cdf).pvalue > 1e-3


class TestGibbsSigma2:
    def test_shape_rate_against_dense(self):
        state, data, basis, priors, sep = make_problem()
        T, n, P = data.y.shape
        mu = mean_surface(state, basis)
        shape, rate = _sigma2_shape_rate(state, data.y, sep, mu)
        dinv = np.linalg.inv(dense_cov2(sep))
        assert shape == pytest.approx((state.dof + n * P + 1.0) / 2.0)
        for t in range(T):
            r = (data.y[t] - mu[t] - state.z_abs[t] * state.skew[None, :]).reshape(-1)
            q = float(r @ dinv @ r)
            want = (state.dof + q + state.z_abs[t] ** 2) / 2.0
            assert rate[t] == pytest.approx(want, rel=1e-10)

    def test_distribution(self):
        state, data, basis, priors, sep = make_problem(T=4)
        mu = mean_surface(state, basis)
        shape, rate = _sigma2_shape_rate(state, data.y, sep, mu)
        rng = np.random.default_rng(21)
        draws = np.array(
            [gibbs_sigma2(state, data, basis, rng, sep=sep, mu=mu) for _ in range(6000)]
        )
        ref = stats.invgamma(shape, scale=rate[1])
        assert stats.kstest(draws[:, 1], ref.cdf).pvalue > 1e-3


class TestGibbsA:
    def test_log_weights_match_invgamma_logpdf(self):
        sigma2 = np.array([0.8, 1.3, 2.1, 0.6])
        grid = np.array([0.5, 1.0, 2.0, 8.0, 19.9])
        got = _a_log_weights(sigma2, grid)
        for k, a in enumerate(grid):
            want = float(np.sum(stats.invgamma.logpdf(sigma2, a / 2.0, scale=a / 2.0)))
            assert got[k] == pytest.approx(want, rel=1e-12)

    def test_draw_frequencies(self):
        state, data, basis, priors, sep = make_problem()
        grid = np.array([2.0, 6.0, 12.0])
        pri = PriorConfig(rho_max=6.0, a_grid=grid)
        logw = _a_log_weights(state.sigma2, grid)
        p = np.exp(logw - logw.max())
        p /= p.sum()
        rng = np.random.default_rng(17)
        draws = np.array([gibbs_a(state, pri, rng) for _ in range(20000)])
        counts = np.array([(draws == a).sum() for a in grid])
        chi = stats.chisquare(counts, 20000 * p)
        assert chi.pvalue > 1e-3


class TestInverseWisharts:
    def test_sigma_i_df_scale_dense(self):
        state, data, basis, priors, sep = make_problem()
        T, n, P = data.y.shape
        L = state.beta.shape[2]
        mu = mean_surface(state, basis)
        df, scale = _sigma_i_df_scale(state, data.y, priors, sep, mu)
        assert df == pytest.approx(priors.iw_df + n * T + n * L)

        si_s = np.linalg.inv(sep.sigma_s)
        data_term = np.zeros((P, P))
        for t in range(T):
            r = data.y[t] - mu[t] - state.z_abs[t] * state.skew[None, :]
            data_term += r.T @ si_s @ r / state.sigma2[t]
        si_b = np.linalg.inv(sep.sigma_b)
        prior_term = np.zeros((P, P))
        d = state.beta - state.mu_beta[None, :, None]
        for i in range(n):
            for j in range(n):
                prior_term += si_s[i, j] * d[i] @ si_b @ d[j].T
        want = priors.iw_scale * np.eye(P) + data_term + prior_term
        np.testing.assert_allclose(scale, want, rtol=1e-9, atol=1e-12)

    def test_sigma_b_df_scale_dense(self):
        state, data, basis, priors, sep = make_problem()
        n, P, L = state.beta.shape
        df, scale = _sigma_b_df_scale(state, priors, sep)
        assert df == pytest.approx(priors.iw_df + n * P)
        si_s = np.linalg.inv(sep.sigma_s)
        si_i = np.linalg.inv(sep.sigma_i)
        d = state.beta - state.mu_beta[None, :, None]
        want = priors.iw_scale * np.eye(L)
        for i in range(n):
            for j in range(n):
                want += si_s[i, j] * d[i].T @ si_i @ d[j]
        np.testing.assert_allclose(scale, want, rtol=1e-9, atol=1e-12)

    def test_sigma_i_draw_moments(self):
        state, data, basis, priors, sep = make_problem(T=40)
        mu = mean_surface(state, basis)
        df, scale = _sigma_i_df_scale(state, data.y, priors, sep, mu)
        rng = np.random.default_rng(4)
        draws = [
            gibbs_sigma_i(state, data, basis, priors, rng, sep=sep, mu=mu)
            for _ in range(3000)
        ]
        mean = np.mean(draws, axis=0)
        want = scale / (df - state.beta.shape[1] - 1)
        np.testing.assert_allclose(mean, want, rtol=0.05)

    def test_sigma_b_guard(self):
        state, data, basis, priors, sep = make_problem(n=3, P=1, L=4)
        state.beta = state.beta[:, :1, :]
        state.mu_beta = state.mu_beta[:1]
        with pytest.raises(ParameterError, match="weakly identified"):
            gibbs_sigma_b(state, priors, np.random.default_rng(0), sep=sep)

    def test_draws_are_spd(self):
        state, data, basis, priors, sep = make_problem()
        mu = mean_surface(state, basis)
        rng = np.random.default_rng(12)
        si = gibbs_sigma_i(state, data, basis, priors, rng, sep=sep, mu=mu)
        sb = gibbs_sigma_b(state, priors, rng, sep=sep)
        for m in (si, sb):
            np.testing.assert_allclose(m, m.T, atol=1e-12)
            assert np.all(np.linalg.eigvalsh(m) > 0)


class TestMetropolisPriorRecovery:
    """With data=None the MH kernels must leave the prior invariant."""

    def _run(self, update, extract, iters=30000, seed=2):
        state, data, basis, priors, sep = make_problem()
        rng = np.random.default_rng(seed)
        steps = StepSizes(rho=1.2, nu=1.2, gamma=1.8)
        out = np.empty(iters)
        for it in range(iters):
            acc, params = update(state, None, basis, priors, rng, steps)
            state.matern = params
            out[it] = extract(params)
        return out[5000::5], priors  # thin for the KS test

    def test_rho_uniform_prior(self):
        draws, priors = self._run(mh_rho_nu, lambda p: p.rho)
        assert stats.kstest(draws, stats.uniform(0, priors.rho_max).cdf).pvalue > 1e-3

    def test_nu_lognormal_prior(self):
        draws, priors = self._run(mh_rho_nu, lambda p: math.log(p.nu))
        ref = stats.norm(priors.log_nu_mean, priors.log_nu_sd)
        assert stats.kstest(draws, ref.cdf).pvalue > 1e-3

    def test_gamma_uniform_prior(self):
        draws, _ = self._run(mh_gamma, lambda p: p.gamma)
        assert stats.kstest(draws, stats.uniform(0, 1).cdf).pvalue > 1e-3

    def test_likelihood_moves_rho(self):
        # smoke check that the data route runs and produces both outcomes
        state, data, basis, priors, sep = make_problem()
        rng = np.random.default_rng(3)
        mu = mean_surface(state, basis)
        flags = []
        for _ in range(200):
            acc, params = mh_rho_nu(
                state, data, basis, priors, rng, StepSizes(), sep=sep, mu=mu
            )
            state.matern = params
            sep = sep.replace(sigma_s=build_spatial_corr(data.sites, params))
            flags.append(acc)
        assert any(flags) and not all(flags)


class TestAdaptation:
    def test_adapt_directions(self):
        s = StepSizes(rho=1.0, nu=1.0, gamma=1.0)
        high = {"rho_nu": [True] * 10, "gamma": [True] * 10}
        low = {"rho_nu": [False] * 10, "gamma": [False] * 10}
        mid = {"rho_nu": [True, False] * 5, "gamma": [True, False] * 5}
        up = adapt_steps(high, s, 10)
        assert (up.rho, up.nu, up.gamma) == (1.2, 1.2, 1.2)
        down = adapt_steps(low, s, 10)
        assert (down.rho, down.nu, down.gamma) == pytest.approx((0.8, 0.8, 0.8))
        same = adapt_steps(mid, s, 10)
        assert same is s

    def test_window_uses_tail(self):
        s = StepSizes()
        hist = {"rho_nu": [True] * 100 + [False] * 10, "gamma": [False] * 110}
        out = adapt_steps(hist, s, 10)
        assert out.rho == pytest.approx(s.rho * 0.8)

    def test_step_sizes_frozen(self):
        s = StepSizes()
        with pytest.raises(Exception):
            s.rho = 2.0


class TestChainConfig:
    def test_n_kept(self):
        assert ChainConfig(iters=100, burn_in=40, thin=3).n_kept == 20
        assert ChainConfig(iters=20000, burn_in=10000, thin=5).n_kept == 2000

    def test_validation(self):
        with pytest.raises(ParameterError):
            ChainConfig(iters=0)
        with pytest.raises(ParameterError):
            ChainConfig(iters=10, burn_in=10)
        with pytest.raises(ParameterError):
            ChainConfig(iters=10, burn_in=2, thin=0)
        with pytest.raises(ParameterError):
            ChainConfig(iters=10, burn_in=8, thin=5)


class TestPriorConfig:
    def test_rho_max_required_and_checked(self):
        with pytest.raises(ParameterError):
            PriorConfig(rho_max=0.0)
        with pytest.raises(ParameterError):
            PriorConfig(rho_max=math.inf)

    def test_a_grid_default(self):
        g = PriorConfig(rho_max=1.0).a_grid
        assert g[0] == pytest.approx(0.1)
        assert g[-1] == pytest.approx(20.0)
        assert g.size == 200
        assert np.all(np.diff(g) > 0)

    def test_a_grid_validation(self):
        with pytest.raises(ParameterError):
            PriorConfig(rho_max=1.0, a_grid=np.array([1.0, 1.0]))
        with pytest.raises(ParameterError):
            PriorConfig(rho_max=1.0, a_grid=np.array([-1.0, 2.0]))


def _tiny_data(seed=0, n=4, P=2, L=4, T=20, dof=8.0):
    rng = np.random.default_rng(seed)
    sites = np.column_stack([np.arange(n) % 2, np.arange(n) // 2]).astype(float)
    times = np.arange(float(T))
    mat = MaternParams(rho=1.0, nu=0.7, gamma=0.85)
    truth = ChainState(
        beta=rng.standard_normal((n, P, L)),
        mu_beta=np.zeros(P),
        skew=np.array([1.0, -0.5])[:P],
        z_abs=np.zeros(T),
        sigma2=np.ones(T),
        dof=dof,
        index_cov=np.eye(P),
        spline_cov=0.3 * np.eye(L),
        matern=mat,
    )
    return simulate_dataset(truth, sites, times, rng), times


class TestRunChain:
    def test_retention_schedule(self):
        data, times = _tiny_data()
        basis = spline_basis(times, 4)
        priors = PriorConfig(rho_max=4.0)
        cfg = ChainConfig(iters=23, burn_in=10, thin=4, seed=1, adapt_window=5)
        s = run_chain(data, basis, priors, cfg, variant="mstp")
        assert cfg.n_kept == 3
        assert len(s) == 3
        assert s.beta.shape[0] == 3
        assert s.pointwise_ll.shape == (3, 20, 4)
        assert np.all(np.isfinite(s.deviance))
        assert math.isfinite(s.deviance_at_mean)

    def test_bitwise_determinism(self):
        data, times = _tiny_data()
        basis = spline_basis(times, 4)
        priors = PriorConfig(rho_max=4.0)
        cfg = ChainConfig(iters=30, burn_in=10, thin=2, seed=9, adapt_window=10)
        s1 = run_chain(data, basis, priors, cfg, variant="mstp")
        s2 = run_chain(data, basis, priors, cfg, variant="mstp")
        np.testing.assert_array_equal(s1.beta, s2.beta)
        np.testing.assert_array_equal(s1.deviance, s2.deviance)
        u1 = run_chain(data, basis, priors, cfg, variant="stp")
        u2 = run_chain(data, basis, priors, cfg, variant="stp")
        np.testing.assert_array_equal(u1.beta, u2.beta)

    def test_variant_semantics(self):
        data, times = _tiny_data()
        basis = spline_basis(times, 4)
        priors = PriorConfig(rho_max=4.0)
        cfg = ChainConfig(iters=24, burn_in=8, thin=2, seed=3, adapt_window=8)

        mgp = run_chain(data, basis, priors, cfg, variant="mgp")
        assert np.all(np.isinf(mgp.dof))
        assert np.all(mgp.skew == 0)
        assert np.all(mgp.z_abs == 0)
        assert np.all(mgp.sigma2 == 1)

        mtp = run_chain(data, basis, priors, cfg, variant="mtp")
        assert np.all(mtp.skew == 0)
        assert np.all(np.isfinite(mtp.dof))

        mstp = run_chain(data, basis, priors, cfg, variant="mstp")
        assert not np.all(mstp.skew == 0)

    def test_univariate_container(self):
        data, times = _tiny_data()
        basis = spline_basis(times, 4)
        priors = PriorConfig(rho_max=4.0)
        cfg = ChainConfig(iters=24, burn_in=8, thin=2, seed=3, adapt_window=8)
        s = run_chain(data, basis, priors, cfg, variant="tp")
        assert len(s.chains) == 2
        assert s.dims == (20, 4, 2, 4)
        assert s.beta.shape == (8, 4, 2, 4)
        np.testing.assert_allclose(
            s.pointwise_ll,
            s.chains[0].pointwise_ll + s.chains[1].pointwise_ll,
        )
        np.testing.assert_allclose(
            s.deviance, s.chains[0].deviance + s.chains[1].deviance
        )
        # each sub-chain saw a different stream
        assert not np.allclose(s.chains[0].sigma2, s.chains[1].sigma2)

    def test_state_round_trip(self):
        data, times = _tiny_data()
        basis = spline_basis(times, 4)
        priors = PriorConfig(rho_max=4.0)
        cfg = ChainConfig(iters=12, burn_in=4, thin=2, seed=3, adapt_window=4)
        s = run_chain(data, basis, priors, cfg, variant="mstp")
        st = s.state(1)
        st.validate()
        assert st.dof == s.dof[1]
        ms = s.mean_state()
        ms.validate()
        assert ms.dof in s.dof  # mode of the grid draws

    def test_unknown_variant(self):
        data, times = _tiny_data()
        basis = spline_basis(times, 4)
        with pytest.raises(ParameterError, match="variant"):
            run_chain(data, basis, PriorConfig(rho_max=4.0), ChainConfig(iters=4, burn_in=1, thin=1), variant="xxx")

    def test_weak_identification_guard(self):
        # per univariate sub-chain the wishart df is iw_df + n*1 = 4.01 < L = 5
        data, times = _tiny_data(n=4, P=2, L=5)
        basis = spline_basis(times, 5)
        priors = PriorConfig(rho_max=4.0)
        cfg = ChainConfig(iters=8, burn_in=2, thin=1, seed=0, adapt_window=4)
        with pytest.raises(ParameterError, match="weakly identified"):
            run_chain(data, basis, priors, cfg, variant="gp")
        # the joint fit pools indexes: df = 8.01 >= 5, so it must run
        run_chain(data, basis, priors, cfg, variant="mgp")

    def test_initialize_state(self):
        data, times = _tiny_data()
        basis = spline_basis(times, 4)
        priors = PriorConfig(rho_max=4.0)
        st = initialize_state(data, basis, priors, "mstp")
        st.validate()
        assert st.dof == 10.0
        st_g = initialize_state(data, basis, priors, "mgp")
        assert math.isinf(st_g.dof)
        assert np.all(st_g.z_abs == 0)
        assert np.all(st_g.skew == 0)

    def test_initialize_state_skew_start_points_at_data_skewness(self):
        # wrong-sign starts let the chain settle in the reflected local mode,
        # so the start must pick up the residual skewness direction
        rng = np.random.default_rng(3)
        n, P, T = 6, 2, 80
        sites = np.column_stack([np.arange(n) % 3, np.arange(n) // 3]).astype(float)
        times = np.arange(float(T))
        z = np.abs(rng.standard_normal(T))
        lam = np.array([2.0, -1.5])
        y = z[:, None, None] * lam[None, None, :] + 0.5 * rng.standard_normal((T, n, P))
        data = ObservationTensor(y=y, sites=sites, times=times, index_names=("a", "b"))
        basis = spline_basis(times, 4)
        st = initialize_state(data, basis, PriorConfig(rho_max=4.0), "mstp")
        assert np.sign(st.skew[0]) == 1.0 and np.sign(st.skew[1]) == -1.0
        assert np.all(np.abs(st.skew) <= 3.0)
        # symmetric variants keep the flat start
        st_t = initialize_state(data, basis, PriorConfig(rho_max=4.0), "mtp")
        assert np.all(st_t.skew == 0)
