"""Model layer: spline basis, skew-t densities against independent
references, moments against Monte Carlo."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from skewtproc.covariance import MaternParams, SeparableGaussian, build_spatial_corr
from skewtproc.errors import BasisError, ParameterError, ShapeError
from skewtproc.model import (
    ChainState,
    ObservationTensor,
    SkewTParams,
    full_data_loglik,
    mean_surface,
    model_moments,
    pointwise_loglik,
    skewt_logpdf_multi,
    skewt_logpdf_uni,
    spline_basis,
)

from conftest import rand_corr, rand_spd


class TestSplineBasis:
    @settings(deadline=None, max_examples=30)
    @given(
        T=st.integers(8, 80),
        L=st.integers(4, 8),
        t0=st.floats(-100.0, 100.0),
        dt=st.floats(0.1, 10.0),
    )
    def test_partition_of_unity_and_support(self, T, L, t0, dt):
        times = t0 + dt * np.arange(T)
        basis = spline_basis(times, L)
        b = basis.b
        assert b.shape == (T, L)
        assert np.all(b >= 0)
        np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-12)
        # cubic pieces touch at most 4 consecutive functions
        assert int((b > 1e-12).sum(axis=1).max()) <= 4

    def test_endpoint_interpolation(self):
        # clamped ends: the first/last rows are coordinate vectors, so the
        # fitted value at the ends equals the first/last coefficient
        basis = spline_basis(np.linspace(2000.0, 2066.0, 67), 7)
        first = np.zeros(7)
        first[0] = 1.0
        last = np.zeros(7)
        last[-1] = 1.0
        np.testing.assert_allclose(basis.b[0], first, atol=1e-14)
        np.testing.assert_allclose(basis.b[-1], last, atol=1e-14)

    @pytest.mark.parametrize("L", [4, 5, 7, 10])
    def test_linear_reproduction(self, L):
        # clamped cubic bases reproduce linear functions exactly
        times = np.linspace(0.0, 59.0, 60)
        basis = spline_basis(times, L)
        coef, *_ = np.linalg.lstsq(basis.b, times, rcond=None)
        np.testing.assert_allclose(basis.b @ coef, times, atol=1e-8)
        # endpoint coefficients then equal the endpoint values
        assert coef[0] == pytest.approx(times[0], abs=1e-8)
        assert coef[-1] == pytest.approx(times[-1], abs=1e-8)

    def test_errors(self):
        with pytest.raises(ParameterError):
            spline_basis(np.arange(10.0), 3)
        with pytest.raises(BasisError):
            spline_basis(np.arange(5.0), 6)
        with pytest.raises(ParameterError):
            spline_basis(np.array([0.0, 1.0, 1.0, 2.0]), 4)
        with pytest.raises(ShapeError):
            spline_basis(np.array([1.0]), 4)


class TestObservationTensor:
    def test_defaults_and_shape(self):
        y = np.zeros((3, 2, 1))
        d = ObservationTensor(y, np.zeros((2, 2)), [0.0, 1.0, 2.0], ("x",))
        assert d.site_ids == ("s0", "s1")
        assert d.shape == (3, 2, 1)

    def test_validation(self):
        good = dict(
            y=np.zeros((3, 2, 1)),
            sites=np.zeros((2, 2)),
            times=[0.0, 1.0, 2.0],
            index_names=("x",),
        )
        with pytest.raises(ShapeError):
            ObservationTensor(**{**good, "y": np.zeros((2, 2))})
        with pytest.raises(ShapeError):
            ObservationTensor(**{**good, "times": [0.0, 2.0, 1.0]})
        bad = np.zeros((3, 2, 1))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ShapeError):
            ObservationTensor(**{**good, "y": bad})
        with pytest.raises(ShapeError):
            ObservationTensor(**{**good, "index_names": ("x", "y")})


class TestMeanSurface:
    def test_matches_loop(self, rng):
        n, P, L, T = 3, 2, 5, 11
        beta = rng.standard_normal((n, P, L))
        basis = spline_basis(np.arange(float(T)), L)
        mu = mean_surface(beta, basis)
        assert mu.shape == (T, n, P)
        for t in range(T):
            for i in range(n):
                for p in range(P):
                    assert mu[t, i, p] == pytest.approx(beta[i, p] @ basis.b[t])

    def test_shape_mismatch(self, rng):
        basis = spline_basis(np.arange(10.0), 5)
        with pytest.raises(ShapeError):
            mean_surface(rng.standard_normal((2, 2, 4)), basis)


# frozen log-density values from independent double quadrature of the
# scale-mixture integral (absolute quadrature error < 3e-11)
UNI_TABLE = [
    # (y, location, scale_sq, skew, dof, log pdf)
    (0.3, 0.0, 1.0, 0.0, 5.0, -1.0221393434396882),
    (1.2, 0.5, 2.0, 1.5, 4.0, -1.5189540407142468),
    (-0.7, 0.0, 1.0, 2.0, 8.0, -2.4525415660966403),
    (3.5, 1.0, 0.5, -1.0, 3.0, -5.275717827698952),
    (0.0, 0.0, 1.0, 0.7, 1.0, -1.344117945828084),
]

MULTI_TABLE = [
    # (y, mu, sigma, skew, dof, log pdf)
    ([0.5, -0.2], [0.0, 0.0], [[1.0, 0.3], [0.3, 2.0]], [0.0, 0.0], 6.0,
     -2.365554607488398),
    ([0.5, -0.2], [0.1, -0.3], [[1.0, 0.3], [0.3, 2.0]], [1.0, 0.5], 6.0,
     -2.349426101836736),
    ([2.0, 1.0], [0.0, 0.0], [[1.0, 0.3], [0.3, 2.0]], [2.0, -1.0], 3.0,
     -3.7589756473388145),
    ([-1.0, 0.8], [0.5, 0.0], [[0.5, -0.2], [-0.2, 0.8]], [0.7, 0.7], 10.0,
     -4.760274290212641),
]


class TestSkewTUnivariate:
    @pytest.mark.parametrize("y,loc,s2,lam,a,want", UNI_TABLE)
    def test_quadrature_values(self, y, loc, s2, lam, a, want):
        p = SkewTParams(location=loc, scale_sq=s2, skew=lam, dof=a)
        assert skewt_logpdf_uni(y, p) == pytest.approx(want, abs=1e-10)

    def test_zero_skew_is_scaled_t(self):
        # with skew 0 the law is location + sqrt(scale_sq) * t(dof)
        y = np.linspace(-4, 4, 21)
        p = SkewTParams(location=0.3, scale_sq=2.5, skew=0.0, dof=7.0)
        ref = stats.t.logpdf(y, 7.0, loc=0.3, scale=math.sqrt(2.5))
        np.testing.assert_allclose(skewt_logpdf_uni(y, p), ref, atol=1e-12)

    def test_integrates_to_one(self):
        from scipy.integrate import quad

        p = SkewTParams(location=-0.5, scale_sq=1.3, skew=2.0, dof=4.0)
        total, err = quad(lambda v: math.exp(skewt_logpdf_uni(v, p)),
                          -np.inf, np.inf, limit=400)
        assert total == pytest.approx(1.0, abs=1e-7)

    def test_derived_parameters(self):
        p = SkewTParams(location=0.0, scale_sq=4.0, skew=3.0, dof=5.0)
        assert p.omega_sq == pytest.approx(13.0)
        assert p.lambda_star == pytest.approx(1.5)

    def test_rejects_bad_params(self):
        with pytest.raises(ParameterError):
            SkewTParams(location=0.0, scale_sq=0.0, skew=0.0, dof=2.0)
        with pytest.raises(ParameterError):
            SkewTParams(location=0.0, scale_sq=1.0, skew=0.0, dof=0.0)


class TestSkewTMultivariate:
    @pytest.mark.parametrize("y,mu,sigma,skew,a,want", MULTI_TABLE)
    def test_quadrature_values(self, y, mu, sigma, skew, a, want):
        got = skewt_logpdf_multi(
            np.array(y), np.array(mu), np.array(sigma), np.array(skew), a
        )
        assert got == pytest.approx(want, abs=1e-10)

    def test_zero_skew_matches_multivariate_t(self, rng):
        P, a = 3, 5.0
        sigma = rand_spd(rng, P)
        mu = rng.standard_normal(P)
        ys = rng.standard_normal((40, P))
        got = skewt_logpdf_multi(ys, mu, sigma, np.zeros(P), a)
        ref = stats.multivariate_t.logpdf(ys, loc=mu, shape=sigma, df=a)
        np.testing.assert_allclose(got, ref, atol=1e-10)

    def test_univariate_consistency(self):
        p = SkewTParams(location=0.4, scale_sq=1.7, skew=-0.8, dof=6.0)
        ys = np.linspace(-3, 3, 11)
        uni = skewt_logpdf_uni(ys, p)
        multi = skewt_logpdf_multi(
            ys[:, None], np.array([0.4]), np.array([[1.7]]), np.array([-0.8]), 6.0
        )
        np.testing.assert_allclose(multi, uni, atol=1e-12)

    def test_batched_equals_loop(self, rng):
        P = 2
        sigma = rand_spd(rng, P)
        skew = np.array([1.0, -0.5])
        ys = rng.standard_normal((4, 3, P))
        mu = rng.standard_normal((4, 3, P))
        got = skewt_logpdf_multi(ys, mu, sigma, skew, 4.0)
        assert got.shape == (4, 3)
        for t in range(4):
            for i in range(3):
                one = skewt_logpdf_multi(ys[t, i], mu[t, i], sigma, skew, 4.0)
                assert got[t, i] == pytest.approx(one, rel=1e-12)

    def test_shape_and_param_errors(self, rng):
        sigma = np.eye(2)
        with pytest.raises(ShapeError):
            skewt_logpdf_multi(np.zeros(3), np.zeros(3), sigma, np.zeros(2), 4.0)
        with pytest.raises(ShapeError):
            skewt_logpdf_multi(np.zeros(2), np.zeros(2), sigma, np.zeros(3), 4.0)
        with pytest.raises(ParameterError):
            skewt_logpdf_multi(np.zeros(2), np.zeros(2), sigma, np.zeros(2), -1.0)


class TestDataLogliks:
    def _setup(self, rng, dof):
        n, P, L, T = 3, 2, 4, 6
        sites = rng.uniform(0, 3, (n, 2))
        mat = MaternParams(rho=1.5, nu=0.8, gamma=0.9)
        sigma_s = build_spatial_corr(sites, mat)
        sigma_i = rand_spd(rng, P)
        sep = SeparableGaussian(sigma_s, sigma_i)
        y = rng.standard_normal((T, n, P))
        mu = rng.standard_normal((T, n, P))
        skew = np.array([0.8, -0.4]) if not math.isinf(dof) else np.zeros(P)
        return y, mu, skew, sep, sigma_i

    def test_pointwise_matches_per_cell_density(self, rng):
        y, mu, skew, sep, sigma_i = self._setup(rng, 5.0)
        out = pointwise_loglik(y, mu, skew, sigma_i, 5.0)
        assert out.shape == y.shape[:2]
        for t in range(y.shape[0]):
            for i in range(y.shape[1]):
                ref = skewt_logpdf_multi(y[t, i], mu[t, i], sigma_i, skew, 5.0)
                assert out[t, i] == pytest.approx(ref, rel=1e-12)

    def test_pointwise_gaussian_limit(self, rng):
        y, mu, skew, sep, sigma_i = self._setup(rng, math.inf)
        out = pointwise_loglik(y, mu, np.zeros(2), sigma_i, math.inf)
        for t in range(y.shape[0]):
            for i in range(y.shape[1]):
                ref = stats.multivariate_normal.logpdf(
                    y[t, i], mean=mu[t, i], cov=sigma_i
                )
                assert out[t, i] == pytest.approx(ref, rel=1e-10)

    def test_full_data_matches_dense_skewt(self, rng):
        y, mu, skew, sep, sigma_i = self._setup(rng, 4.0)
        T, n, P = y.shape
        got = full_data_loglik(y, mu, skew, sep, 4.0)
        dense_sigma = np.kron(sep.sigma_s, sigma_i)
        v = np.kron(np.ones(n), skew)
        ref = sum(
            skewt_logpdf_multi(
                y[t].reshape(-1), mu[t].reshape(-1), dense_sigma, v, 4.0
            )
            for t in range(T)
        )
        assert got == pytest.approx(ref, rel=1e-10)

    def test_full_data_gaussian_limit(self, rng):
        y, mu, skew, sep, sigma_i = self._setup(rng, math.inf)
        T, n, P = y.shape
        got = full_data_loglik(y, mu, np.zeros(P), sep, math.inf)
        dense_sigma = np.kron(sep.sigma_s, sigma_i)
        ref = sum(
            stats.multivariate_normal.logpdf(
                y[t].reshape(-1), mean=mu[t].reshape(-1), cov=dense_sigma
            )
            for t in range(T)
        )
        assert got == pytest.approx(ref, rel=1e-10)


class TestModelMoments:
    def _state(self, L=4, T=12):
        n, P = 3, 2
        rng = np.random.default_rng(99)
        beta = rng.standard_normal((n, P, L))
        return ChainState(
            beta=beta,
            mu_beta=np.zeros(P),
            skew=np.array([1.2, -0.6]),
            z_abs=np.ones(T),
            sigma2=np.ones(T),
            dof=7.0,
            index_cov=np.array([[1.0, 0.3], [0.3, 0.8]]),
            spline_cov=np.eye(L),
            matern=MaternParams(rho=2.0, nu=1.0, gamma=0.9),
        ), rng

    def test_against_monte_carlo(self):
        from skewtproc.simulate import simulate_dataset

        state, _ = self._state()
        T = 12
        times = np.arange(float(T))
        basis = spline_basis(times, 4)
        sites = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        means, cov = model_moments(state, basis, sites, (0, 1), (0, 1))
        rng = np.random.default_rng(3)
        reps = 40000
        acc_mean = np.zeros((T, 2))
        acc_cov = 0.0
        mu = mean_surface(state, basis)
        for _ in range(reps):
            d = simulate_dataset(state, sites, times, rng)
            acc_mean += np.column_stack([d.y[:, 0, 0], d.y[:, 1, 1]])
            r1 = d.y[:, 0, 0] - mu[:, 0, 0]
            r2 = d.y[:, 1, 1] - mu[:, 1, 1]
            acc_cov += float(r1 @ r2) / T
        acc_mean /= reps
        acc_cov /= reps
        # dof=7 moments exist; tolerance ~4 MC standard errors
        np.testing.assert_allclose(acc_mean, means, atol=0.05)
        assert acc_cov == pytest.approx(cov, abs=0.05)

    def test_mean_shift_formula(self):
        # E|Y - mu| factor: sqrt(a/pi) Gamma((a-1)/2) / Gamma(a/2)
        from scipy.special import gammaln as gl

        state, _ = self._state()
        basis = spline_basis(np.arange(12.0), 4)
        sites = np.zeros((3, 2))
        sites[1] = [1.0, 0.0]
        sites[2] = [0.0, 2.0]
        means, _ = model_moments(state, basis, sites, (0, 0), (0, 0))
        a = state.dof
        shift = math.sqrt(a / math.pi) * math.exp(gl((a - 1) / 2) - gl(a / 2))
        mu = mean_surface(state, basis)
        np.testing.assert_allclose(
            means[:, 0], mu[:, 0, 0] + state.skew[0] * shift, atol=1e-12
        )

    def test_low_dof_raises(self):
        state, _ = self._state()
        basis = spline_basis(np.arange(12.0), 4)
        sites = np.zeros((3, 2))
        state.dof = 1.0
        with pytest.raises(ParameterError):
            model_moments(state, basis, sites, (0, 1), (0, 1))
        state.dof = 2.0
        with pytest.raises(ParameterError):
            model_moments(state, basis, sites, (0, 1), (0, 1))


class TestChainStateValidate:
    def test_good_state_passes(self):
        state = ChainState(
            beta=np.zeros((2, 2, 4)),
            mu_beta=np.zeros(2),
            skew=np.zeros(2),
            z_abs=np.zeros(3),
            sigma2=np.ones(3),
            dof=5.0,
            index_cov=np.eye(2),
            spline_cov=np.eye(4),
            matern=MaternParams(1.0, 1.0, 0.9),
        )
        assert state.validate() is state
        assert (state.num_sites(), state.num_indexes(), state.num_funcs()) == (2, 2, 4)

    def test_bad_states_raise(self):
        def mk(**kw):
            base = dict(
                beta=np.zeros((2, 2, 4)),
                mu_beta=np.zeros(2),
                skew=np.zeros(2),
                z_abs=np.zeros(3),
                sigma2=np.ones(3),
                dof=5.0,
                index_cov=np.eye(2),
                spline_cov=np.eye(4),
                matern=MaternParams(1.0, 1.0, 0.9),
            )
            base.update(kw)
            return ChainState(**base)

        with pytest.raises(ShapeError):
            mk(mu_beta=np.zeros(3)).validate()
        with pytest.raises(ParameterError):
            mk(sigma2=np.array([1.0, -1.0, 1.0])).validate()
        with pytest.raises(ParameterError):
            mk(z_abs=np.array([0.0, -0.1, 0.0])).validate()
        with pytest.raises(ParameterError):
            mk(dof=0.0).validate()
        with pytest.raises(ParameterError):
            mk(index_cov=np.array([[1.0, 2.0], [2.0, 1.0]])).validate()
        with pytest.raises(ParameterError):
            mk(matern=None).validate()
