"""Model containers, spline mean surfaces, and skew-t marginal densities.

The observation model for a T x n x P data tensor is

    Y_t = mu_t + |z_t| (1_n (x) lambda) + sigma_t eps_t,

with mu_t = X_t beta a per-(site, index) cubic B-spline curve in time,
z_t ~ N(0, sigma_t^2), sigma_t^2 ~ IG(a/2, a/2), and
eps_t ~ N(0, sigma_s (x) sigma_i).  Marginalizing (z_t, sigma_t) makes each
Y_t an nP-variate skew-t vector; this module provides the corresponding
univariate and multivariate densities plus first and second moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln, stdtr

from .covariance import MaternParams, matern_correlation
from .errors import BasisError, ParameterError, ShapeError

__all__ = [
    "ObservationTensor",
    "SplineBasis",
    "ChainState",
    "SkewTParams",
    "spline_basis",
    "mean_surface",
    "skewt_logpdf_uni",
    "skewt_logpdf_multi",
    "pointwise_loglik",
    "full_data_loglik",
    "model_moments",
]


@dataclass(frozen=True)
class ObservationTensor:
    """Gridded multivariate space-time data.

    y : (T, n, P) float array, fully observed (no NaN).
    sites : (n, 2) coordinates in the distance units used throughout.
    times : (T,) strictly increasing observation times.
    index_names : length-P labels for the variable axis.
    site_ids : length-n labels, defaults to s0..s<n-1>.
    """

    y: np.ndarray
    sites: np.ndarray
    times: np.ndarray
    index_names: tuple
    site_ids: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        sites = np.asarray(self.sites, dtype=float)
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "index_names", tuple(self.index_names))
        if y.ndim != 3:
            raise ShapeError(f"y must be (T, n, P), got {y.shape}")
        T, n, P = y.shape
        if T < 2:
            raise ShapeError("need at least two times")
        if sites.shape != (n, 2):
            raise ShapeError(f"sites must be ({n}, 2), got {sites.shape}")
        if times.shape != (T,):
            raise ShapeError(f"times must be ({T},), got {times.shape}")
        if len(self.index_names) != P:
            raise ShapeError(f"need {P} index names, got {len(self.index_names)}")
        if not np.all(np.isfinite(y)):
            raise ShapeError("y contains non-finite values; the model needs complete data")
        if not np.all(np.isfinite(sites)) or not np.all(np.isfinite(times)):
            raise ShapeError("sites and times must be finite")
        if np.any(np.diff(times) <= 0):
            raise ShapeError("times must be strictly increasing")
        ids = tuple(self.site_ids) if self.site_ids else tuple(f"s{i}" for i in range(n))
        if len(ids) != n:
            raise ShapeError(f"need {n} site ids, got {len(ids)}")
        object.__setattr__(self, "site_ids", ids)

    @property
    def shape(self):
        return self.y.shape


@dataclass(frozen=True)
class SplineBasis:
    """Clamped cubic B-spline design over the observation times.

    b : (T, L) design matrix, rows summing to one.
    knots : full clamped knot vector on [0, 1].
    degree : spline degree (always 3 here).
    """

    b: np.ndarray
    knots: np.ndarray
    degree: int = 3

    @property
    def num_times(self):
        return self.b.shape[0]

    @property
    def num_funcs(self):
        return self.b.shape[1]


def spline_basis(times, num_funcs):
    """Clamped cubic B-spline basis evaluated at the given times.

    Times are affinely mapped to [0, 1]; interior knots are equally spaced.
    Clamping makes the fitted curve at the first (last) time equal the first
    (last) coefficient, which the trend summaries rely on.

    Raises BasisError when num_funcs > len(times) (ill posed) and
    ParameterError when num_funcs < 4 (cubic clamped minimum).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ShapeError("times must be a 1-d array with at least two entries")
    if np.any(np.diff(times) <= 0):
        raise ParameterError("times must be strictly increasing")
    L = int(num_funcs)
    if L < 4:
        raise ParameterError(f"need at least 4 basis functions for a cubic basis, got {L}")
    if L > times.size:
        raise BasisError(f"{L} basis functions with only {times.size} times is ill posed")
    x = (times - times[0]) / (times[-1] - times[0])
    interior = np.linspace(0.0, 1.0, L - 2)[1:-1]
    knots = np.concatenate([np.zeros(4), interior, np.ones(4)])
    design = BSpline.design_matrix(x, knots, 3, extrapolate=False).toarray()
    return SplineBasis(b=design, knots=knots)


@dataclass
class ChainState:
    """One full set of model parameters and latent variables.

    beta : (n, P, L) spline coefficients.
    mu_beta : (P,) coefficient-level means.
    skew : (P,) per-index skewness loadings (lambda).
    z_abs : (T,) nonnegative latent skew factors.
    sigma2 : (T,) positive latent scale mixers.
    dof : tail parameter a (math.inf for the Gaussian variant).
    index_cov : (P, P) SPD cross-index covariance.
    spline_cov : (L, L) SPD coefficient covariance.
    matern : MaternParams for the spatial factor.
    """

    beta: np.ndarray
    mu_beta: np.ndarray
    skew: np.ndarray
    z_abs: np.ndarray
    sigma2: np.ndarray
    dof: float
    index_cov: np.ndarray
    spline_cov: np.ndarray
    matern: MaternParams

    def validate(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 3:
            raise ShapeError(f"beta must be (n, P, L), got {beta.shape}")
        n, P, L = beta.shape
        checks = [
            ("mu_beta", self.mu_beta, (P,)),
            ("skew", self.skew, (P,)),
            ("index_cov", self.index_cov, (P, P)),
            ("spline_cov", self.spline_cov, (L, L)),
        ]
        for name, arr, shape in checks:
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} contains non-finite values")
        z = np.asarray(self.z_abs, dtype=float)
        s2 = np.asarray(self.sigma2, dtype=float)
        if z.shape != s2.shape or z.ndim != 1:
            raise ShapeError("z_abs and sigma2 must be equal-length 1-d arrays")
        if np.any(z < 0) or not np.all(np.isfinite(z)):
            raise ParameterError("z_abs must be nonnegative and finite")
        if np.any(s2 <= 0) or not np.all(np.isfinite(s2)):
            raise ParameterError("sigma2 must be positive and finite")
        if not (self.dof > 0):
            raise ParameterError(f"dof must be positive (math.inf allowed), got {self.dof}")
        for name, arr in (("index_cov", self.index_cov), ("spline_cov", self.spline_cov)):
            arr = np.asarray(arr, dtype=float)
            if not np.allclose(arr, arr.T, rtol=1e-8, atol=1e-10):
                raise ParameterError(f"{name} must be symmetric")
            if np.any(np.linalg.eigvalsh(arr) <= 0):
                raise ParameterError(f"{name} must be positive definite")
        if not isinstance(self.matern, MaternParams):
            raise ParameterError("matern must be a MaternParams instance")
        return self

    def num_sites(self):
        return self.beta.shape[0]

    def num_indexes(self):
        return self.beta.shape[1]

    def num_funcs(self):
        return self.beta.shape[2]


@dataclass(frozen=True)
class SkewTParams:
    """Univariate skew-t parameters: location, squared scale, skew shift, dof.

    The variable is location + |z| * skew + sigma * sqrt(scale_sq) * e with
    (z, e) standard normal and sigma^2 ~ IG(dof/2, dof/2).
    """

    location: float
    scale_sq: float
    skew: float
    dof: float

    def __post_init__(self):
        if not self.scale_sq > 0:
            raise ParameterError(f"scale_sq must be positive, got {self.scale_sq}")
        if not self.dof > 0:
            raise ParameterError(f"dof must be positive, got {self.dof}")

    @property
    def omega_sq(self):
        """Total squared scale of the symmetric t envelope."""
        return self.scale_sq + self.skew**2

    @property
    def lambda_star(self):
        """Standardized skewness skew / sqrt(scale_sq)."""
        return self.skew / math.sqrt(self.scale_sq)


def mean_surface(state, basis):
    """Fitted mean mu[t, i, p] = sum_l beta[i, p, l] b[t, l]."""
    b = basis.b if isinstance(basis, SplineBasis) else np.asarray(basis, dtype=float)
    beta = np.asarray(state.beta if isinstance(state, ChainState) else state, dtype=float)
    if beta.shape[-1] != b.shape[1]:
        raise ShapeError(
            f"beta has {beta.shape[-1]} spline weights but the basis has {b.shape[1]}"
        )
    return np.einsum("ipl,tl->tip", beta, b)


def _t_logpdf(x, dof):
    x = np.asarray(x, dtype=float)
    return (
        gammaln((dof + 1.0) / 2.0)
        - gammaln(dof / 2.0)
        - 0.5 * math.log(dof * math.pi)
        - (dof + 1.0) / 2.0 * np.log1p(x * x / dof)
    )


def _t_logcdf(x, dof):
    # stdtr handles fractional dof; cdf underflow is impossible at the
    # argument sizes that arise here, but guard the log anyway.
    c = stdtr(dof, np.asarray(x, dtype=float))
    return np.log(np.maximum(c, 1e-300))


def skewt_logpdf_uni(y, params):
    """Log density of the univariate skew-t in SkewTParams form.

    Vectorized over y.  With skew = 0 this reduces to a scaled t density.
    """
    if not isinstance(params, SkewTParams):
        params = SkewTParams(*params)
    y = np.asarray(y, dtype=float)
    omega = math.sqrt(params.omega_sq)
    x = (y - params.location) / omega
    a = params.dof
    lam = params.lambda_star
    core = _t_logpdf(x, a) - math.log(omega)
    tilt = _t_logcdf(lam * x * np.sqrt((a + 1.0) / (a + x * x)), a + 1.0)
    out = math.log(2.0) + core + tilt
    return float(out) if np.ndim(y) == 0 else out


def skewt_logpdf_multi(y, mean, sigma, skew, dof):
    """Log density of the P-variate skew-t vector.

    The vector is mean + |z| skew + s * chol(sigma) e with
    s^2 ~ IG(dof/2, dof/2), giving a t envelope with scale
    sigma + skew skew' and a univariate-t tilt.  Vectorized over leading
    axes of y.
    """
    y = np.asarray(y, dtype=float)
    mean = np.asarray(mean, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    skew = np.asarray(skew, dtype=float)
    P = sigma.shape[0]
    if sigma.shape != (P, P) or skew.shape != (P,):
        raise ShapeError("sigma must be (P, P) and skew (P,)")
    if y.shape[-1] != P:
        raise ShapeError(f"y trailing dimension must be {P}, got {y.shape}")
    if not dof > 0:
        raise ParameterError(f"dof must be positive, got {dof}")
    r = y - mean
    ci = cho_factor(sigma, lower=True)
    si_skew = cho_solve(ci, skew)
    c = float(skew @ si_skew)
    # rank-one woodbury: (sigma + skew skew')^{-1} r and its log det
    si_r = cho_solve(ci, r.reshape(-1, P).T).T.reshape(r.shape)
    w = np.einsum("...p,p->...", si_r, skew)
    quad = np.einsum("...p,...p->...", r, si_r) - w * w / (1.0 + c)
    logdet = 2.0 * float(np.sum(np.log(np.diag(ci[0])))) + math.log1p(c)
    a = dof
    core = (
        gammaln((a + P) / 2.0)
        - gammaln(a / 2.0)
        - P / 2.0 * math.log(a * math.pi)
        - 0.5 * logdet
        - (a + P) / 2.0 * np.log1p(quad / a)
    )
    tilt_arg = w / math.sqrt(1.0 + c) * np.sqrt((a + P) / (a + quad))
    out = math.log(2.0) + core + _t_logcdf(tilt_arg, a + P)
    return float(out) if out.ndim == 0 else out


def pointwise_loglik(y, mu, skew, index_cov, dof):
    """Per-(time, site) log density of the P-variate marginal law.

    Integrating the latent (z_t, sigma_t) out of one site's P-vector gives a
    P-variate skew-t with scale index_cov and shift skew (the spatial factor
    has unit diagonal, so it drops out of single-site marginals).  dof = inf
    gives the Gaussian limit (skew is then zero by construction).

    Returns a (T, n) array.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not math.isinf(dof):
        return skewt_logpdf_multi(y, mu, index_cov, skew, dof)
    P = y.shape[-1]
    r = y - mu
    ci = cho_factor(np.asarray(index_cov, dtype=float), lower=True)
    si_r = cho_solve(ci, r.reshape(-1, P).T).T.reshape(r.shape)
    quad = np.einsum("...p,...p->...", r, si_r)
    logdet = 2.0 * float(np.sum(np.log(np.diag(ci[0]))))
    return -0.5 * (P * math.log(2.0 * math.pi) + logdet + quad)


def full_data_loglik(y, mu, skew, sep, dof):
    """Joint log density of the whole (T, n, P) tensor, latents integrated out.

    Each time slice is an nP-variate skew-t with t-envelope scale
    sigma_s (x) sigma_i + v v', v = 1_n (x) skew; the rank-one structure is
    exploited so only the per-factor solves are needed.  dof = inf gives the
    Gaussian limit.
    """
    from .covariance import factor_solve_axis

    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    T, n, P = y.shape
    d = n * P
    r = y - mu
    a = factor_solve_axis(sep.s, r, 1)
    a = factor_solve_axis(sep.i, a, 2)
    quad = np.einsum("tnp,tnp->t", r, a)
    ld = P * sep.s.logdet + n * sep.i.logdet
    if math.isinf(dof):
        return float(-0.5 * (T * d * math.log(2.0 * math.pi) + T * ld + quad.sum()))
    skew = np.asarray(skew, dtype=float)
    ilam = sep.i.solve(skew)
    c = sep.s.ones_quad * float(skew @ ilam)
    # w_t = v' Sigma^{-1} r_t with v = 1_n (x) skew and a = Sigma^{-1} r
    w = np.einsum("tnp,p->t", a, skew)
    quad_eff = quad - w * w / (1.0 + c)
    ld_eff = ld + math.log1p(c)
    core = (
        gammaln((dof + d) / 2.0)
        - gammaln(dof / 2.0)
        - d / 2.0 * math.log(dof * math.pi)
        - 0.5 * ld_eff
        - (dof + d) / 2.0 * np.log1p(quad_eff / dof)
    )
    tilt = _t_logcdf(w / math.sqrt(1.0 + c) * np.sqrt((dof + d) / (dof + quad_eff)), dof + d)
    return float(np.sum(math.log(2.0) + core + tilt))


def _mean_shift_coef(dof):
    """E|skew-t residual| factor: sqrt(dof/pi) Gamma((dof-1)/2) / Gamma(dof/2)."""
    if math.isinf(dof):
        return math.sqrt(2.0 / math.pi)
    if dof <= 1.0:
        raise ParameterError(f"mean undefined for dof <= 1, got {dof}")
    return math.sqrt(dof / math.pi) * math.exp(gammaln((dof - 1.0) / 2.0) - gammaln(dof / 2.0))


def model_moments(state, basis, sites, site_pair, index_pair):
    """Mean curves and the second moment about the mean surface for one pair.

    Parameters
    ----------
    state : ChainState
    basis : SplineBasis
    sites : (n, 2) coordinates (needed for the inter-site distance).
    site_pair : (i, j) site indexes.
    index_pair : (p, q) variable indexes.

    Returns
    -------
    means : (T, 2) array; column k is E[Y_t] at (site_pair[k], index_pair[k]),
        i.e. the fitted mean plus the skew shift skew_p * E|skew-t factor|.
    cov : float; E[(Y1 - mu1)(Y2 - mu2)] about the fitted means,
        dof/(dof-2) * (skew_p skew_q + index_cov[p, q] r(h)).  Note this is
        a moment about the location, not the central covariance.

    Raises ParameterError when dof <= 1 (mean) or dof <= 2 (second moment).
    """
    i, j = site_pair
    p, q = index_pair
    sites = np.asarray(sites, dtype=float)
    mu = mean_surface(state, basis)
    shift = _mean_shift_coef(state.dof)
    skew = np.asarray(state.skew, dtype=float)
    means = np.column_stack([mu[:, i, p] + skew[p] * shift, mu[:, j, q] + skew[q] * shift])
    if math.isinf(state.dof):
        tail = 1.0
    elif state.dof <= 2.0:
        raise ParameterError(f"second moment undefined for dof <= 2, got {state.dof}")
    else:
        tail = state.dof / (state.dof - 2.0)
    h = float(np.hypot(*(sites[i] - sites[j])))
    r = matern_correlation(h, state.matern)
    cov = tail * (skew[p] * skew[q] + np.asarray(state.index_cov)[p, q] * r)
    return means, float(cov)
