"""Exact MCMC for the skew-t process: Gibbs blocks, MH steps, chain driver.

Every update is conditionally conjugate except the Matern range/smoothness
pair and the nugget proportion, which use random-walk Metropolis on
transformed scales with window-based step adaptation during burn-in.

Updates never materialize a dense Kronecker covariance; the largest matrix
factorized per sweep has dimension max(n, P, L).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit, log_ndtr, logit, ndtri_exp
from scipy.stats import invwishart

from .covariance import (
    MaternParams,
    SeparableGaussian,
    build_spatial_corr,
    factor_solve_axis,
    precision_chol,
    precision_noise,
    precision_solve,
)
from .errors import FactorizationError, ParameterError, ShapeError
from .model import (
    ChainState,
    ObservationTensor,
    SplineBasis,
    full_data_loglik,
    mean_surface,
    pointwise_loglik,
)

# SplineBasis is accepted anywhere a raw (T, L) design array is; _resolve
# normalizes both data and basis arguments.

__all__ = [
    "PriorConfig",
    "ChainConfig",
    "StepSizes",
    "PosteriorSamples",
    "UnivariateSamples",
    "gibbs_beta",
    "gibbs_mu_beta",
    "gibbs_lambda",
    "gibbs_z",
    "gibbs_sigma2",
    "gibbs_a",
    "gibbs_sigma_i",
    "gibbs_sigma_b",
    "mh_rho_nu",
    "mh_gamma",
    "adapt_steps",
    "initialize_state",
    "run_chain",
    "gaussian_loglik",
    "MODEL_VARIANTS",
]

MODEL_VARIANTS = ("mstp", "mtp", "mgp", "stp", "tp", "gp")
_UNIVARIATE = {"stp": "mstp", "tp": "mtp", "gp": "mgp"}

# third central moment of |N(0,1)|, used by the moment-based skew start
_HALF_NORMAL_M3 = math.sqrt(2.0 / math.pi) * (4.0 / math.pi - 1.0)


def _default_a_grid(a_max=20.0):
    # 0.1-spaced grid ending at a_max
    k = int(round(a_max * 10.0))
    return np.round(np.arange(1, k + 1) * 0.1, 10)


@dataclass
class PriorConfig:
    """Hyperparameters of every prior layer.

    rho_max is the upper end of the uniform range prior and must be supplied
    (typically the maximum pairwise site distance).
    """

    rho_max: float
    mu_beta_sd: float = 100.0
    lambda_sd: float = 10.0
    iw_df: float = 0.01
    iw_scale: float = 0.01
    log_nu_mean: float = -1.2
    log_nu_sd: float = 1.0
    a_grid: np.ndarray = field(default_factory=_default_a_grid)

    def __post_init__(self):
        self.a_grid = np.asarray(self.a_grid, dtype=float)
        if not (self.rho_max > 0 and math.isfinite(self.rho_max)):
            raise ParameterError(f"rho_max must be positive and finite, got {self.rho_max}")
        for name in ("mu_beta_sd", "lambda_sd", "iw_df", "iw_scale", "log_nu_sd"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.a_grid.ndim != 1 or self.a_grid.size < 1:
            raise ParameterError("a_grid must be a nonempty 1-d array")
        if np.any(self.a_grid <= 0) or np.any(np.diff(self.a_grid) <= 0):
            raise ParameterError("a_grid must be positive and strictly increasing")


@dataclass
class ChainConfig:
    """MCMC schedule: total iterations, burn-in, thinning, seed, adaptation."""

    iters: int = 20000
    burn_in: int = 10000
    thin: int = 5
    seed: int = 0
    adapt_window: int = 200

    def __post_init__(self):
        if self.iters < 1:
            raise ParameterError("iters must be positive")
        if not (0 <= self.burn_in < self.iters):
            raise ParameterError("burn_in must satisfy 0 <= burn_in < iters")
        if self.thin < 1:
            raise ParameterError("thin must be >= 1")
        if (self.iters - self.burn_in) // self.thin < 1:
            raise ParameterError("schedule keeps no draws")
        if self.adapt_window < 1:
            raise ParameterError("adapt_window must be >= 1")

    @property
    def n_kept(self):
        return (self.iters - self.burn_in) // self.thin


@dataclass(frozen=True)
class StepSizes:
    """Random-walk step sizes on the transformed scales."""

    rho: float = 0.5
    nu: float = 0.5
    gamma: float = 0.5


def adapt_steps(accept_history, step_sizes, window):
    """Scale step sizes from the trailing window of acceptance flags.

    accept_history maps step name ("rho_nu", "gamma") to a sequence of
    booleans.  Rates above 0.5 widen the step by 1.2, below 0.3 narrow it by
    0.8.  Returns a new StepSizes.
    """
    updates = {}
    for key, names in (("rho_nu", ("rho", "nu")), ("gamma", ("gamma",))):
        hist = accept_history.get(key, ())
        recent = np.asarray(hist[-window:], dtype=float)
        if recent.size == 0:
            continue
        rate = float(recent.mean())
        if rate > 0.5:
            factor = 1.2
        elif rate < 0.3:
            factor = 0.8
        else:
            continue
        for n in names:
            updates[n] = getattr(step_sizes, n) * factor
    return dc_replace(step_sizes, **updates) if updates else step_sizes


# ---------------------------------------------------------------------------
# helpers


def _resolve(data, basis):
    y = data.y if isinstance(data, ObservationTensor) else np.asarray(data, dtype=float)
    b = basis.b if isinstance(basis, SplineBasis) else np.asarray(basis, dtype=float)
    return y, b


def _sep_from_state(state, sites):
    sigma_s = build_spatial_corr(sites, state.matern)
    return SeparableGaussian(sigma_s, state.index_cov, state.spline_cov)


def _require_sep(state, data, sep):
    if sep is not None:
        return sep
    if not isinstance(data, ObservationTensor):
        raise ShapeError("need an ObservationTensor (for site coordinates) or an explicit sep")
    return _sep_from_state(state, data.sites)


def _batch_quadform(sep, resid):
    """(T,) quadratic forms r_t' (sigma_s (x) sigma_i)^{-1} r_t for (T, n, P) resid."""
    a = factor_solve_axis(sep.s, resid, 1)
    a = factor_solve_axis(sep.i, a, 2)
    return np.einsum("tnp,tnp->t", resid, a)


def truncnorm_positive(rng, mean, sd):
    """Draws from N(mean, sd^2) conditioned on (0, inf), vectorized.

    Inverse-CDF in log space: stable even when mean/sd is far below zero.
    Consumes one uniform per draw.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    u = rng.random(mean.shape)
    # survival inversion: x = mean + sd * q, q = -ndtri(exp(log u + log Phi(mean/sd)))
    q = -ndtri_exp(np.log(u) + log_ndtr(mean / sd))
    return np.maximum(mean + sd * q, 0.0)


def gaussian_loglik(y, mu, z_abs, skew, sigma2, sep):
    """Log density of the data given all latents (the Gaussian layer).

    y, mu : (T, n, P); covariance per time is sigma2_t * sigma_s (x) sigma_i.
    """
    T, n, P = y.shape
    resid = y - mu - z_abs[:, None, None] * skew[None, None, :]
    quad = _batch_quadform(sep, resid)
    ld = P * sep.s.logdet + n * sep.i.logdet
    return -0.5 * (
        n * P * float(np.sum(np.log(2.0 * math.pi * sigma2)))
        + T * ld
        + float(np.sum(quad / sigma2))
    )


# ---------------------------------------------------------------------------
# Gibbs blocks


def gibbs_beta(state, data, basis, priors, rng, sep=None):
    """Draw the (n, P, L) spline coefficients from their full conditional.

    The conditional factors as N(mean, sigma_s (x) sigma_i (x) H^{-1}) with
    H = sum_t x_t x_t' / sigma_t^2 + sigma_b^{-1}; only H (L x L) is ever
    factorized.  Noise consumption: one standard normal (n, P, L) tensor.
    """
    y, b = _resolve(data, basis)
    sep = _require_sep(state, data, sep)
    T, n, P = y.shape
    L = b.shape[1]
    w = 1.0 / np.asarray(state.sigma2, dtype=float)
    g = np.einsum("t,tl,tm->lm", w, b, b)
    sb_inv = sep.b.solve(np.eye(L))
    h = g + sb_inv
    h = 0.5 * (h + h.T)
    ch = precision_chol(h, "spline-precision")
    resid = y - state.z_abs[:, None, None] * state.skew[None, None, :]
    mx = precision_solve(ch, b.T)  # (L, T): H^{-1} x_t columns
    mean = np.einsum("tnp,lt->npl", resid * w[:, None, None], mx)
    u = precision_solve(ch, sb_inv @ np.ones(L))
    mean += state.mu_beta[None, :, None] * u[None, None, :]
    noise = rng.standard_normal((n, P, L))
    noise = np.einsum("ij,jpl->ipl", sep.s.chol, noise)
    noise = np.einsum("pq,iql->ipl", sep.i.chol, noise)
    flat = noise.reshape(n * P, L)
    noise = solve_triangular(ch.T, flat.T, lower=False).T.reshape(n, P, L)
    return mean + noise


def gibbs_mu_beta(state, priors, rng, sep=None, sites=None):
    """Draw the (P,) coefficient-level mean from its Gaussian conditional."""
    if sep is None:
        sep = _sep_from_state(state, sites)
    P = state.beta.shape[1]
    c = sep.s.ones_quad * sep.b.ones_quad
    ii = sep.i.solve(np.eye(P))
    prec = c * ii + np.eye(P) / priors.mu_beta_sd**2
    m = np.einsum("i,ipl,l->p", sep.s.ones_solve, state.beta, sep.b.ones_solve)
    rhs = ii @ m
    ch = precision_chol(0.5 * (prec + prec.T), "mean-precision")
    return precision_solve(ch, rhs) + precision_noise(ch, rng)


def gibbs_lambda(state, data, basis, priors, rng, sep=None, mu=None):
    """Draw the (P,) skewness loadings from their Gaussian conditional."""
    y, b = _resolve(data, basis)
    sep = _require_sep(state, data, sep)
    if mu is None:
        mu = mean_surface(state, basis)
    P = y.shape[2]
    w = state.z_abs**2 / state.sigma2
    ii = sep.i.solve(np.eye(P))
    prec = sep.s.ones_quad * float(np.sum(w)) * ii + np.eye(P) / priors.lambda_sd**2
    resid = y - mu
    v = np.einsum("t,tnp,n->p", state.z_abs / state.sigma2, resid, sep.s.ones_solve)
    rhs = ii @ v
    ch = precision_chol(0.5 * (prec + prec.T), "skew-precision")
    return precision_solve(ch, rhs) + precision_noise(ch, rng)


def gibbs_z(state, data, basis, rng, sep=None, mu=None):
    """Draw the (T,) latent skew factors from truncated normals.

    Conditional: N(m_t, sigma2_t / (1 + c)) on (0, inf) with
    c = (1' sigma_s^{-1} 1)(skew' sigma_i^{-1} skew); the conditional mean
    does not involve sigma2_t (it cancels between precision and rhs).
    """
    y, b = _resolve(data, basis)
    sep = _require_sep(state, data, sep)
    if mu is None:
        mu = mean_surface(state, basis)
    ilam = sep.i.solve(np.asarray(state.skew, dtype=float))
    c = sep.s.ones_quad * float(state.skew @ ilam)
    resid = y - mu
    m = np.einsum("n,tnp,p->t", sep.s.ones_solve, resid, ilam) / (1.0 + c)
    sd = np.sqrt(state.sigma2 / (1.0 + c))
    return truncnorm_positive(rng, m, sd)


def _sigma2_shape_rate(state, y, sep, mu):
    T, n, P = y.shape
    resid = y - mu - state.z_abs[:, None, None] * state.skew[None, None, :]
    quad = _batch_quadform(sep, resid)
    a = state.dof
    shape = (a + n * P + 1.0) / 2.0
    rate = (a + quad + state.z_abs**2) / 2.0
    return shape, rate


def gibbs_sigma2(state, data, basis, rng, sep=None, mu=None):
    """Draw the (T,) scale mixers from inverse-gamma conditionals."""
    y, b = _resolve(data, basis)
    sep = _require_sep(state, data, sep)
    if mu is None:
        mu = mean_surface(state, basis)
    shape, rate = _sigma2_shape_rate(state, y, sep, mu)
    return rate / rng.gamma(shape, 1.0, size=rate.shape)


def _a_log_weights(sigma2, a_grid):
    T = sigma2.size
    if T == 0:
        return np.zeros(a_grid.size)
    s_log = float(np.sum(np.log(sigma2)))
    s_inv = float(np.sum(1.0 / sigma2))
    half = a_grid / 2.0
    from scipy.special import gammaln

    return T * (half * np.log(half) - gammaln(half)) - (half + 1.0) * s_log - half * s_inv


def gibbs_a(state, priors, rng):
    """Draw the tail parameter from its discrete-uniform-grid conditional."""
    logw = _a_log_weights(np.asarray(state.sigma2, dtype=float), priors.a_grid)
    logw = logw - logw.max()
    p = np.exp(logw)
    p /= p.sum()
    return float(rng.choice(priors.a_grid, p=p))


def _sigma_i_df_scale(state, y, priors, sep, mu):
    T, n, P = y.shape
    L = state.beta.shape[2]
    resid = y - mu - state.z_abs[:, None, None] * state.skew[None, None, :]
    a = factor_solve_axis(sep.s, resid, 1)
    data_term = np.einsum("t,tnp,tnq->pq", 1.0 / state.sigma2, resid, a)
    d = state.beta - state.mu_beta[None, :, None]
    e = factor_solve_axis(sep.s, d, 0)
    e = factor_solve_axis(sep.b, e, 2)
    prior_term = np.einsum("ipl,iql->pq", d, e)
    df = priors.iw_df + n * T + n * L
    scale = priors.iw_scale * np.eye(P) + data_term + prior_term
    return df, 0.5 * (scale + scale.T)


def gibbs_sigma_i(state, data, basis, priors, rng, sep=None, mu=None):
    """Draw the (P, P) cross-index covariance from its inverse-Wishart conditional."""
    y, b = _resolve(data, basis)
    sep = _require_sep(state, data, sep)
    if mu is None:
        mu = mean_surface(state, basis)
    df, scale = _sigma_i_df_scale(state, y, priors, sep, mu)
    draw = invwishart.rvs(df, scale, random_state=rng)
    return np.atleast_2d(draw)


def _sigma_b_df_scale(state, priors, sep):
    n, P, L = state.beta.shape
    d = state.beta - state.mu_beta[None, :, None]
    e = factor_solve_axis(sep.s, d, 0)
    e = factor_solve_axis(sep.i, e, 1)
    term = np.einsum("ipl,ipm->lm", d, e)
    df = priors.iw_df + n * P
    scale = priors.iw_scale * np.eye(L) + term
    return df, 0.5 * (scale + scale.T)


def gibbs_sigma_b(state, priors, rng, sep=None, sites=None):
    """Draw the (L, L) coefficient covariance from its inverse-Wishart conditional."""
    if sep is None:
        sep = _sep_from_state(state, sites)
    n, P, L = state.beta.shape
    df, scale = _sigma_b_df_scale(state, priors, sep)
    # a margin of one above the propriety boundary keeps the Bartlett
    # chi-square dofs away from zero, where draws overflow on inversion
    if df < L:
        raise ParameterError(
            f"coefficient-covariance conditional is too weakly identified: "
            f"df = {df:.2f} < L = {L}; need iw_df + n*P >= L"
        )
    draw = invwishart.rvs(df, scale, random_state=rng)
    return np.atleast_2d(draw)


# ---------------------------------------------------------------------------
# Metropolis-Hastings blocks


def _matern_proposal_ok(rho, nu, rho_max):
    return (
        math.isfinite(rho)
        and 0.0 < rho < rho_max
        and math.isfinite(nu)
        and nu > 0.0
    )


def _mh_matern(state, data, priors, rng, step_sizes, sep=None, mu=None):
    """Joint range/smoothness update.  Returns (accepted, params, sep)."""
    cur = state.matern
    d = priors.rho_max
    r_t = logit(cur.rho / d) + step_sizes.rho * rng.standard_normal()
    nu_t = math.log(cur.nu) + step_sizes.nu * rng.standard_normal()
    rho_c = d * float(expit(r_t))
    nu_c = math.exp(nu_t)
    if not _matern_proposal_ok(rho_c, nu_c, d):
        return False, cur, sep
    log_ratio = (
        -((nu_t - priors.log_nu_mean) ** 2 - (math.log(cur.nu) - priors.log_nu_mean) ** 2)
        / (2.0 * priors.log_nu_sd**2)
    )
    # logit-scale random walk: Jacobian rho (d - rho) candidate over current
    log_ratio += math.log(rho_c * (d - rho_c)) - math.log(cur.rho * (d - cur.rho))
    cand = MaternParams(rho=rho_c, nu=nu_c, gamma=cur.gamma)
    cand_sep = sep
    if data is not None:
        y = data.y
        if sep is None or mu is None:
            raise ShapeError("internal matern update needs sep and mu")
        try:
            cand_sep = sep.replace(sigma_s=build_spatial_corr(data.sites, cand))
        except FactorizationError:
            return False, cur, sep
        log_ratio += gaussian_loglik(y, mu, state.z_abs, state.skew, state.sigma2, cand_sep)
        log_ratio -= gaussian_loglik(y, mu, state.z_abs, state.skew, state.sigma2, sep)
    if math.log(rng.random()) < log_ratio:
        return True, cand, cand_sep
    return False, cur, sep


def mh_rho_nu(state, data, basis, priors, rng, step_sizes, sep=None, mu=None):
    """Metropolis update of (rho, nu); data=None targets the prior alone.

    Returns (accepted, MaternParams).
    """
    if data is not None:
        sep = _require_sep(state, data, sep)
        if mu is None:
            mu = mean_surface(state, basis)
    accepted, params, _ = _mh_matern(state, data, priors, rng, step_sizes, sep=sep, mu=mu)
    return accepted, params


def _mh_nugget(state, data, priors, rng, step_sizes, sep=None, mu=None):
    """Nugget-proportion update on the logit scale.  Returns (accepted, params, sep)."""
    cur = state.matern
    g_t = logit(cur.gamma) + step_sizes.gamma * rng.standard_normal()
    gamma_c = float(expit(g_t))
    if not (0.0 < gamma_c < 1.0):
        return False, cur, sep
    log_ratio = math.log(gamma_c * (1.0 - gamma_c)) - math.log(cur.gamma * (1.0 - cur.gamma))
    cand = MaternParams(rho=cur.rho, nu=cur.nu, gamma=gamma_c)
    cand_sep = sep
    if data is not None:
        y = data.y
        if sep is None or mu is None:
            raise ShapeError("internal nugget update needs sep and mu")
        try:
            cand_sep = sep.replace(sigma_s=build_spatial_corr(data.sites, cand))
        except FactorizationError:
            return False, cur, sep
        log_ratio += gaussian_loglik(y, mu, state.z_abs, state.skew, state.sigma2, cand_sep)
        log_ratio -= gaussian_loglik(y, mu, state.z_abs, state.skew, state.sigma2, sep)
    if math.log(rng.random()) < log_ratio:
        return True, cand, cand_sep
    return False, cur, sep


def mh_gamma(state, data, basis, priors, rng, step_sizes, sep=None, mu=None):
    """Metropolis update of the nugget proportion; data=None targets the prior.

    Returns (accepted, MaternParams).
    """
    if data is not None:
        sep = _require_sep(state, data, sep)
        if mu is None:
            mu = mean_surface(state, basis)
    accepted, params, _ = _mh_nugget(state, data, priors, rng, step_sizes, sep=sep, mu=mu)
    return accepted, params


# ---------------------------------------------------------------------------
# chain driver


def initialize_state(data, basis, priors, variant="mstp"):
    """Deterministic starting state: per-series ridge fits and neutral latents.

    For skew variants the start for lambda comes from residual third moments:
    the half-normal shift contributes 0.218 * lambda^3 to the third central
    moment, so the cube root recovers the sign and a rough scale.  Starting
    on the correct side matters because the reflected mode (lambda negated,
    latents re-adapted) is a local trap that single chains rarely escape.
    """
    y, b = _resolve(data, basis)
    T, n, P = y.shape
    L = b.shape[1]
    gram = b.T @ b
    ridge = gram + 1e-6 * (np.trace(gram) / L) * np.eye(L)
    proj = np.linalg.solve(ridge, b.T)  # (L, T)
    beta = np.einsum("lt,tnp->npl", proj, y)
    mu_beta = beta.mean(axis=(0, 2))
    resid = (y - np.einsum("ipl,tl->tip", beta, b)).reshape(T * n, P)
    index_cov = np.cov(resid, rowvar=False).reshape(P, P)
    index_cov = index_cov + 1e-6 * (np.trace(index_cov) / P + 1e-8) * np.eye(P)
    gaussian = variant in ("mgp", "gp")
    skew = np.zeros(P)
    if variant in ("mstp", "stp"):
        m3 = ((resid - resid.mean(axis=0)) ** 3).mean(axis=0)
        skew = np.clip(np.cbrt(m3 / _HALF_NORMAL_M3), -3.0, 3.0)
    return ChainState(
        beta=beta,
        mu_beta=mu_beta,
        skew=skew,
        z_abs=np.zeros(T) if gaussian else np.full(T, math.sqrt(2.0 / math.pi)),
        sigma2=np.ones(T),
        dof=math.inf if gaussian else 10.0,
        index_cov=index_cov,
        spline_cov=np.eye(L),
        matern=MaternParams(rho=priors.rho_max / 10.0, nu=0.5, gamma=0.5),
    )


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws plus per-draw likelihood summaries.

    beta            (K, n, P, L)
    mu_beta, skew   (K, P)
    z_abs, sigma2   (K, T)
    dof, rho, nu, gamma, deviance  (K,)
    index_cov       (K, P, P)
    spline_cov      (K, L, L)
    pointwise_ll    (K, T, n): per-draw site-time log densities (P-variate).
    deviance_at_mean: deviance at the posterior mean state (dof at its mode).
    accept          maps step name to the full per-iteration flag array.
    """

    variant: str
    config: ChainConfig
    dims: tuple  # (T, n, P, L)
    beta: np.ndarray
    mu_beta: np.ndarray
    skew: np.ndarray
    z_abs: np.ndarray
    sigma2: np.ndarray
    dof: np.ndarray
    index_cov: np.ndarray
    spline_cov: np.ndarray
    rho: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    pointwise_ll: np.ndarray
    deviance: np.ndarray
    deviance_at_mean: float
    accept: dict

    def __len__(self):
        return self.beta.shape[0]

    def state(self, k):
        """Reconstruct the k-th retained draw as a ChainState."""
        return ChainState(
            beta=self.beta[k],
            mu_beta=self.mu_beta[k],
            skew=self.skew[k],
            z_abs=self.z_abs[k],
            sigma2=self.sigma2[k],
            dof=float(self.dof[k]),
            index_cov=self.index_cov[k],
            spline_cov=self.spline_cov[k],
            matern=MaternParams(rho=float(self.rho[k]), nu=float(self.nu[k]), gamma=float(self.gamma[k])),
        )

    def mean_state(self):
        """Posterior mean of continuous parameters; dof at its posterior mode."""
        if math.isinf(float(self.dof[0])):
            dof = math.inf
        else:
            vals, counts = np.unique(self.dof, return_counts=True)
            dof = float(vals[np.argmax(counts)])
        return ChainState(
            beta=self.beta.mean(axis=0),
            mu_beta=self.mu_beta.mean(axis=0),
            skew=self.skew.mean(axis=0),
            z_abs=self.z_abs.mean(axis=0),
            sigma2=self.sigma2.mean(axis=0),
            dof=dof,
            index_cov=self.index_cov.mean(axis=0),
            spline_cov=self.spline_cov.mean(axis=0),
            matern=MaternParams(
                rho=float(self.rho.mean()),
                nu=float(self.nu.mean()),
                gamma=float(self.gamma.mean()),
            ),
        )

    def acceptance_rates(self):
        return {k: float(np.mean(v)) for k, v in self.accept.items() if len(v)}


@dataclass
class UnivariateSamples:
    """P independent single-index chains presented with a combined interface.

    pointwise_ll and deviance sum across indexes (the product model's joint
    density); beta draws stack along the index axis so trend summaries work
    unchanged.  Draw k pairs the k-th draw of each chain, which is valid
    because the chains are mutually independent.
    """

    variant: str
    config: ChainConfig
    chains: list

    @property
    def dims(self):
        T, n, _, L = self.chains[0].dims
        return (T, n, len(self.chains), L)

    @property
    def beta(self):
        return np.concatenate([c.beta for c in self.chains], axis=2)

    @property
    def pointwise_ll(self):
        out = self.chains[0].pointwise_ll.copy()
        for c in self.chains[1:]:
            out += c.pointwise_ll
        return out

    @property
    def deviance(self):
        return np.sum([c.deviance for c in self.chains], axis=0)

    @property
    def deviance_at_mean(self):
        return float(np.sum([c.deviance_at_mean for c in self.chains]))

    def __len__(self):
        return len(self.chains[0])

    def acceptance_rates(self):
        out = {}
        for p, c in enumerate(self.chains):
            for k, v in c.acceptance_rates().items():
                out[f"{k}[{p}]"] = v
        return out


def _sweep(state, data, basis, priors, rng, steps, variant, sep, mu):
    """One full scan over all blocks; mutates state, returns (sep, mu, accepts)."""
    skew_on = variant == "mstp"
    gaussian = variant == "mgp"

    state.beta = gibbs_beta(state, data, basis, priors, rng, sep=sep)
    mu = mean_surface(state, basis)
    state.mu_beta = gibbs_mu_beta(state, priors, rng, sep=sep)
    if skew_on:
        state.skew = gibbs_lambda(state, data, basis, priors, rng, sep=sep, mu=mu)
    if not gaussian:
        state.z_abs = gibbs_z(state, data, basis, rng, sep=sep, mu=mu)
        state.sigma2 = gibbs_sigma2(state, data, basis, rng, sep=sep, mu=mu)
        state.dof = gibbs_a(state, priors, rng)
    new_si = gibbs_sigma_i(state, data, basis, priors, rng, sep=sep, mu=mu)
    state.index_cov = new_si
    sep = sep.replace(sigma_i=new_si)
    new_sb = gibbs_sigma_b(state, priors, rng, sep=sep)
    state.spline_cov = new_sb
    sep = sep.replace(sigma_b=new_sb)
    acc_m, params, sep = _mh_matern(state, data, priors, rng, steps, sep=sep, mu=mu)
    state.matern = params
    acc_g, params, sep = _mh_nugget(state, data, priors, rng, steps, sep=sep, mu=mu)
    state.matern = params
    return sep, mu, {"rho_nu": acc_m, "gamma": acc_g}


def run_chain(data, basis, priors, config, variant="mstp", rng=None, init=None):
    """Run the full sampler and return thinned posterior draws.

    Parameters
    ----------
    data : ObservationTensor
    basis : SplineBasis
    priors : PriorConfig
    config : ChainConfig
    variant : one of mstp / mtp / mgp (joint multivariate fits) or
        stp / tp / gp (P independent single-index fits, combined).
    rng : optional Generator; defaults to default_rng(config.seed).
    init : optional ChainState override for the starting point.

    Returns PosteriorSamples, or UnivariateSamples for the univariate variants.
    """
    if variant not in MODEL_VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; expected one of {MODEL_VARIANTS}")
    if variant in _UNIVARIATE:
        sub = _UNIVARIATE[variant]
        T, n, P = data.y.shape
        seeds = np.random.SeedSequence(config.seed).spawn(P)
        chains = []
        for p in range(P):
            sub_data = ObservationTensor(
                y=data.y[:, :, p : p + 1],
                sites=data.sites,
                times=data.times,
                index_names=(data.index_names[p],),
                site_ids=data.site_ids,
            )
            chains.append(
                run_chain(
                    sub_data,
                    basis,
                    priors,
                    config,
                    variant=sub,
                    rng=np.random.default_rng(seeds[p]),
                )
            )
        return UnivariateSamples(variant=variant, config=config, chains=chains)

    if rng is None:
        rng = np.random.default_rng(config.seed)
    y = data.y
    T, n, P = y.shape
    L = basis.b.shape[1]
    if priors.iw_df + n * P < L:
        raise ParameterError(
            "coefficient-covariance conditional is too weakly identified "
            f"at this size: iw_df + n*P = {priors.iw_df + n * P:.2f} < L = {L}"
        )
    state = initialize_state(data, basis, priors, variant) if init is None else init
    state.validate()
    sep = _sep_from_state(state, data.sites)
    steps = StepSizes()
    mu = mean_surface(state, basis)

    K = config.n_kept
    out = PosteriorSamples(
        variant=variant,
        config=config,
        dims=(T, n, P, L),
        beta=np.empty((K, n, P, L)),
        mu_beta=np.empty((K, P)),
        skew=np.empty((K, P)),
        z_abs=np.empty((K, T)),
        sigma2=np.empty((K, T)),
        dof=np.empty(K),
        index_cov=np.empty((K, P, P)),
        spline_cov=np.empty((K, L, L)),
        rho=np.empty(K),
        nu=np.empty(K),
        gamma=np.empty(K),
        pointwise_ll=np.empty((K, T, n)),
        deviance=np.empty(K),
        deviance_at_mean=math.nan,
        accept={"rho_nu": np.zeros(config.iters, dtype=bool), "gamma": np.zeros(config.iters, dtype=bool)},
    )
    history = {"rho_nu": out.accept["rho_nu"], "gamma": out.accept["gamma"]}

    k = 0
    for it in range(1, config.iters + 1):
        sep, mu, acc = _sweep(state, data, basis, priors, rng, steps, variant, sep, mu)
        history["rho_nu"][it - 1] = acc["rho_nu"]
        history["gamma"][it - 1] = acc["gamma"]
        if it <= config.burn_in and it % config.adapt_window == 0:
            steps = adapt_steps(
                {k2: v[:it] for k2, v in history.items()}, steps, config.adapt_window
            )
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            out.beta[k] = state.beta
            out.mu_beta[k] = state.mu_beta
            out.skew[k] = state.skew
            out.z_abs[k] = state.z_abs
            out.sigma2[k] = state.sigma2
            out.dof[k] = state.dof
            out.index_cov[k] = state.index_cov
            out.spline_cov[k] = state.spline_cov
            out.rho[k] = state.matern.rho
            out.nu[k] = state.matern.nu
            out.gamma[k] = state.matern.gamma
            out.pointwise_ll[k] = pointwise_loglik(y, mu, state.skew, state.index_cov, state.dof)
            out.deviance[k] = -2.0 * full_data_loglik(y, mu, state.skew, sep, state.dof)
            k += 1

    mean_state = out.mean_state()
    sep_mean = SeparableGaussian(
        build_spatial_corr(data.sites, mean_state.matern), mean_state.index_cov
    )
    mu_mean = mean_surface(mean_state, basis)
    out.deviance_at_mean = -2.0 * full_data_loglik(
        y, mu_mean, mean_state.skew, sep_mean, mean_state.dof
    )
    return out
