"""Forward simulation of the skew-t process, for testing and synthetic studies."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import invwishart

from .covariance import MaternParams, SeparableGaussian, build_spatial_corr
from .errors import ParameterError, ShapeError
from .model import ChainState, ObservationTensor, SplineBasis, mean_surface, spline_basis

__all__ = ["simulate_dataset", "simulate_beta", "draw_state_from_prior"]


def simulate_dataset(truth, sites, times, rng, index_names=None, return_latents=False):
    """Draw one dataset from the model at the given parameter state.

    Fresh latents (z_t, sigma_t^2) are drawn on every call; the latents
    stored in `truth` are ignored.  dof = math.inf gives the Gaussian limit
    (sigma_t = 1 exactly).

    Parameters
    ----------
    truth : ChainState
        Parameters to simulate from; beta must be (n, P, L).
    sites : (n, 2) coordinates.
    times : (T,) strictly increasing times.
    rng : numpy Generator.
    index_names : optional length-P labels.
    return_latents : also return the drawn (z_abs, sigma2) when True.

    Returns
    -------
    ObservationTensor, or (ObservationTensor, z_abs, sigma2).
    """
    sites = np.asarray(sites, dtype=float)
    times = np.asarray(times, dtype=float)
    truth.validate()
    n, P, L = truth.beta.shape
    if sites.shape != (n, 2):
        raise ShapeError(f"sites must be ({n}, 2), got {sites.shape}")
    T = times.size
    basis = spline_basis(times, L)
    mu = mean_surface(truth, basis)

    if math.isinf(truth.dof):
        sigma2 = np.ones(T)
    else:
        # IG(a/2, a/2) as rate over a gamma draw
        a = truth.dof
        sigma2 = (a / 2.0) / rng.gamma(a / 2.0, 1.0, size=T)
    z_abs = np.abs(rng.standard_normal(T)) * np.sqrt(sigma2)

    sigma_s = build_spatial_corr(sites, truth.matern)
    sep = SeparableGaussian(sigma_s, truth.index_cov)
    y = np.empty((T, n, P))
    skew = np.asarray(truth.skew, dtype=float)
    for t in range(T):
        eps = sep.sample(rng, scale=float(sigma2[t]))
        y[t] = mu[t] + z_abs[t] * skew[None, :] + eps

    names = tuple(index_names) if index_names is not None else tuple(f"idx{p+1}" for p in range(P))
    data = ObservationTensor(y=y, sites=sites, times=times, index_names=names)
    if return_latents:
        return data, z_abs, sigma2
    return data


def simulate_beta(priors, sigma_s, sigma_i, sigma_b, mu_beta, rng):
    """Draw spline coefficients from their conditional prior.

    beta ~ N(1_n (x) mu_beta (x) 1_L, sigma_s (x) sigma_i (x) sigma_b),
    returned as an (n, P, L) array.  `priors` is accepted for interface
    uniformity with the samplers and is not consulted.
    """
    del priors
    sigma_i = np.atleast_2d(np.asarray(sigma_i, dtype=float))
    mu_beta = np.atleast_1d(np.asarray(mu_beta, dtype=float))
    if mu_beta.shape[0] != sigma_i.shape[0]:
        raise ShapeError("mu_beta length must match sigma_i dimension")
    sep = SeparableGaussian(sigma_s, sigma_i, sigma_b)
    n, P, L = sep.n, sep.p, sep.l
    mean = np.broadcast_to(mu_beta[None, :, None], (n, P, L))
    return sep.sample(rng, mean=mean, use_b=True)


def draw_state_from_prior(priors, sites, times, num_funcs, num_indexes, rng, variant="mstp"):
    """One ChainState drawn from the full prior (for prior-predictive checks).

    Requires a proper inverse-Wishart prior (priors.iw_df > dimension - 1);
    the default 0.01 is improper for P >= 2 and raises here.
    """
    sites = np.asarray(sites, dtype=float)
    times = np.asarray(times, dtype=float)
    n = sites.shape[0]
    P = int(num_indexes)
    L = int(num_funcs)
    T = times.size

    for dim, name in ((P, "index"), (L, "spline")):
        if priors.iw_df <= dim - 1:
            raise ParameterError(
                f"iw_df = {priors.iw_df} is improper for the {name} factor (dim {dim}); "
                "prior draws need a proper inverse-Wishart"
            )
    index_cov = np.atleast_2d(invwishart.rvs(priors.iw_df, priors.iw_scale * np.eye(P), random_state=rng))
    spline_cov = np.atleast_2d(invwishart.rvs(priors.iw_df, priors.iw_scale * np.eye(L), random_state=rng))

    rho = rng.uniform(0.0, priors.rho_max)
    nu = math.exp(rng.normal(priors.log_nu_mean, priors.log_nu_sd))
    gamma = rng.uniform(0.0, 1.0)
    matern = MaternParams(rho=rho, nu=nu, gamma=gamma)

    mu_beta = rng.normal(0.0, priors.mu_beta_sd, size=P)
    sigma_s = build_spatial_corr(sites, matern)
    beta = simulate_beta(priors, sigma_s, index_cov, spline_cov, mu_beta, rng)

    gaussian = variant in ("mgp", "gp")
    if gaussian:
        dof = math.inf
        sigma2 = np.ones(T)
        z_abs = np.zeros(T)
        skew = np.zeros(P)
    else:
        dof = float(rng.choice(priors.a_grid))
        sigma2 = (dof / 2.0) / rng.gamma(dof / 2.0, 1.0, size=T)
        z_abs = np.abs(rng.standard_normal(T)) * np.sqrt(sigma2)
        if variant in ("mtp", "tp"):
            skew = np.zeros(P)
        else:
            skew = rng.normal(0.0, priors.lambda_sd, size=P)

    return ChainState(
        beta=beta,
        mu_beta=mu_beta,
        skew=skew,
        z_abs=z_abs,
        sigma2=sigma2,
        dof=dof,
        index_cov=index_cov,
        spline_cov=spline_cov,
        matern=matern,
    )
