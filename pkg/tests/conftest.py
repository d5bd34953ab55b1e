"""Shared test helpers: dense references and random SPD factories."""

import numpy as np
import pytest


def rand_spd(rng, k, scale=1.0):
    """Random well-conditioned SPD matrix."""
    a = rng.standard_normal((k, k + 2))
    m = a @ a.T / (k + 2) + 0.5 * np.eye(k)
    return scale * m


def rand_corr(rng, k):
    """Random correlation matrix."""
    m = rand_spd(rng, k)
    d = 1.0 / np.sqrt(np.diag(m))
    return m * np.outer(d, d)


def dense_cov(sep, scale=1.0, use_b=False):
    """Dense Kronecker covariance matching SeparableGaussian's ordering
    (site slowest, index middle, spline fastest)."""
    m = np.kron(sep.sigma_s, sep.sigma_i)
    if use_b:
        m = np.kron(m, sep.sigma_b)
    return scale * m


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
