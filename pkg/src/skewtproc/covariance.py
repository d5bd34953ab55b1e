"""Matern spatial correlation with a nugget, and separable Kronecker Gaussian algebra.

Covariances in this package factor as sigma_s (x) sigma_i or
sigma_s (x) sigma_i (x) sigma_b.  Nothing here ever materializes the dense
Kronecker product: log-determinants, quadratic forms, solves and sampling all
work on the per-factor Cholesky decompositions, so the largest matrix ever
factorized has dimension max(n, P, L).

Vectorization convention: a flat vector of length n*P (or n*P*L) is the
C-order flatten of an array shaped (n, P) (or (n, P, L)), i.e. site slowest,
index middle, spline fastest.  Every routine accepting flat vectors also
accepts the already-shaped array.
"""

from __future__ import annotations

import contextlib
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import squareform, pdist
from scipy.special import gammaln, kv

from .errors import FactorizationError, ParameterError, ShapeError

__all__ = [
    "MaternParams",
    "SeparableGaussian",
    "matern_correlation",
    "build_spatial_corr",
    "kron_logdet",
    "kron_quadform",
    "kron_solve",
    "kron_mvn_sample",
    "probe_factorizations",
]

# Beyond this many correlation lengths the Matern term underflows anyway.
_MATERN_CUTOFF = 700.0

# Jitter escalation, relative to mean(diag): start, growth factor, cap.
_JITTER_START = 1e-10
_JITTER_GROWTH = 10.0
_JITTER_CAP = 1e-6

_factor_dim_log = None


@contextlib.contextmanager
def probe_factorizations():
    """Record the dimension of every Cholesky factorization while active.

    Yields a list that accumulates (name, dim) tuples.  Used by tests to
    verify that only per-factor matrices are ever factorized.
    """
    global _factor_dim_log
    log = []
    prev = _factor_dim_log
    _factor_dim_log = log
    try:
        yield log
    finally:
        _factor_dim_log = prev


def _chol_with_jitter(mat, name):
    """Lower Cholesky factor of a symmetric PSD matrix with escalating jitter.

    Returns the factor; raises FactorizationError(name) if jitter up to
    _JITTER_CAP * mean(diag) does not produce a positive definite matrix.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ShapeError(f"{name} factor must be a square matrix, got {mat.shape}")
    if _factor_dim_log is not None:
        _factor_dim_log.append((name, mat.shape[0]))
    scale = float(np.mean(np.diag(mat)))
    if not np.isfinite(scale) or not np.all(np.isfinite(mat)):
        raise FactorizationError(name, f"{name} factor contains non-finite entries")
    try:
        return cholesky(mat, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = _JITTER_START
    eye = np.eye(mat.shape[0])
    while jitter <= _JITTER_CAP * (1.0 + 1e-12):
        try:
            return cholesky(mat + jitter * scale * eye, lower=True)
        except np.linalg.LinAlgError:
            jitter *= _JITTER_GROWTH
    raise FactorizationError(name)


@dataclass(frozen=True)
class MaternParams:
    """Matern correlation parameters with a nugget.

    rho > 0 is the range, nu > 0 the smoothness, gamma in (0, 1] the
    non-nugget proportion: r(h) = gamma * matern(h; rho, nu) for h > 0 and
    r(0) = 1.
    """

    rho: float
    nu: float
    gamma: float

    def __post_init__(self):
        for field in ("rho", "nu", "gamma"):
            v = getattr(self, field)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ParameterError(f"{field} must be finite, got {v!r}")
        if self.rho <= 0:
            raise ParameterError(f"rho must be positive, got {self.rho}")
        if self.nu <= 0:
            raise ParameterError(f"nu must be positive, got {self.nu}")
        if not (0.0 < self.gamma <= 1.0):
            raise ParameterError(f"gamma must be in (0, 1], got {self.gamma}")


def matern_correlation(h, params):
    """Matern correlation with nugget at distances h (scalar or array).

    r(0) = 1 exactly; for h > 0,
    r(h) = gamma * (h/rho)^nu K_nu(h/rho) / (Gamma(nu) 2^(nu-1)).

    The Matern factor is evaluated in log space so large nu does not
    overflow; where K_nu itself overflows (tiny h/rho with large nu) the
    limiting value 1 is used.  Distances beyond 700 correlation lengths
    return 0.
    """
    if not isinstance(params, MaternParams):
        params = MaternParams(*params)
    h_arr = np.asarray(h, dtype=float)
    if h_arr.size and (not np.all(np.isfinite(h_arr)) or np.any(h_arr < 0)):
        raise ParameterError("distances must be finite and nonnegative")
    x = h_arr / params.rho
    out = np.zeros(h_arr.shape)
    zero = h_arr == 0.0
    out[zero] = 1.0
    live = (~zero) & (x <= _MATERN_CUTOFF)
    if np.any(live):
        xl = x[live]
        with np.errstate(over="ignore", divide="ignore"):
            bessel = kv(params.nu, xl)
            log_term = (
                params.nu * np.log(xl)
                + np.log(bessel)
                - gammaln(params.nu)
                - (params.nu - 1.0) * math.log(2.0)
            )
        term = np.exp(log_term)
        # K_nu overflow means x is far inside the smooth core: limit is 1.
        term[np.isinf(bessel)] = 1.0
        np.clip(term, 0.0, 1.0, out=term)
        out[live] = params.gamma * term
    if np.isscalar(h) or np.asarray(h).ndim == 0:
        return float(out)
    return out


def build_spatial_corr(sites, params):
    """Spatial correlation matrix over site coordinates.

    Parameters
    ----------
    sites : (n, 2) array
        Site coordinates; distances are Euclidean in the given units.
    params : MaternParams

    Returns
    -------
    (n, n) array with unit diagonal.  Duplicate sites (zero off-diagonal
    distance) produce a singular matrix and trigger a warning.
    """
    sites = np.asarray(sites, dtype=float)
    if sites.ndim != 2 or sites.shape[1] != 2:
        raise ShapeError(f"sites must be (n, 2), got {sites.shape}")
    n = sites.shape[0]
    if n == 1:
        return np.ones((1, 1))
    d = pdist(sites)
    if np.any(d == 0.0):
        warnings.warn(
            "duplicate site coordinates give a singular spatial correlation",
            stacklevel=2,
        )
    corr = squareform(matern_correlation(d, params))
    np.fill_diagonal(corr, 1.0)
    return corr


class _Factor:
    """One covariance factor: matrix, Cholesky, log-determinant, solves."""

    __slots__ = ("mat", "chol", "logdet", "dim", "name", "_ones_solve", "_ones_quad")

    def __init__(self, mat, name):
        self.mat = np.asarray(mat, dtype=float)
        self.name = name
        self.chol = _chol_with_jitter(self.mat, name)
        self.dim = self.mat.shape[0]
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(self.chol))))
        self._ones_solve = None
        self._ones_quad = None

    def solve(self, b):
        """mat^{-1} b for b with leading dimension self.dim."""
        return cho_solve((self.chol, True), b)

    @property
    def ones_solve(self):
        """mat^{-1} 1, cached."""
        if self._ones_solve is None:
            self._ones_solve = self.solve(np.ones(self.dim))
        return self._ones_solve

    @property
    def ones_quad(self):
        """1' mat^{-1} 1, cached."""
        if self._ones_quad is None:
            self._ones_quad = float(np.sum(self.ones_solve))
        return self._ones_quad


def _apply_along_axis(op, arr, axis):
    """Apply a (dim, dim) -> matrix operator along one axis of arr."""
    moved = np.moveaxis(arr, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    res = op(flat)
    return np.moveaxis(res.reshape(moved.shape), 0, axis)


def factor_solve_axis(factor, arr, axis):
    """Apply factor^{-1} along one axis of a tensor."""
    return _apply_along_axis(factor.solve, arr, axis)


def factor_chol_axis(factor, arr, axis):
    """Apply the lower Cholesky factor along one axis (for sampling)."""
    return _apply_along_axis(lambda f: factor.chol @ f, arr, axis)


class SeparableGaussian:
    """Zero-overhead view of N(0, sigma_s (x) sigma_i [(x) sigma_b]).

    Factor matrices are copied and Cholesky-factorized on construction;
    instances are immutable.  All operations run on the factors, never on
    the Kronecker product.
    """

    def __init__(self, sigma_s, sigma_i, sigma_b=None, _factors=None):
        if _factors is not None:
            self.s, self.i, self.b = _factors
        else:
            self.s = _Factor(sigma_s, "spatial")
            self.i = _Factor(sigma_i, "index")
            self.b = _Factor(sigma_b, "spline") if sigma_b is not None else None

    @property
    def sigma_s(self):
        return self.s.mat

    @property
    def sigma_i(self):
        return self.i.mat

    @property
    def sigma_b(self):
        return None if self.b is None else self.b.mat

    @property
    def chol_s(self):
        return self.s.chol

    @property
    def chol_i(self):
        return self.i.chol

    @property
    def chol_b(self):
        return None if self.b is None else self.b.chol

    @property
    def n(self):
        return self.s.dim

    @property
    def p(self):
        return self.i.dim

    @property
    def l(self):
        return None if self.b is None else self.b.dim

    def replace(self, sigma_s=None, sigma_i=None, sigma_b=None):
        """New instance with some factors swapped, reusing unchanged Choleskys."""
        fs = self.s if sigma_s is None else _Factor(sigma_s, "spatial")
        fi = self.i if sigma_i is None else _Factor(sigma_i, "index")
        if sigma_b is None:
            fb = self.b
        else:
            fb = _Factor(sigma_b, "spline")
        return SeparableGaussian(None, None, None, _factors=(fs, fi, fb))

    def _factors(self, use_b):
        if use_b:
            if self.b is None:
                raise ShapeError("no spline factor was supplied")
            return (self.s, self.i, self.b)
        return (self.s, self.i)

    def _shape(self, use_b):
        return tuple(f.dim for f in self._factors(use_b))

    def _as_tensor(self, v, use_b):
        shape = self._shape(use_b)
        v = np.asarray(v, dtype=float)
        size = int(np.prod(shape))
        if v.ndim == 1:
            if v.size != size:
                raise ShapeError(f"vector has length {v.size}, expected {size}")
            return v.reshape(shape)
        if v.shape != shape:
            raise ShapeError(f"array has shape {v.shape}, expected {shape}")
        return v

    def logdet(self, scale=1.0, use_b=False):
        """log det of scale * sigma_s (x) sigma_i [(x) sigma_b]."""
        if scale <= 0:
            raise ParameterError(f"scale must be positive, got {scale}")
        facs = self._factors(use_b)
        dim = int(np.prod([f.dim for f in facs]))
        total = dim * math.log(scale)
        for k, f in enumerate(facs):
            others = int(np.prod([g.dim for j, g in enumerate(facs) if j != k]))
            total += others * f.logdet
        return total

    def solve(self, v, use_b=False):
        """Covariance-inverse times v; returns same shape as v."""
        orig = np.asarray(v, dtype=float)
        t = self._as_tensor(orig, use_b)
        for axis, f in enumerate(self._factors(use_b)):
            t = factor_solve_axis(f, t, axis)
        return t.reshape(orig.shape)

    def quadform(self, v, use_b=False):
        """v' (sigma_s (x) sigma_i [(x) sigma_b])^{-1} v."""
        t = self._as_tensor(v, use_b)
        return float(np.sum(t * self.solve(t, use_b=use_b)))

    def sample(self, rng, mean=None, scale=1.0, use_b=False):
        """One draw from N(mean, scale * sigma_s (x) sigma_i [(x) sigma_b]).

        Noise consumption: a single standard-normal tensor of the factor
        shape in C order, so identical rng state gives identical draws.
        scale = 0 returns the mean exactly.
        """
        if scale < 0:
            raise ParameterError(f"scale must be nonnegative, got {scale}")
        shape = self._shape(use_b)
        if mean is None:
            mean = np.zeros(shape)
        mean_arr = np.asarray(mean, dtype=float)
        t = self._as_tensor(mean_arr, use_b)
        if scale == 0.0:
            return t.reshape(mean_arr.shape).copy()
        noise = rng.standard_normal(shape)
        for axis, f in enumerate(self._factors(use_b)):
            noise = factor_chol_axis(f, noise, axis)
        return (t + math.sqrt(scale) * noise).reshape(mean_arr.shape)


def kron_logdet(g, scale=1.0, use_b=False):
    """log det of the (optionally scaled) Kronecker covariance of g."""
    return g.logdet(scale=scale, use_b=use_b)


def kron_quadform(g, v, use_b=False):
    """Quadratic form v' Sigma^{-1} v under g's Kronecker covariance."""
    return g.quadform(v, use_b=use_b)


def kron_solve(g, v, use_b=False):
    """Sigma^{-1} v under g's Kronecker covariance."""
    return g.solve(v, use_b=use_b)


def kron_mvn_sample(rng, mean, g, scale=1.0, use_b=False):
    """Draw from N(mean, scale * Sigma) under g's Kronecker covariance."""
    return g.sample(rng, mean=mean, scale=scale, use_b=use_b)


def precision_chol(mat, name):
    """Lower Cholesky of a precision-like SPD matrix, with the jitter policy.

    Helper for conjugate updates that factorize small posterior precisions.
    """
    return _chol_with_jitter(mat, name)


def precision_solve(chol_lower, b):
    """Solve (L L') x = b given the lower factor."""
    return cho_solve((chol_lower, True), b)


def precision_noise(chol_lower, rng, shape_extra=()):
    """Draw from N(0, (L L')^{-1}) as L^{-T} xi; xi consumed in C order."""
    dim = chol_lower.shape[0]
    xi = rng.standard_normal((dim,) + tuple(shape_extra))
    flat = xi.reshape(dim, -1)
    sol = solve_triangular(chol_lower.T, flat, lower=False)
    return sol.reshape(xi.shape)
