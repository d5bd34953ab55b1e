"""Extremal dependence: F-madogram estimation and closed-form chi measures.

chi is the limiting probability that one variable is extreme given the other
is: 0 means asymptotic independence, 1 perfect extremal dependence.  The
empirical route goes through the F-madogram nu_F = E|F(X) - F(Y)| / 2, which
maps to chi by chi = 2 - (1 + 2 nu_F) / (1 - 2 nu_F).  The model's chi
between two margins with common standardized skewness lambda*, tail a, and
margin correlation r has the closed form

    chi = 2 * [ T(lambda* sqrt(2(a+2)/(1+r)); a+2) / T(lambda* sqrt(a+1); a+1) ]
            * (1 - T(sqrt((a+1)(1-r)/(1+r+2 lambda*^2)); a+1))

with T the standard-t CDF.  r is the cross-index correlation for chi between
variables at one site, and the spatial correlation r(h) for chi of one
variable at two sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr
from scipy.stats import rankdata

from .covariance import MaternParams, matern_correlation
from .errors import ParameterError, ShapeError

__all__ = [
    "ChiCurve",
    "f_madogram",
    "chi_from_madogram",
    "empirical_chi_cross",
    "empirical_chi_spatial",
    "chi_cross_theoretical",
    "chi_cross_table",
    "chi_spatial_theoretical",
    "chi_gaussian_limit",
]


@dataclass(frozen=True)
class ChiCurve:
    """chi versus distance.

    distances : (B,) increasing bin midpoints.
    chi : (B,) clamped to [0, 1] for reporting.
    chi_raw : (B,) unclamped madogram-implied values.
    counts : (B,) number of site pairs per bin.
    """

    distances: np.ndarray
    chi: np.ndarray
    chi_raw: np.ndarray
    counts: np.ndarray


def _pit(x):
    """Rank-based probability integral transform, ties averaged, scaled by T + 1."""
    x = np.asarray(x, dtype=float)
    return rankdata(x, method="average") / (x.size + 1.0)


def f_madogram(x, y):
    """Empirical F-madogram of two equal-length series.

    Half the mean absolute difference of the rank-PIT series.  Identical
    series give exactly 0; independent continuous series approach 1/6;
    countermonotone series approach 1/4 (the maximum for copulas).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("f_madogram needs two equal-length 1-d series")
    if x.size < 2:
        raise ParameterError("need at least two observations")
    return 0.5 * float(np.mean(np.abs(_pit(x) - _pit(y))))


def chi_from_madogram(nu_f):
    """Map a madogram value to chi: 2 - (1 + 2 nu_f) / (1 - 2 nu_f).

    Returns the raw value (may fall slightly outside [0, 1] by sampling
    noise); callers clamp for reporting.  nu_f >= 1/2 has no valid chi and
    raises (rank-PIT madograms are bounded by 1/4, so this is defensive).
    """
    nu_f = float(nu_f)
    if nu_f >= 0.5:
        raise ParameterError(f"madogram {nu_f} >= 1/2 has no corresponding chi")
    return 2.0 - (1.0 + 2.0 * nu_f) / (1.0 - 2.0 * nu_f)


def empirical_chi_cross(data, p1, p2, min_times=20):
    """Empirical cross-variable chi at each site, plus the site average.

    Parameters
    ----------
    data : ObservationTensor
    p1, p2 : variable indexes.
    min_times : minimum series length to attempt estimation.

    Returns
    -------
    per_site : (n,) raw chi estimates (clamp for reporting).
    average : float, mean of per_site.
    """
    y = data.y
    T, n, _ = y.shape
    if T < min_times:
        raise ParameterError(f"need at least {min_times} times, got {T}")
    per_site = np.empty(n)
    for i in range(n):
        per_site[i] = chi_from_madogram(f_madogram(y[:, i, p1], y[:, i, p2]))
    return per_site, float(per_site.mean())


def empirical_chi_spatial(data, p, bin_width=None, smooth=False, min_times=20):
    """Empirical spatial chi curve for one variable.

    Site pairs are binned by distance; within each bin the madogram-implied
    chi values are averaged.  Default bin width is the smallest nonzero
    inter-site distance.  smooth=True applies a centered 3-bin moving
    average to the curve.

    Returns a ChiCurve.
    """
    y = data.y
    sites = data.sites
    T, n, _ = y.shape
    if T < min_times:
        raise ParameterError(f"need at least {min_times} times, got {T}")
    if n < 2:
        raise ParameterError("need at least two sites for a spatial curve")
    pairs = []
    dists = []
    for i in range(n):
        for j in range(i + 1, n):
            h = float(np.hypot(*(sites[i] - sites[j])))
            pairs.append((i, j))
            dists.append(h)
    dists = np.asarray(dists)
    if bin_width is None:
        nonzero = dists[dists > 0]
        if nonzero.size == 0:
            raise ParameterError("all sites coincide; no spatial curve")
        bin_width = float(nonzero.min())
    if bin_width <= 0:
        raise ParameterError(f"bin_width must be positive, got {bin_width}")
    bins = np.floor(dists / bin_width + 0.5).astype(int)  # midpoint binning
    raw = np.array(
        [chi_from_madogram(f_madogram(y[:, i, p], y[:, j, p])) for i, j in pairs]
    )
    out_d, out_chi, out_cnt = [], [], []
    for b in np.unique(bins):
        mask = bins == b
        out_d.append(b * bin_width)
        out_chi.append(float(raw[mask].mean()))
        out_cnt.append(int(mask.sum()))
    chi_raw = np.asarray(out_chi)
    if smooth and chi_raw.size >= 3:
        sm = chi_raw.copy()
        sm[1:-1] = (chi_raw[:-2] + chi_raw[1:-1] + chi_raw[2:]) / 3.0
        chi_raw = sm
    return ChiCurve(
        distances=np.asarray(out_d),
        chi=np.clip(chi_raw, 0.0, 1.0),
        chi_raw=chi_raw,
        counts=np.asarray(out_cnt, dtype=int),
    )


def _chi_closed_form(lambda_star, r, dof):
    if not dof > 0:
        raise ParameterError(f"dof must be positive, got {dof}")
    if not -1.0 <= r <= 1.0:
        raise ParameterError(f"correlation must lie in [-1, 1], got {r}")
    if math.isinf(dof):
        return chi_gaussian_limit()
    a1, a2 = dof + 1.0, dof + 2.0
    if r == -1.0:
        # antipodal margins cannot be jointly extreme
        return 0.0
    num = stdtr(a2, lambda_star * math.sqrt(2.0 * a2 / (1.0 + r)))
    den = stdtr(a1, lambda_star * math.sqrt(a1))
    surv = 1.0 - stdtr(a1, math.sqrt(a1 * (1.0 - r) / (1.0 + r + 2.0 * lambda_star**2)))
    return 2.0 * (num / den) * surv


def chi_cross_theoretical(lambda_star, r, dof):
    """Model chi between two variables at one site.

    lambda_star is the common standardized skewness, r the cross-index
    correlation, dof the tail parameter.  dof = inf returns the Gaussian
    limit 0.  At (lambda_star = 0, r = 1) the value is exactly 1; with skew
    it is approximately 1.
    """
    return _chi_closed_form(float(lambda_star), float(r), float(dof))


def chi_cross_table(lambda_stars, corr, dof):
    """Symmetrized model chi matrix across indexes.

    The closed form takes one standardized skewness; when the two margins of
    a pair differ, the table reports the average of the value at each
    margin's lambda_star (labeled as symmetrized in the CLI outputs).
    corr is the (P, P) index correlation matrix; the diagonal is 1.
    """
    ls = np.asarray(lambda_stars, dtype=float)
    corr = np.asarray(corr, dtype=float)
    P = ls.size
    if corr.shape != (P, P):
        raise ShapeError(f"corr must be ({P}, {P}), got {corr.shape}")
    out = np.eye(P)
    for p in range(P):
        for q in range(p + 1, P):
            r = float(corr[p, q])
            val = 0.5 * (
                _chi_closed_form(float(ls[p]), r, float(dof))
                + _chi_closed_form(float(ls[q]), r, float(dof))
            )
            out[p, q] = out[q, p] = val
    return out


def chi_spatial_theoretical(lambda_star, h, matern, dof):
    """Model chi for one variable at two sites separated by distance h.

    The margin correlation is the Matern-with-nugget value r(h); h may be an
    array, in which case an array is returned.  Positive chi at any finite h
    (and a positive limit as h grows) is a property of this family.
    """
    if not isinstance(matern, MaternParams):
        matern = MaternParams(*matern)
    r = matern_correlation(h, matern)
    if np.ndim(r) == 0:
        return _chi_closed_form(float(lambda_star), float(r), float(dof))
    return np.array([_chi_closed_form(float(lambda_star), float(v), float(dof)) for v in r])


def chi_gaussian_limit():
    """Asymptotic chi of any Gaussian pair with correlation below one: 0."""
    return 0.0
