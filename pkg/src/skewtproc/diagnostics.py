"""Posterior summaries: decadal trends, DIC/WAIC, effective sample sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError, ShapeError

__all__ = [
    "TrendSummary",
    "delta_decadal",
    "trend_summary",
    "dic",
    "waic",
    "ess",
    "chain_diagnostics",
]


@dataclass(frozen=True)
class TrendSummary:
    """Per-(site, variable) decadal trend summary.

    delta_mean, delta_sd, t_value : (n, P) arrays; t = mean / sd.
    significant : boolean (n, P), |t| > threshold (False where degenerate).
    degenerate : boolean (n, P), True where the posterior SD is zero.
    """

    delta_mean: np.ndarray
    delta_sd: np.ndarray
    t_value: np.ndarray
    significant: np.ndarray
    degenerate: np.ndarray
    threshold: float


def delta_decadal(samples, times):
    """Per-draw decadal trend Delta[k, i, p].

    The fitted mean at the first and last time equals the first and last
    spline coefficient (clamped basis), so the trend is
    (beta[..., -1] - beta[..., 0]) / span_in_decades with
    span_in_decades = (times[-1] - times[0]) / 10 under annual indexing,
    i.e. (T - 1) / 10 when times are consecutive years.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ShapeError("times must be 1-d with at least two entries")
    beta = samples.beta if hasattr(samples, "beta") else np.asarray(samples, dtype=float)
    if beta.ndim != 4:
        raise ShapeError(f"expected (K, n, P, L) beta draws, got shape {beta.shape}")
    decades = (times[-1] - times[0]) / 10.0
    if decades <= 0:
        raise ParameterError("times must span a positive interval")
    return (beta[..., -1] - beta[..., 0]) / decades


def trend_summary(delta_draws, threshold=2.0):
    """Summarize decadal-trend draws into mean, SD, t and significance flags.

    Zero-SD cells are flagged degenerate: t is NaN and significant is False.
    """
    delta_draws = np.asarray(delta_draws, dtype=float)
    if delta_draws.ndim != 3:
        raise ShapeError(f"expected (K, n, P) draws, got {delta_draws.shape}")
    mean = delta_draws.mean(axis=0)
    sd = delta_draws.std(axis=0, ddof=1) if delta_draws.shape[0] > 1 else np.zeros_like(mean)
    degenerate = sd == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(degenerate, np.nan, mean / np.where(degenerate, 1.0, sd))
    significant = np.where(degenerate, False, np.abs(t) > threshold)
    return TrendSummary(
        delta_mean=mean,
        delta_sd=sd,
        t_value=t,
        significant=significant.astype(bool),
        degenerate=degenerate,
        threshold=float(threshold),
    )


def _points_count(samples, points):
    T, n, P = samples.dims[0], samples.dims[1], samples.dims[2]
    if points == "site-time":
        return T * n
    if points == "site-time-index":
        return T * n * P
    raise ParameterError(f"points must be 'site-time' or 'site-time-index', got {points!r}")


def dic(samples, points="site-time"):
    """Deviance information criterion per spatio-temporal point.

    DIC = 2 * mean(deviance) - deviance(at posterior mean), divided by the
    point count: n*T site-time blocks by default, n*T*P with
    points="site-time-index".  The plug-in state uses posterior means of
    continuous parameters and the posterior mode of the tail grid.
    """
    dev = np.asarray(samples.deviance, dtype=float)
    d_at_mean = float(samples.deviance_at_mean)
    if not math.isfinite(d_at_mean):
        raise ParameterError("samples carry no plug-in deviance")
    return float((2.0 * dev.mean() - d_at_mean) / _points_count(samples, points))


def waic(samples, points="site-time"):
    """Widely applicable information criterion per spatio-temporal point.

    WAIC = -2 * sum_j [ log mean_k exp(ll_jk) - var_k(ll_jk) ] over site-time
    blocks j, divided by the point count (same divisor options as dic).
    """
    ll = np.asarray(samples.pointwise_ll, dtype=float)
    K = ll.shape[0]
    flat = ll.reshape(K, -1)
    lpd = logsumexp(flat, axis=0) - math.log(K)
    penalty = flat.var(axis=0, ddof=1)
    return float(-2.0 * np.sum(lpd - penalty) / _points_count(samples, points))


def ess(x):
    """Effective sample size by the initial-positive-sequence rule.

    Sums autocovariances over lag pairs while the pair sums stay positive.
    Constant series return 1.0.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("ess expects a 1-d series")
    n = x.size
    if n < 2:
        return float(n)
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var == 0.0:
        return 1.0
    # FFT autocovariances up to lag n-1
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    s = 0.0
    for k in range(1, n - 1, 2):
        pair = rho[k] + rho[k + 1] if k + 1 < n else rho[k]
        if pair <= 0:
            break
        s += pair
    denom = 1.0 + 2.0 * s
    return float(min(n, max(1.0, n / denom)))


@dataclass(frozen=True)
class ChainDiagnostics:
    """Scalar-parameter table (name, mean, sd, ess) plus acceptance rates."""

    names: tuple
    means: np.ndarray
    sds: np.ndarray
    ess_values: np.ndarray
    acceptance: dict


def _scalar_series(samples):
    """Name -> 1-d draw series for the scalar-ish parameters of a chain."""
    out = {}
    P = samples.mu_beta.shape[1]
    for p in range(P):
        out[f"mu_beta[{p}]"] = samples.mu_beta[:, p]
        out[f"skew[{p}]"] = samples.skew[:, p]
        for q in range(p, P):
            out[f"index_cov[{p},{q}]"] = samples.index_cov[:, p, q]
    out["dof"] = samples.dof
    out["rho"] = samples.rho
    out["nu"] = samples.nu
    out["gamma"] = samples.gamma
    out["deviance"] = samples.deviance
    return out


def chain_diagnostics(samples):
    """Means, SDs and ESS for the scalar parameters, plus MH acceptance rates.

    Accepts PosteriorSamples or the combined univariate container (whose
    per-index chains are reported with an index suffix).
    """
    if hasattr(samples, "chains"):
        names, means, sds, esss = [], [], [], []
        for p, chain in enumerate(samples.chains):
            for name, series in _scalar_series(chain).items():
                names.append(f"{name}@{p}")
                means.append(float(np.mean(series)))
                sds.append(float(np.std(series, ddof=1)) if series.size > 1 else 0.0)
                esss.append(ess(series))
        acc = samples.acceptance_rates()
    else:
        names, means, sds, esss = [], [], [], []
        for name, series in _scalar_series(samples).items():
            series = np.asarray(series, dtype=float)
            if not np.all(np.isfinite(series)):
                # the Gaussian variant stores dof = inf; report without ess
                names.append(name)
                means.append(float(series[0]))
                sds.append(0.0)
                esss.append(float("nan"))
                continue
            names.append(name)
            means.append(float(series.mean()))
            sds.append(float(series.std(ddof=1)) if series.size > 1 else 0.0)
            esss.append(ess(series))
        acc = samples.acceptance_rates()
    return ChainDiagnostics(
        names=tuple(names),
        means=np.asarray(means),
        sds=np.asarray(sds),
        ess_values=np.asarray(esss),
        acceptance=acc,
    )
