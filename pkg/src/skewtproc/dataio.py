"""Dataset CSV parsing, run configuration, and result writers.

Input format: one CSV with header site_id,lon,lat,year,<name_1>,...,<name_P>.
Every site must appear at every year exactly once with all variables present;
the site order of first appearance is kept, years are sorted ascending.

Configuration is a single YAML file; dotted names below refer to nesting
(chain.iters means chain: {iters: ...}).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .errors import ConfigError, DataError
from .model import ObservationTensor

__all__ = [
    "load_dataset",
    "write_dataset",
    "RunConfig",
    "load_config",
    "resolve_config",
    "save_samples",
    "load_samples",
    "write_trend_summary_csv",
    "write_diagnostics_csv",
    "write_ic_report",
    "write_chi_cross_csv",
    "write_chi_spatial_csv",
    "render_maps",
    "state_to_dict",
    "state_from_dict",
]

_META_COLS = ("site_id", "lon", "lat", "year")


def load_dataset(path):
    """Read an ObservationTensor from the CSV layout described above.

    Raises DataError naming the line, site, year or variable on any of:
    parse failures, duplicate (site, year) rows, inconsistent coordinates,
    or missing cells.
    """
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(header[:4]) != _META_COLS:
            raise DataError(
                f"{path}: header must start with {','.join(_META_COLS)}, got {header[:4]}"
            )
        index_names = tuple(header[4:])
        if not index_names:
            raise DataError(f"{path}: no variable columns after {','.join(_META_COLS)}")
        if len(set(index_names)) != len(index_names):
            raise DataError(f"{path}: duplicate variable names in header")
        site_order = []
        coords = {}
        rows = {}
        years = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4 + len(index_names):
                raise DataError(
                    f"{path}:{lineno}: expected {4 + len(index_names)} fields, got {len(row)}"
                )
            sid = row[0].strip()
            try:
                lon, lat = float(row[1]), float(row[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric coordinate for site {sid!r}") from None
            try:
                year = float(row[3])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric year {row[3]!r}") from None
            try:
                vals = [float(v) for v in row[4:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value for site {sid!r}, year {row[3]}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite value for site {sid!r}, year {row[3]}")
            if sid not in coords:
                site_order.append(sid)
                coords[sid] = (lon, lat)
            elif coords[sid] != (lon, lat):
                raise DataError(f"{path}:{lineno}: site {sid!r} re-appears with different coordinates")
            key = (sid, year)
            if key in rows:
                raise DataError(f"{path}:{lineno}: duplicate row for site {sid!r}, year {row[3]}")
            rows[key] = vals
            years.add(year)
    if not rows:
        raise DataError(f"{path}: no data rows")
    times = np.array(sorted(years))
    missing = [
        (sid, yr) for sid in site_order for yr in times if (sid, yr) not in rows
    ]
    if missing:
        sid, yr = missing[0]
        raise DataError(
            f"{path}: incomplete grid; first missing cell is site {sid!r}, year {yr:g} "
            f"({len(missing)} missing in total)"
        )
    n, T, P = len(site_order), times.size, len(index_names)
    y = np.empty((T, n, P))
    for i, sid in enumerate(site_order):
        for t, yr in enumerate(times):
            y[t, i] = rows[(sid, yr)]
    sites = np.array([coords[sid] for sid in site_order])
    return ObservationTensor(
        y=y, sites=sites, times=times, index_names=index_names, site_ids=tuple(site_order)
    )


def write_dataset(path, data):
    """Write an ObservationTensor in the input CSV layout (lossless floats)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(_META_COLS) + list(data.index_names))
        for i, sid in enumerate(data.site_ids):
            lon, lat = data.sites[i]
            for t, yr in enumerate(data.times):
                w.writerow(
                    [sid, repr(float(lon)), repr(float(lat)), f"{yr:g}"]
                    + [repr(float(v)) for v in data.y[t, i]]
                )


# ---------------------------------------------------------------------------
# configuration

_MODELS = ("mstp", "mtp", "mgp", "stp", "tp", "gp")

_SECTIONS = {
    None: {"input", "model", "zones", "splines", "chain", "priors", "output", "ic",
           "trend", "workers", "simulate"},
    "splines": {"L"},
    "chain": {"iters", "burn_in", "thin", "seed", "adapt_window"},
    "priors": {"rho_max", "a_grid_max", "mu_beta_sd", "lambda_sd", "iw_df", "iw_scale",
               "log_nu_mean", "log_nu_sd"},
    "output": {"dir"},
    "ic": {"points"},
    "trend": {"t_threshold"},
    "simulate": {"n_sites", "grid", "n_times", "indexes", "seed", "truth", "spacing"},
}


@dataclass
class RunConfig:
    """Fully resolved run settings (config file merged with CLI overrides)."""

    input: str = ""
    model: str = "mstp"
    output_dir: str = "out"
    spline_funcs: int = 7
    iters: int = 20000
    burn_in: int = 10000
    thin: int = 5
    seed: int = 0
    adapt_window: int = 200
    rho_max: float = 0.0  # 0 means: use the max pairwise site distance
    a_grid_max: float = 20.0
    mu_beta_sd: float = 100.0
    lambda_sd: float = 10.0
    iw_df: float = 0.01
    iw_scale: float = 0.01
    log_nu_mean: float = -1.2
    log_nu_sd: float = 1.0
    zones: dict = field(default_factory=dict)
    ic_points: str = "site-time"
    t_threshold: float = 2.0
    workers: int = 1
    simulate: dict = field(default_factory=dict)

    def validate(self):
        if self.model not in _MODELS:
            raise ConfigError(f"model must be one of {_MODELS}, got {self.model!r}")
        for name in ("iters", "burn_in", "thin", "seed", "adapt_window", "spline_funcs", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.spline_funcs < 4:
            raise ConfigError(f"splines.L must be at least 4, got {self.spline_funcs}")
        if not (0 <= self.burn_in < self.iters):
            raise ConfigError("chain.burn_in must satisfy 0 <= burn_in < iters")
        if self.thin < 1:
            raise ConfigError("chain.thin must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.ic_points not in ("site-time", "site-time-index"):
            raise ConfigError(f"ic.points must be site-time or site-time-index, got {self.ic_points!r}")
        for name in ("a_grid_max", "mu_beta_sd", "lambda_sd", "iw_df", "iw_scale", "log_nu_sd",
                     "t_threshold"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.rho_max < 0:
            raise ConfigError(f"priors.rho_max must be positive, got {self.rho_max!r}")
        if not isinstance(self.zones, dict):
            raise ConfigError("zones must map zone names to site-id lists")
        for zname, sids in self.zones.items():
            if not isinstance(sids, (list, tuple)) or not sids:
                raise ConfigError(f"zones.{zname} must be a nonempty list of site ids")
        return self

    def to_yaml(self):
        d = asdict(self)
        nested = {
            "input": d["input"],
            "model": d["model"],
            "output": {"dir": d["output_dir"]},
            "splines": {"L": d["spline_funcs"]},
            "chain": {k: d[k] for k in ("iters", "burn_in", "thin", "seed", "adapt_window")},
            "priors": {k: d[k] for k in ("rho_max", "a_grid_max", "mu_beta_sd", "lambda_sd",
                                          "iw_df", "iw_scale", "log_nu_mean", "log_nu_sd")},
            "zones": d["zones"],
            "ic": {"points": d["ic_points"]},
            "trend": {"t_threshold": d["t_threshold"]},
            "workers": d["workers"],
            "simulate": d["simulate"],
        }
        return yaml.safe_dump(nested, sort_keys=False)


def load_config(path):
    """Parse the YAML config file into a raw nested dict."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return raw


def _check_keys(raw):
    for key in raw:
        if key not in _SECTIONS[None]:
            raise ConfigError(f"unknown config key {key!r}")
    for section, allowed in _SECTIONS.items():
        if section is None or section not in raw:
            continue
        sub = raw[section]
        if section in ("zones", "simulate"):
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        for key in sub:
            if key not in allowed:
                raise ConfigError(f"unknown config key {section}.{key}")


def resolve_config(raw, overrides=None):
    """Merge a raw config dict with CLI overrides into a validated RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _check_keys(raw)
    if "zones" in raw and not isinstance(raw["zones"], dict):
        raise ConfigError("zones must be a mapping of zone name to site-id list")
    cfg = RunConfig()
    cfg.input = str(raw.get("input", cfg.input) or "")
    cfg.model = raw.get("model", cfg.model)
    sec = raw.get("output", {}) or {}
    cfg.output_dir = str(sec.get("dir", cfg.output_dir))
    sec = raw.get("splines", {}) or {}
    cfg.spline_funcs = sec.get("L", cfg.spline_funcs)
    sec = raw.get("chain", {}) or {}
    for name in ("iters", "burn_in", "thin", "seed", "adapt_window"):
        setattr(cfg, name, sec.get(name, getattr(cfg, name)))
    sec = raw.get("priors", {}) or {}
    for name in ("rho_max", "a_grid_max", "mu_beta_sd", "lambda_sd", "iw_df", "iw_scale",
                 "log_nu_mean", "log_nu_sd"):
        setattr(cfg, name, sec.get(name, getattr(cfg, name)))
    cfg.zones = dict(raw.get("zones", {}) or {})
    sec = raw.get("ic", {}) or {}
    cfg.ic_points = sec.get("points", cfg.ic_points)
    sec = raw.get("trend", {}) or {}
    cfg.t_threshold = sec.get("t_threshold", cfg.t_threshold)
    cfg.workers = raw.get("workers", cfg.workers)
    cfg.simulate = dict(raw.get("simulate", {}) or {})
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, val)
    # YAML numbers may arrive as floats where ints are required
    for name in ("iters", "burn_in", "thin", "seed", "adapt_window", "spline_funcs", "workers"):
        v = getattr(cfg, name)
        if isinstance(v, float) and v.is_integer():
            setattr(cfg, name, int(v))
    for name in ("rho_max", "a_grid_max", "mu_beta_sd", "lambda_sd", "iw_df", "iw_scale",
                 "log_nu_mean", "log_nu_sd", "t_threshold"):
        v = getattr(cfg, name)
        if isinstance(v, int) and not isinstance(v, bool):
            setattr(cfg, name, float(v))
    return cfg.validate()


# ---------------------------------------------------------------------------
# posterior archive


def save_samples(path, samples, index_names=None):
    """Archive posterior draws as .npz (works for both sample containers)."""
    meta = {
        "variant": samples.variant,
        "config": asdict(samples.config),
        "index_names": list(index_names) if index_names else None,
    }
    arrays = {}
    chains = samples.chains if hasattr(samples, "chains") else [samples]
    meta["n_chains"] = len(chains)
    meta["combined"] = hasattr(samples, "chains")
    for c, chain in enumerate(chains):
        pref = f"c{c}_"
        meta[f"dims_{c}"] = list(chain.dims)
        meta[f"deviance_at_mean_{c}"] = chain.deviance_at_mean
        for name in ("beta", "mu_beta", "skew", "z_abs", "sigma2", "dof", "index_cov",
                     "spline_cov", "rho", "nu", "gamma", "pointwise_ll", "deviance"):
            arrays[pref + name] = getattr(chain, name)
        for key, flags in chain.accept.items():
            arrays[pref + "accept_" + key] = flags
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez_compressed(path, **arrays)


def load_samples(path):
    """Restore a posterior archive written by save_samples."""
    from .sampler import ChainConfig, PosteriorSamples, UnivariateSamples

    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        config = ChainConfig(**meta["config"])
        chains = []
        for c in range(meta["n_chains"]):
            pref = f"c{c}_"
            accept = {
                key[len(pref + "accept_"):]: z[key]
                for key in z.files
                if key.startswith(pref + "accept_")
            }
            chains.append(
                PosteriorSamples(
                    variant=meta["variant"] if not meta["combined"] else "mstp",
                    config=config,
                    dims=tuple(meta[f"dims_{c}"]),
                    beta=z[pref + "beta"],
                    mu_beta=z[pref + "mu_beta"],
                    skew=z[pref + "skew"],
                    z_abs=z[pref + "z_abs"],
                    sigma2=z[pref + "sigma2"],
                    dof=z[pref + "dof"],
                    index_cov=z[pref + "index_cov"],
                    spline_cov=z[pref + "spline_cov"],
                    rho=z[pref + "rho"],
                    nu=z[pref + "nu"],
                    gamma=z[pref + "gamma"],
                    pointwise_ll=z[pref + "pointwise_ll"],
                    deviance=z[pref + "deviance"],
                    deviance_at_mean=float(meta[f"deviance_at_mean_{c}"]),
                    accept=accept,
                )
            )
    if meta["combined"]:
        return UnivariateSamples(variant=meta["variant"], config=config, chains=chains)
    return chains[0]


def state_to_dict(state):
    """JSON-ready dict of every ChainState field (for truth sidecars)."""
    return {
        "beta": np.asarray(state.beta).tolist(),
        "mu_beta": np.asarray(state.mu_beta).tolist(),
        "skew": np.asarray(state.skew).tolist(),
        "z_abs": np.asarray(state.z_abs).tolist(),
        "sigma2": np.asarray(state.sigma2).tolist(),
        "dof": None if math.isinf(state.dof) else float(state.dof),
        "index_cov": np.asarray(state.index_cov).tolist(),
        "spline_cov": np.asarray(state.spline_cov).tolist(),
        "rho": state.matern.rho,
        "nu": state.matern.nu,
        "gamma": state.matern.gamma,
    }


def state_from_dict(d):
    from .covariance import MaternParams
    from .model import ChainState

    return ChainState(
        beta=np.asarray(d["beta"], dtype=float),
        mu_beta=np.asarray(d["mu_beta"], dtype=float),
        skew=np.asarray(d["skew"], dtype=float),
        z_abs=np.asarray(d["z_abs"], dtype=float),
        sigma2=np.asarray(d["sigma2"], dtype=float),
        dof=math.inf if d["dof"] is None else float(d["dof"]),
        index_cov=np.asarray(d["index_cov"], dtype=float),
        spline_cov=np.asarray(d["spline_cov"], dtype=float),
        matern=MaternParams(rho=d["rho"], nu=d["nu"], gamma=d["gamma"]),
    )


# ---------------------------------------------------------------------------
# result writers


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def write_trend_summary_csv(path, data, summary):
    """trend_summary.csv: one row per (site, variable)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site_id", "lon", "lat", "index", "delta_mean", "delta_sd", "t", "significant"])
        for i, sid in enumerate(data.site_ids):
            lon, lat = data.sites[i]
            for p, name in enumerate(data.index_names):
                w.writerow([
                    sid, _fmt(float(lon)), _fmt(float(lat)), name,
                    _fmt(summary.delta_mean[i, p]), _fmt(summary.delta_sd[i, p]),
                    _fmt(summary.t_value[i, p]), _fmt(bool(summary.significant[i, p])),
                ])


def write_diagnostics_csv(path, diag):
    """diagnostics.csv: parameter table plus acceptance-rate rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "mean", "sd", "ess"])
        for name, m, s, e in zip(diag.names, diag.means, diag.sds, diag.ess_values):
            w.writerow([name, _fmt(float(m)), _fmt(float(s)), _fmt(float(e))])
        for key, rate in diag.acceptance.items():
            w.writerow([f"acceptance_{key}", _fmt(float(rate)), "", ""])


def write_ic_report(path, table, points):
    """ic_report.txt: per-variant DIC and WAIC (per point) and the preferred model."""
    lines = [f"information criteria per {points} point", ""]
    lines.append(f"{'model':<8}{'DIC':>16}{'WAIC':>16}")
    for variant, (d, w_) in table.items():
        lines.append(f"{variant:<8}{d:>16.6f}{w_:>16.6f}")
    best_dic = min(table, key=lambda k: table[k][0])
    best_waic = min(table, key=lambda k: table[k][1])
    lines.append("")
    lines.append(f"preferred by DIC:  {best_dic}")
    lines.append(f"preferred by WAIC: {best_waic}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_chi_cross_csv(path, index_names, matrix, model_matrix=None):
    """chi_cross.csv: symmetric matrix of cross-variable chi estimates.

    With model_matrix, a second block of rows labeled
    "<index> (model, symmetrized)" follows the empirical block.
    """
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + list(index_names))
        for p, name in enumerate(index_names):
            w.writerow([name] + [_fmt(float(v)) for v in matrix[p]])
        if model_matrix is not None:
            model_matrix = np.asarray(model_matrix, dtype=float)
            for p, name in enumerate(index_names):
                w.writerow(
                    [f"{name} (model, symmetrized)"]
                    + [_fmt(float(v)) for v in model_matrix[p]]
                )


def write_chi_spatial_csv(path, curve, theory=None):
    """chi_spatial_<index>.csv: distance, chi (clamped), raw value, pair count."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["distance", "chi", "chi_raw", "pairs"]
        if theory is not None:
            header.append("chi_model")
        w.writerow(header)
        for b in range(curve.distances.size):
            row = [
                _fmt(float(curve.distances[b])),
                _fmt(float(curve.chi[b])),
                _fmt(float(curve.chi_raw[b])),
                str(int(curve.counts[b])),
            ]
            if theory is not None:
                row.append(_fmt(float(theory[b])))
            w.writerow(row)


def render_maps(out_dir, data, summary):
    """Write per-variable maps/<index>_delta.png and maps/<index>_t.png."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    lon, lat = data.sites[:, 0], data.sites[:, 1]
    for p, name in enumerate(data.index_names):
        for kind, values in (("delta", summary.delta_mean[:, p]), ("t", summary.t_value[:, p])):
            fig, ax = plt.subplots(figsize=(5.0, 4.0))
            finite = values[np.isfinite(values)]
            vmax = float(np.max(np.abs(finite))) if finite.size else 1.0
            vmax = vmax if vmax > 0 else 1.0
            sc = ax.scatter(lon, lat, c=values, cmap="RdBu_r", vmin=-vmax, vmax=vmax,
                            s=120, marker="s", edgecolors="k", linewidths=0.3)
            fig.colorbar(sc, ax=ax, label="decadal trend" if kind == "delta" else "t value")
            ax.set_xlabel("lon")
            ax.set_ylabel("lat")
            ax.set_title(f"{name}: {'decadal trend' if kind == 'delta' else 'trend t value'}")
            fig.tight_layout()
            fig.savefig(os.path.join(out_dir, f"{name}_{kind}.png"), dpi=110)
            plt.close(fig)
