"""Command-line interface: fit, simulate, chi, compare.

Exit codes: 0 success, 1 configuration problems, 2 data problems,
3 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .covariance import MaternParams, FactorizationError
from .dataio import (
    RunConfig,
    load_config,
    load_dataset,
    load_samples,
    render_maps,
    resolve_config,
    save_samples,
    state_to_dict,
    write_chi_cross_csv,
    write_chi_spatial_csv,
    write_dataset,
    write_diagnostics_csv,
    write_ic_report,
    write_trend_summary_csv,
)
from .diagnostics import chain_diagnostics, delta_decadal, dic, trend_summary, waic
from .errors import BasisError, ConfigError, DataError, ParameterError
from .extremal import (
    chi_cross_table,
    chi_cross_theoretical,
    chi_from_madogram,
    chi_spatial_theoretical,
    empirical_chi_cross,
    empirical_chi_spatial,
    f_madogram,
)
from .model import ChainState, ObservationTensor, spline_basis
from .sampler import ChainConfig, PriorConfig, run_chain
from .simulate import simulate_beta, simulate_dataset

__all__ = ["main", "cli_fit", "cli_simulate", "cli_chi", "cli_compare"]


class _Parser(argparse.ArgumentParser):
    # raise instead of sys.exit so usage problems map to exit code 1
    def error(self, message):
        raise ConfigError(message)


def _max_pairwise_distance(sites):
    from scipy.spatial.distance import pdist

    if sites.shape[0] < 2:
        return 1.0
    return float(pdist(sites).max())


def _priors_for(cfg, sites):
    from .sampler import _default_a_grid

    rho_max = cfg.rho_max if cfg.rho_max > 0 else _max_pairwise_distance(sites)
    return PriorConfig(
        rho_max=rho_max,
        mu_beta_sd=cfg.mu_beta_sd,
        lambda_sd=cfg.lambda_sd,
        iw_df=cfg.iw_df,
        iw_scale=cfg.iw_scale,
        log_nu_mean=cfg.log_nu_mean,
        log_nu_sd=cfg.log_nu_sd,
        a_grid=_default_a_grid(cfg.a_grid_max),
    )


def _chain_config(cfg, seed=None):
    return ChainConfig(
        iters=cfg.iters,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed if seed is None else seed,
        adapt_window=cfg.adapt_window,
    )


def subset_sites(data, site_ids):
    """New ObservationTensor restricted to the named sites, in the given order."""
    lookup = {sid: i for i, sid in enumerate(data.site_ids)}
    missing = [sid for sid in site_ids if sid not in lookup]
    if missing:
        raise ConfigError(f"zone names unknown site ids: {missing}")
    idx = [lookup[sid] for sid in site_ids]
    return ObservationTensor(
        y=data.y[:, idx, :],
        sites=data.sites[idx],
        times=data.times,
        index_names=data.index_names,
        site_ids=tuple(site_ids),
    )


def _mean_states(samples):
    """Per-index (lambda_star, dof, matern, corr) summaries for theory overlays."""
    if hasattr(samples, "chains"):
        out = []
        for chain in samples.chains:
            st = chain.mean_state()
            ls = float(st.skew[0] / math.sqrt(st.index_cov[0, 0]))
            out.append((ls, st.dof, st.matern))
        corr = None
        return out, corr
    st = samples.mean_state()
    scale = np.sqrt(np.diag(st.index_cov))
    per_index = [
        (float(st.skew[p] / scale[p]), st.dof, st.matern) for p in range(scale.size)
    ]
    d = np.outer(scale, scale)
    return per_index, st.index_cov / d


def _empirical_cross_matrix(data):
    P = len(data.index_names)
    mat = np.eye(P)
    for p in range(P):
        for q in range(p + 1, P):
            _, avg = empirical_chi_cross(data, p, q)
            mat[p, q] = mat[q, p] = min(max(avg, 0.0), 1.0)
    return mat


def _write_chi_outputs(out_dir, data, samples=None):
    """chi_cross.csv and chi_spatial_<index>.csv, with model overlays if fitted."""
    try:
        mat = _empirical_cross_matrix(data)
    except ParameterError as e:
        print(f"note: skipping chi outputs ({e})", file=sys.stderr)
        return
    per_index = corr = None
    if samples is not None:
        per_index, corr = _mean_states(samples)
    model_mat = None
    if corr is not None:
        model_mat = chi_cross_table(
            [ls for ls, _, _ in per_index], corr, per_index[0][1]
        )
    write_chi_cross_csv(
        os.path.join(out_dir, "chi_cross.csv"), data.index_names, mat, model_mat
    )
    for p, name in enumerate(data.index_names):
        curve = empirical_chi_spatial(data, p)
        theory = None
        if per_index is not None:
            ls, dof, matern = per_index[p]
            theory = chi_spatial_theoretical(ls, curve.distances, matern, dof)
            theory = np.atleast_1d(theory)
        write_chi_spatial_csv(
            os.path.join(out_dir, f"chi_spatial_{name}.csv"), curve, theory
        )


def _fit_zone(data, cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    basis = spline_basis(data.times, cfg.spline_funcs)
    priors = _priors_for(cfg, data.sites)
    samples = run_chain(data, basis, priors, _chain_config(cfg), variant=cfg.model)
    delta = delta_decadal(samples, data.times)
    summary = trend_summary(delta, cfg.t_threshold)
    write_trend_summary_csv(os.path.join(out_dir, "trend_summary.csv"), data, summary)
    diag = chain_diagnostics(samples)
    write_diagnostics_csv(os.path.join(out_dir, "diagnostics.csv"), diag)
    table = {cfg.model: (dic(samples, cfg.ic_points), waic(samples, cfg.ic_points))}
    write_ic_report(os.path.join(out_dir, "ic_report.txt"), table, cfg.ic_points)
    _write_chi_outputs(out_dir, data, samples)
    render_maps(os.path.join(out_dir, "maps"), data, summary)
    save_samples(os.path.join(out_dir, "posterior.npz"), samples, data.index_names)
    return samples


def _zone_items(data, cfg):
    if not cfg.zones:
        return [("", list(data.site_ids))]
    return sorted(cfg.zones.items())


def cli_fit(cfg):
    if not cfg.input:
        raise ConfigError("input dataset path is not set (config key: input)")
    data = load_dataset(cfg.input)
    items = _zone_items(data, cfg)
    jobs = []
    for zname, sids in items:
        zdata = subset_sites(data, sids)
        zdir = os.path.join(cfg.output_dir, zname) if zname else cfg.output_dir
        jobs.append((zdata, zdir))
    if cfg.workers > 1 and len(jobs) > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            futs = [ex.submit(_fit_zone, zdata, cfg, zdir) for zdata, zdir in jobs]
            for f in futs:
                f.result()
    else:
        for zdata, zdir in jobs:
            _fit_zone(zdata, cfg, zdir)
    return 0


def _default_truth(cfg, sites, times, index_names, rng):
    n = sites.shape[0]
    P = len(index_names)
    L = cfg.spline_funcs
    t_raw = dict(cfg.simulate.get("truth", {}) or {})
    rho_max = _max_pairwise_distance(sites)
    matern = MaternParams(
        rho=float(t_raw.pop("rho", rho_max / 4.0)),
        nu=float(t_raw.pop("nu", 1.0)),
        gamma=float(t_raw.pop("gamma", 0.8)),
    )
    dof_raw = t_raw.pop("dof", 12.0)
    dof = math.inf if dof_raw in (None, "inf") else float(dof_raw)
    skew = t_raw.pop("skew", 2.0)
    skew = np.full(P, float(skew)) if np.isscalar(skew) else np.asarray(skew, dtype=float)
    mu_beta = t_raw.pop("mu_beta", 0.0)
    mu_beta = (
        np.full(P, float(mu_beta)) if np.isscalar(mu_beta) else np.asarray(mu_beta, dtype=float)
    )
    index_cov = np.asarray(t_raw.pop("index_cov", np.eye(P).tolist()), dtype=float)
    spline_cov = np.asarray(t_raw.pop("spline_cov", (0.25 * np.eye(L)).tolist()), dtype=float)
    beta_override = t_raw.pop("beta", None)
    if t_raw:
        raise ConfigError(f"unknown simulate.truth keys: {sorted(t_raw)}")
    from .covariance import build_spatial_corr

    if beta_override is not None:
        beta = np.asarray(beta_override, dtype=float)
        if beta.shape != (n, P, L):
            raise ConfigError(f"simulate.truth.beta must have shape {(n, P, L)}")
    else:
        sigma_s = build_spatial_corr(sites, matern)
        beta = simulate_beta(None, sigma_s, index_cov, spline_cov, mu_beta, rng)
    T = times.size
    return ChainState(
        beta=beta,
        mu_beta=mu_beta,
        skew=skew,
        z_abs=np.zeros(T),
        sigma2=np.ones(T),
        dof=dof,
        index_cov=index_cov,
        spline_cov=spline_cov,
        matern=matern,
    )


def cli_simulate(cfg):
    sim = cfg.simulate
    seed = int(sim.get("seed", cfg.seed))
    rng = np.random.default_rng(seed)
    spacing = float(sim.get("spacing", 1.0))
    if "grid" in sim:
        rows, cols = (int(v) for v in sim["grid"])
        n = rows * cols
    else:
        n = int(sim.get("n_sites", 9))
        cols = int(math.ceil(math.sqrt(n)))
        rows = int(math.ceil(n / cols))
    coords = [
        (spacing * c, spacing * r) for r in range(rows) for c in range(cols)
    ][:n]
    sites = np.asarray(coords, dtype=float)
    T = int(sim.get("n_times", 60))
    times = np.arange(T, dtype=float) + 1950.0
    index_names = tuple(sim.get("indexes", ("idx1", "idx2")))
    truth = _default_truth(cfg, sites, times, index_names, rng)
    data = simulate_dataset(truth, sites, times, rng, index_names=index_names)
    site_ids = tuple(f"s{i}" for i in range(n))
    data = ObservationTensor(
        y=data.y, sites=sites, times=times, index_names=index_names, site_ids=site_ids
    )
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_dataset(os.path.join(cfg.output_dir, "dataset.csv"), data)
    with open(os.path.join(cfg.output_dir, "truth.json"), "w") as fh:
        json.dump({"seed": seed, "state": state_to_dict(truth)}, fh, indent=1)
    return 0


def cli_chi(cfg, archive=None):
    if not cfg.input:
        raise ConfigError("input dataset path is not set (config key: input)")
    data = load_dataset(cfg.input)
    os.makedirs(cfg.output_dir, exist_ok=True)
    samples = load_samples(archive) if archive else None
    _write_chi_outputs(cfg.output_dir, data, samples)
    return 0


def cli_compare(cfg, variants):
    if not cfg.input:
        raise ConfigError("input dataset path is not set (config key: input)")
    from .sampler import MODEL_VARIANTS

    for v in variants:
        if v not in MODEL_VARIANTS:
            raise ConfigError(f"unknown variant {v!r} in --variants")
    data = load_dataset(cfg.input)
    items = _zone_items(data, cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    for zname, sids in items:
        zdata = subset_sites(data, sids)
        zdir = os.path.join(cfg.output_dir, zname) if zname else cfg.output_dir
        os.makedirs(zdir, exist_ok=True)
        basis = spline_basis(zdata.times, cfg.spline_funcs)
        priors = _priors_for(cfg, zdata.sites)
        table = {}
        for variant in variants:
            samples = run_chain(zdata, basis, priors, _chain_config(cfg), variant=variant)
            table[variant] = (dic(samples, cfg.ic_points), waic(samples, cfg.ic_points))
        write_ic_report(os.path.join(zdir, "ic_report.txt"), table, cfg.ic_points)
    return 0


def _build_parser():
    p = _Parser(prog="skewtproc", description="skew-t spatial process fitting")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="YAML config file")
    common.add_argument("--input", help="override the input dataset path")
    common.add_argument("--seed", type=int, help="override chain.seed")
    common.add_argument("--output-dir", help="override output.dir")
    common.add_argument("--print-config", action="store_true",
                        help="echo the resolved configuration before running")
    fit = sub.add_parser("fit", parents=[common], help="fit one model, write summaries")
    fit.add_argument("--model", help="override the model variant")
    sub.add_parser("simulate", parents=[common], help="draw a synthetic dataset")
    chi = sub.add_parser("chi", parents=[common], help="empirical extremal dependence")
    chi.add_argument("--archive", help="posterior .npz for theoretical overlays")
    cmp_ = sub.add_parser("compare", parents=[common], help="fit several variants, compare IC")
    cmp_.add_argument("--variants", default="mstp,mtp,mgp",
                      help="comma-separated variant list (default mstp,mtp,mgp)")
    return p


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {
            "input": getattr(args, "input", None),
            "seed": getattr(args, "seed", None),
            "output_dir": getattr(args, "output_dir", None),
            "model": getattr(args, "model", None),
        }
        cfg = resolve_config(load_config(args.config), overrides)
        if args.print_config:
            print(cfg.to_yaml())
        if args.command == "fit":
            return cli_fit(cfg)
        if args.command == "simulate":
            return cli_simulate(cfg)
        if args.command == "chi":
            return cli_chi(cfg, archive=args.archive)
        if args.command == "compare":
            variants = [v.strip() for v in args.variants.split(",") if v.strip()]
            return cli_compare(cfg, variants)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, BasisError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except (FactorizationError, ParameterError, np.linalg.LinAlgError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
