"""Command-line interface.

Commands: simulate, fit, uq, gof, phi.  Every run logs to stderr and
writes a resolved-config JSON next to its outputs so results can be
reproduced exactly.  Exit codes: 0 success, 2 validation error (bad
arguments, malformed files), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, ssbm
from .estimator import Coefficients, PathConfig, aic
from .evaluation import FAMILIES, gof, loo_block_cv, yules_phi
from .network import (NetworkFormatError, load_block_assignment,
                      load_edge_list, save_block_assignment, save_edge_list)
from .pipeline import EstimateConfig, UQConfig, estimate, uq_sample_and_pool
from .sampler import SamplerConfig, simulate_network
from .ssbm import VariationalConfig
from .stats import ModelSpec

log = logging.getLogger("signedergm")


def _json_dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        return ModelSpec.from_dict(json.load(fh))


def _load_coeffs(path):
    with open(path, "r", encoding="utf-8") as fh:
        return Coefficients.from_dict(json.load(fh))


def _resolved_config(args, fields):
    return {f: getattr(args, f) for f in fields}


def _merge_config_file(args, parser):
    """Overlay --config JSON under explicitly passed flags."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, "r", encoding="utf-8") as fh:
        file_conf = json.load(fh)
    if not isinstance(file_conf, dict):
        raise NetworkFormatError("--config must hold a JSON object")
    explicit = {a.split("=")[0].lstrip("-").replace("-", "_")
                for a in sys.argv if a.startswith("--")}
    for key, value in file_conf.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise NetworkFormatError(f"unknown config key {key!r}")
        if attr not in explicit:
            setattr(args, attr, value)
    return args


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: available parallelism)")
    sp.add_argument("--config", type=str, default=None,
                    help="JSON file of option defaults; flags override")


def _sampler_config(args):
    return SamplerConfig(burn_in=args.burn_in, thin=args.thin)


# -- commands -----------------------------------------------------------------


def cmd_simulate(args):
    spec = _load_spec(args.spec)
    coeffs = _load_coeffs(args.coeffs)
    blocks = load_block_assignment(args.blocks)
    net = simulate_network(coeffs, blocks, spec, _sampler_config(args),
                           seed=args.seed, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_edge_list(net, out)
    _json_dump({"command": "simulate",
                **_resolved_config(args, ("spec", "coeffs", "blocks", "out",
                                          "burn_in", "thin", "seed",
                                          "threads"))},
               str(out) + ".config.json")
    log.info("wrote %s (%d+ / %d- edges)", out, net.edge_count(1),
             net.edge_count(-1))
    return 0


def cmd_fit(args):
    spec = _load_spec(args.spec)
    net = load_edge_list(args.net)
    z = load_block_assignment(args.blocks, n_nodes=net.n_nodes,
                              k_blocks=args.k) if args.blocks else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    iter_rows = []
    config = EstimateConfig(seed=args.seed, init=args.init,
                            max_iter=args.max_iter, tol=args.tol,
                            cov=args.cov, godambe_r=args.godambe_r,
                            threads=args.threads)
    if z is None and args.k >= 2:
        # run step 1 with an iteration log, then reuse its assignment
        vc = VariationalConfig(max_iter=args.max_iter, tol=args.tol,
                               init=args.init, seed=args.seed)
        vfit = ssbm.fit(net, args.k, vc,
                        iter_callback=lambda it, lb, dl, sec:
                        iter_rows.append((it, lb, dl, sec)))
        z = ssbm.hard_assignment(vfit.alpha)
        result = estimate(net, args.k, spec, config, z=z)
        result = result.__class__(vfit, result.blocks, result.within,
                                  result.between)
    else:
        result = estimate(net, args.k, spec, config, z=z)

    payload = {
        "within": result.within.to_dict(),
        "between": None if result.between is None else result.between.to_dict(),
        "k": args.k,
        "block_sizes": result.blocks.block_sizes().tolist(),
    }
    if result.variational is not None:
        payload["variational"] = {
            "converged": bool(result.variational.converged),
            "iterations": int(result.variational.iterations),
            "lower_bound": float(result.variational.lb_trace[-1]),
        }
    if args.aic:
        coeffs = result.coefficients
        payload["aic"] = aic(coeffs, net, result.blocks, spec,
                             PathConfig(), seed=args.seed,
                             threads=args.threads)
    _json_dump(payload, out_dir / "fit.json")
    save_block_assignment(result.blocks, out_dir / "blocks.tsv")
    if result.variational is not None:
        np.savetxt(out_dir / "alpha.csv", result.variational.alpha,
                   delimiter=",", fmt="%.17g")
    if iter_rows:
        with open(out_dir / "iterations.csv", "w", encoding="utf-8") as fh:
            fh.write("iter,lb,delta,seconds\n")
            for it, lb, dl, sec in iter_rows:
                fh.write(f"{it},{lb!r},{dl!r},{sec:.6f}\n")
    _json_dump({"command": "fit",
                **_resolved_config(args, ("net", "spec", "k", "blocks",
                                          "init", "cov", "godambe_r",
                                          "max_iter", "tol", "aic",
                                          "out_dir", "seed", "threads"))},
               out_dir / "config.json")
    log.info("fit written to %s (within converged=%s)", out_dir,
             result.within.converged)
    return 0


def cmd_uq(args):
    spec = _load_spec(args.spec)
    net = load_edge_list(args.net)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.alpha:
        alpha = np.loadtxt(args.alpha, delimiter=",", ndmin=2)
        if alpha.shape[0] != net.n_nodes:
            raise NetworkFormatError("alpha rows must match the node count")
    else:
        if args.k is None:
            raise NetworkFormatError("uq needs --alpha or --k")
        vc = VariationalConfig(max_iter=args.max_iter, tol=args.tol,
                               init=args.init, seed=args.seed)
        alpha = ssbm.fit(net, args.k, vc).alpha
    config = UQConfig(seed=args.seed, cov=args.cov,
                      godambe_r=args.godambe_r, compute_aic=args.aic,
                      threads=args.threads)
    pooled = uq_sample_and_pool(alpha, net, spec, t_samples=args.t_samples,
                                config=config)
    payload = {
        "t_samples": pooled.t_samples,
        "n_skipped": pooled.n_skipped,
        "mean_aic": pooled.mean_aic,
        "within": {
            "names": pooled.within.names,
            "mean": pooled.within.mean.tolist(),
            "sampling_variance": pooled.within.sampling_variance.tolist(),
            "assignment_variance": pooled.within.assignment_variance.tolist(),
            "total_variance": pooled.within.total_variance.tolist(),
            "per_sample": [fw.beta_vec.tolist()
                           for fw, _ in pooled.per_sample_fits],
        },
    }
    if pooled.between is not None:
        payload["between"] = {
            "names": pooled.between.names,
            "mean": pooled.between.mean.tolist(),
            "sampling_variance": pooled.between.sampling_variance.tolist(),
            "assignment_variance": pooled.between.assignment_variance.tolist(),
            "total_variance": pooled.between.total_variance.tolist(),
            "per_sample": [fb.beta_vec.tolist()
                           for _, fb in pooled.per_sample_fits],
        }
    _json_dump(payload, out_dir / "uq.json")
    _json_dump({"command": "uq",
                **_resolved_config(args, ("net", "spec", "k", "alpha",
                                          "t_samples", "cov", "godambe_r",
                                          "aic", "init", "max_iter", "tol",
                                          "out_dir", "seed", "threads"))},
               out_dir / "config.json")
    log.info("uq written to %s (%d pooled, %d skipped)", out_dir,
             pooled.t_samples, pooled.n_skipped)
    return 0


def _write_long_csv(rows, path, extra_header=()):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([*extra_header, "family", "value", "count",
                           "replication"]) + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")


def _gof_summary(report):
    summary = {}
    for fam in FAMILIES:
        values = set(report.observed.get(fam, {}))
        for hists in report.simulated:
            values |= set(hists.get(fam, {}))
        per_value = {}
        for val in sorted(values):
            sims = np.array([h.get(fam, {}).get(val, 0)
                             for h in report.simulated], dtype=np.float64)
            per_value[str(val)] = {
                "observed": report.observed.get(fam, {}).get(val, 0),
                "sim_mean": float(sims.mean()),
                "sim_q025": float(np.quantile(sims, 0.025)),
                "sim_q975": float(np.quantile(sims, 0.975)),
            }
        summary[fam] = per_value
    return summary


def cmd_gof(args):
    spec = _load_spec(args.spec)
    net = load_edge_list(args.net)
    z = load_block_assignment(args.blocks, n_nodes=net.n_nodes)
    with open(args.fit, "r", encoding="utf-8") as fh:
        fit_payload = json.load(fh)
    beta_w = np.asarray(fit_payload["within"]["beta"]["beta_w"])
    beta_b = None
    if fit_payload.get("between"):
        beta_b = np.asarray(fit_payload["between"]["beta"]["beta_b"])
    coeffs = Coefficients(beta_w=beta_w, beta_b=beta_b)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = gof(net, z, coeffs, spec, n_sims=args.sims, seed=args.seed,
                 config=_sampler_config(args), threads=args.threads)
    _write_long_csv(report.to_long_rows(), out_dir / "gof.csv")
    _json_dump(_gof_summary(report), out_dir / "gof_summary.json")

    if args.loo:
        loo = loo_block_cv(net, z, spec, n_sims=args.loo_sims,
                           seed=args.seed,
                           sampler_config=_sampler_config(args),
                           threads=args.threads)
        rows = []
        for k, rep in sorted(loo.reports.items()):
            rows.extend((k, *r) for r in rep.to_long_rows())
        _write_long_csv(rows, out_dir / "loo.csv", extra_header=("block",))
        _json_dump({str(k): _gof_summary(rep)
                    for k, rep in sorted(loo.reports.items())}
                   | {"skipped": [[k, why] for k, why in loo.skipped]},
                   out_dir / "loo_summary.json")
    _json_dump({"command": "gof",
                **_resolved_config(args, ("net", "spec", "fit", "blocks",
                                          "sims", "loo", "loo_sims",
                                          "burn_in", "thin", "out_dir",
                                          "seed", "threads"))},
               out_dir / "config.json")
    log.info("gof written to %s", out_dir)
    return 0


def cmd_phi(args):
    za = load_block_assignment(args.partition_a)
    zb = load_block_assignment(args.partition_b)
    value = yules_phi(za, zb)
    print(json.dumps({"phi": value}))
    return 0


# -- parser -------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="signedergm",
        description="Signed exponential random graph models with "
                    "block-local dependence")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate a network given blocks "
                        "and coefficients")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--coeffs", required=True,
                    help="JSON {beta_w: [[...]], beta_b: [[...]]}")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--thin", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="two-step estimation")
    sp.add_argument("--net", required=True)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--blocks", default=None,
                    help="known assignment; skips membership recovery")
    sp.add_argument("--init", choices=("spectral", "random"),
                    default="spectral")
    sp.add_argument("--cov", choices=("godambe", "fisher"), default="godambe")
    sp.add_argument("--godambe-r", type=int, default=100)
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--aic", action="store_true")
    sp.add_argument("--out-dir", default=".")
    _add_common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("uq", help="membership-uncertainty pooling")
    sp.add_argument("--net", required=True)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--alpha", default=None,
                    help="membership CSV; otherwise runs recovery with --k")
    sp.add_argument("--t-samples", type=int, default=100)
    sp.add_argument("--cov", choices=("godambe", "fisher"), default="godambe")
    sp.add_argument("--godambe-r", type=int, default=100)
    sp.add_argument("--aic", action="store_true")
    sp.add_argument("--init", choices=("spectral", "random"),
                    default="spectral")
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--out-dir", default=".")
    _add_common(sp)
    sp.set_defaults(func=cmd_uq)

    sp = sub.add_parser("gof", help="goodness of fit / cross-validation")
    sp.add_argument("--net", required=True)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--fit", required=True, help="fit.json from 'fit'")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--sims", type=int, default=500)
    sp.add_argument("--loo", action="store_true")
    sp.add_argument("--loo-sims", type=int, default=100)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--thin", type=int, default=None)
    sp.add_argument("--out-dir", default=".")
    _add_common(sp)
    sp.set_defaults(func=cmd_gof)

    sp = sub.add_parser("phi", help="Yule's phi between two partitions")
    sp.add_argument("partition_a")
    sp.add_argument("partition_b")
    sp.set_defaults(func=cmd_phi)

    return parser


def main(argv=None):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "config"):
            args = _merge_config_file(args, parser)
        return args.func(args)
    except SystemExit as err:
        # argparse validation failures already use exit code 2
        return err.code if err.code is not None else 0
    except (NetworkFormatError, ValueError, FileNotFoundError, KeyError,
            json.JSONDecodeError) as err:
        log.error("%s", err)
        return 2
    except Exception as err:  # pragma: no cover - defensive
        log.error("runtime failure: %s", err)
        return 3


if __name__ == "__main__":
    sys.exit(main())
