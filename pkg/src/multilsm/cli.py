"""Command-line interface: ``multilsm {simulate,select,fit,metrics}``.

Exit codes: 0 success, 2 usage error, 3 data validation error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .network import DataValidationError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
FORMATS = ("edgelist-csv", "adjacency-csv")

log = logging.getLogger("multilsm")


class UsageError(Exception):
    pass


def _default_cache_dir() -> Path:
    root = os.environ.get("MULTILSM_CACHE") or os.path.join(
        os.environ.get("XDG_CACHE_HOME", os.path.expanduser("~/.cache")), "multilsm")
    return Path(root)


def _recorded_flags(args) -> dict:
    # output locations do not affect results, leave them out so manifests compare equal
    skip = {"func", "out_dir", "out", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _manifest(command: str, args, **extra) -> dict:
    from .io import _versions

    d = {"kind": "run", "command": command, "flags": _recorded_flags(args), "versions": _versions()}
    d.update(extra)
    return d


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    from .network import load_multiplex

    return load_multiplex(args.data, format=args.format, directed=not args.undirected)


def _write_rows(path, rows: list) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .io import write_json, write_truth
    from .model import ModelSpec
    from .network import write_edgelist
    from .simulation import TruthConfig, draw_truth, simulate_multiplex

    try:
        spec = ModelSpec.from_code(args.model, directed=not args.undirected, p=args.p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.n < 2 or args.K < 1:
        raise UsageError("--n must be >= 2 and --K >= 1")
    cfg = TruthConfig(args.n, args.K, spec, missing_rate=args.missing_rate)
    rng = np.random.default_rng(args.seed)
    truth = draw_truth(cfg, rng)
    m = simulate_multiplex(truth, spec, rng, missing_rate=args.missing_rate)
    out = _out_dir(args.out_dir)
    write_edgelist(m, out / "multiplex.csv")
    write_truth(out / "truth.json", truth, spec, {"truth_config": cfg.to_dict()})
    write_json(_manifest("simulate", args, truth_config=cfg.to_dict()), out / "manifest.json")
    print(f"wrote {m.K} views on {m.n} nodes to {out}")
    return EXIT_OK


def cmd_select(args) -> int:
    from .io import write_json
    from .selection import MIN_PER_CLASS, heuristic_select

    if args.T < MIN_PER_CLASS:
        raise UsageError(f"insufficient training replicates: --T {args.T} (need >= {MIN_PER_CLASS})")
    m = _load(args)
    cache = None if args.no_cache else (Path(args.cache_dir) if args.cache_dir else _default_cache_dir())
    res = heuristic_select(m, T=args.T, seed=args.seed, folds=args.folds, cache_dir=cache, threads=args.threads)
    print(f"{'model':<6}{'probability':>12}")
    for label, p in res.ranked():
        print(f"{label:<6}{p:>12.4f}")
    print(f"cross-validation error ({args.folds}-fold): {res.cv_error:.4f}")
    report = res.to_dict()
    log.info("classifier %s", "loaded from cache" if res.from_cache else "trained")
    # cache status stays out of stdout so a cache hit prints exactly the same report
    print(json.dumps({k: v for k, v in report.items() if k != "from_cache"}))
    if args.out:
        write_json(_manifest("select", args, result=report), args.out)
    return EXIT_OK


def _hyper_from_args(args, K: int):
    from .model import Hyperparameters

    values = {}
    if args.hyper:
        try:
            values.update(json.loads(Path(args.hyper).read_text()))
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"hyperparameter file is not valid JSON: {exc}") from None
    for name in ("m_alpha", "m_beta", "tau_alpha", "tau_beta", "nu_alpha", "nu_beta"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    try:
        return Hyperparameters.for_views(K, **values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid hyperparameters: {exc}") from None


def cmd_fit(args) -> int:
    from .initialization import initialize
    from .io import chain_manifest, read_truth, write_chain_csv, write_json, write_latent_long, write_trace_long
    from .metrics import posterior_summaries, recovery_report
    from .model import ModelSpec
    from .network import load_covariates
    from .sampler import McmcConfig, run_chain

    m = _load(args)
    if args.covariates:
        m = m.with_covariates(load_covariates(args.covariates, m.node_labels, m.directed))
    try:
        spec = ModelSpec.from_code(args.model, directed=not args.undirected, p=args.p, F=m.F)
        config = McmcConfig(args.iterations, args.burn_in, args.thin, args.seed,
                            store_latent=not args.no_store_latent)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.p > m.n - 1:
        raise UsageError(f"--p {args.p} too large for {m.n} nodes")
    hyper = _hyper_from_args(args, m.K)
    out = _out_dir(args.out_dir)
    state, refs, report = initialize(m, spec, hyper)
    if args.dump_init:
        write_json(report.to_dict(), out / "init.json")
    step = max(1, args.iterations // 10)

    def progress(t):
        if (t + 1) % step == 0:
            log.info("sweep %d / %d", t + 1, args.iterations)

    chain = run_chain(m, spec, hyper, config, init=(state, refs), progress=progress)
    chain.warnings.extend(report.warnings)
    if chain.n_samples and not np.all(np.isfinite(chain.samples["loglik"])):
        raise FloatingPointError("non-finite log-likelihood in stored samples")
    write_chain_csv(chain, out / "chain.csv")
    write_trace_long(chain, out / "trace_long.csv")
    write_latent_long(chain, out / "latent_long.csv", m.node_labels)
    extra = {"command": "fit", "flags": _recorded_flags(args), "hyperparameters": hyper.to_dict(),
             "node_labels": list(m.node_labels), "view_labels": list(m.view_labels)}
    write_json(chain_manifest(chain, extra), out / "manifest.json")
    if chain.n_samples:
        _write_rows(out / "summaries.csv", posterior_summaries(chain))
    if args.truth:
        truth, truth_spec = read_truth(args.truth)
        rep = recovery_report(truth, chain, m, mode=args.prob_mode)
        _write_rows(out / "recovery.csv", rep.rows())
        write_json(rep.to_dict(), out / "recovery.json")
    acc = ", ".join(f"{k}={v:.3f}" for k, v in chain.acceptance.items() if not math.isnan(v))
    print(f"stored {chain.n_samples} sweeps in {out}; acceptance: {acc}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    from .io import load_chain, read_coordinates, read_truth, write_json
    from .metrics import posterior_mean_state, procrustes_correlation, recovery_report

    chain_path = Path(args.chain)
    manifest = Path(args.manifest) if args.manifest else chain_path.with_name("manifest.json")
    for p in (chain_path, manifest):
        if not p.exists():
            raise FileNotFoundError(f"no such file: {p}")
    chain = load_chain(chain_path, manifest)
    m = _load(args) if args.data else None
    if m is not None and (m.n != chain.final_state.n or m.K != chain.final_state.K):
        raise DataValidationError("data dimensions do not match the chain")
    result = {}
    rows = []
    if args.truth:
        if m is None:
            raise UsageError("--truth requires --data")
        truth, truth_spec = read_truth(args.truth)
        rep = recovery_report(truth, chain, m, mode=args.prob_mode)
        result["recovery"] = rep.to_dict()
        rows = rep.rows()
        for r in rows:
            print(f"view {r['view']}: dcor={r['dcor']:.4f}"
                  + (f" sender_spearman={r['sender_spearman']:.4f}" if r["sender_spearman"] is not None else "")
                  + (f" receiver_spearman={r['receiver_spearman']:.4f}" if r["receiver_spearman"] is not None else ""))
        print(f"latent procrustes correlation: {rep.procrustes:.4f}")
    if args.coords:
        labels = json.loads(manifest.read_text()).get("node_labels")
        if labels is None:
            labels = list(m.node_labels) if m is not None else [str(i + 1) for i in range(chain.final_state.n)]
        coords = read_coordinates(args.coords, labels)
        z = posterior_mean_state(chain).z
        if coords.shape[0] != z.shape[0]:
            raise DataValidationError("coordinate file does not match the number of nodes")
        if coords.shape[1] != z.shape[1]:
            raise DataValidationError(f"coordinates have {coords.shape[1]} columns, latent space has {z.shape[1]}")
        r = procrustes_correlation(z, coords)
        result["coords_procrustes"] = r
        print(f"procrustes correlation with supplied coordinates: {r:.4f}")
    if not result:
        raise UsageError("nothing to compute: pass --truth and/or --coords")
    out = _out_dir(args.out_dir)
    _write_rows(out / "metrics.csv", rows or [{"coords_procrustes": result.get("coords_procrustes")}])
    write_json(_manifest("metrics", args, result=result), out / "metrics.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _data_flags(p, required=True):
    p.add_argument("--data", required=required, help="multiplex file")
    p.add_argument("--format", choices=FORMATS, default="edgelist-csv")
    p.add_argument("--undirected", action="store_true", help="treat views as undirected")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multilsm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a multiplex and its true parameters")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--undirected", action="store_true")
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("select", help="rank model types with the simulation-trained classifier")
    _data_flags(p)
    p.add_argument("--T", type=int, default=5000, help="training multiplexes per model type")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="write the report as JSON")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("fit", help="fit a model by MCMC")
    _data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--iterations", type=int, default=60000)
    p.add_argument("--burn-in", type=int, default=15000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--covariates", default=None)
    p.add_argument("--hyper", default=None, help="JSON file of hyperparameters")
    for name in ("m_alpha", "m_beta", "tau_alpha", "tau_beta", "nu_alpha", "nu_beta"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=None)
    p.add_argument("--truth", default=None, help="truth JSON for a recovery report")
    p.add_argument("--prob-mode", choices=("plugin", "mean"), default="plugin")
    p.add_argument("--no-store-latent", action="store_true")
    p.add_argument("--dump-init", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("metrics", help="evaluate a fitted chain")
    p.add_argument("--chain", required=True, help="chain CSV written by fit")
    p.add_argument("--manifest", default=None, help="defaults to manifest.json next to the chain")
    _data_flags(p, required=False)
    p.add_argument("--truth", default=None)
    p.add_argument("--coords", default=None, help="CSV of label,x1,...,xp for a Procrustes comparison")
    p.add_argument("--prob-mode", choices=("plugin", "mean"), default="plugin")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
