"""On-disk formats for chains, truths and run manifests.

Chains are stored as a wide CSV (one row per stored sweep) next to a JSON
manifest that carries everything needed to rebuild a :class:`ChainOutput`.
Parameter columns are 1-based: ``alpha_2`` is the second view's intercept,
``gamma_5_2`` node 5's receiver effect in view 2, ``theta_5`` a constant
sender effect, ``z_5_1`` node 5's first latent coordinate.
"""
from __future__ import annotations

import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np

from .initialization import References
from .model import EffectType, ModelSpec, ParameterState
from .sampler import ChainOutput, McmcConfig

FLOAT_FMT = "%.17g"


def effect_prefix(spec: ModelSpec, side: str) -> str:
    if not spec.directed:
        return "delta"
    return "theta" if side == "sender" else "gamma"


def _effect_columns(spec, side, key, samples, names, cols):
    kind = spec.sender if side == "sender" else spec.receiver
    arr = samples[key]
    S, n, K = arr.shape
    prefix = effect_prefix(spec, side)
    if kind is EffectType.CONSTANT:
        names.extend(f"{prefix}_{i + 1}" for i in range(n))
        cols.append(arr[:, :, 0])
    else:
        names.extend(f"{prefix}_{i + 1}_{k + 1}" for i in range(n) for k in range(K))
        cols.append(arr.reshape(S, n * K))


def sample_columns(chain: ChainOutput, include_latent: bool = True, include_loglik: bool = True):
    """Flatten the sample store into ``(names, (S, P) matrix)``."""
    s = chain.samples
    spec = chain.spec
    S = chain.n_samples
    names, cols = [], []
    K = s["alpha"].shape[1]
    names += [f"alpha_{k + 1}" for k in range(K)] + [f"beta_{k + 1}" for k in range(K)]
    cols += [s["alpha"], s["beta"]]
    names += ["mu_alpha", "mu_beta", "sigma2_alpha", "sigma2_beta"]
    cols += [np.column_stack([s[c] for c in ("mu_alpha", "mu_beta", "sigma2_alpha", "sigma2_beta")])]
    if "theta" in s:
        _effect_columns(spec, "sender", "theta", s, names, cols)
    if "gamma" in s:
        _effect_columns(spec, "receiver", "gamma", s, names, cols)
    if "lam" in s:
        F = s["lam"].shape[1]
        for key, stem in (("lam", "lambda"), ("mu_lambda", "mu_lambda"), ("sigma2_lambda", "sigma2_lambda")):
            names += [f"{stem}_{f + 1}" for f in range(F)]
            cols.append(s[key])
    if include_latent and "z" in s:
        _, n, p = s["z"].shape
        names += [f"z_{i + 1}_{c + 1}" for i in range(n) for c in range(p)]
        cols.append(s["z"].reshape(S, n * p))
    if include_loglik:
        names.append("loglik")
        cols.append(s["loglik"][:, None])
    matrix = np.hstack([np.asarray(c, dtype=np.float64).reshape(S, -1) for c in cols]) if S else np.zeros((0, len(names)))
    return names, matrix


def write_chain_csv(chain: ChainOutput, path) -> None:
    names, matrix = sample_columns(chain)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["sweep"] + names) + "\n")
        for t, row in zip(chain.sweeps, matrix):
            fh.write(str(int(t)) + "," + ",".join(FLOAT_FMT % v for v in row) + "\n")


def read_chain_csv(path):
    """Return ``(names, sweeps, matrix)`` from a chain CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "sweep":
        raise ValueError(f"{path} is not a chain CSV")
    names = rows[0][1:]
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, len(names) + 1)
    return names, body[:, 0].astype(np.int64), body[:, 1:]


def _versions() -> dict:
    import numpy
    import scipy

    from . import __version__
    from ._accel import USE_NUMBA

    out = {"multilsm": __version__, "python": sys.version.split()[0], "numpy": numpy.__version__,
           "scipy": scipy.__version__, "platform": platform.platform(), "numba_enabled": USE_NUMBA}
    if USE_NUMBA:
        import numba

        out["numba"] = numba.__version__
    return out


def spec_to_dict(spec: ModelSpec) -> dict:
    return {"code": spec.code, "directed": spec.directed, "p": spec.p, "F": spec.F}


def spec_from_dict(d: dict) -> ModelSpec:
    return ModelSpec.from_code(d["code"], directed=d["directed"], p=d["p"], F=d.get("F", 0))


def chain_manifest(chain: ChainOutput, extra: dict = None) -> dict:
    d = {
        "kind": "chain",
        "spec": spec_to_dict(chain.spec),
        "config": chain.config.to_dict(),
        "references": chain.references.to_dict(),
        "acceptance": chain.acceptance,
        "procrustes_discards": chain.procrustes_discards,
        "n_samples": chain.n_samples,
        "warnings": list(chain.warnings),
        "final_state": chain.final_state.to_dict(),
        "z_mean": None if chain.z_mean is None else chain.z_mean.tolist(),
        "versions": _versions(),
    }
    d.update(extra or {})
    return d


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def load_chain(csv_path, manifest_path) -> ChainOutput:
    """Rebuild a :class:`ChainOutput` from its CSV and manifest."""
    man = json.loads(Path(manifest_path).read_text())
    spec = spec_from_dict(man["spec"])
    refs = References.from_dict(man["references"])
    cfg = man["config"]
    config = McmcConfig(cfg["iterations"], cfg["burn_in"], cfg["thin"], cfg["seed"], cfg["procrustes_tolerance"],
                        cfg["store_latent"], frozenset(cfg.get("frozen", ())))
    final = ParameterState.from_dict(man["final_state"])
    names, sweeps, M = read_chain_csv(csv_path)
    col = {name: c for c, name in enumerate(names)}
    S = len(sweeps)
    n, K, p = final.n, final.K, spec.p

    def grab(keys):
        return M[:, [col[k] for k in keys]]

    s = {
        "alpha": grab([f"alpha_{k + 1}" for k in range(K)]),
        "beta": grab([f"beta_{k + 1}" for k in range(K)]),
        "loglik": M[:, col["loglik"]],
    }
    for c in ("mu_alpha", "mu_beta", "sigma2_alpha", "sigma2_beta"):
        s[c] = M[:, col[c]]
    for side, key, present in (("sender", "theta", spec.has_sender),
                               ("receiver", "gamma", spec.has_receiver and spec.directed)):
        if not present:
            continue
        prefix = effect_prefix(spec, side)
        kind = spec.sender if side == "sender" else spec.receiver
        if kind is EffectType.CONSTANT:
            vals = grab([f"{prefix}_{i + 1}" for i in range(n)])
            s[key] = np.repeat(vals[:, :, None], K, axis=2)
        else:
            s[key] = grab([f"{prefix}_{i + 1}_{k + 1}" for i in range(n) for k in range(K)]).reshape(S, n, K)
    if spec.F:
        for key, stem in (("lam", "lambda"), ("mu_lambda", "mu_lambda"), ("sigma2_lambda", "sigma2_lambda")):
            s[key] = grab([f"{stem}_{f + 1}" for f in range(spec.F)])
    if "z_1_1" in col:
        s["z"] = grab([f"z_{i + 1}_{c + 1}" for i in range(n) for c in range(p)]).reshape(S, n, p)
    z_mean = None if man.get("z_mean") is None else np.asarray(man["z_mean"], dtype=np.float64)
    return ChainOutput(spec, refs, config, sweeps, s, dict(man["acceptance"]), final, z_mean,
                       int(man.get("procrustes_discards", 0)), list(man.get("warnings", [])))


def write_truth(path, truth: ParameterState, spec: ModelSpec, extra: dict = None) -> None:
    d = {"kind": "truth", "spec": spec_to_dict(spec), "state": truth.to_dict()}
    d.update(extra or {})
    write_json(d, path)


def read_truth(path):
    """Return ``(state, spec)`` from a truth JSON file."""
    d = json.loads(Path(path).read_text())
    if d.get("kind") != "truth":
        raise ValueError(f"{path} is not a truth file")
    return ParameterState.from_dict(d["state"]), spec_from_dict(d["spec"])


def write_trace_long(chain: ChainOutput, path) -> None:
    """Plot-ready traces: one ``sweep,parameter,value`` row per stored scalar (latent excluded)."""
    names, M = sample_columns(chain, include_latent=False)
    with open(path, "w", newline="") as fh:
        fh.write("sweep,parameter,value\n")
        for t, row in zip(chain.sweeps, M):
            for name, v in zip(names, row):
                fh.write(f"{int(t)},{name},{FLOAT_FMT % v}\n")


def write_latent_long(chain: ChainOutput, path, node_labels=None) -> None:
    """Posterior-mean latent positions (``sweep`` = ``mean``) and, if stored, every draw."""
    z_mean = chain.z_mean if chain.z_mean is not None else chain.final_state.z
    n, p = z_mean.shape
    labels = list(node_labels) if node_labels else [str(i + 1) for i in range(n)]
    with open(path, "w", newline="") as fh:
        fh.write("sweep,node,label,dimension,value\n")
        for i in range(n):
            for c in range(p):
                fh.write(f"mean,{i + 1},{labels[i]},{c + 1},{FLOAT_FMT % z_mean[i, c]}\n")
        if "z" in chain.samples:
            Z = chain.samples["z"]
            for s, t in enumerate(chain.sweeps):
                for i in range(n):
                    for c in range(p):
                        fh.write(f"{int(t)},{i + 1},{labels[i]},{c + 1},{FLOAT_FMT % Z[s, i, c]}\n")


def read_coordinates(path, node_labels) -> np.ndarray:
    """Read ``label,x1,...,xp`` rows (header optional) ordered by ``node_labels``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path} is empty")
    try:
        [float(v) for v in rows[0][1:]]
    except ValueError:
        rows = rows[1:]
    table = {}
    for r in rows:
        table[r[0].strip()] = [float(v) for v in r[1:]]
    missing = [lab for lab in node_labels if lab not in table]
    if missing:
        raise ValueError(f"coordinates missing for nodes {missing[:5]}")
    out = np.array([table[lab] for lab in node_labels], dtype=np.float64)
    if out.ndim != 2:
        raise ValueError("ragged coordinate rows")
    return out
