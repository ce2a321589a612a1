"""Evaluation statistics: dependence measures, posterior summaries, recovery."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .io import effect_prefix, sample_columns
from .model import EffectType, ModelSpec, ParameterState, edge_probabilities
from .network import Multiplex


def _pair(u, v):
    u = np.ascontiguousarray(u, dtype=np.float64).ravel()
    v = np.ascontiguousarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape or u.size < 2:
        raise ValueError("inputs must have equal length >= 2")
    return u, v


def distance_correlation(u, v) -> float:
    """Empirical distance correlation (V-statistic form).

    Returns 0 when either sample has zero distance variance.
    """
    u, v = _pair(u, v)
    dcov2, du2, dv2 = kernels.dcov_terms(u, v)
    denom = math.sqrt(du2 * dv2)
    if denom <= 0.0:
        return 0.0
    return math.sqrt(min(max(dcov2 / denom, 0.0), 1.0))


def _pearson(a, b) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else 0.0


def spearman(u, v) -> float:
    """Pearson correlation of mid-ranks; 0 when either rank vector is constant."""
    u, v = _pair(u, v)
    return max(-1.0, min(1.0, _pearson(rankdata(u), rankdata(v))))


def procrustes_correlation(A, B) -> float:
    """Procrustes correlation after translation, rotation/reflection and scaling.

    Equals ``sqrt(1 - m2)`` where ``m2`` is the minimised residual sum of
    squares between the centred, unit-norm configurations.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2:
        raise ValueError("configurations must share shape (n, p)")
    A = A - A.mean(axis=0)
    B = B - B.mean(axis=0)
    na, nb = np.linalg.norm(A), np.linalg.norm(B)
    if na == 0.0 or nb == 0.0:
        return 0.0
    s = np.linalg.svd((A / na).T @ (B / nb), compute_uv=False)
    return float(min(s.sum(), 1.0))


# ---------------------------------------------------------------------------
# posterior summaries
# ---------------------------------------------------------------------------

def _entries(chain):
    """(name, (S,) samples, pinned) for every scalar in the chain's sample store."""
    names, values = sample_columns(chain, include_latent=False, include_loglik=False)
    pinned = set(pinned_names(chain))
    for c, name in enumerate(names):
        yield name, values[:, c], name in pinned


def pinned_names(chain) -> list:
    refs = chain.references
    spec = chain.spec
    view = refs.view + 1
    out = [f"alpha_{view}", f"beta_{view}"]
    for side, nodes in (("sender", refs.sender), ("receiver", refs.receiver)):
        if nodes is None:
            continue
        kind = spec.sender if side == "sender" else spec.receiver
        prefix = effect_prefix(spec, side)
        if kind is EffectType.CONSTANT:
            out.append(f"{prefix}_{int(nodes[0]) + 1}")
        else:
            out.extend(f"{prefix}_{int(i) + 1}_{k + 1}" for k, i in enumerate(nodes))
    return out


def posterior_summaries(chain) -> list:
    """Mean, sd and central 95% interval for every stored scalar parameter.

    Pinned parameters carry ``sd = None`` and no interval.
    """
    if chain.n_samples == 0:
        raise ValueError("chain holds no post-burn-in samples")
    rows = []
    for name, x, pinned in _entries(chain):
        row = {"parameter": name, "mean": float(np.mean(x)), "sd": None, "q025": None, "q975": None,
               "pinned": pinned}
        if not pinned:
            q = np.quantile(x, [0.025, 0.975])
            row.update(sd=float(np.std(x, ddof=1)) if x.size > 1 else 0.0, q025=float(q[0]), q975=float(q[1]))
        rows.append(row)
    return rows


def posterior_mean_state(chain) -> ParameterState:
    """Plug-in state built from posterior means (latent: running mean of aligned draws)."""
    if chain.n_samples == 0:
        raise ValueError("chain holds no post-burn-in samples")
    s = chain.samples
    est = chain.final_state.copy()
    est.alpha[:] = s["alpha"].mean(axis=0)
    est.beta[:] = s["beta"].mean(axis=0)
    if "theta" in s:
        est.theta[:] = s["theta"].mean(axis=0)
    if "gamma" in s:
        est.gamma[:] = s["gamma"].mean(axis=0)
    if "lam" in s:
        est.lam[:] = s["lam"].mean(axis=0)
    if chain.z_mean is not None:
        est.z = np.array(chain.z_mean, dtype=np.float64)
    return est


def estimated_probabilities(chain, m: Multiplex, mode: str = "plugin") -> np.ndarray:
    """Edge probabilities at the posterior means (``plugin``) or averaged over draws (``mean``)."""
    x = m.x if m.F else None
    if mode == "plugin":
        return edge_probabilities(posterior_mean_state(chain), chain.spec, x)
    if mode != "mean":
        raise ValueError(f"unknown probability mode {mode!r}")
    if "z" not in chain.samples:
        raise ValueError("mean-of-probabilities needs stored latent positions")
    s = chain.samples
    st = chain.final_state.copy()
    acc = np.zeros((m.K, m.n, m.n))
    for t in range(chain.n_samples):
        st.alpha[:] = s["alpha"][t]
        st.beta[:] = s["beta"][t]
        if "theta" in s:
            st.theta[:] = s["theta"][t]
        if "gamma" in s:
            st.gamma[:] = s["gamma"][t]
        if "lam" in s:
            st.lam[:] = s["lam"][t]
        st.z = s["z"][t]
        acc += edge_probabilities(st, chain.spec, x)
    return acc / chain.n_samples


@dataclass
class RecoveryReport:
    dcor: list
    sender_spearman: Optional[list]
    receiver_spearman: Optional[list]
    procrustes: float
    view_labels: tuple = ()
    mode: str = "plugin"
    extra: dict = field(default_factory=dict)

    def rows(self) -> list:
        out = []
        for k, d in enumerate(self.dcor):
            out.append({
                "view": self.view_labels[k] if self.view_labels else str(k + 1),
                "dcor": d,
                "sender_spearman": None if self.sender_spearman is None else self.sender_spearman[k],
                "receiver_spearman": None if self.receiver_spearman is None else self.receiver_spearman[k],
                "procrustes": self.procrustes,
            })
        return out

    def to_dict(self) -> dict:
        return {"mode": self.mode, "procrustes": self.procrustes, "views": self.rows(), **self.extra}


def recovery_report(truth: ParameterState, chain, m: Multiplex, mode: str = "plugin",
                    truth_spec: ModelSpec = None) -> RecoveryReport:
    """Compare a fitted chain with the parameters that generated ``m``.

    Edge probabilities are compared over observed off-diagonal cells of each
    view (upper triangle only for undirected data).
    """
    spec = chain.spec
    if truth_spec is not None and truth_spec != spec:
        raise ValueError(f"truth was generated from {truth_spec.code}, chain fits {spec.code}")
    if truth.n != m.n or truth.K != m.K or truth.z.shape[1] != spec.p:
        raise ValueError("truth dimensions do not match the chain")
    P_true = edge_probabilities(truth, spec, m.x if m.F else None)
    P_est = estimated_probabilities(chain, m, mode)
    cells = ~np.eye(m.n, dtype=bool)
    if not m.directed:
        cells = np.triu(cells, k=1)
    dcor = []
    for k in range(m.K):
        obs = cells & (m.h[k] > 0)
        dcor.append(distance_correlation(P_true[k][obs], P_est[k][obs]))
    est = posterior_mean_state(chain)
    sender = receiver = None
    if spec.has_sender:
        sender = [spearman(truth.theta[:, k], est.theta[:, k]) for k in range(m.K)]
    if spec.has_receiver and spec.directed:
        receiver = [spearman(truth.gamma[:, k], est.gamma[:, k]) for k in range(m.K)]
    proc = procrustes_correlation(truth.z, est.z)
    return RecoveryReport(dcor, sender, receiver, proc, tuple(m.view_labels), mode)
