"""Identifiability constraints and starting values for the sampler."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .model import EffectType, Hyperparameters, ModelSpec, ParameterState, new_state
from .network import Multiplex, degrees

log = logging.getLogger(__name__)

IRLS_MAX_ITER = 25
IRLS_TOL = 1e-8
IRLS_RIDGE = 1e-6


@dataclass
class References:
    """Pinned parameters.

    ``sender`` / ``receiver`` hold, per view, the index of the node whose
    effect is fixed at 1 (the same node in every view for constant effects),
    or ``None`` when the effect is absent. Undirected models use ``sender``
    for the shared effect.
    """

    view: int = 0
    sender: Optional[np.ndarray] = None
    receiver: Optional[np.ndarray] = None

    def pinned_mask(self, side: str, n: int, K: int) -> np.ndarray:
        nodes = self.sender if side == "sender" else self.receiver
        mask = np.zeros((n, K), dtype=bool)
        if nodes is not None:
            mask[nodes, np.arange(K)] = True
        return mask

    def to_dict(self) -> dict:
        return {
            "view": self.view,
            "sender": None if self.sender is None else [int(v) for v in self.sender],
            "receiver": None if self.receiver is None else [int(v) for v in self.receiver],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "References":
        as_arr = lambda v: None if v is None else np.asarray(v, dtype=np.int64)
        return cls(d.get("view", 0), as_arr(d.get("sender")), as_arr(d.get("receiver")))


@dataclass
class InitReport:
    z0: np.ndarray
    alpha0: np.ndarray
    beta0: np.ndarray
    reference_view: int
    reference_sender_node: Optional[list]
    reference_receiver_node: Optional[list]
    disconnected_pairs: int
    latent_scale: float = 1.0
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "z0": self.z0.tolist(),
            "alpha0": self.alpha0.tolist(),
            "beta0": self.beta0.tolist(),
            "reference_view": self.reference_view,
            "reference_sender_node": self.reference_sender_node,
            "reference_receiver_node": self.reference_receiver_node,
            "disconnected_pairs": self.disconnected_pairs,
            "latent_scale": self.latent_scale,
            "warnings": list(self.warnings),
        }


def _view_geodesics(m: Multiplex, k: int):
    adj = (m.y[k] * m.h[k]) > 0
    adj = adj | adj.T
    g = shortest_path(adj.astype(np.float64), method="D", directed=False, unweighted=True)
    off = ~np.eye(m.n, dtype=bool)
    finite = np.isfinite(g) & off
    unreachable = int((~np.isfinite(g) & off).sum() // 2)
    fill = (g[finite].max() if finite.any() else 0.0) + 1.0
    g[~np.isfinite(g)] = fill
    np.fill_diagonal(g, 0.0)
    return g, unreachable


def geodesic_average(m: Multiplex, return_disconnected: bool = False):
    """Shortest-path lengths on each symmetrised view, averaged over views.

    Pairs with no path in a view are set to that view's largest finite
    geodesic plus one before averaging.
    """
    total = np.zeros((m.n, m.n))
    missing = 0
    for k in range(m.K):
        g, unreachable = _view_geodesics(m, k)
        total += g
        missing += unreachable
    avg = total / m.K
    return (avg, missing) if return_disconnected else avg


def classical_mds(D, p: int) -> np.ndarray:
    """Torgerson scaling of a distance matrix into ``p`` dimensions.

    Each axis is the eigenvector of ``-1/2 J D^2 J`` scaled by the square
    root of its (clipped) eigenvalue, with its first non-negligible loading
    made positive so the output is reproducible.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if p > n - 1:
        raise ValueError(f"cannot embed {n} points in {p} dimensions (p must be <= n - 1)")
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (D ** 2) @ J
    B = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:p]
    vals, vecs = vals[order], vecs[:, order]
    for c in range(p):
        nz = np.flatnonzero(np.abs(vecs[:, c]) > 1e-10)
        if nz.size and vecs[nz[0], c] < 0:
            vecs[:, c] = -vecs[:, c]
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def fit_logistic_irls(x, y, max_iter: int = IRLS_MAX_ITER, tol: float = IRLS_TOL, ridge: float = IRLS_RIDGE):
    """Intercept-and-slope logistic regression by iteratively reweighted least squares.

    Returns ``(intercept, slope, converged)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    X = np.column_stack([np.ones_like(x), x])
    coef = np.zeros(2)
    deviance = np.inf
    for _ in range(max_iter):
        eta = X @ coef
        p = 1.0 / (1.0 + np.exp(-eta))
        w = np.clip(p * (1.0 - p), 1e-10, None)
        work = eta + (y - p) / w
        A = X.T @ (w[:, None] * X) + ridge * np.eye(2)
        coef = np.linalg.solve(A, X.T @ (w * work))
        eta = X @ coef
        new_dev = -2.0 * np.sum(y * eta - np.logaddexp(0.0, eta))
        if np.isfinite(deviance) and abs(new_dev - deviance) <= tol * (abs(new_dev) + tol):
            return coef[0], coef[1], True
        deviance = new_dev
    return coef[0], coef[1], False


def logistic_init(m: Multiplex, z0):
    """Per-view intercept and distance coefficient from a logistic fit on ``z0``.

    Both are clamped at zero. The slope sign is flipped so that a positive
    ``beta0`` means probability decreasing with squared distance.
    """
    diff = z0[:, None, :] - z0[None, :, :]
    dsq = np.einsum("ijc,ijc->ij", diff, diff)
    cells = ~np.eye(m.n, dtype=bool)
    if not m.directed:
        cells = np.triu(cells, k=1)
    alpha0 = np.zeros(m.K)
    beta0 = np.zeros(m.K)
    for k in range(m.K):
        obs = cells & (m.h[k] > 0)
        if not obs.any():
            continue
        a, b, converged = fit_logistic_irls(dsq[obs], m.y[k][obs])
        if not converged:
            log.warning("logistic initialisation for view %d stopped at the iteration cap", k)
        alpha0[k] = max(a, 0.0)
        beta0[k] = max(-b, 0.0)
    return alpha0, beta0


def select_references(m: Multiplex, spec: ModelSpec) -> References:
    """Reference view 0 and, per effect, the highest-degree node pinned at 1.

    Ties go to the lowest node index.
    """
    S, R = degrees(m)
    K = m.K

    def pick(deg, kind):
        if kind is EffectType.NULL:
            return None
        if kind is EffectType.VARIABLE:
            return np.argmax(deg, axis=0).astype(np.int64)
        return np.full(K, int(np.argmax(deg.mean(axis=1))), dtype=np.int64)

    if not spec.directed:
        return References(0, pick(S, spec.sender), None)
    return References(0, pick(S, spec.sender), pick(R, spec.receiver))


def initialize(m: Multiplex, spec: ModelSpec, hyper: Hyperparameters):
    """Starting state, references and a report of the initialisation.

    The MDS configuration is rescaled so that the reference view's fitted
    distance coefficient equals its pinned value; other views' coefficients
    are rescaled to match.
    """
    warnings = []
    D, missing = geodesic_average(m, return_disconnected=True)
    if missing:
        warnings.append(f"{missing} node pairs unreachable in at least one view; imputed")
    z0 = classical_mds(D, spec.p)
    alpha0, beta0 = logistic_init(m, z0)
    scale = 1.0
    if beta0[0] > 0:
        scale = float(np.sqrt(beta0[0] / hyper.reference_beta))
        z0 = z0 * scale
        beta0 = beta0 / scale ** 2
    else:
        warnings.append("reference view has no distance signal; latent scale left unchanged")
    refs = select_references(m, spec)
    state = new_state(m.n, m.K, spec, z=z0)
    state.alpha[:] = alpha0
    state.beta[:] = beta0
    state.alpha[refs.view] = hyper.reference_alpha
    state.beta[refs.view] = hyper.reference_beta
    if refs.sender is not None:
        state.theta[refs.sender, np.arange(m.K)] = 1.0
    if refs.receiver is not None:
        state.gamma[refs.receiver, np.arange(m.K)] = 1.0
    state.mu_alpha = float(np.mean(state.alpha))
    state.mu_beta = float(np.mean(state.beta))
    state.sigma2_alpha = 1.0
    state.sigma2_beta = 1.0
    state.lam[:] = 0.0
    state.mu_lambda[:] = hyper.m_lambda
    state.sigma2_lambda[:] = 1.0
    report = InitReport(
        z0=state.z.copy(), alpha0=alpha0, beta0=beta0, reference_view=refs.view,
        reference_sender_node=None if refs.sender is None else refs.sender.tolist(),
        reference_receiver_node=None if refs.receiver is None else refs.receiver.tolist(),
        disconnected_pairs=missing, latent_scale=scale, warnings=warnings,
    )
    for w in warnings:
        log.info(w)
    return state, refs, report
