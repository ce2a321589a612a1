"""Synthetic multiplexes drawn from the latent space model."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .distributions import sample_truncated_normal
from .model import EffectType, ModelSpec, ParameterState, edge_probabilities, new_state
from .network import Multiplex


@dataclass
class TruthConfig:
    """Generator law for true parameters.

    The reference view is fixed at ``(reference_alpha, reference_beta)``;
    other views draw their intercept and distance coefficient from normals
    truncated to ``[0, inf)``. Effects are Unif(-1, 1) with one random node
    per effect (and per view, for variable effects) pinned to 1.
    """

    n: int
    K: int
    spec: ModelSpec
    reference_alpha: float = 2.0
    reference_beta: float = 1.0
    alpha_mean: float = 2.0
    alpha_sd: float = 0.5
    beta_mean: float = 1.0
    beta_sd: float = 0.5
    lambda_mean: float = 1.0
    lambda_sd: float = 0.5
    missing_rate: float = 0.0

    def __post_init__(self):
        if self.n < 2 or self.K < 1:
            raise ValueError("need n >= 2 and K >= 1")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")
        if self.alpha_sd <= 0 or self.beta_sd <= 0:
            raise ValueError("truth standard deviations must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spec"] = {"code": self.spec.code, "directed": self.spec.directed, "p": self.spec.p, "F": self.spec.F}
        return d


def _draw_effects(kind: EffectType, n: int, K: int, rng: np.random.Generator) -> np.ndarray:
    if kind is EffectType.NULL:
        return np.zeros((n, K))
    if kind is EffectType.CONSTANT:
        vals = rng.uniform(-1.0, 1.0, size=n)
        vals[rng.integers(n)] = 1.0
        return np.repeat(vals[:, None], K, axis=1)
    vals = rng.uniform(-1.0, 1.0, size=(n, K))
    vals[rng.integers(n, size=K), np.arange(K)] = 1.0
    return vals


def draw_truth(cfg: TruthConfig, rng: np.random.Generator) -> ParameterState:
    spec = cfg.spec
    n, K = cfg.n, cfg.K
    state = new_state(n, K, spec, z=rng.standard_normal((n, spec.p)))
    state.alpha[0] = cfg.reference_alpha
    state.beta[0] = cfg.reference_beta
    for k in range(1, K):
        state.alpha[k] = sample_truncated_normal(cfg.alpha_mean, cfg.alpha_sd ** 2, 0.0, np.inf, rng)
        state.beta[k] = sample_truncated_normal(cfg.beta_mean, cfg.beta_sd ** 2, 0.0, np.inf, rng)
    state.theta[:] = _draw_effects(spec.sender, n, K, rng)
    if spec.directed:
        state.gamma[:] = _draw_effects(spec.receiver, n, K, rng)
    for f in range(spec.F):
        state.lam[f] = sample_truncated_normal(cfg.lambda_mean, cfg.lambda_sd ** 2, 0.0, np.inf, rng)
    state.mu_alpha = float(np.mean(state.alpha))
    state.mu_beta = float(np.mean(state.beta))
    state.mu_lambda[:] = cfg.lambda_mean
    return state


def simulate_multiplex(truth: ParameterState, spec: ModelSpec, rng: np.random.Generator, x=None,
                       missing_rate: float = 0.0, node_labels=None) -> Multiplex:
    """Draw every off-diagonal cell independently from its edge probability.

    Undirected specs draw the upper triangle and mirror it. With
    ``missing_rate > 0`` each dyad is independently masked.
    """
    if spec.F and x is None:
        raise ValueError("covariates are required for a model with F > 0")
    P = edge_probabilities(truth, spec, x)
    K, n, _ = P.shape
    y = (rng.random((K, n, n)) < P).astype(np.float64)
    h = np.ones((K, n, n))
    if missing_rate > 0:
        h = (rng.random((K, n, n)) >= missing_rate).astype(np.float64)
    if not spec.directed:
        y = np.triu(y, k=1)
        y = y + y.transpose(0, 2, 1)
        h = np.triu(h, k=1)
        h = h + h.transpose(0, 2, 1)
    return Multiplex(y, h, x, tuple(node_labels or ()), directed=spec.directed)
