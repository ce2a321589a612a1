"""Metropolis-Hastings within Gibbs sampler for multiplex latent space models.

One sweep, in order:

1. Gibbs draws of the hyper-means and hyper-variances;
2. a joint MH move on ``(alpha_k, beta_k)`` for every non-reference view;
3. sequential MH moves on the latent positions, followed by the
   Procrustes guard on the whole configuration;
4. node-by-node MH moves on the sender/receiver effects, joint over views;
5. MH moves on covariate coefficients when covariates are present.

All proposals are state dependent, so every acceptance ratio carries the
full Hastings correction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .distributions import (
    normal_logpdf,
    sample_inverse_gamma,
    sample_truncated_normal,
    truncated_normal_logpdf,
)
from .initialization import References, initialize
from .model import (
    EffectType,
    Hyperparameters,
    ModelSpec,
    ParameterState,
    covariate_offset,
    likelihood_weights,
    squared_distances,
)
from .network import Multiplex

log = logging.getLogger(__name__)

BLOCKS = ("nuisance", "alpha", "beta", "latent", "effects", "lambda")
# below this curvature the effect proposal falls back to Unif(-1, 1)
MIN_EFFECT_CURVATURE = 1e-12


@dataclass
class McmcConfig:
    iterations: int = 60000
    burn_in: int = 15000
    thin: int = 1
    seed: int = 0
    procrustes_tolerance: float = 1e-8
    store_latent: bool = True
    frozen: frozenset = frozenset()

    def __post_init__(self):
        if self.iterations < 0 or self.burn_in < 0:
            raise ValueError("iterations and burn_in must be non-negative")
        if self.burn_in > self.iterations:
            raise ValueError("burn_in cannot exceed iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        self.frozen = frozenset(self.frozen)
        unknown = self.frozen - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown blocks {sorted(unknown)}; choose from {BLOCKS}")

    @property
    def n_stored(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thin)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations, "burn_in": self.burn_in, "thin": self.thin,
            "seed": self.seed, "procrustes_tolerance": self.procrustes_tolerance,
            "store_latent": self.store_latent, "frozen": sorted(self.frozen),
        }


@dataclass
class ChainOutput:
    """Post-burn-in samples and diagnostics of one chain.

    ``samples`` maps parameter names to arrays whose first axis indexes the
    stored sweeps listed in ``sweeps``.
    """

    spec: ModelSpec
    references: References
    config: McmcConfig
    sweeps: np.ndarray
    samples: dict
    acceptance: dict
    final_state: ParameterState
    z_mean: Optional[np.ndarray] = None
    procrustes_discards: int = 0
    warnings: list = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.sweeps)


class ChainContext:
    """Data and cached derived quantities shared by the update steps."""

    def __init__(self, m: Multiplex, spec: ModelSpec, hyper: Hyperparameters, refs: References,
                 state: ParameterState):
        if spec.directed != m.directed:
            raise ValueError("model and multiplex disagree on directedness")
        if spec.F != m.F:
            raise ValueError(f"model expects {spec.F} covariates, multiplex has {m.F}")
        self.m = m
        self.spec = spec
        self.hyper = hyper
        self.refs = refs
        self.Y = np.ascontiguousarray(m.y)
        self.H = np.ascontiguousarray(m.h)
        self.HW = likelihood_weights(m)
        self.X = np.ascontiguousarray(m.x)
        self.mode = spec.mode
        self.undirected = not spec.directed
        self.sender_pinned = refs.pinned_mask("sender", m.n, m.K)
        self.receiver_pinned = refs.pinned_mask("receiver", m.n, m.K)
        self.refresh(state)

    def refresh(self, state: ParameterState):
        self.dsq = squared_distances(state.z)
        self.cov = covariate_offset(state.lam, self.X)

    def view_taylor(self, state, k, a, b):
        return kernels.view_taylor(self.Y, self.HW, k, float(a), float(b), state.theta, state.gamma,
                                   self.mode, self.dsq, self.cov)

    def effect_terms(self, state, i, side, values):
        return kernels.effect_terms(self.Y, self.H, state.alpha, state.beta, state.theta, state.gamma,
                                    self.mode, self.dsq, self.cov, i, side,
                                    np.ascontiguousarray(values, dtype=np.float64))

    def loglik_views(self, state):
        return kernels.loglik_views(self.Y, self.HW, state.alpha, state.beta, state.theta, state.gamma,
                                    self.mode, self.dsq, self.cov)


# ---------------------------------------------------------------------------
# Gibbs block
# ---------------------------------------------------------------------------

def inverse_gamma_parameters(values, mu: float, tau: float, nu: float, m: float = 0.0):
    """Shape and rate of the full conditional of a hyper-variance.

    ``m`` is the prior mean of the hyper-mean; the conditional is
    ``(tau + tau * sum (x - mu)^2 + (mu - m)^2) / (2 tau)``.
    """
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    K = values.size
    shape = (nu + K + 1) / 2.0
    rate = (tau + tau * float(np.sum((values - mu) ** 2)) + (mu - m) ** 2) / (2.0 * tau)
    return shape, rate


def hyper_mean_parameters(values, sigma2: float, tau: float, m: float):
    """Mean and variance of the (zero-truncated) normal full conditional of a hyper-mean."""
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    K = values.size
    mean = (tau * float(np.sum(values)) + m) / (1.0 + K * tau)
    var = tau * sigma2 / (1.0 + K * tau)
    return mean, var


def gibbs_update_nuisance(state: ParameterState, hyper: Hyperparameters, rng: np.random.Generator) -> ParameterState:
    """Draw hyper-variances then hyper-means from their full conditionals (in place)."""
    for name, values, tau, nu, m in (
        ("alpha", state.alpha, hyper.tau_alpha, hyper.nu_alpha, hyper.m_alpha),
        ("beta", state.beta, hyper.tau_beta, hyper.nu_beta, hyper.m_beta),
    ):
        mu = getattr(state, f"mu_{name}")
        shape, rate = inverse_gamma_parameters(values, mu, tau, nu, m)
        s2 = float(sample_inverse_gamma(shape, rate, rng))
        setattr(state, f"sigma2_{name}", s2)
        mean, var = hyper_mean_parameters(values, s2, tau, m)
        setattr(state, f"mu_{name}", sample_truncated_normal(mean, var, 0.0, math.inf, rng))
    for f in range(len(state.lam)):
        shape, rate = inverse_gamma_parameters(state.lam[f], state.mu_lambda[f], hyper.tau_lambda,
                                               hyper.nu_lambda, hyper.m_lambda)
        state.sigma2_lambda[f] = float(sample_inverse_gamma(shape, rate, rng))
        mean, var = hyper_mean_parameters(state.lam[f], state.sigma2_lambda[f], hyper.tau_lambda, hyper.m_lambda)
        state.mu_lambda[f] = sample_truncated_normal(mean, var, 0.0, math.inf, rng)
    return state


# ---------------------------------------------------------------------------
# intercepts and distance coefficients
# ---------------------------------------------------------------------------

def alpha_proposal_moments(ctx: ChainContext, state: ParameterState, k: int, beta_k: float = None):
    """Proposal mean and variance for ``alpha_k``, expanded at ``mu_alpha``."""
    b = state.beta[k] if beta_k is None else beta_k
    s = ctx.view_taylor(state, k, state.mu_alpha, b)
    var = 1.0 / (s[2] + 1.0 / state.sigma2_alpha)
    return var * (s[0] - s[1]) + state.mu_alpha, var


def beta_proposal_moments(ctx: ChainContext, state: ParameterState, k: int, alpha_k: float = None):
    """Proposal mean and variance for ``beta_k``, expanded at ``mu_beta``."""
    a = state.alpha[k] if alpha_k is None else alpha_k
    s = ctx.view_taylor(state, k, a, state.mu_beta)
    var = 1.0 / (s[4] + 1.0 / state.sigma2_beta)
    return var * s[3] + state.mu_beta, var


def _check_free_view(ctx, k):
    if k == ctx.refs.view:
        raise ValueError("the reference view's intercept and coefficient are pinned")


def propose_alpha(ctx: ChainContext, state: ParameterState, k: int, rng: np.random.Generator):
    """Return ``(candidate, log q(candidate), log q(current))``."""
    _check_free_view(ctx, k)
    mean, var = alpha_proposal_moments(ctx, state, k)
    cand = mean + math.sqrt(var) * rng.standard_normal()
    return cand, normal_logpdf(cand, mean, var), normal_logpdf(state.alpha[k], mean, var)


def propose_beta(ctx: ChainContext, state: ParameterState, k: int, rng: np.random.Generator):
    _check_free_view(ctx, k)
    mean, var = beta_proposal_moments(ctx, state, k)
    cand = mean + math.sqrt(var) * rng.standard_normal()
    return cand, normal_logpdf(cand, mean, var), normal_logpdf(state.beta[k], mean, var)


def mh_accept(log_post_old: float, log_post_new: float, log_q_forward: float, log_q_reverse: float,
              rng: np.random.Generator) -> bool:
    """Metropolis-Hastings acceptance; a ``-inf`` candidate is always rejected."""
    if log_post_new == -math.inf:
        rng.random()
        return False
    log_ratio = log_post_new - log_post_old + log_q_reverse - log_q_forward
    return math.log(rng.random()) < log_ratio


def update_alpha_beta(ctx: ChainContext, state: ParameterState, k: int, rng: np.random.Generator,
                      update_alpha: bool = True, update_beta: bool = True) -> bool:
    """Joint MH move on ``(alpha_k, beta_k)``.

    The candidate intercept is drawn first, then the coefficient given the
    candidate intercept; the reverse path mirrors that order.
    """
    _check_free_view(ctx, k)
    a_old, b_old = float(state.alpha[k]), float(state.beta[k])
    e_a, e_b = rng.standard_normal(2)
    lq_fwd = lq_rev = 0.0
    a_new, b_new = a_old, b_old
    if update_alpha:
        ma, va = alpha_proposal_moments(ctx, state, k, b_old)
        a_new = ma + math.sqrt(va) * e_a
        lq_fwd += normal_logpdf(a_new, ma, va)
    if update_beta:
        mb, vb = beta_proposal_moments(ctx, state, k, a_new)
        b_new = mb + math.sqrt(vb) * e_b
        lq_fwd += normal_logpdf(b_new, mb, vb)
    if a_new < 0 or b_new < 0:
        rng.random()
        return False
    if update_alpha:
        ma_r, va_r = alpha_proposal_moments(ctx, state, k, b_new)
        lq_rev += normal_logpdf(a_old, ma_r, va_r)
    if update_beta:
        mb_r, vb_r = beta_proposal_moments(ctx, state, k, a_old)
        lq_rev += normal_logpdf(b_old, mb_r, vb_r)
    ll_old = ctx.view_taylor(state, k, a_old, b_old)[5]
    ll_new = ctx.view_taylor(state, k, a_new, b_new)[5]

    def prior(a, b):
        return -0.5 * ((a - state.mu_alpha) ** 2 / state.sigma2_alpha + (b - state.mu_beta) ** 2 / state.sigma2_beta)

    if mh_accept(ll_old + prior(a_old, b_old), ll_new + prior(a_new, b_new), lq_fwd, lq_rev, rng):
        state.alpha[k] = a_new
        state.beta[k] = b_new
        return True
    return False


# ---------------------------------------------------------------------------
# latent positions
# ---------------------------------------------------------------------------

def latent_proposal_moments(ctx: ChainContext, state: ParameterState, i: int):
    """Mean vector and shared per-coordinate variance of the proposal for ``z_i``."""
    mu, s2 = kernels.latent_moments(ctx.Y, ctx.H, state.alpha, state.beta, state.theta, state.gamma,
                                    ctx.mode, state.z, ctx.dsq, ctx.cov, i)
    return np.asarray(mu), float(s2)


def propose_latent(ctx: ChainContext, state: ParameterState, i: int, rng: np.random.Generator):
    """Return ``(candidate, log q forward, log q reverse)`` for node ``i``."""
    mu, s2 = latent_proposal_moments(ctx, state, i)
    cand = mu + math.sqrt(s2) * rng.standard_normal(mu.shape[0])
    trial = state.copy()
    trial.z[i] = cand
    saved = ctx.dsq
    ctx.dsq = squared_distances(trial.z)
    mu_r, s2_r = latent_proposal_moments(ctx, trial, i)
    ctx.dsq = saved
    lq_fwd = sum(normal_logpdf(c, m_, s2) for c, m_ in zip(cand, mu))
    lq_rev = sum(normal_logpdf(c, m_, s2_r) for c, m_ in zip(state.z[i], mu_r))
    return cand, lq_fwd, lq_rev


def update_latent(ctx: ChainContext, state: ParameterState, rng: np.random.Generator) -> int:
    n, p = state.z.shape
    eps = rng.standard_normal((n, p))
    logu = np.log(rng.random(n))
    return int(kernels.latent_sweep(ctx.Y, ctx.H, state.alpha, state.beta, state.theta, state.gamma,
                                    ctx.mode, state.z, ctx.dsq, ctx.cov, eps, logu, ctx.undirected))


def procrustes_align(z_new, z_prev):
    """Translate and rotate/reflect ``z_new`` onto ``z_prev`` (no scaling)."""
    c_new = z_new.mean(axis=0)
    c_prev = z_prev.mean(axis=0)
    A = z_new - c_new
    B = z_prev - c_prev
    U, _, Vt = np.linalg.svd(A.T @ B)
    return A @ (U @ Vt) + c_prev


def procrustes_guard(z_new, z_prev, tol: float = 1e-8):
    """Decide whether a new configuration is only a rigid motion of the old one.

    Returns ``("discard", z_prev)`` when the aligned new configuration matches
    ``z_prev`` within ``tol`` in every coordinate, otherwise ``("keep", aligned)``.
    """
    aligned = procrustes_align(np.asarray(z_new, dtype=np.float64), np.asarray(z_prev, dtype=np.float64))
    if np.max(np.abs(aligned - z_prev)) <= tol:
        return "discard", np.array(z_prev, dtype=np.float64)
    return "keep", aligned


# ---------------------------------------------------------------------------
# sender / receiver effects
# ---------------------------------------------------------------------------

def _side_index(side: str) -> int:
    return {"sender": 0, "undirected": 0, "receiver": 1}[side]


def _effect_kind(spec: ModelSpec, side: str) -> EffectType:
    return spec.receiver if side == "receiver" else spec.sender


def effect_proposal_moments(ctx: ChainContext, state: ParameterState, i: int, side: str, values=None):
    """Per-view gradient and curvature terms of node ``i``'s effect.

    Returns ``(grad, curv)``, arrays of length K, such that a variable effect
    in view k is proposed from N(value + grad_k / curv_k, 1 / curv_k) and a
    constant one from N(value + sum grad / sum curv, 1 / sum curv), both
    truncated to (-1, 1).
    """
    arr = state.gamma if side == "receiver" else state.theta
    vals = arr[i] if values is None else np.asarray(values, dtype=np.float64)
    T = ctx.effect_terms(state, i, _side_index(side), vals)
    slope = state.alpha * ctx.spec.effect_slope
    return slope * T[:, 0], slope ** 2 * T[:, 1], T[:, 2]


def _draw_effect(mean_base, grad, curv, rng):
    if curv <= MIN_EFFECT_CURVATURE:
        return rng.uniform(-1.0, 1.0)
    var = 1.0 / curv
    return sample_truncated_normal(mean_base + grad * var, var, -1.0, 1.0, rng)


def _effect_logq(x, mean_base, grad, curv):
    if curv <= MIN_EFFECT_CURVATURE:
        return -math.log(2.0)
    var = 1.0 / curv
    return truncated_normal_logpdf(x, mean_base + grad * var, var, -1.0, 1.0)


def propose_effect(ctx: ChainContext, state: ParameterState, i: int, side: str, rng: np.random.Generator):
    """Candidate effect row for node ``i`` with forward and reverse log densities.

    Returns ``(candidate (K,), log q forward, log q reverse, delta loglik)``.
    Pinned entries are carried over unchanged.
    """
    kind = _effect_kind(ctx.spec, side)
    if kind is EffectType.NULL:
        raise ValueError(f"model {ctx.spec.code} has no {side} effect")
    pinned = (ctx.receiver_pinned if side == "receiver" else ctx.sender_pinned)[i]
    arr = state.gamma if side == "receiver" else state.theta
    cur = arr[i].copy()
    grad, curv, ll_old = effect_proposal_moments(ctx, state, i, side)
    cand = cur.copy()
    lq_fwd = 0.0
    if kind is EffectType.CONSTANT:
        if pinned.any():
            raise ValueError(f"node {i} is the pinned {side} reference")
        g, c = grad.sum(), curv.sum()
        cand[:] = _draw_effect(cur[0], g, c, rng)
        lq_fwd = _effect_logq(cand[0], cur[0], g, c)
    else:
        free = np.flatnonzero(~pinned)
        if free.size == 0:
            raise ValueError(f"node {i} is the pinned {side} reference in every view")
        for k in free:
            cand[k] = _draw_effect(cur[k], grad[k], curv[k], rng)
            lq_fwd += _effect_logq(cand[k], cur[k], grad[k], curv[k])
    grad_r, curv_r, ll_new = effect_proposal_moments(ctx, state, i, side, cand)
    if kind is EffectType.CONSTANT:
        lq_rev = _effect_logq(cur[0], cand[0], grad_r.sum(), curv_r.sum())
    else:
        lq_rev = sum(_effect_logq(cur[k], cand[k], grad_r[k], curv_r[k]) for k in free)
    return cand, lq_fwd, lq_rev, float(np.sum(ll_new) - np.sum(ll_old))


def update_effects(ctx: ChainContext, state: ParameterState, rng: np.random.Generator) -> dict:
    """Sequential-over-nodes sweep of effect moves; returns accept/attempt counts per side."""
    spec = ctx.spec
    sides = []
    if not spec.directed:
        if spec.has_sender:
            sides.append("undirected")
    else:
        if spec.has_sender:
            sides.append("sender")
        if spec.has_receiver:
            sides.append("receiver")
    counts = {s: [0, 0] for s in sides}
    n = state.n
    for i in range(n):
        for side in sides:
            kind = _effect_kind(spec, side)
            pinned = (ctx.receiver_pinned if side == "receiver" else ctx.sender_pinned)[i]
            if pinned.all() or (kind is EffectType.CONSTANT and pinned.any()):
                continue
            cand, lq_fwd, lq_rev, dll = propose_effect(ctx, state, i, side, rng)
            counts[side][1] += 1
            if mh_accept(0.0, dll, lq_fwd, lq_rev, rng):
                arr = state.gamma if side == "receiver" else state.theta
                arr[i] = cand
                counts[side][0] += 1
    return counts


# ---------------------------------------------------------------------------
# covariate coefficients
# ---------------------------------------------------------------------------

def lambda_proposal_moments(ctx: ChainContext, state: ParameterState, f: int):
    """Proposal mean and variance for ``lambda_f``, expanded at ``mu_lambda_f``."""
    x = ctx.X[f]
    eta = kernels.eta_tensor(state.alpha, state.beta, state.theta, state.gamma, ctx.mode, ctx.dsq,
                             ctx.cov - state.lam[f] * x + state.mu_lambda[f] * x)
    p = kernels.logistic(eta)
    w = ctx.HW.copy()
    idx = np.arange(state.n)
    w[:, idx, idx] = 0.0
    grad = float(np.sum(w * x[None] * (p - ctx.Y)))
    curv = float(np.sum(w * x[None] ** 2 * p * (1.0 - p)))
    var = 1.0 / (curv + 1.0 / state.sigma2_lambda[f])
    return var * grad + state.mu_lambda[f], var


def propose_lambda(ctx: ChainContext, state: ParameterState, f: int, rng: np.random.Generator):
    mean, var = lambda_proposal_moments(ctx, state, f)
    cand = sample_truncated_normal(mean, var, 0.0, math.inf, rng)
    return (cand, truncated_normal_logpdf(cand, mean, var, 0.0, math.inf),
            truncated_normal_logpdf(state.lam[f], mean, var, 0.0, math.inf))


def update_lambda(ctx: ChainContext, state: ParameterState, rng: np.random.Generator) -> int:
    accepted = 0
    for f in range(len(state.lam)):
        old = float(state.lam[f])
        cand, lq_fwd, lq_rev = propose_lambda(ctx, state, f, rng)
        ll_old = float(np.sum(ctx.loglik_views(state)))
        cov_old = ctx.cov
        ctx.cov = cov_old + (cand - old) * ctx.X[f]
        state.lam[f] = cand
        ll_new = float(np.sum(ctx.loglik_views(state)))
        mu, s2 = state.mu_lambda[f], state.sigma2_lambda[f]
        lp_old = ll_old - 0.5 * (old - mu) ** 2 / s2
        lp_new = ll_new - 0.5 * (cand - mu) ** 2 / s2
        if mh_accept(lp_old, lp_new, lq_fwd, lq_rev, rng):
            accepted += 1
        else:
            state.lam[f] = old
            ctx.cov = cov_old
    return accepted


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _sample_store(spec: ModelSpec, state: ParameterState, S: int, store_latent: bool) -> dict:
    n, K, F = state.n, state.K, len(state.lam)
    store = {
        "alpha": np.empty((S, K)), "beta": np.empty((S, K)),
        "mu_alpha": np.empty(S), "mu_beta": np.empty(S),
        "sigma2_alpha": np.empty(S), "sigma2_beta": np.empty(S),
        "loglik": np.empty(S),
    }
    if spec.has_sender:
        store["theta"] = np.empty((S, n, K))
    if spec.has_receiver and spec.directed:
        store["gamma"] = np.empty((S, n, K))
    if F:
        store["lam"] = np.empty((S, F))
        store["mu_lambda"] = np.empty((S, F))
        store["sigma2_lambda"] = np.empty((S, F))
    if store_latent:
        store["z"] = np.empty((S, n, spec.p))
    return store


def _record(store: dict, s: int, state: ParameterState, loglik: float):
    for name in ("alpha", "beta", "theta", "gamma", "lam", "mu_lambda", "sigma2_lambda", "z"):
        if name in store:
            store[name][s] = getattr(state, name)
    for name in ("mu_alpha", "mu_beta", "sigma2_alpha", "sigma2_beta"):
        store[name][s] = getattr(state, name)
    store["loglik"][s] = loglik


def run_chain(m: Multiplex, spec: ModelSpec, hyper: Hyperparameters, config: McmcConfig,
              rng: np.random.Generator = None, init=None, progress=None) -> ChainOutput:
    """Run one chain.

    ``init`` may be a ``(state, references)`` pair; by default the standard
    initialisation is used. ``rng`` defaults to a generator seeded with
    ``config.seed``. ``progress`` is an optional callable receiving the sweep
    index after every sweep.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    warnings = []
    if init is None:
        state, refs, report = initialize(m, spec, hyper)
        warnings.extend(report.warnings)
    else:
        state, refs = init
        state = state.copy()
    ctx = ChainContext(m, spec, hyper, refs, state)
    frozen = config.frozen
    K, n = m.K, m.n
    free_views = [k for k in range(K) if k != refs.view]
    S = config.n_stored
    store = _sample_store(spec, state, S, config.store_latent)
    sweeps = np.empty(S, dtype=np.int64)
    z_sum = np.zeros_like(state.z)
    acc = {"alpha_beta": [0, 0], "latent": [0, 0], "lambda": [0, 0]}
    discards = 0
    s = 0
    for t in range(config.iterations):
        if "nuisance" not in frozen:
            gibbs_update_nuisance(state, hyper, rng)
        if not {"alpha", "beta"} <= frozen:
            for k in free_views:
                ok = update_alpha_beta(ctx, state, k, rng, "alpha" not in frozen, "beta" not in frozen)
                acc["alpha_beta"][0] += ok
                acc["alpha_beta"][1] += 1
        if "latent" not in frozen:
            z_prev = state.z.copy()
            moved = update_latent(ctx, state, rng)
            acc["latent"][0] += moved
            acc["latent"][1] += n
            if moved:
                verdict, z_kept = procrustes_guard(state.z, z_prev, config.procrustes_tolerance)
                discards += verdict == "discard"
                state.z = np.ascontiguousarray(z_kept)
                ctx.dsq = squared_distances(state.z)
        if "effects" not in frozen and (spec.has_sender or spec.has_receiver):
            for side, (a, b) in update_effects(ctx, state, rng).items():
                acc.setdefault(f"effects_{side}", [0, 0])
                acc[f"effects_{side}"][0] += a
                acc[f"effects_{side}"][1] += b
        if "lambda" not in frozen and len(state.lam):
            acc["lambda"][0] += update_lambda(ctx, state, rng)
            acc["lambda"][1] += len(state.lam)
        if t >= config.burn_in and (t - config.burn_in) % config.thin == 0:
            _record(store, s, state, float(np.sum(ctx.loglik_views(state))))
            z_sum += state.z
            sweeps[s] = t
            s += 1
        if progress is not None:
            progress(t)
    acceptance = {name: (a / b if b else float("nan")) for name, (a, b) in acc.items()}
    return ChainOutput(
        spec=spec, references=refs, config=config, sweeps=sweeps, samples=store,
        acceptance=acceptance, final_state=state, z_mean=z_sum / S if S else None,
        procrustes_discards=discards, warnings=warnings,
    )
