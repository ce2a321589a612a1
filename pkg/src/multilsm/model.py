"""Model taxonomy, parameter containers, edge probabilities and posterior.

Distances ``d_ij`` entering the linear predictor are SQUARED Euclidean
distances between latent positions. Everywhere else in the package
(geodesics, MDS) "distance" means the plain, unsquared one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import kernels
from .network import Multiplex

MODEL_CODES = ("NN", "CN", "NC", "CC", "VN", "NV", "VC", "CV", "VV")
UNDIRECTED_CODES = ("NN", "CC", "VV")


class EffectType(enum.Enum):
    NULL = "N"
    CONSTANT = "C"
    VARIABLE = "V"


@dataclass(frozen=True)
class ModelSpec:
    """One cell of the sender/receiver taxonomy.

    For undirected models the sender and receiver effect coincide (the
    shared node effect); ``theta`` stores it and ``gamma`` aliases ``theta``.
    """

    sender: EffectType = EffectType.NULL
    receiver: EffectType = EffectType.NULL
    directed: bool = True
    p: int = 2
    F: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sender", EffectType(self.sender))
        object.__setattr__(self, "receiver", EffectType(self.receiver))
        if not self.directed and self.sender != self.receiver:
            raise ValueError(f"undirected model needs equal sender/receiver effects, got {self.code}")
        if self.p < 1:
            raise ValueError("latent dimension p must be >= 1")
        if self.F < 0:
            raise ValueError("covariate count F must be >= 0")

    @classmethod
    def from_code(cls, code: str, directed: bool = True, p: int = 2, F: int = 0) -> "ModelSpec":
        code = code.upper()
        if code not in MODEL_CODES:
            raise ValueError(f"unknown model code {code!r}; expected one of {', '.join(MODEL_CODES)}")
        return cls(EffectType(code[0]), EffectType(code[1]), directed, p, F)

    @property
    def code(self) -> str:
        return self.sender.value + self.receiver.value

    @property
    def has_sender(self) -> bool:
        return self.sender is not EffectType.NULL

    @property
    def has_receiver(self) -> bool:
        return self.receiver is not EffectType.NULL

    @property
    def mode(self) -> int:
        """Kernel code for the combined effect."""
        if not self.directed:
            return 3 if self.has_sender else 0
        return int(self.has_sender) + 2 * int(self.has_receiver)

    @property
    def effect_slope(self) -> float:
        """Derivative of the combined effect in one of its arguments."""
        return 0.5 if self.mode == 3 else 1.0


@dataclass
class Hyperparameters:
    """User-set constants of the hierarchical prior.

    The defaults are the simulation-study values; ``tau`` defaults to
    ``(K - 1) / K`` through :meth:`for_views`.
    """

    m_alpha: float = 2.0
    m_beta: float = 0.0
    tau_alpha: float = 1.0
    tau_beta: float = 1.0
    nu_alpha: float = 3.0
    nu_beta: float = 3.0
    m_lambda: float = 0.0
    tau_lambda: float = 1.0
    nu_lambda: float = 3.0
    reference_alpha: float = 2.0
    reference_beta: float = 1.0

    def __post_init__(self):
        for name in ("tau_alpha", "tau_beta", "nu_alpha", "nu_beta", "tau_lambda", "nu_lambda"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("m_alpha", "m_beta", "m_lambda", "reference_alpha", "reference_beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def for_views(cls, K: int, **overrides) -> "Hyperparameters":
        tau = (K - 1) / K if K > 1 else 1.0
        values = {"tau_alpha": tau, "tau_beta": tau}
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ParameterState:
    alpha: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    z: np.ndarray
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mu_alpha: float = 2.0
    mu_beta: float = 1.0
    sigma2_alpha: float = 1.0
    sigma2_beta: float = 1.0
    mu_lambda: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma2_lambda: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def K(self) -> int:
        return self.alpha.shape[0]

    @property
    def aliased(self) -> bool:
        return self.gamma is self.theta

    def copy(self) -> "ParameterState":
        theta = self.theta.copy()
        gamma = theta if self.aliased else self.gamma.copy()
        return replace(
            self, alpha=self.alpha.copy(), beta=self.beta.copy(), theta=theta, gamma=gamma,
            z=self.z.copy(), lam=self.lam.copy(), mu_lambda=self.mu_lambda.copy(),
            sigma2_lambda=self.sigma2_lambda.copy(),
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else float(v)
        out["aliased"] = self.aliased
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterState":
        kw = {}
        for f in fields(cls):
            v = d[f.name]
            kw[f.name] = np.asarray(v, dtype=np.float64) if isinstance(v, list) else float(v)
        n, p = len(d["z"]), (len(d["z"][0]) if d["z"] else 0)
        kw["z"] = kw["z"].reshape(n, p)
        K = len(d["alpha"])
        kw["theta"] = kw["theta"].reshape(n, K)
        kw["gamma"] = kw["theta"] if d.get("aliased") else kw["gamma"].reshape(n, K)
        return cls(**kw)


def new_state(n: int, K: int, spec: ModelSpec, z=None) -> ParameterState:
    """A zero-effect state with the right shapes (aliasing set for undirected)."""
    theta = np.zeros((n, K))
    gamma = theta if not spec.directed else np.zeros((n, K))
    return ParameterState(
        alpha=np.zeros(K), beta=np.zeros(K), theta=theta, gamma=gamma,
        z=np.zeros((n, spec.p)) if z is None else np.asarray(z, dtype=np.float64),
        lam=np.zeros(spec.F), mu_lambda=np.zeros(spec.F), sigma2_lambda=np.ones(spec.F),
    )


# ---------------------------------------------------------------------------
# edge-level quantities
# ---------------------------------------------------------------------------

def combined_effect(spec: ModelSpec, theta_ik: float, gamma_jk: float) -> float:
    """Per-dyad multiplier of the intercept."""
    mode = spec.mode
    if mode == 0:
        return 1.0
    if mode == 1:
        return float(theta_ik)
    if mode == 2:
        return float(gamma_jk)
    return 0.5 * (theta_ik + gamma_jk)


def squared_distances(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("ijc,ijc->ij", diff, diff)


def covariate_offset(lam, x) -> np.ndarray:
    """``sum_f lambda_f x_f`` as an (n, n) matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        return np.zeros(x.shape[1:])
    return np.tensordot(np.asarray(lam, dtype=np.float64), x, axes=1)


def _covariate_term(state, x, i, j) -> float:
    if x is None or len(state.lam) == 0:
        return 0.0
    return float(np.dot(state.lam, np.asarray(x)[:, i, j]))


def linear_predictor(state: ParameterState, spec: ModelSpec, k: int, i: int, j: int, x=None) -> float:
    """``alpha_k phi_ij - beta_k d_ij - sum_f lambda_f x_ijf``."""
    if i == j:
        raise ValueError("linear predictor is undefined on the diagonal")
    phi = combined_effect(spec, state.theta[i, k], state.gamma[j, k])
    d = float(np.sum((state.z[i] - state.z[j]) ** 2))
    return state.alpha[k] * phi - state.beta[k] * d - _covariate_term(state, x, i, j)


def logistic(eta: float) -> float:
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def edge_probability(state: ParameterState, spec: ModelSpec, k: int, i: int, j: int, x=None) -> float:
    return logistic(linear_predictor(state, spec, k, i, j, x))


def w_indicator(state: ParameterState, spec: ModelSpec, k: int, i: int, j: int, x=None) -> int:
    """1 when the linear predictor is strictly positive."""
    return int(linear_predictor(state, spec, k, i, j, x) > 0)


def linear_predictor_tensor(state: ParameterState, spec: ModelSpec, x=None) -> np.ndarray:
    n = state.n
    cov = covariate_offset(state.lam, x) if x is not None and len(state.lam) else np.zeros((n, n))
    return kernels.eta_tensor(state.alpha, state.beta, state.theta, state.gamma, spec.mode,
                              squared_distances(state.z), cov)


def edge_probabilities(state: ParameterState, spec: ModelSpec, x=None) -> np.ndarray:
    """All edge probabilities, shape (K, n, n); the diagonal is set to 0."""
    p = kernels.logistic(linear_predictor_tensor(state, spec, x))
    idx = np.arange(state.n)
    p[:, idx, idx] = 0.0
    return p


# ---------------------------------------------------------------------------
# likelihood and posterior
# ---------------------------------------------------------------------------

def likelihood_weights(m: Multiplex) -> np.ndarray:
    """Observation weights for likelihood sums: each undirected dyad counts once."""
    if m.directed:
        return np.ascontiguousarray(m.h)
    return np.ascontiguousarray(np.triu(m.h, k=1))


def _check_dims(m: Multiplex, state: ParameterState, spec: ModelSpec):
    if state.n != m.n or state.K != m.K:
        raise ValueError(f"state is {state.n}x{state.K} but multiplex is {m.n}x{m.K}")
    if spec.directed != m.directed:
        raise ValueError("model and multiplex disagree on directedness")
    if len(state.lam) != m.F:
        raise ValueError(f"state has {len(state.lam)} covariate coefficients, multiplex has {m.F} covariates")


def log_likelihood_views(m: Multiplex, state: ParameterState, spec: ModelSpec) -> np.ndarray:
    _check_dims(m, state, spec)
    return kernels.loglik_views(
        np.ascontiguousarray(m.y), likelihood_weights(m), state.alpha, state.beta,
        state.theta, state.gamma, spec.mode, squared_distances(state.z),
        covariate_offset(state.lam, m.x),
    )


def log_likelihood(m: Multiplex, state: ParameterState, spec: ModelSpec) -> float:
    return float(np.sum(log_likelihood_views(m, state, spec)))


def in_support(state: ParameterState) -> bool:
    if np.any(state.alpha < 0) or np.any(state.beta < 0):
        return False
    if np.any(np.abs(state.theta) > 1) or np.any(np.abs(state.gamma) > 1):
        return False
    if state.sigma2_alpha <= 0 or state.sigma2_beta <= 0:
        return False
    if state.mu_alpha < 0 or state.mu_beta < 0:
        return False
    if np.any(state.lam < 0) or np.any(state.mu_lambda < 0) or np.any(state.sigma2_lambda <= 0):
        return False
    return bool(np.all(np.isfinite(state.z)))


def log_prior(state: ParameterState, hyper: Hyperparameters) -> float:
    """Prior and hyperprior terms, up to a state-independent constant.

    Normalising constants of the truncated normals are dropped, as are
    ``Unif(-1, 1)`` effect densities (constant on the support).
    """
    K = state.K
    s2a, s2b = state.sigma2_alpha, state.sigma2_beta
    quad = float(np.sum(state.z ** 2))
    quad += float(np.sum((state.alpha - state.mu_alpha) ** 2)) / s2a
    quad += float(np.sum((state.beta - state.mu_beta) ** 2)) / s2b
    quad += K * math.log(s2a) + K * math.log(s2b)
    quad += math.log(hyper.tau_alpha * s2a) + math.log(hyper.tau_beta * s2b)
    quad += (state.mu_alpha - hyper.m_alpha) ** 2 / (hyper.tau_alpha * s2a)
    quad += (state.mu_beta - hyper.m_beta) ** 2 / (hyper.tau_beta * s2b)
    quad += 1.0 / s2a + 1.0 / s2b
    for f in range(len(state.lam)):
        s2l = state.sigma2_lambda[f]
        quad += (state.lam[f] - state.mu_lambda[f]) ** 2 / s2l
        quad += math.log(s2l) + math.log(hyper.tau_lambda * s2l)
        quad += (state.mu_lambda[f] - hyper.m_lambda) ** 2 / (hyper.tau_lambda * s2l)
        quad += 1.0 / s2l
    out = -0.5 * quad
    out += (-hyper.nu_alpha / 2 - 1) * math.log(s2a) + (-hyper.nu_beta / 2 - 1) * math.log(s2b)
    for f in range(len(state.lam)):
        out += (-hyper.nu_lambda / 2 - 1) * math.log(state.sigma2_lambda[f])
    return out


def log_posterior(m: Multiplex, state: ParameterState, spec: ModelSpec, hyper: Hyperparameters) -> float:
    """Unnormalised log-posterior; ``-inf`` outside the parameter support."""
    if not in_support(state):
        return -math.inf
    return log_likelihood(m, state, spec) + log_prior(state, hyper)
