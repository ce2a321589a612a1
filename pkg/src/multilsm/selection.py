"""Heuristic model choice from degree-correlation summaries.

Nine (or, for undirected data, three) model types are simulated at the
observed dimensions, each replicate is reduced to eight summary statistics
of degree correlations, and a linear discriminant classifier trained on the
pool predicts the type of the observed multiplex.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import MODEL_CODES, UNDIRECTED_CODES, ModelSpec
from .network import Multiplex, degrees
from .simulation import TruthConfig, draw_truth, simulate_multiplex

log = logging.getLogger(__name__)

CACHE_VERSION = 1
MIN_PER_CLASS = 9
DEFAULT_FOLDS = 10


@dataclass(frozen=True)
class SummaryStats:
    mean_cs_k: float
    mean_cr_k: float
    mean_cs_i: float
    mean_cr_i: float
    sd_cs_k: float
    sd_cr_k: float
    sd_cs_i: float
    sd_cr_i: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "SummaryStats":
        return cls(*(float(v) for v in a))

    @classmethod
    def names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))


def column_correlations(M) -> np.ndarray:
    """Pearson correlations between the columns of ``M``.

    A column with zero variance has correlation 0 with everything else.
    """
    M = np.asarray(M, dtype=np.float64)
    C = M - M.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", C, C))
    ok = norms > 1e-12 * max(1.0, float(np.abs(M).max(initial=0.0)))
    U = np.zeros_like(C)
    U[:, ok] = C[:, ok] / norms[ok]
    R = U.T @ U
    return np.clip(R, -1.0, 1.0)


def _off_diagonal_summary(R):
    vals = R[np.triu_indices(R.shape[0], k=1)]
    sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return float(np.mean(vals)), sd


def summary_statistics(m: Multiplex) -> SummaryStats:
    """Means and sds of view-wise and node-wise degree correlations."""
    if m.n < 3 or m.K < 2:
        raise ValueError("summary statistics need n >= 3 nodes and K >= 2 views")
    S, R = degrees(m)
    mk_s, sk_s = _off_diagonal_summary(column_correlations(S))
    mk_r, sk_r = _off_diagonal_summary(column_correlations(R))
    mi_s, si_s = _off_diagonal_summary(column_correlations(S.T))
    mi_r, si_r = _off_diagonal_summary(column_correlations(R.T))
    return SummaryStats(mk_s, mk_r, mi_s, mi_r, sk_s, sk_r, si_s, si_r)


# ---------------------------------------------------------------------------
# linear discriminant analysis
# ---------------------------------------------------------------------------

@dataclass
class LdaModel:
    labels: tuple
    means: np.ndarray
    covariance: np.ndarray
    priors: np.ndarray
    reg: float

    def __post_init__(self):
        self._chol = np.linalg.cholesky(self.covariance)

    def _solve(self, B):
        L = self._chol
        return np.linalg.solve(L.T, np.linalg.solve(L, B))

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        W = self._solve(self.means.T)  # (d, C)
        const = -0.5 * np.einsum("cd,dc->c", self.means, W) + np.log(self.priors)
        return X @ W + const

    def predict_proba(self, X) -> np.ndarray:
        D = self.decision_function(X)
        D -= D.max(axis=1, keepdims=True)
        P = np.exp(D)
        return P / P.sum(axis=1, keepdims=True)

    def predict(self, X) -> list:
        # argmax keeps the first maximum, i.e. the fixed label order
        return [self.labels[c] for c in np.argmax(self.predict_proba(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels), "means": self.means.tolist(),
            "covariance": self.covariance.tolist(), "priors": self.priors.tolist(), "reg": self.reg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LdaModel":
        return cls(tuple(d["labels"]), np.asarray(d["means"]), np.asarray(d["covariance"]),
                   np.asarray(d["priors"]), float(d["reg"]))


def lda_fit(X, y: Sequence[str], reg: Optional[float] = None, labels: Sequence[str] = None,
            min_per_class: int = MIN_PER_CLASS) -> LdaModel:
    """Fit LDA with a pooled within-class covariance plus ``reg * I``.

    By default ``reg = 1e-6 * trace(cov) / d``. ``labels`` fixes the class
    order (and hence tie-breaking); by default classes follow the model
    taxonomy order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(list(y))
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be an (N, d) array with one label per row")
    if labels is None:
        present = set(y.tolist())
        labels = [c for c in MODEL_CODES if c in present] + sorted(present - set(MODEL_CODES))
    labels = tuple(labels)
    if len(labels) < 2:
        raise ValueError("LDA needs at least two classes")
    N, d = X.shape
    means = np.empty((len(labels), d))
    counts = np.empty(len(labels))
    scatter = np.zeros((d, d))
    for c, lab in enumerate(labels):
        Xc = X[y == lab]
        if len(Xc) < max(min_per_class, 1):
            raise ValueError(f"insufficient training replicates: class {lab} has {len(Xc)} (< {min_per_class})")
        means[c] = Xc.mean(axis=0)
        counts[c] = len(Xc)
        D = Xc - means[c]
        scatter += D.T @ D
    if N <= len(labels):
        raise ValueError("need more examples than classes to pool a covariance")
    cov = scatter / (N - len(labels))
    if reg is None:
        tr = float(np.trace(cov))
        reg = 1e-6 * tr / d if tr > 0 else 1e-6
    cov = cov + reg * np.eye(d)
    try:
        return LdaModel(labels, means, cov, counts / counts.sum(), float(reg))
    except np.linalg.LinAlgError as exc:
        raise ValueError("pooled covariance is singular after regularisation; increase reg") from exc


def lda_train(examples, reg: Optional[float] = None) -> LdaModel:
    """Fit LDA on ``(SummaryStats, label)`` pairs."""
    X = np.array([s.as_array() for s, _ in examples])
    return lda_fit(X, [lab for _, lab in examples], reg)


def lda_predict(model: LdaModel, s: SummaryStats):
    """Predicted label and the class posterior probabilities (ordered by ``model.labels``)."""
    p = model.predict_proba(s.as_array())[0]
    return model.labels[int(np.argmax(p))], dict(zip(model.labels, p.tolist()))


def cross_validation_error(X, y, folds: int = DEFAULT_FOLDS, seed: int = 0, reg: Optional[float] = None,
                           labels=None) -> float:
    """Misclassification rate of stratified ``folds``-fold cross-validation.

    Each class is shuffled and dealt round-robin into the folds, so every
    training split keeps about ``(folds - 1) / folds`` of each class.
    """
    X = np.asarray(X)
    y = np.asarray(list(y))
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    start = 0
    for lab in dict.fromkeys(y.tolist()):
        idx = rng.permutation(np.flatnonzero(y == lab))
        # continue the deal where the previous class stopped to balance fold sizes
        fold_of[idx] = (start + np.arange(len(idx))) % folds
        start += len(idx)
    wrong = 0
    for f in range(folds):
        test = fold_of == f
        if not test.any():
            continue
        model = lda_fit(X[~test], y[~test], reg, labels, min_per_class=1)
        wrong += int(np.sum(np.asarray(model.predict(X[test])) != y[test]))
    return wrong / len(y)


# ---------------------------------------------------------------------------
# training pool and the selection heuristic
# ---------------------------------------------------------------------------

def class_codes(directed: bool = True) -> tuple:
    return MODEL_CODES if directed else UNDIRECTED_CODES


def _simulate_class(code, c, n, K, T, seed, directed, missing_rate, truth_kwargs):
    spec = ModelSpec.from_code(code, directed=directed)
    cfg = TruthConfig(n, K, spec, **truth_kwargs)
    out = np.empty((T, len(SummaryStats.names())))
    for t in range(T):
        rng = np.random.default_rng([seed, c, t])
        truth = draw_truth(cfg, rng)
        out[t] = summary_statistics(simulate_multiplex(truth, spec, rng, missing_rate=missing_rate)).as_array()
    return out


def training_set(n: int, K: int, T: int, seed: int = 0, directed: bool = True, missing_rate: float = 0.0,
                 classes: Sequence[str] = None, threads: int = 1, **truth_kwargs):
    """Summary statistics of ``T`` simulated multiplexes per model type.

    Replicate ``t`` of class ``c`` uses its own generator seeded with
    ``(seed, c, t)``, so the pool does not depend on ``threads``.
    """
    classes = tuple(classes or class_codes(directed))
    args = [(code, c, n, K, T, seed, directed, missing_rate, truth_kwargs) for c, code in enumerate(classes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            blocks = list(ex.map(lambda a: _simulate_class(*a), args))
    else:
        blocks = [_simulate_class(*a) for a in args]
    X = np.vstack(blocks)
    y = np.repeat(np.array(classes), T)
    return X, y


@dataclass
class SelectionResult:
    label: str
    probabilities: dict
    cv_error: float
    model: LdaModel
    stats: SummaryStats
    from_cache: bool = False

    def ranked(self) -> list:
        return sorted(self.probabilities.items(), key=lambda kv: (-kv[1], self.model.labels.index(kv[0])))

    def to_dict(self) -> dict:
        return {
            "label": self.label, "probabilities": self.probabilities, "cv_error": self.cv_error,
            "summary_statistics": dict(zip(SummaryStats.names(), self.stats.as_array().tolist())),
            "from_cache": self.from_cache,
        }


def cache_path(cache_dir, n: int, K: int, T: int, seed: int, directed: bool = True) -> Path:
    tag = "" if directed else "_undirected"
    return Path(cache_dir) / f"lda_n{n}_K{K}_T{T}_seed{seed}{tag}.json"


def train_classifier(n: int, K: int, T: int, seed: int = 0, directed: bool = True, missing_rate: float = 0.0,
                     folds: int = DEFAULT_FOLDS, cache_dir=None, threads: int = 1):
    """Train (or load from cache) the classifier for given dimensions.

    Returns ``(model, cv_error, from_cache)``.
    """
    if T < MIN_PER_CLASS:
        raise ValueError(f"insufficient training replicates: T={T} (need >= {MIN_PER_CLASS} per model)")
    path = None
    if cache_dir is not None:
        path = cache_path(cache_dir, n, K, T, seed, directed)
        if path.exists():
            d = json.loads(path.read_text())
            if d.get("version") == CACHE_VERSION and d.get("missing_rate", 0.0) == missing_rate:
                log.info("loaded classifier from %s", path)
                return LdaModel.from_dict(d["model"]), float(d["cv_error"]), True
    X, y = training_set(n, K, T, seed, directed, missing_rate, threads=threads)
    labels = class_codes(directed)
    model = lda_fit(X, y, labels=labels)
    cv = cross_validation_error(X, y, folds, seed, labels=labels)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({
            "version": CACHE_VERSION, "n": n, "K": K, "T": T, "seed": seed, "directed": directed,
            "missing_rate": missing_rate, "cv_error": cv, "model": model.to_dict(),
        }))
    return model, cv, False


def heuristic_select(m: Multiplex, T: int = 5000, seed: int = 0, folds: int = DEFAULT_FOLDS, cache_dir=None,
                     threads: int = 1) -> SelectionResult:
    """Rank the model types for an observed multiplex.

    Training multiplexes are simulated at the observed ``(n, K)`` and with
    the observed fraction of missing dyads.
    """
    off = m.n * (m.n - 1) * m.K
    missing_rate = float(1.0 - m.h.sum() / off) if off else 0.0
    missing_rate = round(missing_rate, 12)
    model, cv, cached = train_classifier(m.n, m.K, T, seed, m.directed, missing_rate, folds, cache_dir, threads)
    stats = summary_statistics(m)
    label, probs = lda_predict(model, stats)
    return SelectionResult(label, probs, cv, model, stats, cached)
