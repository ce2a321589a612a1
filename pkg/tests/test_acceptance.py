"""End-to-end acceptance criteria.

Each test checks one criterion at its stated tolerance and reports a single
PASS/FAIL line (also collected in the terminal summary). Criterion 8 needs
the external fruit-trade multiplex: point ``MULTILSM_FAO_DATA`` at its
edgelist CSV to run it.
"""
import math
import os
import time
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from conftest import (
    brute_dcor,
    brute_loglik,
    first_difference,
    random_instance,
    report_criterion,
    second_difference,
)
from multilsm.distributions import sample_inverse_gamma, sample_truncated_normal
from multilsm.initialization import References
from multilsm.metrics import distance_correlation, recovery_report
from multilsm.model import (
    Hyperparameters,
    ModelSpec,
    edge_probabilities,
    linear_predictor,
    log_likelihood,
    log_posterior,
    new_state,
)
from multilsm.network import Multiplex, load_multiplex
from multilsm.sampler import (
    ChainContext,
    McmcConfig,
    alpha_proposal_moments,
    beta_proposal_moments,
    effect_proposal_moments,
    inverse_gamma_parameters,
    lambda_proposal_moments,
    latent_proposal_moments,
    run_chain,
)
from multilsm.selection import heuristic_select, summary_statistics, train_classifier
from multilsm.simulation import TruthConfig, draw_truth, simulate_multiplex

pytestmark = pytest.mark.slow

FREE = References(0, None, None)


def fit_simulated(code, n=50, K=5, data_seed=2024, chain_seed=7, iterations=20_000, burn_in=5_000):
    spec = ModelSpec.from_code(code)
    rng = np.random.default_rng(data_seed)
    truth = draw_truth(TruthConfig(n, K, spec), rng)
    m = simulate_multiplex(truth, spec, rng)
    t0 = time.perf_counter()
    chain = run_chain(m, spec, Hyperparameters.for_views(K),
                      McmcConfig(iterations=iterations, burn_in=burn_in, seed=chain_seed, store_latent=False))
    elapsed = time.perf_counter() - t0
    return recovery_report(truth, chain, m), elapsed


@pytest.fixture(scope="module")
def nc_run():
    return fit_simulated("NC")


def fmt(values):
    return "[" + ", ".join(f"{v:.3f}" for v in values) + "]"


# ---------------------------------------------------------------------------

def test_criterion_1_simulation_recovery(nc_run):
    rep, elapsed = nc_run
    ok = min(rep.dcor) >= 0.75 and rep.procrustes >= 0.85 and elapsed <= 15 * 60
    detail = f"dCor per view {fmt(rep.dcor)} >= 0.75; Procrustes {rep.procrustes:.3f} >= 0.85; " \
             f"runtime {elapsed:.0f}s <= 900s"
    assert report_criterion("criterion 1 simulation recovery (NC, n=50, K=5)", ok, detail)


def test_criterion_2_effect_ordering(nc_run):
    rep, _ = nc_run
    cc, _ = fit_simulated("CC")
    ok = min(rep.receiver_spearman) >= 0.70 and min(cc.sender_spearman) >= 0.70
    detail = f"NC receiver Spearman {fmt(rep.receiver_spearman)}; CC sender Spearman {fmt(cc.sender_spearman)}; " \
             "all >= 0.70"
    assert report_criterion("criterion 2 effect ordering", ok, detail)


def test_criterion_3_classifier_cv(tmp_path):
    t0 = time.perf_counter()
    _, cv10, _ = train_classifier(50, 10, 1000, seed=0)
    _, cv3, _ = train_classifier(50, 3, 1000, seed=0)
    elapsed = time.perf_counter() - t0
    ok = cv10 <= 0.08 and cv3 <= 0.20 and elapsed <= 20 * 60
    detail = f"CV error K=10 {cv10:.3f} <= 0.08; K=3 {cv3:.3f} <= 0.20; runtime {elapsed:.0f}s <= 1200s"
    assert report_criterion("criterion 3 classifier cross-validation", ok, detail)


def test_criterion_4_confusion_structure():
    model, _, _ = train_classifier(50, 5, 1000, seed=0)
    spec = ModelSpec.from_code("NN")
    cfg = TruthConfig(50, 5, spec)
    labels = []
    for t in range(200):
        # held-out seeds never used by the training pool
        rng = np.random.default_rng([99_991, t])
        m = simulate_multiplex(draw_truth(cfg, rng), spec, rng)
        labels.append(model.predict(summary_statistics(m).as_array())[0])
    counts = Counter(labels)
    nn_rate = counts["NN"] / 200
    v_worst = max((counts[c] for c in counts if "V" in c), default=0)
    wrong = 200 - counts["NN"]
    ok = nn_rate >= 0.85 and (wrong == 0 or counts["CC"] > v_worst)
    detail = f"NN recovered {nn_rate:.1%} >= 85%; misclassified {dict((k, v) for k, v in counts.items() if k != 'NN')}"
    assert report_criterion("criterion 4 classifier confusion structure", ok, detail)


# ---------------------------------------------------------------------------

def _latent_oracle(m, spec, s, i):
    prec = 0.0
    num = np.zeros(s.z.shape[1])
    for k in range(m.K):
        for j in range(m.n):
            if j != i and m.h[k, i, j]:
                w = 1.0 if linear_predictor(s, spec, k, i, j, m.x) > 0 else 0.0
                prec += s.beta[k] * abs(m.y[k, i, j] - w)
                num += s.beta[k] * (m.y[k, i, j] - w) * s.z[j]
    s2 = 1.0 / (1.0 + 2.0 * prec)
    return 2.0 * s2 * num, s2


def _with(state, attr, idx, value):
    c = state.copy()
    getattr(c, attr)[idx] = value
    return c


def test_criterion_5_formula_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    checks = {}

    # (a) likelihood against the per-entry oracle
    worst = 0.0
    codes = ["NN", "CN", "NC", "CC", "VN", "NV", "VC", "CV", "VV"]
    for r in range(50):
        directed = r % 5 != 0
        code = codes[r % 9] if directed else ("NN", "CC", "VV")[r % 3]
        m, spec, s = random_instance(rng, n=6, K=3, code=code, directed=directed, F=r % 2)
        worst = max(worst, abs(log_likelihood(m, s, spec) - brute_loglik(m, s, spec)))
    checks["a"] = (worst <= 1e-12, f"max |loglik - oracle| {worst:.1e}")

    # (b) proposal variances against finite-difference curvature
    hyper = Hyperparameters(m_alpha=1.0, m_beta=0.5, tau_alpha=0.8, tau_beta=0.8)
    rel = []
    for r in range(10):
        m, spec, s = random_instance(rng, n=5, K=3, code="VV", F=1)
        ctx = ChainContext(m, spec, hyper, FREE, s)
        _, va = alpha_proposal_moments(ctx, s, 1)
        fd = -second_difference(lambda a: log_posterior(m, _with(s, "alpha", 1, a), spec, hyper), s.mu_alpha)
        rel.append(abs(va * fd - 1))
        _, vb = beta_proposal_moments(ctx, s, 1)
        fd = -second_difference(lambda b: log_posterior(m, _with(s, "beta", 1, b), spec, hyper), s.mu_beta)
        rel.append(abs(vb * fd - 1))
        _, vl = lambda_proposal_moments(ctx, s, 0)
        fd = -second_difference(lambda v: log_posterior(m, _with(s, "lam", 0, v), spec, hyper), s.mu_lambda[0])
        rel.append(abs(vl * fd - 1))
        for side, attr in (("sender", "theta"), ("receiver", "gamma")):
            _, curv, _ = effect_proposal_moments(ctx, s, 2, side)
            for k in range(3):
                x0 = getattr(s, attr)[2, k]
                fd = -second_difference(lambda v: log_likelihood(m, _with(s, attr, (2, k), v), spec), x0)
                # cells with almost no curvature are round-off dominated
                if fd > 1e-3:
                    rel.append(abs(curv[k] / fd - 1))
        # the latent variance is a lower bound, not a curvature: checked against its closed form
        mu, s2 = latent_proposal_moments(ctx, s, 3)
        mu_o, s2_o = _latent_oracle(m, spec, s, 3)
        rel.append(abs(s2 / s2_o - 1))
        rel.append(float(np.max(np.abs(mu - mu_o))))
    # constant and undirected effect scopes
    for code, directed, side in (("CC", True, "sender"), ("VV", False, "undirected"), ("CC", False, "undirected")):
        m, spec, s = random_instance(rng, n=5, K=3, code=code, directed=directed, F=1)
        ctx = ChainContext(m, spec, hyper, FREE, s)
        _, curv, _ = effect_proposal_moments(ctx, s, 1, side)
        if spec.sender.name == "CONSTANT":
            def f(v):
                c = s.copy()
                c.theta[1, :] = v
                return log_likelihood(m, c, spec)
            rel.append(abs(curv.sum() / -second_difference(f, s.theta[1, 0]) - 1))
        else:
            for k in range(3):
                fd = -second_difference(lambda v: log_likelihood(m, _with(s, "theta", (1, k), v), spec), s.theta[1, k])
                rel.append(abs(curv[k] / fd - 1))
    checks["b"] = (max(rel) < 1e-4, f"max relative error {max(rel):.1e} over {len(rel)} variances")

    # (c) distance correlation against the double-centring oracle
    err = max(abs(distance_correlation(u, v) - brute_dcor(u, v))
              for u, v in ((rng.normal(size=n), rng.normal(size=n) ** 2) for n in rng.integers(2, 120, 30)))
    checks["c"] = (err <= 1e-12, f"max |dCor - oracle| {err:.1e}")

    # (d) Gibbs shape/rate on hand-derived parameter sets
    cases = [(([1.7], 1.7, 1.0, 3.0, 0.0), (2.5, (1 + 1.7 ** 2) / 2)),
             (([1.0, 2.0, 4.0], 2.0, 0.5, 2.0, 1.0), (3.0, 4.0)),
             (([0.5, 1.5], 1.0, 2.0, 3.0, 2.0), (3.0, 1.0))]
    dev = max(max(abs(a - b) for a, b in zip(inverse_gamma_parameters(*args), want)) for args, want in cases)
    checks["d"] = (dev <= 1e-14, f"max deviation {dev:.1e} on 3 sets")

    elapsed = time.perf_counter() - t0
    ok = all(v[0] for v in checks.values()) and elapsed < 60
    detail = "; ".join(f"({k}) {'ok' if v[0] else 'FAILED'} {v[1]}" for k, v in checks.items())
    assert report_criterion("criterion 5 formula exactness", ok, detail + f"; {elapsed:.1f}s < 60s")


def test_criterion_6_sampler_correctness():
    rng = np.random.default_rng(0)
    spec = ModelSpec()
    s = new_state(4, 2, spec, z=rng.normal(size=(4, 2)))
    s.alpha[:] = [2.0, 2.0]
    s.beta[:] = [1.0, 1.0]
    s.mu_alpha, s.mu_beta, s.sigma2_alpha, s.sigma2_beta = 2.0, 1.0, 1.0, 1.0
    m = Multiplex((rng.random((2, 4, 4)) < edge_probabilities(s, spec)).astype(float), None)
    cfg = McmcConfig(iterations=22_000, burn_in=2_000, seed=1, store_latent=False,
                     frozen={"nuisance", "beta", "latent", "effects", "lambda"})
    draws = run_chain(m, spec, Hyperparameters.for_views(2), cfg, init=(s, FREE)).samples["alpha"][:, 1]
    grid = np.linspace(0.0, 12.0, 24_001)
    logf = np.array([log_likelihood(m, _with(s, "alpha", 1, a), spec) for a in grid])
    logf -= 0.5 * (grid - s.mu_alpha) ** 2 / s.sigma2_alpha
    w = np.exp(logf - logf.max())
    F = np.cumsum(w) / w.sum()
    emp = np.searchsorted(np.sort(draws), grid, side="right") / len(draws)
    w1 = float(np.sum(np.abs(emp - F)) * (grid[1] - grid[0]))

    r2 = np.random.default_rng(6)
    ig = sample_inverse_gamma(2.5, 0.5, r2, size=10_000)
    ks_ig = stats.kstest(ig, stats.invgamma(2.5, scale=0.5).cdf).statistic
    tn = np.array([sample_truncated_normal(0.3, 0.5, -1.0, 1.0, r2) for _ in range(10_000)])
    sd = math.sqrt(0.5)
    ks_tn = stats.kstest(tn, stats.truncnorm((-1 - 0.3) / sd, (1 - 0.3) / sd, loc=0.3, scale=sd).cdf).statistic
    ok = len(draws) == 20_000 and w1 < 0.05 and ks_ig < 0.02 and ks_tn < 0.02
    detail = f"W1 {w1:.4f} < 0.05 over {len(draws)} draws; inverse-gamma KS {ks_ig:.4f}; " \
             f"truncated-normal KS {ks_tn:.4f} (< 0.02)"
    assert report_criterion("criterion 6 sampler correctness", ok, detail)


def test_criterion_7_invariance():
    rng = np.random.default_rng(7)
    checks = {}
    worst = 0.0
    for _ in range(20):
        m, spec, s = random_instance(rng, n=8, K=3, code="VC", F=1)
        t = rng.uniform(0, 2 * math.pi)
        R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        if rng.random() < 0.5:
            R = R @ np.diag([1.0, -1.0])
        moved = s.copy()
        moved.z = s.z @ R + rng.normal(size=2) * 5
        worst = max(worst, abs(log_likelihood(m, moved, spec) - log_likelihood(m, s, spec)))
    checks["rigid motion"] = (worst <= 1e-10, f"max change {worst:.1e}")

    spec_u = ModelSpec.from_code("VV", directed=False)
    truth = draw_truth(TruthConfig(15, 3, spec_u), rng)
    P = edge_probabilities(truth, spec_u)
    checks["undirected symmetry"] = (np.array_equal(P, P.transpose(0, 2, 1)), "P == P^T exactly")

    spec = ModelSpec.from_code("VV")
    truth = draw_truth(TruthConfig(12, 3, spec), rng)
    m = simulate_multiplex(truth, spec, rng, missing_rate=0.1)
    cfg = McmcConfig(iterations=1000, burn_in=0, seed=11)
    a = run_chain(m, spec, Hyperparameters.for_views(3), cfg)
    refs = a.references
    ks = np.arange(3)
    pinned = (np.all(a.samples["alpha"][:, 0] == 2.0) and np.all(a.samples["beta"][:, 0] == 1.0)
              and np.all(a.samples["theta"][:, refs.sender, ks] == 1.0)
              and np.all(a.samples["gamma"][:, refs.receiver, ks] == 1.0))
    checks["pinned immutability"] = (bool(pinned), "1000 sweeps")
    b = run_chain(m, spec, Hyperparameters.for_views(3), cfg)
    same = all(np.array_equal(a.samples[k], b.samples[k]) for k in a.samples) and \
        np.array_equal(a.final_state.z, b.final_state.z) and a.procrustes_discards == b.procrustes_discards
    checks["same seed"] = (same, "bit-identical samples")
    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k}: {'ok' if v[0] else 'FAILED'} ({v[1]})" for k, v in checks.items())
    assert report_criterion("criterion 7 invariance", ok, detail)


def test_criterion_8_fao_workflow(tmp_path):
    path = os.environ.get("MULTILSM_FAO_DATA")
    if not path:
        report_criterion("criterion 8 FAO workflow", True, "set MULTILSM_FAO_DATA to the edgelist CSV",
                         status="SKIPPED")
        pytest.skip("fruit-trade multiplex not supplied")
    T = int(os.environ.get("MULTILSM_FAO_T", "1000"))
    m = load_multiplex(path)
    labels = [heuristic_select(m, T=T, seed=seed, cache_dir=tmp_path).label for seed in range(10)]
    hits = labels.count("CN")
    ok = hits >= 8
    assert report_criterion("criterion 8 FAO workflow", ok, f"CN ranked first in {hits}/10 runs (T={T})")
