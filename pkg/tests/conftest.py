import math

import numpy as np
import pytest

from multilsm import kernels
from multilsm._accel import NUMBA_AVAILABLE
from multilsm.initialization import References
from multilsm.model import ModelSpec, new_state
from multilsm.network import Multiplex

KERNEL_NAMES = ("loglik_views", "view_taylor", "latent_moments", "latent_sweep", "effect_terms", "dcov_terms")
BACKENDS = ["numba", "numpy"] if NUMBA_AVAILABLE else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per kernel implementation."""
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(kernels, f"{name}_{request.param}"))
    return request.param


def random_instance(rng, n=6, K=2, code="VV", directed=True, missing=0.2, F=0, p=2):
    """A random multiplex together with a random valid parameter state."""
    spec = ModelSpec.from_code(code, directed=directed, p=p, F=F)
    y = (rng.random((K, n, n)) < 0.4).astype(float)
    h = (rng.random((K, n, n)) >= missing).astype(float)
    if not directed:
        y = np.triu(y, 1)
        y = y + y.transpose(0, 2, 1)
        h = np.triu(h, 1)
        h = h + h.transpose(0, 2, 1)
    x = rng.random((F, n, n)) if F else None
    if F and not directed:
        x = x + x.transpose(0, 2, 1)
    m = Multiplex(y, h, x, directed=directed)
    st = new_state(n, K, spec, z=rng.normal(size=(n, p)))
    st.alpha[:] = rng.uniform(0.5, 3.0, K)
    st.beta[:] = rng.uniform(0.2, 1.5, K)
    if spec.has_sender:
        st.theta[:] = rng.uniform(-1, 1, (n, K))
    if spec.has_receiver and directed:
        st.gamma[:] = rng.uniform(-1, 1, (n, K))
    # constant effects share one value across views
    if spec.sender.name == "CONSTANT":
        st.theta[:] = st.theta[:, :1]
    if spec.receiver.name == "CONSTANT" and directed:
        st.gamma[:] = st.gamma[:, :1]
    if F:
        st.lam[:] = rng.uniform(0.1, 1.0, F)
        st.mu_lambda[:] = rng.uniform(0.1, 1.0, F)
        st.sigma2_lambda[:] = rng.uniform(0.5, 2.0, F)
    st.mu_alpha = float(rng.uniform(1.0, 2.5))
    st.mu_beta = float(rng.uniform(0.5, 1.5))
    st.sigma2_alpha = float(rng.uniform(0.5, 2.0))
    st.sigma2_beta = float(rng.uniform(0.5, 2.0))
    return m, spec, st


def no_references(K):
    return References(view=0, sender=None, receiver=None)


def brute_loglik(m, st, spec):
    """Per-entry likelihood, written without any of the package's helpers."""
    total = 0.0
    for k in range(m.K):
        for i in range(m.n):
            for j in range(m.n):
                if i == j or m.h[k, i, j] == 0:
                    continue
                if not m.directed and j < i:
                    continue
                if spec.mode == 0:
                    phi = 1.0
                elif spec.mode == 1:
                    phi = st.theta[i, k]
                elif spec.mode == 2:
                    phi = st.gamma[j, k]
                else:
                    phi = 0.5 * (st.theta[i, k] + st.gamma[j, k])
                d = sum((st.z[i, c] - st.z[j, c]) ** 2 for c in range(st.z.shape[1]))
                eta = st.alpha[k] * phi - st.beta[k] * d
                for f in range(m.F):
                    eta -= st.lam[f] * m.x[f, i, j]
                p = 1.0 / (1.0 + math.exp(-eta))
                total += m.y[k, i, j] * math.log(p) + (1 - m.y[k, i, j]) * math.log(1 - p)
    return total


def brute_dcor(u, v):
    """Distance correlation from explicit double-centred distance matrices."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    a = np.abs(u[:, None] - u[None, :])
    b = np.abs(v[:, None] - v[None, :])
    A = a - a.mean(0) - a.mean(1)[:, None] + a.mean()
    B = b - b.mean(0) - b.mean(1)[:, None] + b.mean()
    dcov = (A * B).mean()
    den = math.sqrt((A * A).mean() * (B * B).mean())
    return 0.0 if den == 0 else math.sqrt(max(dcov, 0.0) / den)


def second_difference(f, x0, h=1e-3):
    return (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h)


def first_difference(f, x0, h=1e-5):
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def report_criterion(label, ok, detail="", status=None):
    line = f"{label}: {status or ('PASS' if ok else 'FAIL')}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print("\n" + line, flush=True)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
