"""Hot numeric kernels of the likelihood and the MCMC sweep.

Every kernel exists twice: an explicit-loop version compiled with numba and a
vectorised numpy version. The module-level names point at one or the other
depending on :data:`multilsm._accel.USE_NUMBA`; both are importable under
``*_numba`` / ``*_numpy`` for testing and benchmarking.

Shared argument conventions
---------------------------
Y, H : (K, n, n) float arrays of edges and observation weights
alpha, beta : (K,) view intercepts and distance coefficients
theta, gamma : (n, K) sender and receiver effects (``gamma is theta`` when undirected)
mode : 0 no effect, 1 sender only, 2 receiver only, 3 both (averaged)
dsq : (n, n) squared latent distances
cov : (n, n) covariate offset ``sum_f lambda_f x_f``
"""
import math

import numpy as np

from ._accel import njit, select

SOFTPLUS_CUTOFF = 35.0


# ---------------------------------------------------------------------------
# scalar helpers
# ---------------------------------------------------------------------------

@njit
def _softplus(eta):
    if eta > SOFTPLUS_CUTOFF:
        return eta
    if eta < -SOFTPLUS_CUTOFF:
        return math.exp(eta)
    return math.log1p(math.exp(eta))


@njit
def _logistic(eta):
    if eta >= 0.0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


@njit
def _phi(mode, t, g):
    if mode == 0:
        return 1.0
    if mode == 1:
        return t
    if mode == 2:
        return g
    return 0.5 * (t + g)


def softplus(eta):
    """``log(1 + exp(eta))`` without overflow."""
    eta = np.asarray(eta, dtype=np.float64)
    out = np.empty_like(eta)
    hi = eta > SOFTPLUS_CUTOFF
    lo = eta < -SOFTPLUS_CUTOFF
    mid = ~(hi | lo)
    out[hi] = eta[hi]
    out[lo] = np.exp(eta[lo])
    out[mid] = np.log1p(np.exp(eta[mid]))
    return out


def logistic(eta):
    eta = np.asarray(eta, dtype=np.float64)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def phi_tensor(theta, gamma, mode):
    """Combined effects, shape (K, n, n), entry [k, i, j] = g(theta_ik, gamma_jk)."""
    n, K = theta.shape
    if mode == 0:
        return np.ones((K, n, n))
    if mode == 1:
        return np.broadcast_to(theta.T[:, :, None], (K, n, n)).copy()
    if mode == 2:
        return np.broadcast_to(gamma.T[:, None, :], (K, n, n)).copy()
    return 0.5 * (theta.T[:, :, None] + gamma.T[:, None, :])


def eta_tensor(alpha, beta, theta, gamma, mode, dsq, cov):
    return alpha[:, None, None] * phi_tensor(theta, gamma, mode) - beta[:, None, None] * dsq[None] - cov[None]


# ---------------------------------------------------------------------------
# log-likelihood per view
# ---------------------------------------------------------------------------

@njit
def loglik_views_numba(Y, H, alpha, beta, theta, gamma, mode, dsq, cov):
    K, n, _ = Y.shape
    out = np.zeros(K)
    for k in range(K):
        acc = 0.0
        for i in range(n):
            for j in range(n):
                h = H[k, i, j]
                if i == j or h == 0.0:
                    continue
                eta = alpha[k] * _phi(mode, theta[i, k], gamma[j, k]) - beta[k] * dsq[i, j] - cov[i, j]
                acc += h * (Y[k, i, j] * eta - _softplus(eta))
        out[k] = acc
    return out


def loglik_views_numpy(Y, H, alpha, beta, theta, gamma, mode, dsq, cov):
    eta = eta_tensor(alpha, beta, theta, gamma, mode, dsq, cov)
    n = Y.shape[1]
    idx = np.arange(n)
    terms = H * (Y * eta - softplus(eta))
    terms[:, idx, idx] = 0.0
    return terms.sum(axis=(1, 2))


# ---------------------------------------------------------------------------
# Taylor sums for the intercept / distance-coefficient proposals of one view
# ---------------------------------------------------------------------------

@njit
def view_taylor_numba(Y, H, k, a, b, theta, gamma, mode, dsq, cov):
    """Sums over the observed cells of view ``k`` with (alpha, beta) = (a, b).

    Returns ``[sum h y phi, sum h phi p, sum h phi^2 p(1-p),
    sum h d (p - y), sum h d^2 p(1-p), loglik]``.
    """
    n = Y.shape[1]
    out = np.zeros(6)
    for i in range(n):
        for j in range(n):
            h = H[k, i, j]
            if i == j or h == 0.0:
                continue
            phi = _phi(mode, theta[i, k], gamma[j, k])
            d = dsq[i, j]
            y = Y[k, i, j]
            eta = a * phi - b * d - cov[i, j]
            p = _logistic(eta)
            w = p * (1.0 - p)
            out[0] += h * y * phi
            out[1] += h * phi * p
            out[2] += h * phi * phi * w
            out[3] += h * d * (p - y)
            out[4] += h * d * d * w
            out[5] += h * (y * eta - _softplus(eta))
    return out


def view_taylor_numpy(Y, H, k, a, b, theta, gamma, mode, dsq, cov):
    n = Y.shape[1]
    off = ~np.eye(n, dtype=bool)
    h = H[k][off]
    y = Y[k][off]
    phi = phi_tensor(theta[:, k:k + 1], gamma[:, k:k + 1], mode)[0][off]
    d = dsq[off]
    eta = a * phi - b * d - cov[off]
    p = logistic(eta)
    w = p * (1.0 - p)
    return np.array([
        np.sum(h * y * phi),
        np.sum(h * phi * p),
        np.sum(h * phi * phi * w),
        np.sum(h * d * (p - y)),
        np.sum(h * d * d * w),
        np.sum(h * (y * eta - softplus(eta))),
    ])


# ---------------------------------------------------------------------------
# latent positions
# ---------------------------------------------------------------------------

@njit
def _latent_moments_row(Y, H, alpha, beta, theta, gamma, mode, z, drow, cov, i):
    K, n, _ = Y.shape
    p = z.shape[1]
    num = np.zeros(p)
    prec = 0.0
    for k in range(K):
        for j in range(n):
            h = H[k, i, j]
            if j == i or h == 0.0:
                continue
            eta = alpha[k] * _phi(mode, theta[i, k], gamma[j, k]) - beta[k] * drow[j] - cov[i, j]
            w = 1.0 if eta > 0.0 else 0.0
            r = Y[k, i, j] - w
            if r != 0.0:
                prec += beta[k] * h * abs(r)
                for c in range(p):
                    num[c] += beta[k] * h * r * z[j, c]
    s2 = 1.0 / (1.0 + 2.0 * prec)
    mu = np.empty(p)
    for c in range(p):
        mu[c] = s2 * 2.0 * num[c]
    return mu, s2


@njit
def _node_loglik(Y, H, alpha, beta, theta, gamma, mode, drow, cov, i, undirected):
    K, n, _ = Y.shape
    acc = 0.0
    for k in range(K):
        for j in range(n):
            if j == i:
                continue
            h = H[k, i, j]
            if h != 0.0:
                eta = alpha[k] * _phi(mode, theta[i, k], gamma[j, k]) - beta[k] * drow[j] - cov[i, j]
                acc += h * (Y[k, i, j] * eta - _softplus(eta))
            if not undirected:
                h = H[k, j, i]
                if h != 0.0:
                    eta = alpha[k] * _phi(mode, theta[j, k], gamma[i, k]) - beta[k] * drow[j] - cov[j, i]
                    acc += h * (Y[k, j, i] * eta - _softplus(eta))
    return acc


@njit
def latent_moments_numba(Y, H, alpha, beta, theta, gamma, mode, z, dsq, cov, i):
    return _latent_moments_row(Y, H, alpha, beta, theta, gamma, mode, z, dsq[i], cov, i)


@njit
def latent_sweep_numba(Y, H, alpha, beta, theta, gamma, mode, z, dsq, cov, eps, logu, undirected):
    """Sequential MH over node positions; updates ``z`` and ``dsq`` in place.

    ``eps`` (n, p) are standard normal draws and ``logu`` (n,) log-uniforms.
    Returns the number of accepted moves.
    """
    n, p = z.shape
    accepted = 0
    dnew = np.empty(n)
    cand = np.empty(p)
    for i in range(n):
        mu, s2 = _latent_moments_row(Y, H, alpha, beta, theta, gamma, mode, z, dsq[i], cov, i)
        sd = math.sqrt(s2)
        for c in range(p):
            cand[c] = mu[c] + sd * eps[i, c]
        for j in range(n):
            acc = 0.0
            for c in range(p):
                diff = cand[c] - z[j, c]
                acc += diff * diff
            dnew[j] = acc
        dnew[i] = 0.0
        mu_r, s2_r = _latent_moments_row(Y, H, alpha, beta, theta, gamma, mode, z, dnew, cov, i)
        ll_old = _node_loglik(Y, H, alpha, beta, theta, gamma, mode, dsq[i], cov, i, undirected)
        ll_new = _node_loglik(Y, H, alpha, beta, theta, gamma, mode, dnew, cov, i, undirected)
        q_fwd = 0.0
        q_rev = 0.0
        prior = 0.0
        for c in range(p):
            q_fwd += (cand[c] - mu[c]) ** 2
            q_rev += (z[i, c] - mu_r[c]) ** 2
            prior += z[i, c] ** 2 - cand[c] ** 2
        log_q_fwd = -0.5 * p * math.log(s2) - 0.5 * q_fwd / s2
        log_q_rev = -0.5 * p * math.log(s2_r) - 0.5 * q_rev / s2_r
        log_ratio = ll_new - ll_old + 0.5 * prior + log_q_rev - log_q_fwd
        if logu[i] < log_ratio:
            accepted += 1
            for c in range(p):
                z[i, c] = cand[c]
            for j in range(n):
                dsq[i, j] = dnew[j]
                dsq[j, i] = dnew[j]
    return accepted


def _latent_moments_row_numpy(Y, H, alpha, beta, theta, gamma, mode, z, drow, cov, i):
    K, n, _ = Y.shape
    if mode == 0:
        phi = np.ones((K, n))
    elif mode == 1:
        phi = np.broadcast_to(theta[i][:, None], (K, n))
    elif mode == 2:
        phi = gamma.T
    else:
        phi = 0.5 * (theta[i][:, None] + gamma.T)
    eta = alpha[:, None] * phi - beta[:, None] * drow[None] - cov[i][None]
    w = (eta > 0.0).astype(np.float64)
    h = H[:, i, :].copy()
    h[:, i] = 0.0
    r = (Y[:, i, :] - w) * h * beta[:, None]
    s2 = 1.0 / (1.0 + 2.0 * np.abs(r).sum())
    mu = s2 * 2.0 * (r.sum(axis=0) @ z)
    return mu, s2


def _node_loglik_numpy(Y, H, alpha, beta, theta, gamma, mode, drow, cov, i, undirected):
    K, n, _ = Y.shape
    mask = np.ones(n, dtype=bool)
    mask[i] = False
    phi_row = _row_phi(theta, gamma, mode, i, K, n)
    eta = alpha[:, None] * phi_row - beta[:, None] * drow[None] - cov[i][None]
    ll = (H[:, i, mask] * (Y[:, i, mask] * eta[:, mask] - softplus(eta[:, mask]))).sum()
    if not undirected:
        phi_col = _col_phi(theta, gamma, mode, i, K, n)
        eta = alpha[:, None] * phi_col - beta[:, None] * drow[None] - cov[:, i][None]
        ll += (H[:, mask, i] * (Y[:, mask, i] * eta[:, mask] - softplus(eta[:, mask]))).sum()
    return ll


def _row_phi(theta, gamma, mode, i, K, n):
    # phi[k, j] for dyads (i, j)
    if mode == 0:
        return np.ones((K, n))
    if mode == 1:
        return np.broadcast_to(theta[i][:, None], (K, n))
    if mode == 2:
        return gamma.T
    return 0.5 * (theta[i][:, None] + gamma.T)


def _col_phi(theta, gamma, mode, i, K, n):
    # phi[k, j] for dyads (j, i)
    if mode == 0:
        return np.ones((K, n))
    if mode == 1:
        return theta.T
    if mode == 2:
        return np.broadcast_to(gamma[i][:, None], (K, n))
    return 0.5 * (theta.T + gamma[i][:, None])


def latent_moments_numpy(Y, H, alpha, beta, theta, gamma, mode, z, dsq, cov, i):
    return _latent_moments_row_numpy(Y, H, alpha, beta, theta, gamma, mode, z, dsq[i], cov, i)


def latent_sweep_numpy(Y, H, alpha, beta, theta, gamma, mode, z, dsq, cov, eps, logu, undirected):
    n, p = z.shape
    accepted = 0
    for i in range(n):
        mu, s2 = _latent_moments_row_numpy(Y, H, alpha, beta, theta, gamma, mode, z, dsq[i], cov, i)
        cand = mu + math.sqrt(s2) * eps[i]
        dnew = ((cand[None, :] - z) ** 2).sum(axis=1)
        dnew[i] = 0.0
        mu_r, s2_r = _latent_moments_row_numpy(Y, H, alpha, beta, theta, gamma, mode, z, dnew, cov, i)
        ll_old = _node_loglik_numpy(Y, H, alpha, beta, theta, gamma, mode, dsq[i], cov, i, undirected)
        ll_new = _node_loglik_numpy(Y, H, alpha, beta, theta, gamma, mode, dnew, cov, i, undirected)
        log_q_fwd = -0.5 * p * math.log(s2) - 0.5 * np.sum((cand - mu) ** 2) / s2
        log_q_rev = -0.5 * p * math.log(s2_r) - 0.5 * np.sum((z[i] - mu_r) ** 2) / s2_r
        prior = 0.5 * (np.sum(z[i] ** 2) - np.sum(cand ** 2))
        if logu[i] < ll_new - ll_old + prior + log_q_rev - log_q_fwd:
            accepted += 1
            z[i] = cand
            dsq[i, :] = dnew
            dsq[:, i] = dnew
    return accepted


# ---------------------------------------------------------------------------
# node effects
# ---------------------------------------------------------------------------

@njit
def effect_terms_numba(Y, H, alpha, beta, theta, gamma, mode, dsq, cov, i, side, values):
    """Per-view sums for the effect of node ``i`` set to ``values`` (K,).

    ``side`` 0 replaces theta[i] and runs over row i, ``side`` 1 replaces
    gamma[i] and runs over column i. Returns (K, 3) with columns
    ``sum h (y - p)``, ``sum h p (1 - p)`` and the log-likelihood of those cells.
    """
    K, n, _ = Y.shape
    out = np.zeros((K, 3))
    for k in range(K):
        v = values[k]
        s1 = 0.0
        s2 = 0.0
        ll = 0.0
        for j in range(n):
            if j == i:
                continue
            if side == 0:
                h = H[k, i, j]
                if h == 0.0:
                    continue
                phi = _phi(mode, v, gamma[j, k])
                y = Y[k, i, j]
                eta = alpha[k] * phi - beta[k] * dsq[i, j] - cov[i, j]
            else:
                h = H[k, j, i]
                if h == 0.0:
                    continue
                phi = _phi(mode, theta[j, k], v)
                y = Y[k, j, i]
                eta = alpha[k] * phi - beta[k] * dsq[j, i] - cov[j, i]
            p = _logistic(eta)
            s1 += h * (y - p)
            s2 += h * p * (1.0 - p)
            ll += h * (y * eta - _softplus(eta))
        out[k, 0] = s1
        out[k, 1] = s2
        out[k, 2] = ll
    return out


def effect_terms_numpy(Y, H, alpha, beta, theta, gamma, mode, dsq, cov, i, side, values):
    K, n, _ = Y.shape
    mask = np.ones(n, dtype=bool)
    mask[i] = False
    v = np.asarray(values, dtype=np.float64)[:, None]
    if side == 0:
        h = H[:, i, mask]
        y = Y[:, i, mask]
        other = gamma.T[:, mask]
        phi = v if mode == 1 else 0.5 * (v + other)
        eta = alpha[:, None] * phi - beta[:, None] * dsq[i, mask][None] - cov[i, mask][None]
    else:
        h = H[:, mask, i]
        y = Y[:, mask, i]
        other = theta.T[:, mask]
        phi = v if mode == 2 else 0.5 * (other + v)
        eta = alpha[:, None] * phi - beta[:, None] * dsq[mask, i][None] - cov[mask, i][None]
    eta = np.broadcast_to(eta, h.shape)
    p = logistic(eta)
    out = np.empty((K, 3))
    out[:, 0] = (h * (y - p)).sum(axis=1)
    out[:, 1] = (h * p * (1.0 - p)).sum(axis=1)
    out[:, 2] = (h * (y * eta - softplus(eta))).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# distance correlation (O(n) memory)
# ---------------------------------------------------------------------------

@njit
def dcov_terms_numba(u, v):
    """Return (dCov^2, dVar_u^2, dVar_v^2) as V-statistics."""
    n = u.shape[0]
    ra = np.zeros(n)
    rb = np.zeros(n)
    for j in range(n):
        sa = 0.0
        sb = 0.0
        for k in range(n):
            sa += abs(u[j] - u[k])
            sb += abs(v[j] - v[k])
        ra[j] = sa / n
        rb[j] = sb / n
    ga = 0.0
    gb = 0.0
    for j in range(n):
        ga += ra[j]
        gb += rb[j]
    ga /= n
    gb /= n
    sab = 0.0
    saa = 0.0
    sbb = 0.0
    for j in range(n):
        for k in range(n):
            A = abs(u[j] - u[k]) - ra[j] - ra[k] + ga
            B = abs(v[j] - v[k]) - rb[j] - rb[k] + gb
            sab += A * B
            saa += A * A
            sbb += B * B
    nn = float(n) * float(n)
    return sab / nn, saa / nn, sbb / nn


def dcov_terms_numpy(u, v):
    a = np.abs(u[:, None] - u[None, :])
    b = np.abs(v[:, None] - v[None, :])
    A = a - a.mean(axis=0)[None, :] - a.mean(axis=1)[:, None] + a.mean()
    B = b - b.mean(axis=0)[None, :] - b.mean(axis=1)[:, None] + b.mean()
    return float((A * B).mean()), float((A * A).mean()), float((B * B).mean())


loglik_views = select(loglik_views_numba, loglik_views_numpy)
view_taylor = select(view_taylor_numba, view_taylor_numpy)
latent_moments = select(latent_moments_numba, latent_moments_numpy)
latent_sweep = select(latent_sweep_numba, latent_sweep_numpy)
effect_terms = select(effect_terms_numba, effect_terms_numpy)
dcov_terms = select(dcov_terms_numba, dcov_terms_numpy)
