"""Time the compiled kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--n 50] [--K 5] [--repeat 20]

Both implementations are called on the same inputs and their outputs are
checked to agree before timing. The first numba call (compilation) is
excluded.
"""
import argparse
import time

import numpy as np

from multilsm import kernels
from multilsm._accel import NUMBA_AVAILABLE
from multilsm.model import ModelSpec, squared_distances
from multilsm.simulation import TruthConfig, draw_truth, simulate_multiplex


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    spec = ModelSpec.from_code("VV")
    rng = np.random.default_rng(args.seed)
    truth = draw_truth(TruthConfig(args.n, args.K, spec), rng)
    m = simulate_multiplex(truth, spec, rng)
    Y, H = np.ascontiguousarray(m.y), np.ascontiguousarray(m.h)
    th, ga, mode = truth.theta, truth.gamma, spec.mode
    dsq = squared_distances(truth.z)
    cov = np.zeros((args.n, args.n))
    n, p = truth.z.shape
    eps = rng.standard_normal((n, p))
    logu = np.log(rng.random(n))
    u, v = rng.random(2000), rng.random(2000)

    cases = {
        "loglik_views": lambda impl: impl(Y, H, truth.alpha, truth.beta, th, ga, mode, dsq, cov),
        "view_taylor": lambda impl: impl(Y, H, 1, 2.0, 1.0, th, ga, mode, dsq, cov),
        "effect_terms": lambda impl: impl(Y, H, truth.alpha, truth.beta, th, ga, mode, dsq, cov, 3, 1,
                                          ga[3].copy()),
        "latent_sweep": lambda impl: impl(Y, H, truth.alpha, truth.beta, th, ga, mode, truth.z.copy(), dsq.copy(),
                                          cov, eps, logu, False),
        "dcov_terms": lambda impl: impl(u, v),
    }
    print(f"n={args.n} K={args.K} repeat={args.repeat}")
    print(f"{'kernel':<14}{'numba (ms)':>12}{'numpy (ms)':>12}{'speed-up':>10}")
    for name, call in cases.items():
        fast = getattr(kernels, f"{name}_numba")
        slow = getattr(kernels, f"{name}_numpy")
        a, b = call(fast), call(slow)
        if not np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=1e-9):
            raise SystemExit(f"{name}: numba and numpy disagree")
        t_fast = best_of(lambda: call(fast), args.repeat)
        t_slow = best_of(lambda: call(slow), args.repeat)
        print(f"{name:<14}{t_fast * 1e3:>12.3f}{t_slow * 1e3:>12.3f}{t_slow / t_fast:>10.1f}")


if __name__ == "__main__":
    main()
