"""Random variate generators and log-densities used by the sampler."""
import math

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

LOG_2PI = math.log(2.0 * math.pi)


def sample_inverse_gamma(shape: float, rate: float, rng: np.random.Generator, size=None):
    """Draw from the inverse gamma law with density ~ x^(-shape-1) exp(-rate/x)."""
    if not (shape > 0 and rate > 0):
        raise ValueError(f"inverse gamma needs positive shape and rate, got ({shape}, {rate})")
    return rate / rng.gamma(shape, 1.0, size=size)


def _log_diff_ndtr(a, b):
    """log(Phi(b) - Phi(a)) for a < b, stable in both tails."""
    if a > 0:
        # mirror into the lower tail where log_ndtr is accurate
        a, b = -b, -a
    lb = log_ndtr(b)
    la = log_ndtr(a)
    return lb + math.log1p(-math.exp(la - lb)) if la < lb else -math.inf


def _standard_bounds(mean, var, low, high):
    if not var > 0:
        raise ValueError(f"variance must be positive, got {var}")
    if not low < high:
        raise ValueError(f"invalid truncation bounds [{low}, {high}]")
    sd = math.sqrt(var)
    return sd, (low - mean) / sd, (high - mean) / sd


def sample_truncated_normal(mean: float, var: float, low: float, high: float, rng: np.random.Generator) -> float:
    """One draw from N(mean, var) restricted to [low, high] by inverse CDF.

    ``high`` (or ``low``) may be infinite. The result always lies in the
    closed interval.
    """
    sd, a, b = _standard_bounds(mean, var, low, high)
    u = rng.random()
    flip = a > 0
    if flip:
        a, b = -b, -a
    # work in log-space on the lower tail: Phi(a) + u (Phi(b) - Phi(a))
    la = log_ndtr(a)
    lb = log_ndtr(b)
    if la == -math.inf:
        logp = lb + math.log(u) if u > 0 else -math.inf
    else:
        logp = lb + math.log(u + (1.0 - u) * math.exp(la - lb))
    x = float(ndtri_exp(logp)) if logp > -math.inf else a
    x = min(max(x, a), b)
    if flip:
        x = -x
    return min(max(mean + sd * x, low), high)


def truncated_normal_logpdf(x: float, mean: float, var: float, low: float, high: float) -> float:
    if x < low or x > high:
        return -math.inf
    sd, a, b = _standard_bounds(mean, var, low, high)
    t = (x - mean) / sd
    return -0.5 * LOG_2PI - math.log(sd) - 0.5 * t * t - _log_diff_ndtr(a, b)


def normal_logpdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (LOG_2PI + math.log(var) + (x - mean) ** 2 / var)

