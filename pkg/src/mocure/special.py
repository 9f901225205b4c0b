"""Scalar numerical kernels shared by all model families.

Everything here is a pure function of floats/arrays and is safe to call
from any thread.
"""

import numpy as np
from scipy.special import erfc, log_ndtr

__all__ = ["std_normal_cdf", "log_std_normal_cdf", "log1mexp"]

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_LN2 = np.log(2.0)


def std_normal_cdf(x):
    """Standard normal CDF, accurate to ~1 ulp over the whole real line.

    Evaluated through the complementary error function so the lower tail
    does not lose precision; saturates to exactly 0.0 / 1.0 in the far
    tails instead of raising.
    """
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(-x * _INV_SQRT2)
    return out if out.ndim else float(out)


def log_std_normal_cdf(x):
    """log of the standard normal CDF, stable in the deep lower tail."""
    x = np.asarray(x, dtype=float)
    out = log_ndtr(x)
    return out if out.ndim else float(out)


def log1mexp(x):
    """log(1 - exp(x)) for x < 0 without catastrophic cancellation.

    Uses log(-expm1(x)) near zero and log1p(-exp(x)) otherwise; the
    switch point -ln 2 is the usual accuracy crossover.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x >= 0):
        raise ValueError("log1mexp requires x < 0")
    with np.errstate(divide="ignore"):
        out = np.where(x < -_LN2, np.log1p(-np.exp(x)), np.log(-np.expm1(x)))
    return out if out.ndim else float(out)
