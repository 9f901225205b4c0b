"""The four model families as laws in (alpha, beta, tilt).

Two base laws (Gompertz, inverse Gaussian) become defective when alpha
goes negative: their total mass drops below one and the deficit is the
cure fraction.  The Marshall-Olkin transform S -> tilt*S / (1-(1-tilt)*S)
wraps either base law and preserves defectiveness.

All kernels work in log space and broadcast over numpy arrays; the
dataclass laws are thin value types for the scalar API.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .special import log_std_normal_cdf, log1mexp

__all__ = [
    "Family",
    "BaseLaw",
    "MOLaw",
    "CureFraction",
    "QuantileError",
    "gompertz_logpdf",
    "gompertz_logsurv",
    "invgauss_logpdf",
    "invgauss_logsurv",
    "mo_log_denominator",
    "mo_logpdf",
    "mo_logsurv",
    "law_logpdf",
    "law_logsurv",
    "cure_fraction",
    "quantile",
]


class Family(Enum):
    GOMPERTZ = "gompertz"
    INVERSE_GAUSSIAN = "ig"
    MO_GOMPERTZ = "mo-gompertz"
    MO_INVERSE_GAUSSIAN = "mo-ig"

    @property
    def is_marshall_olkin(self):
        return self in (Family.MO_GOMPERTZ, Family.MO_INVERSE_GAUSSIAN)

    @property
    def base(self):
        if self is Family.MO_GOMPERTZ:
            return Family.GOMPERTZ
        if self is Family.MO_INVERSE_GAUSSIAN:
            return Family.INVERSE_GAUSSIAN
        return self

    @property
    def marshall_olkin(self):
        if self is Family.GOMPERTZ:
            return Family.MO_GOMPERTZ
        if self is Family.INVERSE_GAUSSIAN:
            return Family.MO_INVERSE_GAUSSIAN
        return self


@dataclass(frozen=True)
class BaseLaw:
    """Gompertz or inverse Gaussian law; defective when alpha < 0."""

    family: Family
    alpha: float
    beta: float

    def __post_init__(self):
        if self.family.is_marshall_olkin:
            raise ValueError("BaseLaw takes a base family; use MOLaw for the extension")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.alpha == 0:
            raise ValueError("alpha = 0 is outside the parameter space")


@dataclass(frozen=True)
class MOLaw:
    """Marshall-Olkin extension of a base law; tilt = 1 recovers the base."""

    base: BaseLaw
    tilt: float

    def __post_init__(self):
        if not self.tilt > 0:
            raise ValueError(f"tilt must be positive, got {self.tilt}")


@dataclass(frozen=True)
class CureFraction:
    """Limiting survival p of a law and p0 of its base (p = p0 for base laws)."""

    p: float
    p0: float


class QuantileError(RuntimeError):
    """Quantile inversion failed to converge within the iteration cap."""


def _validate_t_beta(t, beta, strict_t):
    if strict_t and np.any(t <= 0):
        raise ValueError("t must be positive")
    if not strict_t and np.any(t < 0):
        raise ValueError("t must be nonnegative")
    if np.any(beta <= 0):
        raise ValueError("beta must be positive")


def gompertz_logpdf(t, alpha, beta):
    """log density of the Gompertz law, defective for alpha < 0."""
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _validate_t_beta(t, beta, strict_t=True)
    with np.errstate(over="ignore"):
        out = np.log(beta) + alpha * t - (beta / alpha) * np.expm1(alpha * t)
    return out if out.ndim else float(out)


def gompertz_logsurv(t, alpha, beta):
    """log survival of the Gompertz law; 0 at t = 0, plateau beta/alpha for alpha < 0."""
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _validate_t_beta(t, beta, strict_t=False)
    with np.errstate(over="ignore"):
        out = -(beta / alpha) * np.expm1(alpha * t)
    return out if out.ndim else float(out)


def invgauss_logpdf(t, alpha, beta):
    """log density of the inverse Gaussian law, defective for alpha < 0."""
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _validate_t_beta(t, beta, strict_t=True)
    out = -0.5 * np.log(2.0 * np.pi * beta * t**3) - (1.0 - alpha * t) ** 2 / (2.0 * beta * t)
    return out if out.ndim else float(out)


def _log1mexp_raw(x):
    # log(1 - exp(x)) without the domain check; caller guarantees x < 0
    with np.errstate(divide="ignore"):
        return np.where(x < -np.log(2.0), np.log1p(-np.exp(x)), np.log(-np.expm1(x)))


def invgauss_logsurv(t, alpha, beta):
    """log survival of the inverse Gaussian law.

    S(t) = Phi(-z1) - exp(2 alpha/beta) Phi(z2) with z1 = (alpha t - 1)/sqrt(beta t)
    and z2 = -(alpha t + 1)/sqrt(beta t).  The two terms cancel near the
    plateau complement, so the difference is formed in log space.
    """
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _validate_t_beta(t, beta, strict_t=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(beta * t)
        z1 = (alpha * t - 1.0) / root
        z2 = -(alpha * t + 1.0) / root
    log_upper = log_std_normal_cdf(-z1)
    log_tilted = 2.0 * alpha / beta + log_std_normal_cdf(z2)
    diff = log_tilted - log_upper
    # diff >= 0 (or nan) means S has rounded to zero or below
    dead = ~(diff < 0)
    out = np.where(
        dead,
        -np.inf,
        log_upper + _log1mexp_raw(np.where(dead, -1.0, diff)),
    )
    return out if out.ndim else float(out)


def mo_log_denominator(logsurv, tilt):
    """log(1 - (1 - tilt) S) from log S, stable for tilt on either side of 1.

    tilt < 1 with S near 1 is the cancellation-prone corner; it goes
    through log1mexp.  tilt = 1 returns exactly 0 so the wrapped law is
    bit-identical to its base.
    """
    ls = np.asarray(logsurv, dtype=float)
    lam = np.asarray(tilt, dtype=float)
    ls, lam = np.broadcast_arrays(ls, lam)
    out = np.zeros(ls.shape)
    above = lam > 1.0
    below = lam < 1.0
    if np.any(above):
        with np.errstate(divide="ignore"):
            a = np.log(lam[above] - 1.0) + ls[above]
        out[above] = np.where(a > 30.0, a, np.log1p(np.exp(np.minimum(a, 30.0))))
    if np.any(below):
        with np.errstate(divide="ignore"):
            arg = np.log1p(-lam[below]) + ls[below]
        out[below] = _log1mexp_raw(arg)
    return out if out.ndim else float(out)


def _base_logpdf(family, t, alpha, beta):
    if family is Family.GOMPERTZ:
        return gompertz_logpdf(t, alpha, beta)
    if family is Family.INVERSE_GAUSSIAN:
        return invgauss_logpdf(t, alpha, beta)
    raise ValueError(f"not a base family: {family}")


def _base_logsurv(family, t, alpha, beta):
    if family is Family.GOMPERTZ:
        return gompertz_logsurv(t, alpha, beta)
    if family is Family.INVERSE_GAUSSIAN:
        return invgauss_logsurv(t, alpha, beta)
    raise ValueError(f"not a base family: {family}")


def mo_logsurv(t, law):
    """log survival of a Marshall-Olkin law: log[tilt S / (1 - (1-tilt) S)]."""
    ls = _base_logsurv(law.base.family, t, law.base.alpha, law.base.beta)
    return np.log(law.tilt) + ls - mo_log_denominator(ls, law.tilt)


def mo_logpdf(t, law):
    """log density of a Marshall-Olkin law: log[tilt f / (1 - (1-tilt) S)^2]."""
    lp = _base_logpdf(law.base.family, t, law.base.alpha, law.base.beta)
    ls = _base_logsurv(law.base.family, t, law.base.alpha, law.base.beta)
    return np.log(law.tilt) + lp - 2.0 * mo_log_denominator(ls, law.tilt)


def law_logpdf(t, law):
    """log density of any law (base or Marshall-Olkin)."""
    if isinstance(law, MOLaw):
        return mo_logpdf(t, law)
    return _base_logpdf(law.family, t, law.alpha, law.beta)


def law_logsurv(t, law):
    """log survival of any law (base or Marshall-Olkin)."""
    if isinstance(law, MOLaw):
        return mo_logsurv(t, law)
    return _base_logsurv(law.family, t, law.alpha, law.beta)


def base_cure_p0(family, alpha, beta):
    """Cure fraction of a base law; 0 where alpha > 0.  Broadcasts."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if family is Family.GOMPERTZ:
        ratio = np.where(alpha < 0, beta / np.where(alpha < 0, alpha, -1.0), -np.inf)
        out = np.exp(ratio)
    elif family is Family.INVERSE_GAUSSIAN:
        expo = np.where(alpha < 0, 2.0 * alpha / beta, -np.inf)
        out = -np.expm1(expo)
        out = np.where(alpha < 0, out, 0.0)
    else:
        raise ValueError(f"not a base family: {family}")
    return out if out.ndim else float(out)


def mo_cure_transform(p0, tilt):
    """Map a basal cure fraction through the Marshall-Olkin tilt."""
    p0 = np.asarray(p0, dtype=float)
    out = tilt * p0 / ((1.0 - p0) + tilt * p0)
    return out if out.ndim else float(out)


def cure_fraction(law):
    """Cure fraction of a law: p = 0 exactly when the law is proper (alpha > 0)."""
    if isinstance(law, MOLaw):
        p0 = base_cure_p0(law.base.family, law.base.alpha, law.base.beta)
        return CureFraction(p=mo_cure_transform(p0, law.tilt), p0=p0)
    p0 = base_cure_p0(law.family, law.alpha, law.beta)
    return CureFraction(p=p0, p0=p0)


def _cdf(t, law):
    return -np.expm1(law_logsurv(t, law))


def quantile(u, law, tol=1e-12, max_iter=200):
    """Invert F(t) = u for a law with cure fraction p; requires 0 < u < 1 - p.

    Bracketed bisection with secant refinement on alternate steps; the
    upper bracket doubles from 1 until it straddles the root.  Converges
    on the residual |F(t) - u|, not on t.
    """
    u = float(u)
    p = cure_fraction(law).p
    if not 0.0 < u < 1.0 - p:
        raise ValueError(f"u must lie in (0, {1.0 - p:.6g}) for this law, got {u}")

    lo = 1e-12
    g_lo = _cdf(lo, law) - u
    if g_lo >= 0.0:
        return lo
    hi = 1.0
    doublings = 0
    while _cdf(hi, law) <= u:
        hi *= 2.0
        doublings += 1
        if doublings > 400:
            raise QuantileError("could not bracket the root; u too close to 1 - p")
    g_hi = _cdf(hi, law) - u

    a, fa = lo, g_lo
    b, fb = hi, g_hi
    x, fx = b, fb
    x_prev, f_prev = a, fa
    for it in range(max_iter):
        if abs(fx) <= tol:
            return x
        cand = None
        if it % 2 == 1 and fx != f_prev:
            cand = x - fx * (x - x_prev) / (fx - f_prev)
        if cand is None or not a < cand < b:
            cand = 0.5 * (a + b)
        f_cand = _cdf(cand, law) - u
        x_prev, f_prev = x, fx
        x, fx = cand, f_cand
        if f_cand < 0.0:
            a, fa = cand, f_cand
        else:
            b, fb = cand, f_cand
    if abs(fx) <= 1e-10:
        return x
    raise QuantileError(f"no convergence after {max_iter} iterations; residual {fx:.3g}")
