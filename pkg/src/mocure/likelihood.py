"""Censored log-likelihood and its finite-difference derivatives.

The likelihood is the one hot path shared by the optimizer and the
sampler, so it stays allocation-light and never raises on infeasible
parameter probes: anything non-finite collapses to a -inf sentinel.
"""

from dataclasses import dataclass

import numpy as np

from .distributions import (
    Family,
    gompertz_logpdf,
    gompertz_logsurv,
    invgauss_logpdf,
    invgauss_logsurv,
    mo_log_denominator,
)
from .regression import (
    DesignMatrices,
    ModelSpec,
    RegressionCoefficients,
    linear_predictors,
)

__all__ = [
    "SurvivalDataset",
    "ParamVector",
    "pack",
    "unpack",
    "loglik",
    "loglik_terms",
    "finite_diff_gradient",
    "finite_diff_hessian",
    "grad_loglik",
    "hessian_loglik",
]

_EPS = float(np.finfo(float).eps)
GRAD_STEP_SCALE = _EPS ** (1.0 / 3.0)
HESS_STEP_SCALE = _EPS ** (1.0 / 4.0)


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored observations (t, delta) with their design matrices."""

    t: np.ndarray
    delta: np.ndarray
    X: DesignMatrices

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "delta", delta)
        if t.shape != delta.shape or t.ndim != 1:
            raise ValueError("t and delta must be 1-d vectors of equal length")
        if t.shape[0] != self.X.n_obs:
            raise ValueError("t and the design matrices disagree on the number of rows")
        if not np.all(t > 0):
            raise ValueError("all t must be positive")
        if not np.all((delta == 0) | (delta == 1)):
            raise ValueError("delta must contain only 0 and 1")

    @property
    def n_obs(self):
        return self.t.shape[0]

    @property
    def n_events(self):
        return int(self.delta.sum())


def pack(coef, spec):
    """Flatten coefficients to the optimizer layout: a, b, then log(tilt)."""
    parts = [coef.a, coef.b]
    if spec.has_tilt:
        if coef.tilt is None:
            raise ValueError("model requires a tilt but the coefficients carry none")
        parts.append([coef.log_tilt])
    elif coef.tilt is not None:
        raise ValueError("model has no tilt but the coefficients carry one")
    theta = np.concatenate([np.asarray(p, dtype=float) for p in parts])
    if theta.shape[0] != spec.n_params:
        raise ValueError(
            f"coefficients pack to length {theta.shape[0]}, model needs {spec.n_params}"
        )
    return theta


def unpack(theta, spec):
    """Inverse of pack; the tilt comes back on the natural scale."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"theta must have shape ({spec.n_params},), got {theta.shape}")
    ka, kb = spec.n_alpha, spec.n_beta
    a = theta[:ka]
    b = theta[ka:ka + kb]
    log_tilt = float(theta[ka + kb]) if spec.has_tilt else None
    return RegressionCoefficients(a=a, b=b, log_tilt=log_tilt)


@dataclass(frozen=True)
class ParamVector:
    """Packed parameters bound to their model; tilt is stored as log(tilt)."""

    theta: np.ndarray
    spec: ModelSpec

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.spec.n_params,):
            raise ValueError(
                f"theta must have shape ({self.spec.n_params},), got {theta.shape}"
            )
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_coefficients(cls, coef, spec):
        return cls(theta=pack(coef, spec), spec=spec)

    @property
    def a(self):
        return self.theta[: self.spec.n_alpha]

    @property
    def b(self):
        return self.theta[self.spec.n_alpha:self.spec.n_alpha + self.spec.n_beta]

    @property
    def log_tilt(self):
        return float(self.theta[-1]) if self.spec.has_tilt else None

    @property
    def tilt(self):
        return float(np.exp(self.theta[-1])) if self.spec.has_tilt else None

    @property
    def coefficients(self):
        return unpack(self.theta, self.spec)


def _resolve(theta, spec):
    if isinstance(theta, ParamVector):
        return theta.theta, theta.spec if spec is None else spec
    if spec is None:
        raise ValueError("spec is required when theta is a bare array")
    return np.asarray(theta, dtype=float), spec


def loglik_terms(theta, data, spec=None):
    """Per-observation (log f, log S) at theta; no sentinel collapsing.

    Censored rows still get a log f entry (and vice versa); selection
    criteria need both columns.
    """
    theta, spec = _resolve(theta, spec)
    ka, kb = spec.n_alpha, spec.n_beta
    coef = RegressionCoefficients(a=theta[:ka], b=theta[ka:ka + kb], tilt=None)
    pred = linear_predictors(coef, data.X)
    alpha, beta = pred.alpha, pred.beta
    if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
        n = data.n_obs
        return np.full(n, -np.inf), np.full(n, -np.inf)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        if spec.family.base is Family.GOMPERTZ:
            logf = gompertz_logpdf(data.t, alpha, beta)
            logs = gompertz_logsurv(data.t, alpha, beta)
        else:
            logf = invgauss_logpdf(data.t, alpha, beta)
            logs = invgauss_logsurv(data.t, alpha, beta)
        if spec.has_tilt:
            tilt = np.exp(theta[ka + kb])
            log_tilt = theta[ka + kb]
            denom = mo_log_denominator(logs, tilt)
            logf = log_tilt + logf - 2.0 * denom
            logs = log_tilt + logs - denom
    return logf, logs


def loglik(theta, data, spec=None):
    """Censored log-likelihood: sum of delta*log f + (1-delta)*log S.

    Returns -inf whenever any contributing term is non-finite, so
    optimizers can probe freely.
    """
    theta, spec = _resolve(theta, spec)
    if not np.all(np.isfinite(theta)):
        return -np.inf
    logf, logs = loglik_terms(theta, data, spec)
    terms = np.where(data.delta == 1, logf, logs)
    total = float(np.sum(terms))
    return total if np.isfinite(total) else -np.inf


def _label(j, names):
    return f"coordinate {j}" if names is None else f"coordinate {j} ({names[j]})"


def finite_diff_gradient(fun, theta, names=None):
    """Central-difference gradient, step h_j = eps^(1/3) * max(1, |theta_j|).

    Raises when a probe point evaluates non-finite, naming the stepped
    coordinate.
    """
    theta = np.asarray(theta, dtype=float)
    h = GRAD_STEP_SCALE * np.maximum(1.0, np.abs(theta))
    g = np.empty_like(theta)
    for j in range(theta.shape[0]):
        up, dn = theta.copy(), theta.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        f_up = fun(up)
        f_dn = fun(dn)
        if not (np.isfinite(f_up) and np.isfinite(f_dn)):
            raise ValueError(f"function is non-finite when stepping {_label(j, names)}")
        g[j] = (f_up - f_dn) / (2.0 * h[j])
    return g


def finite_diff_hessian(fun, theta, names=None):
    """Central second-difference Hessian, step h_j = eps^(1/4) * max(1, |theta_j|).

    Off-diagonal entries are computed independently for (j, k) and
    (k, j), so the raw result is symmetric only up to rounding; callers
    wanting an exactly symmetric matrix average with the transpose.
    """
    theta = np.asarray(theta, dtype=float)
    m = theta.shape[0]
    h = HESS_STEP_SCALE * np.maximum(1.0, np.abs(theta))

    def f(point, j, k):
        val = fun(point)
        if not np.isfinite(val):
            where = _label(j, names) if j == k else f"{_label(j, names)} and {_label(k, names)}"
            raise ValueError(f"function is non-finite when stepping {where}")
        return val

    f0 = f(theta, 0, 0)
    H = np.empty((m, m))
    for j in range(m):
        up, dn = theta.copy(), theta.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        H[j, j] = (f(up, j, j) - 2.0 * f0 + f(dn, j, j)) / h[j] ** 2
    for j in range(m):
        for k in range(m):
            if j == k:
                continue
            pp, pm, mp_, mm = (theta.copy() for _ in range(4))
            pp[j] += h[j]; pp[k] += h[k]
            pm[j] += h[j]; pm[k] -= h[k]
            mp_[j] -= h[j]; mp_[k] += h[k]
            mm[j] -= h[j]; mm[k] -= h[k]
            H[j, k] = (f(pp, j, k) - f(pm, j, k) - f(mp_, j, k) + f(mm, j, k)) / (
                4.0 * h[j] * h[k]
            )
    return H


def grad_loglik(theta, data, spec=None):
    """Gradient of the censored log-likelihood by central differences."""
    theta, spec = _resolve(theta, spec)
    return finite_diff_gradient(
        lambda th: loglik(th, data, spec), theta, names=spec.param_names
    )


def hessian_loglik(theta, data, spec=None):
    """Hessian of the censored log-likelihood, symmetrized as (H + H^T)/2."""
    theta, spec = _resolve(theta, spec)
    H = finite_diff_hessian(
        lambda th: loglik(th, data, spec), theta, names=spec.param_names
    )
    return 0.5 * (H + H.T)
