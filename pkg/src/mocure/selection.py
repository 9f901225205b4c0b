"""Model-comparison criteria.

Frequentist information criteria penalize the maximized log-likelihood;
the Bayesian criteria score posterior draws by out-of-sample predictive
ability.  Every per-observation term is the likelihood contribution,
so a censored row enters through its survival probability rather than
its density; with heavy censoring the two choices diverge badly.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .likelihood import loglik_terms

__all__ = [
    "CriteriaReport",
    "InfoCriteria",
    "criteria_report",
    "cpo_lpml",
    "dic",
    "info_criteria",
    "log_contribution_matrix",
    "waic",
]

RECOMMENDED_DRAWS = 1000


@dataclass(frozen=True)
class InfoCriteria:
    """The four penalized-likelihood criteria; smaller is better."""

    aicc: float
    bic: float
    hqic: float
    caic: float


def info_criteria(loglik_max, k, n):
    """Penalize the maximized log-likelihood by parameter count and size.

    AICc adds the small-sample correction 2k(k+1)/(n-k-1) on top of the
    plain Akaike penalty.
    """
    if n <= k + 1:
        raise ValueError("need n > k + 1 for the small-sample correction")
    ll = float(loglik_max)
    base = -2.0 * ll
    aicc = (base + 2.0 * k) + (2.0 * k * (k + 1)) / (n - k - 1)
    bic = base + k * np.log(n)
    hqic = base + 2.0 * k * np.log(np.log(n))
    caic = base + k * (np.log(n) + 1.0)
    return InfoCriteria(aicc=float(aicc), bic=float(bic), hqic=float(hqic), caic=float(caic))


def _draw_matrix(draws, spec):
    """Resolve draws to an (S, k) natural-scale array plus the model spec."""
    if hasattr(draws, "draws") and hasattr(draws, "spec"):
        if spec is None:
            spec = draws.spec
        draws = draws.draws
    if spec is None:
        raise ValueError("spec is required when draws is a bare array")
    mat = np.atleast_2d(np.asarray(draws, dtype=float))
    if mat.shape[1] != spec.n_params:
        raise ValueError(
            f"draws have {mat.shape[1]} columns, model has {spec.n_params} parameters"
        )
    if mat.shape[0] < RECOMMENDED_DRAWS:
        warnings.warn(
            f"only {mat.shape[0]} draws; predictive criteria are noisy "
            f"below {RECOMMENDED_DRAWS}",
            RuntimeWarning,
        )
    return mat, spec


def log_contribution_matrix(draws, data, spec=None):
    """Per-draw, per-observation log likelihood contributions, shape (S, n).

    Rows are natural-scale parameter draws; the tilt column, when the
    model has one, is moved to log scale before evaluation.
    """
    mat, spec = _draw_matrix(draws, spec)
    S = mat.shape[0]
    out = np.empty((S, data.n_obs))
    event = data.delta == 1.0
    for s in range(S):
        theta = mat[s].copy()
        if spec.has_tilt:
            theta[-1] = np.log(theta[-1])
        logf, logs = loglik_terms(theta, data, spec)
        out[s] = np.where(event, logf, logs)
    return out


def cpo_lpml(draws, data, spec=None):
    """Predictive ordinate per observation and their summed logarithm.

    The ordinate is the harmonic mean of likelihood contributions over
    draws, computed in log space; the sum of its logs scores the model,
    larger being better.
    """
    contrib = log_contribution_matrix(draws, data, spec)
    S = contrib.shape[0]
    with np.errstate(invalid="ignore"):
        log_cpo = np.log(S) - logsumexp(-contrib, axis=0)
    bad = ~np.isfinite(log_cpo) | (log_cpo == -np.inf)
    if np.any(bad):
        warnings.warn(
            "vanishing or overflowed predictive ordinate at observations "
            f"{np.flatnonzero(bad).tolist()}",
            RuntimeWarning,
        )
    cpo = np.exp(log_cpo)
    lpml = float(np.sum(log_cpo))
    return cpo, lpml


def dic(draws, data, spec=None):
    """Mean deviance plus half its sample variance over the draws."""
    contrib = log_contribution_matrix(draws, data, spec)
    deviance = -2.0 * contrib.sum(axis=1)
    finite = np.isfinite(deviance)
    dropped = int(np.sum(~finite))
    if dropped:
        warnings.warn(
            f"{dropped} non-finite deviance draws excluded from the DIC",
            RuntimeWarning,
        )
    deviance = deviance[finite]
    if deviance.size == 0:
        raise ValueError("no finite deviance draws")
    mean = float(deviance.mean())
    var = float(deviance.var(ddof=1)) if deviance.size > 1 else 0.0
    return mean + 0.5 * var


def waic(draws, data, spec=None):
    """Log predictive density minus twice-the-gap complexity penalty.

    lpd sums log of the draw-averaged contribution; the penalty doubles
    the gap between that log average and the average log contribution.
    Reported raw; the conventional deviance scaling is -2 times this.
    """
    contrib = log_contribution_matrix(draws, data, spec)
    S = contrib.shape[0]
    lpd_terms = logsumexp(contrib, axis=0) - np.log(S)
    mean_log = contrib.mean(axis=0)
    pd_terms = 2.0 * (lpd_terms - mean_log)
    return float(np.sum(lpd_terms) - np.sum(pd_terms))


@dataclass(frozen=True)
class CriteriaReport:
    """Criteria available for one fitted model; halves filled per engine."""

    aicc: Optional[float] = None
    bic: Optional[float] = None
    hqic: Optional[float] = None
    caic: Optional[float] = None
    lpml: Optional[float] = None
    dic: Optional[float] = None
    waic: Optional[float] = None

    @property
    def minus2_lpml(self):
        return None if self.lpml is None else -2.0 * self.lpml

    @property
    def minus2_waic(self):
        return None if self.waic is None else -2.0 * self.waic

    def to_dict(self):
        out = {}
        for name in ("aicc", "bic", "hqic", "caic", "lpml", "dic", "waic"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.lpml is not None:
            out["minus2_lpml"] = self.minus2_lpml
        if self.waic is not None:
            out["minus2_waic"] = self.minus2_waic
        return out


def criteria_report(data, fit=None, sample=None):
    """Bundle every criterion the supplied results support.

    A maximum-likelihood fit yields the penalized-likelihood half; a
    posterior sample yields the predictive half; either may be omitted.
    """
    if fit is None and sample is None:
        raise ValueError("supply a fit, a posterior sample, or both")
    fields = {}
    if fit is not None:
        ic = info_criteria(fit.loglik_max, fit.n_params, fit.n_obs)
        fields.update(aicc=ic.aicc, bic=ic.bic, hqic=ic.hqic, caic=ic.caic)
    if sample is not None:
        _, lpml = cpo_lpml(sample, data)
        fields["lpml"] = lpml
        fields["dic"] = dic(sample, data)
        fields["waic"] = waic(sample, data)
    return CriteriaReport(**fields)
