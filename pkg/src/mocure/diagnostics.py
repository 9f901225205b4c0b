"""Case-deletion influence measures and residual analysis for fitted models."""

import warnings
from dataclasses import dataclass

import numpy as np

from .likelihood import ParamVector, SurvivalDataset, loglik, loglik_terms
from .mle import fit_mle
from .regression import DesignMatrices

__all__ = [
    "InfluenceReport",
    "ResidualReport",
    "case_deletion_influence",
    "cook_distance",
    "point_estimate",
    "relative_change",
    "residuals",
]

LD_SLACK = -1e-8
GD_FLAG_FACTOR = 2.0
LD_FLAG_PERCENTILE = 99.0
SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class InfluenceReport:
    """Deletion influence per case; failed refits carry missing values."""

    gd: np.ndarray
    ld: np.ndarray
    flagged: tuple
    failed: tuple = ()

    @property
    def n_cases(self):
        return self.gd.shape[0]


@dataclass(frozen=True)
class ResidualReport:
    """Martingale residuals and their variance-stabilized transform."""

    martingale: np.ndarray
    deviance: np.ndarray


def _drop_row(data, i):
    keep = np.ones(data.n_obs, dtype=bool)
    keep[i] = False
    return SurvivalDataset(
        t=data.t[keep],
        delta=data.delta[keep],
        X=DesignMatrices(x1=data.X.x1[keep], x2=data.X.x2[keep]),
    )


def _natural_covariance(fit):
    """Covariance mapped to the natural parameter scale."""
    cov = np.array(fit.covariance, dtype=float)
    if fit.spec.has_tilt:
        jac = np.ones(cov.shape[0])
        jac[-1] = float(np.exp(fit.theta_hat.theta[-1]))
        cov = cov * np.outer(jac, jac)
    return cov


def cook_distance(center, deleted, covariance):
    """Quadratic form (center - deleted)' cov^{-1} (center - deleted).

    Unchanged by any invertible linear map applied to both points and,
    congruently, to the covariance.
    """
    diff = np.asarray(center, dtype=float) - np.asarray(deleted, dtype=float)
    try:
        return float(diff @ np.linalg.solve(covariance, diff))
    except np.linalg.LinAlgError:
        return float(diff @ np.linalg.pinv(covariance) @ diff)


def case_deletion_influence(fit, data, spec=None, *, max_restarts=2, seed=0):
    """Refit without each case and measure how far the estimate moves.

    The quadratic form uses the full-data covariance; the displacement
    compares full-data log-likelihoods, so both deleted-case fits and
    the original optimum are scored on the same objective.  A case is
    flagged when its quadratic form exceeds twice the mean times the
    parameter count, or its displacement passes the 99th percentile.
    """
    if spec is None:
        spec = fit.spec
    if not fit.converged or fit.covariance is None:
        raise ValueError("influence requires a converged fit with a covariance")
    if data.n_obs < spec.n_params + 2:
        raise ValueError("too few observations to refit with one deleted")

    cov_natural = _natural_covariance(fit)
    center = fit.estimates_natural
    ll_full = float(fit.loglik_max)
    n = data.n_obs

    gd = np.full(n, np.nan)
    ld = np.full(n, np.nan)
    failed = []
    for i in range(n):
        reduced = _drop_row(data, i)
        try:
            refit = fit_mle(
                reduced,
                spec,
                init=ParamVector(fit.theta_hat.theta.copy(), spec),
                seed=seed,
                max_restarts=max_restarts,
            )
        except (RuntimeError, ValueError):
            failed.append(i)
            continue
        if not refit.converged:
            failed.append(i)
            continue
        gd[i] = cook_distance(center, refit.estimates_natural, cov_natural)
        ld[i] = 2.0 * (ll_full - loglik(refit.theta_hat.theta, data, spec))

    finite_ld = ld[np.isfinite(ld)]
    if finite_ld.size and finite_ld.min() < LD_SLACK:
        warnings.warn(
            "a deleted-case estimate beat the full-data optimum; "
            "the original fit may not be at the maximum",
            RuntimeWarning,
        )
    ld = np.where(np.isfinite(ld) & (ld < 0.0), 0.0, ld)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        gd_gate = GD_FLAG_FACTOR * np.nanmean(gd) * spec.n_params
        ld_gate = np.nanpercentile(ld, LD_FLAG_PERCENTILE)
    over = (gd > gd_gate) | (ld > ld_gate)
    flagged = tuple(int(i) for i in np.flatnonzero(over & np.isfinite(gd)))
    return InfluenceReport(gd=gd, ld=ld, flagged=flagged, failed=tuple(failed))


@dataclass(frozen=True)
class RelativeChange:
    """Percent movement of each estimate and its standard error."""

    rc_estimates: np.ndarray
    rc_std_errors: np.ndarray
    undefined: tuple = ()


def relative_change(fit_full, fit_dropped):
    """Percent change of natural-scale estimates and standard errors.

    Entries where the reference estimate is exactly zero cannot be
    scaled and are returned as missing, with their indices recorded.
    """
    if fit_full.spec != fit_dropped.spec:
        raise ValueError("fits compare different models")
    if not (fit_full.converged and fit_dropped.converged):
        raise ValueError("both fits must have converged")
    if fit_full.std_errors is None or fit_dropped.std_errors is None:
        raise ValueError("both fits need standard errors")

    est = fit_full.estimates_natural
    est_drop = fit_dropped.estimates_natural
    se = fit_full.std_errors_natural
    se_drop = fit_dropped.std_errors_natural

    undefined = []
    rc_est = np.full(est.shape, np.nan)
    rc_se = np.full(est.shape, np.nan)
    for j in range(est.shape[0]):
        if est[j] == 0.0 or se[j] == 0.0:
            undefined.append(j)
            continue
        rc_est[j] = abs((est[j] - est_drop[j]) / est[j]) * 100.0
        rc_se[j] = abs((se[j] - se_drop[j]) / se[j]) * 100.0
    return RelativeChange(
        rc_estimates=rc_est, rc_std_errors=rc_se, undefined=tuple(undefined)
    )


def point_estimate(point, spec=None):
    """Packed parameter vector from a fit, a posterior sample, or an array."""
    if hasattr(point, "theta_hat"):
        if not point.converged:
            raise ValueError("residuals need a converged fit")
        pv = point.theta_hat
        return pv.theta, pv.spec
    if hasattr(point, "draws") and hasattr(point, "spec"):
        mean = point.draws.mean(axis=0)
        if point.spec.has_tilt:
            mean = mean.copy()
            mean[-1] = np.log(mean[-1])
        return mean, point.spec
    if isinstance(point, ParamVector):
        return point.theta, point.spec
    if spec is None:
        raise ValueError("spec is required when the point is a bare array")
    return np.asarray(point, dtype=float), spec


def residuals(point, data, spec=None):
    """Martingale residuals and their deviance transform at a point estimate.

    The point may be a maximum-likelihood fit, a posterior sample (its
    draw mean is used), or a packed parameter vector.  An observed event
    whose fitted survival is exactly one sits on the boundary of the
    transform's domain and is assigned the boundary value sqrt(2).
    """
    theta, spec = point_estimate(point, spec)
    _, logs = loglik_terms(theta, data, spec)
    delta = data.delta
    martingale = delta + logs

    sign = np.sign(martingale)
    inner = np.zeros_like(martingale)
    event = delta == 1.0
    boundary = event & (martingale == 1.0)
    safe = event & ~boundary
    with np.errstate(divide="ignore", invalid="ignore"):
        inner[safe] = martingale[safe] + np.log1p(-martingale[safe])
        inner[~event] = martingale[~event]
    deviance = sign * np.sqrt(-2.0 * inner)
    deviance[boundary] = SQRT2 * sign[boundary]
    return ResidualReport(martingale=martingale, deviance=deviance)
