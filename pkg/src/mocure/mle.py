"""Frequentist engine: BFGS ascent, observed-information covariance,
Wald intervals, likelihood-ratio test.

Defective likelihoods are multimodal across the sign boundary of alpha,
so a single descent is not trusted: the default start comes from a
Kaplan-Meier plateau heuristic and up to eight jittered restarts back it
up.  Marshall-Olkin fits are seeded from the matching base-family fit,
which guarantees a nonnegative likelihood-ratio statistic.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaincc, ndtri

from .likelihood import (
    GRAD_STEP_SCALE,
    ParamVector,
    hessian_loglik,
    loglik,
    unpack,
)
from .regression import DesignMatrices, ModelSpec, linear_predictors, per_observation_cure

__all__ = [
    "FitResult",
    "PatternCure",
    "fit_mle",
    "wald_ci",
    "lr_test",
    "kaplan_meier",
    "default_init",
]

GTOL = 1e-6
GTOL_LOOSE = 1e-4
FTOL_REL = 1e-10
PENALTY = 1e300


def kaplan_meier(t, delta):
    """Product-limit survival estimate.

    Returns (times, survival) evaluated after each distinct event time;
    censored observations only thin the risk set.
    """
    t = np.asarray(t, dtype=float)
    delta = np.asarray(delta, dtype=float)
    order = np.argsort(t, kind="stable")
    t, delta = t[order], delta[order]
    times = np.unique(t[delta == 1])
    surv = np.empty_like(times)
    s = 1.0
    for i, u in enumerate(times):
        at_risk = np.count_nonzero(t >= u)
        events = np.count_nonzero((t == u) & (delta == 1))
        s *= 1.0 - events / at_risk
        surv[i] = s
    return times, surv


def default_init(data, spec):
    """Heuristic start: alpha sign from the Kaplan-Meier tail, beta from 1/mean(t).

    A visible survival plateau (last KM value above 0.05) points at a
    defective law, so the alpha intercept starts negative.
    """
    times, surv = kaplan_meier(data.t, data.delta)
    km_tail = surv[-1] if surv.size else 1.0
    a = np.zeros(spec.n_alpha)
    a[0] = -0.5 if km_tail > 0.05 else 0.5
    b = np.zeros(spec.n_beta)
    b[0] = -np.log(float(np.mean(data.t)))
    theta = np.concatenate([a, b, [0.0] if spec.has_tilt else []])
    return theta


@dataclass(frozen=True)
class PatternCure:
    """Cure fraction at one covariate pattern, with its row count."""

    x1: tuple
    x2: tuple
    p0: float
    p: float
    count: int


@dataclass(frozen=True)
class FitResult:
    theta_hat: ParamVector
    covariance: np.ndarray | None
    std_errors: np.ndarray | None
    ci: list | None
    loglik_max: float
    converged: bool
    n_obs: int
    spec: ModelSpec
    cure_estimates: list
    level: float = 0.95
    covariance_note: str | None = None
    n_clamped: int = 0
    n_attempts: int = 1

    @property
    def param_names(self):
        return self.spec.param_names

    @property
    def estimates_natural(self):
        est = self.theta_hat.theta.copy()
        if self.spec.has_tilt:
            est[-1] = np.exp(est[-1])
        return est

    @property
    def std_errors_natural(self):
        if self.std_errors is None:
            return None
        se = self.std_errors.copy()
        if self.spec.has_tilt:
            se[-1] = se[-1] * float(np.exp(self.theta_hat.theta[-1]))
        return se

    @property
    def n_params(self):
        return self.spec.n_params

    def natural_table(self):
        """Per-parameter rows: name, estimate, se, ci bounds (natural scale)."""
        est = self.estimates_natural
        se = self.std_errors_natural
        rows = []
        for j, name in enumerate(self.param_names):
            rows.append(
                {
                    "name": name,
                    "estimate": float(est[j]),
                    "se": float(se[j]) if se is not None else None,
                    "ci_low": float(self.ci[j][0]) if self.ci is not None else None,
                    "ci_high": float(self.ci[j][1]) if self.ci is not None else None,
                }
            )
        return rows


def _tolerant_grad(theta, data, spec):
    """Finite-difference gradient that degrades instead of raising.

    Central where both probes are finite, one-sided against the center
    otherwise, zero as a last resort so the optimizer can still move the
    remaining coordinates.
    """
    h = GRAD_STEP_SCALE * np.maximum(1.0, np.abs(theta))
    g = np.zeros_like(theta)
    f_center = None
    for j in range(theta.shape[0]):
        up, dn = theta.copy(), theta.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        f_up = loglik(up, data, spec)
        f_dn = loglik(dn, data, spec)
        if np.isfinite(f_up) and np.isfinite(f_dn):
            g[j] = (f_up - f_dn) / (2.0 * h[j])
            continue
        if f_center is None:
            f_center = loglik(theta, data, spec)
        if not np.isfinite(f_center):
            continue
        if np.isfinite(f_up):
            g[j] = (f_up - f_center) / h[j]
        elif np.isfinite(f_dn):
            g[j] = (f_center - f_dn) / h[j]
    return g


@dataclass
class _Attempt:
    theta: np.ndarray
    loglik: float
    converged: bool


def _ascend(start, data, spec):
    """One optimization attempt: BFGS rounds until a convergence rule fires.

    Converged means the gradient inf-norm is at most 1e-6, or the
    relative likelihood change between rounds is at most 1e-10 with the
    gradient still below 1e-4.
    """
    if not np.isfinite(loglik(start, data, spec)):
        return _Attempt(theta=start, loglik=-np.inf, converged=False)

    def neg_ll(th):
        val = loglik(th, data, spec)
        return -val if np.isfinite(val) else PENALTY

    def neg_grad(th):
        return -_tolerant_grad(th, data, spec)

    x = np.asarray(start, dtype=float)
    ll_prev = None
    ginf = np.inf
    for _ in range(4):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(neg_ll, x, jac=neg_grad, method="BFGS",
                           options={"gtol": GTOL, "maxiter": 500})
        x = res.x
        ll = loglik(x, data, spec)
        ginf = float(np.max(np.abs(_tolerant_grad(x, data, spec))))
        if ginf <= GTOL:
            return _Attempt(theta=x, loglik=ll, converged=True)
        if ll_prev is not None and abs(ll - ll_prev) <= FTOL_REL * max(1.0, abs(ll_prev)):
            return _Attempt(theta=x, loglik=ll, converged=ginf <= GTOL_LOOSE)
        ll_prev = ll
    return _Attempt(theta=x, loglik=ll, converged=False)


def _covariance_from_hessian(theta, data, spec):
    """(covariance, note): inverse observed information, pseudo-inverted
    with a recorded note when the Hessian is singular."""
    try:
        H = hessian_loglik(theta, data, spec)
    except ValueError as err:
        return None, f"Hessian unavailable: {err}"
    info = -H
    note = None
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
        note = "singular observed information; pseudo-inverse reported"
    cov = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    floor = -1e-10 * max(1.0, float(np.max(np.abs(eigvals))))
    if np.any(eigvals < floor):
        if note is None:
            note = "observed information not positive definite at the optimum"
    clipped = np.clip(eigvals, 0.0, None)
    cov = eigvecs @ np.diag(clipped) @ eigvecs.T
    cov = 0.5 * (cov + cov.T)
    return cov, note


def fit_mle(data, spec, init=None, *, seed=0, max_restarts=8, level=0.95):
    """Maximum likelihood fit of any of the four families.

    init defaults to the plateau heuristic; Marshall-Olkin specs first
    fit their base family and extend that optimum with tilt 1.  Up to
    max_restarts jittered starts (uniform in (-0.5, 0.5) per coordinate)
    run when the incumbent attempt has not converged.
    """
    spec.validate_against(data.X)
    if data.n_obs < spec.n_params + 1:
        raise ValueError(
            f"need at least {spec.n_params + 1} observations for {spec.n_params} parameters"
        )

    if init is None:
        if spec.has_tilt:
            base_spec = replace(spec, family=spec.family.base)
            base_fit = fit_mle(data, base_spec, seed=seed,
                               max_restarts=max_restarts, level=level)
            init = np.append(base_fit.theta_hat.theta, 0.0)
        else:
            init = default_init(data, spec)
    else:
        if isinstance(init, ParamVector):
            init = init.theta
        init = np.asarray(init, dtype=float)
        if init.shape != (spec.n_params,):
            raise ValueError(f"init must have shape ({spec.n_params},)")

    rng = np.random.default_rng(seed)
    best = _ascend(init, data, spec)
    n_attempts = 1
    best_converged = best if best.converged else None
    for _ in range(max_restarts):
        if best_converged is not None and best_converged.loglik >= best.loglik - 1e-6:
            break
        jitter = rng.uniform(-0.5, 0.5, size=spec.n_params)
        attempt = _ascend(init + jitter, data, spec)
        n_attempts += 1
        if attempt.loglik > best.loglik:
            best = attempt
        if attempt.converged and (
            best_converged is None or attempt.loglik > best_converged.loglik
        ):
            best_converged = attempt
    final = best_converged if best_converged is not None else best

    theta_hat = ParamVector(final.theta, spec)
    pred = linear_predictors(unpack(final.theta, spec), data.X)
    cure = _pattern_cures(final.theta, data, spec)

    if final.converged:
        cov, note = _covariance_from_hessian(final.theta, data, spec)
    else:
        cov, note = None, "optimizer did not converge within the restart budget"
    if cov is not None:
        se = np.sqrt(np.diag(cov))
        ci = _wald_bounds(theta_hat, cov, level)
    else:
        se, ci = None, None

    return FitResult(
        theta_hat=theta_hat,
        covariance=cov,
        std_errors=se,
        ci=ci,
        loglik_max=final.loglik,
        converged=final.converged,
        n_obs=data.n_obs,
        spec=spec,
        cure_estimates=cure,
        level=level,
        covariance_note=note,
        n_clamped=pred.n_clamped,
        n_attempts=n_attempts,
    )


def _pattern_cures(theta, data, spec):
    coef = unpack(theta, spec)
    combined = np.column_stack([data.X.x1, data.X.x2])
    patterns, counts = np.unique(combined, axis=0, return_counts=True)
    k1 = data.X.x1.shape[1]
    cures = []
    for row, count in zip(patterns, counts):
        x1 = row[:k1].reshape(1, -1)
        x2 = row[k1:].reshape(1, -1)
        cf = per_observation_cure(coef, DesignMatrices(x1=x1, x2=x2), spec.family)
        cures.append(
            PatternCure(
                x1=tuple(row[:k1]),
                x2=tuple(row[k1:]),
                p0=float(cf.p0[0]),
                p=float(cf.p[0]),
                count=int(count),
            )
        )
    return cures


def _wald_bounds(theta_hat, cov, level):
    z = float(ndtri(0.5 + level / 2.0))
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    est = theta_hat.theta.copy()
    if theta_hat.spec.has_tilt:
        tilt = float(np.exp(est[-1]))
        est[-1] = tilt
        se = se.copy()
        se[-1] = se[-1] * tilt
    return [(float(e - z * s), float(e + z * s)) for e, s in zip(est, se)]


def wald_ci(fit, level=0.95):
    """Wald intervals per coordinate; the tilt is handled on the natural
    scale through the delta method."""
    if fit.covariance is None:
        raise ValueError("fit carries no covariance; cannot form Wald intervals")
    return _wald_bounds(fit.theta_hat, fit.covariance, level)


def chi2_upper_tail(x, df):
    """P(X > x) for a chi-squared law, via the regularized incomplete gamma."""
    return float(gammaincc(df / 2.0, x / 2.0))


def lr_test(fit_restricted, fit_full):
    """Likelihood-ratio test of a base family against its Marshall-Olkin
    extension on the same data.

    Returns (statistic, df, p_value); a negative statistic is clamped to
    zero with a warning since it can only arise from optimizer noise.
    """
    r_spec, f_spec = fit_restricted.spec, fit_full.spec
    nested = (
        f_spec.has_tilt
        and not r_spec.has_tilt
        and f_spec.family.base is r_spec.family
        and f_spec.alpha_covariates == r_spec.alpha_covariates
        and f_spec.beta_covariates == r_spec.beta_covariates
        and fit_restricted.n_obs == fit_full.n_obs
    )
    if not nested:
        raise ValueError("lr_test requires a base-family fit nested in its Marshall-Olkin fit")
    stat = 2.0 * (fit_full.loglik_max - fit_restricted.loglik_max)
    if stat < 0:
        warnings.warn(
            f"negative likelihood-ratio statistic {stat:.3g} clamped to 0", RuntimeWarning
        )
        stat = 0.0
    df = f_spec.n_params - r_spec.n_params
    return stat, df, chi2_upper_tail(stat, df)
