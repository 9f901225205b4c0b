"""Covariate links: identity on alpha, log on beta, tilt covariate-free.

alpha_i = x1_i . a may legitimately cross zero along an optimizer path
even when the optimum is interior, so values inside (-1e-8, 1e-8) are
snapped to the boundary and the snap count is surfaced to callers.
"""

from dataclasses import dataclass, field

import numpy as np

from .distributions import CureFraction, Family, base_cure_p0, mo_cure_transform

__all__ = [
    "ALPHA_CLAMP",
    "DesignMatrices",
    "RegressionCoefficients",
    "ModelSpec",
    "LinearPredictors",
    "linear_predictors",
    "per_observation_cure",
]

ALPHA_CLAMP = 1e-8


def _as_design(m, name):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    if m.shape[1] == 0 or not np.all(m[:, 0] == 1.0):
        raise ValueError(f"{name} must carry a leading intercept column of ones")
    return m


@dataclass(frozen=True)
class DesignMatrices:
    """Design matrices for the two linked parameters, intercept first."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x1", _as_design(self.x1, "x1"))
        object.__setattr__(self, "x2", _as_design(self.x2, "x2"))
        if self.x1.shape[0] != self.x2.shape[0]:
            raise ValueError("x1 and x2 must have the same number of rows")

    @property
    def n_obs(self):
        return self.x1.shape[0]


@dataclass(frozen=True)
class RegressionCoefficients:
    """Coefficients a (identity link), b (log link), tilt on natural scale.

    log_tilt is carried alongside so that packing to the optimizer's
    log-scale layout and back is exact; give either form, the other is
    derived.
    """

    a: np.ndarray
    b: np.ndarray
    tilt: float | None = None
    log_tilt: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))
        if self.tilt is None and self.log_tilt is not None:
            object.__setattr__(self, "tilt", float(np.exp(self.log_tilt)))
        elif self.tilt is not None and self.log_tilt is None:
            object.__setattr__(self, "log_tilt", float(np.log(self.tilt)))
        if self.tilt is not None and not self.tilt > 0:
            raise ValueError(f"tilt must be positive, got {self.tilt}")


@dataclass(frozen=True)
class ModelSpec:
    """Family plus the covariate names feeding each linked parameter.

    Names exclude the intercept; reporting code prefixes them with the
    parameter they act on.
    """

    family: Family
    alpha_covariates: tuple = field(default_factory=tuple)
    beta_covariates: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "alpha_covariates", tuple(self.alpha_covariates))
        object.__setattr__(self, "beta_covariates", tuple(self.beta_covariates))

    @property
    def has_tilt(self):
        return self.family.is_marshall_olkin

    @property
    def n_alpha(self):
        return 1 + len(self.alpha_covariates)

    @property
    def n_beta(self):
        return 1 + len(self.beta_covariates)

    @property
    def n_params(self):
        return self.n_alpha + self.n_beta + (1 if self.has_tilt else 0)

    @property
    def param_names(self):
        names = ["alpha:intercept"]
        names += [f"alpha:{c}" for c in self.alpha_covariates]
        names.append("beta:intercept")
        names += [f"beta:{c}" for c in self.beta_covariates]
        if self.has_tilt:
            names.append("tilt")
        return names

    def validate_against(self, X):
        if X.x1.shape[1] != self.n_alpha:
            raise ValueError(
                f"x1 has {X.x1.shape[1]} columns but the model names {self.n_alpha}"
            )
        if X.x2.shape[1] != self.n_beta:
            raise ValueError(
                f"x2 has {X.x2.shape[1]} columns but the model names {self.n_beta}"
            )


@dataclass(frozen=True)
class LinearPredictors:
    """Per-observation (alpha, beta) with the count of alpha values snapped."""

    alpha: np.ndarray
    beta: np.ndarray
    n_clamped: int


def linear_predictors(coef, X):
    """Map coefficient vectors through the links to per-row (alpha_i, beta_i).

    alpha uses the identity link and is clamped out of (-1e-8, 1e-8);
    beta uses the log link and is positive by construction.
    """
    if coef.a.shape[0] != X.x1.shape[1]:
        raise ValueError(
            f"a has length {coef.a.shape[0]} but x1 has {X.x1.shape[1]} columns"
        )
    if coef.b.shape[0] != X.x2.shape[1]:
        raise ValueError(
            f"b has length {coef.b.shape[0]} but x2 has {X.x2.shape[1]} columns"
        )
    alpha = X.x1 @ coef.a
    with np.errstate(over="ignore"):
        beta = np.exp(X.x2 @ coef.b)
    near_zero = np.abs(alpha) < ALPHA_CLAMP
    n_clamped = int(np.count_nonzero(near_zero))
    if n_clamped:
        # exact zeros go to +clamp: the alpha -> 0 limit of both bases is proper
        signs = np.where(alpha[near_zero] < 0, -1.0, 1.0)
        alpha = alpha.copy()
        alpha[near_zero] = signs * ALPHA_CLAMP
    return LinearPredictors(alpha=alpha, beta=beta, n_clamped=n_clamped)


def per_observation_cure(coef, X, family):
    """Cure fractions per row: basal p0 from the base family, p through the tilt.

    Returns a CureFraction whose fields are aligned vectors; p and p0 are
    exactly zero wherever alpha_i > 0.
    """
    if family.is_marshall_olkin and coef.tilt is None:
        raise ValueError(f"{family.value} requires a tilt parameter")
    if not family.is_marshall_olkin and coef.tilt is not None:
        raise ValueError(f"{family.value} does not take a tilt parameter")
    pred = linear_predictors(coef, X)
    p0 = base_cure_p0(family.base, pred.alpha, pred.beta)
    if family.is_marshall_olkin:
        p = mo_cure_transform(p0, coef.tilt)
    else:
        p = p0
    return CureFraction(p=np.asarray(p), p0=np.asarray(p0))
