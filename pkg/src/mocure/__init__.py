"""Defective parametric survival regression with a cure fraction.

Four families (Gompertz, inverse Gaussian, and their Marshall-Olkin
extensions) with covariates on both distribution parameters, fitted by
maximum likelihood or adaptive-Metropolis MCMC, plus model selection,
influence and residual diagnostics, and a simulation harness.
"""

from .bayes import (
    PosteriorSample,
    PriorSpec,
    posterior_summary,
    sample_posterior,
)
from .dataio import (
    KMOverlay,
    RunConfig,
    km_overlay,
    load_dataset,
    save_dataset,
)
from .diagnostics import (
    InfluenceReport,
    ResidualReport,
    case_deletion_influence,
    cook_distance,
    relative_change,
    residuals,
)
from .distributions import (
    BaseLaw,
    CureFraction,
    MOLaw,
    cure_fraction,
    law_logpdf,
    law_logsurv,
    quantile,
)
from .likelihood import (
    ParamVector,
    SurvivalDataset,
    loglik,
    loglik_terms,
)
from .mle import FitResult, fit_mle, lr_test, wald_ci
from .regression import (
    DesignMatrices,
    Family,
    ModelSpec,
    RegressionCoefficients,
    per_observation_cure,
)
from .selection import (
    CriteriaReport,
    InfoCriteria,
    cpo_lpml,
    criteria_report,
    dic,
    info_criteria,
    waic,
)
from .simulation import (
    MonteCarloReport,
    SimConfig,
    generate_dataset,
    monte_carlo,
)

__version__ = "0.1.0"

__all__ = [
    "BaseLaw",
    "CriteriaReport",
    "CureFraction",
    "DesignMatrices",
    "Family",
    "FitResult",
    "InfluenceReport",
    "InfoCriteria",
    "KMOverlay",
    "MOLaw",
    "ModelSpec",
    "MonteCarloReport",
    "ParamVector",
    "PosteriorSample",
    "PriorSpec",
    "RegressionCoefficients",
    "ResidualReport",
    "RunConfig",
    "SimConfig",
    "SurvivalDataset",
    "case_deletion_influence",
    "cook_distance",
    "cpo_lpml",
    "criteria_report",
    "cure_fraction",
    "dic",
    "fit_mle",
    "generate_dataset",
    "info_criteria",
    "km_overlay",
    "law_logpdf",
    "law_logsurv",
    "load_dataset",
    "loglik",
    "loglik_terms",
    "lr_test",
    "monte_carlo",
    "per_observation_cure",
    "posterior_summary",
    "quantile",
    "relative_change",
    "residuals",
    "sample_posterior",
    "save_dataset",
    "wald_ci",
    "__version__",
]
