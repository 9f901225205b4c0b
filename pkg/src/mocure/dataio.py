"""CSV ingestion, Kaplan-Meier overlays, and artifact serialization.

Input files are plain UTF-8 CSVs with a header row: a positive time
column, a 0/1 event column, and numeric covariates.  Output artifacts
are JSON (machine report) and CSV (tabular series); floats go through
repr so rewritten files reload bit-identically.
"""

import csv
import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .diagnostics import point_estimate
from .distributions import BaseLaw, MOLaw, law_logsurv
from .likelihood import SurvivalDataset, unpack
from .mle import kaplan_meier
from .regression import DesignMatrices, Family, linear_predictors

__all__ = [
    "KMOverlay",
    "RunConfig",
    "StratumCurves",
    "km_overlay",
    "load_dataset",
    "load_with_stratum",
    "save_dataset",
    "write_csv",
    "write_json",
]

logger = logging.getLogger("mocure")

MISSING_TOKENS = {"", "na", "nan", "n/a", "null"}
ENGINES = ("frequentist", "bayesian", "both")


@dataclass(frozen=True)
class RunConfig:
    """Everything one fitting run needs: source columns, model, engine knobs."""

    input_path: str
    family: Family
    alpha_covariates: tuple = ()
    beta_covariates: tuple = ()
    time_column: str = "time"
    event_column: str = "event"
    stratum_column: str = None
    engine: str = "frequentist"
    seed: int = 0
    n_iter: int = 5000
    burn_in: int = 1000
    level: float = 0.95
    prior_sd: float = 10.0
    tilt_prior_shape: float = 0.01
    tilt_prior_rate: float = 0.01
    threads: int = 1
    influence: bool = False
    out_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "alpha_covariates", tuple(self.alpha_covariates))
        object.__setattr__(self, "beta_covariates", tuple(self.beta_covariates))
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be inside (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not self.n_iter > self.burn_in >= 0:
            raise ValueError("need n_iter > burn_in >= 0")


def _parse_float(raw, column, line_number):
    try:
        return float(raw)
    except ValueError:
        raise ValueError(
            f"malformed numeric value {raw!r} in column {column!r} at line {line_number}"
        ) from None


def load_with_stratum(path, config):
    """Load a dataset plus the raw stratum labels, row-aligned.

    Rows with a missing required field are dropped with their line
    numbers reported; structural problems (absent columns, nonpositive
    times, an event flag outside {0, 1}) fail the whole load.
    """
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty input, no header row")
        header = [name.strip() for name in reader.fieldnames]
        raw_rows = list(reader)

    required = [config.time_column, config.event_column]
    required += list(config.alpha_covariates) + list(config.beta_covariates)
    if config.stratum_column is not None:
        required.append(config.stratum_column)
    seen = set()
    required = [c for c in required if not (c in seen or seen.add(c))]
    missing_cols = [c for c in required if c not in header]
    if missing_cols:
        raise ValueError(f"{path}: missing required columns: {', '.join(missing_cols)}")
    if not raw_rows:
        raise ValueError(f"{path}: no data rows")

    kept = []
    dropped_lines = []
    for offset, row in enumerate(raw_rows):
        line_number = offset + 2  # header is line 1
        cleaned = {c: (row[c] or "").strip() for c in required}
        if any(v.lower() in MISSING_TOKENS for v in cleaned.values()):
            dropped_lines.append(line_number)
            continue
        kept.append((line_number, cleaned))
    if dropped_lines:
        shown = ", ".join(str(n) for n in dropped_lines[:10])
        more = "" if len(dropped_lines) <= 10 else f" and {len(dropped_lines) - 10} more"
        warnings.warn(
            f"dropped {len(dropped_lines)} rows with missing required fields "
            f"(lines {shown}{more})",
            RuntimeWarning,
        )
    if not kept:
        raise ValueError(f"{path}: every row had missing required fields")

    n = len(kept)
    t = np.empty(n)
    delta = np.empty(n)
    x1 = np.ones((n, 1 + len(config.alpha_covariates)))
    x2 = np.ones((n, 1 + len(config.beta_covariates)))
    stratum = [] if config.stratum_column is not None else None
    for i, (line_number, row) in enumerate(kept):
        t[i] = _parse_float(row[config.time_column], config.time_column, line_number)
        if t[i] <= 0.0:
            raise ValueError(f"{path}: nonpositive time {t[i]} at line {line_number}")
        event = _parse_float(row[config.event_column], config.event_column, line_number)
        if event not in (0.0, 1.0):
            raise ValueError(
                f"{path}: event column contains {row[config.event_column]!r} "
                f"at line {line_number}; expected 0 or 1"
            )
        delta[i] = event
        for j, name in enumerate(config.alpha_covariates):
            x1[i, 1 + j] = _parse_float(row[name], name, line_number)
        for j, name in enumerate(config.beta_covariates):
            x2[i, 1 + j] = _parse_float(row[name], name, line_number)
        if stratum is not None:
            stratum.append(row[config.stratum_column])

    data = SurvivalDataset(t=t, delta=delta, X=DesignMatrices(x1=x1, x2=x2))
    censoring = 100.0 * float(np.mean(delta == 0.0))
    logger.info("loaded %d observations (censoring %.4f%%)", n, censoring)
    return data, None if stratum is None else np.array(stratum, dtype=object)


def load_dataset(path, config):
    """Typed dataset from a header CSV; see load_with_stratum for the rules."""
    data, _ = load_with_stratum(path, config)
    return data


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_dataset(data, path, alpha_names, beta_names,
                 time_column="time", event_column="event"):
    """Write a dataset to CSV so load_dataset reproduces it bit-exactly.

    Covariate names map positionally to the non-intercept design columns;
    a name used on both sides must carry identical values.
    """
    alpha_names = tuple(alpha_names)
    beta_names = tuple(beta_names)
    if len(alpha_names) != data.X.x1.shape[1] - 1:
        raise ValueError("alpha_names do not match the design width")
    if len(beta_names) != data.X.x2.shape[1] - 1:
        raise ValueError("beta_names do not match the design width")
    columns = {time_column: data.t, event_column: data.delta}
    for j, name in enumerate(alpha_names):
        columns[name] = data.X.x1[:, 1 + j]
    for j, name in enumerate(beta_names):
        values = data.X.x2[:, 1 + j]
        if name in columns and not np.array_equal(columns[name], values):
            raise ValueError(f"column {name!r} differs between the two designs")
        columns[name] = values
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns.keys())
        for i in range(data.n_obs):
            writer.writerow(_format(float(col[i])) for col in columns.values())


@dataclass(frozen=True)
class StratumCurves:
    """One stratum's product-limit steps and optional fitted curve."""

    label: str
    km_t: np.ndarray
    km_s: np.ndarray
    model_t: np.ndarray = None
    model_s: np.ndarray = None

    def __post_init__(self):
        for tvec, svec in ((self.km_t, self.km_s), (self.model_t, self.model_s)):
            if tvec is None:
                continue
            if svec[0] != 1.0 or tvec[0] != 0.0:
                raise ValueError("survival series must start at (0, 1)")
            if np.any(np.diff(svec) > 1e-12):
                raise ValueError("survival series must be nonincreasing")


@dataclass(frozen=True)
class KMOverlay:
    strata: tuple


def _model_curve(fit, mask, data, grid):
    theta, spec = point_estimate(fit, None)
    coef = unpack(theta, spec)
    x1_bar = data.X.x1[mask].mean(axis=0, keepdims=True)
    x2_bar = data.X.x2[mask].mean(axis=0, keepdims=True)
    pred = linear_predictors(coef, DesignMatrices(x1=x1_bar, x2=x2_bar))
    law = BaseLaw(spec.family.base, float(pred.alpha[0]), float(pred.beta[0]))
    if spec.has_tilt:
        law = MOLaw(base=law, tilt=coef.tilt)
    surv = np.empty_like(grid)
    surv[0] = 1.0
    surv[1:] = np.exp(law_logsurv(grid[1:], law))
    return grid, surv


def km_overlay(data, stratum=None, fit=None, grid_points=101):
    """Kaplan-Meier step series per stratum, with fitted curves when a
    point estimate is supplied (evaluated at each stratum's mean covariates).
    """
    if data.n_obs == 0:
        raise ValueError("cannot build survival curves from an empty dataset")
    if stratum is None:
        stratum = np.array(["all"] * data.n_obs, dtype=object)
    stratum = np.asarray(stratum, dtype=object)
    if stratum.shape[0] != data.n_obs:
        raise ValueError("stratum labels must align with the dataset rows")

    finite = data.t[np.isfinite(data.t)]
    grid = np.linspace(0.0, float(finite.max()), grid_points)
    strata = []
    for label in sorted(set(stratum.tolist()), key=str):
        mask = stratum == label
        times, surv = kaplan_meier(data.t[mask], data.delta[mask])
        km_t = np.concatenate([[0.0], times])
        km_s = np.concatenate([[1.0], surv])
        model_t = model_s = None
        if fit is not None:
            model_t, model_s = _model_curve(fit, mask, data, grid)
        strata.append(
            StratumCurves(
                label=str(label), km_t=km_t, km_s=km_s,
                model_t=model_t, model_s=model_s,
            )
        )
    return KMOverlay(strata=tuple(strata))


def overlay_rows(overlay):
    """Flatten an overlay to CSV rows: stratum, series, t, survival."""
    rows = []
    for curves in overlay.strata:
        for tval, sval in zip(curves.km_t, curves.km_s):
            rows.append(
                {"stratum": curves.label, "series": "kaplan_meier",
                 "t": float(tval), "survival": float(sval)}
            )
        if curves.model_t is not None:
            for tval, sval in zip(curves.model_t, curves.model_s):
                rows.append(
                    {"stratum": curves.label, "series": "model",
                     "t": float(tval), "survival": float(sval)}
                )
    return rows


def write_csv(rows, path, fieldnames=None):
    """Rows of dicts to CSV; floats through repr for exact reload."""
    if fieldnames is None:
        if not rows:
            raise ValueError("cannot infer a header from zero rows")
        fieldnames = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow(_format(row[name]) for name in fieldnames)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_json(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=2, allow_nan=True)
        fh.write("\n")
