"""Command-line entry points: fit survival models or run simulation studies.

Exit codes: 0 clean, 1 error, 2 finished with a convergence warning.
"""

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .bayes import PriorSpec, sample_posterior
from .dataio import (
    RunConfig,
    km_overlay,
    load_with_stratum,
    overlay_rows,
    write_csv,
    write_json,
)
from .diagnostics import case_deletion_influence, point_estimate, residuals
from .likelihood import unpack
from .mle import fit_mle, lr_test
from .regression import (
    Family,
    ModelSpec,
    RegressionCoefficients,
    per_observation_cure,
)
from .selection import criteria_report
from .simulation import SimConfig, monte_carlo

ENGINE_BY_FLAG = {"freq": "frequentist", "bayes": "bayesian", "both": "both"}
FAMILY_CHOICES = [f.value for f in Family]

FIT_DEFAULTS = {
    "family": None,
    "engine": "freq",
    "alpha_covariates": "",
    "beta_covariates": "",
    "time_column": "time",
    "event_column": "event",
    "stratum": None,
    "seed": 0,
    "iters": 5000,
    "burnin": 1000,
    "level": 0.95,
    "prior_sd": 10.0,
    "tilt_prior_shape": 0.01,
    "tilt_prior_rate": 0.01,
    "threads": 1,
    "influence": False,
    "out": ".",
}

# truths used throughout the simulation studies, per family
SIM_TRUTHS = {
    Family.GOMPERTZ: ((-1.2, 0.5, 0.2), (-1.1, 1.5, 0.9), None),
    Family.INVERSE_GAUSSIAN: ((-1.0, 0.5, 0.2), (-1.1, 1.8, 0.8), None),
    Family.MO_GOMPERTZ: ((-1.2, 0.5, 0.2), (-1.1, 1.5, 0.9), 2.0),
    Family.MO_INVERSE_GAUSSIAN: ((-1.0, 0.5, 0.2), (-1.1, 1.8, 0.8), 0.5),
}

CRITERIA_KEYS = (
    "aicc", "bic", "hqic", "caic",
    "lpml", "dic", "waic", "minus2_lpml", "minus2_waic",
)


def _split_names(value):
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(str(v) for v in value)
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _parse_truth(value, fallback):
    if value is None:
        return np.array(fallback, dtype=float)
    parts = [float(v) for v in str(value).split(",") if v.strip()]
    if len(parts) != 3:
        raise ValueError("truth vectors take exactly 3 values: intercept and 2 slopes")
    return np.array(parts)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mocure",
        description="Defective survival regression with a cure fraction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model to a CSV dataset")
    fit.add_argument("input", help="CSV file with time, event, and covariates")
    fit.add_argument("--family", choices=FAMILY_CHOICES)
    fit.add_argument("--engine", choices=list(ENGINE_BY_FLAG))
    fit.add_argument("--alpha-covariates", dest="alpha_covariates",
                     help="comma-separated columns driving the shape predictor")
    fit.add_argument("--beta-covariates", dest="beta_covariates",
                     help="comma-separated columns driving the rate predictor")
    fit.add_argument("--time-column", dest="time_column")
    fit.add_argument("--event-column", dest="event_column")
    fit.add_argument("--stratum", help="column defining Kaplan-Meier strata")
    fit.add_argument("--seed", type=int)
    fit.add_argument("--iters", type=int, help="MCMC iterations")
    fit.add_argument("--burnin", type=int, help="MCMC burn-in")
    fit.add_argument("--level", type=float, help="interval level, default 0.95")
    fit.add_argument("--prior-sd", dest="prior_sd", type=float)
    fit.add_argument("--tilt-prior-shape", dest="tilt_prior_shape", type=float)
    fit.add_argument("--tilt-prior-rate", dest="tilt_prior_rate", type=float)
    fit.add_argument("--threads", type=int)
    fit.add_argument("--influence", action="store_const", const=True,
                     help="also run case-deletion influence (slow)")
    fit.add_argument("--out", help="output directory")
    fit.add_argument("--config", help="JSON file of defaults; flags override it")

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--family", choices=FAMILY_CHOICES, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--reps", type=int, default=200)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--engine", choices=["freq", "bayes"], default="freq")
    sim.add_argument("--iters", type=int, default=2500)
    sim.add_argument("--burnin", type=int, default=500)
    sim.add_argument("--truth-a", dest="truth_a",
                     help="comma-separated shape coefficients, default per family")
    sim.add_argument("--truth-b", dest="truth_b",
                     help="comma-separated rate coefficients, default per family")
    sim.add_argument("--tilt", type=float, help="true tilt, default per family")
    sim.add_argument("--out", default=".")
    return parser


def config_from_args(args):
    settings = dict(FIT_DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = sorted(set(file_cfg) - set(FIT_DEFAULTS))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        settings.update(file_cfg)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["family"] is None:
        raise ValueError("--family is required, on the command line or in the config")
    engine = settings["engine"]
    return RunConfig(
        input_path=args.input,
        family=Family(settings["family"]),
        alpha_covariates=_split_names(settings["alpha_covariates"]),
        beta_covariates=_split_names(settings["beta_covariates"]),
        time_column=settings["time_column"],
        event_column=settings["event_column"],
        stratum_column=settings["stratum"],
        engine=ENGINE_BY_FLAG.get(engine, engine),
        seed=int(settings["seed"]),
        n_iter=int(settings["iters"]),
        burn_in=int(settings["burnin"]),
        level=float(settings["level"]),
        prior_sd=float(settings["prior_sd"]),
        tilt_prior_shape=float(settings["tilt_prior_shape"]),
        tilt_prior_rate=float(settings["tilt_prior_rate"]),
        threads=int(settings["threads"]),
        influence=bool(settings["influence"]),
        out_dir=settings["out"],
    )


def _prior_for(spec, config):
    sd2 = config.prior_sd**2
    return PriorSpec(
        a_means=np.zeros(spec.n_alpha),
        a_vars=np.full(spec.n_alpha, sd2),
        b_means=np.zeros(spec.n_beta),
        b_vars=np.full(spec.n_beta, sd2),
        lambda_shape=config.tilt_prior_shape,
        lambda_rate=config.tilt_prior_rate,
    )


def _cure_by_stratum(point, data, spec, stratum):
    theta, _ = point_estimate(point, spec)
    coef = unpack(theta, spec)
    cure = per_observation_cure(coef, data.X, spec.family).p
    rows = [
        {
            "stratum": "all",
            "mean_cure": float(cure.mean()),
            "count": int(data.n_obs),
        }
    ]
    if stratum is not None:
        for label in sorted(set(stratum.tolist()), key=str):
            mask = stratum == label
            rows.append(
                {
                    "stratum": str(label),
                    "mean_cure": float(cure[mask].mean()),
                    "count": int(mask.sum()),
                }
            )
    return rows


def _frequentist_block(fit):
    return {
        "converged": fit.converged,
        "loglik": fit.loglik_max,
        "n_params": fit.n_params,
        "n_attempts": fit.n_attempts,
        "covariance_note": fit.covariance_note,
        "estimates": fit.natural_table(),
    }


def _bayesian_block(sample, level):
    rows = sample.summary(level)
    for j, row in enumerate(rows):
        row["ess"] = float(sample.ess[j])
        row["rhat"] = float(sample.rhat[j])
    return {
        "n_draws": sample.n_draws,
        "burn_in": sample.burn_in,
        "acceptance_rate": sample.acceptance_rate,
        "flags": list(sample.flags),
        "estimates": rows,
    }


def _criteria_block(crit):
    merged = dict.fromkeys(CRITERIA_KEYS)
    merged.update(crit.to_dict())
    return merged


def _summary_text(config, data, report):
    lines = [
        "mocure fit report",
        f"input: {config.input_path}  (n={data.n_obs}, "
        f"censoring {report['censoring_pct']:.4f}%)",
        f"family: {config.family.value}  engine: {config.engine}  "
        f"seed: {config.seed}  level: {config.level}",
        "",
    ]
    freq = report["frequentist"]
    if freq is not None:
        lines.append(f"maximum likelihood  (converged: {freq['converged']}, "
                     f"loglik: {freq['loglik']:.4f})")
        lines.append(f"{'parameter':>16} {'estimate':>12} {'std_error':>12} "
                     f"{'ci_low':>12} {'ci_high':>12}")
        for row in freq["estimates"]:
            se = "" if row["se"] is None else f"{row['se']:.4f}"
            lo = "" if row["ci_low"] is None else f"{row['ci_low']:.4f}"
            hi = "" if row["ci_high"] is None else f"{row['ci_high']:.4f}"
            lines.append(f"{row['name']:>16} {row['estimate']:>12.4f} {se:>12} "
                         f"{lo:>12} {hi:>12}")
        lines.append("")
    bayes = report["bayesian"]
    if bayes is not None:
        lines.append(f"posterior sample  (draws: {bayes['n_draws']}, "
                     f"acceptance: {bayes['acceptance_rate']:.3f})")
        if bayes["flags"]:
            lines.append(f"convergence flags: {', '.join(bayes['flags'])}")
        lines.append(f"{'parameter':>16} {'mean':>12} {'sd':>12} "
                     f"{'ci_low':>12} {'ci_high':>12} {'ess':>8} {'rhat':>7}")
        for row in bayes["estimates"]:
            lines.append(f"{row['name']:>16} {row['mean']:>12.4f} {row['sd']:>12.4f} "
                         f"{row['ci_low']:>12.4f} {row['ci_high']:>12.4f} "
                         f"{row['ess']:>8.0f} {row['rhat']:>7.3f}")
        lines.append("")
    lines.append("fitted cure fraction by stratum:")
    for cure in report["cure_fractions"]:
        lines.append(f"  {cure['stratum']}: {cure['mean_cure']:.4f} "
                     f"(count {cure['count']})")
    crit = report["criteria"]
    shown = [f"{k}={crit[k]:.4f}" for k in CRITERIA_KEYS if crit[k] is not None]
    if shown:
        lines.append("criteria: " + "  ".join(shown))
    lr = report["lr_test_vs_base"]
    if lr is not None:
        lines.append(f"LR test against {lr['base_family']}: statistic "
                     f"{lr['statistic']:.4f}, df {lr['df']}, p {lr['p_value']:.3g}")
    influence = report["influence"]
    if influence is not None:
        lines.append(f"influential cases (deletion): {influence['flagged']}")
        if influence["failed"]:
            lines.append(f"deletion refits that failed: {influence['failed']}")
    lines.append("")
    return "\n".join(lines)


def run_fit(config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data, stratum = load_with_stratum(config.input_path, config)
    spec = ModelSpec(config.family, config.alpha_covariates, config.beta_covariates)
    want_freq = config.engine in ("frequentist", "both")
    want_bayes = config.engine in ("bayesian", "both")

    status = 0
    fit = sample = None
    if want_freq:
        fit = fit_mle(data, spec, seed=config.seed, level=config.level)
        if not fit.converged:
            status = 2
    if want_bayes:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sample = sample_posterior(
                data, spec,
                prior=_prior_for(spec, config),
                n_iter=config.n_iter,
                burn_in=config.burn_in,
                seed=config.seed,
            )
        if sample.flags:
            status = 2

    point = fit if fit is not None else sample
    resid = residuals(point, data, spec)

    influence_report = None
    if config.influence:
        if fit is None:
            warnings.warn(
                "case-deletion influence needs the frequentist engine; skipped",
                RuntimeWarning,
            )
        else:
            influence_report = case_deletion_influence(fit, data, spec)

    lr_block = None
    if spec.has_tilt and fit is not None:
        base_spec = ModelSpec(
            spec.family.base, config.alpha_covariates, config.beta_covariates
        )
        base_fit = fit_mle(data, base_spec, seed=config.seed, level=config.level)
        stat, df, p_value = lr_test(base_fit, fit)
        lr_block = {
            "base_family": base_spec.family.value,
            "base_loglik": base_fit.loglik_max,
            "statistic": stat,
            "df": df,
            "p_value": p_value,
        }

    crit = criteria_report(data, fit=fit, sample=sample)
    overlay = km_overlay(data, stratum, fit=point)

    report = {
        "input": str(config.input_path),
        "family": config.family.value,
        "engine": config.engine,
        "seed": config.seed,
        "level": config.level,
        "n_obs": data.n_obs,
        "censoring_pct": 100.0 * float(np.mean(data.delta == 0.0)),
        "frequentist": None if fit is None else _frequentist_block(fit),
        "bayesian": None if sample is None else _bayesian_block(sample, config.level),
        "cure_fractions": _cure_by_stratum(point, data, spec, stratum),
        "criteria": _criteria_block(crit),
        "lr_test_vs_base": lr_block,
        "influence": None if influence_report is None else {
            "flagged": list(influence_report.flagged),
            "failed": list(influence_report.failed),
            "gd_max": float(np.nanmax(influence_report.gd)),
            "ld_max": float(np.nanmax(influence_report.ld)),
        },
        "artifacts": {
            "report": "report.json",
            "residuals": "residuals.csv",
            "km_overlay": "km_overlay.csv",
            "influence": "influence.csv" if influence_report is not None else None,
            "summary": "summary.txt",
        },
        "exit_status": status,
    }

    write_json(report, out / "report.json")
    write_csv(
        [
            {
                "index": i,
                "time": float(data.t[i]),
                "event": int(data.delta[i]),
                "martingale": float(resid.martingale[i]),
                "deviance": float(resid.deviance[i]),
            }
            for i in range(data.n_obs)
        ],
        out / "residuals.csv",
    )
    if influence_report is not None:
        write_csv(
            [
                {
                    "index": i,
                    "gd": float(influence_report.gd[i]),
                    "ld": float(influence_report.ld[i]),
                    "flagged": int(i in influence_report.flagged),
                    "refit_failed": int(i in influence_report.failed),
                }
                for i in range(data.n_obs)
            ],
            out / "influence.csv",
        )
    write_csv(
        overlay_rows(overlay),
        out / "km_overlay.csv",
        fieldnames=["stratum", "series", "t", "survival"],
    )
    (out / "summary.txt").write_text(_summary_text(config, data, report),
                                     encoding="utf-8")
    return status


def run_simulate(args):
    family = Family(args.family)
    default_a, default_b, default_tilt = SIM_TRUTHS[family]
    tilt = args.tilt if args.tilt is not None else default_tilt
    if family.is_marshall_olkin and tilt is None:
        raise ValueError(f"{family.value} needs a --tilt value")
    truth = RegressionCoefficients(
        a=_parse_truth(args.truth_a, default_a),
        b=_parse_truth(args.truth_b, default_b),
        tilt=tilt if family.is_marshall_olkin else None,
    )
    config = SimConfig(
        family=family,
        true_coefficients=truth,
        n=args.n,
        replicates=args.reps,
        seed=args.seed,
    )
    report = monte_carlo(
        config,
        engine=ENGINE_BY_FLAG[args.engine],
        mcmc_iters=args.iters,
        mcmc_burnin=args.burnin,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = report.to_rows()
    for row in rows:
        row["engine"] = report.engine
        row["replicates_used"] = report.n_used
        row["failures"] = report.n_failures
    path = out / f"simulation_{family.value}_n{args.n}.csv"
    write_csv(rows, path)
    logging.getLogger("mocure").info("wrote %s", path)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        if args.command == "fit":
            return run_fit(config_from_args(args))
        return run_simulate(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
