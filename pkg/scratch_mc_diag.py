"""Instrument seed-0 Bayesian replicates: which chains misbehave and why."""

import json
import time
import warnings

import numpy as np

from mocure.bayes import sample_posterior
from mocure.regression import Family, RegressionCoefficients
from mocure.simulation import SimConfig, generate_dataset, sim_model_spec

TRUTH = RegressionCoefficients(
    a=np.array([-1.2, 0.5, 0.2]), b=np.array([-1.1, 1.5, 0.9]), tilt=2.0
)
_FIT_STREAM = 1


def main():
    config = SimConfig(
        family=Family.MO_GOMPERTZ, true_coefficients=TRUTH,
        n=1000, replicates=100, seed=0,
    )
    spec = sim_model_spec(config.family)
    rows = []
    t0 = time.time()
    for rep in range(config.replicates):
        fit_seq = np.random.SeedSequence(config.seed, spawn_key=(rep, _FIT_STREAM))
        fit_seed = int(fit_seq.generate_state(1)[0])
        data = generate_dataset(config, rep_seed=rep)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            chain = sample_posterior(data, spec, n_iter=2500, burn_in=500,
                                     seed=fit_seed)
        summary = chain.summary()
        rows.append({
            "rep": rep,
            "b0_mean": round(summary[3]["mean"], 4),
            "tilt_mean": round(summary[6]["mean"], 4),
            "ess_min": round(float(chain.ess.min()), 1),
            "rhat_max": round(float(chain.rhat.max()), 3),
            "accept": round(chain.acceptance_rate, 3),
            "flagged": bool(chain.flags),
        })
        if rep % 20 == 19:
            print(f"rep {rep + 1}  {time.time() - t0:.0f}s", flush=True)
    with open("scratch_mc_diag.json", "w") as fh:
        json.dump(rows, fh, indent=1)

    b0 = np.array([r["b0_mean"] for r in rows])
    flagged = np.array([r["flagged"] for r in rows])
    rhat = np.array([r["rhat_max"] for r in rows])
    ess = np.array([r["ess_min"] for r in rows])
    print("n flagged:", int(flagged.sum()))
    print("rhat>1.05:", int((rhat > 1.05).sum()), " ess<400:", int((ess < 400).sum()))
    print("b0 bias%% all:", round(float((b0.mean() + 1.1) / -1.1) * -100, 3))
    keep = ~flagged
    if keep.any():
        print("b0 bias%% unflagged:",
              round(float((b0[keep].mean() + 1.1) / -1.1) * -100, 3),
              "over", int(keep.sum()))
    keep2 = rhat <= 1.05
    if keep2.any():
        print("b0 bias%% rhat-ok:",
              round(float((b0[keep2].mean() + 1.1) / -1.1) * -100, 3),
              "over", int(keep2.sum()))
    worst = np.argsort(np.abs(b0 + 1.1))[-8:]
    print("worst reps:", [rows[i] for i in worst])


if __name__ == "__main__":
    main()
