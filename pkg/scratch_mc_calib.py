"""Scratch: calibrate acceptance/invariant MC values across candidate seeds."""

import json
import time

from mocure.distributions import Family
from mocure.regression import RegressionCoefficients
from mocure.simulation import MonteCarloReport, SimConfig, monte_carlo

MOIG_TRUTH = RegressionCoefficients(a=[-1.0, 0.5, 0.2], b=[-1.1, 1.8, 0.8], tilt=0.5)
MOG_TRUTH = RegressionCoefficients(a=[-1.2, 0.5, 0.2], b=[-1.1, 1.5, 0.9], tilt=2.0)

out = []
jobs = [
    ("mo-ig-n500-s0", Family.MO_INVERSE_GAUSSIAN, MOIG_TRUTH, 500, 0),
    ("mo-ig-n500-s1", Family.MO_INVERSE_GAUSSIAN, MOIG_TRUTH, 500, 1),
    ("mo-g-n5000-s1", Family.MO_GOMPERTZ, MOG_TRUTH, 5000, 1),
    ("mo-g-n5000-s2", Family.MO_GOMPERTZ, MOG_TRUTH, 5000, 2),
    ("mo-g-n500-s0", Family.MO_GOMPERTZ, MOG_TRUTH, 500, 0),
    ("mo-g-n500-s1", Family.MO_GOMPERTZ, MOG_TRUTH, 500, 1),
]
for tag, fam, truth, n, seed in jobs:
    cfg = SimConfig(family=fam, true_coefficients=truth, n=n, replicates=200, seed=seed)
    t0 = time.time()
    rep = monte_carlo(cfg, engine="frequentist")
    rec = {
        "tag": tag,
        "seconds": round(time.time() - t0, 1),
        "failures": rep.n_failures,
        "mean": [round(v, 4) for v in rep.mean],
        "bias_pct": [round(v, 3) for v in rep.bias_pct],
        "coverage": [round(v, 4) for v in rep.coverage],
    }
    out.append(rec)
    print(json.dumps(rec), flush=True)

with open("/root/pkg/scratch_mc_calib.json", "w") as f:
    json.dump(out, f, indent=1)
print("DONE")
