import json
import time

import numpy as np

from mocure.distributions import Family
from mocure.regression import RegressionCoefficients
from mocure.simulation import MonteCarloReport, SimConfig, monte_carlo

truth = RegressionCoefficients(a=[-1.2, 0.5, 0.2], b=[-1.1, 1.5, 0.9], tilt=2.0)
out = {}
for n in (50, 500, 5000):
    cfg = SimConfig(family=Family.MO_GOMPERTZ, true_coefficients=truth,
                    n=n, replicates=200, seed=20260822)
    t0 = time.time()
    rep = monte_carlo(cfg, engine="frequentist")
    took = time.time() - t0
    out[n] = {
        "seconds": round(took, 1),
        "failures": rep.n_failures,
        "mean": [round(float(v), 4) for v in rep.mean],
        "sd": [round(float(v), 4) for v in rep.sd],
        "emp_sd": [round(float(v), 4) for v in rep.empirical_sd],
        "bias_pct": [round(float(v), 3) for v in rep.bias_pct],
        "coverage": [round(float(v), 3) for v in rep.coverage],
    }
    print(n, json.dumps(out[n]), flush=True)
with open("scratch_mc_freq.json", "w") as fh:
    json.dump(out, fh, indent=1)
print("DONE")
