"""A small version of the randomized dimension sweep.

Writes trials.csv and summary.json to a scratch directory and prints the
per-dimension residual medians. The full desk run uses dims 1..8 with 50
trials each; with only five trials per dimension the median trend is noisy
and may not come out nondecreasing.
"""

import json
import sys
import tempfile

from gtrde.experiment import ExperimentSpec, run_campaign

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="gtrde-")
spec = ExperimentSpec(dims=range(1, 5), trials_per_dim=5, rng_seed=0)
summary = run_campaign(spec, out, progress=lambda rows: print(f"  n={rows[0].n} trial={rows[0].trial}  ", end="\r"))
print()
for d in summary["per_dim"]:
    print(f"n = {d['n']}: converged {d['converged']}  median residual {d['residual_p50']:.2e}"
          f"  max {d['residual_max']:.2e}")
print(f"convergence rate {summary['convergence_rate']:.2f}")
print(f"medians nondecreasing: {summary['median_trend']['nondecreasing']}")
print(f"results in {out}")
