"""A desk-scale slice of the 10-agent benchmark study, end to end.

Runs a reduced ensemble (fewer trials and epochs than the full 250 x 20000
study so it finishes in about a minute), writes the CSV/JSON artifacts, and
compares the measured scaled errors with the closed-form covariance traces.

The full-scale run is `ciwnls reproduce-paper --horizon 20000` or
tests/test_acceptance.py; see the README for why the published trace targets
(3.6361 / 5.4517) differ from what this configuration computes.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from ciwnls import gamma_matrix, run_monte_carlo, sigma_centralized, \
    sigma_distributed
from ciwnls.harness import reproduce_paper_experiment

out = Path(tempfile.mkdtemp(prefix="ciwnls_demo_"))
config = reproduce_paper_experiment(trials=40, horizon=4000,
                                    output_dir=str(out))
config.centralized_trials = 10

# the default consensus constant b=1 makes the first consensus steps expansive
# on this deployment (beta_0 * lambda_N ~ 9) and the finite-time plateau pays
# for it; the stability-bound choice reaches the asymptote ~5x sooner
from ciwnls.estimator import consensus_stability_bound

config.b = consensus_stability_bound(config.resolve_graph())
print(f"innovation constant a = {config.a:.4f} "
      f"(recovered by the gain fallback; see README)")
print(f"consensus constant b = {config.b:.4f} (stability bound 2/lambda_N)")
print(f"running {config.trials} trials x {config.horizon} epochs ...")

records, manifest = run_monte_carlo(config, progress=True)
print(f"done in {manifest['wall_time_s']:.1f}s, "
      f"{manifest['failed_trials']} failed trials")

model = config.build_model()
theta = np.array(config.theta_true)
G = gamma_matrix(model, theta)
tr_c = float(np.trace(sigma_centralized(G, 10)))
tr_d = float(np.trace(sigma_distributed(G, 10, config.a)))

last = records[-1]
print(f"\nat the terminal epoch {last.epoch}:")
print(f"  distributed scaled error, agent mean = "
      f"{last.mean_scaled_sq_error.mean():.3f}  "
      f"(asymptote trace sigma_d = {tr_d:.4f})")
print(f"  centralized scaled error             = "
      f"{last.centralized_scaled_sq_error:.3f}  "
      f"(asymptote trace sigma_c = {tr_c:.4f})")

print(f"\nartifacts in {out}:")
for p in sorted(out.iterdir()):
    print("  ", p.name)
cov = json.loads((out / "covariance_report.json").read_text())
print(f"covariance report: trace_sigma_c = {cov['trace_sigma_c']:.4f}, "
      f"trace_sigma_d = {cov['trace_sigma_d']:.4f}")
