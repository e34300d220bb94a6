"""Auditing the model assumptions the convergence guarantees rest on.

The audit samples the feasible box and reports: per-agent Lipschitz constants,
the aggregate monotonicity constant, a global-observability certificate, and
the information-matrix eigenvalue floor.  On the benchmark model it surfaces a
real degeneracy: at the uniform-sign corners of the box every sensing gradient
vanishes, so the box-wide eigenvalue floor is zero and the strict gain
condition built on it cannot be met by any finite a.  Away from those corners
the model is perfectly well behaved.
"""

import numpy as np

from ciwnls import GainSchedule, box, check_gain_feasible, linear_model, \
    pairwise_sine_model, run_audit
from ciwnls.harness import BENCHMARK_PAIRS

# a clean linear network first: everything passes with honest margins
linear = linear_model(
    [[[1.0, 0.0]], [[0.0, 1.0]], [[1.0, 1.0]]],
    [[[1.0]], [[1.0]], [[2.0]]],
)
fs2 = box([-1.0, -1.0], [1.0, 1.0])
report = run_audit(linear, fs2, pair_samples=3000, lipschitz_samples=500, seed=1)
print("linear model audit:")
print("  lipschitz per agent:", np.round(report.lipschitz, 4))
print(f"  monotonicity c1 = {report.monotonicity:.4f}")
print(f"  observability ok = {report.observability_ok} "
      f"(margin {report.observability_margin:.4f})")
print(f"  information floor = {report.gamma_min_eig:.4f}")
print(f"  gain floor a_min = {report.a_min:.4f}, audit passes = {report.passes}")

feas = check_gain_feasible(GainSchedule(a=3.0, b=1.0, delta1=0.25), report)
print(f"  a=3.0 feasibility: consistency margin {feas.margin_theorem1:+.3f}, "
      f"normality margin {feas.margin_theorem2:+.3f}, "
      f"delta1 margin {feas.margin_delta1:+.3f}")

# the benchmark sine network: the corner degeneracy shows up honestly
bench = pairwise_sine_model(BENCHMARK_PAIRS, 2.0, 5)
fs5 = box([-np.pi / 4] * 5, [np.pi / 4] * 5)
report = run_audit(bench, fs5, pair_samples=3000, lipschitz_samples=500, seed=1)
print("\nbenchmark sine model audit:")
print("  lipschitz per agent (sup is sqrt(2)):", np.round(report.lipschitz, 4))
print(f"  observability ok = {report.observability_ok}")
print(f"  monotonicity c1 = {report.monotonicity:.3e}  <- collapses at corners")
print(f"  information floor = {report.gamma_min_eig:.3e}  <- zero at corners")
print("  degenerate witness point:", np.round(report.gamma_min_witness, 4))
print(f"  audit passes = {report.passes}")

# shrink the box by 10% and the same model is strictly monotone again
inner = box([-np.pi / 4 * 0.9] * 5, [np.pi / 4 * 0.9] * 5)
report = run_audit(bench, inner, pair_samples=3000, lipschitz_samples=500, seed=1)
print(f"\nsame model on a 10% shrunken box: c1 = {report.monotonicity:.4f}, "
      f"information floor = {report.gamma_min_eig:.4f}, "
      f"passes = {report.passes}")
