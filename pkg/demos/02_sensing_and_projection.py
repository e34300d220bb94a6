"""Sensing models: evaluation, gradients, noise, and the feasibility box.

Shows the benchmark pairwise-sine network (each agent sees the sine of a sum
of two parameter components) and the box projection that keeps estimates
feasible.
"""

import math

import numpy as np

from ciwnls import box, finite_difference_gradient, pairwise_sine_model, \
    project, sample_observation
from ciwnls.harness import BENCHMARK_PAIRS, BENCHMARK_THETA

model = pairwise_sine_model(BENCHMARK_PAIRS, noise_variance=2.0, param_dim=5)
theta = np.array(BENCHMARK_THETA)

print("agent 0 observes sin(theta_1 + theta_2):")
print("  f_0(theta*) =", model.eval(0, theta)[0])
print("  analytic    =", math.sin(math.pi / 6 - math.pi / 7))
print("  gradient    =", model.grad(0, theta).ravel())
print("  finite diff =", finite_difference_gradient(model, 0, theta).ravel())

# agents 4 and 9 share a sensing function (the benchmark repeats one pair)
print("\nagents 4 and 9 duplicate:",
      model.eval(4, theta)[0] == model.eval(9, theta)[0])

# noisy observations: mean f_n(theta), variance 2
rng = np.random.default_rng(0)
draws = np.array([sample_observation(model, 0, theta, rng)[0]
                  for _ in range(20000)])
print(f"\nsample mean {draws.mean():+.4f} (target {model.eval(0, theta)[0]:+.4f}), "
      f"sample variance {draws.var():.4f} (target 2.0)")

# the feasibility box clamps coordinatewise
fs = box([-math.pi / 4] * 5, [math.pi / 4] * 5)
wild = np.array([math.pi / 2, 0.0, -3.0, 0.1, -0.2])
print("\nprojection of", np.round(wild, 3), "->", np.round(project(fs, wild), 3))
inside = np.array([0.1, -0.1, 0.2, 0.0, 0.3])
print("points already inside are untouched:",
      np.array_equal(project(fs, inside), inside))
