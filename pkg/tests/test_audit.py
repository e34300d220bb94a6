import json
import math

import numpy as np
import pytest

from ciwnls.audit import (
    AuditReport,
    audit_report_to_json,
    axis_grid,
    check_gain_feasible,
    check_global_observability,
    default_innovation_gain,
    delta1_upper_bound,
    estimate_lipschitz,
    estimate_monotonicity_constant,
    k_star_max,
    run_audit,
    scan_gamma_min_eigenvalue,
)
from ciwnls.estimator import GainSchedule
from ciwnls.sensing import box, linear_model, pairwise_sine_model

PAIRS = [(0, 1), (2, 1), (2, 3), (3, 4), (0, 4),
         (0, 2), (3, 1), (2, 4), (0, 3), (0, 4)]
BOUND = math.pi / 4


def benchmark_model():
    return pairwise_sine_model(PAIRS, 2.0, 5)


def benchmark_box():
    return box([-BOUND] * 5, [BOUND] * 5)


def small_linear():
    F1 = np.array([[1.0, 0.3]])
    F2 = np.array([[0.2, 1.0]])
    return linear_model([F1, F2], [[[1.0]], [[2.0]]])


def test_axis_grid_includes_endpoints_and_caps():
    fs = box([-1.0, -1.0], [1.0, 1.0])
    g = axis_grid(fs, 5)
    assert g.shape == (25, 2)
    assert any(np.array_equal(p, [-1.0, -1.0]) for p in g)
    assert any(np.array_equal(p, [1.0, 1.0]) for p in g)
    capped = axis_grid(box([-1.0] * 5, [1.0] * 5), 20, cap=1000)
    assert len(capped) <= 1000


def test_lipschitz_linear_exact_from_any_sample():
    m = small_linear()
    fs = box([-2.0, -2.0], [2.0, 2.0])
    k0 = estimate_lipschitz(m, 0, fs, samples=2, rng=np.random.default_rng(0))
    assert k0 == pytest.approx(np.linalg.norm([[1.0, 0.3]], 2), rel=1e-12)


def test_lipschitz_pairwise_sine_near_sqrt2():
    m = benchmark_model()
    fs = benchmark_box()
    k = estimate_lipschitz(m, 0, fs, samples=4000, rng=np.random.default_rng(1))
    assert k <= math.sqrt(2) + 1e-12          # sup is sqrt(2), attained at sum 0
    assert k >= math.sqrt(2) - 1e-2


def test_lipschitz_monotone_in_samples():
    m = benchmark_model()
    fs = benchmark_box()
    k1 = estimate_lipschitz(m, 2, fs, samples=500, rng=np.random.default_rng(3))
    k2 = estimate_lipschitz(m, 2, fs, samples=1000, rng=np.random.default_rng(3))
    assert k2 >= k1                           # nested sample sets for a fixed seed


def test_monotonicity_scalar_identity_is_one():
    m = linear_model([[[1.0]]], [[[1.0]]])
    fs = box([-1.0], [1.0])
    c1 = estimate_monotonicity_constant(m, fs, pair_samples=200,
                                        rng=np.random.default_rng(0))
    assert c1 == pytest.approx(1.0, rel=1e-12)


def test_monotonicity_linear_matches_min_eigenvalue():
    m = small_linear()
    fs = box([-2.0, -2.0], [2.0, 2.0])
    stack = sum(m.grad(n, np.zeros(2)) @ m.noise_cov_invs[n] @ m.grad(n, np.zeros(2)).T
                for n in range(2))
    lam_min = np.linalg.eigvalsh(stack)[0]
    c1 = estimate_monotonicity_constant(m, fs, pair_samples=10_000,
                                        rng=np.random.default_rng(5))
    assert c1 >= lam_min - 1e-12              # the ratio is a quadratic form
    assert c1 <= lam_min * 1.02               # sampled min within 2%


def test_monotonicity_benchmark_degenerates_at_corners():
    # the uniform-sign corners zero every sensing gradient, so the honest
    # grid-inclusive scan drives the sampled c1 to (numerically) zero
    m = benchmark_model()
    c1 = estimate_monotonicity_constant(m, benchmark_box(), pair_samples=2000,
                                        rng=np.random.default_rng(7))
    assert 0.0 <= c1 < 1e-10


def test_monotonicity_benchmark_interior_positive():
    # away from the corners the model is strictly monotone
    m = benchmark_model()
    interior = box([-BOUND * 0.9] * 5, [BOUND * 0.9] * 5)
    c1 = estimate_monotonicity_constant(m, interior, pair_samples=2000,
                                        rng=np.random.default_rng(7))
    assert c1 > 0.01


def test_observability_fails_for_blind_coordinate():
    m = linear_model([np.array([[1.0, 0.0]])], [[[1.0]]])
    fs = box([-1.0, -1.0], [1.0, 1.0])
    ok, witness, margin = check_global_observability(
        m, fs, pair_samples=3000, rng=np.random.default_rng(2))
    assert not ok
    assert margin < 1e-3
    t1, t2 = witness
    # the worst pair differs essentially only in the unobserved coordinate
    assert abs(t1[0] - t2[0]) < abs(t1[1] - t2[1])


def test_observability_passes_full_rank_linear():
    m = linear_model([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])],
                     [[[1.0]], [[1.0]]])
    fs = box([-1.0, -1.0], [1.0, 1.0])
    ok, _, margin = check_global_observability(
        m, fs, pair_samples=3000, rng=np.random.default_rng(2))
    assert ok
    assert margin > 0.5                       # min eig of sum F'F is 1


def test_observability_passes_benchmark():
    ok, _, margin = check_global_observability(
        benchmark_model(), benchmark_box(), pair_samples=3000,
        rng=np.random.default_rng(4))
    assert ok and margin > 1e-4


def test_delta1_upper_bound_values():
    assert delta1_upper_bound(2.0) == pytest.approx(0.25)
    assert delta1_upper_bound(0.5) == pytest.approx(0.1)
    assert delta1_upper_bound(1e12) == pytest.approx(0.5, abs=1e-11)
    bounds = [delta1_upper_bound(e) for e in (0.1, 1.0, 10.0, 1e4)]
    assert all(b1 < b2 for b1, b2 in zip(bounds, bounds[1:]))
    with pytest.raises(ValueError):
        delta1_upper_bound(0.0)


def _report(c1, gmin):
    return AuditReport(
        lipschitz=np.array([1.0]), monotonicity=c1,
        observability_ok=True, observability_margin=1.0,
        observability_witness=None,
        gamma_min_eig=gmin, gamma_min_witness=None,
        delta1_max=delta1_upper_bound(1e6), epsilon1=1e6,
        a_min=max(1.0 / c1, 1.0 / (2 * gmin)),
        pair_samples=0, lipschitz_samples=0,
        eig_grid_points_per_axis=0, seed=0,
    )


def test_check_gain_feasible_examples():
    # a*c1 = 1 exactly: the consistency condition holds with equality
    f = check_gain_feasible(GainSchedule(a=1.0, b=1.0, delta1=0.25), _report(1.0, 1.0))
    assert f.theorem1_ok and f.margin_theorem1 == pytest.approx(0.0)
    # normality condition is strict: equality fails
    f = check_gain_feasible(GainSchedule(a=2.0, b=1.0, delta1=0.25),
                            _report(1.0, 0.25))
    assert f.theorem1_ok and not f.theorem2_ok
    assert f.margin_theorem2 == pytest.approx(0.0)
    # comfortable margins pass everything
    f = check_gain_feasible(GainSchedule(a=3.0, b=1.0, delta1=0.25),
                            _report(0.5, 1.0))
    assert f.theorem1_ok and f.theorem2_ok and f.delta1_ok


def test_default_innovation_gain():
    assert default_innovation_gain(_report(0.5, 1.0)) == pytest.approx(3.0)
    # degenerate audit (a_min infinite) refuses to pick a gain
    rep = _report(1.0, 1.0)
    object.__setattr__(rep, "a_min", float("inf"))
    with pytest.raises(ValueError):
        default_innovation_gain(rep)


def test_scan_gamma_min_eig_linear_exact():
    m = small_linear()
    fs = box([-1.0, -1.0], [1.0, 1.0])
    gmin, witness = scan_gamma_min_eigenvalue(m, fs, grid_points_per_axis=3,
                                              random_samples=50,
                                              rng=np.random.default_rng(0))
    from ciwnls.centralized import gamma_matrix
    expected = np.linalg.eigvalsh(gamma_matrix(m, np.zeros(2)))[0]
    assert gmin == pytest.approx(expected, rel=1e-12)   # constant in theta
    assert witness.shape == (2,)


def test_scan_gamma_finds_benchmark_corner_degeneracy():
    m = benchmark_model()
    gmin, witness = scan_gamma_min_eigenvalue(m, benchmark_box(),
                                              grid_points_per_axis=3,
                                              random_samples=0)
    assert gmin < 1e-30
    assert np.allclose(np.abs(witness), BOUND)          # a uniform-sign corner


def test_run_audit_deterministic():
    m = small_linear()
    fs = box([-1.0, -1.0], [1.0, 1.0])
    r1 = run_audit(m, fs, pair_samples=300, lipschitz_samples=100,
                   eig_grid_points_per_axis=5, seed=11)
    r2 = run_audit(m, fs, pair_samples=300, lipschitz_samples=100,
                   eig_grid_points_per_axis=5, seed=11)
    assert np.array_equal(r1.lipschitz, r2.lipschitz)
    assert r1.monotonicity == r2.monotonicity
    assert r1.gamma_min_eig == r2.gamma_min_eig
    assert r1.a_min == r2.a_min
    assert audit_report_to_json(r1) == audit_report_to_json(r2)


def test_run_audit_linear_passes_and_a_min_consistent():
    m = small_linear()
    fs = box([-1.0, -1.0], [1.0, 1.0])
    r = run_audit(m, fs, pair_samples=500, lipschitz_samples=200, seed=3)
    assert r.passes
    assert r.a_min == pytest.approx(max(1 / r.monotonicity,
                                        1 / (2 * r.gamma_min_eig)))
    assert r.gamma_min_eig > 0
    # the audited minimum never exceeds the value at any probe point
    from ciwnls.centralized import gamma_matrix
    for theta in axis_grid(fs, 3):
        assert r.gamma_min_eig <= np.linalg.eigvalsh(
            gamma_matrix(m, theta))[0] + 1e-12


def test_k_star_max():
    m = small_linear()
    ks = k_star_max(m, [2.0, 3.0])
    # agent 1: k^2 ||R^-1|| = 9 * 0.5 = 4.5; agent 0: 4 * 1 = 4
    assert ks == pytest.approx(4.5)


def test_audit_json_handles_degenerate_values():
    m = benchmark_model()
    r = run_audit(m, benchmark_box(), pair_samples=100, lipschitz_samples=50,
                  eig_grid_points_per_axis=3, seed=0)
    obj = json.loads(audit_report_to_json(r))
    assert obj["a_min"] is None or obj["a_min"] > 0   # inf serialized as null
    assert obj["gamma_min_eig"] < 1e-30
    assert len(obj["lipschitz"]) == 10
    assert obj["passes"] is False                      # corner degeneracy
