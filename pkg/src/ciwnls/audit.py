"""Numerical certification of the model assumptions behind the estimator.

Everything here is a sampling-based certificate, not a proof: Lipschitz
constants are maxima over sampled points (underestimates), the monotonicity
constant and observability margin are minima over sampled pairs
(overestimates of nothing -- they can only fall as coverage grows).  Reported
values are deterministic for a fixed seed and recorded together with the
coverage that produced them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import GainSchedule
from .sensing import FeasibleSet, SensingModel

OBSERVABILITY_TOL = 1e-10
EPSILON1_DEFAULT = 1e6
PAIR_SAMPLES_DEFAULT = 10_000
LIPSCHITZ_SAMPLES_DEFAULT = 2_000
PAIR_GRID_POINTS_PER_AXIS = 5
EIG_GRID_POINTS_PER_AXIS = 9
GRID_CAP = 100_000
NEAR_DIAGONAL_STEP = 1e-3


def axis_grid(feasible: FeasibleSet, points_per_axis: int,
              cap: int = GRID_CAP) -> np.ndarray:
    """Axis-aligned grid over a box, endpoints included, total capped.

    The per-axis count is lowered until the full tensor grid fits the cap.
    Returns an empty array for the whole space (nothing to grid).
    """
    if feasible.kind != "box":
        return np.empty((0, 0))
    dim = len(feasible.lower)
    pts = points_per_axis
    while pts > 2 and pts**dim > cap:
        pts -= 1
    axes = [np.linspace(feasible.lower[i], feasible.upper[i], pts)
            for i in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def estimate_lipschitz(model: SensingModel, n: int, feasible: FeasibleSet,
                       samples: int = LIPSCHITZ_SAMPLES_DEFAULT,
                       rng: np.random.Generator | None = None) -> float:
    """Max sampled spectral norm of grad f_n over the feasible set.

    A lower estimate of the true Lipschitz constant k_n, exact in the sampling
    limit by continuity on the compact box.  Sample sets are nested in the
    sample count for a fixed seed, so more samples never lower the estimate.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(0) if rng is None else rng
    draws = feasible.sample(rng, size=samples)
    best = 0.0
    for theta in draws:
        s = np.linalg.norm(model.grad(n, theta), 2)
        if s > best:
            best = float(s)
    return best


def _monotonicity_ratio(model: SensingModel, t1: np.ndarray,
                        t2: np.ndarray) -> float:
    d = t1 - t2
    dd = float(d @ d)
    num = 0.0
    for n in range(model.n_agents):
        df = model.eval(n, t1) - model.eval(n, t2)
        num += float(d @ (model.grad(n, t1) @ (model.noise_cov_invs[n] @ df)))
    return num / dd


def estimate_monotonicity_constant(
    model: SensingModel, feasible: FeasibleSet,
    pair_samples: int = PAIR_SAMPLES_DEFAULT,
    rng: np.random.Generator | None = None,
    grid_points_per_axis: int = PAIR_GRID_POINTS_PER_AXIS,
) -> float:
    """Min sampled aggregate-monotonicity ratio over parameter pairs.

    The ratio is sum_n (t1-t2)' grad_n(t1) R_n^-1 (f_n(t1)-f_n(t2)) divided by
    ||t1-t2||^2.  Pairs mix uniform draws, near-diagonal probes (distance
    <= 1e-3), and grid-anchored pairs so boundary degeneracies are not missed.
    """
    if pair_samples < 1:
        raise ValueError("need at least 1 pair")
    rng = np.random.default_rng(0) if rng is None else rng
    best = math.inf

    t1s = feasible.sample(rng, size=pair_samples)
    t2s = feasible.sample(rng, size=pair_samples)
    for t1, t2 in zip(t1s, t2s):
        if np.array_equal(t1, t2):
            continue
        best = min(best, _monotonicity_ratio(model, t1, t2))

    n_probe = max(pair_samples // 10, 1)
    anchors = feasible.sample(rng, size=n_probe)
    dirs = rng.standard_normal((n_probe, model.param_dim))
    for t1, v in zip(anchors, dirs):
        t2 = feasible.project(t1 + NEAR_DIAGONAL_STEP * v / np.linalg.norm(v))
        if np.array_equal(t1, t2):
            continue
        best = min(best, _monotonicity_ratio(model, t1, t2))

    grid = axis_grid(feasible, grid_points_per_axis)
    if grid.size:
        partners = feasible.sample(rng, size=len(grid))
        dirs = rng.standard_normal((len(grid), model.param_dim))
        for t1, t2, v in zip(grid, partners, dirs):
            if not np.array_equal(t1, t2):
                best = min(best, _monotonicity_ratio(model, t1, t2))
            t2n = feasible.project(t1 + NEAR_DIAGONAL_STEP * v / np.linalg.norm(v))
            if not np.array_equal(t1, t2n):
                best = min(best, _monotonicity_ratio(model, t1, t2n))
    return float(best)


def check_global_observability(
    model: SensingModel, feasible: FeasibleSet,
    pair_samples: int = PAIR_SAMPLES_DEFAULT,
    tolerance: float = OBSERVABILITY_TOL,
    rng: np.random.Generator | None = None,
) -> tuple[bool, tuple[np.ndarray, np.ndarray] | None, float]:
    """Sampled check that distinct parameters give distinct stacked outputs.

    Verifies sum_n ||f_n(t1) - f_n(t2)||^2 > tolerance * ||t1 - t2||^2 over
    sampled distinct pairs; besides uniform pairs, axis-aligned probes
    (one coordinate perturbed at a time) are included, since a coordinate no
    sensing function sees is invisible to generic random pairs.  Returns
    (ok, worst pair, worst normalized margin).  A falsification-oriented
    certificate, not a proof.
    """
    if pair_samples < 1:
        raise ValueError("need at least 1 pair")
    rng = np.random.default_rng(0) if rng is None else rng
    worst = math.inf
    witness = None

    def probe(t1, t2):
        nonlocal worst, witness
        dd = float((t1 - t2) @ (t1 - t2))
        if dd == 0.0:
            return
        num = 0.0
        for n in range(model.n_agents):
            df = model.eval(n, t1) - model.eval(n, t2)
            num += float(df @ df)
        ratio = num / dd
        if ratio < worst:
            worst = ratio
            witness = (t1.copy(), t2.copy())

    t1s = feasible.sample(rng, size=pair_samples)
    t2s = feasible.sample(rng, size=pair_samples)
    for t1, t2 in zip(t1s, t2s):
        probe(t1, t2)
    n_axis = max(pair_samples // 20, 1)
    anchors = feasible.sample(rng, size=n_axis)
    span = feasible.upper - feasible.lower if feasible.kind == "box" else None
    for t1 in anchors:
        for i in range(model.param_dim):
            h = 0.05 * span[i] if span is not None else 0.05
            t2 = t1.copy()
            t2[i] = min(t1[i] + h, feasible.upper[i]) if span is not None \
                else t1[i] + h
            if t2[i] == t1[i]:
                t2[i] = t1[i] - h
            probe(t1, t2)
    return bool(worst > tolerance), witness, float(worst)


def scan_gamma_min_eigenvalue(
    model: SensingModel, feasible: FeasibleSet,
    grid_points_per_axis: int = EIG_GRID_POINTS_PER_AXIS,
    random_samples: int = PAIR_SAMPLES_DEFAULT,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray]:
    """Infimum estimate of the smallest information-matrix eigenvalue over the set.

    Scans a deterministic endpoint-inclusive grid plus uniform samples and
    returns (min eigenvalue, witness point).  This is the honest global scan:
    models whose information matrix degenerates anywhere on the closed box
    (the pairwise-sine benchmark does, at the uniform-sign corners) report an
    essentially zero value here.
    """
    from .centralized import gamma_matrix

    rng = np.random.default_rng(0) if rng is None else rng
    pts = [axis_grid(feasible, grid_points_per_axis)]
    if feasible.kind == "box" and random_samples > 0:
        pts.append(feasible.sample(rng, size=random_samples))
    best = math.inf
    witness = None
    for block in pts:
        for theta in block:
            lam = float(np.linalg.eigvalsh(gamma_matrix(model, theta))[0])
            if lam < best:
                best = lam
                witness = theta.copy()
    return float(best), witness


def delta1_upper_bound(epsilon1: float) -> float:
    """Admissible consensus-decay ceiling 1/2 - 1/(2 + epsilon1)."""
    if epsilon1 <= 0:
        raise ValueError(f"epsilon1 must be positive, got {epsilon1}")
    return 0.5 - 1.0 / (2.0 + epsilon1)


@dataclass(frozen=True)
class AuditReport:
    """Sampled constants certifying (or refuting) the estimator's assumptions."""

    lipschitz: np.ndarray = field(repr=False)  # per-agent k_n estimates
    monotonicity: float                        # c1 estimate (min sampled ratio)
    observability_ok: bool
    observability_margin: float
    observability_witness: tuple | None = field(repr=False)
    gamma_min_eig: float                       # inf estimate over the set
    gamma_min_witness: np.ndarray | None = field(repr=False)
    delta1_max: float
    epsilon1: float
    a_min: float                               # max(1/c1, 1/(2 gamma_min_eig))
    pair_samples: int
    lipschitz_samples: int
    eig_grid_points_per_axis: int
    seed: int

    @property
    def k_star_max(self) -> float:
        return float(max(self.lipschitz))  # paired with ||R_n^-1|| by the caller

    @property
    def passes(self) -> bool:
        return bool(self.observability_ok and self.monotonicity > 0.0
                    and self.gamma_min_eig > 0.0)


def k_star_max(model: SensingModel, lipschitz) -> float:
    """max_n k_n^2 ||R_n^-1||: spectral ceiling of the information matrix."""
    vals = [
        float(k * k * np.linalg.norm(model.noise_cov_invs[n], 2))
        for n, k in enumerate(lipschitz)
    ]
    return max(vals)


def run_audit(model: SensingModel, feasible: FeasibleSet,
              pair_samples: int = PAIR_SAMPLES_DEFAULT,
              lipschitz_samples: int = LIPSCHITZ_SAMPLES_DEFAULT,
              eig_grid_points_per_axis: int = EIG_GRID_POINTS_PER_AXIS,
              epsilon1: float = EPSILON1_DEFAULT,
              seed: int = 0) -> AuditReport:
    """Full audit with one seeded stream; identical inputs give identical reports."""
    rng = np.random.default_rng(seed)
    lip = np.array([
        estimate_lipschitz(model, n, feasible, lipschitz_samples, rng)
        for n in range(model.n_agents)
    ])
    c1 = estimate_monotonicity_constant(model, feasible, pair_samples, rng)
    obs_ok, obs_wit, obs_margin = check_global_observability(
        model, feasible, pair_samples, OBSERVABILITY_TOL, rng)
    gmin, gwit = scan_gamma_min_eigenvalue(
        model, feasible, eig_grid_points_per_axis, pair_samples, rng)
    d1max = delta1_upper_bound(epsilon1)
    a_min = max(
        1.0 / c1 if c1 > 0 else math.inf,
        1.0 / (2.0 * gmin) if gmin > 0 else math.inf,
    )
    return AuditReport(
        lipschitz=lip, monotonicity=float(c1),
        observability_ok=obs_ok, observability_margin=obs_margin,
        observability_witness=obs_wit,
        gamma_min_eig=gmin, gamma_min_witness=gwit,
        delta1_max=d1max, epsilon1=float(epsilon1), a_min=float(a_min),
        pair_samples=pair_samples, lipschitz_samples=lipschitz_samples,
        eig_grid_points_per_axis=eig_grid_points_per_axis, seed=seed,
    )


@dataclass(frozen=True)
class GainFeasibility:
    theorem1_ok: bool            # a * c1 >= 1 (equality allowed)
    theorem2_ok: bool            # a > max(1/c1, 1/(2 gamma_min_eig)), strict
    delta1_ok: bool
    margin_theorem1: float       # a * c1 - 1
    margin_theorem2: float       # a - a_min
    margin_delta1: float         # delta1_max - delta1


def check_gain_feasible(schedule: GainSchedule,
                        report: AuditReport) -> GainFeasibility:
    """Compare a gain schedule against the audited constants, with margins."""
    c1 = report.monotonicity
    m1 = schedule.a * c1 - 1.0
    m2 = schedule.a - report.a_min
    d1max = delta1_upper_bound(schedule.epsilon1)
    return GainFeasibility(
        theorem1_ok=bool(m1 >= 0.0),
        theorem2_ok=bool(m2 > 0.0),
        delta1_ok=bool(schedule.delta1 < d1max),
        margin_theorem1=float(m1),
        margin_theorem2=float(m2) if math.isfinite(m2) else float(m2),
        margin_delta1=float(d1max - schedule.delta1),
    )


def default_innovation_gain(report: AuditReport) -> float:
    """ceil(1.1 * audited lower bound): strict margin above both gain floors."""
    if not math.isfinite(report.a_min):
        raise ValueError(
            "audited gain floor is infinite (degenerate monotonicity or "
            "information minimum); choose a explicitly"
        )
    return float(math.ceil(report.a_min * 1.1))


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def audit_report_to_json(report: AuditReport) -> str:
    obj = {
        "lipschitz": report.lipschitz.tolist(),
        "monotonicity_c1": _json_safe(report.monotonicity),
        "observability_ok": report.observability_ok,
        "observability_margin": _json_safe(report.observability_margin),
        "observability_witness": None if report.observability_witness is None else
            [report.observability_witness[0].tolist(),
             report.observability_witness[1].tolist()],
        "gamma_min_eig": _json_safe(report.gamma_min_eig),
        "gamma_min_witness": None if report.gamma_min_witness is None else
            report.gamma_min_witness.tolist(),
        "delta1_max": report.delta1_max,
        "epsilon1": report.epsilon1,
        "a_min": _json_safe(report.a_min),
        "pair_samples": report.pair_samples,
        "lipschitz_samples": report.lipschitz_samples,
        "eig_grid_points_per_axis": report.eig_grid_points_per_axis,
        "seed": report.seed,
        "passes": report.passes,
    }
    return json.dumps(obj, indent=2)
