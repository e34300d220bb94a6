"""Centralized weighted nonlinear least squares benchmark and covariance oracles.

The batch estimator minimizes the noise-weighted squared-residual cost over
the full observation history; its asymptotic covariance is sigma_c = (N G)^-1
with G the network-averaged information matrix.  The distributed recursion
pays a covariance premium: sigma_d = a I/(2N) + (N G - N I/(2a))^-1 / 4,
which dominates sigma_c in the PSD order whenever the innovation constant a
is feasible.  Both share the eigenvectors of G.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .sensing import FeasibleSet, SensingModel

SINGULARITY_TOL = 1e-12

WNLS_MAX_ITER = 10_000
WNLS_GRAD_TOL = 1e-10
WNLS_N_STARTS = 8


class SingularInformationError(ValueError):
    """Information matrix numerically singular; carries the offending eigenvalue."""

    def __init__(self, min_eig: float):
        self.min_eig = min_eig
        super().__init__(f"information matrix singular: min eigenvalue {min_eig:.3e}")


class InfeasibleGainError(ValueError):
    """Innovation constant a too small for the distributed covariance to exist."""

    def __init__(self, a: float, bound: float):
        self.a = a
        self.bound = bound
        super().__init__(
            f"innovation constant a={a} must exceed 1/(2*min_eig) = {bound:.6g}"
        )


# -- observation history ------------------------------------------------------

class HistoryStats:
    """Sufficient statistics of an observation history for the WNLS cost.

    Per agent: epoch count, summed observations, and the summed weighted
    squared norm sum_s y' R^-1 y.  The cost and its gradient only need these,
    so checkpoint re-solves stay O(1) in the history length.
    """

    def __init__(self, model: SensingModel):
        self.model = model
        self.count = 0
        self.sum_y = [np.zeros(d) for d in model.obs_dims]
        self.sum_yry = [0.0 for _ in model.obs_dims]

    def add_epoch(self, ys) -> None:
        self.count += 1
        for n, y in enumerate(ys):
            y = np.asarray(y, dtype=float)
            self.sum_y[n] += y
            self.sum_yry[n] += float(y @ (self.model.noise_cov_invs[n] @ y))

    @classmethod
    def from_history(cls, model: SensingModel, history) -> "HistoryStats":
        stats = cls(model)
        for ys in history:
            stats.add_epoch(ys)
        if stats.count == 0:
            raise ValueError("observation history is empty")
        return stats

    def cost(self, z: np.ndarray) -> float:
        """Q_t(z) = sum_s sum_n (y_n(s) - f_n(z))' R_n^-1 (y_n(s) - f_n(z))."""
        total = 0.0
        for n in range(self.model.n_agents):
            f = self.model.eval(n, z)
            rinv = self.model.noise_cov_invs[n]
            total += (self.sum_yry[n]
                      - 2.0 * float(f @ (rinv @ self.sum_y[n]))
                      + self.count * float(f @ (rinv @ f)))
        return total

    def grad_normalized(self, z: np.ndarray) -> np.ndarray:
        """Gradient of Q_t(z)/count; same minimizers, scale-stable stopping."""
        g = np.zeros(self.model.param_dim)
        for n in range(self.model.n_agents):
            f = self.model.eval(n, z)
            rinv = self.model.noise_cov_invs[n]
            g += self.model.grad(n, z) @ (rinv @ (f - self.sum_y[n] / self.count))
        return 2.0 * g


def wnls_cost(model: SensingModel, history, z: np.ndarray) -> float:
    """Weighted squared-residual cost of candidate z over the full history."""
    z = np.asarray(z, dtype=float)
    total = 0.0
    epochs = 0
    for ys in history:
        epochs += 1
        for n, y in enumerate(ys):
            r = np.asarray(y, dtype=float) - model.eval(n, z)
            total += float(r @ (model.noise_cov_invs[n] @ r))
    if epochs == 0:
        raise ValueError("observation history is empty")
    return total


@dataclass(frozen=True)
class WnlsResult:
    x: np.ndarray
    cost: float
    converged: bool
    iterations: int
    start_index: int


def _pgd(stats: HistoryStats, feasible: FeasibleSet, start: np.ndarray,
         max_iter: int, grad_tol: float) -> tuple[np.ndarray, bool, int]:
    """Projected gradient descent, Barzilai-Borwein steps, Armijo backtracking."""
    z = feasible.project(np.asarray(start, dtype=float))
    qbar = stats.cost(z) / stats.count
    g = stats.grad_normalized(z)
    eta = 1.0
    z_prev = g_prev = None
    for it in range(1, max_iter + 1):
        if np.linalg.norm(feasible.project(z - g) - z) <= grad_tol:
            return z, True, it - 1
        if z_prev is not None:
            s = z - z_prev
            y = g - g_prev
            sy = float(s @ y)
            if sy > 1e-300:
                eta = float(s @ s) / sy
            eta = min(max(eta, 1e-12), 1e8)
        accepted = False
        step_vec = None
        slack = 4e-16 * (1.0 + abs(qbar))  # rounding floor of the cost comparison
        while eta >= 1e-18:
            z_new = feasible.project(z - eta * g)
            step_vec = z_new - z
            q_new = stats.cost(z_new) / stats.count
            if q_new <= qbar + 1e-4 * float(g @ step_vec) + slack:
                accepted = True
                break
            eta *= 0.5
        if not accepted or step_vec is None or not np.any(step_vec):
            # stalled at floating-point resolution; converged iff the
            # stationarity gap is met where we stand
            gap = np.linalg.norm(feasible.project(z - stats.grad_normalized(z)) - z)
            return z, bool(gap <= grad_tol), it
        z_prev, g_prev = z, g
        z, qbar = z_new, q_new
        g = stats.grad_normalized(z)
    return z, False, max_iter


def wnls_estimate(model: SensingModel, history, feasible: FeasibleSet,
                  starts, max_iter: int = WNLS_MAX_ITER,
                  grad_tol: float = WNLS_GRAD_TOL) -> WnlsResult:
    """Batch WNLS minimizer via multi-start projected gradient descent.

    history: either an epoch-major sequence of per-agent observation vectors
    or a precomputed HistoryStats.  starts: candidate initial points, at least
    one feasible.  Returns the lowest-cost local minimizer found, ties broken
    by the earlier start; `converged` is False when the iteration budget ran
    out for the returned start.
    """
    stats = history if isinstance(history, HistoryStats) else \
        HistoryStats.from_history(model, history)
    starts = [np.asarray(s, dtype=float) for s in starts]
    if not starts:
        raise ValueError("need at least one start")
    if not any(feasible.contains(s, tol=1e-12) for s in starts):
        raise ValueError("at least one start must lie in the feasible set")
    best: WnlsResult | None = None
    for k, s in enumerate(starts):
        z, ok, iters = _pgd(stats, feasible, s, max_iter, grad_tol)
        cost = stats.cost(z)
        if best is None or cost < best.cost:
            best = WnlsResult(x=z, cost=cost, converged=ok,
                              iterations=iters, start_index=k)
    return best


def projected_stationarity_gap(model: SensingModel, history,
                               feasible: FeasibleSet, z: np.ndarray) -> float:
    """|| P(z - grad Qbar(z)) - z || with Qbar the per-epoch-normalized cost.

    Equals the raw-cost gap at step size 1/epochs, a "small eta" for any
    nontrivial history.
    """
    stats = history if isinstance(history, HistoryStats) else \
        HistoryStats.from_history(model, history)
    z = np.asarray(z, dtype=float)
    return float(np.linalg.norm(feasible.project(z - stats.grad_normalized(z)) - z))


def linear_wnls_closed_form(model: SensingModel, history,
                            feasible: FeasibleSet | None = None) -> np.ndarray:
    """Closed-form weighted least squares for linear models (oracle path).

    Solves (sum_{s,n} F_n' R_n^-1 F_n) z = sum_{s,n} F_n' R_n^-1 y_n(s),
    optionally projected.  Independent of the iterative optimizer.
    """
    stats = history if isinstance(history, HistoryStats) else \
        HistoryStats.from_history(model, history)
    M = model.param_dim
    A = np.zeros((M, M))
    rhs = np.zeros(M)
    z0 = np.zeros(M)
    for n in range(model.n_agents):
        Ft = model.grad(n, z0)              # (M, M_n) = F_n'
        rinv = model.noise_cov_invs[n]
        A += stats.count * (Ft @ rinv @ Ft.T)
        rhs += Ft @ (rinv @ stats.sum_y[n])
    z = np.linalg.solve(A, rhs)
    return z if feasible is None else feasible.project(z)


# -- information matrix and asymptotic covariances ----------------------------

def gamma_matrix(model: SensingModel, theta: np.ndarray) -> np.ndarray:
    """Network-averaged information matrix (1/N) sum_n grad_n R_n^-1 grad_n'."""
    theta = np.asarray(theta, dtype=float)
    G = np.zeros((model.param_dim, model.param_dim))
    for n in range(model.n_agents):
        D = model.grad(n, theta)
        G += D @ (model.noise_cov_invs[n] @ D.T)
    G /= model.n_agents
    return 0.5 * (G + G.T)


def sigma_centralized(gamma: np.ndarray, n_agents: int) -> np.ndarray:
    """Asymptotic covariance of the batch estimator: (N gamma)^-1."""
    lam, V = np.linalg.eigh(np.asarray(gamma, dtype=float))
    if lam.min() <= SINGULARITY_TOL:
        raise SingularInformationError(float(lam.min()))
    return (V / (n_agents * lam)) @ V.T


def sigma_distributed(gamma: np.ndarray, n_agents: int, a: float) -> np.ndarray:
    """Asymptotic covariance of the distributed recursion.

    a I/(2N) + (N gamma - N I/(2a))^-1 / 4, built on gamma's eigenbasis so the
    i-th eigenvalue is exactly a^2 lam_i / (2 a N lam_i - N).  Requires
    a > 1/(2 lam_min).
    """
    lam, V = np.linalg.eigh(np.asarray(gamma, dtype=float))
    bound = 1.0 / (2.0 * lam.min())
    if not a > bound:
        raise InfeasibleGainError(a, bound)
    vals = a * a * lam / (n_agents * (2.0 * a * lam - 1.0))
    return (V * vals) @ V.T


def distributed_eigenvalues(gamma: np.ndarray, n_agents: int, a: float) -> np.ndarray:
    """Eigenvalues a^2 lam/(2 a N lam - N) of the distributed covariance."""
    lam = np.linalg.eigvalsh(np.asarray(gamma, dtype=float))
    bound = 1.0 / (2.0 * lam.min())
    if not a > bound:
        raise InfeasibleGainError(a, bound)
    return a * a * lam / (n_agents * (2.0 * a * lam - 1.0))


def covariance_gap_bound(gamma: np.ndarray, a: float, n_agents: int,
                         k_star_max: float) -> float:
    """Closed-form bound on ||sigma_d - sigma_c|| (spectral norm).

    k_star_max bounds the information-matrix spectrum from above (from the
    per-agent Lipschitz constants: max_n k_n^2 ||R_n^-1||).  The bound is
    max of the gap function at lam_min and at k_star_max.
    """
    lam = np.linalg.eigvalsh(np.asarray(gamma, dtype=float))
    bound = 1.0 / (2.0 * lam.min())
    if not a > bound:
        raise InfeasibleGainError(a, bound)

    def h(x):
        return (a * x - 1.0) ** 2 / (n_agents * x * (2.0 * a * x - 1.0))

    return float(max(h(lam.min()), h(k_star_max)))


@dataclass(frozen=True)
class GainRecovery:
    """Outcome of solving trace(sigma_d(a)) = target for the gain constant a.

    The trace diverges at the pole a -> 1/(2 lam_min) and grows linearly for
    large a, so there are zero, one, or two roots; `roots` is sorted.  When no
    root exists the target is below the attainable minimum `min_trace` at
    `a_min_trace`.
    """

    target: float
    a_pole: float
    a_min_trace: float
    min_trace: float
    roots: tuple[float, ...]


def recover_innovation_gain(gamma: np.ndarray, n_agents: int,
                            target_trace: float) -> GainRecovery:
    """Solve trace(sigma_d(a)) = target_trace for a (both branches)."""
    lam = np.linalg.eigvalsh(np.asarray(gamma, dtype=float))
    pole = 1.0 / (2.0 * lam.min())

    def tr(a):
        return float(np.sum(a * a * lam / (n_agents * (2.0 * a * lam - 1.0))))

    lo = pole * (1.0 + 1e-9)
    hi = pole * 4.0
    while tr(hi) > tr(hi * 2.0):
        hi *= 2.0
    res = minimize_scalar(tr, bounds=(lo, hi * 4.0), method="bounded",
                          options={"xatol": 1e-12})
    a_min, tr_min = float(res.x), float(res.fun)
    roots = []
    if target_trace >= tr_min:
        if tr(lo) >= target_trace:
            roots.append(brentq(lambda a: tr(a) - target_trace, lo, a_min,
                                xtol=1e-12, rtol=1e-14))
        hi = a_min * 2.0
        while tr(hi) < target_trace and hi < 1e12:
            hi *= 2.0
        if tr(hi) >= target_trace:
            roots.append(brentq(lambda a: tr(a) - target_trace, a_min, hi,
                                xtol=1e-12, rtol=1e-14))
    return GainRecovery(target=float(target_trace), a_pole=pole,
                        a_min_trace=a_min, min_trace=tr_min,
                        roots=tuple(sorted(set(roots))))


# -- covariance report --------------------------------------------------------

@dataclass(frozen=True)
class CovarianceReport:
    gamma: np.ndarray = field(repr=False)
    sigma_c: np.ndarray = field(repr=False)
    sigma_d: np.ndarray = field(repr=False)
    gamma_eigenvalues: np.ndarray = field(repr=False)
    a: float
    n_agents: int
    gap_norm: float
    gap_bound: float | None

    @property
    def trace_sigma_c(self) -> float:
        return float(np.trace(self.sigma_c))

    @property
    def trace_sigma_d(self) -> float:
        return float(np.trace(self.sigma_d))


def covariance_report(model: SensingModel, theta: np.ndarray, a: float,
                      k_star_max: float | None = None) -> CovarianceReport:
    """Full covariance comparison at theta for innovation constant a."""
    G = gamma_matrix(model, theta)
    sc = sigma_centralized(G, model.n_agents)
    sd = sigma_distributed(G, model.n_agents, a)
    gap = float(np.abs(np.linalg.eigvalsh(sd - sc)).max())
    bound = None
    if k_star_max is not None:
        bound = covariance_gap_bound(G, a, model.n_agents, k_star_max)
    return CovarianceReport(
        gamma=G, sigma_c=sc, sigma_d=sd,
        gamma_eigenvalues=np.linalg.eigvalsh(G),
        a=float(a), n_agents=model.n_agents,
        gap_norm=gap, gap_bound=bound,
    )


def covariance_report_to_json(report: CovarianceReport) -> str:
    obj = {
        "n_agents": report.n_agents,
        "a": report.a,
        "gamma": report.gamma.tolist(),
        "sigma_c": report.sigma_c.tolist(),
        "sigma_d": report.sigma_d.tolist(),
        "gamma_eigenvalues": report.gamma_eigenvalues.tolist(),
        "trace_sigma_c": report.trace_sigma_c,
        "trace_sigma_d": report.trace_sigma_d,
        "gap_norm": report.gap_norm,
        "gap_bound": report.gap_bound,
    }
    return json.dumps(obj, indent=2)
