"""Per-agent observation models and the feasible parameter set.

An observation at agent n is y_n = f_n(theta) + zeta_n with zeta_n zero-mean
noise of covariance R_n.  Gradients follow the M x M_n layout:
grad(n, theta)[i, j] = d [f_n(theta)]_j / d theta_i.

Component/pair indices are 0-based in the Python API; the JSON interchange
format is 1-based (converted only at the serialization boundary).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FD_STEP_DEFAULT = 1e-5  # central differences: truncation ~1e-10 vs round-off ~1e-11


@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex parameter set: a coordinate box or the whole space."""

    kind: str  # "box" | "whole-space"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("box", "whole-space"):
            raise ValueError(f"unknown feasible-set kind {self.kind!r}")
        if self.kind == "box":
            lo = np.asarray(self.lower, dtype=float)
            hi = np.asarray(self.upper, dtype=float)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise ValueError("box bounds must be 1-D arrays of equal length")
            if not np.all(lo < hi):
                raise ValueError("box requires lower < upper coordinatewise")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection: coordinatewise clamp for a box, identity otherwise."""
        x = np.asarray(x, dtype=float)
        if self.kind == "whole-space":
            return x.copy()
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        if self.kind == "whole-space":
            return bool(np.all(np.isfinite(x)))
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Uniform draw from a box; standard normal for the whole space."""
        if self.kind == "box":
            n = len(self.lower)
            if size is None:
                return rng.uniform(self.lower, self.upper)
            return rng.uniform(self.lower, self.upper, size=(size, n))
        raise ValueError("sampling from the whole space requires explicit bounds")


def box(lower, upper) -> FeasibleSet:
    return FeasibleSet("box", np.asarray(lower, float), np.asarray(upper, float))


def whole_space() -> FeasibleSet:
    return FeasibleSet("whole-space")


def project(feasible: FeasibleSet, x: np.ndarray) -> np.ndarray:
    """Projection onto the feasible set (unique by convexity)."""
    return feasible.project(x)


@dataclass(frozen=True)
class SensingModel:
    """Immutable bundle of per-agent sensing functions, gradients, and noise.

    eval_fn(n, theta) -> (M_n,) observation mean; grad_fn(n, theta) -> (M, M_n)
    gradient.  Both must be deterministic pure maps.  noise_sampler, when set,
    replaces the default Gaussian draw (any finite-variance sampler works).
    """

    n_agents: int
    param_dim: int
    obs_dims: tuple[int, ...]
    eval_fn: Callable[[int, np.ndarray], np.ndarray] = field(repr=False)
    grad_fn: Callable[[int, np.ndarray], np.ndarray] = field(repr=False)
    noise_covs: tuple[np.ndarray, ...] = field(repr=False)
    noise_cov_invs: tuple[np.ndarray, ...] = field(repr=False)
    noise_chols: tuple[np.ndarray, ...] = field(repr=False)
    noise_sampler: Callable[[int, np.random.Generator], np.ndarray] | None = field(
        default=None, repr=False
    )
    spec: dict | None = field(default=None, repr=False)  # JSON description, if built-in

    def eval(self, n: int, theta: np.ndarray) -> np.ndarray:
        return self.eval_fn(n, np.asarray(theta, dtype=float))

    def grad(self, n: int, theta: np.ndarray) -> np.ndarray:
        return self.grad_fn(n, np.asarray(theta, dtype=float))


def _make_model(n_agents, param_dim, obs_dims, eval_fn, grad_fn, noise_covs,
                noise_sampler=None, spec=None) -> SensingModel:
    covs, invs, chols = [], [], []
    for n, R in enumerate(noise_covs):
        R = np.atleast_2d(np.asarray(R, dtype=float))
        if R.shape != (obs_dims[n], obs_dims[n]):
            raise ValueError(f"noise covariance for agent {n} has shape {R.shape}, "
                             f"expected ({obs_dims[n]}, {obs_dims[n]})")
        if not np.allclose(R, R.T):
            raise ValueError(f"noise covariance for agent {n} is not symmetric")
        try:
            C = np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ValueError(f"noise covariance for agent {n} is not positive definite")
        covs.append(R)
        invs.append(np.linalg.inv(R))
        chols.append(C)
    return SensingModel(
        n_agents=n_agents,
        param_dim=param_dim,
        obs_dims=tuple(int(d) for d in obs_dims),
        eval_fn=eval_fn,
        grad_fn=grad_fn,
        noise_covs=tuple(covs),
        noise_cov_invs=tuple(invs),
        noise_chols=tuple(chols),
        noise_sampler=noise_sampler,
        spec=spec,
    )


def pairwise_sine_model(pairs, noise_variance: float, param_dim: int) -> SensingModel:
    """Scalar sensing f_n(theta) = sin(theta_i + theta_j) per agent.

    pairs: one (i, j) component pair per agent, 0-based.  Duplicate pairs are
    allowed (agents may share a sensing function).  Every agent gets the same
    scalar noise variance.
    """
    pairs = [(int(i), int(j)) for (i, j) in pairs]
    for (i, j) in pairs:
        if not (0 <= i < param_dim and 0 <= j < param_dim):
            raise ValueError(f"component pair ({i},{j}) out of range for M={param_dim}")
    if noise_variance <= 0:
        raise ValueError(f"noise variance must be positive, got {noise_variance}")
    n_agents = len(pairs)

    def eval_fn(n, theta):
        i, j = pairs[n]
        return np.array([math.sin(theta[i] + theta[j])])

    def grad_fn(n, theta):
        i, j = pairs[n]
        g = np.zeros((param_dim, 1))
        c = math.cos(theta[i] + theta[j])
        g[i, 0] += c
        g[j, 0] += c
        return g

    spec = {
        "type": "pairwise_sine",
        "pairs": [[i + 1, j + 1] for (i, j) in pairs],
        "variance": float(noise_variance),
        "param_dim": int(param_dim),
    }
    return _make_model(
        n_agents, param_dim, [1] * n_agents, eval_fn, grad_fn,
        [np.array([[noise_variance]])] * n_agents, spec=spec,
    )


def linear_model(matrices, noise_covs) -> SensingModel:
    """Linear sensing f_n(theta) = F_n theta with per-agent SPD noise covariance.

    matrices: per-agent (M_n, M) sensing matrices; grad is the constant F_n^T
    laid out (M, M_n).
    """
    mats = [np.atleast_2d(np.asarray(F, dtype=float)) for F in matrices]
    if len(mats) != len(noise_covs):
        raise ValueError("need one noise covariance per sensing matrix")
    param_dim = mats[0].shape[1]
    for F in mats:
        if F.shape[1] != param_dim:
            raise ValueError("all sensing matrices must share the parameter dimension")
    obs_dims = [F.shape[0] for F in mats]
    grads = [F.T.copy() for F in mats]

    def eval_fn(n, theta):
        return mats[n] @ theta

    def grad_fn(n, theta):
        return grads[n]

    spec = {
        "type": "linear",
        "F": [F.tolist() for F in mats],
        "R": [np.atleast_2d(np.asarray(R, float)).tolist() for R in noise_covs],
    }
    return _make_model(len(mats), param_dim, obs_dims, eval_fn, grad_fn,
                       noise_covs, spec=spec)


def sample_observation(model: SensingModel, n: int, theta: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """One noisy observation y_n = f_n(theta) + zeta_n.

    Default noise is C_n z with C_n the Cholesky factor of R_n and z standard
    normal; a model-level noise_sampler hook overrides this.
    """
    mean = model.eval_fn(n, np.asarray(theta, dtype=float))
    if model.noise_sampler is not None:
        return mean + model.noise_sampler(n, rng)
    z = rng.standard_normal(model.obs_dims[n])
    return mean + model.noise_chols[n] @ z


def finite_difference_gradient(model: SensingModel, n: int, theta: np.ndarray,
                               h: float = FD_STEP_DEFAULT) -> np.ndarray:
    """Central-difference gradient oracle in the M x M_n layout."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros((model.param_dim, model.obs_dims[n]))
    for i in range(model.param_dim):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (model.eval(n, theta + e) - model.eval(n, theta - e)) / (2 * h)
    return out


# -- JSON interchange ---------------------------------------------------------

def model_to_json(model: SensingModel) -> str:
    if model.spec is None:
        raise ValueError("only built-in models carry a serializable description")
    return json.dumps(model.spec, indent=2)


def model_from_spec(obj: dict) -> SensingModel:
    kind = obj.get("type")
    if kind == "pairwise_sine":
        pairs = [(int(i) - 1, int(j) - 1) for (i, j) in obj["pairs"]]
        return pairwise_sine_model(pairs, float(obj["variance"]), int(obj["param_dim"]))
    if kind == "linear":
        return linear_model(obj["F"], obj["R"])
    raise ValueError(f"unknown model type {kind!r}")


def model_from_json(text: str) -> SensingModel:
    return model_from_spec(json.loads(text))


def feasible_set_to_json(feasible: FeasibleSet) -> str:
    if feasible.kind == "box":
        obj = {"kind": "box", "lower": feasible.lower.tolist(),
               "upper": feasible.upper.tolist()}
    else:
        obj = {"kind": "whole-space"}
    return json.dumps(obj, indent=2)


def feasible_set_from_spec(obj: dict) -> FeasibleSet:
    if obj["kind"] == "box":
        return box(obj["lower"], obj["upper"])
    if obj["kind"] == "whole-space":
        return whole_space()
    raise ValueError(f"unknown feasible-set kind {obj['kind']!r}")


def feasible_set_from_json(text: str) -> FeasibleSet:
    return feasible_set_from_spec(json.loads(text))
