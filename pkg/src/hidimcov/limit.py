"""Gaussian limit objects for the shrinkage and trace statistics, and the
approximating martingale used for diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymvar import beta_matrix, f_table
from .linalg import jittered_factor
from .model import CoefficientScheme, InnovationSpec, _lag_matrix, true_covariance
from .weights import WeightPairSet, as_coords, as_weight, unit_pairs

CONSTRUCTIONS = ("joint", "two_block", "trace")
CHUNK = 4096


@dataclass(frozen=True, eq=False)
class LimitModel:
    """Covariance (per unit time) of a Brownian motion plus its factor.

    joint / two_block: coordinate 0 carries the (v, w) form, coordinates 1..d the
    unit forms. trace: coordinates 0..d-1 are the unit forms only.
    """

    construction: str
    cov: np.ndarray
    factor: np.ndarray
    jitter: float
    d: int
    beta: np.ndarray
    alpha_sq: float = float("nan")
    cross: np.ndarray | None = None
    vw_inner: float = float("nan")

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def unit_slice(self) -> slice:
        return slice(0, self.d) if self.construction == "trace" else slice(1, self.d + 1)

    def to_dict(self) -> dict:
        return {
            "construction": self.construction, "d": self.d, "alpha_sq": self.alpha_sq,
            "vw_inner": self.vw_inner, "jitter": self.jitter, "cov": self.cov.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LimitModel":
        cov = np.asarray(doc["cov"], dtype=float)
        factor, jitter = jittered_factor(cov)
        d = int(doc["d"])
        construction = doc["construction"]
        if construction == "trace":
            scale = d
            beta = cov * scale
            cross = None
        else:
            scale = d + 1 if construction == "joint" else d
            beta = cov[1:, 1:] * scale
            cross_scale = d + 1 if construction == "joint" else math.sqrt(d)
            cross = cov[0, 1:] * cross_scale
        return cls(construction, cov, factor, jitter, d, beta,
                   float(doc.get("alpha_sq", float("nan"))), cross,
                   float(doc.get("vw_inner", float("nan"))))


def build_limit_model(
    scheme: CoefficientScheme, innov: InnovationSpec, v=None, w=None,
    construction: str = "two_block", L_max=None,
) -> LimitModel:
    """Assemble the limit covariance from the analytic long-run covariances.

    joint: every entry divided by d + 1. two_block: Var(B_0) = alpha^2,
    Cov(B_i, B_j) = beta(i, j)/d, Cov(B_0, B_j) = d^{-1/2} beta(v, w, e_j, e_j).
    trace: unit forms only, Cov = beta(i, j)/d.
    """
    if construction not in CONSTRUCTIONS:
        raise ValueError(f"unknown construction {construction!r}")
    d = scheme.d
    if construction == "trace":
        kernel = beta_matrix(scheme, innov, unit_pairs(d), L_max)
        cov = kernel.beta / d
        factor, jitter = jittered_factor(cov)
        return LimitModel("trace", cov, factor, jitter, d, kernel.beta)

    if v is None or w is None:
        raise ValueError(f"{construction} construction needs the pair (v, w)")
    v, w = as_weight(v), as_weight(w)
    units = unit_pairs(d).pairs
    pairs = WeightPairSet(((v, w),) + units)
    B = beta_matrix(scheme, innov, pairs, L_max).beta
    alpha = float(B[0, 0])
    cross = B[0, 1:].copy()
    beta = B[1:, 1:].copy()
    if construction == "joint":
        cov = B / (d + 1)
    else:
        cov = np.empty_like(B)
        cov[0, 0] = alpha
        cov[1:, 1:] = beta / d
        cov[0, 1:] = cov[1:, 0] = cross / math.sqrt(d)
    factor, jitter = jittered_factor(cov)
    return LimitModel(construction, cov, factor, jitter, d, beta, alpha, cross,
                      float(v.coords @ w.coords))


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(chunk,)))


def sample_paths(model: LimitModel, t_grid, reps: int, seed: int) -> np.ndarray:
    """Brownian paths on the grid: array of shape (reps, len(t_grid), dim).

    Increments over [t_{k-1}, t_k] (with t_{-1} = 0) are factor @ N(0, I) scaled by
    sqrt(t_k - t_{k-1}). Draws come in fixed chunks of replications, each with its
    own stream derived from (seed, chunk index).
    """
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    if t.size == 0 or t[0] < 0 or t[-1] > 1 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing within [0, 1]")
    steps = np.sqrt(np.diff(np.concatenate([[0.0], t])))
    dim = model.dim
    k = model.factor.shape[1]
    out = np.empty((reps, t.size, dim))
    for c, start in enumerate(range(0, reps, CHUNK)):
        size = min(CHUNK, reps - start)
        z = _chunk_rng(seed, c).standard_normal((size, t.size, k))
        inc = (z @ model.factor.T) * steps[None, :, None]
        np.cumsum(inc, axis=1, out=out[start:start + size])
    return out


def sample_endpoints(model: LimitModel, reps: int, seed: int) -> np.ndarray:
    return sample_paths(model, [1.0], reps, seed)[:, 0, :]


def shrink_functional(model: LimitModel, endpoint, W: float):
    """(1 - W) B(1)_0 + W (v'w) d^{-1/2} sum_j B(1)_j, vectorized over leading axes."""
    if model.construction == "trace":
        raise ValueError("shrinkage functional needs a joint or two_block model")
    if not 0.0 <= W <= 1.0:
        raise ValueError(f"W={W} outside [0, 1]")
    x = np.asarray(endpoint, dtype=float)
    target = x[..., 1:].sum(axis=-1) / math.sqrt(model.d)
    return (1.0 - W) * x[..., 0] + W * model.vw_inner * target


def shrink_functional_variance(model: LimitModel, W: float) -> float:
    """Closed-form variance of the shrinkage functional under the model covariance."""
    c = np.zeros(model.dim)
    c[0] = 1.0 - W
    c[1:] = W * model.vw_inner / math.sqrt(model.d)
    return float(c @ model.cov @ c)


def two_block_variance_terms(alpha_sq: float, beta, cross, vw: float, W: float) -> tuple:
    """The three terms of Var(B'(W)): nonparametric, target, and cross term."""
    beta = np.asarray(beta, dtype=float)
    d = beta.shape[0]
    nonparam = (1.0 - W) ** 2 * alpha_sq
    target = W**2 * vw**2 * beta.sum() / d**2
    mixed = 2.0 * (1.0 - W) * W * vw * np.sum(cross) / d
    return nonparam, target, mixed


def trace_limit_functional(model: LimitModel, sample):
    """d^{-1/2} sum over the unit-form coordinates."""
    x = np.asarray(sample, dtype=float)
    return x[..., model.unit_slice()].sum(axis=-1) / math.sqrt(model.d)


def trace_limit_variance(model: LimitModel) -> float:
    block = model.cov[model.unit_slice(), model.unit_slice()]
    return float(block.sum() / model.d)


def martingale_path(
    scheme: CoefficientScheme, innov: InnovationSpec, eps, v, w, length: int
) -> np.ndarray:
    """M_1, ..., M_length built from the ftilde_{l,0}(v, w) coefficients.

    ``eps`` holds eps_{-J}, ..., eps_n (index 0 is eps_{-J}), the layout produced
    by :func:`hidimcov.model.draw_innovations`; increment k uses eps_k and its J
    predecessors, aligned with the observation times of the panel.
    """
    eps = np.asarray(eps, dtype=float)
    J = scheme.J
    if eps.shape[0] < length + J + 1:
        raise ValueError("innovation stream too short")
    f = f_table(scheme, v, w, J).f_tilde_0
    H = _lag_matrix(eps[: length + J + 1], J)
    current = H[:, 0]
    inc = f[0] * (current**2 - innov.sigma_sq) + current * (H[:, 1:] @ f[1:])
    return np.cumsum(inc)


def bilinear_sum(scheme: CoefficientScheme, innov: InnovationSpec, Y, v, w) -> float:
    """D_nn = sum_i (v'Y_i)(w'Y_i) - n v'Sigma w."""
    a, b = as_coords(v), as_coords(w)
    Sigma = true_covariance(scheme, innov)
    Y = np.asarray(Y, dtype=float)
    return float(np.sum((Y @ a) * (Y @ b)) - Y.shape[0] * (a @ Sigma @ b))
