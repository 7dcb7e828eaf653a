"""Sample covariances, bilinear-form paths, scaled matrix norms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import jacobi_eigvalsh
from .model import SeriesPanel
from .weights import WeightPairSet, as_coords

MAX_GRID_POINTS = 2048


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    matrix: np.ndarray
    n_used: int
    normalized: bool


@dataclass(frozen=True, eq=False)
class FormPath:
    """Step-function values of L scaled forms on a time grid in [0, 1]."""

    grid: np.ndarray
    values: np.ndarray  # len(grid) x L
    scaling: str = "single"

    @property
    def L(self) -> int:
        return self.values.shape[1]


def _data(panel) -> np.ndarray:
    data = panel.data if isinstance(panel, SeriesPanel) else np.asarray(panel, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("empty panel")
    return data


def sample_cov(panel) -> CovarianceEstimate:
    """Uncentered (1/n) sum_i Y_i Y_i'."""
    Y = _data(panel)
    n = Y.shape[0]
    S = (Y.T @ Y) / n
    return CovarianceEstimate((S + S.T) / 2.0, n, True)


def partial_sum_cov(panel, k: int) -> CovarianceEstimate:
    Y = _data(panel)
    if not 0 <= k <= Y.shape[0]:
        raise IndexError(f"k={k} outside 0..{Y.shape[0]}")
    head = Y[:k]
    S = head.T @ head
    return CovarianceEstimate((S + S.T) / 2.0, k, False)


def _check_sigma(Sigma, d: int) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (d, d):
        raise ValueError(f"Sigma shape {Sigma.shape} does not match dimension {d}")
    return Sigma


def xi_terms(panel, Sigma, v, w) -> np.ndarray:
    """xi_i = (v'Y_i)(w'Y_i) - v'Sigma w, centered by the population matrix."""
    Y = _data(panel)
    Sigma = _check_sigma(Sigma, Y.shape[1])
    a, b = as_coords(v), as_coords(w)
    if a.shape != (Y.shape[1],) or b.shape != (Y.shape[1],):
        raise ValueError("weight dimension mismatch")
    return (Y @ a) * (Y @ b) - a @ Sigma @ b


def default_grid(n: int) -> np.ndarray:
    """{k/n}, thinned to at most MAX_GRID_POINTS points (0 and 1 always kept)."""
    if n + 1 <= MAX_GRID_POINTS:
        return np.arange(n + 1) / n
    ks = np.unique(np.round(np.linspace(0, n, MAX_GRID_POINTS)).astype(int))
    return ks / n


def _grid_index(grid, n: int) -> tuple:
    grid = np.asarray(grid, dtype=float) if grid is not None else default_grid(n)
    if np.any(grid < 0) or np.any(grid > 1):
        raise ValueError("grid points must lie in [0, 1]")
    # floor(n t), guarded against representation error such as 0.3 * 10 = 2.9999...
    k = np.floor(grid * n + 1e-9).astype(int)
    return grid, np.clip(k, 0, n)


def _form_sums(Y, Sigma, V, W) -> np.ndarray:
    # column j: cumulative sums of (v_j'Y_i)(w_j'Y_i) - v_j'Sigma w_j, with a leading 0 row
    xi = (Y @ V.T) * (Y @ W.T) - np.einsum("ld,de,le->l", V, Sigma, W)
    out = np.zeros((Y.shape[0] + 1, V.shape[0]))
    np.cumsum(xi, axis=0, out=out[1:])
    return out


def d_path(panel, Sigma, v, w, grid=None) -> FormPath:
    """n^{-1/2} v'(partial_sum_cov(floor(nt)) - floor(nt) Sigma) w on the grid."""
    Y = _data(panel)
    n, d = Y.shape
    Sigma = _check_sigma(Sigma, d)
    a, b = as_coords(v), as_coords(w)
    if a.shape != (d,) or b.shape != (d,):
        raise ValueError("weight dimension mismatch")
    grid, k = _grid_index(grid, n)
    sums = _form_sums(Y, Sigma, a[None, :], b[None, :])
    return FormPath(grid, sums[k] / np.sqrt(n), "single")


def multi_d_path(panel, Sigma, pairs: WeightPairSet, grid=None) -> FormPath:
    """(nL)^{-1/2} D_{n,floor(nt)}(v_j, w_j) for every pair j."""
    Y = _data(panel)
    n, d = Y.shape
    Sigma = _check_sigma(Sigma, d)
    if pairs.dim != d:
        raise ValueError("weight dimension mismatch")
    grid, k = _grid_index(grid, n)
    sums = _form_sums(Y, Sigma, pairs.left(), pairs.right())
    return FormPath(grid, sums[k] / np.sqrt(n * pairs.L), "multi")


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    return A


def trace_star(A) -> float:
    """d^{-1} tr(A); equals the mean eigenvalue, so no decomposition is needed."""
    A = _square(A)
    return float(np.trace(A) / A.shape[0])


def trace_norm(A) -> float:
    """Sum of absolute eigenvalues of a symmetric matrix (Jacobi eigensolver)."""
    return float(np.abs(jacobi_eigvalsh(_square(A))).sum())


def trace_norm_star(A) -> float:
    A = _square(A)
    return trace_norm(A) / A.shape[0]


def frobenius_star(A) -> float:
    A = _square(A)
    return float(np.sqrt(np.sum(A * A) / A.shape[0]))


def schatten(A, p: float) -> float:
    A = _square(A)
    if p < 1:
        raise ValueError("Schatten norms need p >= 1")
    s = np.linalg.svd(A, compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    return float(np.sum(s**p) ** (1.0 / p))


def pseudometric(A, B, v, w) -> float:
    """|v'(A - B)w|."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    a, b = as_coords(v), as_coords(w)
    if A.shape != B.shape or A.shape != (a.shape[0], b.shape[0]):
        raise ValueError("dimension mismatch")
    return float(abs(a @ (A - B) @ b))


def trace_process(panel, Sigma, grid=None) -> FormPath:
    """sqrt(n) (tr*(Sigma_hat_n(t)) - tr*(floor(nt)/n Sigma)), with Sigma_hat_n(t) = partial sum / n."""
    Y = _data(panel)
    n, d = Y.shape
    Sigma = _check_sigma(Sigma, d)
    grid, k = _grid_index(grid, n)
    sq = np.sum(Y * Y, axis=1) - np.trace(Sigma)
    sums = np.concatenate([[0.0], np.cumsum(sq)])
    return FormPath(grid, (sums[k] / (d * np.sqrt(n)))[:, None], "single")
