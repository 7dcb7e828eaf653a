"""Kernel (HAC-type) estimators of the long-run variance parameters and the trace CI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .covest import _data, sample_cov, trace_star

WINDOWS = ("bartlett", "rectangular", "parzen")


@dataclass(frozen=True)
class KernelSpec:
    """Lag window w(tau / (m + 1)) with lag truncation m."""

    window: str = "bartlett"
    m: int = 1

    def __post_init__(self):
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")
        if self.m < 0:
            raise ValueError("bandwidth must be nonnegative")

    def weights(self) -> np.ndarray:
        """w_{m,tau} for tau = 1..m."""
        tau = np.arange(1, self.m + 1, dtype=float)
        x = tau / (self.m + 1)
        if self.window == "bartlett":
            return 1.0 - x
        if self.window == "rectangular":
            return np.ones_like(x)
        return np.where(x <= 0.5, 1 - 6 * x**2 + 6 * x**3, 2 * (1 - x) ** 3)


def default_bandwidth(n: int) -> int:
    """Smallest integer m with m^3 >= n, i.e. ceil(n^{1/3})."""
    if n < 8:
        raise ValueError("need n >= 8 for the default bandwidth")
    m = int(round(n ** (1.0 / 3.0)))
    while m**3 < n:
        m += 1
    while m > 1 and (m - 1) ** 3 >= n:
        m -= 1
    return m


def resolve_kernel(kernel, n: int) -> KernelSpec:
    """Accept a KernelSpec, a window name (auto bandwidth), or None (Bartlett, auto)."""
    if kernel is None:
        kernel = "bartlett"
    if isinstance(kernel, str):
        kernel = KernelSpec(kernel, default_bandwidth(n))
    if kernel.m >= n:
        raise ValueError(f"bandwidth {kernel.m} must be below n={n}")
    return kernel


def _lagged_mean_product(x: np.ndarray, y: np.ndarray, tau: int, n: int) -> float:
    return float(x[: n - tau] @ y[tau:]) / n


def _check_lag(tau: int, n: int):
    if not 0 <= tau <= n - 1:
        raise IndexError(f"lag {tau} outside 0..{n - 1}")


def _weighted_lrv(acov, kernel: KernelSpec) -> float:
    # acov[tau] for tau = 0..m
    return float(acov[0] + 2.0 * (kernel.weights() @ acov[1:]))


def _centered_squares(Y: np.ndarray) -> np.ndarray:
    sq = Y * Y
    return sq - sq.mean(axis=0)


def gamma_hat(panel, i: int, j: int, tau: int) -> float:
    """Lag-tau cross-covariance of the squared coordinates i and j (1-based)."""
    Y = _data(panel)
    n = Y.shape[0]
    _check_lag(tau, n)
    Z = _centered_squares(Y[:, [i - 1, j - 1]])
    return _lagged_mean_product(Z[:, 0], Z[:, 1], tau, n)


def beta_hat_sq(panel, i: int, j: int, kernel: KernelSpec) -> float:
    Y = _data(panel)
    n = Y.shape[0]
    kernel = resolve_kernel(kernel, n)
    Z = _centered_squares(Y[:, [i - 1, j - 1]])
    acov = [_lagged_mean_product(Z[:, 0], Z[:, 1], t, n) for t in range(kernel.m + 1)]
    return _weighted_lrv(np.array(acov), kernel)


def _centered_products(Y: np.ndarray, i: int, j: int) -> np.ndarray:
    p = Y[:, i - 1] * Y[:, j - 1]
    return p - p.mean()


def cap_gamma_hat(panel, i: int, j: int, tau: int) -> float:
    """Lag-tau autocovariance of the product series Y^(i) Y^(j), centered at its mean."""
    Y = _data(panel)
    n = Y.shape[0]
    _check_lag(tau, n)
    p = _centered_products(Y, i, j)
    return _lagged_mean_product(p, p, tau, n)


def sigma_hat_sq(panel, i: int, j: int, kernel: KernelSpec) -> float:
    Y = _data(panel)
    n = Y.shape[0]
    kernel = resolve_kernel(kernel, n)
    p = _centered_products(Y, i, j)
    acov = [_lagged_mean_product(p, p, t, n) for t in range(kernel.m + 1)]
    return _weighted_lrv(np.array(acov), kernel)


def sigma_tr_hat_sq(panel, kernel=None) -> float:
    """d^{-2} sum_{i,j} beta_hat_sq(i, j).

    The double sum is bilinear in the centered squares, so it collapses to the
    kernel long-run variance of their row sums: O(n d + n m) instead of O(d^2 n m).
    """
    Y = _data(panel)
    n, d = Y.shape
    kernel = resolve_kernel(kernel, n)
    s = _centered_squares(Y).sum(axis=1)
    acov = np.array([_lagged_mean_product(s, s, t, n) for t in range(kernel.m + 1)])
    return _weighted_lrv(acov, kernel) / d**2


def sigma_tr_hat_sq_pairwise(panel, kernel=None) -> float:
    """Reference evaluation of sigma_tr_hat_sq as the explicit d^2 sweep."""
    Y = _data(panel)
    n, d = Y.shape
    kernel = resolve_kernel(kernel, n)
    Z = _centered_squares(Y)
    w = kernel.weights()
    total = 0.0
    for i in range(d):
        for j in range(d):
            acov = np.array(
                [_lagged_mean_product(Z[:, i], Z[:, j], t, n) for t in range(kernel.m + 1)]
            )
            total += acov[0] + 2.0 * (w @ acov[1:])
    return total / d**2


def sum_sigma_hat_sq(panel, kernel=None) -> float:
    """sum_{i,j} sigma_hat_sq(i, j) without forming the d^2 product series.

    Uses sum_{i,j} (Y_t^i Y_t^j - k_ij)(Y_s^i Y_s^j - k_ij)
        = (Y_t'Y_s)^2 - Y_t'K Y_t - Y_s'K Y_s + ||K||_F^2,   K = sample_cov.
    """
    Y = _data(panel)
    n = Y.shape[0]
    kernel = resolve_kernel(kernel, n)
    K = (Y.T @ Y) / n
    q = np.einsum("ti,ij,tj->t", Y, K, Y)
    kf = float(np.sum(K * K))
    acov = np.empty(kernel.m + 1)
    for tau in range(kernel.m + 1):
        dots = np.einsum("ti,ti->t", Y[: n - tau], Y[tau:])
        acov[tau] = (
            np.sum(dots * dots) - q[: n - tau].sum() - q[tau:].sum() + (n - tau) * kf
        ) / n
    return _weighted_lrv(acov, kernel)


def sum_sigma_hat_sq_pairwise(panel, kernel=None) -> float:
    Y = _data(panel)
    n, d = Y.shape
    kernel = resolve_kernel(kernel, n)
    return float(
        sum(sigma_hat_sq(Y, i, j, kernel) for i in range(1, d + 1) for j in range(1, d + 1))
    )


@dataclass(frozen=True)
class TraceInterval:
    lo: float
    hi: float
    center: float
    sigma_hat: float
    sigma_sq_raw: float
    n: int
    d: int
    bandwidth: int
    level: float

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        return {
            "center": self.center, "lo": self.lo, "hi": self.hi,
            "sigma_hat": self.sigma_hat, "sigma_sq_raw": self.sigma_sq_raw,
            "n": self.n, "d": self.d, "bandwidth": self.bandwidth, "level": self.level,
        }


def ci_from_parts(center: float, sigma_sq: float, n: int, level: float) -> tuple:
    if not 0.0 <= level < 1.0:
        raise ValueError("level must lie in [0, 1)")
    sigma = float(np.sqrt(max(sigma_sq, 0.0)))
    half = float(norm.ppf(1.0 - (1.0 - level) / 2.0)) * sigma / np.sqrt(n)
    return center - half, center + half, sigma


def trace_ci(panel, kernel=None, level: float = 0.95) -> TraceInterval:
    """Asymptotic CI for the scaled trace of the population covariance.

    Negative variance estimates are floored at zero for the half-width; the raw
    value is kept in ``sigma_sq_raw``.
    """
    Y = _data(panel)
    n, d = Y.shape
    kernel = resolve_kernel(kernel, n)
    center = trace_star(sample_cov(Y).matrix)
    raw = sigma_tr_hat_sq(Y, kernel)
    lo, hi, sigma = ci_from_parts(center, raw, n, level)
    return TraceInterval(lo, hi, center, sigma, raw, n, d, kernel.m, level)
