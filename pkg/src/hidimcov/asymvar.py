"""Analytic long-run variances of bilinear forms of the panel.

For i.i.d. symmetric innovations the centered product series
Y_k(v) Y_k(w) - E(.) decomposes into martingale differences

    ftilde_{0,0} (eps_k^2 - sigma^2) + eps_k sum_{l>=1} ftilde_{l,0} eps_{k-l},

whose terms are mutually uncorrelated.  Dividing the block-sum bounds for the
martingale covariance by the block length and letting it grow leaves the
per-step limits

    alpha^2 = ftilde_00^2 (gamma - sigma^4) + sigma^4 sum_{l>=1} ftilde_{l,0}^2
    beta^2  = ftilde_00 ftilde~_00 (gamma - sigma^4)
              + sigma^4 sum_{l>=1} ftilde_{l,0} ftilde~_{l,0}

which is what this module computes.  `isserlis_lrv_oracle` evaluates the same
quantities a different way (summing Gaussian fourth-moment autocovariances over
lags) and exists to cross-check them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import CoefficientScheme, InnovationSpec, projected_coef
from .weights import WeightPairSet, unit_pairs


@dataclass(frozen=True, eq=False)
class AsymCovKernel:
    beta: np.ndarray
    pairs: WeightPairSet
    sigma_sq: float
    gamma4: float
    alpha_sq: Optional[float] = None

    @property
    def L(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True, eq=False)
class FTable:
    f_tilde_0: np.ndarray  # ftilde_{l,0}, l = 0..L_max
    L_max: int
    J: int


def _cross_lags(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # r[l] = sum_j a_j b_{j+l}, l = 0..len-1
    J = a.shape[0] - 1
    return np.correlate(b, a, mode="full")[J:]


def f_table(scheme: CoefficientScheme, v, w, L_max: Optional[int] = None) -> FTable:
    """ftilde_{l,0}(v, w) for l = 0..L_max (zero beyond the truncation horizon)."""
    if L_max is None:
        L_max = scheme.J
    a = projected_coef(scheme, v)
    b = projected_coef(scheme, w)
    out = np.zeros(L_max + 1)
    sym = _cross_lags(a, b) + _cross_lags(b, a)
    sym[0] = a @ b
    upto = min(L_max, scheme.J)
    out[: upto + 1] = sym[: upto + 1]
    return FTable(out, L_max, scheme.J)


def f_tilde(scheme: CoefficientScheme, v, w, l: int, i: int = 0) -> float:
    """ftilde_{l,i} = sum_{j >= i} f_{l,j}."""
    if l < 0 or i < 0:
        raise ValueError("lag and start index must be nonnegative")
    a = projected_coef(scheme, v)
    b = projected_coef(scheme, w)
    J = scheme.J
    if l > J or i > J - l:
        return 0.0
    j = np.arange(i, J - l + 1)
    if l == 0:
        return float(np.sum(a[j] * b[j]))
    return float(np.sum(a[j] * b[j + l] + b[j] * a[j + l]))


def _check_innov(innov: InnovationSpec):
    # every supported family is symmetric; guard against future additions
    if innov.family not in ("gaussian", "student_t", "two_point"):
        raise ValueError("asymmetric innovations are not supported")


def _lrv_from_f(f1: np.ndarray, f2: np.ndarray, innov: InnovationSpec) -> float:
    s4 = innov.sigma_sq**2
    return float(f1[0] * f2[0] * (innov.gamma4 - s4) + s4 * (f1[1:] @ f2[1:]))


def alpha_sq(scheme, innov: InnovationSpec, v, w, L_max: Optional[int] = None) -> float:
    """Long-run variance of sqrt(n) v'(Sigma_hat - Sigma) w."""
    return beta_sq(scheme, innov, v, w, v, w, L_max)


def beta_sq(scheme, innov: InnovationSpec, v, w, vt, wt, L_max: Optional[int] = None) -> float:
    """Long-run covariance of the (v, w) and (vt, wt) bilinear forms."""
    _check_innov(innov)
    if L_max is not None and L_max < 1:
        raise ValueError("L_max must be >= 1")
    f1 = f_table(scheme, v, w, L_max).f_tilde_0
    f2 = f_table(scheme, vt, wt, L_max).f_tilde_0
    return _lrv_from_f(f1, f2, innov)


def _f_matrix(scheme, pairs: WeightPairSet, L_max: Optional[int]) -> np.ndarray:
    return np.array([f_table(scheme, v, w, L_max).f_tilde_0 for v, w in pairs.pairs])


def beta_matrix(
    scheme, innov: InnovationSpec, pairs: WeightPairSet, L_max: Optional[int] = None
) -> AsymCovKernel:
    _check_innov(innov)
    if L_max is not None and L_max < 1:
        raise ValueError("L_max must be >= 1")
    if pairs.dim != scheme.d:
        raise ValueError("dimension mismatch")
    F = _f_matrix(scheme, pairs, L_max)
    s4 = innov.sigma_sq**2
    beta = (innov.gamma4 - s4) * np.outer(F[:, 0], F[:, 0]) + s4 * (F[:, 1:] @ F[:, 1:].T)
    beta = (beta + beta.T) / 2.0
    alpha = float(beta[0, 0]) if pairs.L == 1 else None
    return AsymCovKernel(beta, pairs, innov.sigma_sq, innov.gamma4, alpha)


def unit_kernel(scheme, innov: InnovationSpec, L_max: Optional[int] = None) -> AsymCovKernel:
    """beta_matrix over the unit pairs (e_j, e_j), j = 1..d."""
    return beta_matrix(scheme, innov, unit_pairs(scheme.d), L_max)


def _is_unit_family(pairs: WeightPairSet) -> bool:
    eye = np.eye(pairs.dim)
    return (
        pairs.L == pairs.dim
        and np.array_equal(pairs.left(), eye)
        and np.array_equal(pairs.right(), eye)
    )


def sigma_tr_sq(kernel: AsymCovKernel) -> float:
    """Asymptotic variance of the trace process at t = 1: d^{-2} sum_{j,k} beta(j,k)."""
    if not _is_unit_family(kernel.pairs):
        raise ValueError("sigma_tr_sq needs the kernel built on (e_j, e_j), j = 1..d")
    d = kernel.L
    return float(kernel.beta.sum() / d**2)


def isserlis_lrv_oracle(
    scheme: CoefficientScheme, v, w, vt, wt, sigma_sq: float = 1.0,
    tau_max: Optional[int] = None, innov: Optional[InnovationSpec] = None,
) -> float:
    """Brute-force Gaussian long-run covariance of the two product series.

    Sums Cov(Y_0(v)Y_0(w), Y_tau(vt)Y_tau(wt)) over |tau| <= tau_max, each term
    expanded by the Gaussian fourth-moment identity into products of lagged
    cross-covariances of the projected scalar processes.
    """
    if innov is not None:
        if innov.family != "gaussian":
            raise ValueError("the Isserlis oracle is exact only for gaussian innovations")
        sigma_sq = innov.sigma_sq
    if tau_max is None:
        tau_max = scheme.J
    proj = {
        name: projected_coef(scheme, x)
        for name, x in (("v", v), ("w", w), ("vt", vt), ("wt", wt))
    }
    J = scheme.J

    def acov(x: str, y: str, tau: int) -> float:
        # Cov(Y_0(x), Y_tau(y)) = sigma^2 sum_j x_j y_{j+tau}
        if tau < 0:
            return acov(y, x, -tau)
        if tau > J:
            return 0.0
        return sigma_sq * float(proj[x][: J + 1 - tau] @ proj[y][tau:])

    lrv = 0.0
    for tau in range(-tau_max, tau_max + 1):
        lrv += acov("v", "vt", tau) * acov("w", "wt", tau)
        lrv += acov("v", "wt", tau) * acov("w", "vt", tau)
    return lrv


def product_lrv_sum(scheme: CoefficientScheme, innov: InnovationSpec, n: int) -> float:
    """sum_{i,j} Var(sqrt(n) Sigma_hat(i, j)), exact at sample size n.

    Each entry's variance is Gamma(0) + 2 sum_{tau<n} (1 - tau/n) Gamma(tau) for the
    autocovariance Gamma of the product series Y^(i) Y^(j). Beyond the Gaussian
    (Isserlis) part, the fourth-cumulant term gamma - 3 sigma^4 is included, so the
    result is exact for every i.i.d. innovation family.
    """
    _check_innov(innov)
    A = scheme.matrix
    J = scheme.J
    s2 = innov.sigma_sq
    kappa4 = innov.gamma4 - 3.0 * s2**2
    total = 0.0
    for tau in range(min(J, n - 1) + 1):
        R = A[: J + 1 - tau].T @ A[tau:]
        g = np.einsum("ki,ki->k", A[: J + 1 - tau], A[tau:])
        G = s2**2 * (np.trace(R) ** 2 + np.sum(R * R.T)) + kappa4 * (g @ g)
        total += G if tau == 0 else 2.0 * (1.0 - tau / n) * G
    return float(total)
