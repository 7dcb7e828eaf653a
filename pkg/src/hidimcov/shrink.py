"""Linear shrinkage toward mu*I with the MSE-optimal weight and its plug-in estimate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .asymvar import product_lrv_sum
from .covest import CovarianceEstimate, _data, frobenius_star, pseudometric, sample_cov, trace_star
from .lrvest import resolve_kernel, sum_sigma_hat_sq
from .model import CoefficientScheme, InnovationSpec, draw_innovations, panel_from_innovations, true_covariance


@dataclass(frozen=True, eq=False)
class ShrinkageResult:
    sigma_s: np.ndarray
    W_used: float
    W_source: str
    mu_hat: float
    raw_W: float
    numerator: float
    denominator: float
    extra: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        return {
            "W_used": self.W_used, "W_source": self.W_source, "raw_W": self.raw_W,
            "mu_hat": self.mu_hat, "numerator": self.numerator,
            "denominator": self.denominator, **self.extra,
        }


def _matrix(cov) -> np.ndarray:
    return cov.matrix if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=float)


def mu_hat(cov) -> float:
    return trace_star(_matrix(cov))


def shrink_matrix(cov, W: float, mu: float) -> np.ndarray:
    """(1 - W) cov + W mu I."""
    if not 0.0 <= W <= 1.0:
        raise ValueError(f"shrinkage weight {W} outside [0, 1]")
    S = _matrix(cov)
    out = (1.0 - W) * S
    out[np.diag_indices_from(out)] += W * mu
    return out


def true_shrunk(Sigma, W: float) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=float)
    return shrink_matrix(Sigma, W, trace_star(Sigma))


def _clamp(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def w_star_oracle(
    scheme: CoefficientScheme, innov: InnovationSpec, n: int, d=None,
    method: str = "analytic", reps: int = 10_000, seed=0,
) -> dict:
    """Optimal weight E||S - Sigma||*^2 / E||mu I - S||*^2 for sample size n.

    The denominator splits exactly into ||mu I - Sigma||*^2 + numerator because
    E S = Sigma kills the cross term. ``method="mc"`` replaces the exact
    numerator by a Monte Carlo average over ``reps`` simulated panels.
    """
    if d is not None and d != scheme.d:
        raise ValueError(f"d={d} does not match the scheme dimension {scheme.d}")
    d = scheme.d
    Sigma = true_covariance(scheme, innov)
    mu = trace_star(Sigma)
    bias = frobenius_star(mu * np.eye(d) - Sigma) ** 2
    if method == "analytic":
        numerator = product_lrv_sum(scheme, innov, n) / (n * d)
    elif method == "mc":
        if reps < 10_000:
            raise ValueError("Monte Carlo oracle needs at least 10^4 replications")
        rng = np.random.default_rng(seed)
        losses = np.empty(reps)
        for r in range(reps):
            Y = panel_from_innovations(scheme, draw_innovations(innov, n, scheme.J, rng))
            losses[r] = frobenius_star(sample_cov(Y).matrix - Sigma) ** 2
        numerator = float(np.mean(losses))
    else:
        raise ValueError(f"unknown method {method!r}")
    denominator = bias + numerator
    raw = numerator / denominator if denominator > 0 else 1.0
    return {"W_star": _clamp(raw), "raw": raw, "numerator": numerator, "denominator": denominator}


def w_star_hat(panel, kernel=None) -> dict:
    """Plug-in weight: (nd)^{-1} sum sigma_hat^2(i,j) over ||mu_hat I - S||*^2."""
    Y = _data(panel)
    n, d = Y.shape
    kernel = resolve_kernel(kernel, n)
    S = sample_cov(Y).matrix
    mu = trace_star(S)
    numerator = max(sum_sigma_hat_sq(Y, kernel) / (n * d), 0.0)
    denominator = frobenius_star(mu * np.eye(d) - S) ** 2
    if denominator == 0.0:
        raw = 1.0
    else:
        raw = numerator / denominator
    return {
        "W_hat": _clamp(raw), "raw": raw, "numerator": numerator,
        "denominator": denominator, "bandwidth": kernel.m,
    }


def shrink_estimate(panel, kernel=None, weight="estimate", oracle: dict | None = None) -> ShrinkageResult:
    """Shrunken covariance with the weight chosen by ``weight``.

    ``weight`` is ``"estimate"`` (plug-in), a float in [0, 1] (fixed), or
    ``"oracle"`` together with the output of :func:`w_star_oracle`.
    """
    Y = _data(panel)
    S = sample_cov(Y).matrix
    mu = trace_star(S)
    if weight == "estimate":
        est = w_star_hat(Y, kernel)
        W, source, raw, num, den = est["W_hat"], "estimated", est["raw"], est["numerator"], est["denominator"]
        extra = {"bandwidth": est["bandwidth"]}
    elif weight == "oracle":
        if oracle is None:
            raise ValueError("oracle weight requested without oracle quantities")
        W, source, raw = oracle["W_star"], "oracle", oracle["raw"]
        num, den = oracle["numerator"], oracle["denominator"]
        extra = {}
    else:
        W = float(weight)
        if not 0.0 <= W <= 1.0:
            raise ValueError(f"fixed weight {W} outside [0, 1]")
        source, raw, num, den, extra = "fixed", W, float("nan"), float("nan"), {}
    return ShrinkageResult(shrink_matrix(S, W, mu), W, source, mu, raw, num, den, extra)


def compare_oracle(panel, Sigma, v, w, kernel=None, W_star: float | None = None,
                   W_hat: float | None = None) -> dict:
    """Pseudometric distances of the data-driven estimator to the two oracle estimators.

    Returns |v'(S^s(W_hat) - S^s(W*))w| (sample oracle) and
    |v'(S^s(W_hat) - Sigma_0^s(W*))w| (population oracle).
    """
    Y = _data(panel)
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (Y.shape[1], Y.shape[1]):
        raise ValueError("dimension mismatch")
    if W_star is None:
        raise ValueError("W_star is required (see w_star_oracle)")
    S = sample_cov(Y).matrix
    mu = trace_star(S)
    if W_hat is None:
        W_hat = w_star_hat(Y, kernel)["W_hat"]
    est = shrink_matrix(S, W_hat, mu)
    return {
        "delta_hat_vs_oraclehat": pseudometric(est, shrink_matrix(S, W_star, mu), v, w),
        "delta_hat_vs_pop_oracle": pseudometric(est, true_shrunk(Sigma, W_star), v, w),
        "W_hat": W_hat,
        "W_star": W_star,
    }
