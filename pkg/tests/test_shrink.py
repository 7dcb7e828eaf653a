import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hidimcov.covest import frobenius_star, sample_cov, trace_star
from hidimcov.linalg import jacobi_eigvalsh
from hidimcov.lrvest import KernelSpec
from hidimcov.mc import staggered_ar1_scheme
from hidimcov.model import CoefficientScheme, InnovationSpec, simulate, true_covariance
from hidimcov.shrink import (
    compare_oracle, mu_hat, shrink_estimate, shrink_matrix, true_shrunk, w_star_hat, w_star_oracle,
)

G = InnovationSpec()


def test_mu_hat():
    assert mu_hat(np.diag([1.0, 2.0, 3.0])) == 2.0
    assert mu_hat(np.eye(7)) == 1.0
    assert mu_hat(np.zeros((3, 3))) == 0.0
    assert mu_hat(sample_cov(np.eye(2))) == 0.5


def test_shrink_matrix_endpoints():
    S = np.array([[2.0, 1.0], [1.0, 4.0]])
    assert np.array_equal(shrink_matrix(S, 0.0, 3.0), S)
    assert np.array_equal(shrink_matrix(S, 1.0, 3.0), 3.0 * np.eye(2))
    assert np.allclose(np.diag(shrink_matrix(np.diag([1.0, 5.0]), 0.25, 3.0)), [1.5, 4.5])
    with pytest.raises(ValueError):
        shrink_matrix(S, 1.5, 3.0)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (5, 5), elements=st.floats(-5, 5, allow_nan=False)), st.floats(0, 1), st.floats(-3, 3))
def test_spectral_identity(X, W, mu):
    S = X + X.T
    got = jacobi_eigvalsh(shrink_matrix(S, W, mu))
    expect = np.sort((1 - W) * jacobi_eigvalsh(S) + W * mu)
    assert np.allclose(got, expect, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (6, 4), elements=st.floats(-5, 5, allow_nan=False)), st.floats(0, 1))
def test_trace_preservation(X, W):
    S = X.T @ X
    m = trace_star(S)
    assert trace_star(shrink_matrix(S, W, m)) == pytest.approx(m, rel=1e-12, abs=1e-12)
    assert trace_star(true_shrunk(S, W)) == pytest.approx(m, rel=1e-12, abs=1e-12)


def test_true_shrunk():
    for W in (0.0, 0.3, 1.0):
        assert np.allclose(true_shrunk(np.eye(4), W), np.eye(4))
    S = np.diag([1.0, 3.0])
    assert np.array_equal(true_shrunk(S, 0.0), S)


def test_oracle_perfect_target():
    scheme = CoefficientScheme.from_dict(staggered_ar1_scheme(5, 0.0, [1.0], J=16))
    assert np.allclose(true_covariance(scheme, G), np.eye(5))
    orc = w_star_oracle(scheme, G, 50)
    assert orc["W_star"] == 1.0
    assert orc["denominator"] == pytest.approx(orc["numerator"])


def test_oracle_vanishes_with_n():
    scheme = CoefficientScheme("ar1_geometric", d=4, J=64, params={"rho": [0.0, 0.3, 0.6, 0.9]})
    ws = [w_star_oracle(scheme, G, n)["W_star"] for n in (100, 1000, 10_000, 100_000)]
    assert ws == sorted(ws, reverse=True) and ws[-1] < 1e-3


def test_oracle_d1_white_noise():
    orc = w_star_oracle(CoefficientScheme("white_noise", d=1), G, 100)
    assert orc["numerator"] == pytest.approx(2 / 100)
    assert orc["denominator"] == pytest.approx(2 / 100)
    assert orc["W_star"] == 1.0


@pytest.mark.parametrize("innov", [G, InnovationSpec("student_t", 1.0, df=9), InnovationSpec("two_point")])
def test_oracle_numerator_matches_monte_carlo(innov):
    scheme = CoefficientScheme("ar1_geometric", d=3, J=16, params={"rho": [0.2, -0.5, 0.7]})
    exact = w_star_oracle(scheme, innov, 40)
    mc = w_star_oracle(scheme, innov, 40, method="mc", reps=10_000, seed=1)
    # MC error of a mean of squared errors at 10^4 reps is a few percent
    assert mc["numerator"] == pytest.approx(exact["numerator"], rel=0.05)
    # denominator identity ||mu I - Sigma||^2 + numerator
    Sigma = true_covariance(scheme, innov)
    bias = frobenius_star(trace_star(Sigma) * np.eye(3) - Sigma) ** 2
    assert exact["denominator"] == pytest.approx(bias + exact["numerator"], rel=1e-14)


def test_oracle_denominator_identity_by_simulation():
    scheme = CoefficientScheme("ar1_geometric", d=3, J=16, params={"rho": [0.2, -0.5, 0.7]})
    Sigma = true_covariance(scheme, G)
    mu = trace_star(Sigma)
    rng = np.random.default_rng(2)
    dens = []
    for _ in range(10_000):
        S = sample_cov(simulate(scheme, G, 40, rng)).matrix
        dens.append(frobenius_star(mu * np.eye(3) - S) ** 2)
    exact = w_star_oracle(scheme, G, 40)["denominator"]
    se = np.std(dens) / np.sqrt(len(dens))
    assert abs(np.mean(dens) - exact) <= 3 * se


def test_oracle_input_checks():
    scheme = CoefficientScheme("white_noise", d=2)
    with pytest.raises(ValueError):
        w_star_oracle(scheme, G, 10, d=3)
    with pytest.raises(ValueError):
        w_star_oracle(scheme, G, 10, method="mc", reps=100)


def test_w_hat_zero_denominator():
    Y = np.tile([[1.0, 1.0], [1.0, -1.0]], (4, 1))
    assert np.allclose(sample_cov(Y).matrix, np.eye(2))
    est = w_star_hat(Y, KernelSpec("bartlett", 2))
    assert est["denominator"] == 0.0 and est["numerator"] > 0 and est["W_hat"] == 1.0


def test_w_hat_negative_numerator_floored():
    Y = np.tile([[1.0, 2.0], [2.0, 1.0]], (4, 1))
    est = w_star_hat(Y, KernelSpec("rectangular", 3))
    assert est["numerator"] == 0.0 and est["W_hat"] == 0.0 and est["denominator"] > 0


def test_w_hat_clamped_above():
    # nearly orthogonal columns of equal norm: S is almost mu_hat I, so the ratio explodes
    from scipy.linalg import hadamard

    rng = np.random.default_rng(3)
    Y = hadamard(16)[:, 1:5] + 0.01 * rng.standard_normal((16, 4))
    est = w_star_hat(Y, KernelSpec("bartlett", 2))
    assert est["raw"] > 1.0 and est["W_hat"] == 1.0


def test_shrink_estimate_modes():
    rng = np.random.default_rng(4)
    Y = rng.standard_normal((60, 4))
    S = sample_cov(Y).matrix
    assert np.array_equal(shrink_estimate(Y, weight=0.0).sigma_s, S)
    assert np.allclose(shrink_estimate(Y, weight=1.0).sigma_s, trace_star(S) * np.eye(4))
    est = shrink_estimate(Y)
    assert est.W_source == "estimated" and 0.0 <= est.W_used <= 1.0
    assert set(est.diagnostics()) >= {"W_used", "raw_W", "mu_hat", "numerator", "denominator"}
    with pytest.raises(ValueError):
        shrink_estimate(Y, weight="oracle")
    with pytest.raises(ValueError):
        shrink_estimate(Y, weight=-0.1)


def test_shrink_estimate_oracle_mode():
    scheme = CoefficientScheme("ar1_geometric", d=3, J=16, params={"rho": 0.4})
    Y = simulate(scheme, G, 100, 5)
    orc = w_star_oracle(scheme, G, 100)
    res = shrink_estimate(Y, weight="oracle", oracle=orc)
    assert res.W_used == orc["W_star"] and res.W_source == "oracle"


def test_shrinkage_regularizes_singular_covariance():
    scheme = CoefficientScheme("ar1_geometric", d=30, J=64, params={"rho": np.linspace(-0.8, 0.8, 30)})
    Y = simulate(scheme, G, 25, 6)
    S = sample_cov(Y).matrix
    assert np.linalg.matrix_rank(S) < 30
    res = shrink_estimate(Y)
    assert res.W_used > 0
    assert jacobi_eigvalsh(res.sigma_s).min() >= res.W_used * res.mu_hat * (1 - 1e-9)


def test_compare_oracle_forced_cases():
    scheme = CoefficientScheme("ar1_geometric", d=4, J=32, params={"rho": 0.5})
    Y = simulate(scheme, G, 200, 7)
    Sigma = true_covariance(scheme, G)
    v = w = np.eye(4)[0]
    W_star = w_star_oracle(scheme, G, 200)["W_star"]
    out = compare_oracle(Y, Sigma, v, w, W_star=W_star, W_hat=W_star)
    assert out["delta_hat_vs_oraclehat"] == 0.0
    out = compare_oracle(Y, sample_cov(Y).matrix, v, w, W_star=W_star, W_hat=W_star)
    assert out["delta_hat_vs_pop_oracle"] == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        compare_oracle(Y, np.eye(3), v, w, W_star=0.5)


def test_dominance_small():
    scheme = CoefficientScheme.from_dict(staggered_ar1_scheme(20, 0.3, [1.0, 1.5, 2.0], J=64))
    Sigma = true_covariance(scheme, G)
    W = w_star_oracle(scheme, G, 40)["W_star"]
    rng = np.random.default_rng(8)
    gains = []
    for _ in range(300):
        S = sample_cov(simulate(scheme, G, 40, rng)).matrix
        gains.append(frobenius_star(S - Sigma) ** 2
                     - frobenius_star(shrink_matrix(S, W, trace_star(S)) - Sigma) ** 2)
    assert np.mean(gains) > 2 * np.std(gains, ddof=1) / np.sqrt(len(gains))
