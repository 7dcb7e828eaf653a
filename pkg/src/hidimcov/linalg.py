"""Small dense symmetric linear algebra: cyclic Jacobi and jittered factorization."""
from __future__ import annotations

import math

import numpy as np

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class FactorizationError(ArithmeticError):
    pass


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius mass falls below
    ``tol * ||A||_F``. Returns (eigenvalues ascending, eigenvectors as columns).
    """
    a = np.array(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix must be symmetric")
    a = (a + a.T) / 2.0
    n = a.shape[0]
    V = np.eye(n)
    fro = np.linalg.norm(a)
    if n == 1 or fro == 0.0:
        return np.diag(a).copy(), V
    target = tol * fro

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise ArithmeticError("Jacobi iteration did not converge")

    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def jacobi_eigvalsh(A, tol: float = 1e-12) -> np.ndarray:
    return jacobi_eigh(A, tol=tol)[0]


def jittered_factor(C, ladder=JITTER_LADDER):
    """Lower-triangular L with L L' = C + eps*I for the first eps in the ladder that works.

    The ladder entries are relative to trace(C)/dim. Returns (L, eps_used).
    """
    C = np.asarray(C, dtype=float)
    C = (C + C.T) / 2.0
    dim = C.shape[0]
    scale = np.trace(C) / dim if dim else 0.0
    if scale <= 0.0:
        scale = 1.0
    for rel in ladder:
        eps = rel * scale
        try:
            L = np.linalg.cholesky(C + eps * np.eye(dim))
        except np.linalg.LinAlgError:
            continue
        return L, eps
    # exact PSD matrices of deficient rank: fall back to a symmetric square root
    w, V = np.linalg.eigh(C)
    if w.min() < -ladder[-1] * scale:
        raise FactorizationError(
            f"covariance not positive semidefinite (min eigenvalue {w.min():.3e})"
        )
    root = V * np.sqrt(np.clip(w, 0.0, None))
    return root, 0.0
