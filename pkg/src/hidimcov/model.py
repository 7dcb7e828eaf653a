"""Causal linear-process panels driven by one shared innovation stream.

Every coordinate is a truncated moving average of the same i.i.d. sequence,

    Y_i^(nu) = sum_{j=0}^{J} c_j^(nu) eps_{i-j},

so cross-sectional dependence enters only through the common innovations.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DEFAULT_J = 512

INNOVATION_FAMILIES = ("gaussian", "student_t", "two_point")
SCHEME_KINDS = ("white_noise", "ar1_geometric", "power_decay", "table")


@dataclass(frozen=True)
class InnovationSpec:
    """Distribution of the i.i.d. innovations.

    All families are symmetric, so the third moment vanishes. ``student_t`` is
    rescaled to variance ``sigma_sq``; ``two_point`` puts mass 1/2 on
    +/- sqrt(sigma_sq).
    """

    family: str = "gaussian"
    sigma_sq: float = 1.0
    df: Optional[float] = None
    delta_margin: float = 0.5

    def __post_init__(self):
        if self.family not in INNOVATION_FAMILIES:
            raise ValueError(f"unknown innovation family {self.family!r}")
        if not self.sigma_sq > 0:
            raise ValueError("sigma_sq must be positive")
        if not self.delta_margin > 0:
            raise ValueError("delta_margin must be positive")
        if self.family == "student_t":
            if self.df is None:
                raise ValueError("student_t innovations need df")
            if not self.df > 4 + self.delta_margin:
                raise ValueError(
                    f"student_t needs df > 4 + delta_margin = {4 + self.delta_margin}"
                )

    @property
    def gamma4(self) -> float:
        """Fourth moment E eps^4."""
        s2 = self.sigma_sq**2
        if self.family == "gaussian":
            return 3.0 * s2
        if self.family == "student_t":
            return s2 * (3.0 + 6.0 / (self.df - 4.0))
        return s2

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        sd = math.sqrt(self.sigma_sq)
        if self.family == "gaussian":
            return sd * rng.standard_normal(size)
        if self.family == "student_t":
            scale = math.sqrt((self.df - 2.0) / self.df)
            return sd * scale * rng.standard_t(self.df, size)
        return sd * (2.0 * rng.integers(0, 2, size) - 1.0)

    def to_dict(self) -> dict:
        out = {"family": self.family, "sigma_sq": self.sigma_sq, "params": {}}
        if self.df is not None:
            out["params"]["df"] = self.df
        out["params"]["delta_margin"] = self.delta_margin
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "InnovationSpec":
        params = dict(doc.get("params") or {})
        family = doc.get("family", "gaussian")
        if family == "two_point_symmetric":
            family = "two_point"
        sigma_sq = doc.get("sigma_sq")
        if sigma_sq is None and "scale" in params:
            sigma_sq = float(params["scale"]) ** 2
        return cls(
            family=family,
            sigma_sq=float(1.0 if sigma_sq is None else sigma_sq),
            df=params.get("df"),
            delta_margin=float(params.get("delta_margin", 0.5)),
        )


@dataclass(frozen=True, eq=False)
class CoefficientScheme:
    """Generator of the MA coefficients c_j^(nu), j = 0..J, nu = 1..d.

    ``params`` holds per-kind parameters: ``rho`` (ar1_geometric), ``scale``
    (power_decay), ``table`` (a (J+1) x d array, or a length J+1 vector shared
    by all coordinates).
    """

    kind: str
    d: int
    J: int = DEFAULT_J
    theta: float = 0.25
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.d < 1 or self.J < 1:
            raise ValueError("d and J must be positive")
        if not 0.0 < self.theta < 0.5:
            raise ValueError("theta must lie in (0, 1/2)")
        object.__setattr__(self, "_matrix", self._build())

    def _per_coord(self, key: str, default=None) -> np.ndarray:
        value = self.params.get(key, default)
        if value is None:
            raise ValueError(f"{self.kind} scheme needs parameter {key!r}")
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            arr = np.full(self.d, float(arr))
        if arr.shape != (self.d,):
            raise ValueError(f"{key!r} must be a scalar or have length d={self.d}")
        return arr

    def _build(self) -> np.ndarray:
        J, d = self.J, self.d
        lags = np.arange(J + 1, dtype=float)
        if self.kind == "white_noise":
            mat = np.zeros((J + 1, d))
            mat[0] = 1.0
        elif self.kind == "ar1_geometric":
            rho = self._per_coord("rho")
            if np.any(np.abs(rho) >= 1):
                raise ValueError("ar1 coefficients need |rho| < 1")
            mat = rho[None, :] ** lags[:, None]
        elif self.kind == "power_decay":
            scale = self._per_coord("scale", 1.0)
            decay = np.maximum(lags, 1.0) ** -(0.75 + self.theta / 2.0)
            mat = decay[:, None] * scale[None, :]
        else:
            table = np.asarray(self.params.get("table"), dtype=float)
            if table.ndim == 1:
                table = np.repeat(table[:, None], d, axis=1)
            if table.ndim != 2 or table.shape[1] != d or table.shape[0] > J + 1:
                raise ValueError("table must have shape (<= J+1, d)")
            mat = np.zeros((J + 1, d))
            mat[: table.shape[0]] = table
        mat = np.ascontiguousarray(mat)
        mat.setflags(write=False)
        return mat

    @property
    def matrix(self) -> np.ndarray:
        """Read-only (J+1) x d coefficient array; row j holds lag j."""
        return self._matrix

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.kind, self.d, self.J, self.theta]).encode())
        h.update(self._matrix.tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "theta": self.theta, "J": self.J, "d": self.d}
        for key, value in self.params.items():
            out[key] = np.asarray(value).tolist()
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "CoefficientScheme":
        reserved = {"kind", "theta", "J", "d", "innovations", "schema", "params"}
        params = {k: v for k, v in doc.items() if k not in reserved}
        params.update(doc.get("params") or {})
        return cls(
            kind=doc["kind"],
            d=int(doc["d"]),
            J=int(doc.get("J", DEFAULT_J)),
            theta=float(doc.get("theta", 0.25)),
            params=params,
        )


@dataclass(frozen=True, eq=False)
class SeriesPanel:
    """n x d observation block; row i is Y_i'."""

    data: np.ndarray
    seed: Optional[int] = None
    scheme_digest: Optional[str] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("panel data must be a nonempty n x d matrix")
        if not np.all(np.isfinite(data)):
            raise ValueError("panel contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def coef(scheme: CoefficientScheme, nu: int, j: int) -> float:
    """c_j^(nu) with 1-based coordinate index; zero beyond the horizon."""
    if not 1 <= nu <= scheme.d:
        raise IndexError(f"coordinate {nu} outside 1..{scheme.d}")
    if j < 0:
        raise IndexError("lag must be nonnegative")
    if j > scheme.J:
        return 0.0
    return float(scheme.matrix[j, nu - 1])


def verify_assumption_a(scheme: CoefficientScheme) -> dict:
    """Report the smallest C with c_j^2 <= C j^(-3/2-theta) over lags 1..J.

    The check fails when the envelope ratio peaks at the horizon, i.e. the
    coefficients decay too slowly for any finite constant.
    """
    if scheme.J < 2:
        raise ValueError("need J >= 2")
    lags = np.arange(1, scheme.J + 1, dtype=float)
    ratio = np.max(scheme.matrix[1:] ** 2, axis=1) * lags ** (1.5 + scheme.theta)
    c_bound = float(ratio.max())
    if c_bound == 0.0:
        return {"c_bound": 0.0, "worst_j": 1, "pass": True}
    worst_j = int(np.argmax(ratio >= c_bound * (1 - 1e-9))) + 1
    ok = math.isfinite(c_bound) and worst_j < scheme.J
    return {"c_bound": c_bound, "worst_j": worst_j, "pass": bool(ok)}


def _lag_matrix(eps: np.ndarray, J: int) -> np.ndarray:
    # row i, column j holds eps_{i-j} for observation i = 1..n
    windows = np.lib.stride_tricks.sliding_window_view(eps, J + 1)
    return np.ascontiguousarray(windows[1:, ::-1])


def draw_innovations(innov: InnovationSpec, n: int, J: int, seed) -> np.ndarray:
    """eps_{-J}, ..., eps_n as one array (index 0 is eps_{-J})."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return innov.draw(rng, n + J + 1)


def panel_from_innovations(scheme: CoefficientScheme, eps: np.ndarray) -> np.ndarray:
    n = eps.shape[0] - scheme.J - 1
    if n < 1:
        raise ValueError("innovation stream too short for the horizon")
    return _lag_matrix(eps, scheme.J) @ scheme.matrix


def simulate(
    scheme: CoefficientScheme, innov: InnovationSpec, n: int, seed
) -> SeriesPanel:
    """Draw a panel of length n; same (scheme, innov, n, seed) gives identical bits."""
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = draw_innovations(innov, n, scheme.J, seed)
    data = panel_from_innovations(scheme, eps)
    seed_value = int(seed) if isinstance(seed, (int, np.integer)) else None
    return SeriesPanel(data, seed=seed_value, scheme_digest=scheme.digest())


def projected_coef(scheme: CoefficientScheme, w) -> np.ndarray:
    """Coefficients of the scalar process w'Y_i, lags 0..J."""
    coords = np.asarray(getattr(w, "coords", w), dtype=float)
    if coords.shape != (scheme.d,):
        raise ValueError(f"weight dimension {coords.shape} != ({scheme.d},)")
    return scheme.matrix @ coords


def true_covariance(scheme: CoefficientScheme, innov: InnovationSpec) -> np.ndarray:
    A = scheme.matrix
    cov = innov.sigma_sq * (A.T @ A)
    return (cov + cov.T) / 2.0
