"""Monte Carlo experiments checking the Gaussian approximations at desk scale.

Each experiment is a grid of cells (sample size, dimension). Replication r of
cell c draws from its own generator seeded by (master_seed, c, r), so results do
not depend on how replications are spread over worker processes. Summaries are
computed from the per-replication records in replication order.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List

import numpy as np
from scipy.stats import norm

from . import asymvar, limit
from .covest import frobenius_star, pseudometric, sample_cov, trace_star
from .lrvest import KernelSpec, ci_from_parts, resolve_kernel, sigma_tr_hat_sq
from .model import (
    CoefficientScheme, InnovationSpec, draw_innovations, panel_from_innovations,
    true_covariance,
)
from .shrink import shrink_matrix, true_shrunk, w_star_hat, w_star_oracle
from .weights import WeightVector, near_orthogonal_family, unit_vector

SCHEMA_VERSION = 1
EXPERIMENTS = (
    "clt_check", "trace_coverage", "beta_consistency",
    "shrinkage_rate", "ortho_study", "martingale_gap",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    scheme: dict
    n_grid: List[int]
    d_grid: List[int] = field(default_factory=list)
    reps: int = 200
    weights: dict = field(default_factory=dict)
    kernel: object = "auto"
    master_seed: int = 0
    workers: int = 1
    params: dict = field(default_factory=dict)
    record_reps: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.reps < 100:
            raise ConfigError("reps must be >= 100")
        if not self.n_grid:
            raise ConfigError("n_grid must be nonempty")
        if not self.d_grid:
            if self.params.get("cells"):
                self.d_grid = sorted({int(d) for _, d in self.params["cells"]})
            elif "d" in self.scheme:
                self.d_grid = [int(self.scheme["d"])]
            else:
                raise ConfigError("d_grid is empty and the scheme fixes no dimension")
        self.n_grid = [int(n) for n in self.n_grid]
        self.d_grid = [int(d) for d in self.d_grid]
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        schema = doc.pop("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {schema}")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = {"schema": SCHEMA_VERSION}
        out.update(asdict(self))
        return out

    def digest(self) -> str:
        doc = self.to_dict()
        doc.pop("workers")
        blob = json.dumps(doc, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ExperimentReport:
    experiment: str
    cells: List[dict]
    assertions: List[dict]
    config_digest: str
    config: dict
    wall_clock: float
    records: Dict[int, Dict[str, np.ndarray]] = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def summaries(self) -> dict:
        """Everything except timing and raw records; identical across worker counts."""
        return {
            "experiment": self.experiment, "config_digest": self.config_digest,
            "cells": self.cells, "assertions": self.assertions,
        }

    def to_dict(self) -> dict:
        out = self.summaries()
        out["passed"] = self.passed
        out["wall_clock"] = self.wall_clock
        out["config"] = self.config
        return out

    def reps_csv(self) -> str:
        names = sorted({k for rec in self.records.values() for k in rec})
        lines = [",".join(["cell_id", "rep"] + names)]
        for cid in sorted(self.records):
            rec = self.records[cid]
            reps = len(next(iter(rec.values())))
            for r in range(reps):
                vals = [repr(float(rec[k][r])) if k in rec else "" for k in names]
                lines.append(",".join([str(cid), str(r)] + vals))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- statistics

def ks_statistic(sample, scale: float = 1.0) -> float:
    """Two-sided Kolmogorov-Smirnov distance of the sample to N(0, scale^2)."""
    x = np.sort(np.asarray(sample, dtype=float).reshape(-1))
    m = x.shape[0]
    if m == 0:
        raise ValueError("empty sample")
    F = norm.cdf(x / scale)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def _fsum_mean(x) -> float:
    x = np.asarray(x, dtype=float)
    return math.fsum(x.tolist()) / x.shape[0]


def mean_se(x) -> tuple:
    x = np.asarray(x, dtype=float)
    m = _fsum_mean(x)
    var = math.fsum(((x - m) ** 2).tolist()) / (x.shape[0] - 1)
    return m, math.sqrt(var / x.shape[0])


def var_se(x) -> tuple:
    """Sample variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    R = x.shape[0]
    m = _fsum_mean(x)
    c = x - m
    v = math.fsum((c * c).tolist()) / (R - 1)
    m4 = math.fsum((c**4).tolist()) / R
    return v, math.sqrt(max(m4 - v * v, 0.0) / R)


def cov_matrix(X) -> np.ndarray:
    """Sample covariance of the rows of X with compensated sums."""
    X = np.asarray(X, dtype=float)
    R, k = X.shape
    c = X - np.array([_fsum_mean(X[:, j]) for j in range(k)])
    out = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            out[i, j] = out[j, i] = math.fsum((c[:, i] * c[:, j]).tolist()) / (R - 1)
    return out


def log_slope(ns, values) -> float:
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    x = x - x.mean()
    return float(x @ (y - y.mean()) / (x @ x))


def strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def within(value: float, target: float, rel_tol: float, se: float) -> tuple:
    """|value - target| <= max(rel_tol |target|, 2 se); never tighter than 2 MC SEs."""
    allowed = max(rel_tol * abs(target), 2.0 * se)
    return abs(value - target) <= allowed, allowed


# ---------------------------------------------------------------- config helpers

def scheme_for_dimension(doc: dict, d: int) -> tuple:
    """Instantiate the scheme document at dimension d, tiling per-coordinate lists.

    A document of the form {"by_d": {"10": doc10, ...}, "innovations": ...} supplies
    a separate scheme for each dimension.
    """
    doc = dict(doc)
    if "by_d" in doc:
        by_d = doc.pop("by_d")
        if str(d) not in by_d:
            raise ConfigError(f"no scheme given for d={d}")
        inner = dict(by_d[str(d)])
        inner.setdefault("innovations", doc.get("innovations"))
        doc = inner
    params = dict(doc.pop("params", None) or {})
    params.update({k: v for k, v in doc.items() if k in ("rho", "scale", "table")})
    for key in ("rho", "scale"):
        if isinstance(params.get(key), list):
            vals = params[key]
            params[key] = [vals[k % len(vals)] for k in range(d)]
    if isinstance(params.get("table"), list):
        table = np.asarray(params["table"], dtype=float)
        if table.ndim == 2:
            params["table"] = table[:, [k % table.shape[1] for k in range(d)]].tolist()
    doc = {k: v for k, v in doc.items() if k not in ("rho", "scale", "table")}
    doc.update(params)
    doc["d"] = d
    scheme = CoefficientScheme.from_dict(doc)
    innov = InnovationSpec.from_dict(doc.get("innovations") or {})
    return scheme, innov


def staggered_ar1_scheme(d: int, rho: float, scales, J: int = 512) -> dict:
    """Table scheme with c_{nu-1+k}^(nu) = s_nu rho^k: coordinate nu is an AR(1)
    filter of the shared stream delayed by nu - 1 lags, giving a banded covariance
    Sigma(i, j) = s_i s_j rho^|i-j| / (1 - rho^2). ``scales`` is cycled over nu."""
    if d > J + 1:
        raise ValueError("staggering needs J >= d - 1")
    table = np.zeros((J + 1, d))
    lags = np.arange(J + 1)
    for nu in range(d):
        s = scales[nu % len(scales)]
        table[nu:, nu] = s * rho ** lags[: J + 1 - nu]
    return {"kind": "table", "d": d, "J": J, "table": table.tolist()}


def weight_from_spec(spec, d: int) -> WeightVector:
    """{"unit": j} | {"ones": true} (l2-normalized) | {"coords": [...]} | list."""
    if spec is None:
        return unit_vector(1, d)
    if isinstance(spec, dict):
        if "unit" in spec:
            return unit_vector(int(spec["unit"]), d)
        if spec.get("ones"):
            return WeightVector(np.ones(d) / math.sqrt(d))
        if "coords" in spec:
            return WeightVector(spec["coords"])
    return WeightVector(spec)


def _kernel(config: ExperimentConfig, n: int) -> KernelSpec:
    k = config.kernel
    if k in (None, "auto"):
        return resolve_kernel("bartlett", n)
    if isinstance(k, str):
        return resolve_kernel(k, n)
    window = k.get("window", "bartlett")
    bw = k.get("bandwidth", "auto")
    if bw == "auto":
        return resolve_kernel(window, n)
    return resolve_kernel(KernelSpec(window, int(bw)), n)


def rep_rng(master_seed: int, cell: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(cell, rep)))


def _panel(ctx: dict, rng) -> tuple:
    eps = draw_innovations(ctx["innov"], ctx["n"], ctx["scheme"].J, rng)
    return eps, panel_from_innovations(ctx["scheme"], eps)


# ---------------------------------------------------------------- per-replication kernels

def _rep_clt(ctx, rng) -> dict:
    _, Y = _panel(ctx, rng)
    v, w = ctx["v"], ctx["w"]
    xi = (Y @ v) * (Y @ w) - ctx["vSw"]
    return {"D1": float(xi.sum() / math.sqrt(ctx["n"]))}


def _rep_trace(ctx, rng) -> dict:
    _, Y = _panel(ctx, rng)
    n = ctx["n"]
    center = trace_star(sample_cov(Y).matrix)
    raw = sigma_tr_hat_sq(Y, ctx["kernel"])
    lo, hi, _ = ci_from_parts(center, raw, n, ctx["level"])
    olo, ohi, _ = ci_from_parts(center, ctx["sigma_tr_sq"], n, ctx["level"])
    truth = ctx["trace_true"]
    return {
        "center": center, "sigma_sq_hat": raw,
        "covered": float(lo <= truth <= hi), "covered_oracle": float(olo <= truth <= ohi),
        "abs_err": abs(raw - ctx["sigma_tr_sq"]),
    }


def _rep_shrink(ctx, rng) -> dict:
    _, Y = _panel(ctx, rng)
    Sigma = ctx["Sigma"]
    S = sample_cov(Y).matrix
    mu = trace_star(S)
    est = w_star_hat(Y, ctx["kernel"])
    W_hat, W_star = est["W_hat"], ctx["W_star"]
    s_hat = shrink_matrix(S, W_hat, mu)
    s_orc = shrink_matrix(S, W_star, mu)
    v, w = ctx["v"], ctx["w"]
    return {
        "W_hat": W_hat,
        "abs_err": abs(W_hat - W_star),
        "loss_sample": frobenius_star(S - Sigma) ** 2,
        "loss_oracle": frobenius_star(s_orc - Sigma) ** 2,
        "loss_hat": frobenius_star(s_hat - Sigma) ** 2,
        "delta_oraclehat": pseudometric(s_hat, s_orc, v, w),
        "delta_pop_oracle": pseudometric(s_hat, ctx["pop_oracle"], v, w),
    }


def _rep_ortho(ctx, rng) -> dict:
    _, Y = _panel(ctx, rng)
    n, W = ctx["n"], ctx["W"]
    root_n = math.sqrt(n)
    S = sample_cov(Y).matrix
    diff = S - ctx["Sigma"]
    mu_dev = root_n * (trace_star(S) - ctx["mu"])
    out = {}
    V = ctx["family"]
    form = root_n * np.einsum("kd,de,ke->k", V[ctx["left"]], diff, V[ctx["right"]])
    for k, (f, vw) in enumerate(zip(form, ctx["vw"])):
        out[f"N{k}"] = (1.0 - W) * float(f)
        out[f"T{k}"] = W * float(vw) * mu_dev
    return out


def _rep_gap(ctx, rng) -> dict:
    eps, Y = _panel(ctx, rng)
    n = ctx["n"]
    D = float(np.sum((Y @ ctx["v"]) * (Y @ ctx["w"])) - n * ctx["vSw"])
    M = float(limit.martingale_path(ctx["scheme"], ctx["innov"], eps, ctx["v"], ctx["w"], n)[-1])
    return {"D": D, "M": M, "gap": (D - M) ** 2 / n}


REP_KERNELS: Dict[str, Callable] = {
    "clt_check": _rep_clt,
    "trace_coverage": _rep_trace,
    "beta_consistency": _rep_trace,
    "shrinkage_rate": _rep_shrink,
    "ortho_study": _rep_ortho,
    "martingale_gap": _rep_gap,
}


def _run_chunk(experiment: str, ctx: dict, cell: int, master_seed: int, start: int, stop: int):
    fn = REP_KERNELS[experiment]
    return start, [fn(ctx, rep_rng(master_seed, cell, r)) for r in range(start, stop)]


def _collect(config: ExperimentConfig, ctxs: List[dict]) -> Dict[int, Dict[str, np.ndarray]]:
    """Run every replication of every cell; results land at their replication index."""
    jobs = []
    n_chunks = max(1, 4 * config.workers)
    for cell, ctx in enumerate(ctxs):
        bounds = np.linspace(0, config.reps, min(n_chunks, config.reps) + 1).astype(int)
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b > a:
                jobs.append((cell, int(a), int(b)))
    slots: Dict[int, list] = {cell: [None] * config.reps for cell in range(len(ctxs))}

    def store(cell, start, rows):
        slots[cell][start:start + len(rows)] = rows

    if config.workers == 1:
        for cell, a, b in jobs:
            store(cell, *_run_chunk(config.experiment, ctxs[cell], cell, config.master_seed, a, b))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                (cell, pool.submit(_run_chunk, config.experiment, ctxs[cell], cell,
                                   config.master_seed, a, b))
                for cell, a, b in jobs
            ]
            for cell, fut in futures:
                store(cell, *fut.result())
    records = {}
    for cell, rows in slots.items():
        keys = rows[0].keys()
        records[cell] = {k: np.array([row[k] for row in rows]) for k in keys}
    return records


# ---------------------------------------------------------------- experiments

def _base_ctx(config, n, d):
    scheme, innov = scheme_for_dimension(config.scheme, d)
    return {"scheme": scheme, "innov": innov, "n": n, "d": d}


def _pair_ctx(config, ctx):
    d = ctx["d"]
    v = weight_from_spec(config.weights.get("v"), d)
    w = weight_from_spec(config.weights.get("w", config.weights.get("v")), d)
    Sigma = true_covariance(ctx["scheme"], ctx["innov"])
    ctx.update(v=v.coords, w=w.coords, Sigma=Sigma, vSw=float(v.coords @ Sigma @ w.coords))
    return ctx


def _cells_nd(config) -> List[tuple]:
    explicit = config.params.get("cells")
    if explicit:
        return [(int(n), int(d)) for n, d in explicit]
    return [(n, d) for d in config.d_grid for n in config.n_grid]


def run_clt_check(config: ExperimentConfig) -> ExperimentReport:
    p = config.params
    var_tol, ks_max = p.get("var_tol", 0.10), p.get("ks_max", 0.04)
    ctxs = []
    for n, d in _cells_nd(config):
        ctx = _pair_ctx(config, _base_ctx(config, n, d))
        ctx["alpha_sq"] = asymvar.alpha_sq(ctx["scheme"], ctx["innov"], ctx["v"], ctx["w"])
        ctxs.append(ctx)
    records = _collect(config, ctxs)
    cells, assertions = [], []
    for cid, ctx in enumerate(ctxs):
        x = records[cid]["D1"]
        v, se = var_se(x)
        alpha = ctx["alpha_sq"]
        ks = ks_statistic(x, math.sqrt(alpha)) if alpha > 0 else float("nan")
        ok, allowed = within(v, alpha, var_tol, se)
        cells.append({
            "cell": cid, "n": ctx["n"], "d": ctx["d"], "mean": _fsum_mean(x),
            "variance": v, "variance_se": se, "alpha_sq": alpha,
            "rel_err": (v - alpha) / alpha if alpha else float("nan"), "ks": ks,
        })
        assertions.append(_assertion(f"variance[n={ctx['n']},d={ctx['d']}]", ok,
                                     value=v, target=alpha, allowed=allowed))
        assertions.append(_assertion(f"ks[n={ctx['n']},d={ctx['d']}]", ks <= ks_max,
                                     value=ks, allowed=ks_max))
    return _report(config, cells, assertions, records)


def _trace_ctxs(config):
    ctxs = []
    level = config.params.get("level", 0.95)
    for n, d in _cells_nd(config):
        ctx = _base_ctx(config, n, d)
        Sigma = true_covariance(ctx["scheme"], ctx["innov"])
        kern = asymvar.unit_kernel(ctx["scheme"], ctx["innov"])
        ctx.update(
            kernel=_kernel(config, n), level=level, trace_true=trace_star(Sigma),
            sigma_tr_sq=asymvar.sigma_tr_sq(kern),
        )
        ctxs.append(ctx)
    return ctxs


def run_trace_coverage(config: ExperimentConfig) -> ExperimentReport:
    ctxs = _trace_ctxs(config)
    records = _collect(config, ctxs)
    level = config.params.get("level", 0.95)
    tol = config.params.get("coverage_tol", 0.02)
    R = config.reps
    band3 = 3.0 * math.sqrt(level * (1 - level) / R)
    cells, assertions = [], []
    for cid, ctx in enumerate(ctxs):
        rec = records[cid]
        cov, cov_se = mean_se(rec["covered"])
        ocov, ocov_se = mean_se(rec["covered_oracle"])
        cells.append({
            "cell": cid, "n": ctx["n"], "d": ctx["d"], "level": level,
            "coverage": cov, "coverage_se": cov_se,
            "coverage_oracle": ocov, "coverage_oracle_se": ocov_se,
            "sigma_tr_sq": ctx["sigma_tr_sq"], "mean_sigma_sq_hat": _fsum_mean(rec["sigma_sq_hat"]),
            "bandwidth": ctx["kernel"].m,
        })
        tag = f"[n={ctx['n']},d={ctx['d']}]"
        allowed = max(tol, 2 * math.sqrt(level * (1 - level) / R))
        assertions.append(_assertion(f"coverage{tag}", abs(cov - level) <= allowed,
                                     value=cov, target=level, allowed=allowed))
        assertions.append(_assertion(f"oracle_coverage{tag}", abs(ocov - level) <= band3,
                                     value=ocov, target=level, allowed=band3))
    return _report(config, cells, assertions, records)


def run_beta_consistency(config: ExperimentConfig) -> ExperimentReport:
    ctxs = _trace_ctxs(config)
    records = _collect(config, ctxs)
    cells, assertions = [], []
    for cid, ctx in enumerate(ctxs):
        m, se = mean_se(records[cid]["abs_err"])
        cells.append({
            "cell": cid, "n": ctx["n"], "d": ctx["d"], "mean_abs_err": m, "se": se,
            "sigma_tr_sq": ctx["sigma_tr_sq"], "bandwidth": ctx["kernel"].m,
        })
    for d in sorted({c["d"] for c in cells}):
        seq = [c["mean_abs_err"] for c in sorted(cells, key=lambda c: c["n"]) if c["d"] == d]
        assertions.append(_assertion(f"decreasing[d={d}]", strictly_decreasing(seq), value=seq))
    return _report(config, cells, assertions, records)


def run_shrinkage_rate(config: ExperimentConfig) -> ExperimentReport:
    p = config.params
    ctxs = []
    for n, d in _cells_nd(config):
        ctx = _pair_ctx(config, _base_ctx(config, n, d))
        orc = w_star_oracle(ctx["scheme"], ctx["innov"], n)
        ctx.update(
            kernel=_kernel(config, n), W_star=orc["W_star"], oracle=orc,
            pop_oracle=true_shrunk(ctx["Sigma"], orc["W_star"]),
        )
        ctxs.append(ctx)
    records = _collect(config, ctxs)
    cells, assertions = [], []
    for cid, ctx in enumerate(ctxs):
        rec = records[cid]
        err, err_se = mean_se(rec["abs_err"])
        gain, gain_se = mean_se(rec["loss_sample"] - rec["loss_oracle"])
        delta, delta_se = mean_se(rec["delta_oraclehat"])
        cells.append({
            "cell": cid, "n": ctx["n"], "d": ctx["d"], "W_star": ctx["W_star"],
            "mean_W_hat": _fsum_mean(rec["W_hat"]), "mean_abs_err": err, "abs_err_se": err_se,
            "mse_sample": _fsum_mean(rec["loss_sample"]),
            "mse_oracle": _fsum_mean(rec["loss_oracle"]),
            "mse_hat": _fsum_mean(rec["loss_hat"]),
            "gain": gain, "gain_se": gain_se,
            "gain_in_se": gain / gain_se if gain_se > 0 else float("inf"),
            "mean_delta_oraclehat": delta, "delta_se": delta_se,
            "mean_delta_pop_oracle": _fsum_mean(rec["delta_pop_oracle"]),
            "delta_to_err": delta / err if err > 0 else float("nan"),
        })
    check = set(p.get("checks", ["slope", "dominance", "tracking"]))
    if "dominance" in check:
        for c in cells:
            assertions.append(_assertion(
                f"dominance[n={c['n']},d={c['d']}]", c["gain"] >= 2.0 * c["gain_se"] and c["gain"] > 0,
                value=c["gain"], allowed=2.0 * c["gain_se"]))
    if "slope" in check:
        for d in sorted({c["d"] for c in cells}):
            sub = sorted((c for c in cells if c["d"] == d), key=lambda c: c["n"])
            if len(sub) < 2:
                continue
            slope = log_slope([c["n"] for c in sub], [c["mean_abs_err"] for c in sub])
            for c in sub:
                c["rate_slope"] = slope
            assertions.append(_assertion(f"slope[d={d}]", slope < 0, value=slope))
    if "tracking" in check:
        ratios = [c["delta_to_err"] for c in cells if np.isfinite(c["delta_to_err"])]
        spread = max(ratios) / min(ratios) if ratios and min(ratios) > 0 else float("inf")
        assertions.append(_assertion("delta_tracks_weight_error", spread <= p.get("tracking_factor", 3.0),
                                     value=spread, allowed=p.get("tracking_factor", 3.0)))
    return _report(config, cells, assertions, records)


def run_ortho_study(config: ExperimentConfig) -> ExperimentReport:
    """Variance split of the shrinkage bilinear form into nonparametric and target parts.

    Per dimension the pair list holds (e_1, e_2) (exactly orthogonal), (x_1, x_1)
    (regular), and all pairs of a nearly orthogonal family x_1..x_m.
    """
    p = config.params
    W = p.get("W", 0.5)
    A = p.get("A", 2.0)
    m = p.get("family_size", 8)
    var_tol = p.get("var_tol", 0.10)
    ctxs = []
    for n, d in _cells_nd(config):
        ctx = _base_ctx(config, n, d)
        fam = near_orthogonal_family(d, m, min(A, math.sqrt(d) / 2), seed=[config.master_seed, d])
        vecs = np.vstack([unit_vector(1, d).coords, unit_vector(2, d).coords] + [x.coords for x in fam])
        left = [0, 2] + [2 + i for i in range(m) for j in range(i + 1, m)]
        right = [1, 2] + [2 + j for i in range(m) for j in range(i + 1, m)]
        Sigma = true_covariance(ctx["scheme"], ctx["innov"])
        vw = np.einsum("kd,kd->k", vecs[left], vecs[right])
        alpha_orth = asymvar.alpha_sq(ctx["scheme"], ctx["innov"], vecs[0], vecs[1])
        kern = asymvar.unit_kernel(ctx["scheme"], ctx["innov"])
        F_units = np.array([asymvar.f_table(ctx["scheme"], e, e).f_tilde_0 for e in np.eye(d)])
        model_terms = []
        for a, b in zip(left, right):
            al = asymvar.alpha_sq(ctx["scheme"], ctx["innov"], vecs[a], vecs[b])
            cross = _cross_terms(ctx["scheme"], ctx["innov"], vecs[a], vecs[b], F_units)
            model_terms.append(limit.two_block_variance_terms(al, kern.beta, cross, vecs[a] @ vecs[b], W))
        ctx.update(
            W=W, family=vecs, left=left, right=right, vw=vw, Sigma=Sigma,
            mu=trace_star(Sigma), alpha_orth=alpha_orth, model_terms=model_terms,
            coherence=float(np.max(np.abs(vw[2:]))), bound=min(A, math.sqrt(d) / 2) / math.sqrt(d),
        )
        ctxs.append(ctx)
    records = _collect(config, ctxs)
    cells, assertions = [], []
    for cid, ctx in enumerate(ctxs):
        rec = records[cid]
        n_pairs = len(ctx["left"])
        tot = [rec[f"N{k}"] + rec[f"T{k}"] for k in range(n_pairs)]
        var_total = [var_se(t) for t in tot]
        var_T = [var_se(rec[f"T{k}"])[0] for k in range(n_pairs)]
        near = range(2, n_pairs)
        share_near = math.fsum(var_T[k] for k in near) / math.fsum(var_total[k][0] for k in near)
        share_regular = var_T[1] / var_total[1][0]
        terms = ctx["model_terms"]
        model_share_near = math.fsum(terms[k][1] for k in near) / math.fsum(sum(terms[k]) for k in near)
        target = (1 - ctx["W"]) ** 2 * ctx["alpha_orth"]
        v_orth, se_orth = var_total[0]
        ok, allowed = within(v_orth, target, var_tol, se_orth)
        cells.append({
            "cell": cid, "n": ctx["n"], "d": ctx["d"], "W": ctx["W"],
            "orth_variance": v_orth, "orth_variance_se": se_orth, "orth_target": target,
            "share_near": share_near, "share_regular": share_regular,
            "model_share_near": model_share_near,
            "model_share_regular": terms[1][1] / sum(terms[1]),
            "coherence": ctx["coherence"], "coherence_bound": ctx["bound"],
        })
        assertions.append(_assertion(f"orthogonal_variance[n={ctx['n']},d={ctx['d']}]", ok,
                                     value=v_orth, target=target, allowed=allowed))
        assertions.append(_assertion(f"coherence[d={ctx['d']}]",
                                     ctx["coherence"] <= ctx["bound"] + 1e-12,
                                     value=ctx["coherence"], allowed=ctx["bound"]))
    if len(cells) > 1:
        seq = [c["share_near"] for c in sorted(cells, key=lambda c: c["d"])]
        assertions.append(_assertion("near_orthogonal_share_decreasing", strictly_decreasing(seq), value=seq))
        floor = p.get("regular_share_floor", 0.05)
        reg = [c["share_regular"] for c in cells]
        assertions.append(_assertion("regular_share_bounded_below", min(reg) >= floor, value=reg, allowed=floor))
    return _report(config, cells, assertions, records)


def _cross_terms(scheme, innov, v, w, F_units) -> np.ndarray:
    """beta(v, w, e_j, e_j) for all j, given the unit f-tables as rows of F_units."""
    f_vw = asymvar.f_table(scheme, v, w).f_tilde_0
    s4 = innov.sigma_sq**2
    return (innov.gamma4 - s4) * f_vw[0] * F_units[:, 0] + s4 * (F_units[:, 1:] @ f_vw[1:])


def run_martingale_gap(config: ExperimentConfig) -> ExperimentReport:
    ctxs = [_pair_ctx(config, _base_ctx(config, n, d)) for n, d in _cells_nd(config)]
    records = _collect(config, ctxs)
    cells, assertions = [], []
    for cid, ctx in enumerate(ctxs):
        g, se = mean_se(records[cid]["gap"])
        f = asymvar.f_table(ctx["scheme"], ctx["v"], ctx["w"]).f_tilde_0
        cells.append({
            "cell": cid, "n": ctx["n"], "d": ctx["d"], "mean_gap": g, "gap_se": se,
            "min_gap": float(records[cid]["gap"].min()),
            "degenerate": bool(np.all(f[1:] == 0.0)),
        })
    for d in sorted({c["d"] for c in cells}):
        sub = sorted((c for c in cells if c["d"] == d), key=lambda c: c["n"])
        if all(c["degenerate"] for c in sub):
            worst = max(c["mean_gap"] for c in sub)
            assertions.append(_assertion(f"gap_vanishes[d={d}]", worst <= 1e-12, value=worst, allowed=1e-12))
        else:
            seq = [c["mean_gap"] for c in sub]
            assertions.append(_assertion(f"gap_decreasing[d={d}]", strictly_decreasing(seq), value=seq))
        assertions.append(_assertion(f"gap_nonnegative[d={d}]", min(c["min_gap"] for c in sub) >= 0.0))
    return _report(config, cells, assertions, records)


def _assertion(name: str, passed: bool, **info) -> dict:
    out = {"name": name, "passed": bool(passed)}
    out.update(info)
    return out


def _report(config, cells, assertions, records) -> ExperimentReport:
    return ExperimentReport(
        experiment=config.experiment, cells=cells, assertions=assertions,
        config_digest=config.digest(), config=config.to_dict(), wall_clock=0.0,
        records=records,
    )


RUNNERS = {
    "clt_check": run_clt_check,
    "trace_coverage": run_trace_coverage,
    "beta_consistency": run_beta_consistency,
    "shrinkage_rate": run_shrinkage_rate,
    "ortho_study": run_ortho_study,
    "martingale_gap": run_martingale_gap,
}


def run(config) -> ExperimentReport:
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    start = time.perf_counter()
    report = RUNNERS[config.experiment](config)
    report.wall_clock = time.perf_counter() - start
    return report


def default_workers() -> int:
    return int(os.environ.get("HIDIMCOV_WORKERS", "1"))
