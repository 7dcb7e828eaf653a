"""Acceptance criteria 1-10 at their stated tolerances.

Each test prints one "criterion N: PASS/FAIL" line; the lines are also collected
into a terminal-summary section. Total runtime is a few minutes on one CPU.
"""
import json
import time

import numpy as np
import pytest

from conftest import random_scheme
from hidimcov import cli, mc
from hidimcov.asymvar import beta_sq, isserlis_lrv_oracle
from hidimcov.limit import (
    build_limit_model, sample_endpoints, shrink_functional, two_block_variance_terms,
)
from hidimcov.model import InnovationSpec

GAUSS = {"family": "gaussian", "sigma_sq": 1.0}
AR_HALF = {"kind": "ar1_geometric", "d": 1, "J": 512, "rho": 0.5, "innovations": GAUSS}
AR_MIX = {"kind": "ar1_geometric", "d": 20, "J": 512, "rho": [0.1, 0.2, 0.3, 0.4, 0.5],
          "innovations": GAUSS}


def staggered(ds):
    return {"by_d": {str(d): mc.staggered_ar1_scheme(d, 0.3, [1.0, 1.5, 2.0]) for d in ds},
            "innovations": GAUSS}


def failed(report):
    return [a["name"] for a in report.assertions if not a["passed"]]


def test_c01_oracle_equivalence(criterion):
    rng = np.random.default_rng(2024)
    g = InnovationSpec()
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 5))
        scheme = random_scheme(rng, d, J=int(rng.integers(8, 48)))
        v, w, vt, wt = (rng.standard_normal(d) for _ in range(4))
        b = beta_sq(scheme, g, v, w, vt, wt)
        o = isserlis_lrv_oracle(scheme, v, w, vt, wt, tau_max=scheme.J, innov=g)
        worst = max(worst, abs(b - o) / max(1.0, abs(b)))
    elapsed = time.perf_counter() - start
    criterion(1, worst <= 1e-8 and elapsed < 10,
              f"max rel |beta - isserlis| = {worst:.2e} over 50 draws, {elapsed:.1f}s")


def test_c02_single_form_clt(criterion):
    rep = mc.run({"experiment": "clt_check", "scheme": AR_HALF, "n_grid": [4000],
                  "reps": 2000, "master_seed": 1, "weights": {"v": {"unit": 1}}})
    c = rep.cells[0]
    criterion(2, rep.passed and abs(c["alpha_sq"] - 160 / 27) < 1e-9 and rep.wall_clock < 60,
              f"Var = {c['variance']:.3f} vs 160/27 = {160 / 27:.3f}, KS = {c['ks']:.4f}, "
              f"{rep.wall_clock:.1f}s {failed(rep)}")


def test_c03_trace_coverage(criterion):
    rep = mc.run({"experiment": "trace_coverage", "scheme": AR_MIX, "n_grid": [2000],
                  "reps": 2000, "master_seed": 3, "params": {"level": 0.95}})
    c = rep.cells[0]
    ok = 0.93 <= c["coverage"] <= 0.97 and rep.passed and rep.wall_clock < 600
    criterion(3, ok, f"coverage = {c['coverage']:.4f}, oracle coverage = {c['coverage_oracle']:.4f}, "
                     f"{rep.wall_clock:.1f}s {failed(rep)}")


def test_c04_estimator_consistency(criterion):
    rep = mc.run({"experiment": "beta_consistency", "scheme": AR_MIX,
                  "n_grid": [500, 2000, 8000], "reps": 200, "master_seed": 4})
    seq = [round(c["mean_abs_err"], 4) for c in rep.cells]
    criterion(4, rep.passed, f"mean |sigma_hat^2 - sigma^2| over n = 500, 2000, 8000: {seq}")


def test_c05_shrinkage_dominance(criterion):
    rep = mc.run({"experiment": "shrinkage_rate", "scheme": staggered([10, 100, 200]),
                  "n_grid": [100], "reps": 500, "master_seed": 5,
                  "weights": {"v": {"unit": 1}},
                  "params": {"cells": [[100, 10], [100, 100], [100, 200]], "checks": ["dominance"]}})
    gains = [f"d/n={c['d'] / c['n']:g}: {c['gain_in_se']:.1f} se" for c in rep.cells]
    criterion(5, rep.passed and len(rep.cells) == 3, f"loss reduction at W*: {gains}")


def test_c06_weight_rate(criterion):
    rep = mc.run({"experiment": "shrinkage_rate", "scheme": staggered([10, 20, 40]),
                  "n_grid": [500, 2000, 8000], "d_grid": [10, 20, 40], "reps": 200,
                  "master_seed": 6, "weights": {"v": {"unit": 1}},
                  "params": {"checks": ["slope", "tracking"], "tracking_factor": 3.0}})
    slopes = sorted({(c["d"], round(c["rate_slope"], 3)) for c in rep.cells})
    spread = [a for a in rep.assertions if a["name"] == "delta_tracks_weight_error"][0]["value"]
    criterion(6, rep.passed, f"slopes (d, slope) = {slopes}, tracking spread = {spread:.2f} (<= 3)")


def test_c07_near_orthogonal_degeneration(criterion):
    orth = mc.run({"experiment": "ortho_study", "scheme": staggered([16]), "n_grid": [4000],
                   "d_grid": [16], "reps": 2000, "master_seed": 7, "params": {"W": 0.5}})
    share = mc.run({"experiment": "ortho_study", "scheme": staggered([16, 64, 256]),
                    "n_grid": [4000], "d_grid": [16, 64, 256], "reps": 300, "master_seed": 8,
                    "params": {"W": 0.5}})
    c = orth.cells[0]
    orth_ok = [a for a in orth.assertions if a["name"].startswith("orthogonal_variance")][0]["passed"]
    shares = [round(s["share_near"], 4) for s in share.cells]
    mono = [a for a in share.assertions if a["name"] == "near_orthogonal_share_decreasing"][0]["passed"]
    coh = all(a["passed"] for a in share.assertions if a["name"].startswith("coherence"))
    criterion(7, orth_ok and mono and coh,
              f"orthogonal Var = {c['orth_variance']:.3f} vs {c['orth_target']:.3f}; "
              f"near-orthogonal target share over d = 16, 64, 256: {shares}")


def test_c08_limit_model_self_consistency(criterion):
    doc = mc.staggered_ar1_scheme(6, 0.4, [1.0, 1.5])
    scheme, innov = mc.scheme_for_dimension({**doc, "innovations": GAUSS}, 6)
    v = np.array([0.6, 0.8, 0, 0, 0, 0])
    w = np.array([0, 0.6, 0.8, 0, 0, 0])
    worst = 0.0
    var_ok = True
    details = []
    for construction in ("joint", "two_block"):
        model = build_limit_model(scheme, innov, v, w, construction)
        x = sample_endpoints(model, 100_000, seed=8)
        emp = mc.cov_matrix(x)
        tol = np.maximum(0.05 * np.abs(model.cov), 0.02)
        worst = max(worst, float(np.max(np.abs(emp - model.cov) / tol)))
        if construction == "two_block":
            for W in (0.25, 0.5, 0.75):
                closed = sum(two_block_variance_terms(model.alpha_sq, model.beta, model.cross,
                                                      model.vw_inner, W))
                got = float(np.var(shrink_functional(model, x, W), ddof=1))
                var_ok &= abs(got - closed) <= 0.05 * closed
                details.append(f"W={W}: {got:.3f}/{closed:.3f}")
    criterion(8, worst <= 1.0 and var_ok,
              f"max |emp - cov| / tolerance = {worst:.3f} (<= 1); Var B'(W) emp/closed {details}")


def test_c09_martingale_gap(criterion):
    ar = mc.run({"experiment": "martingale_gap", "scheme": AR_HALF, "n_grid": [500, 4000],
                 "reps": 500, "master_seed": 9, "weights": {"v": {"unit": 1}}})
    wn = mc.run({"experiment": "martingale_gap", "n_grid": [500, 4000], "reps": 500,
                 "master_seed": 9, "weights": {"v": {"unit": 1}},
                 "scheme": {"kind": "white_noise", "d": 1, "J": 512, "innovations": GAUSS}})
    gaps = [f"{c['mean_gap']:.3g}" for c in ar.cells]
    wgap = max(c["mean_gap"] for c in wn.cells)
    criterion(9, ar.passed and wn.passed,
              f"ar1(0.5) gap n=500 -> 4000: {gaps}; white-noise max gap {wgap:.1e}")


def test_c10_determinism_across_workers(criterion, tmp_path):
    cfg = {"experiment": "shrinkage_rate", "scheme": staggered([10]), "n_grid": [200, 400],
           "d_grid": [10], "reps": 100, "master_seed": 10, "weights": {"v": {"unit": 1}}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    docs = []
    for workers in (1, 2, 3):
        out = tmp_path / f"w{workers}"
        cli.main(["mc", "run", "--config", str(path), "--out", str(out), "--workers", str(workers)])
        doc = json.loads((out / "report.json").read_text())
        docs.append({k: doc[k] for k in ("experiment", "config_digest", "cells", "assertions")})
    same = all(json.dumps(d, sort_keys=True) == json.dumps(docs[0], sort_keys=True) for d in docs)
    a = mc.run({**cfg, "workers": 1}).summaries()
    b = mc.run({**cfg, "workers": 2}).summaries()
    same &= json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    criterion(10, same, "report summaries identical for --workers 1, 2, 3 (CLI) and 1, 2 (API)")
